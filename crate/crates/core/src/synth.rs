//! Seeded synthetic set-partitioning instances shaped like airline crew
//! scheduling: one equality row per flight, one binary column per pairing.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mps::{ConstraintRecord, MilpInstance, ObjectiveSense, Sense, SparseMatrix, VariableRecord};

pub const MIN_COVER: usize = 2;
pub const MAX_COVER: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("n_flights must be at least 1")]
    NoFlights,
    #[error("n_pairings ({n_pairings}) must be at least n_flights ({n_flights})")]
    TooFewPairings { n_flights: usize, n_pairings: usize },
}

/// Generates a set-partitioning instance that is feasible by construction.
///
/// A random partition of the flights into blocks of 2..=6 is planted as a
/// subset of the pairings; the remaining pairings cover random subsets of
/// the same sizes. Pairings are shuffled so the planted cover is not
/// recognisable by position.
pub fn generate_set_partitioning(
    seed: u64,
    n_flights: usize,
    n_pairings: usize,
) -> Result<MilpInstance, GenerateError> {
    if n_flights == 0 {
        return Err(GenerateError::NoFlights);
    }
    if n_pairings < n_flights {
        return Err(GenerateError::TooFewPairings { n_flights, n_pairings });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_cover = MIN_COVER.min(n_flights);
    let max_cover = MAX_COVER.min(n_flights);

    let mut order: Vec<usize> = (0..n_flights).collect();
    order.shuffle(&mut rng);
    let mut pairings: Vec<Vec<usize>> = Vec::with_capacity(n_pairings);
    let mut rest = order.as_slice();
    while !rest.is_empty() {
        let size = if rest.len() <= max_cover {
            rest.len()
        } else {
            // Leave at least `min_cover` flights for the next block.
            rng.random_range(min_cover..=max_cover.min(rest.len() - min_cover))
        };
        let (block, tail) = rest.split_at(size);
        pairings.push(block.to_vec());
        rest = tail;
    }
    while pairings.len() < n_pairings {
        let size = rng.random_range(min_cover..=max_cover);
        pairings.push(index::sample(&mut rng, n_flights, size).into_vec());
    }
    pairings.shuffle(&mut rng);

    let mut entries = Vec::new();
    let variables = pairings
        .iter()
        .enumerate()
        .map(|(j, flights)| {
            entries.extend(flights.iter().map(|&f| (f, j, 1.0)));
            let per_flight: u32 = rng.random_range(300..=1500);
            VariableRecord {
                name: format!("p{j}"),
                obj_coeff: f64::from(per_flight * flights.len() as u32),
                lower_bound: 0.0,
                upper_bound: 1.0,
                is_integer: true,
            }
        })
        .collect();
    let constraints = (0..n_flights)
        .map(|f| ConstraintRecord {
            name: format!("f{f}"),
            sense: Sense::Eq,
            rhs: 1.0,
            range: None,
        })
        .collect();
    let matrix =
        SparseMatrix::from_triplets(n_flights, n_pairings, entries).expect("generated pairings never repeat a flight");
    Ok(MilpInstance {
        name: format!("setpart_s{seed}_{n_flights}x{n_pairings}"),
        objective_sense: ObjectiveSense::Min,
        objective_offset: 0.0,
        variables,
        constraints,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(
            generate_set_partitioning(0, 0, 5).unwrap_err(),
            GenerateError::NoFlights
        );
        assert!(matches!(
            generate_set_partitioning(0, 10, 9),
            Err(GenerateError::TooFewPairings { .. })
        ));
    }

    #[test]
    fn single_flight_is_supported() {
        let inst = generate_set_partitioning(1, 1, 3).unwrap();
        assert_eq!(inst.matrix.nnz(), 3);
    }
}
