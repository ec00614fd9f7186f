use std::collections::HashMap;

use milp_isa::graph::{build_bipartite, build_bipartite_with, edge_weight, GraphOptions};
use milp_isa::mps::{
    instance_stats, parse_mps_str, write_mps, ConstraintRecord, MilpInstance, ObjectiveSense, Sense, SparseMatrix,
    VariableRecord,
};
use milp_isa::synth::generate_set_partitioning;
use proptest::prelude::*;

/// Exact-cover search by smallest-candidate-set branching. Returns a set of
/// columns covering every row exactly once.
fn exact_cover(inst: &MilpInstance) -> Option<Vec<usize>> {
    let n = inst.constraints.len();
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); inst.variables.len()];
    for &(r, c, _) in inst.matrix.entries() {
        cols[c].push(r);
    }
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, rows) in cols.iter().enumerate() {
        for &r in rows {
            by_row[r].push(c);
        }
    }
    fn search(
        cols: &[Vec<usize>],
        by_row: &[Vec<usize>],
        covered: &mut [bool],
        chosen: &mut Vec<usize>,
        budget: &mut usize,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let fits = |c: usize, covered: &[bool]| cols[c].iter().all(|&r| !covered[r]);
        let Some(row) = (0..covered.len())
            .filter(|&r| !covered[r])
            .min_by_key(|&r| by_row[r].iter().filter(|&&c| fits(c, covered)).count())
        else {
            return true;
        };
        for &c in &by_row[row] {
            if fits(c, covered) {
                cols[c].iter().for_each(|&r| covered[r] = true);
                chosen.push(c);
                if search(cols, by_row, covered, chosen, budget) {
                    return true;
                }
                chosen.pop();
                cols[c].iter().for_each(|&r| covered[r] = false);
            }
        }
        false
    }
    let mut covered = vec![false; n];
    let mut chosen = Vec::new();
    let mut budget = 5_000_000;
    search(&cols, &by_row, &mut covered, &mut chosen, &mut budget).then_some(chosen)
}

#[test]
fn generated_instance_shape() {
    let inst = generate_set_partitioning(7, 20, 120).unwrap();
    assert_eq!(inst.variables.len(), 120);
    assert_eq!(inst.constraints.len(), 20);
    assert!(inst
        .variables
        .iter()
        .all(|v| v.is_integer && v.lower_bound == 0.0 && v.upper_bound == 1.0 && v.obj_coeff > 0.0));
    assert!(inst.variables.iter().all(|v| v.obj_coeff.fract() == 0.0));
    assert!(inst.constraints.iter().all(|c| c.sense == Sense::Eq && c.rhs == 1.0));
    assert_eq!(inst, generate_set_partitioning(7, 20, 120).unwrap());
    assert_ne!(inst.matrix, generate_set_partitioning(8, 20, 120).unwrap().matrix);
}

#[test]
fn generated_columns_cover_two_to_six_flights() {
    let inst = generate_set_partitioning(9, 50, 400).unwrap();
    let mut per_col = vec![0usize; 400];
    for &(_, c, v) in inst.matrix.entries() {
        assert_eq!(v, 1.0);
        per_col[c] += 1;
    }
    for (c, &k) in per_col.iter().enumerate() {
        let density = k as f64 / 50.0;
        assert!((2.0 / 50.0..=6.0 / 50.0).contains(&density), "column {c}: {k} flights");
    }
}

#[test]
fn generated_instances_contain_a_partition() {
    for (seed, flights, pairings) in [(7, 20, 120), (9, 50, 400), (1, 3, 3), (4, 30, 30)] {
        let inst = generate_set_partitioning(seed, flights, pairings).unwrap();
        let cover = exact_cover(&inst).unwrap_or_else(|| panic!("no exact cover for seed {seed}"));
        let mut hits = vec![0; flights];
        for &(r, c, _) in inst.matrix.entries() {
            if cover.contains(&c) {
                hits[r] += 1;
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
    }
}

#[test]
fn generated_stats_match_enumeration() {
    let inst = generate_set_partitioning(7, 20, 120).unwrap();
    let reparsed = parse_mps_str(&write_mps(&inst)).unwrap();
    let stats = instance_stats(&reparsed);
    let nnz = inst.matrix.entries().len();
    assert_eq!(stats.n_vars, 120);
    assert_eq!(stats.n_cons, 20);
    assert_eq!(stats.n_integer_vars, 120);
    assert_eq!(stats.nnz, nnz);
    assert_eq!(stats.density, nnz as f64 / (120.0 * 20.0));
}

#[test]
fn generated_instance_roundtrips() {
    let inst = generate_set_partitioning(7, 20, 120).unwrap();
    let text = write_mps(&inst);
    let back = parse_mps_str(&text).unwrap();
    assert_eq!(back, inst);
    assert_eq!(write_mps(&back), text);
}

#[test]
fn graph_mirrors_matrix() {
    let inst = generate_set_partitioning(7, 20, 120).unwrap();
    let g = build_bipartite(&inst);
    assert_eq!((g.n_var, g.n_con, g.n_edges()), (120, 20, inst.matrix.nnz()));
    assert_eq!(g.var_degrees(), inst.matrix.col_counts());
    assert_eq!(g.con_degrees(), inst.matrix.row_counts());
    let mut per_col: HashMap<usize, usize> = HashMap::new();
    for &(_, c, _) in inst.matrix.entries() {
        *per_col.entry(c).or_default() += 1;
    }
    for (c, &d) in g.var_degrees().iter().enumerate() {
        assert_eq!(per_col.get(&c).copied().unwrap_or(0), d);
    }
    for e in &g.edges {
        assert_eq!(e.weight, e.raw_coeff.tanh());
    }
}

fn variable(name: String, obj: f64, lo: f64, hi: f64, int: bool) -> VariableRecord {
    VariableRecord {
        name,
        obj_coeff: obj,
        lower_bound: lo,
        upper_bound: hi,
        is_integer: int,
    }
}

fn arb_instance() -> impl Strategy<Value = MilpInstance> {
    let bounds = prop_oneof![
        Just((0.0, f64::INFINITY)),
        Just((f64::NEG_INFINITY, f64::INFINITY)),
        Just((0.0, 1.0)),
        Just((f64::NEG_INFINITY, 0.0)),
        (-50i32..50, 0i32..50).prop_map(|(lo, w)| (f64::from(lo), f64::from(lo + w))),
        (-1e3..1e3f64, 0.0..1e3f64).prop_map(|(lo, w)| (lo, lo + w)),
    ];
    let var = (-1e4..1e4f64, bounds, any::<bool>());
    let sense = prop_oneof![Just(Sense::Le), Just(Sense::Eq), Just(Sense::Ge)];
    let con = (
        sense,
        prop_oneof![Just(0.0), -100.0..100.0f64],
        prop::option::of(-10.0..10.0f64),
    );
    (
        prop::collection::vec(var, 1..8),
        prop::collection::vec(con, 0..6),
        any::<bool>(),
        prop_oneof![Just(0.0), -5.0..5.0f64],
        any::<u64>(),
    )
        .prop_map(|(vars, cons, max, offset, seed)| {
            let variables: Vec<_> = vars
                .into_iter()
                .enumerate()
                .map(|(j, (obj, (lo, hi), int))| variable(format!("x{j}"), obj, lo, hi, int))
                .collect();
            let constraints: Vec<_> = cons
                .into_iter()
                .enumerate()
                .map(|(i, (sense, rhs, range))| ConstraintRecord {
                    name: format!("c{i}"),
                    sense,
                    rhs,
                    range: range.filter(|r| *r != 0.0),
                })
                .collect();
            let mut entries = Vec::new();
            let mut s = seed;
            for r in 0..constraints.len() {
                for c in 0..variables.len() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    if s >> 62 == 0 {
                        let v = ((s >> 20) % 2001) as f64 / 100.0 - 10.0;
                        if v != 0.0 {
                            entries.push((r, c, v));
                        }
                    }
                }
            }
            MilpInstance {
                name: "PROP".into(),
                objective_sense: if max { ObjectiveSense::Max } else { ObjectiveSense::Min },
                objective_offset: offset,
                matrix: SparseMatrix::from_triplets(constraints.len(), variables.len(), entries).unwrap(),
                variables,
                constraints,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn written_instances_parse_back_identically(inst in arb_instance()) {
        let text = write_mps(&inst);
        let back = parse_mps_str(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(write_mps(&back), text);
    }

    #[test]
    fn generator_roundtrips(seed in 0u64..1000, flights in 1usize..30, extra in 0usize..40) {
        let inst = generate_set_partitioning(seed, flights, flights + extra).unwrap();
        prop_assert_eq!(parse_mps_str(&write_mps(&inst)).unwrap(), inst);
    }

    #[test]
    fn density_matches_entries(inst in arb_instance()) {
        let s = instance_stats(&inst);
        let cells = inst.variables.len() * inst.constraints.len();
        prop_assert_eq!(s.nnz, inst.matrix.entries().len());
        let want = if cells == 0 { 0.0 } else { s.nnz as f64 / cells as f64 };
        prop_assert_eq!(s.density, want);
    }

    #[test]
    fn graph_features_are_finite_and_weights_bounded(inst in arb_instance(), standardize in any::<bool>()) {
        let opts = GraphOptions { standardize, ..GraphOptions::default() };
        let g = build_bipartite_with(&inst, &opts);
        prop_assert!(g.var_features.is_finite() && g.con_features.is_finite());
        prop_assert_eq!(g.n_edges(), inst.matrix.nnz());
        for e in &g.edges {
            prop_assert!(e.weight.abs() < 1.0);
            prop_assert_eq!(e.weight.signum(), e.raw_coeff.signum());
        }
    }

    #[test]
    fn edge_weight_is_monotone(mut xs in prop::collection::vec(-20.0..20.0f64, 2..50)) {
        xs.retain(|x| *x != 0.0);
        xs.sort_by(f64::total_cmp);
        let ws: Vec<f64> = xs.iter().map(|&x| edge_weight(x).unwrap()).collect();
        prop_assert!(ws.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn permuting_variables_permutes_var_rows(inst in arb_instance(), seed in any::<u64>()) {
        let n = inst.variables.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        // New column j holds old column perm[j].
        let mut inv = vec![0; n];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }
        let permuted = MilpInstance {
            variables: perm.iter().map(|&p| inst.variables[p].clone()).collect(),
            matrix: SparseMatrix::from_triplets(
                inst.constraints.len(),
                n,
                inst.matrix.entries().iter().map(|&(r, c, v)| (r, inv[c], v)).collect(),
            )
            .unwrap(),
            ..inst.clone()
        };
        let (a, b) = (build_bipartite(&inst), build_bipartite(&permuted));
        for (j, &p) in perm.iter().enumerate() {
            prop_assert_eq!(b.var_features.row(j), a.var_features.row(p));
        }
        prop_assert_eq!(&a.con_features, &b.con_features);
    }
}
