//! MPS reader/writer and the in-memory MILP instance model.
//!
//! Both fixed-column and whitespace-delimited (free) layouts are accepted.
//! The layout is detected once per file: any tab, overlong line, or data token
//! that falls outside the fixed field columns selects the free layout.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ObjectiveSense {
    #[default]
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub name: String,
    pub obj_coeff: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub is_integer: bool,
}

/// A linear constraint. A ranged row keeps its MPS range value; the
/// effective interval is given by [`ConstraintRecord::interval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    pub range: Option<f64>,
}

impl ConstraintRecord {
    /// Row activity interval `[lo, hi]` after applying MPS range semantics.
    pub fn interval(&self) -> (f64, f64) {
        let inf = f64::INFINITY;
        match (self.sense, self.range) {
            (Sense::Le, None) => (-inf, self.rhs),
            (Sense::Ge, None) => (self.rhs, inf),
            (Sense::Eq, None) => (self.rhs, self.rhs),
            (Sense::Le, Some(r)) => (self.rhs - r.abs(), self.rhs),
            (Sense::Ge, Some(r)) => (self.rhs, self.rhs + r.abs()),
            (Sense::Eq, Some(r)) if r >= 0.0 => (self.rhs, self.rhs + r),
            (Sense::Eq, Some(r)) => (self.rhs + r, self.rhs),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("entry ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("duplicate entry at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("stored value at ({row}, {col}) is zero or not finite")]
    BadValue { row: usize, col: usize },
}

/// Coordinate-format sparse matrix, entries kept sorted by `(col, row)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        for &(row, col, value) in &entries {
            if row >= n_rows || col >= n_cols {
                return Err(MatrixError::OutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
            if value == 0.0 || !value.is_finite() {
                return Err(MatrixError::BadValue { row, col });
            }
        }
        entries.sort_by_key(|&(r, c, _)| (c, r));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(MatrixError::Duplicate {
                row: w[0].0,
                col: w[0].1,
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Entries as `(row, col, value)`, column-major.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for &(_, c, _) in &self.entries {
            counts[c] += 1;
        }
        counts
    }

    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_rows];
        for &(r, _, _) in &self.entries {
            counts[r] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub name: String,
    pub objective_sense: ObjectiveSense,
    /// Constant term of the objective (negated RHS of the objective row).
    pub objective_offset: f64,
    pub variables: Vec<VariableRecord>,
    pub constraints: Vec<ConstraintRecord>,
    pub matrix: SparseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub n_vars: usize,
    pub n_cons: usize,
    pub n_integer_vars: usize,
    pub nnz: usize,
    pub density: f64,
}

impl fmt::Display for InstanceStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vars={} (integer {}) cons={} nnz={} density={:.4}%",
            self.n_vars,
            self.n_integer_vars,
            self.n_cons,
            self.nnz,
            self.density * 100.0
        )
    }
}

pub fn instance_stats(inst: &MilpInstance) -> InstanceStats {
    let n_vars = inst.variables.len();
    let n_cons = inst.constraints.len();
    let nnz = inst.matrix.nnz();
    let cells = n_vars * n_cons;
    InstanceStats {
        n_vars,
        n_cons,
        n_integer_vars: inst.variables.iter().filter(|v| v.is_integer).count(),
        nnz,
        density: if cells == 0 { 0.0 } else { nnz as f64 / cells as f64 },
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: section {section} out of order")]
    SectionOrder { line: usize, section: String },
    #[error("line {line}: unknown row '{name}'")]
    UnknownRow { line: usize, name: String },
    #[error("line {line}: unknown column '{name}'")]
    UnknownColumn { line: usize, name: String },
    #[error("line {line}: duplicate coefficient for row '{row}', column '{col}'")]
    DuplicateCoefficient { line: usize, row: String, col: String },
    #[error("line {line}: '{field}' is not a number")]
    NotNumeric { line: usize, field: String },
    #[error("missing ENDATA")]
    MissingEnd,
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::SectionOrder { line, .. }
            | ParseError::UnknownRow { line, .. }
            | ParseError::UnknownColumn { line, .. }
            | ParseError::DuplicateCoefficient { line, .. }
            | ParseError::NotNumeric { line, .. } => Some(*line),
            ParseError::MissingEnd | ParseError::Io(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

impl Section {
    fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "NAME" => Section::Name,
            "OBJSENSE" => Section::ObjSense,
            "ROWS" => Section::Rows,
            "COLUMNS" => Section::Columns,
            "RHS" => Section::Rhs,
            "RANGES" => Section::Ranges,
            "BOUNDS" => Section::Bounds,
            "ENDATA" => Section::End,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Fixed,
    Free,
}

// 0-based start columns of the six fixed-layout fields.
const FIXED_STARTS: [usize; 6] = [1, 4, 14, 24, 39, 49];
const FIXED_ENDS: [usize; 6] = [3, 12, 22, 36, 47, 61];

fn is_comment_or_blank(line: &str) -> bool {
    line.trim().is_empty() || line.starts_with('*')
}

fn is_header(line: &str) -> bool {
    !line.starts_with(' ') && !line.starts_with('\t')
}

fn detect_layout(lines: &[&str]) -> Layout {
    for line in lines {
        if is_comment_or_blank(line) {
            continue;
        }
        if line.contains('\t') {
            return Layout::Free;
        }
        if is_header(line) {
            continue;
        }
        if line.trim_end().len() > FIXED_ENDS[5] {
            return Layout::Free;
        }
        let bytes = line.as_bytes();
        let mut field_seen = [false; 6];
        for (pos, &b) in bytes.iter().enumerate() {
            if b == b' ' || (pos > 0 && bytes[pos - 1] != b' ') {
                continue;
            }
            let Some(k) = (0..6).find(|&k| pos >= FIXED_STARTS[k] && pos < FIXED_ENDS[k]) else {
                return Layout::Free;
            };
            // Name fields must be left-aligned; numeric fields may be right-aligned.
            let numeric = k == 3 || k == 5;
            if !field_seen[k] && !numeric && pos != FIXED_STARTS[k] {
                return Layout::Free;
            }
            field_seen[k] = true;
        }
    }
    Layout::Fixed
}

/// Splits a data line into fields. Fixed-layout lines keep empty fields as
/// empty strings so positional meaning is preserved; free-layout lines
/// return only the non-empty tokens.
fn split_fields(line: &str, layout: Layout) -> Vec<String> {
    match layout {
        Layout::Free => line.split_whitespace().map(str::to_owned).collect(),
        Layout::Fixed => {
            let chars: Vec<char> = line.chars().collect();
            let mut fields = Vec::with_capacity(6);
            for (&start, &end) in FIXED_STARTS.iter().zip(FIXED_ENDS.iter()) {
                if start >= chars.len() {
                    break;
                }
                let stop = end.min(chars.len());
                fields.push(chars[start..stop].iter().collect::<String>().trim().to_owned());
            }
            while fields.last().is_some_and(|f| f.is_empty()) {
                fields.pop();
            }
            fields
        }
    }
}

fn parse_number(field: &str, line: usize) -> Result<f64, ParseError> {
    let value: f64 = field.parse().map_err(|_| ParseError::NotNumeric {
        line,
        field: field.to_owned(),
    })?;
    if value.is_nan() {
        return Err(ParseError::NotNumeric {
            line,
            field: field.to_owned(),
        });
    }
    Ok(value)
}

enum RowRef {
    Objective,
    FreeRow,
    Constraint(usize),
}

struct Builder {
    layout: Layout,
    name: String,
    objective_sense: ObjectiveSense,
    objective_offset: f64,
    objective_row: Option<String>,
    free_rows: HashSet<String>,
    constraints: Vec<ConstraintRecord>,
    row_index: HashMap<String, usize>,
    variables: Vec<VariableRecord>,
    col_index: HashMap<String, usize>,
    entries: Vec<(usize, usize, f64)>,
    seen: HashSet<(usize, usize)>,
    seen_objective: HashSet<usize>,
    in_integer_block: bool,
    rhs_set: Option<String>,
    ranges_set: Option<String>,
    bounds_set: Option<String>,
}

impl Builder {
    fn new(layout: Layout) -> Self {
        Self {
            layout,
            name: String::new(),
            objective_sense: ObjectiveSense::Min,
            objective_offset: 0.0,
            objective_row: None,
            free_rows: HashSet::new(),
            constraints: Vec::new(),
            row_index: HashMap::new(),
            variables: Vec::new(),
            col_index: HashMap::new(),
            entries: Vec::new(),
            seen: HashSet::new(),
            seen_objective: HashSet::new(),
            in_integer_block: false,
            rhs_set: None,
            ranges_set: None,
            bounds_set: None,
        }
    }

    fn row(&self, name: &str, line: usize) -> Result<RowRef, ParseError> {
        if self.objective_row.as_deref() == Some(name) {
            return Ok(RowRef::Objective);
        }
        if self.free_rows.contains(name) {
            return Ok(RowRef::FreeRow);
        }
        self.row_index
            .get(name)
            .map(|&i| RowRef::Constraint(i))
            .ok_or_else(|| ParseError::UnknownRow {
                line,
                name: name.to_owned(),
            })
    }

    fn column(&self, name: &str, line: usize) -> Result<usize, ParseError> {
        self.col_index
            .get(name)
            .copied()
            .ok_or_else(|| ParseError::UnknownColumn {
                line,
                name: name.to_owned(),
            })
    }

    fn rows_line(&mut self, fields: &[String], line: usize) -> Result<(), ParseError> {
        let [kind, name] = fields else {
            return Err(syntax(line, "ROWS entry needs a type and a name"));
        };
        if self.row_index.contains_key(name)
            || self.objective_row.as_deref() == Some(name)
            || self.free_rows.contains(name)
        {
            return Err(syntax(line, format!("row '{name}' declared twice")));
        }
        let sense = match kind.to_ascii_uppercase().as_str() {
            "N" => {
                if self.objective_row.is_none() {
                    self.objective_row = Some(name.clone());
                } else {
                    self.free_rows.insert(name.clone());
                }
                return Ok(());
            }
            "E" => Sense::Eq,
            "L" => Sense::Le,
            "G" => Sense::Ge,
            other => return Err(syntax(line, format!("unknown row type '{other}'"))),
        };
        self.row_index.insert(name.clone(), self.constraints.len());
        self.constraints.push(ConstraintRecord {
            name: name.clone(),
            sense,
            rhs: 0.0,
            range: None,
        });
        Ok(())
    }

    fn columns_line(&mut self, fields: &[String], line: usize) -> Result<(), ParseError> {
        if fields.len() >= 3 && fields[1].trim_matches('\'') == "MARKER" {
            match fields[2].trim_matches('\'') {
                "INTORG" => self.in_integer_block = true,
                "INTEND" => self.in_integer_block = false,
                other => return Err(syntax(line, format!("unknown marker '{other}'"))),
            }
            return Ok(());
        }
        if fields.len() != 3 && fields.len() != 5 {
            return Err(syntax(line, "COLUMNS entry needs 3 or 5 fields"));
        }
        let col_name = &fields[0];
        let col = match self.col_index.get(col_name) {
            Some(&c) => c,
            None => {
                let c = self.variables.len();
                self.col_index.insert(col_name.clone(), c);
                self.variables.push(VariableRecord {
                    name: col_name.clone(),
                    obj_coeff: 0.0,
                    lower_bound: 0.0,
                    upper_bound: f64::INFINITY,
                    is_integer: self.in_integer_block,
                });
                c
            }
        };
        for pair in fields[1..].chunks(2) {
            let value = parse_number(&pair[1], line)?;
            match self.row(&pair[0], line)? {
                RowRef::Objective => {
                    if !self.seen_objective.insert(col) {
                        return Err(ParseError::DuplicateCoefficient {
                            line,
                            row: pair[0].clone(),
                            col: col_name.clone(),
                        });
                    }
                    self.variables[col].obj_coeff = value;
                }
                RowRef::FreeRow => {}
                RowRef::Constraint(row) => {
                    if !self.seen.insert((row, col)) {
                        return Err(ParseError::DuplicateCoefficient {
                            line,
                            row: pair[0].clone(),
                            col: col_name.clone(),
                        });
                    }
                    if value != 0.0 {
                        self.entries.push((row, col, value));
                    }
                }
            }
        }
        Ok(())
    }

    /// Strips the optional set name from an RHS/RANGES line and returns the
    /// `(row, value)` pairs. Only the first set encountered is used.
    fn set_pairs<'a>(
        &self,
        fields: &'a [String],
        current: &mut Option<String>,
        line: usize,
    ) -> Result<Option<Vec<(&'a str, f64)>>, ParseError> {
        let (set, rest) = match self.layout {
            Layout::Fixed => (
                fields.first().map(String::as_str).unwrap_or(""),
                fields.get(1..).unwrap_or(&[]),
            ),
            Layout::Free if fields.len() % 2 == 1 => (fields[0].as_str(), &fields[1..]),
            Layout::Free => ("", fields),
        };
        match current {
            Some(existing) if existing != set => return Ok(None),
            Some(_) => {}
            None => *current = Some(set.to_owned()),
        }
        if rest.is_empty() || rest.len() % 2 != 0 {
            return Err(syntax(line, "expected (row, value) pairs"));
        }
        rest.chunks(2)
            .map(|p| Ok((p[0].as_str(), parse_number(&p[1], line)?)))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn rhs_line(&mut self, fields: &[String], line: usize) -> Result<(), ParseError> {
        let mut set = self.rhs_set.take();
        let pairs = self.set_pairs(fields, &mut set, line);
        self.rhs_set = set;
        let Some(pairs) = pairs? else { return Ok(()) };
        for (row, value) in pairs {
            match self.row(row, line)? {
                RowRef::Objective => self.objective_offset = -value,
                RowRef::FreeRow => {}
                RowRef::Constraint(i) => self.constraints[i].rhs = value,
            }
        }
        Ok(())
    }

    fn ranges_line(&mut self, fields: &[String], line: usize) -> Result<(), ParseError> {
        let mut set = self.ranges_set.take();
        let pairs = self.set_pairs(fields, &mut set, line);
        self.ranges_set = set;
        let Some(pairs) = pairs? else { return Ok(()) };
        for (row, value) in pairs {
            match self.row(row, line)? {
                RowRef::Constraint(i) => self.constraints[i].range = Some(value),
                _ => return Err(syntax(line, format!("RANGES entry on objective/free row '{row}'"))),
            }
        }
        Ok(())
    }

    fn bounds_line(&mut self, fields: &[String], line: usize) -> Result<(), ParseError> {
        if fields.is_empty() {
            return Err(syntax(line, "empty BOUNDS entry"));
        }
        let kind = fields[0].to_ascii_uppercase();
        let needs_value = matches!(kind.as_str(), "UP" | "LO" | "FX" | "LI" | "UI");
        let valueless = matches!(kind.as_str(), "FR" | "MI" | "PL" | "BV");
        if !needs_value && !valueless {
            return Err(syntax(line, format!("unsupported bound type '{kind}'")));
        }
        let (set, col_name, value_field): (&str, &str, Option<&str>) = match self.layout {
            Layout::Fixed => (
                fields.get(1).map(String::as_str).unwrap_or(""),
                fields.get(2).map(String::as_str).unwrap_or(""),
                fields.get(3).map(String::as_str),
            ),
            Layout::Free => match fields.len() {
                4 => (&fields[1], &fields[2], Some(&fields[3])),
                3 if needs_value => ("", &fields[1], Some(&fields[2])),
                3 if self.col_index.contains_key(&fields[2]) => (&fields[1], &fields[2], None),
                3 => ("", &fields[1], Some(&fields[2])),
                2 if valueless => ("", &fields[1], None),
                _ => return Err(syntax(line, "malformed BOUNDS entry")),
            },
        };
        if col_name.is_empty() {
            return Err(syntax(line, "BOUNDS entry without a column"));
        }
        match &self.bounds_set {
            Some(existing) if existing != set => return Ok(()),
            Some(_) => {}
            None => self.bounds_set = Some(set.to_owned()),
        }
        let col = self.column(col_name, line)?;
        let value = match value_field {
            Some(f) if !f.is_empty() => Some(parse_number(f, line)?),
            _ if needs_value => return Err(syntax(line, format!("bound type {kind} needs a value"))),
            _ => None,
        };
        let var = &mut self.variables[col];
        let inf = f64::INFINITY;
        match kind.as_str() {
            "UP" | "UI" => {
                let v = value.unwrap_or(inf);
                if v < 0.0 && var.lower_bound == 0.0 {
                    var.lower_bound = -inf;
                }
                var.upper_bound = v;
                var.is_integer |= kind == "UI";
            }
            "LO" | "LI" => {
                var.lower_bound = value.unwrap_or(0.0);
                var.is_integer |= kind == "LI";
            }
            "FX" => {
                let v = value.unwrap_or(0.0);
                var.lower_bound = v;
                var.upper_bound = v;
            }
            "FR" => {
                var.lower_bound = -inf;
                var.upper_bound = inf;
            }
            "MI" => var.lower_bound = -inf,
            "PL" => var.upper_bound = inf,
            "BV" => {
                var.lower_bound = 0.0;
                var.upper_bound = 1.0;
                var.is_integer = true;
            }
            _ => unreachable!(),
        }
        if var.lower_bound > var.upper_bound {
            return Err(syntax(
                line,
                format!("column '{}' has lower bound above upper bound", var.name),
            ));
        }
        Ok(())
    }

    fn finish(self) -> Result<MilpInstance, ParseError> {
        let matrix = SparseMatrix::from_triplets(self.constraints.len(), self.variables.len(), self.entries)
            .map_err(|e| syntax(0, e.to_string()))?;
        Ok(MilpInstance {
            name: self.name,
            objective_sense: self.objective_sense,
            objective_offset: self.objective_offset,
            variables: self.variables,
            constraints: self.constraints,
            matrix,
        })
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn parse_objsense(word: &str, line: usize) -> Result<ObjectiveSense, ParseError> {
    match word.to_ascii_uppercase().as_str() {
        "MIN" | "MINIMIZE" => Ok(ObjectiveSense::Min),
        "MAX" | "MAXIMIZE" => Ok(ObjectiveSense::Max),
        other => Err(syntax(line, format!("unknown objective sense '{other}'"))),
    }
}

/// Parses MPS text from any reader.
pub fn parse_mps<R: Read>(mut reader: R) -> Result<MilpInstance, ParseError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = String::from_utf8_lossy(&bytes);
    parse_mps_str(&text)
}

pub fn parse_mps_str(text: &str) -> Result<MilpInstance, ParseError> {
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    let mut b = Builder::new(detect_layout(&lines));
    let mut section: Option<Section> = None;

    for (idx, raw) in lines.iter().enumerate() {
        let line = idx + 1;
        if is_comment_or_blank(raw) {
            continue;
        }
        if is_header(raw) {
            let mut words = raw.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let next =
                Section::from_keyword(keyword).ok_or_else(|| syntax(line, format!("unknown section '{keyword}'")))?;
            if section.is_some_and(|s| next <= s) || (next > Section::Rows && section < Some(Section::Rows)) {
                return Err(ParseError::SectionOrder {
                    line,
                    section: keyword.to_owned(),
                });
            }
            section = Some(next);
            match next {
                Section::Name => b.name = raw[keyword.len()..].trim().to_owned(),
                Section::ObjSense => {
                    if let Some(w) = words.next() {
                        b.objective_sense = parse_objsense(w, line)?;
                    }
                }
                Section::End => return b.finish(),
                _ => {}
            }
            continue;
        }
        let mut fields = split_fields(raw, b.layout);
        // Fixed-layout field 1 is only used by ROWS and BOUNDS.
        if b.layout == Layout::Fixed
            && matches!(section, Some(Section::Columns | Section::Rhs | Section::Ranges))
            && !fields.is_empty()
        {
            if !fields[0].is_empty() {
                return Err(syntax(line, "unexpected text in field 1"));
            }
            fields.remove(0);
        }
        match section {
            None | Some(Section::Name) | Some(Section::End) => {
                return Err(syntax(line, "data line outside of a section"))
            }
            Some(Section::ObjSense) => b.objective_sense = parse_objsense(raw.trim(), line)?,
            Some(Section::Rows) => b.rows_line(&fields, line)?,
            Some(Section::Columns) => b.columns_line(&fields, line)?,
            Some(Section::Rhs) => b.rhs_line(&fields, line)?,
            Some(Section::Ranges) => b.ranges_line(&fields, line)?,
            Some(Section::Bounds) => b.bounds_line(&fields, line)?,
        }
    }
    Err(ParseError::MissingEnd)
}

/// Writes `inst` as free-layout MPS. Re-parsing the output reproduces the
/// instance field for field.
pub fn write_mps(inst: &MilpInstance) -> String {
    let mut out = String::new();
    let names: HashSet<&str> = inst.constraints.iter().map(|c| c.name.as_str()).collect();
    let mut obj_name = String::from("OBJ");
    while names.contains(obj_name.as_str()) {
        obj_name.push('_');
    }

    let _ = writeln!(out, "NAME          {}", inst.name);
    if inst.objective_sense == ObjectiveSense::Max {
        let _ = writeln!(out, "OBJSENSE\n    MAX");
    }
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {obj_name}");
    for c in &inst.constraints {
        let t = match c.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {t}  {}", c.name);
    }

    out.push_str("COLUMNS\n");
    let entries = inst.matrix.entries();
    let mut cursor = 0;
    let mut in_block = false;
    let mut marker = 0;
    for (j, v) in inst.variables.iter().enumerate() {
        if v.is_integer != in_block {
            let tag = if v.is_integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER{marker:<6} 'MARKER'  '{tag}'");
            marker += 1;
            in_block = v.is_integer;
        }
        let mut wrote = false;
        if v.obj_coeff != 0.0 {
            let _ = writeln!(out, "    {}  {obj_name}  {}", v.name, v.obj_coeff);
            wrote = true;
        }
        while cursor < entries.len() && entries[cursor].1 == j {
            let (r, _, value) = entries[cursor];
            let _ = writeln!(out, "    {}  {}  {}", v.name, inst.constraints[r].name, value);
            cursor += 1;
            wrote = true;
        }
        if !wrote {
            let _ = writeln!(out, "    {}  {obj_name}  0", v.name);
        }
    }
    if in_block {
        let _ = writeln!(out, "    MARKER{marker:<6} 'MARKER'  'INTEND'");
    }

    out.push_str("RHS\n");
    if inst.objective_offset != 0.0 {
        let _ = writeln!(out, "    RHS  {obj_name}  {}", -inst.objective_offset);
    }
    for c in inst.constraints.iter().filter(|c| c.rhs != 0.0) {
        let _ = writeln!(out, "    RHS  {}  {}", c.name, c.rhs);
    }
    if inst.constraints.iter().any(|c| c.range.is_some()) {
        out.push_str("RANGES\n");
        for c in &inst.constraints {
            if let Some(r) = c.range {
                let _ = writeln!(out, "    RNG  {}  {}", c.name, r);
            }
        }
    }

    out.push_str("BOUNDS\n");
    for v in &inst.variables {
        write_bounds(&mut out, v);
    }
    out.push_str("ENDATA\n");
    out
}

fn write_bounds(out: &mut String, v: &VariableRecord) {
    let (lo, hi) = (v.lower_bound, v.upper_bound);
    let name = &v.name;
    if lo == hi {
        let _ = writeln!(out, " FX BND  {name}  {lo}");
        return;
    }
    if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
        let _ = writeln!(out, " FR BND  {name}");
        return;
    }
    if lo == f64::NEG_INFINITY {
        let _ = writeln!(out, " MI BND  {name}");
    } else if lo != 0.0 {
        let _ = writeln!(out, " LO BND  {name}  {lo}");
    }
    if hi != f64::INFINITY {
        // A negative UP on a zero lower bound would be read as MI + UP.
        if hi < 0.0 && lo == 0.0 {
            let _ = writeln!(out, " LO BND  {name}  0");
        }
        let _ = writeln!(out, " UP BND  {name}  {hi}");
    }
}
