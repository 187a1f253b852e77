//! Structured symmetric matrices with free and fixed entries.
//!
//! A [`MatrixPattern`] says which entries of a correlation or covariance
//! matrix are estimated and which are pinned. [`block_partition`] finds the
//! simultaneous row/column permutation that makes the pattern block diagonal,
//! so positive definiteness can be reasoned about one block at a time.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Default pivot tolerance for [`is_positive_definite`].
pub const PD_TOLERANCE: f64 = 1e-12;

/// Separator used in entry labels such as `y2~~y4`.
pub const LABEL_SEPARATOR: &str = "~~";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Correlation,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entry {
    FreeDiagonal,
    FreeOffDiagonal,
    Fixed(f64),
}

impl Entry {
    pub fn is_free(self) -> bool {
        !matches!(self, Entry::Fixed(_))
    }
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

/// Symmetric pattern of free and fixed entries. Only the lower triangle is
/// stored, so symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPattern {
    kind: PatternKind,
    names: Vec<String>,
    entries: Vec<Entry>,
}

impl MatrixPattern {
    /// Builds a pattern from index pairs. Unlisted off-diagonals are
    /// `Fixed(0)`; unlisted diagonals are free for covariances and `Fixed(1)`
    /// for correlations.
    pub fn new(
        kind: PatternKind,
        names: Vec<String>,
        free: &[(usize, usize)],
        fixed: &[((usize, usize), f64)],
    ) -> Result<Self> {
        let dim = names.len();
        if dim == 0 {
            return Err(Error::Pattern("pattern needs at least one variable".into()));
        }
        let mut seen = BTreeMap::new();
        for (k, name) in names.iter().enumerate() {
            if seen.insert(name.as_str(), k).is_some() {
                return Err(Error::Pattern(format!("duplicate variable name '{name}'")));
            }
        }
        let mut entries = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                entries.push(if i == j {
                    match kind {
                        PatternKind::Covariance => Entry::FreeDiagonal,
                        PatternKind::Correlation => Entry::Fixed(1.0),
                    }
                } else {
                    Entry::Fixed(0.0)
                });
            }
        }
        let mut assigned: BTreeMap<usize, Entry> = BTreeMap::new();
        let mut assign = |i: usize, j: usize, e: Entry| -> Result<()> {
            if i >= dim || j >= dim {
                return Err(Error::Pattern(format!("entry ({i},{j}) out of range for dim {dim}")));
            }
            let idx = packed_index(i, j);
            if let Some(prev) = assigned.insert(idx, e) {
                if prev != e {
                    return Err(Error::Pattern(format!(
                        "asymmetric specification for ({}, {}): {prev:?} vs {e:?}",
                        names[i], names[j]
                    )));
                }
            }
            Ok(())
        };
        for &(i, j) in free {
            let e = if i == j { Entry::FreeDiagonal } else { Entry::FreeOffDiagonal };
            assign(i, j, e)?;
        }
        for &((i, j), v) in fixed {
            if !v.is_finite() {
                return Err(Error::Pattern(format!("fixed value for ({i},{j}) is not finite")));
            }
            assign(i, j, Entry::Fixed(v))?;
        }
        for (idx, e) in assigned {
            entries[idx] = e;
        }
        let pattern = MatrixPattern {
            kind,
            names,
            entries,
        };
        pattern.validate()?;
        Ok(pattern)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.dim() {
            for j in 0..=i {
                let e = self.entry(i, j);
                match (self.kind, i == j, e) {
                    (PatternKind::Correlation, true, Entry::Fixed(v)) if v != 1.0 => {
                        return Err(Error::Pattern(format!(
                            "correlation diagonal for '{}' must be 1, got {v}",
                            self.names[i]
                        )))
                    }
                    (PatternKind::Correlation, true, Entry::FreeDiagonal) => {
                        return Err(Error::Pattern(format!(
                            "correlation diagonal for '{}' cannot be free",
                            self.names[i]
                        )))
                    }
                    (PatternKind::Correlation, false, Entry::Fixed(v)) if !(v > -1.0 && v < 1.0) => {
                        return Err(Error::Pattern(format!(
                            "fixed correlation ({}, {}) = {v} lies outside (-1, 1)",
                            self.names[j], self.names[i]
                        )))
                    }
                    (PatternKind::Covariance, true, Entry::Fixed(v)) if v <= 0.0 => {
                        return Err(Error::Pattern(format!(
                            "fixed variance for '{}' must be positive, got {v}",
                            self.names[i]
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Entry at `(i, j)`; either triangle may be addressed.
    pub fn entry(&self, i: usize, j: usize) -> Entry {
        self.entries[packed_index(i, j)]
    }

    /// Free off-diagonal entries as `(row, col)` with `row > col`, in
    /// row-major lower-triangle order.
    pub fn free_off_diagonal(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.dim() {
            for j in 0..i {
                if self.entry(i, j) == Entry::FreeOffDiagonal {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Free diagonal entries (covariance patterns only).
    pub fn free_diagonal(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.entry(i, i) == Entry::FreeDiagonal)
            .collect()
    }

    /// Stable numeric id for an entry, used to key random substreams.
    pub fn entry_id(i: usize, j: usize) -> u64 {
        packed_index(i, j) as u64
    }

    /// `name_j~~name_i` label of an entry, lower pattern index first.
    pub fn entry_label(&self, i: usize, j: usize) -> String {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        format!("{}{LABEL_SEPARATOR}{}", self.names[a], self.names[b])
    }

    /// Resolves a `a~~b` label to `(row, col)` with `row >= col`. Either name
    /// order is accepted.
    pub fn parse_entry_label(&self, label: &str) -> Result<(usize, usize)> {
        let (a, b) = label
            .split_once(LABEL_SEPARATOR)
            .ok_or_else(|| Error::InvalidArgument(format!("entry label '{label}' lacks '~~'")))?;
        let lookup = |n: &str| {
            self.index_of(n.trim())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown variable '{}' in '{label}'", n.trim())))
        };
        let (i, j) = (lookup(a)?, lookup(b)?);
        Ok(if i >= j { (i, j) } else { (j, i) })
    }

    /// Simultaneously permutes rows and columns: row `k` of the result is row
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<MatrixPattern> {
        check_permutation(perm, self.dim())?;
        Ok(self.select(perm))
    }

    /// Principal sub-pattern on the given indices, in the given order.
    pub fn subpattern(&self, indices: &[usize]) -> Result<MatrixPattern> {
        if indices.iter().any(|&i| i >= self.dim()) {
            return Err(Error::InvalidArgument("sub-pattern index out of range".into()));
        }
        Ok(self.select(indices))
    }

    fn select(&self, idx: &[usize]) -> MatrixPattern {
        let names = idx.iter().map(|&k| self.names[k].clone()).collect();
        let mut entries = Vec::with_capacity(idx.len() * (idx.len() + 1) / 2);
        for i in 0..idx.len() {
            for j in 0..=i {
                entries.push(self.entry(idx[i], idx[j]));
            }
        }
        MatrixPattern {
            kind: self.kind,
            names,
            entries,
        }
    }

    /// Fills the pattern with the given values for the free off-diagonal
    /// entries (in [`Self::free_off_diagonal`] order). Free diagonals are set
    /// to 1.
    pub fn assemble(&self, free_values: &[f64]) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(self.dim());
        let mut it = free_values.iter();
        for i in 0..self.dim() {
            for j in 0..=i {
                let v = match self.entry(i, j) {
                    Entry::Fixed(v) => v,
                    Entry::FreeDiagonal => 1.0,
                    Entry::FreeOffDiagonal => *it.next().expect("one value per free entry"),
                };
                m.set(i, j, v);
            }
        }
        m
    }

    /// The residual structure of the Political Democracy SEM: eleven
    /// indicators with six correlated residual pairs.
    pub fn political_democracy(kind: PatternKind) -> MatrixPattern {
        let names: Vec<String> = ["x1", "x2", "x3", "y1", "y2", "y3", "y4", "y5", "y6", "y7", "y8"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let pairs = [("y1", "y5"), ("y2", "y4"), ("y2", "y6"), ("y3", "y7"), ("y4", "y8"), ("y6", "y8")];
        let idx = |n: &str| names.iter().position(|m| m == n).unwrap();
        let free: Vec<_> = pairs.iter().map(|(a, b)| (idx(b), idx(a))).collect();
        MatrixPattern::new(kind, names.clone(), &free, &[]).expect("built-in pattern is valid")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternDoc {
    kind: PatternKind,
    names: Vec<String>,
    #[serde(default)]
    free: Vec<[String; 2]>,
    #[serde(default)]
    fixed: Vec<FixedDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedDoc {
    pair: [String; 2],
    value: f64,
}

/// Parses a pattern document:
///
/// ```json
/// {"kind": "correlation", "names": ["a", "b", "c"],
///  "free": [["a", "b"]], "fixed": [{"pair": ["b", "c"], "value": 0.3}]}
/// ```
pub fn parse_pattern(text: &str) -> Result<MatrixPattern> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: PatternDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let lookup = |name: &str, path: String| -> Result<usize> {
        doc.names.iter().position(|n| n == name).ok_or(Error::Schema {
            path,
            message: format!("unknown variable '{name}'"),
        })
    };
    let mut free = Vec::with_capacity(doc.free.len());
    for (k, [a, b]) in doc.free.iter().enumerate() {
        free.push((lookup(a, format!("free[{k}][0]"))?, lookup(b, format!("free[{k}][1]"))?));
    }
    let mut fixed = Vec::with_capacity(doc.fixed.len());
    for (k, f) in doc.fixed.iter().enumerate() {
        let i = lookup(&f.pair[0], format!("fixed[{k}].pair[0]"))?;
        let j = lookup(&f.pair[1], format!("fixed[{k}].pair[1]"))?;
        fixed.push(((i, j), f.value));
    }
    MatrixPattern::new(doc.kind, doc.names, &free, &fixed)
}

/// Dense symmetric matrix stored as its packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            values: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Takes the lower triangle of a row-major `dim × dim` array.
    pub fn from_row_major(full: &[f64], dim: usize) -> Self {
        assert_eq!(full.len(), dim * dim);
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, full[i * dim + j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[packed_index(i, j)] = v;
    }

    /// Packed lower triangle, row-major.
    pub fn packed(&self) -> &[f64] {
        &self.values
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<SymmetricMatrix> {
        check_permutation(perm, self.dim)?;
        Ok(self.submatrix(perm))
    }

    /// Principal submatrix on `indices` (in that order).
    pub fn submatrix(&self, indices: &[usize]) -> SymmetricMatrix {
        let mut m = Self::zeros(indices.len());
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate().take(a + 1) {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }
}

fn check_permutation(perm: &[usize], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    if perm.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {}, expected {dim}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= dim || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

/// Block-diagonalizing permutation of a pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    /// Position `k` of the permuted matrix holds original variable
    /// `permutation[k]`.
    pub permutation: Vec<usize>,
    /// Original variable indices of each block, listed in permuted order.
    /// Concatenating the blocks yields `permutation`.
    pub blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    /// Contiguous position ranges of each block in the permuted matrix.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.len();
                start += b.len();
                r
            })
            .collect()
    }
}

/// Splits a pattern into the connected components of its free off-diagonal
/// graph and orders each component by reverse Cuthill-McKee.
///
/// Cuthill-McKee starts from the minimum-degree vertex of a component (ties
/// go to the lower original index) and visits neighbours in ascending degree
/// order; the visiting order is then reversed. Blocks are listed smallest
/// first, ties broken by their lowest original index, which places singleton
/// variables ahead of the coupled ones.
pub fn block_partition(p: &MatrixPattern) -> BlockPartition {
    let n = p.dim();
    let mut adj = vec![Vec::new(); n];
    for (i, j) in p.free_off_diagonal() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for nbrs in adj.iter_mut() {
        nbrs.sort_by_key(|&v| (degree[v], v));
    }

    let mut component = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        if component[root] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![root];
        component[root] = id;
        let mut k = 0;
        while k < members.len() {
            let v = members[k];
            for &w in &adj[v] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    members.push(w);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        components.push(members);
    }

    let mut blocks: Vec<Vec<usize>> = components
        .into_iter()
        .map(|members| reverse_cuthill_mckee(&members, &adj, &degree))
        .collect();
    blocks.sort_by_key(|b| (b.len(), *b.iter().min().unwrap()));
    let permutation = blocks.iter().flatten().copied().collect();
    BlockPartition { permutation, blocks }
}

fn reverse_cuthill_mckee(members: &[usize], adj: &[Vec<usize>], degree: &[usize]) -> Vec<usize> {
    let start = *members
        .iter()
        .min_by_key(|&&v| (degree[v], v))
        .expect("components are nonempty");
    let mut visited = BTreeSet::from([start]);
    let mut order = Vec::with_capacity(members.len());
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &adj[v] {
            if visited.insert(w) {
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// True iff a Cholesky factorization of `m` succeeds with every pivot
/// strictly greater than `tol`.
pub fn is_positive_definite(m: &SymmetricMatrix, tol: f64) -> bool {
    m.is_finite() && linalg::cholesky(&m.to_row_major(), m.dim(), tol).is_ok()
}

/// Determinant of a symmetric matrix. Dimensions up to three use the
/// closed-form expansion; larger ones use LU with partial pivoting.
pub fn determinant(m: &SymmetricMatrix) -> f64 {
    let g = |i, j| m.get(i, j);
    match m.dim() {
        0 => 1.0,
        1 => g(0, 0),
        2 => g(0, 0) * g(1, 1) - g(1, 0) * g(1, 0),
        3 => {
            g(0, 0) * (g(1, 1) * g(2, 2) - g(2, 1) * g(2, 1))
                - g(1, 0) * (g(1, 0) * g(2, 2) - g(2, 1) * g(2, 0))
                + g(2, 0) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
        }
        n => linalg::lu_determinant(&m.to_row_major(), n),
    }
}

/// Product of the determinants of the diagonal blocks of `m` under
/// `partition`. Equals [`determinant`] whenever the pattern's fixed
/// off-diagonals outside the blocks are zero.
pub fn blockwise_determinant(m: &SymmetricMatrix, partition: &BlockPartition) -> f64 {
    partition
        .blocks
        .iter()
        .map(|b| determinant(&m.submatrix(b)))
        .product()
}

/// Closed-form determinant of a 4×4 correlation block whose correlations form
/// a four-cycle: `r1 = (a,b)`, `r2 = (a,c)`, `r3 = (b,d)`, `r4 = (c,d)`, with
/// `(a,d)` and `(b,c)` fixed at zero.
pub fn bollen_block_det(r1: f64, r2: f64, r3: f64, r4: f64) -> f64 {
    let cross = r1 * r4 - r2 * r3;
    1.0 + cross * cross - (r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4)
}

/// Assembles the 4×4 four-cycle block used by [`bollen_block_det`], in the
/// variable order `(a, b, c, d)`.
pub fn bollen_block_matrix(r1: f64, r2: f64, r3: f64, r4: f64) -> SymmetricMatrix {
    let mut m = SymmetricMatrix::identity(4);
    m.set(1, 0, r1);
    m.set(2, 0, r2);
    m.set(3, 1, r3);
    m.set(3, 2, r4);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    const BOLLEN_COV: &str = r#"{
        "kind": "covariance",
        "names": ["x1","x2","x3","y1","y2","y3","y4","y5","y6","y7","y8"],
        "free": [["y1","y5"],["y2","y4"],["y2","y6"],["y3","y7"],["y4","y8"],["y6","y8"]]
    }"#;

    #[test]
    fn parses_bollen_covariance_document() {
        let p = parse_pattern(BOLLEN_COV).unwrap();
        assert_eq!(p.dim(), 11);
        assert_eq!(p.free_diagonal().len(), 11);
        assert_eq!(p.free_off_diagonal().len(), 6);
        assert_eq!(p, MatrixPattern::political_democracy(PatternKind::Covariance));
    }

    #[test]
    fn one_by_one_correlation_is_fixed_unit() {
        let p = parse_pattern(r#"{"kind":"correlation","names":["a"]}"#).unwrap();
        assert_eq!(p.entry(0, 0), Entry::Fixed(1.0));
    }

    #[test]
    fn free_and_fixed_mirror_is_rejected() {
        let doc = r#"{"kind":"covariance","names":["a","b","c"],
            "free":[["b","c"]],"fixed":[{"pair":["c","b"],"value":0.0}]}"#;
        assert!(matches!(parse_pattern(doc), Err(Error::Pattern(_))));
    }

    #[test]
    fn fixed_correlation_out_of_range_is_rejected() {
        let doc = r#"{"kind":"correlation","names":["a","b"],
            "fixed":[{"pair":["a","b"],"value":1.0}]}"#;
        assert!(matches!(parse_pattern(doc), Err(Error::Pattern(_))));
    }

    #[test]
    fn schema_errors_name_the_key_path() {
        let doc = r#"{"kind":"correlation","names":["a","b"],"free":[["a","zz"]]}"#;
        match parse_pattern(doc) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "free[0][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let doc = r#"{"kind":"correlation","names":["a","b"],"fixed":[{"pair":["a","b"],"value":"x"}]}"#;
        match parse_pattern(doc) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "fixed[0].value"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bollen_blocks_match_permuted_structure() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let part = block_partition(&p);
        let labelled: Vec<Vec<&str>> = part
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| p.names()[i].as_str()).collect())
            .collect();
        let as_sets: Vec<Vec<&str>> = labelled
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort();
                b
            })
            .collect();
        assert_eq!(
            as_sets,
            vec![
                vec!["x1"],
                vec!["x2"],
                vec!["x3"],
                vec!["y1", "y5"],
                vec!["y3", "y7"],
                vec!["y2", "y4", "y6", "y8"],
            ]
        );
        // Cuthill-McKee from y2 visits y2, y4, y6, y8; reversed.
        assert_eq!(labelled[5], vec!["y8", "y6", "y4", "y2"]);
    }

    #[test]
    fn complete_and_empty_graphs() {
        let p = MatrixPattern::new(
            PatternKind::Covariance,
            names(&["a", "b", "c"]),
            &[(1, 0), (2, 0), (2, 1)],
            &[],
        )
        .unwrap();
        assert_eq!(block_partition(&p).blocks.len(), 1);
        let p = MatrixPattern::new(PatternKind::Covariance, names(&["a", "b", "c", "d", "e"]), &[], &[]).unwrap();
        let part = block_partition(&p);
        assert_eq!(part.blocks, (0..5).map(|i| vec![i]).collect::<Vec<_>>());
    }

    #[test]
    fn rcm_orders_a_path_from_an_end() {
        // path b - d - a - c  (degrees: a2 b1 c1 d2)
        let p = MatrixPattern::new(
            PatternKind::Correlation,
            names(&["a", "b", "c", "d"]),
            &[(3, 1), (3, 0), (2, 0)],
            &[],
        )
        .unwrap();
        let part = block_partition(&p);
        assert_eq!(part.permutation, vec![2, 0, 3, 1]);
    }

    #[test]
    fn pd_examples() {
        assert!(is_positive_definite(&SymmetricMatrix::identity(4), PD_TOLERANCE));
        assert!(!is_positive_definite(&bollen_block_matrix(0.9, 0.1, 0.1, 0.9), PD_TOLERANCE));
        let mut m = SymmetricMatrix::identity(2);
        m.set(1, 0, 0.999);
        assert!(is_positive_definite(&m, PD_TOLERANCE));
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(determinant(&SymmetricMatrix::identity(3)), 1.0);
        assert!(determinant(&bollen_block_matrix(0.5, 0.5, 0.5, 0.5)).abs() < 1e-12);
        let mut m = SymmetricMatrix::zeros(2);
        m.set(0, 0, 2.0);
        m.set(1, 1, 3.0);
        assert_eq!(determinant(&m), 6.0);
    }

    #[test]
    fn closed_form_block_det_examples() {
        assert_eq!(bollen_block_det(0.0, 0.0, 0.0, 0.0), 1.0);
        assert!(bollen_block_det(0.9, 0.1, 0.1, 0.9).abs() < 1e-12);
        assert!(bollen_block_det(0.5, 0.5, 0.5, 0.5).abs() < 1e-12);
    }

    #[test]
    fn labels_round_trip() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let (i, j) = p.parse_entry_label("y2~~y4").unwrap();
        assert_eq!(p.entry_label(i, j), "y2~~y4");
        assert_eq!(p.parse_entry_label("y4~~y2").unwrap(), (i, j));
        assert!(p.parse_entry_label("y4-y2").is_err());
    }
}
