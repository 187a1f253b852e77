//! Cholesky parameterization of patterned covariance matrices.
//!
//! A covariance matrix `Σ = L·Lᵀ` with positive diagonal in `L` is always
//! positive definite. When some entries of `Σ` are fixed at zero, the
//! corresponding entries of `L` are no longer free: sweeping the lower
//! triangle row by row, each zero constraint either holds automatically or
//! pins one entry of `L` to a value determined by entries to its left.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::pattern::{block_partition, Entry, MatrixPattern, PatternKind, SymmetricMatrix};
use crate::prior::UnivariatePrior;
use crate::rng::{substream, Domain};

/// Role of one entry of the Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CholClass {
    /// Diagonal entry, drawn from a positive prior.
    FreePositive,
    /// Off-diagonal entry corresponding to a free covariance.
    Free,
    /// Fixed by a zero covariance; computed from entries to its left.
    Determined,
    /// Zero whatever the free values are.
    StructuralZero,
}

impl fmt::Display for CholClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CholClass::FreePositive => "free_positive",
            CholClass::Free => "free",
            CholClass::Determined => "determined",
            CholClass::StructuralZero => "structural_zero",
        })
    }
}

/// Classification of every lower-triangle entry of `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholStructure {
    names: Vec<String>,
    /// `order[k]` is the index, in the source pattern, of row `k`.
    order: Vec<usize>,
    /// Packed lower triangle, row-major.
    classes: Vec<CholClass>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// Classifies the Cholesky factor of `p` in the pattern's own row order.
///
/// An entry whose covariance is fixed at zero is a structural zero when, for
/// every `k < j`, at least one of `L(i,k)` and `L(j,k)` is itself a
/// structural zero. The partial sum `Σ_{k<j} L(i,k)·L(j,k)` then vanishes
/// identically. Otherwise the entry is determined by
/// `L(i,j) = -Σ_{k<j} L(i,k)·L(j,k) / L(j,j)`.
pub fn derive_structure(p: &MatrixPattern) -> Result<CholStructure> {
    let order: Vec<usize> = (0..p.dim()).collect();
    classify(p, order)
}

/// Reorders `p` with [`block_partition`] before classifying.
pub fn derive_structure_blockwise(p: &MatrixPattern) -> Result<CholStructure> {
    let part = block_partition(p);
    let permuted = p.permuted(&part.permutation)?;
    classify(&permuted, part.permutation)
}

fn classify(p: &MatrixPattern, order: Vec<usize>) -> Result<CholStructure> {
    if p.kind() != PatternKind::Covariance {
        return Err(Error::Pattern(
            "Cholesky structure needs a covariance pattern; rescale the sampled covariances instead".into(),
        ));
    }
    let n = p.dim();
    let mut classes = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let class = match p.entry(i, j) {
                Entry::FreeDiagonal => CholClass::FreePositive,
                Entry::FreeOffDiagonal => CholClass::Free,
                Entry::Fixed(v) if i == j => {
                    return Err(Error::Pattern(format!(
                        "fixed variance {v} for '{}' is not supported",
                        p.names()[i]
                    )))
                }
                Entry::Fixed(v) if v != 0.0 => {
                    return Err(Error::Pattern(format!(
                        "fixed nonzero covariance {v} between '{}' and '{}' is not supported",
                        p.names()[i],
                        p.names()[j]
                    )))
                }
                Entry::Fixed(_) => {
                    let vanishes = (0..j).all(|k| {
                        classes[packed(i, k)] == CholClass::StructuralZero
                            || classes[packed(j, k)] == CholClass::StructuralZero
                    });
                    if vanishes {
                        CholClass::StructuralZero
                    } else {
                        CholClass::Determined
                    }
                }
            };
            classes.push(class);
        }
    }
    Ok(CholStructure {
        names: p.names().to_vec(),
        order,
        classes,
    })
}

impl CholStructure {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Variable names in structure order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Class of `L(i, j)`, `i ≥ j`.
    pub fn class(&self, i: usize, j: usize) -> CholClass {
        assert!(j <= i, "lower triangle only");
        self.classes[packed(i, j)]
    }

    pub fn count(&self, class: CholClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Number of values drawn per sample: free diagonals plus free
    /// off-diagonals.
    pub fn n_free(&self) -> usize {
        self.count(CholClass::FreePositive) + self.count(CholClass::Free)
    }

    /// Builds `L` (row-major, dense) from free values given row by row in
    /// packed order, filling determined and zero entries.
    pub fn assemble_factor(&self, free_values: &[f64]) -> Vec<f64> {
        assert_eq!(free_values.len(), self.n_free(), "one value per free entry");
        let n = self.dim();
        let mut l = vec![0.0; n * n];
        let mut it = free_values.iter();
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = match self.class(i, j) {
                    CholClass::FreePositive | CholClass::Free => *it.next().unwrap(),
                    CholClass::StructuralZero => 0.0,
                    CholClass::Determined => {
                        let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
                        -s / l[j * n + j]
                    }
                };
            }
        }
        l
    }

    /// Values of the determined entries read off a factor, in packed order.
    pub fn determined_values(&self, l: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..i {
                if self.class(i, j) == CholClass::Determined {
                    out.push(l[i * n + j]);
                }
            }
        }
        out
    }

    /// One line per lower-triangle entry: row name, column name, class.
    pub fn table(&self) -> Vec<(String, String, CholClass)> {
        let n = self.dim();
        let mut rows = Vec::with_capacity(self.classes.len());
        for i in 0..n {
            for j in 0..=i {
                rows.push((self.names[i].clone(), self.names[j].clone(), self.class(i, j)));
            }
        }
        rows
    }
}

/// Smallest accepted diagonal of `L`. Draws below it are redrawn so the
/// resulting `Σ` clears the positive-definiteness pivot tolerance.
pub const MIN_CHOL_DIAGONAL: f64 = 1e-5;

fn factor_to_cov(l: &[f64], n: usize) -> SymmetricMatrix {
    let mut s = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            s.set(i, j, v);
        }
    }
    s
}

/// Draws one covariance matrix honoring the structure's zeros. The result is
/// in structure order.
pub fn sample_structured_cov<R: Rng + ?Sized>(
    s: &CholStructure,
    diag_prior: &UnivariatePrior,
    offdiag_prior: &UnivariatePrior,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    diag_prior.validate()?;
    offdiag_prior.validate()?;
    if !diag_prior.is_positive_prior() {
        return Err(Error::Prior(format!("diagonal prior {diag_prior:?} must have positive support")));
    }
    let mut values = Vec::with_capacity(s.n_free());
    for i in 0..s.dim() {
        for j in 0..=i {
            match s.class(i, j) {
                CholClass::FreePositive => values.push(loop {
                    let v = diag_prior.sample(rng);
                    if v >= MIN_CHOL_DIAGONAL {
                        break v;
                    }
                }),
                CholClass::Free => values.push(offdiag_prior.sample(rng)),
                _ => {}
            }
        }
    }
    let l = s.assemble_factor(&values);
    Ok(factor_to_cov(&l, s.dim()))
}

/// `n` draws in parallel; draw `k` uses its own keyed stream.
pub fn sample_structured_cov_batch(
    s: &CholStructure,
    diag_prior: &UnivariatePrior,
    offdiag_prior: &UnivariatePrior,
    n: usize,
    seed: u64,
) -> Result<Vec<SymmetricMatrix>> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, Domain::CholeskyDraw, k as u64, 0);
            sample_structured_cov(s, diag_prior, offdiag_prior, &mut rng)
        })
        .collect()
}

/// Rescales a covariance matrix to a correlation matrix.
pub fn cov_to_corr(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = m.dim();
    let sd: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect::<Vec<_>>();
    if let Some(i) = sd.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("nonpositive variance at index {i}")));
    }
    let sd: Vec<f64> = sd.iter().map(|v| v.sqrt()).collect();
    let mut out = SymmetricMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            out.set(i, j, m.get(i, j) / (sd[i] * sd[j]));
        }
    }
    Ok(out)
}

/// Cholesky factor of `Σ` (row-major, dense).
pub fn factor_of(sigma: &SymmetricMatrix) -> Result<Vec<f64>> {
    cholesky(&sigma.to_row_major(), sigma.dim(), 0.0)
        .map_err(|f| Error::NotPositiveDefinite(format!("pivot {} at index {}", f.pivot, f.index)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{is_positive_definite, PD_TOLERANCE};
    use crate::rng::StreamRng;
    use rand::SeedableRng;

    /// The y2, y4, y6, y8 residual block in that order.
    fn bollen_block() -> MatrixPattern {
        let names = ["y2", "y4", "y6", "y8"].map(String::from).to_vec();
        MatrixPattern::new(PatternKind::Covariance, names, &[(1, 0), (2, 0), (3, 1), (3, 2)], &[]).unwrap()
    }

    #[test]
    fn bollen_block_classes() {
        let s = derive_structure(&bollen_block()).unwrap();
        use CholClass::*;
        for i in 0..4 {
            assert_eq!(s.class(i, i), FreePositive);
        }
        for (i, j) in [(1, 0), (2, 0), (3, 1), (3, 2)] {
            assert_eq!(s.class(i, j), Free);
        }
        assert_eq!(s.class(2, 1), Determined);
        assert_eq!(s.class(3, 0), StructuralZero);
    }

    #[test]
    fn determined_entry_value() {
        let s = derive_structure(&bollen_block()).unwrap();
        // c11, c21, c22, c31, c33, c42, c43, c44
        let vals = [1.3, 0.4, 0.9, -0.7, 1.1, 0.2, 0.5, 0.8];
        let l = s.assemble_factor(&vals);
        let expect = -0.4 * -0.7 / 0.9;
        assert!((l[2 * 4 + 1] - expect).abs() < 1e-15);
    }

    #[test]
    fn trivial_structures() {
        let free3 = MatrixPattern::new(
            PatternKind::Covariance,
            vec!["a".into(), "b".into(), "c".into()],
            &[(1, 0), (2, 0), (2, 1)],
            &[],
        )
        .unwrap();
        let s = derive_structure(&free3).unwrap();
        assert_eq!(s.count(CholClass::Determined), 0);
        assert_eq!(s.count(CholClass::StructuralZero), 0);

        let diag = MatrixPattern::new(PatternKind::Covariance, vec!["a".into(), "b".into(), "c".into()], &[], &[])
            .unwrap();
        let s = derive_structure(&diag).unwrap();
        assert_eq!(s.count(CholClass::StructuralZero), 3);
        let mut rng = StreamRng::seed_from_u64(1);
        let g = UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 };
        let nrm = UnivariatePrior::Normal { mean: 0.0, variance: 1.0 };
        let m = sample_structured_cov(&s, &g, &nrm, &mut rng).unwrap();
        for i in 0..3 {
            assert!(m.get(i, i) > 0.0);
            for j in 0..i {
                assert_eq!(m.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn unsupported_patterns() {
        let corr = MatrixPattern::new(PatternKind::Correlation, vec!["a".into(), "b".into()], &[(1, 0)], &[]).unwrap();
        assert!(derive_structure(&corr).is_err());
        let fixed =
            MatrixPattern::new(PatternKind::Covariance, vec!["a".into(), "b".into()], &[], &[((1, 0), 0.3)]).unwrap();
        assert!(derive_structure(&fixed).is_err());
    }

    #[test]
    fn sampled_block_is_pd_with_exact_zeros() {
        let s = derive_structure(&bollen_block()).unwrap();
        let g = UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 };
        let nrm = UnivariatePrior::Normal { mean: 0.0, variance: 1.0 };
        let draws = sample_structured_cov_batch(&s, &g, &nrm, 2_000, 3).unwrap();
        for m in &draws {
            assert!(is_positive_definite(m, PD_TOLERANCE));
            assert!(m.get(3, 0).abs() < 1e-12);
            assert!(m.get(2, 1).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_recovers_determined_entries() {
        let s = derive_structure(&bollen_block()).unwrap();
        let mut rng = StreamRng::seed_from_u64(4);
        let g = UnivariatePrior::Gamma { shape: 2.0, rate: 1.0 };
        let nrm = UnivariatePrior::Normal { mean: 0.0, variance: 1.0 };
        for _ in 0..200 {
            let m = sample_structured_cov(&s, &g, &nrm, &mut rng).unwrap();
            let l = factor_of(&m).unwrap();
            let mut free = Vec::new();
            for i in 0..4 {
                for j in 0..=i {
                    if matches!(s.class(i, j), CholClass::Free | CholClass::FreePositive) {
                        free.push(l[i * 4 + j]);
                    }
                }
            }
            let rebuilt = s.assemble_factor(&free);
            let (a, b) = (s.determined_values(&l), s.determined_values(&rebuilt));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn correlation_rescaling() {
        let mut m = SymmetricMatrix::zeros(2);
        m.set(0, 0, 4.0);
        m.set(1, 1, 9.0);
        m.set(1, 0, 3.0);
        let c = cov_to_corr(&m).unwrap();
        assert!((c.get(1, 0) - 0.5).abs() < 1e-15);
        assert_eq!(cov_to_corr(&SymmetricMatrix::identity(3)).unwrap(), SymmetricMatrix::identity(3));
        assert!(cov_to_corr(&SymmetricMatrix::zeros(2)).is_err());
    }

    #[test]
    fn every_ordering_keeps_free_count_and_zeros() {
        let base = bollen_block();
        let g = UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 };
        let nrm = UnivariatePrior::Normal { mean: 0.0, variance: 1.0 };
        let mut perms = Vec::new();
        permutations(&mut vec![0, 1, 2, 3], 0, &mut perms);
        assert_eq!(perms.len(), 24);
        for perm in perms {
            let p = base.permuted(&perm).unwrap();
            let s = derive_structure(&p).unwrap();
            assert_eq!(s.n_free(), 8);
            let mut rng = StreamRng::seed_from_u64(5);
            for _ in 0..50 {
                let m = sample_structured_cov(&s, &g, &nrm, &mut rng).unwrap();
                for i in 0..4 {
                    for j in 0..i {
                        if p.entry(i, j) == Entry::Fixed(0.0) {
                            assert!(m.get(i, j).abs() < 1e-12);
                        }
                    }
                }
                assert!(is_positive_definite(&m, PD_TOLERANCE));
            }
        }
    }

    fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == v.len() {
            out.push(v.clone());
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permutations(v, k + 1, out);
            v.swap(k, i);
        }
    }

    #[test]
    fn blockwise_derivation_on_full_pattern() {
        let p = MatrixPattern::political_democracy(PatternKind::Covariance);
        let s = derive_structure_blockwise(&p).unwrap();
        assert_eq!(s.n_free(), 11 + 6);
        assert_eq!(s.count(CholClass::Determined), 1);
    }
}
