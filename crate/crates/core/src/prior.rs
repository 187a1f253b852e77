//! Univariate priors and rejection sampling of structured correlation
//! matrices.
//!
//! Declaring an independent prior on every free correlation and throwing away
//! proposals that are not positive definite leaves a set of accepted matrices
//! whose marginals differ from the declared priors. [`sample_structured_corr`]
//! runs that experiment; [`implied_marginal`] pulls one entry's accepted draws
//! back out for inspection.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{is_positive_definite, MatrixPattern, PatternKind, SymmetricMatrix, PD_TOLERANCE};
use crate::rng::{substream, Domain};
use crate::stats::{ln_beta, ln_gamma, normal_ln_pdf};
use crate::table::SampleTable;

/// Univariate prior families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnivariatePrior {
    /// Uniform on (-1, 1).
    #[serde(alias = "uniform")]
    UniformSymmetric,
    /// `2·X - 1` with `X ~ Beta(a, b)`.
    #[serde(alias = "beta")]
    BetaOnMinusOneOne { a: f64, b: f64 },
    /// Parameterized by variance.
    Normal { mean: f64, variance: f64 },
    /// Parameterized by rate; mean is `shape / rate`.
    Gamma { shape: f64, rate: f64 },
    Lognormal { meanlog: f64, sdlog: f64 },
}

impl UnivariatePrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            UnivariatePrior::UniformSymmetric => true,
            UnivariatePrior::BetaOnMinusOneOne { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            UnivariatePrior::Normal { mean, variance } => mean.is_finite() && variance > 0.0 && variance.is_finite(),
            UnivariatePrior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            UnivariatePrior::Lognormal { meanlog, sdlog } => meanlog.is_finite() && sdlog > 0.0 && sdlog.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Prior(format!("invalid hyperparameters in {self:?}")))
        }
    }

    /// Support is contained in (-1, 1).
    pub fn is_correlation_prior(&self) -> bool {
        matches!(
            self,
            UnivariatePrior::UniformSymmetric | UnivariatePrior::BetaOnMinusOneOne { .. }
        )
    }

    /// Support is contained in (0, ∞).
    pub fn is_positive_prior(&self) -> bool {
        matches!(self, UnivariatePrior::Gamma { .. } | UnivariatePrior::Lognormal { .. })
    }

    /// Draws one value. Hyperparameters must have been validated.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            UnivariatePrior::UniformSymmetric => loop {
                let u = rng.random::<f64>() * 2.0 - 1.0;
                if u > -1.0 {
                    break u;
                }
            },
            UnivariatePrior::BetaOnMinusOneOne { a, b } => {
                2.0 * Beta::new(a, b).expect("validated").sample(rng) - 1.0
            }
            UnivariatePrior::Normal { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            UnivariatePrior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            UnivariatePrior::Lognormal { meanlog, sdlog } => {
                LogNormal::new(meanlog, sdlog).expect("validated").sample(rng)
            }
        }
    }

    /// Log density at `x`; `-∞` outside the support.
    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            UnivariatePrior::UniformSymmetric => {
                if x > -1.0 && x < 1.0 {
                    -std::f64::consts::LN_2
                } else {
                    f64::NEG_INFINITY
                }
            }
            UnivariatePrior::BetaOnMinusOneOne { a, b } => {
                if !(x > -1.0 && x < 1.0) {
                    return f64::NEG_INFINITY;
                }
                let u = (x + 1.0) / 2.0;
                (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - ln_beta(a, b) - std::f64::consts::LN_2
            }
            UnivariatePrior::Normal { mean, variance } => normal_ln_pdf(x, mean, variance.sqrt()),
            UnivariatePrior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            UnivariatePrior::Lognormal { meanlog, sdlog } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                normal_ln_pdf(x.ln(), meanlog, sdlog) - x.ln()
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }
}

/// Shorthand for [`UnivariatePrior::sample`].
pub fn sample_prior<R: Rng + ?Sized>(p: &UnivariatePrior, rng: &mut R) -> f64 {
    p.sample(rng)
}

/// Shorthand for [`UnivariatePrior::density`].
pub fn prior_density(p: &UnivariatePrior, x: f64) -> f64 {
    p.density(x)
}

/// One declared prior per free entry of a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredPriorAssignment {
    pattern: MatrixPattern,
    priors: BTreeMap<(usize, usize), UnivariatePrior>,
}

impl StructuredPriorAssignment {
    /// Pairs each free entry `(row, col)`, `row >= col`, with a prior.
    pub fn new(pattern: MatrixPattern, priors: BTreeMap<(usize, usize), UnivariatePrior>) -> Result<Self> {
        let mut free: Vec<(usize, usize)> = pattern.free_off_diagonal();
        free.extend(pattern.free_diagonal().into_iter().map(|i| (i, i)));
        for e in &free {
            let prior = priors.get(e).ok_or_else(|| {
                Error::Prior(format!("no prior for free entry {}", pattern.entry_label(e.0, e.1)))
            })?;
            prior.validate()?;
            if pattern.kind() == PatternKind::Correlation && e.0 != e.1 && !prior.is_correlation_prior() {
                return Err(Error::Prior(format!(
                    "prior for correlation {} must be supported on (-1, 1)",
                    pattern.entry_label(e.0, e.1)
                )));
            }
        }
        if let Some(extra) = priors.keys().find(|e| !free.contains(e)) {
            return Err(Error::Prior(format!(
                "prior given for non-free entry {}",
                pattern.entry_label(extra.0, extra.1)
            )));
        }
        Ok(StructuredPriorAssignment { pattern, priors })
    }

    /// The same prior on every free entry.
    pub fn uniform_over(pattern: MatrixPattern, prior: UnivariatePrior) -> Result<Self> {
        let mut free = pattern.free_off_diagonal();
        free.extend(pattern.free_diagonal().into_iter().map(|i| (i, i)));
        let priors = free.into_iter().map(|e| (e, prior)).collect();
        Self::new(pattern, priors)
    }

    pub fn pattern(&self) -> &MatrixPattern {
        &self.pattern
    }

    pub fn prior(&self, entry: (usize, usize)) -> Option<&UnivariatePrior> {
        let key = if entry.0 >= entry.1 { entry } else { (entry.1, entry.0) };
        self.priors.get(&key)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorsDoc {
    #[serde(default)]
    default: Option<UnivariatePrior>,
    #[serde(default)]
    entries: BTreeMap<String, UnivariatePrior>,
}

/// Parses a priors document against a pattern:
///
/// ```json
/// {"default": {"family": "uniform_symmetric"},
///  "entries": {"y2~~y4": {"family": "beta_on_minus_one_one", "a": 5, "b": 5}}}
/// ```
///
/// Every free entry takes the prior listed under its label, falling back to
/// `default`.
pub fn parse_priors(text: &str, pattern: &MatrixPattern) -> Result<StructuredPriorAssignment> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: PriorsDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let mut priors = BTreeMap::new();
    for (label, prior) in &doc.entries {
        let e = pattern.parse_entry_label(label).map_err(|err| Error::Schema {
            path: format!("entries.{label}"),
            message: err.to_string(),
        })?;
        prior.validate().map_err(|err| Error::Schema {
            path: format!("entries.{label}"),
            message: err.to_string(),
        })?;
        priors.insert(e, *prior);
    }
    let mut free = pattern.free_off_diagonal();
    free.extend(pattern.free_diagonal().into_iter().map(|i| (i, i)));
    for e in free {
        if let std::collections::btree_map::Entry::Vacant(v) = priors.entry(e) {
            match doc.default {
                Some(p) => {
                    v.insert(p);
                }
                None => {
                    return Err(Error::Schema {
                        path: "entries".into(),
                        message: format!("no prior for {} and no default", pattern.entry_label(e.0, e.1)),
                    })
                }
            }
        }
    }
    StructuredPriorAssignment::new(pattern.clone(), priors)
}

/// Memory policy for accepted draws.
#[derive(Debug, Clone)]
pub struct RejectionOptions {
    /// Accepted matrices kept in memory; the rest go to `spill_path`.
    pub memory_cap: usize,
    /// Spill file; a file in the system temp directory when `None`.
    pub spill_path: Option<PathBuf>,
}

impl Default for RejectionOptions {
    fn default() -> Self {
        RejectionOptions {
            memory_cap: 1_000_000,
            spill_path: None,
        }
    }
}

/// Outcome of a rejection run.
#[derive(Debug, Clone)]
pub struct RejectionResult {
    pattern: MatrixPattern,
    free_entries: Vec<(usize, usize)>,
    /// Accepted matrices held in memory, in proposal order.
    pub accepted: Vec<SymmetricMatrix>,
    pub n_proposed: u64,
    pub n_rejected: u64,
    /// Accepted matrices written to `spill_path` after the memory cap filled.
    pub n_spilled: u64,
    pub spill_path: Option<PathBuf>,
    pub seed: u64,
    /// Index of the first rejected proposal: where a sampler that halts on a
    /// non-positive-definite matrix would have stopped.
    pub first_rejection: Option<u64>,
}

impl RejectionResult {
    pub fn pattern(&self) -> &MatrixPattern {
        &self.pattern
    }

    pub fn free_entries(&self) -> &[(usize, usize)] {
        &self.free_entries
    }

    pub fn n_accepted(&self) -> u64 {
        self.accepted.len() as u64 + self.n_spilled
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.n_accepted() as f64 / self.n_proposed as f64
    }

    pub fn rejection_rate(&self) -> f64 {
        self.n_rejected as f64 / self.n_proposed as f64
    }

    pub fn labels(&self) -> Vec<String> {
        self.free_entries
            .iter()
            .map(|&(i, j)| self.pattern.entry_label(i, j))
            .collect()
    }

    /// All accepted draws, one column per free entry labelled `a~~b`,
    /// including any spilled rows.
    pub fn to_table(&self) -> Result<SampleTable> {
        let mut t = SampleTable::new(self.labels())?;
        for m in &self.accepted {
            let row: Vec<f64> = self.free_entries.iter().map(|&(i, j)| m.get(i, j)).collect();
            t.push_row(&row);
        }
        if let (Some(path), true) = (&self.spill_path, self.n_spilled > 0) {
            let spilled = SampleTable::read_csv_file(path)?;
            for r in spilled.rows_of(t.names())? {
                t.push_row(&r);
            }
        }
        Ok(t)
    }
}

/// Rejection sampling with the default memory policy.
pub fn sample_structured_corr(
    assignment: &StructuredPriorAssignment,
    n_proposals: u64,
    seed: u64,
) -> Result<RejectionResult> {
    sample_structured_corr_with(assignment, n_proposals, seed, &RejectionOptions::default())
}

const CHUNK: u64 = 4096;

/// Draws every free correlation independently from its prior and keeps the
/// proposal iff the assembled matrix is positive definite.
///
/// The draw for entry `e` of proposal `k` comes from the substream keyed by
/// `(seed, e, k)`, so the result is identical for any number of worker
/// threads and any drawing order.
pub fn sample_structured_corr_with(
    assignment: &StructuredPriorAssignment,
    n_proposals: u64,
    seed: u64,
    options: &RejectionOptions,
) -> Result<RejectionResult> {
    let pattern = assignment.pattern();
    if pattern.kind() != PatternKind::Correlation {
        return Err(Error::InvalidArgument("rejection sampling needs a correlation pattern".into()));
    }
    if n_proposals == 0 {
        return Err(Error::InvalidArgument("n_proposals must be positive".into()));
    }
    let free = pattern.free_off_diagonal();
    let priors: Vec<UnivariatePrior> = free
        .iter()
        .map(|&e| *assignment.prior(e).expect("assignment covers free entries"))
        .collect();
    let ids: Vec<u64> = free.iter().map(|&(i, j)| MatrixPattern::entry_id(i, j)).collect();

    let mut result = RejectionResult {
        pattern: pattern.clone(),
        free_entries: free.clone(),
        accepted: Vec::new(),
        n_proposed: n_proposals,
        n_rejected: 0,
        n_spilled: 0,
        spill_path: None,
        seed,
        first_rejection: None,
    };
    let mut spill: Option<csv::Writer<std::fs::File>> = None;

    let mut start = 0;
    while start < n_proposals {
        let end = (start + CHUNK * 64).min(n_proposals);
        let verdicts: Vec<(Vec<f64>, bool)> = (start..end)
            .into_par_iter()
            .map(|k| {
                let values: Vec<f64> = ids
                    .iter()
                    .zip(&priors)
                    .map(|(&id, prior)| prior.sample(&mut substream(seed, Domain::PriorEntry, id, k)))
                    .collect();
                let ok = is_positive_definite(&pattern.assemble(&values), PD_TOLERANCE);
                (values, ok)
            })
            .collect();
        for (offset, (values, ok)) in verdicts.into_iter().enumerate() {
            let k = start + offset as u64;
            if !ok {
                result.n_rejected += 1;
                result.first_rejection.get_or_insert(k);
            } else if result.accepted.len() < options.memory_cap {
                result.accepted.push(pattern.assemble(&values));
            } else {
                let w = match spill.as_mut() {
                    Some(w) => w,
                    None => {
                        let path = options.spill_path.clone().unwrap_or_else(|| {
                            std::env::temp_dir().join(format!("opaque-spill-{seed}-{}.csv", std::process::id()))
                        });
                        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                        let mut w = csv::Writer::from_writer(f);
                        w.write_record(result.labels())?;
                        result.spill_path = Some(path);
                        spill.insert(w)
                    }
                };
                w.write_record(values.iter().map(f64::to_string))?;
                result.n_spilled += 1;
            }
        }
        start = end;
    }
    if let Some(mut w) = spill {
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    }
    Ok(result)
}

/// Accepted draws of one free entry.
pub fn implied_marginal(result: &RejectionResult, entry: (usize, usize)) -> Result<Vec<f64>> {
    let dim = result.pattern.dim();
    if entry.0 >= dim || entry.1 >= dim {
        return Err(Error::InvalidArgument(format!("entry {entry:?} out of range for dim {dim}")));
    }
    let key = if entry.0 >= entry.1 { entry } else { (entry.1, entry.0) };
    if !result.free_entries.contains(&key) {
        return Err(Error::InvalidArgument(format!(
            "entry {} is not free",
            result.pattern.entry_label(key.0, key.1)
        )));
    }
    if result.n_accepted() == 0 {
        return Err(Error::InvalidArgument("no accepted draws".into()));
    }
    let mut out: Vec<f64> = result.accepted.iter().map(|m| m.get(key.0, key.1)).collect();
    if result.n_spilled > 0 {
        let label = result.pattern.entry_label(key.0, key.1);
        let path = result.spill_path.as_deref().expect("spilled rows have a path");
        let spilled = SampleTable::read_csv_file(path)?;
        out.extend_from_slice(spilled.require(&label)?);
    }
    Ok(out)
}

/// Writes accepted draws as CSV, one column per free entry.
pub fn write_accepted_csv(result: &RejectionResult, path: &Path) -> Result<()> {
    let table = result.to_table()?;
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    table.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::stats::{ks_distance, mean};
    use rand::SeedableRng;

    fn uniform_cdf(x: f64) -> f64 {
        ((x + 1.0) / 2.0).clamp(0.0, 1.0)
    }

    fn two_by_two() -> MatrixPattern {
        MatrixPattern::new(PatternKind::Correlation, vec!["a".into(), "b".into()], &[(1, 0)], &[]).unwrap()
    }

    #[test]
    fn uniform_draws_stay_inside() {
        let mut rng = StreamRng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = UnivariatePrior::UniformSymmetric.sample(&mut rng);
            assert!(x > -1.0 && x < 1.0);
        }
    }

    #[test]
    fn beta_one_one_is_uniform() {
        let mut rng = StreamRng::seed_from_u64(11);
        let p = UnivariatePrior::BetaOnMinusOneOne { a: 1.0, b: 1.0 };
        let xs: Vec<f64> = (0..100_000).map(|_| p.sample(&mut rng)).collect();
        assert!(ks_distance(&xs, uniform_cdf) < 0.02);
    }

    #[test]
    fn gamma_mean_uses_rate() {
        let mut rng = StreamRng::seed_from_u64(5);
        let p = UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 };
        let xs: Vec<f64> = (0..100_000).map(|_| p.sample(&mut rng)).collect();
        assert!((mean(&xs) - 2.0).abs() < 0.05);
    }

    #[test]
    fn density_examples() {
        assert_eq!(UnivariatePrior::UniformSymmetric.density(0.0), 0.5);
        assert_eq!(UnivariatePrior::BetaOnMinusOneOne { a: 5.0, b: 5.0 }.density(1.5), 0.0);
        let d = UnivariatePrior::Normal { mean: 0.0, variance: 25.0 }.density(0.0);
        assert!((d - 0.079_788_456_080_286_54).abs() < 1e-12);
        // Beta(5,5) at its centre: 630 / 256 / 2
        let d = UnivariatePrior::BetaOnMinusOneOne { a: 5.0, b: 5.0 }.density(0.0);
        assert!((d - 630.0 / 256.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(UnivariatePrior::Normal { mean: 0.0, variance: 0.0 }.validate().is_err());
        assert!(UnivariatePrior::Gamma { shape: -1.0, rate: 1.0 }.validate().is_err());
    }

    #[test]
    fn priors_document_round_trip() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let doc = r#"{"default": {"family": "uniform"},
            "entries": {"y4~~y2": {"family": "beta", "a": 5, "b": 5}}}"#;
        let a = parse_priors(doc, &p).unwrap();
        let e = p.parse_entry_label("y2~~y4").unwrap();
        assert_eq!(a.prior(e), Some(&UnivariatePrior::BetaOnMinusOneOne { a: 5.0, b: 5.0 }));
        let e = p.parse_entry_label("y6~~y8").unwrap();
        assert_eq!(a.prior(e), Some(&UnivariatePrior::UniformSymmetric));
    }

    #[test]
    fn priors_document_errors() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        assert!(parse_priors(r#"{"entries": {}}"#, &p).is_err());
        let err = parse_priors(r#"{"default": {"family": "uniform"}, "entries": {"x1~~x2": {"family": "uniform"}}}"#, &p)
            .unwrap_err();
        assert!(err.to_string().contains("non-free"), "{err}");
        let err = parse_priors(r#"{"default": {"family": "normal", "mean": 0}}"#, &p).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
        let err = parse_priors(r#"{"default": {"family": "normal", "mean": 0, "variance": 1}}"#, &p).unwrap_err();
        assert!(err.to_string().contains("(-1, 1)"), "{err}");
    }

    #[test]
    fn two_by_two_accepts_everything() {
        let a = StructuredPriorAssignment::uniform_over(two_by_two(), UnivariatePrior::UniformSymmetric).unwrap();
        let r = sample_structured_corr(&a, 20_000, 9).unwrap();
        assert_eq!(r.acceptance_rate(), 1.0);
        assert_eq!(r.first_rejection, None);
        let xs = implied_marginal(&r, (1, 0)).unwrap();
        assert!(ks_distance(&xs, uniform_cdf) < 0.02);
    }

    #[test]
    fn zero_proposals_is_an_error() {
        let a = StructuredPriorAssignment::uniform_over(two_by_two(), UnivariatePrior::UniformSymmetric).unwrap();
        assert!(sample_structured_corr(&a, 0, 1).is_err());
    }

    #[test]
    fn marginal_of_fixed_entry_is_an_error() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let a = StructuredPriorAssignment::uniform_over(p, UnivariatePrior::UniformSymmetric).unwrap();
        let r = sample_structured_corr(&a, 100, 1).unwrap();
        assert!(implied_marginal(&r, (1, 0)).is_err());
        assert!(implied_marginal(&r, (20, 0)).is_err());
    }

    #[test]
    fn spill_keeps_every_accepted_draw() {
        let dir = tempfile::tempdir().unwrap();
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let a = StructuredPriorAssignment::uniform_over(p.clone(), UnivariatePrior::UniformSymmetric).unwrap();
        let opts = RejectionOptions {
            memory_cap: 100,
            spill_path: Some(dir.path().join("spill.csv")),
        };
        let capped = sample_structured_corr_with(&a, 2_000, 4, &opts).unwrap();
        let full = sample_structured_corr(&a, 2_000, 4).unwrap();
        assert_eq!(capped.accepted.len(), 100);
        assert_eq!(capped.n_accepted(), full.n_accepted());
        assert_eq!(capped.n_accepted() + capped.n_rejected, capped.n_proposed);
        let e = p.parse_entry_label("y2~~y4").unwrap();
        assert_eq!(implied_marginal(&capped, e).unwrap(), implied_marginal(&full, e).unwrap());
        assert_eq!(capped.to_table().unwrap(), full.to_table().unwrap());
    }
}
