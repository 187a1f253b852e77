//! Savage-Dickey density-ratio Bayes factors for point nulls on correlations.
//!
//! For a null `δ = 0` nested in a model with nuisance `ψ`,
//!
//! ```text
//! BF₁₀ = p(δ = 0) / p(δ = 0 | y) / C,   C = E[p₀(ψ) / p₁(ψ | δ = 0)],
//! ```
//!
//! where the expectation runs over the posterior of `ψ` and `p₀` is the
//! nuisance prior of the restricted model. The naive version uses the declared
//! univariate priors for `p(δ = 0)` and ignores `C`. The corrected version
//! uses the prior actually implied by the positive-definiteness constraint
//! and includes `C`.

use serde::{Deserialize, Serialize};

use crate::density::{kde_fit, kde_fit_weighted};
use crate::error::{Error, Result};
use crate::pattern::{Entry, MatrixPattern};
use crate::prior::{RejectionResult, StructuredPriorAssignment, UnivariatePrior};
use crate::table::SampleTable;

/// Prior draws needed for a constrained density estimate.
pub const MIN_PRIOR_DRAWS: usize = 10_000;

/// Half-width of the slice `|δ| < window` used for conditional densities.
pub const DEFAULT_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Naive,
    Corrected,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Mode::Naive),
            "corrected" => Ok(Mode::Corrected),
            _ => Err(Error::InvalidArgument(format!("unknown mode '{s}' (naive|corrected)"))),
        }
    }
}

/// Everything a Savage-Dickey computation consumes. Columns are referred to
/// by name, so the same machinery serves correlation patterns and any other
/// tabular prior/posterior pair.
#[derive(Debug, Clone)]
pub struct SavageDickeyInput {
    /// Columns tested against zero (one or two).
    pub focal: Vec<String>,
    /// Declared prior of each focal column, for the naive density.
    pub declared: Vec<UnivariatePrior>,
    /// Draws from the full constrained prior.
    pub prior_samples: SampleTable,
    pub posterior_samples: SampleTable,
    /// Nuisance columns whose prior changes when the focal entries are fixed.
    pub nuisance: Vec<String>,
    /// Draws from the restricted model's prior; needed iff `nuisance` is
    /// nonempty and the corrected mode is requested.
    pub restricted_prior_samples: Option<SampleTable>,
    pub window: f64,
}

impl SavageDickeyInput {
    /// Input for correlation entries of a pattern. Posterior columns are
    /// matched by label in either name order.
    pub fn from_pattern(
        declared: &StructuredPriorAssignment,
        focal: &[(usize, usize)],
        prior: &RejectionResult,
        posterior: &SampleTable,
    ) -> Result<Self> {
        let pattern = declared.pattern();
        let mut focal_labels = Vec::new();
        let mut priors = Vec::new();
        for &e in focal {
            let p = declared
                .prior(e)
                .ok_or_else(|| Error::InvalidArgument(format!("{} is not a free entry", pattern.entry_label(e.0, e.1))))?;
            priors.push(*p);
            focal_labels.push(pattern.entry_label(e.0, e.1));
        }
        Ok(SavageDickeyInput {
            focal: focal_labels,
            declared: priors,
            prior_samples: prior.to_table()?,
            posterior_samples: canonical_columns(pattern, posterior)?,
            nuisance: Vec::new(),
            restricted_prior_samples: None,
            window: DEFAULT_WINDOW,
        })
    }

    /// Adds nuisance entries and the restricted prior they are compared with.
    pub fn with_nuisance(mut self, pattern: &MatrixPattern, nuisance: &[(usize, usize)], restricted: &RejectionResult) -> Result<Self> {
        self.nuisance = nuisance.iter().map(|&(i, j)| pattern.entry_label(i, j)).collect();
        self.restricted_prior_samples = Some(restricted.to_table()?);
        Ok(self)
    }
}

/// Renames posterior columns written as `b~~a` to the pattern's canonical
/// `a~~b` label. Columns that are not entry labels are kept as they are.
pub fn canonical_columns(pattern: &MatrixPattern, table: &SampleTable) -> Result<SampleTable> {
    let names = table
        .names()
        .iter()
        .map(|n| match pattern.parse_entry_label(n) {
            Ok((i, j)) => pattern.entry_label(i, j),
            Err(_) => n.clone(),
        })
        .collect();
    SampleTable::from_columns(names, table.columns().to_vec())
}

/// The pattern with `focal` entries fixed at zero.
pub fn restricted_pattern(pattern: &MatrixPattern, focal: &[(usize, usize)]) -> Result<MatrixPattern> {
    let key = |(i, j): (usize, usize)| if i >= j { (i, j) } else { (j, i) };
    let focal: Vec<_> = focal.iter().map(|&e| key(e)).collect();
    let mut free = Vec::new();
    let mut fixed = Vec::new();
    for i in 0..pattern.dim() {
        for j in 0..i {
            match pattern.entry(i, j) {
                Entry::FreeOffDiagonal if focal.contains(&(i, j)) => fixed.push(((i, j), 0.0)),
                Entry::FreeOffDiagonal => free.push((i, j)),
                Entry::Fixed(v) if v != 0.0 => fixed.push(((i, j), v)),
                _ => {}
            }
        }
        if let Entry::Fixed(v) = pattern.entry(i, i) {
            if pattern.kind() == crate::pattern::PatternKind::Covariance {
                fixed.push(((i, i), v));
            }
        }
    }
    MatrixPattern::new(pattern.kind(), pattern.names().to_vec(), &free, &fixed)
}

/// The declared priors restricted to the free entries of
/// [`restricted_pattern`].
pub fn restricted_assignment(
    declared: &StructuredPriorAssignment,
    focal: &[(usize, usize)],
) -> Result<StructuredPriorAssignment> {
    let restricted = restricted_pattern(declared.pattern(), focal)?;
    let mut priors = std::collections::BTreeMap::new();
    for e in restricted.free_off_diagonal() {
        priors.insert(e, *declared.prior(e).expect("free in the full pattern"));
    }
    for i in restricted.free_diagonal() {
        priors.insert((i, i), *declared.prior((i, i)).expect("free in the full pattern"));
    }
    StructuredPriorAssignment::new(restricted, priors)
}

/// Product of declared univariate densities at zero, ignoring constraints.
pub fn naive_prior_density_at_null(declared: &StructuredPriorAssignment, focal: &[(usize, usize)]) -> Result<f64> {
    Ok(naive_log_density(declared_priors(declared, focal)?.as_slice()).exp())
}

fn declared_priors(declared: &StructuredPriorAssignment, focal: &[(usize, usize)]) -> Result<Vec<UnivariatePrior>> {
    focal
        .iter()
        .map(|&e| {
            declared.prior(e).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("{} is not a free entry", declared.pattern().entry_label(e.0, e.1)))
            })
        })
        .collect()
}

fn naive_log_density(priors: &[UnivariatePrior]) -> f64 {
    priors.iter().map(|p| p.ln_density(0.0)).sum()
}

/// Joint KDE of the accepted draws of `focal`, evaluated at zero.
pub fn constrained_prior_density_at_null(prior: &RejectionResult, focal: &[(usize, usize)]) -> Result<f64> {
    let table = prior.to_table()?;
    let labels: Vec<String> = focal.iter().map(|&(i, j)| prior.pattern().entry_label(i, j)).collect();
    Ok(log_density_at_zero(&table, &labels, MIN_PRIOR_DRAWS)?.exp())
}

fn log_density_at_zero(table: &SampleTable, labels: &[String], min_rows: usize) -> Result<f64> {
    if table.n_rows() < min_rows {
        return Err(Error::TooFewPoints {
            needed: min_rows,
            got: table.n_rows(),
        });
    }
    let cols = labels.iter().map(|l| table.require(l)).collect::<Result<Vec<_>>>()?;
    let model = kde_fit(&cols)?;
    let d = model.eval(&vec![0.0; cols.len()]);
    if !(d > 0.0) {
        return Err(Error::Numerical(format!(
            "density estimate at zero is {d} for {}",
            labels.join(", ")
        )));
    }
    Ok(d.ln())
}

/// Log of the Monte Carlo average, over posterior nuisance draws, of
/// `p_restricted(ψ) / p_full(ψ | focal ≈ 0)`.
///
/// The conditional full-prior density is a KDE of the full-prior draws with
/// every focal value inside `(-window, window)`, each draw weighted by
/// `Π (1 - |focal|/window)`.
pub fn correction_term(
    full_prior: &SampleTable,
    restricted_prior: &SampleTable,
    focal: &[String],
    nuisance: &[String],
    posterior_nuisance: &[Vec<f64>],
    window: f64,
) -> Result<f64> {
    if nuisance.is_empty() {
        return Ok(0.0);
    }
    if nuisance.len() > 2 {
        return Err(Error::InvalidArgument("at most two nuisance entries are supported".into()));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let focal_cols = focal.iter().map(|l| full_prior.require(l)).collect::<Result<Vec<_>>>()?;
    let full_cols = nuisance.iter().map(|l| full_prior.require(l)).collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = (0..full_prior.n_rows())
        .map(|r| focal_cols.iter().map(|c| (1.0 - c[r].abs() / window).max(0.0)).product())
        .collect();
    let in_slice = weights.iter().filter(|&&w| w > 0.0).count();
    if in_slice < crate::density::MIN_KDE_POINTS {
        return Err(Error::InvalidArgument(format!(
            "conditional slice |focal| < {window} holds {in_slice} prior draws; widen the window or draw more"
        )));
    }
    let conditional = kde_fit_weighted(&full_cols, &weights)?;
    let restricted_cols = nuisance.iter().map(|l| restricted_prior.require(l)).collect::<Result<Vec<_>>>()?;
    let restricted = kde_fit(&restricted_cols)?;

    if posterior_nuisance.is_empty() {
        return Err(Error::InvalidArgument("no posterior nuisance draws".into()));
    }
    let mut sum = 0.0;
    for psi in posterior_nuisance {
        let den = conditional.eval(psi);
        if !(den > 0.0) {
            return Err(Error::Numerical(format!(
                "conditional prior density vanishes at posterior draw {psi:?}"
            )));
        }
        sum += restricted.eval(psi) / den;
    }
    let avg = sum / posterior_nuisance.len() as f64;
    if !(avg > 0.0) || !avg.is_finite() {
        return Err(Error::Numerical(format!("correction average is {avg}")));
    }
    Ok(avg.ln())
}

/// All components on the log scale. `log_bf10_*` are `log BF₁₀`, positive
/// values favoring a nonzero focal parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesFactorReport {
    pub mode: Mode,
    pub log_prior_density_at_null_naive: f64,
    pub log_prior_density_at_null_constrained: f64,
    pub log_posterior_density_at_null: f64,
    pub log_correction: f64,
    pub log_bf10_naive: f64,
    pub log_bf10_corrected: f64,
}

impl BayesFactorReport {
    /// The Bayes factor for the requested mode.
    pub fn log_bf10(&self) -> f64 {
        match self.mode {
            Mode::Naive => self.log_bf10_naive,
            Mode::Corrected => self.log_bf10_corrected,
        }
    }
}

/// Computes both Bayes factors. The correction is only estimated in the
/// corrected mode; it is reported as 0 otherwise.
pub fn savage_dickey(input: &SavageDickeyInput, mode: Mode) -> Result<BayesFactorReport> {
    if input.focal.is_empty() || input.focal.len() > 2 {
        return Err(Error::InvalidArgument("one or two focal entries are supported".into()));
    }
    if input.declared.len() != input.focal.len() {
        return Err(Error::InvalidArgument("one declared prior per focal entry".into()));
    }
    if input.posterior_samples.n_rows() == 0 {
        return Err(Error::InvalidArgument("posterior table is empty".into()));
    }
    let naive = naive_log_density(&input.declared);
    let constrained = log_density_at_zero(&input.prior_samples, &input.focal, MIN_PRIOR_DRAWS)?;
    let posterior = log_density_at_zero(&input.posterior_samples, &input.focal, crate::density::MIN_KDE_POINTS)?;
    let correction = match (mode, input.nuisance.is_empty()) {
        (Mode::Naive, _) | (_, true) => 0.0,
        (Mode::Corrected, false) => {
            let restricted = input.restricted_prior_samples.as_ref().ok_or_else(|| {
                Error::InvalidArgument("corrected mode with nuisance entries needs restricted prior draws".into())
            })?;
            let psi = input.posterior_samples.rows_of(&input.nuisance)?;
            correction_term(
                &input.prior_samples,
                restricted,
                &input.focal,
                &input.nuisance,
                &psi,
                input.window,
            )?
        }
    };
    let report = BayesFactorReport {
        mode,
        log_prior_density_at_null_naive: naive,
        log_prior_density_at_null_constrained: constrained,
        log_posterior_density_at_null: posterior,
        log_correction: correction,
        log_bf10_naive: naive - posterior,
        log_bf10_corrected: constrained - posterior - correction,
    };
    let all = [
        report.log_prior_density_at_null_naive,
        report.log_prior_density_at_null_constrained,
        report.log_posterior_density_at_null,
        report.log_correction,
    ];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("Savage-Dickey components {all:?}")));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::PatternKind;
    use crate::prior::sample_structured_corr;
    use crate::rng::StreamRng;
    use crate::stats::{normal_ln_pdf, LN_SQRT_2PI};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn normal_table(name: &str, mean: f64, sd: f64, n: usize, seed: u64) -> SampleTable {
        let mut rng = StreamRng::seed_from_u64(seed);
        let d = Normal::new(mean, sd).unwrap();
        let xs = (0..n).map(|_| d.sample(&mut rng)).collect();
        SampleTable::from_columns(vec![name.into()], vec![xs]).unwrap()
    }

    fn conjugate_input(n_post: usize, seed: u64) -> (SavageDickeyInput, f64) {
        // theta ~ N(0, 1), y_i ~ N(theta, 1), n = 50, mean 0.3
        let (n, ybar) = (50.0f64, 0.3);
        let post_mean = n * ybar / (n + 1.0);
        let post_sd = (1.0 / (n + 1.0)).sqrt();
        let exact = -LN_SQRT_2PI - normal_ln_pdf(0.0, post_mean, post_sd);
        let input = SavageDickeyInput {
            focal: vec!["theta".into()],
            declared: vec![UnivariatePrior::Normal { mean: 0.0, variance: 1.0 }],
            prior_samples: normal_table("theta", 0.0, 1.0, 100_000, seed),
            posterior_samples: normal_table("theta", post_mean, post_sd, n_post, seed + 1),
            nuisance: vec![],
            restricted_prior_samples: None,
            window: DEFAULT_WINDOW,
        };
        (input, exact)
    }

    #[test]
    fn conjugate_normal_oracle() {
        let (input, exact) = conjugate_input(400_000, 10);
        for mode in [Mode::Naive, Mode::Corrected] {
            let r = savage_dickey(&input, mode).unwrap();
            assert!((r.log_bf10() - exact).abs() < 0.05, "{mode:?}: {} vs {exact}", r.log_bf10());
        }
    }

    #[test]
    fn doubling_posterior_draws_is_stable() {
        let (a, _) = conjugate_input(200_000, 20);
        let (b, _) = conjugate_input(400_000, 20);
        let ra = savage_dickey(&a, Mode::Naive).unwrap();
        let rb = savage_dickey(&b, Mode::Naive).unwrap();
        assert!((ra.log_bf10() - rb.log_bf10()).abs() < 0.05);
    }

    #[test]
    fn no_evidence_gives_zero() {
        let (mut input, _) = conjugate_input(1_000, 30);
        input.posterior_samples = input.prior_samples.clone();
        let r = savage_dickey(&input, Mode::Corrected).unwrap();
        assert!(r.log_bf10().abs() < 1e-12);
    }

    #[test]
    fn naive_and_corrected_share_posterior_term() {
        let (input, _) = conjugate_input(10_000, 40);
        let a = savage_dickey(&input, Mode::Naive).unwrap();
        let b = savage_dickey(&input, Mode::Corrected).unwrap();
        assert_eq!(a.log_posterior_density_at_null, b.log_posterior_density_at_null);
    }

    #[test]
    fn naive_densities() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let e1 = p.parse_entry_label("y2~~y4").unwrap();
        let e2 = p.parse_entry_label("y2~~y6").unwrap();
        let uni = StructuredPriorAssignment::uniform_over(p.clone(), UnivariatePrior::UniformSymmetric).unwrap();
        assert!((naive_prior_density_at_null(&uni, &[e1, e2]).unwrap() - 0.25).abs() < 1e-15);
        assert!((naive_prior_density_at_null(&uni, &[e1]).unwrap() - 0.5).abs() < 1e-15);
        let beta = StructuredPriorAssignment::uniform_over(p, UnivariatePrior::BetaOnMinusOneOne { a: 5.0, b: 5.0 })
            .unwrap();
        // Beta(5,5) density at 1/2 is 630/256; halve for the (-1, 1) scale.
        let expect = (630.0 / 256.0 / 2.0f64).powi(2);
        assert!((naive_prior_density_at_null(&beta, &[e1, e2]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn single_free_correlation_is_uniform() {
        let p = MatrixPattern::new(PatternKind::Correlation, vec!["a".into(), "b".into()], &[(1, 0)], &[]).unwrap();
        let a = StructuredPriorAssignment::uniform_over(p, UnivariatePrior::UniformSymmetric).unwrap();
        let r = sample_structured_corr(&a, 100_000, 1).unwrap();
        let d = constrained_prior_density_at_null(&r, &[(1, 0)]).unwrap();
        assert!((d - 0.5).abs() < 0.02, "{d}");
    }

    #[test]
    fn too_few_prior_draws() {
        let p = MatrixPattern::new(PatternKind::Correlation, vec!["a".into(), "b".into()], &[(1, 0)], &[]).unwrap();
        let a = StructuredPriorAssignment::uniform_over(p, UnivariatePrior::UniformSymmetric).unwrap();
        let r = sample_structured_corr(&a, 500, 1).unwrap();
        assert!(matches!(
            constrained_prior_density_at_null(&r, &[(1, 0)]),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn restricted_pattern_fixes_focal() {
        let p = MatrixPattern::political_democracy(PatternKind::Correlation);
        let e = p.parse_entry_label("y2~~y4").unwrap();
        let r = restricted_pattern(&p, &[e]).unwrap();
        assert_eq!(r.free_off_diagonal().len(), 5);
        assert_eq!(r.entry(e.0, e.1), Entry::Fixed(0.0));
    }

    #[test]
    fn separate_blocks_need_no_correction() {
        let p = MatrixPattern::new(
            PatternKind::Correlation,
            ["a", "b", "c", "d"].map(String::from).to_vec(),
            &[(1, 0), (3, 2)],
            &[],
        )
        .unwrap();
        let declared = StructuredPriorAssignment::uniform_over(p.clone(), UnivariatePrior::UniformSymmetric).unwrap();
        let full = sample_structured_corr(&declared, 1_000_000, 2).unwrap().to_table().unwrap();
        let restricted = sample_structured_corr(&restricted_assignment(&declared, &[(1, 0)]).unwrap(), 100_000, 3)
            .unwrap()
            .to_table()
            .unwrap();
        let mut rng = StreamRng::seed_from_u64(4);
        let post = Normal::new(0.2, 0.2).unwrap();
        let psi: Vec<Vec<f64>> = (0..2_000).map(|_| vec![post.sample(&mut rng)]).collect();
        let c = correction_term(&full, &restricted, &["a~~b".into()], &["c~~d".into()], &psi, DEFAULT_WINDOW).unwrap();
        assert!(c.abs() < 0.02, "{c}");
        assert_eq!(correction_term(&full, &restricted, &["a~~b".into()], &[], &psi, 0.05).unwrap(), 0.0);
        assert!(correction_term(&full, &restricted, &["a~~b".into()], &["c~~d".into()], &psi, 1e-7).is_err());
    }
}
