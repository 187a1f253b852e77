//! Reruns of the reference experiments at desk scale. Each section writes
//! its data files and a `summary.csv` of checks with measured values and
//! tolerances.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cfa::{self, flip_factor, gibbs_fit, loading_name, log_likelihood, relabel, CfaModel, CfaParams, CfaPriors, FitSettings, Identification};
use crate::chol::{derive_structure, sample_structured_cov_batch, CholClass};
use crate::error::{Error, Result};
use crate::pattern::{is_positive_definite, MatrixPattern, PatternKind, PD_TOLERANCE};
use crate::prior::{sample_structured_corr, StructuredPriorAssignment, UnivariatePrior};
use crate::savage_dickey::{constrained_prior_density_at_null, naive_prior_density_at_null};
use crate::sbc::{sbc_run, SbcConfig, SbcReport, SignVerdict};
use crate::stats::{mean, pearson};
use crate::svg::Figure;
use crate::threshold::{curves_table, emit_curves, increment_mass_k2, order_stat_density, ScaleParam, ThresholdDensityCurve, ThresholdPriorSpec, Translation};

/// Proposals used for the residual-correlation experiments.
pub const BOLLEN_PROPOSALS: u64 = 100_000;
/// Published rejection fraction: 57,818 of 100,000.
pub const PUBLISHED_REJECTION_RATE: f64 = 0.57818;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    PositiveDefinite,
    SavageDickeyPrior,
    Cholesky,
    SignFlip,
    SbcNoninformative,
    SbcInformative,
    ThresholdReorder,
    ThresholdIncrement,
}

impl Section {
    pub const ALL: [Section; 8] = [
        Section::PositiveDefinite,
        Section::SavageDickeyPrior,
        Section::Cholesky,
        Section::SignFlip,
        Section::SbcNoninformative,
        Section::SbcInformative,
        Section::ThresholdReorder,
        Section::ThresholdIncrement,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Section::PositiveDefinite => "2.1",
            Section::SavageDickeyPrior => "2.3-prior",
            Section::Cholesky => "2.4.2",
            Section::SignFlip => "3.1",
            Section::SbcNoninformative => "3.2-ni",
            Section::SbcInformative => "3.2-inf",
            Section::ThresholdReorder => "4.1.1",
            Section::ThresholdIncrement => "4.1.2",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Section::ALL.into_iter().find(|x| x.id() == s).ok_or_else(|| {
            let ids: Vec<&str> = Section::ALL.iter().map(|x| x.id()).collect();
            Error::InvalidArgument(format!("unknown section '{s}' (expected one of {})", ids.join(", ")))
        })
    }
}

/// One measured quantity compared against its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn within(name: &str, measured: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            target: format!("{target} ± {tol}"),
            pass: (measured - target).abs() <= tol,
        }
    }

    pub fn range(name: &str, measured: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            target: format!("[{lo}, {hi}]"),
            pass: measured >= lo && measured <= hi,
        }
    }

    pub fn above(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            target: format!("> {bound}"),
            pass: measured > bound,
        }
    }

    pub fn below(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            target: format!("< {bound}"),
            pass: measured < bound,
        }
    }

    pub fn flag(name: &str, ok: bool, target: &str) -> Self {
        Check {
            name: name.into(),
            measured: if ok { 1.0 } else { 0.0 },
            target: target.into(),
            pass: ok,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SectionReport {
    pub section: Section,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl SectionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Output options shared by every section.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Output {
    fn create(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    fn write(&self, files: &mut Vec<PathBuf>, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(())
    }

    fn figure(&self, files: &mut Vec<PathBuf>, name: &str, fig: &Figure) -> Result<()> {
        if self.svg {
            self.write(files, name, fig.to_svg().as_bytes())?;
        }
        Ok(())
    }

    fn table(&self, files: &mut Vec<PathBuf>, name: &str, t: &crate::table::SampleTable) -> Result<()> {
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        self.write(files, name, &buf)
    }
}

fn write_summary(out: &Output, report: &mut SectionReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["check", "measured", "target", "pass"]).map_err(fail)?;
    for c in &report.checks {
        w.write_record([c.name.as_str(), &format!("{}", c.measured), &c.target, if c.pass { "pass" } else { "fail" }])
            .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    out.write(&mut report.files, "summary.csv", &bytes)
}

/// Runs one section and writes its files under `out.dir`.
pub fn reproduce(section: Section, seed: u64, out: &Output) -> Result<SectionReport> {
    out.create()?;
    let mut files = Vec::new();
    let checks = match section {
        Section::PositiveDefinite => positive_definite(seed, out, &mut files)?,
        Section::SavageDickeyPrior => savage_dickey_prior(seed, out, &mut files)?,
        Section::Cholesky => cholesky(seed, out, &mut files)?,
        Section::SignFlip => sign_flip(seed, out, &mut files)?,
        Section::SbcNoninformative => sbc_section(false, seed, out, &mut files)?,
        Section::SbcInformative => sbc_section(true, seed, out, &mut files)?,
        Section::ThresholdReorder => thresholds(Translation::Reorder, seed, out, &mut files)?,
        Section::ThresholdIncrement => thresholds(Translation::LognormalIncrement, seed, out, &mut files)?,
    };
    let mut report = SectionReport { section, checks, files };
    write_summary(out, &mut report)?;
    Ok(report)
}

/// The residual-correlation pattern with Uniform(−1, 1) priors.
pub fn uniform_bollen() -> StructuredPriorAssignment {
    let p = MatrixPattern::political_democracy(PatternKind::Correlation);
    StructuredPriorAssignment::uniform_over(p, UnivariatePrior::UniformSymmetric).expect("uniform priors are valid")
}

fn positive_definite(seed: u64, out: &Output, files: &mut Vec<PathBuf>) -> Result<Vec<Check>> {
    let a = uniform_bollen();
    let r = sample_structured_corr(&a, BOLLEN_PROPOSALS, seed)?;
    let table = r.to_table()?;
    out.table(files, "accepted.csv", &table)?;
    let p = a.pattern();
    let [e1, e2] = bollen_focal(p);
    let (x, y) = (p.entry_label(e1.0, e1.1), p.entry_label(e2.0, e2.1));
    let (xs, ys) = (table.require(&x)?, table.require(&y)?);
    let pts = xs.iter().zip(ys).take(5_000).map(|(&a, &b)| (a, b)).collect();
    out.figure(files, "accepted.svg", &Figure::new("Accepted draws", &x, &y).scatter(pts))?;
    Ok(vec![
        Check::within("rejection_rate", r.rejection_rate(), PUBLISHED_REJECTION_RATE, 0.01),
        Check::within("acceptance_rate", r.acceptance_rate(), 1.0 - PUBLISHED_REJECTION_RATE, 0.01),
    ])
}

/// The two correlations of `y2` tested against zero.
pub fn bollen_focal(p: &MatrixPattern) -> [(usize, usize); 2] {
    [
        p.parse_entry_label("y2~~y4").expect("entry exists"),
        p.parse_entry_label("y2~~y6").expect("entry exists"),
    ]
}

fn savage_dickey_prior(seed: u64, out: &Output, files: &mut Vec<PathBuf>) -> Result<Vec<Check>> {
    let a = uniform_bollen();
    let focal = bollen_focal(a.pattern());
    let naive = naive_prior_density_at_null(&a, &focal)?.ln();
    let r = sample_structured_corr(&a, BOLLEN_PROPOSALS, seed)?;
    let constrained = constrained_prior_density_at_null(&r, &focal)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["quantity", "value"]).map_err(fail)?;
    w.write_record(["log_naive_density", &naive.to_string()]).map_err(fail)?;
    w.write_record(["constrained_density", &constrained.to_string()]).map_err(fail)?;
    w.write_record(["log_constrained_density", &constrained.ln().to_string()]).map_err(fail)?;
    out.write(files, "densities.csv", &w.into_inner().map_err(|e| Error::Csv(e.to_string()))?)?;
    Ok(vec![
        Check::within("log_naive_density", naive, -1.3863, 1e-4),
        Check::within("constrained_density", constrained, 0.46, 0.05),
        Check::within("log_constrained_density", constrained.ln(), -0.78, 0.11),
    ])
}

/// The 4 × 4 block of `y2, y4, y6, y8` as a covariance pattern.
pub fn bollen_block() -> MatrixPattern {
    let names = ["y2", "y4", "y6", "y8"].map(String::from).to_vec();
    MatrixPattern::new(PatternKind::Covariance, names, &[(1, 0), (2, 0), (3, 1), (3, 2)], &[]).expect("valid block")
}

fn cholesky(seed: u64, out: &Output, files: &mut Vec<PathBuf>) -> Result<Vec<Check>> {
    let s = derive_structure(&bollen_block())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["row", "col", "class"]).map_err(fail)?;
    for (r, c, k) in s.table() {
        w.write_record([r, c, k.to_string()]).map_err(fail)?;
    }
    out.write(files, "structure.csv", &w.into_inner().map_err(|e| Error::Csv(e.to_string()))?)?;
    let classes_ok = s.class(2, 1) == CholClass::Determined
        && s.class(3, 0) == CholClass::StructuralZero
        && s.count(CholClass::Determined) == 1
        && s.count(CholClass::StructuralZero) == 1;
    let g = UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 };
    let nrm = UnivariatePrior::Normal { mean: 0.0, variance: 1.0 };
    let draws = sample_structured_cov_batch(&s, &g, &nrm, 10_000, seed)?;
    let pd = draws.iter().filter(|m| is_positive_definite(m, PD_TOLERANCE)).count();
    let max_zero = draws.iter().map(|m| m.get(2, 1).abs().max(m.get(3, 0).abs())).fold(0.0, f64::max);
    let mut det_err = 0.0f64;
    for m in draws.iter().take(1_000) {
        let l = crate::chol::factor_of(m)?;
        let expect = -l[4] * l[2 * 4] / l[4 + 1];
        det_err = det_err.max((l[2 * 4 + 1] - expect).abs());
    }
    Ok(vec![
        Check::flag("classification", classes_ok, "(3,2) determined, (4,1) structural zero"),
        Check::below("determined_value_error", det_err, 1e-10),
        Check::within("pd_fraction", pd as f64 / draws.len() as f64, 1.0, 0.0),
        Check::below("max_fixed_zero", max_zero, 1e-12),
    ])
}

/// The nine-item, three-factor model with latent variances fixed to 1.
pub fn sign_flip_model() -> CfaModel {
    CfaModel::simple(3, 3, Identification::LatentVarianceFixedToOne { sign_restrict_focal: false }).expect("valid model")
}

/// Result of the sign-flip experiment.
pub struct SignFlipRun {
    pub model: CfaModel,
    pub data: crate::table::SampleTable,
    pub draws: cfa::PosteriorDraws,
    pub relabeled: cfa::PosteriorDraws,
}

/// Loadings −1, everything else at its reference value, 1000 rows, three
/// chains of 500 warmup and 1000 kept iterations.
pub fn run_sign_flip(seed: u64) -> Result<SignFlipRun> {
    let model = sign_flip_model();
    let truth = CfaParams::uniform(&model, -1.0);
    let data = cfa::generate_data(&model, &truth, 1000, seed)?;
    let settings = FitSettings {
        chains: 3,
        warmup: 500,
        iters: 1000,
        seed: seed.wrapping_add(1),
    };
    let draws = gibbs_fit(&model, &CfaPriors::noninformative(), &data, &settings)?;
    let relabeled = relabel(&draws, &model)?;
    Ok(SignFlipRun {
        model,
        data,
        draws,
        relabeled,
    })
}

/// Largest relative log-likelihood change between draws and their relabeled
/// or fully sign-flipped versions, over every `stride`-th draw.
pub fn max_likelihood_change(run: &SignFlipRun, stride: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for r in (0..run.draws.table.n_rows()).step_by(stride.max(1)) {
        let p = run.draws.params(&run.model, r)?;
        let base = log_likelihood(&run.model, &p, &run.data)?;
        let q = run.relabeled.params(&run.model, r)?;
        let mut flipped = p.clone();
        for j in 0..run.model.n_factors() {
            flipped = flip_factor(&flipped, &run.model, j);
        }
        for other in [q, flipped] {
            let ll = log_likelihood(&run.model, &other, &run.data)?;
            worst = worst.max((ll - base).abs() / base.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn sign_flip(seed: u64, out: &Output, files: &mut Vec<PathBuf>) -> Result<Vec<Check>> {
    let run = run_sign_flip(seed)?;
    out.table(files, "draws.csv", &run.draws.table)?;
    out.table(files, "draws_relabeled.csv", &run.relabeled.table)?;
    let mut checks = Vec::new();
    let mut fig = Figure::new("Relabeled loading draws", "draw", "loading");
    for i in 0..run.model.n_items() {
        let name = loading_name(i);
        let col = run.relabeled.table.require(&name)?;
        checks.push(Check::range(&format!("mean {name}"), mean(col), 0.8, 1.2));
        let xs: Vec<f64> = (0..col.len()).map(|k| k as f64).collect();
        fig = fig.line(&xs, col, false);
    }
    out.figure(files, "loadings.svg", &fig.hline(-1.0))?;
    checks.push(Check::below("max_relative_loglik_change", max_likelihood_change(&run, 30)?, 1e-10));
    Ok(checks)
}

/// The desk-scale SBC configurations: latent variances fixed to 1, focal
/// loadings sign-restricted, relabeling on, loadings N(1, 1/16) or N(0, 100).
pub fn sbc_config(informative: bool, seed: u64) -> SbcConfig {
    let model = CfaModel::simple(3, 3, Identification::LatentVarianceFixedToOne { sign_restrict_focal: true }).expect("valid model");
    let loading = if informative {
        UnivariatePrior::Normal { mean: 1.0, variance: 1.0 / 16.0 }
    } else {
        UnivariatePrior::Normal { mean: 0.0, variance: 100.0 }
    };
    let priors = CfaPriors {
        loading,
        ..CfaPriors::noninformative()
    };
    SbcConfig {
        relabel: true,
        ..SbcConfig::desk(model, priors, seed)
    }
}

/// Verdict on all loadings pooled.
pub fn pooled_verdict(report: &SbcReport) -> Result<crate::sbc::SignDiagnostic> {
    let recs: Vec<_> = report.loadings().flat_map(|p| &p.records).collect();
    let t: Vec<f64> = recs.iter().map(|r| r.truth).collect();
    let m: Vec<f64> = recs.iter().map(|r| r.post_mean).collect();
    crate::sbc::sign_pattern_detect(&t, &m)
}

/// Writes record, summary and histogram files plus per-loading scatters.
pub fn write_sbc_outputs(report: &SbcReport, out: &Output, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut buf = Vec::new();
    report.records_csv(&mut buf)?;
    out.write(files, "records.csv", &buf)?;
    let mut buf = Vec::new();
    report.summary_csv(&mut buf)?;
    out.write(files, "parameters.csv", &buf)?;
    let hist = report.rank_histograms()?;
    out.table(files, "rank_histograms.csv", &hist)?;
    for p in report.loadings() {
        let pts = p.records.iter().map(|r| (r.truth, r.post_mean)).collect();
        let stem = p.name.replace(['[', ']'], "_").trim_end_matches('_').to_string();
        let fig = Figure::new(&p.name, "true value", "posterior mean").scatter(pts).diagonal();
        out.figure(files, &format!("scatter_{stem}.svg"), &fig)?;
        let counts: Vec<f64> = hist.require(&p.name)?.to_vec();
        let expected = p.records.len() as f64 / counts.len() as f64;
        let fig = Figure::new(&format!("{} ranks", p.name), "bin", "count").bars(0.0, 1.0, counts).hline(expected);
        out.figure(files, &format!("ranks_{stem}.svg"), &fig)?;
    }
    Ok(())
}

fn sbc_section(informative: bool, seed: u64, out: &Output, files: &mut Vec<PathBuf>) -> Result<Vec<Check>> {
    let report = sbc_run(&sbc_config(informative, seed))?;
    write_sbc_outputs(&report, out, files)?;
    let pooled = pooled_verdict(&report)?;
    let mut checks = vec![Check::within("excluded_sims", report.excluded.len() as f64, 0.0, 0.0)];
    if informative {
        checks.push(Check::flag("pooled_verdict_identity", pooled.verdict == SignVerdict::Identity, "identity"));
        checks.push(Check::above("pooled_signed_corr", report.pooled_loading_corr.unwrap_or(f64::NAN), 0.9));
        checks.push(Check::above("pooled_rank_p_value", report.pooled_loading_p_value.unwrap_or(f64::NAN), 0.01));
    } else {
        checks.push(Check::flag("pooled_verdict_v_or_x", pooled.verdict == SignVerdict::VorX, "v_or_x"));
        let n = report.loadings().filter(|p| p.sign.map(|s| s.verdict) == Some(SignVerdict::VorX)).count();
        checks.push(Check::within("loadings_with_v_or_x", n as f64, report.loadings().count() as f64, 0.0));
    }
    Ok(checks)
}

/// The three-threshold specification with a Normal(0, 5) base, 5 read as
/// the variance.
pub fn threshold_spec(translation: Translation) -> ThresholdPriorSpec {
    ThresholdPriorSpec::declared(3, 0.0, 5.0, ScaleParam::Variance, translation).expect("valid spec")
}

/// Base curve dashed, one solid line per threshold.
pub fn curve_figure(curves: &[ThresholdDensityCurve], title: &str) -> Figure {
    let mut fig = Figure::new(title, "threshold", "density");
    for c in curves {
        fig = fig.line(&c.grid, &c.density, c.which == 0);
    }
    fig
}

fn thresholds(translation: Translation, seed: u64, out: &Output, files: &mut Vec<PathBuf>) -> Result<Vec<Check>> {
    let spec = threshold_spec(translation);
    let curves = emit_curves(&spec, seed)?;
    out.table(files, "curves.csv", &curves_table(&curves)?)?;
    out.figure(files, "curves.svg", &curve_figure(&curves, "Implied threshold priors"))?;
    let mut checks: Vec<Check> = curves
        .iter()
        .map(|c| Check::within(&format!("mass g{}", c.which), c.trapezoid_mass(), 1.0, 0.005))
        .collect();
    let g = |k: usize| curves.iter().find(|c| c.which == k).expect("curve exists");
    match translation {
        Translation::Reorder => {
            checks.push(Check::below("g1_mode", g(1).mode(), 0.0));
            checks.push(Check::above("g3_mode", g(3).mode(), 0.0));
            let mut sym = 0.0f64;
            let mut sum = 0.0f64;
            for k in 0..=400 {
                let x = -15.0 + 30.0 * k as f64 / 400.0;
                sym = sym.max((order_stat_density(&spec, 1, -x)? - order_stat_density(&spec, 3, x)?).abs());
                let total: f64 = (1..=3).map(|j| order_stat_density(&spec, j, x)).sum::<Result<f64>>()?;
                sum = sum.max((total - 3.0 * spec.base_density(x)).abs());
            }
            checks.push(Check::below("mirror_symmetry_error", sym, 1e-10));
            checks.push(Check::below("sum_identity_error", sum, 1e-10));
        }
        Translation::LognormalIncrement => {
            let base = g(0);
            let k1 = g(1);
            let same = k1.density.iter().zip(&base.density).all(|(a, b)| a == b);
            checks.push(Check::flag("g1_equals_base", same, "exact equality"));
            let (window, tails) = increment_k2_normalization(&spec)?;
            checks.push(Check::within("g2_integral_plus_tails", window + tails, 1.0, 1e-3));
            checks.push(Check::within("g2_curve_mass", g(2).trapezoid_mass(), 1.0, 1e-3));
            checks.push(Check::above("g2_mean_minus_mode", g(2).mean() - g(2).mode(), 0.0));
            for k in [2, 3] {
                let sup = g(k)
                    .grid
                    .iter()
                    .zip(&g(k).density)
                    .map(|(&x, &d)| (d - spec.base_density(x)).abs())
                    .fold(0.0, f64::max);
                checks.push(Check::above(&format!("g{k}_sup_diff_from_base"), sup, 0.01));
            }
        }
    }
    Ok(checks)
}

/// Quadrature of the `g₂` density over [−80, 200] and the exact mass of
/// the two tails outside it.
pub fn increment_k2_normalization(spec: &ThresholdPriorSpec) -> Result<(f64, f64)> {
    let rule = crate::density::QuadratureRule {
        abs_tol: 1e-8,
        ..Default::default()
    };
    let window = crate::density::integrate(
        |x| crate::threshold::lognormal_increment_density(spec, 2, x, 0).unwrap_or(f64::NAN),
        -80.0,
        200.0,
        &rule,
    )?
    .value;
    let far = f64::MAX.sqrt();
    let tails = increment_mass_k2(spec, 200.0, far)? + increment_mass_k2(spec, -far, -80.0)?;
    Ok((window, tails))
}

/// Pearson correlation between true values and posterior means of all
/// loadings in `report`; `None` when undefined.
pub fn pooled_loading_corr(report: &SbcReport) -> Option<f64> {
    let recs: Vec<_> = report.loadings().flat_map(|p| &p.records).collect();
    let t: Vec<f64> = recs.iter().map(|r| r.truth).collect();
    let m: Vec<f64> = recs.iter().map(|r| r.post_mean).collect();
    pearson(&t, &m)
}

/// Summary path for a section run in `dir`.
pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}
