//! Simulation-based calibration for the CFA sampler: prior draws, simulated
//! data, refits, rank statistics and a detector for sign-indeterminate
//! scatter shapes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfa::{self, gibbs_fit, loading_name, relabel, CfaModel, CfaPriors, FitSettings};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain, StreamRng};
use crate::stats::{chi_square_gof, mean, pearson, std_dev};
use crate::table::SampleTable;

/// Number of bins in rank uniformity tests.
pub const RANK_BINS: usize = 20;
/// Minimum pairs per loading for [`sign_pattern_detect`].
pub const MIN_SIGN_PAIRS: usize = 30;
/// Smallest allowed thinned posterior size.
pub const MIN_THINNED: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SbcConfig {
    pub model: CfaModel,
    pub priors: CfaPriors,
    pub n_sims: usize,
    pub n_obs: usize,
    pub chains: usize,
    pub warmup: usize,
    pub iters: usize,
    pub thin: usize,
    pub relabel: bool,
    pub seed: u64,
}

impl SbcConfig {
    /// Desk-scale defaults: 100 sims of 200 rows, one chain, 300 warmup,
    /// 600 kept iterations thinned by 10.
    pub fn desk(model: CfaModel, priors: CfaPriors, seed: u64) -> Self {
        SbcConfig {
            model,
            priors,
            n_sims: 100,
            n_obs: 200,
            chains: 1,
            warmup: 300,
            iters: 600,
            thin: 10,
            relabel: false,
            seed,
        }
    }

    /// Posterior draws per sim after thinning, pooled over chains.
    pub fn thinned_size(&self) -> usize {
        self.chains * self.iters.div_ceil(self.thin.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(Error::InvalidArgument("n_sims must be at least 1".into()));
        }
        if self.n_obs < 2 {
            return Err(Error::InvalidArgument("n_obs must be at least 2".into()));
        }
        if self.thin == 0 || self.chains == 0 {
            return Err(Error::InvalidArgument("thin and chains must be positive".into()));
        }
        if self.thinned_size() < MIN_THINNED {
            return Err(Error::InvalidArgument(format!(
                "thinned posterior has {} draws; at least {MIN_THINNED} are required",
                self.thinned_size()
            )));
        }
        self.priors.validate()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    model: serde_json::Value,
    priors: serde_json::Value,
    #[serde(default = "d_sims")]
    n_sims: usize,
    #[serde(default = "d_obs")]
    n_obs: usize,
    #[serde(default = "d_chains")]
    chains: usize,
    #[serde(default = "d_warmup")]
    warmup: usize,
    #[serde(default = "d_iters")]
    iters: usize,
    #[serde(default = "d_thin")]
    thin: usize,
    #[serde(default)]
    relabel: bool,
}

fn d_sims() -> usize {
    100
}
fn d_obs() -> usize {
    200
}
fn d_chains() -> usize {
    1
}
fn d_warmup() -> usize {
    300
}
fn d_iters() -> usize {
    600
}
fn d_thin() -> usize {
    10
}

fn prefix_schema(prefix: &str, e: Error) -> Error {
    match e {
        Error::Schema { path, message } => Error::Schema {
            path: format!("{prefix}.{path}"),
            message,
        },
        other => other,
    }
}

/// Parses an SBC config: `model` and `priors` in the CFA document formats
/// plus optional run sizes. The seed comes from the caller.
pub fn parse_config(text: &str, seed: u64) -> Result<SbcConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let model = cfa::parse_model(&doc.model.to_string()).map_err(|e| prefix_schema("model", e))?;
    let priors = cfa::parse_priors(&doc.priors.to_string()).map_err(|e| prefix_schema("priors", e))?;
    let cfg = SbcConfig {
        model,
        priors,
        n_sims: doc.n_sims,
        n_obs: doc.n_obs,
        chains: doc.chains,
        warmup: doc.warmup,
        iters: doc.iters,
        thin: doc.thin,
        relabel: doc.relabel,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Number of draws strictly below `truth`.
pub fn rank_statistic(truth: f64, draws: &[f64]) -> usize {
    draws.iter().filter(|&&d| d < truth).count()
}

/// Chi-square test that ranks are uniform on `{0, ..., max_rank}`, using
/// [`RANK_BINS`] bins. When `max_rank + 1` is not a multiple of the bin
/// count the bins hold unequal numbers of rank values and expected counts
/// follow. Returns `(statistic, p-value)`.
pub fn rank_uniformity(ranks: &[usize], max_rank: usize) -> Result<(f64, f64)> {
    if ranks.is_empty() {
        return Err(Error::InvalidArgument("no ranks".into()));
    }
    let values = max_rank + 1;
    let bins = RANK_BINS.min(values);
    let bin_of = |r: usize| r * bins / values;
    let mut observed = vec![0usize; bins];
    for &r in ranks {
        if r > max_rank {
            return Err(Error::InvalidArgument(format!("rank {r} exceeds {max_rank}")));
        }
        observed[bin_of(r)] += 1;
    }
    let mut width = vec![0usize; bins];
    for r in 0..values {
        width[bin_of(r)] += 1;
    }
    let n = ranks.len() as f64;
    let expected: Vec<f64> = width.iter().map(|&w| n * w as f64 / values as f64).collect();
    Ok(chi_square_gof(&observed, &expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignVerdict {
    Identity,
    VorX,
    Indeterminate,
}

impl std::fmt::Display for SignVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignVerdict::Identity => "identity",
            SignVerdict::VorX => "v_or_x",
            SignVerdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignDiagnostic {
    /// Correlation of true values with posterior means.
    pub corr_signed: f64,
    /// The same for absolute values.
    pub corr_abs: f64,
    pub verdict: SignVerdict,
}

/// Classifies a true-vs-posterior-mean scatter. `VorX` when the absolute
/// values agree far better than the signed ones, `Identity` when the signed
/// values agree.
pub fn sign_pattern_detect(truth: &[f64], post_mean: &[f64]) -> Result<SignDiagnostic> {
    if truth.len() != post_mean.len() {
        return Err(Error::InvalidArgument("paired inputs differ in length".into()));
    }
    if truth.len() < MIN_SIGN_PAIRS {
        return Err(Error::TooFewPoints {
            needed: MIN_SIGN_PAIRS,
            got: truth.len(),
        });
    }
    let abs = |xs: &[f64]| xs.iter().map(|v| v.abs()).collect::<Vec<_>>();
    let (at, am) = (abs(truth), abs(post_mean));
    for (k, xs) in [truth, post_mean, &at, &am].into_iter().enumerate() {
        if !(std_dev(xs) > 0.0) {
            return Err(Error::ZeroVariance(k % 2));
        }
    }
    let rs = pearson(truth, post_mean).ok_or(Error::ZeroVariance(0))?;
    let ra = pearson(&at, &am).ok_or(Error::ZeroVariance(0))?;
    let verdict = if ra - rs.abs() > 0.3 && ra > 0.6 {
        SignVerdict::VorX
    } else if rs > 0.8 {
        SignVerdict::Identity
    } else {
        SignVerdict::Indeterminate
    };
    Ok(SignDiagnostic {
        corr_signed: rs,
        corr_abs: ra,
        verdict,
    })
}

/// One (sim, parameter) record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SbcRecord {
    pub sim: usize,
    pub truth: f64,
    pub post_mean: f64,
    pub post_sd: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub records: Vec<SbcRecord>,
    pub chi_square: f64,
    pub p_value: f64,
    /// Present for loadings when enough sims were kept.
    pub sign: Option<SignDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SbcReport {
    pub parameters: Vec<ParameterSummary>,
    pub max_rank: usize,
    pub n_sims: usize,
    pub excluded: Vec<(usize, String)>,
    /// Chi-square p-value of all loading ranks pooled.
    pub pooled_loading_p_value: Option<f64>,
    /// Correlation of true values and posterior means over all loadings.
    pub pooled_loading_corr: Option<f64>,
}

impl SbcReport {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn loadings(&self) -> impl Iterator<Item = &ParameterSummary> {
        self.parameters.iter().filter(|p| p.name.starts_with("lambda["))
    }

    /// Long-format record table: sim, parameter index, truth, mean, sd, rank.
    pub fn records_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let fail = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record(["sim", "parameter", "true", "post_mean", "post_sd", "rank", "max_rank"]).map_err(fail)?;
        for p in &self.parameters {
            for r in &p.records {
                wr.write_record([
                    r.sim.to_string(),
                    p.name.clone(),
                    format!("{}", r.truth),
                    format!("{}", r.post_mean),
                    format!("{}", r.post_sd),
                    r.rank.to_string(),
                    self.max_rank.to_string(),
                ])
                .map_err(fail)?;
            }
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    /// Per-parameter summary table.
    pub fn summary_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let fail = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record(["parameter", "n", "chi_square", "p_value", "corr_signed", "corr_abs", "verdict"]).map_err(fail)?;
        for p in &self.parameters {
            let (rs, ra, v) = match &p.sign {
                Some(s) => (s.corr_signed.to_string(), s.corr_abs.to_string(), s.verdict.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            wr.write_record([
                p.name.clone(),
                p.records.len().to_string(),
                p.chi_square.to_string(),
                p.p_value.to_string(),
                rs,
                ra,
                v,
            ])
            .map_err(fail)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    /// Rank counts per parameter in [`RANK_BINS`] bins.
    pub fn rank_histograms(&self) -> Result<SampleTable> {
        let values = self.max_rank + 1;
        let bins = RANK_BINS.min(values);
        let mut names = vec!["bin".to_string()];
        let mut cols = vec![(0..bins).map(|b| b as f64).collect::<Vec<_>>()];
        for p in &self.parameters {
            let mut h = vec![0.0; bins];
            for r in &p.records {
                h[r.rank * bins / values] += 1.0;
            }
            names.push(p.name.clone());
            cols.push(h);
        }
        SampleTable::from_columns(names, cols)
    }
}

/// Output of one simulated fit: true values and pooled, thinned draws in
/// parameter order.
pub struct SimOutcome {
    pub truth: Vec<f64>,
    pub draws: Vec<Vec<f64>>,
}

/// Generic SBC driver. `simulate(sim, rng)` returns the truth and thinned
/// posterior draws per parameter; numerical failures exclude the sim,
/// other errors abort. Sims run in parallel and merge in index order.
pub fn run_sbc_with<F>(names: &[String], n_sims: usize, max_rank: usize, seed: u64, simulate: F) -> Result<SbcReport>
where
    F: Fn(usize, &mut StreamRng) -> Result<SimOutcome> + Sync,
{
    let outcomes: Vec<Result<SimOutcome>> = (0..n_sims)
        .into_par_iter()
        .map(|sim| {
            let mut rng = substream(seed, Domain::SbcSim, sim as u64, 0);
            simulate(sim, &mut rng)
        })
        .collect();
    let mut records = vec![Vec::new(); names.len()];
    let mut excluded = Vec::new();
    for (sim, o) in outcomes.into_iter().enumerate() {
        let o = match o {
            Ok(o) => o,
            Err(e) if e.is_numerical() => {
                excluded.push((sim, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        if o.truth.len() != names.len() || o.draws.len() != names.len() {
            return Err(Error::InvalidArgument("simulation output does not match parameter list".into()));
        }
        for (k, (t, d)) in o.truth.iter().zip(&o.draws).enumerate() {
            if d.len() != max_rank {
                return Err(Error::InvalidArgument(format!("expected {max_rank} draws, got {}", d.len())));
            }
            records[k].push(SbcRecord {
                sim,
                truth: *t,
                post_mean: mean(d),
                post_sd: std_dev(d),
                rank: rank_statistic(*t, d),
            });
        }
    }
    let mut parameters = Vec::with_capacity(names.len());
    for (name, recs) in names.iter().zip(records) {
        let (chi, p) = if recs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            rank_uniformity(&recs.iter().map(|r| r.rank).collect::<Vec<_>>(), max_rank)?
        };
        let sign = if name.starts_with("lambda[") && recs.len() >= MIN_SIGN_PAIRS {
            let t: Vec<f64> = recs.iter().map(|r| r.truth).collect();
            let m: Vec<f64> = recs.iter().map(|r| r.post_mean).collect();
            sign_pattern_detect(&t, &m).ok()
        } else {
            None
        };
        parameters.push(ParameterSummary {
            name: name.clone(),
            records: recs,
            chi_square: chi,
            p_value: p,
            sign,
        });
    }
    let loading_recs: Vec<&SbcRecord> = parameters
        .iter()
        .filter(|p| p.name.starts_with("lambda["))
        .flat_map(|p| &p.records)
        .collect();
    let (pooled_loading_p_value, pooled_loading_corr) = if loading_recs.len() >= 2 {
        let ranks: Vec<usize> = loading_recs.iter().map(|r| r.rank).collect();
        let t: Vec<f64> = loading_recs.iter().map(|r| r.truth).collect();
        let m: Vec<f64> = loading_recs.iter().map(|r| r.post_mean).collect();
        (Some(rank_uniformity(&ranks, max_rank)?.1), pearson(&t, &m))
    } else {
        (None, None)
    };
    Ok(SbcReport {
        parameters,
        max_rank,
        n_sims,
        excluded,
        pooled_loading_p_value,
        pooled_loading_corr,
    })
}

/// Runs SBC for the CFA model in `config`.
pub fn sbc_run(config: &SbcConfig) -> Result<SbcReport> {
    config.validate()?;
    let model = &config.model;
    let names = model.parameter_names();
    let max_rank = config.thinned_size();
    run_sbc_with(&names, config.n_sims, max_rank, config.seed, |_, rng| {
        let truth = config.priors.sample_params(model, rng);
        let data_seed: u64 = rand::Rng::random(rng);
        let fit_seed: u64 = rand::Rng::random(rng);
        let data = cfa::generate_data(model, &truth, config.n_obs, data_seed)?;
        let settings = FitSettings {
            chains: config.chains,
            warmup: config.warmup,
            iters: config.iters,
            seed: fit_seed,
        };
        let mut draws = gibbs_fit(model, &config.priors, &data, &settings)?;
        if config.relabel {
            draws = relabel(&draws, model)?;
        }
        let iter = draws.table.require("iter")?;
        let keep: Vec<usize> = (0..draws.table.n_rows())
            .filter(|&r| (iter[r] as usize - 1).is_multiple_of(config.thin))
            .collect();
        let cols = names
            .iter()
            .map(|n| {
                let c = draws.table.require(n)?;
                Ok(keep.iter().map(|&r| c[r]).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(SimOutcome {
            truth: truth.to_row(model),
            draws: cols,
        })
    })
}

/// Names of the free loadings of `model`, in parameter order.
pub fn loading_names(model: &CfaModel) -> Vec<String> {
    model.free_loadings().into_iter().map(loading_name).collect()
}
