//! Confirmatory factor models with simple structure: specification, data
//! generation, Gibbs sampling, likelihood and sign relabeling.
//!
//! Item `i` loads on one factor `j(i)`:
//!
//! ```text
//! y_i = ν_i + λ_i·η_j(i) + ε_i,   η ~ N(0, D·Φ·D),   ε_i ~ N(0, θ_i²)
//! ```
//!
//! with `Φ` a correlation matrix and `D = diag(latent_sd)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{backward_substitute_transpose, cholesky, forward_substitute, inverse_from_cholesky, log_det_from_cholesky};
use crate::pattern::SymmetricMatrix;
use crate::prior::UnivariatePrior;
use crate::rng::{substream, Domain, StreamRng};
use crate::stats::{mean, std_dev, LN_SQRT_2PI};
use crate::table::SampleTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    /// The first item of each factor has loading 1; latent SDs are free.
    FirstLoadingFixedToOne,
    /// Latent SDs are 1; all loadings are free. With `sign_restrict_focal`
    /// the focal loading of each factor is truncated to be nonnegative.
    LatentVarianceFixedToOne { sign_restrict_focal: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfaModel {
    item_names: Vec<String>,
    factor_names: Vec<String>,
    factor_of: Vec<usize>,
    identification: Identification,
    /// Focal item per factor, used for sign restriction and relabeling.
    focal: Vec<usize>,
}

impl CfaModel {
    /// `factor_of[i]` is the factor of item `i`. The focal item of each
    /// factor defaults to its first item.
    pub fn new(
        item_names: Vec<String>,
        factor_names: Vec<String>,
        factor_of: Vec<usize>,
        identification: Identification,
    ) -> Result<Self> {
        let m = factor_names.len();
        if m == 0 {
            return Err(Error::Model("need at least one factor".into()));
        }
        if item_names.len() != factor_of.len() {
            return Err(Error::Model("one factor assignment per item".into()));
        }
        for (k, n) in item_names.iter().enumerate() {
            if item_names[..k].contains(n) {
                return Err(Error::Model(format!("duplicate item '{n}'")));
            }
        }
        if let Some(&j) = factor_of.iter().find(|&&j| j >= m) {
            return Err(Error::Model(format!("factor index {j} out of range")));
        }
        for j in 0..m {
            let n = factor_of.iter().filter(|&&f| f == j).count();
            if n < 2 {
                return Err(Error::Model(format!(
                    "factor '{}' has {n} items; at least 2 are required",
                    factor_names[j]
                )));
            }
        }
        let focal = (0..m).map(|j| factor_of.iter().position(|&f| f == j).unwrap()).collect();
        let mut model = CfaModel {
            item_names,
            factor_names,
            factor_of,
            identification,
            focal,
        };
        if model.identification == Identification::FirstLoadingFixedToOne {
            // Fixed loadings cannot be focal; use the first free one.
            model.focal = (0..m).map(|j| model.items_of(j)[1]).collect();
        }
        Ok(model)
    }

    /// `n_factors` factors with `items_per_factor` items each, named
    /// `y1, y2, ...` and `f1, f2, ...`.
    pub fn simple(n_factors: usize, items_per_factor: usize, identification: Identification) -> Result<Self> {
        let p = n_factors * items_per_factor;
        Self::new(
            (1..=p).map(|i| format!("y{i}")).collect(),
            (1..=n_factors).map(|j| format!("f{j}")).collect(),
            (0..p).map(|i| i / items_per_factor).collect(),
            identification,
        )
    }

    /// Replaces the focal item of each factor.
    pub fn with_focal(mut self, focal: Vec<usize>) -> Result<Self> {
        if focal.len() != self.n_factors() {
            return Err(Error::Model("one focal item per factor".into()));
        }
        for (j, &i) in focal.iter().enumerate() {
            if i >= self.n_items() || self.factor_of[i] != j {
                return Err(Error::Model(format!("focal item {i} does not load on factor {}", self.factor_names[j])));
            }
            if self.loading_is_fixed(i) {
                return Err(Error::Model(format!("focal item '{}' has a fixed loading", self.item_names[i])));
            }
        }
        self.focal = focal;
        Ok(self)
    }

    pub fn n_items(&self) -> usize {
        self.item_names.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factor_names.len()
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    pub fn factor_names(&self) -> &[String] {
        &self.factor_names
    }

    pub fn factor_of(&self, item: usize) -> usize {
        self.factor_of[item]
    }

    pub fn identification(&self) -> Identification {
        self.identification
    }

    pub fn focal(&self) -> &[usize] {
        &self.focal
    }

    pub fn items_of(&self, factor: usize) -> Vec<usize> {
        (0..self.n_items()).filter(|&i| self.factor_of[i] == factor).collect()
    }

    pub fn loading_is_fixed(&self, item: usize) -> bool {
        self.identification == Identification::FirstLoadingFixedToOne && self.items_of(self.factor_of[item])[0] == item
    }

    pub fn free_loadings(&self) -> Vec<usize> {
        (0..self.n_items()).filter(|&i| !self.loading_is_fixed(i)).collect()
    }

    pub fn latent_sd_free(&self) -> bool {
        self.identification == Identification::FirstLoadingFixedToOne
    }

    fn sign_restricted(&self, item: usize) -> bool {
        matches!(
            self.identification,
            Identification::LatentVarianceFixedToOne { sign_restrict_focal: true }
        ) && self.focal[self.factor_of[item]] == item
    }

    /// Draw-table column names for the free parameters, in table order.
    pub fn parameter_names(&self) -> Vec<String> {
        let p = self.n_items();
        let m = self.n_factors();
        let mut names: Vec<String> = (1..=p).map(|i| format!("nu[{i}]")).collect();
        names.extend(self.free_loadings().iter().map(|i| loading_name(*i)));
        for j in 0..m {
            for k in (j + 1)..m {
                names.push(phi_name(j, k));
            }
        }
        names.extend((1..=p).map(|i| format!("theta[{i}]")));
        if self.latent_sd_free() {
            names.extend((1..=m).map(|j| format!("latent_sd[{j}]")));
        }
        names
    }
}

/// Column name of the loading of item `i` (0-based).
pub fn loading_name(i: usize) -> String {
    format!("lambda[{}]", i + 1)
}

/// Column name of the factor correlation `(j, k)` (0-based, `j < k`).
pub fn phi_name(j: usize, k: usize) -> String {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    format!("phi[{},{}]", a + 1, b + 1)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    factors: Vec<FactorDoc>,
    identification: IdentificationDoc,
    #[serde(default)]
    sign_restrict_focal: bool,
    #[serde(default)]
    focal: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    name: String,
    items: Vec<String>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum IdentificationDoc {
    FirstLoadingFixedToOne,
    LatentVarianceFixedToOne,
}

fn schema_err<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> Error {
    Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    }
}

/// Parses a model document:
///
/// ```json
/// {"factors": [{"name": "visual", "items": ["x1", "x2", "x3"]}],
///  "identification": "latent_variance_fixed_to_one",
///  "sign_restrict_focal": false, "focal": ["x1"]}
/// ```
pub fn parse_model(text: &str) -> Result<CfaModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ModelDoc = serde_path_to_error::deserialize(de).map_err(schema_err)?;
    let identification = match doc.identification {
        IdentificationDoc::FirstLoadingFixedToOne => {
            if doc.sign_restrict_focal {
                return Err(Error::Schema {
                    path: "sign_restrict_focal".into(),
                    message: "only applies to latent_variance_fixed_to_one".into(),
                });
            }
            Identification::FirstLoadingFixedToOne
        }
        IdentificationDoc::LatentVarianceFixedToOne => Identification::LatentVarianceFixedToOne {
            sign_restrict_focal: doc.sign_restrict_focal,
        },
    };
    let mut items = Vec::new();
    let mut factor_of = Vec::new();
    for (j, f) in doc.factors.iter().enumerate() {
        for it in &f.items {
            items.push(it.clone());
            factor_of.push(j);
        }
    }
    let names = doc.factors.iter().map(|f| f.name.clone()).collect();
    let model = CfaModel::new(items, names, factor_of, identification)?;
    match doc.focal {
        None => Ok(model),
        Some(f) => {
            let idx = f
                .iter()
                .enumerate()
                .map(|(k, n)| {
                    model.item_names.iter().position(|m| m == n).ok_or_else(|| Error::Schema {
                        path: format!("focal[{k}]"),
                        message: format!("unknown item '{n}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            model.with_focal(idx)
        }
    }
}

/// Parameter values. `lambda` has one entry per item, including fixed
/// loadings; `latent_sd` one per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CfaParams {
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi: SymmetricMatrix,
    pub theta: Vec<f64>,
    pub latent_sd: Vec<f64>,
}

impl CfaParams {
    /// Intercepts 0, latent SDs 1, factor correlations 0, residual SDs 1 and
    /// every loading equal to `loading` (fixed loadings stay 1).
    pub fn uniform(model: &CfaModel, loading: f64) -> Self {
        CfaParams {
            nu: vec![0.0; model.n_items()],
            lambda: (0..model.n_items())
                .map(|i| if model.loading_is_fixed(i) { 1.0 } else { loading })
                .collect(),
            phi: SymmetricMatrix::identity(model.n_factors()),
            theta: vec![1.0; model.n_items()],
            latent_sd: vec![1.0; model.n_factors()],
        }
    }

    pub fn validate(&self, model: &CfaModel) -> Result<()> {
        let (p, m) = (model.n_items(), model.n_factors());
        if self.nu.len() != p || self.lambda.len() != p || self.theta.len() != p || self.latent_sd.len() != m || self.phi.dim() != m {
            return Err(Error::Model("parameter dimensions do not match the model".into()));
        }
        let finite = self.nu.iter().chain(&self.lambda).chain(&self.theta).chain(&self.latent_sd).all(|v| v.is_finite());
        if !finite || !self.phi.is_finite() {
            return Err(Error::NonFinite("CFA parameters".into()));
        }
        if self.theta.iter().chain(&self.latent_sd).any(|&v| v <= 0.0) {
            return Err(Error::Model("residual and latent SDs must be positive".into()));
        }
        if (0..m).any(|j| self.phi.get(j, j) != 1.0) {
            return Err(Error::Model("factor correlation matrix needs a unit diagonal".into()));
        }
        if cholesky(&self.phi.to_row_major(), m, 0.0).is_err() {
            return Err(Error::NotPositiveDefinite("factor correlation matrix".into()));
        }
        for i in 0..p {
            if model.loading_is_fixed(i) && self.lambda[i] != 1.0 {
                return Err(Error::Model(format!("loading of '{}' is fixed to 1", model.item_names[i])));
            }
        }
        if !model.latent_sd_free() && self.latent_sd.iter().any(|&v| v != 1.0) {
            return Err(Error::Model("latent SDs are fixed to 1 under this identification".into()));
        }
        Ok(())
    }

    /// Values in [`CfaModel::parameter_names`] order.
    pub fn to_row(&self, model: &CfaModel) -> Vec<f64> {
        let m = model.n_factors();
        let mut row = self.nu.clone();
        row.extend(model.free_loadings().iter().map(|&i| self.lambda[i]));
        for j in 0..m {
            for k in (j + 1)..m {
                row.push(self.phi.get(k, j));
            }
        }
        row.extend(&self.theta);
        if model.latent_sd_free() {
            row.extend(&self.latent_sd);
        }
        row
    }

    /// Inverse of [`Self::to_row`] for one row of a draw table.
    pub fn from_table_row(model: &CfaModel, table: &SampleTable, row: usize) -> Result<Self> {
        let get = |name: &str| -> Result<f64> { Ok(table.require(name)?[row]) };
        let (p, m) = (model.n_items(), model.n_factors());
        let mut params = CfaParams::uniform(model, 0.0);
        for i in 0..p {
            params.nu[i] = get(&format!("nu[{}]", i + 1))?;
            params.theta[i] = get(&format!("theta[{}]", i + 1))?;
            if !model.loading_is_fixed(i) {
                params.lambda[i] = get(&loading_name(i))?;
            }
        }
        for j in 0..m {
            for k in (j + 1)..m {
                params.phi.set(k, j, get(&phi_name(j, k))?);
            }
            if model.latent_sd_free() {
                params.latent_sd[j] = get(&format!("latent_sd[{}]", j + 1))?;
            }
        }
        Ok(params)
    }

    /// Latent covariance `D·Φ·D`, row-major.
    pub fn latent_cov(&self) -> Vec<f64> {
        let m = self.latent_sd.len();
        let mut psi = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                psi[j * m + k] = self.latent_sd[j] * self.phi.get(j, k) * self.latent_sd[k];
            }
        }
        psi
    }

    /// Model-implied item covariance `Λ·Ψ·Λᵀ + Θ`, row-major.
    pub fn implied_cov(&self, model: &CfaModel) -> Vec<f64> {
        let p = model.n_items();
        let m = model.n_factors();
        let psi = self.latent_cov();
        let mut s = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                let (ja, jb) = (model.factor_of(a), model.factor_of(b));
                s[a * p + b] = self.lambda[a] * psi[ja * m + jb] * self.lambda[b];
            }
            s[a * p + a] += self.theta[a] * self.theta[a];
        }
        s
    }
}

/// Priors of a CFA model. Intercept and loading priors must be normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfaPriors {
    pub intercept: UnivariatePrior,
    pub loading: UnivariatePrior,
    pub residual_sd: UnivariatePrior,
    /// Only used when latent SDs are free.
    #[serde(default = "default_latent_sd")]
    pub latent_sd: UnivariatePrior,
    pub factor_corr: LkjPrior,
}

fn default_latent_sd() -> UnivariatePrior {
    UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 }
}

/// LKJ(η) prior on a correlation matrix: density ∝ det(Φ)^(η−1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LkjPrior {
    pub eta: f64,
}

impl LkjPrior {
    /// Onion-method draw of an `m × m` correlation matrix.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> SymmetricMatrix {
        let mut l = vec![0.0; m * m];
        if m == 0 {
            return SymmetricMatrix::zeros(0);
        }
        l[0] = 1.0;
        if m > 1 {
            let mut beta = self.eta + (m as f64 - 2.0) / 2.0;
            let r = 2.0 * rand_distr::Beta::new(beta, beta).unwrap().sample(rng) - 1.0;
            l[m] = r;
            l[m + 1] = (1.0 - r * r).sqrt();
            for k in 2..m {
                beta -= 0.5;
                let y = rand_distr::Beta::new(k as f64 / 2.0, beta).unwrap().sample(rng);
                let w: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (c, wc) in w.iter().enumerate() {
                    l[k * m + c] = y.sqrt() * wc / norm;
                }
                l[k * m + k] = (1.0 - y).sqrt();
            }
        }
        let mut phi = SymmetricMatrix::identity(m);
        for i in 0..m {
            for j in 0..i {
                let v: f64 = (0..=j).map(|c| l[i * m + c] * l[j * m + c]).sum();
                phi.set(i, j, v.clamp(-1.0, 1.0));
            }
        }
        phi
    }

    /// Unnormalized log density.
    pub fn ln_density_unnorm(&self, log_det: f64) -> f64 {
        (self.eta - 1.0) * log_det
    }
}

impl CfaPriors {
    /// The noninformative defaults: N(0, 1000) intercepts, N(0, 100)
    /// loadings, Gamma(1, .5) residual and latent SDs, LKJ(1).
    pub fn noninformative() -> Self {
        CfaPriors {
            intercept: UnivariatePrior::Normal { mean: 0.0, variance: 1000.0 },
            loading: UnivariatePrior::Normal { mean: 0.0, variance: 100.0 },
            residual_sd: UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 },
            latent_sd: default_latent_sd(),
            factor_corr: LkjPrior { eta: 1.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.intercept, &self.loading, &self.residual_sd, &self.latent_sd] {
            p.validate()?;
        }
        if !matches!(self.intercept, UnivariatePrior::Normal { .. }) || !matches!(self.loading, UnivariatePrior::Normal { .. }) {
            return Err(Error::Prior("intercept and loading priors must be normal".into()));
        }
        if !self.residual_sd.is_positive_prior() || !self.latent_sd.is_positive_prior() {
            return Err(Error::Prior("SD priors must be supported on (0, ∞)".into()));
        }
        if !(self.factor_corr.eta > 0.0) || !self.factor_corr.eta.is_finite() {
            return Err(Error::Prior("LKJ eta must be positive".into()));
        }
        Ok(())
    }

    /// One parameter set drawn from the priors (latent SDs only when free).
    pub fn sample_params<R: Rng + ?Sized>(&self, model: &CfaModel, rng: &mut R) -> CfaParams {
        let p = model.n_items();
        let nu = (0..p).map(|_| self.intercept.sample(rng)).collect();
        let lambda = (0..p)
            .map(|i| {
                if model.loading_is_fixed(i) {
                    1.0
                } else {
                    self.loading.sample(rng)
                }
            })
            .collect();
        let phi = self.factor_corr.sample(model.n_factors(), rng);
        let theta = (0..p).map(|_| self.residual_sd.sample(rng)).collect();
        let latent_sd = (0..model.n_factors())
            .map(|_| if model.latent_sd_free() { self.latent_sd.sample(rng) } else { 1.0 })
            .collect();
        CfaParams {
            nu,
            lambda,
            phi,
            theta,
            latent_sd,
        }
    }
}

/// Parses a priors document with keys `intercept`, `loading`,
/// `residual_sd`, optional `latent_sd` and `factor_corr: {"eta": 1}`.
pub fn parse_priors(text: &str) -> Result<CfaPriors> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let p: CfaPriors = serde_path_to_error::deserialize(de).map_err(schema_err)?;
    p.validate()?;
    Ok(p)
}

/// Simulates `n` rows of item data; columns are the item names.
pub fn generate_data(model: &CfaModel, params: &CfaParams, n: usize, seed: u64) -> Result<SampleTable> {
    params.validate(model)?;
    let (p, m) = (model.n_items(), model.n_factors());
    let chol = cholesky(&params.latent_cov(), m, 0.0)
        .map_err(|_| Error::NotPositiveDefinite("latent covariance".into()))?;
    let mut rng = substream(seed, Domain::CfaData, 0, 0);
    let mut cols = vec![Vec::with_capacity(n); p];
    let mut eta = vec![0.0; m];
    for _ in 0..n {
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..m {
            eta[j] = (0..=j).map(|k| chol[j * m + k] * z[k]).sum();
        }
        for i in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            cols[i].push(params.nu[i] + params.lambda[i] * eta[model.factor_of(i)] + params.theta[i] * e);
        }
    }
    SampleTable::from_columns(model.item_names.clone(), cols)
}

fn item_columns<'a>(model: &CfaModel, data: &'a SampleTable) -> Result<Vec<&'a [f64]>> {
    let cols = model
        .item_names
        .iter()
        .map(|n| data.require(n))
        .collect::<Result<Vec<_>>>()?;
    if cols.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("data".into()));
    }
    Ok(cols)
}

/// Marginal log likelihood with the latent variables integrated out.
pub fn log_likelihood(model: &CfaModel, params: &CfaParams, data: &SampleTable) -> Result<f64> {
    let cols = item_columns(model, data)?;
    let p = model.n_items();
    let sigma = params.implied_cov(model);
    let l = cholesky(&sigma, p, 0.0).map_err(|_| Error::NotPositiveDefinite("implied covariance".into()))?;
    let log_det = log_det_from_cholesky(&l, p);
    let mut total = 0.0;
    let mut r = vec![0.0; p];
    for row in 0..data.n_rows() {
        for i in 0..p {
            r[i] = cols[i][row] - params.nu[i];
        }
        forward_substitute(&l, p, &mut r);
        let q: f64 = r.iter().map(|v| v * v).sum();
        total += -0.5 * q - 0.5 * log_det - p as f64 * LN_SQRT_2PI;
    }
    Ok(total)
}

/// Settings for [`gibbs_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub chains: usize,
    pub warmup: usize,
    pub iters: usize,
    pub seed: u64,
}

/// Retained draws: one row per kept iteration, chains stacked in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub table: SampleTable,
    pub chains: usize,
    pub warmup: usize,
    pub kept: usize,
}

impl PosteriorDraws {
    pub fn params(&self, model: &CfaModel, row: usize) -> Result<CfaParams> {
        CfaParams::from_table_row(model, &self.table, row)
    }

    /// Column means of the parameter columns.
    pub fn means(&self, model: &CfaModel) -> Result<Vec<(String, f64)>> {
        model
            .parameter_names()
            .into_iter()
            .map(|n| {
                let m = mean(self.table.require(&n)?);
                Ok((n, m))
            })
            .collect()
    }
}

/// Gibbs sampler with Metropolis steps for residual SDs, factor correlations
/// and latent SDs. Chains run in parallel on independent streams.
pub fn gibbs_fit(model: &CfaModel, priors: &CfaPriors, data: &SampleTable, settings: &FitSettings) -> Result<PosteriorDraws> {
    use rayon::prelude::*;
    priors.validate()?;
    if settings.chains == 0 || settings.iters == 0 {
        return Err(Error::InvalidArgument("chains and iters must be positive".into()));
    }
    let cols = item_columns(model, data)?;
    if data.n_rows() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    let rows: Vec<Vec<Vec<f64>>> = (0..settings.chains)
        .into_par_iter()
        .map(|c| Chain::new(model, priors, &cols, settings.seed, c).run(settings.warmup, settings.iters))
        .collect::<Result<Vec<_>>>()?;
    let mut names = model.parameter_names();
    names.push("chain".into());
    names.push("iter".into());
    let mut table = SampleTable::new(names)?;
    for chain_rows in rows {
        for r in chain_rows {
            table.push_row(&r);
        }
    }
    Ok(PosteriorDraws {
        table,
        chains: settings.chains,
        warmup: settings.warmup,
        kept: settings.iters,
    })
}

/// Random-walk step size tuned during warmup toward 20-50% acceptance.
#[derive(Debug, Clone)]
struct Adaptive {
    step: f64,
    tried: u32,
    accepted: u32,
}

impl Adaptive {
    fn new(step: f64) -> Self {
        Adaptive { step, tried: 0, accepted: 0 }
    }

    fn record(&mut self, accepted: bool, adapting: bool) {
        self.tried += 1;
        self.accepted += accepted as u32;
        if adapting && self.tried == 50 {
            let rate = self.accepted as f64 / 50.0;
            if rate < 0.2 {
                self.step *= 0.7;
            } else if rate > 0.5 {
                self.step *= 1.4;
            }
            self.tried = 0;
            self.accepted = 0;
        }
    }
}

struct Chain<'a> {
    model: &'a CfaModel,
    priors: &'a CfaPriors,
    y: &'a [&'a [f64]],
    n: usize,
    chain: usize,
    rng: StreamRng,
    nu: Vec<f64>,
    lambda: Vec<f64>,
    theta2: Vec<f64>,
    phi: Vec<f64>,
    sd: Vec<f64>,
    /// Latent scores, row-major `n × m`.
    eta: Vec<f64>,
    phi_step: Vec<Adaptive>,
    sd_step: Vec<Adaptive>,
    scale_step: Vec<Adaptive>,
    items_of: Vec<Vec<usize>>,
    /// Item means and the centred scatter divided by `n`.
    ybar: Vec<f64>,
    scatter: Vec<f64>,
    collapsed_step: Vec<Adaptive>,
}

/// Parameters touched by the collapsed moves.
#[derive(Clone)]
struct Collapsed {
    lambda: Vec<f64>,
    phi: Vec<f64>,
    sd: Vec<f64>,
    theta2: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Coord {
    Loading(usize),
    Corr(usize, usize),
    LatentSd(usize),
    ResidualSd(usize),
}

fn normal_params(p: &UnivariatePrior) -> (f64, f64) {
    match *p {
        UnivariatePrior::Normal { mean, variance } => (mean, variance),
        _ => unreachable!("validated as normal"),
    }
}

/// Standard normal truncated to `[a, ∞)`.
fn truncated_std_normal<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a < 0.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a {
                return z;
            }
        }
    }
    // Exponential proposal with the optimal rate.
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u: f64 = rng.random();
        let z = a - (1.0 - u).ln() / alpha;
        let accept: f64 = rng.random();
        if accept <= (-0.5 * (z - alpha) * (z - alpha)).exp() {
            return z;
        }
    }
}

impl<'a> Chain<'a> {
    fn new(model: &'a CfaModel, priors: &'a CfaPriors, y: &'a [&'a [f64]], seed: u64, chain: usize) -> Self {
        let (p, m) = (model.n_items(), model.n_factors());
        let n = y[0].len();
        let mut rng = substream(seed, Domain::CfaChain, chain as u64, 0);
        let restrict = matches!(
            model.identification,
            Identification::LatentVarianceFixedToOne { sign_restrict_focal: true }
        );
        let signs: Vec<f64> = (0..m)
            .map(|_| if restrict || model.latent_sd_free() || rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let nu = y.iter().map(|c| mean(c)).collect();
        let lambda = (0..p)
            .map(|i| {
                if model.loading_is_fixed(i) {
                    1.0
                } else {
                    let s = if model.latent_sd_free() { 1.0 } else { 0.7 * std_dev(y[i]).max(1e-3) };
                    signs[model.factor_of(i)] * s * rng.random_range(0.5..1.5)
                }
            })
            .collect();
        let theta2 = y.iter().map(|c| (0.5 * std_dev(c)).powi(2).max(1e-6)).collect();
        let sd = (0..m)
            .map(|j| {
                if model.latent_sd_free() {
                    0.7 * std_dev(y[model.items_of(j)[0]]).max(1e-3)
                } else {
                    1.0
                }
            })
            .collect();
        let mut phi = vec![0.0; m * m];
        for j in 0..m {
            phi[j * m + j] = 1.0;
        }
        Chain {
            model,
            priors,
            y,
            n,
            chain,
            rng,
            nu,
            lambda,
            theta2,
            phi,
            sd,
            eta: vec![0.0; n * m],
            phi_step: vec![Adaptive::new(0.1); m * m],
            sd_step: vec![Adaptive::new(0.1); m],
            scale_step: vec![Adaptive::new(0.05); m],
            items_of: (0..m).map(|j| model.items_of(j)).collect(),
            ybar: y.iter().map(|c| mean(c)).collect(),
            scatter: {
                let mut s = vec![0.0; p * p];
                let means: Vec<f64> = y.iter().map(|c| mean(c)).collect();
                for a in 0..p {
                    for b in 0..=a {
                        let v = (0..n).map(|r| (y[a][r] - means[a]) * (y[b][r] - means[b])).sum::<f64>() / n as f64;
                        s[a * p + b] = v;
                        s[b * p + a] = v;
                    }
                }
                s
            },
            collapsed_step: vec![Adaptive::new(0.1); 2 * p + m * m],
        }
    }

    fn run(mut self, warmup: usize, iters: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(iters);
        for it in 0..(warmup + iters) {
            let adapting = it < warmup;
            self.update_collapsed(adapting);
            self.update_eta()?;
            self.update_scale(adapting)?;
            for i in 0..self.model.n_items() {
                self.update_item(i);
            }
            for i in 0..self.model.n_items() {
                self.update_theta(i);
            }
            self.update_phi(adapting);
            if self.model.latent_sd_free() {
                self.update_sd(adapting);
            }
            if it >= warmup {
                let row = self.row(it - warmup);
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!("non-finite draw at iteration {it}")));
                }
                out.push(row);
            }
        }
        Ok(out)
    }

    fn row(&self, kept: usize) -> Vec<f64> {
        let m = self.model.n_factors();
        let mut phi = SymmetricMatrix::identity(m);
        for j in 0..m {
            for k in 0..j {
                phi.set(j, k, self.phi[j * m + k]);
            }
        }
        let params = CfaParams {
            nu: self.nu.clone(),
            lambda: self.lambda.clone(),
            phi,
            theta: self.theta2.iter().map(|v| v.sqrt()).collect(),
            latent_sd: self.sd.clone(),
        };
        let mut row = params.to_row(self.model);
        row.push(self.chain as f64 + 1.0);
        row.push(kept as f64 + 1.0);
        row
    }

    /// Log likelihood with the scores integrated out, from sufficient
    /// statistics. `None` when the implied covariance is not positive definite.
    fn marginal_log_lik(&self, st: &Collapsed) -> Option<f64> {
        let p = self.model.n_items();
        let m = self.model.n_factors();
        let mut sigma = vec![0.0; p * p];
        for a in 0..p {
            let ja = self.model.factor_of(a);
            for b in 0..p {
                let jb = self.model.factor_of(b);
                sigma[a * p + b] = st.lambda[a] * st.sd[ja] * st.phi[ja * m + jb] * st.sd[jb] * st.lambda[b];
            }
            sigma[a * p + a] += st.theta2[a];
        }
        let l = cholesky(&sigma, p, 0.0).ok()?;
        let inv = inverse_from_cholesky(&l, p);
        let d: Vec<f64> = self.ybar.iter().zip(&self.nu).map(|(y, v)| y - v).collect();
        let mut tr = 0.0;
        for a in 0..p {
            for b in 0..p {
                tr += inv[a * p + b] * (self.scatter[a * p + b] + d[a] * d[b]);
            }
        }
        Some(-0.5 * self.n as f64 * (log_det_from_cholesky(&l, p) + tr))
    }

    /// Log prior of the coordinate `c` at state `st`, on the scale the
    /// random walk moves in.
    fn collapsed_log_prior(&self, st: &Collapsed, c: Coord) -> Option<f64> {
        let m = self.model.n_factors();
        Some(match c {
            Coord::Loading(i) => self.priors.loading.ln_density(st.lambda[i]),
            Coord::Corr(..) => {
                let l = cholesky(&st.phi, m, crate::pattern::PD_TOLERANCE).ok()?;
                self.priors.factor_corr.ln_density_unnorm(log_det_from_cholesky(&l, m))
            }
            Coord::LatentSd(j) => self.priors.latent_sd.ln_density(st.sd[j]) + st.sd[j].ln(),
            Coord::ResidualSd(i) => {
                let t = st.theta2[i].sqrt();
                self.priors.residual_sd.ln_density(t) + t.ln()
            }
        })
    }

    /// Random-walk Metropolis on loadings, factor correlations and SDs under
    /// the collapsed likelihood. Scores must be redrawn afterwards.
    fn update_collapsed(&mut self, adapting: bool) {
        let m = self.model.n_factors();
        let mut st = Collapsed {
            lambda: self.lambda.clone(),
            phi: self.phi.clone(),
            sd: self.sd.clone(),
            theta2: self.theta2.clone(),
        };
        let Some(mut current) = self.marginal_log_lik(&st) else {
            return;
        };
        let mut coords: Vec<Coord> = self.model.free_loadings().into_iter().map(Coord::Loading).collect();
        for j in 1..m {
            for k in 0..j {
                coords.push(Coord::Corr(j, k));
            }
        }
        if self.model.latent_sd_free() {
            coords.extend((0..m).map(Coord::LatentSd));
        }
        coords.extend((0..self.model.n_items()).map(Coord::ResidualSd));
        for (slot, c) in coords.into_iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let step = self.collapsed_step[slot].step * z;
            let mut prop = st.clone();
            let valid = match c {
                Coord::Loading(i) => {
                    prop.lambda[i] += step;
                    !(self.model.sign_restricted(i) && prop.lambda[i] < 0.0)
                }
                Coord::Corr(j, k) => {
                    let r = prop.phi[j * m + k] + step;
                    prop.phi[j * m + k] = r;
                    prop.phi[k * m + j] = r;
                    r.abs() < 1.0
                }
                Coord::LatentSd(j) => {
                    prop.sd[j] *= step.exp();
                    true
                }
                Coord::ResidualSd(i) => {
                    prop.theta2[i] *= (2.0 * step).exp();
                    true
                }
            };
            let mut accepted = false;
            if valid {
                if let (Some(t), Some(pn), Some(po)) = (
                    self.marginal_log_lik(&prop),
                    self.collapsed_log_prior(&prop, c),
                    self.collapsed_log_prior(&st, c),
                ) {
                    let u: f64 = self.rng.random();
                    if u.ln() < t - current + pn - po {
                        st = prop;
                        current = t;
                        accepted = true;
                    }
                }
            }
            self.collapsed_step[slot].record(accepted, adapting);
        }
        self.lambda = st.lambda;
        self.phi = st.phi;
        self.sd = st.sd;
        self.theta2 = st.theta2;
    }

    fn latent_precision(&self) -> Result<Vec<f64>> {
        let m = self.model.n_factors();
        let mut psi = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                psi[j * m + k] = self.sd[j] * self.phi[j * m + k] * self.sd[k];
            }
        }
        let l = cholesky(&psi, m, 0.0).map_err(|_| Error::Numerical("latent covariance lost definiteness".into()))?;
        Ok(inverse_from_cholesky(&l, m))
    }

    fn update_eta(&mut self) -> Result<()> {
        let m = self.model.n_factors();
        let mut prec = self.latent_precision()?;
        for (j, items) in self.items_of.iter().enumerate() {
            prec[j * m + j] += items.iter().map(|&i| self.lambda[i] * self.lambda[i] / self.theta2[i]).sum::<f64>();
        }
        let l = cholesky(&prec, m, 0.0).map_err(|_| Error::Numerical("latent precision lost definiteness".into()))?;
        let mut b = vec![0.0; m];
        let mut z = vec![0.0; m];
        for r in 0..self.n {
            for (j, items) in self.items_of.iter().enumerate() {
                b[j] = items
                    .iter()
                    .map(|&i| self.lambda[i] * (self.y[i][r] - self.nu[i]) / self.theta2[i])
                    .sum();
                z[j] = StandardNormal.sample(&mut self.rng);
            }
            forward_substitute(&l, m, &mut b);
            for j in 0..m {
                b[j] += z[j];
            }
            backward_substitute_transpose(&l, m, &mut b);
            self.eta[r * m..(r + 1) * m].copy_from_slice(&b);
        }
        Ok(())
    }

    /// Joint normal update of `(ν_i, λ_i)`, or of `ν_i` alone when the
    /// loading is fixed.
    fn update_item(&mut self, i: usize) {
        let m = self.model.n_factors();
        let j = self.model.factor_of(i);
        let (m_nu, v_nu) = normal_params(&self.priors.intercept);
        let t2 = self.theta2[i];
        let y = self.y[i];
        if self.model.loading_is_fixed(i) {
            let resid: f64 = (0..self.n).map(|r| y[r] - self.lambda[i] * self.eta[r * m + j]).sum();
            let prec = 1.0 / v_nu + self.n as f64 / t2;
            let mean = (m_nu / v_nu + resid / t2) / prec;
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.nu[i] = mean + z / prec.sqrt();
            return;
        }
        let (m_l, v_l) = normal_params(&self.priors.loading);
        let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
        for r in 0..self.n {
            let e = self.eta[r * m + j];
            se += e;
            see += e * e;
            sy += y[r];
            sey += e * y[r];
        }
        let a11 = 1.0 / v_nu + self.n as f64 / t2;
        let a12 = se / t2;
        let a22 = 1.0 / v_l + see / t2;
        let b1 = m_nu / v_nu + sy / t2;
        let b2 = m_l / v_l + sey / t2;
        let det = a11 * a22 - a12 * a12;
        let mu_nu = (a22 * b1 - a12 * b2) / det;
        let mu_l = (a11 * b2 - a12 * b1) / det;
        // Marginal of λ has variance a11/det.
        let sd_l = (a11 / det).sqrt();
        let lam = if self.model.sign_restricted(i) {
            mu_l + sd_l * truncated_std_normal(-mu_l / sd_l, &mut self.rng)
        } else {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            mu_l + sd_l * z
        };
        let cond_mean = mu_nu - a12 / a11 * (lam - mu_l);
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.lambda[i] = lam;
        self.nu[i] = cond_mean + z / a11.sqrt();
    }

    /// Independence Metropolis-Hastings on `v = θ²` with the inverse-gamma
    /// full conditional under the reference prior `1/v` as proposal. The
    /// declared prior is on `θ`, so the target carries `p(√v)/(2√v)`.
    fn update_theta(&mut self, i: usize) {
        let m = self.model.n_factors();
        let j = self.model.factor_of(i);
        let y = self.y[i];
        let ss: f64 = (0..self.n)
            .map(|r| {
                let e = y[r] - self.nu[i] - self.lambda[i] * self.eta[r * m + j];
                e * e
            })
            .sum();
        let g = Gamma::new(self.n as f64 / 2.0, 1.0).unwrap().sample(&mut self.rng);
        let proposal = (ss / 2.0) / g;
        if !(proposal > 0.0) || !proposal.is_finite() {
            return;
        }
        let log_w = |v: f64| self.priors.residual_sd.ln_density(v.sqrt()) + 0.5 * v.ln();
        let log_ratio = log_w(proposal) - log_w(self.theta2[i]);
        if log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio {
            self.theta2[i] = proposal;
        }
    }

    /// Scatter of the standardized latent scores `D⁻¹η`.
    fn latent_scatter(&self) -> Vec<f64> {
        let m = self.model.n_factors();
        let mut s = vec![0.0; m * m];
        for r in 0..self.n {
            let row = &self.eta[r * m..(r + 1) * m];
            for j in 0..m {
                for k in 0..=j {
                    s[j * m + k] += row[j] * row[k] / (self.sd[j] * self.sd[k]);
                }
            }
        }
        for j in 0..m {
            for k in 0..j {
                s[k * m + j] = s[j * m + k];
            }
        }
        s
    }

    /// `−n/2·log det Φ − tr(Φ⁻¹S)/2 + (η−1)·log det Φ`, or `None` when `Φ`
    /// is not positive definite.
    fn phi_log_target(&self, phi: &[f64], scatter: &[f64]) -> Option<f64> {
        let m = self.model.n_factors();
        let l = cholesky(phi, m, crate::pattern::PD_TOLERANCE).ok()?;
        let log_det = log_det_from_cholesky(&l, m);
        let inv = inverse_from_cholesky(&l, m);
        let tr: f64 = inv.iter().zip(scatter).map(|(a, b)| a * b).sum();
        Some(-0.5 * self.n as f64 * log_det - 0.5 * tr + self.priors.factor_corr.ln_density_unnorm(log_det))
    }

    fn update_phi(&mut self, adapting: bool) {
        let m = self.model.n_factors();
        if m < 2 {
            return;
        }
        let scatter = self.latent_scatter();
        let mut current = self.phi_log_target(&self.phi, &scatter).expect("current Φ is positive definite");
        for j in 1..m {
            for k in 0..j {
                let step = self.phi_step[j * m + k].step;
                let z: f64 = StandardNormal.sample(&mut self.rng);
                let r = self.phi[j * m + k] + step * z;
                let mut accepted = false;
                if r.abs() < 1.0 {
                    let mut prop = self.phi.clone();
                    prop[j * m + k] = r;
                    prop[k * m + j] = r;
                    if let Some(t) = self.phi_log_target(&prop, &scatter) {
                        let u: f64 = self.rng.random();
                        if u.ln() < t - current {
                            self.phi = prop;
                            current = t;
                            accepted = true;
                        }
                    }
                }
                self.phi_step[j * m + k].record(accepted, adapting);
            }
        }
    }

    /// Log target of the latent SDs, on the log scale (Jacobian included).
    fn sd_log_target(&self, sd: &[f64]) -> f64 {
        let m = self.model.n_factors();
        let l = cholesky(&self.phi, m, 0.0).expect("Φ is positive definite");
        let mut quad = 0.0;
        let mut z = vec![0.0; m];
        for r in 0..self.n {
            for j in 0..m {
                z[j] = self.eta[r * m + j] / sd[j];
            }
            forward_substitute(&l, m, &mut z);
            quad += z.iter().map(|v| v * v).sum::<f64>();
        }
        let log_sd: f64 = sd.iter().map(|v| v.ln()).sum();
        let prior: f64 = sd.iter().map(|&v| self.priors.latent_sd.ln_density(v)).sum();
        -(self.n as f64) * log_sd - 0.5 * quad + prior + log_sd
    }

    fn update_sd(&mut self, adapting: bool) {
        let m = self.model.n_factors();
        let mut current = self.sd_log_target(&self.sd);
        for j in 0..m {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let mut prop = self.sd.clone();
            prop[j] *= (self.sd_step[j].step * z).exp();
            let t = self.sd_log_target(&prop);
            let u: f64 = self.rng.random();
            let accepted = u.ln() < t - current;
            if accepted {
                self.sd = prop;
                current = t;
            }
            self.sd_step[j].record(accepted, adapting);
        }
    }

    /// Rescaling move along the direction the likelihood barely constrains:
    /// free loadings of factor `j` times `c`, its scores divided by `c`. With
    /// free latent SDs the SD and scores scale by `c` instead and the free
    /// loadings by `1/c`; the fixed unit loading then changes the likelihood
    /// of the first item.
    fn update_scale(&mut self, adapting: bool) -> Result<()> {
        let m = self.model.n_factors();
        let (m_l, v_l) = normal_params(&self.priors.loading);
        let ln_prior_l = |x: f64| -0.5 * (x - m_l) * (x - m_l) / v_l;
        for j in 0..m {
            let items = self.items_of[j].clone();
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let log_c = self.scale_step[j].step * z;
            let c = log_c.exp();
            let free: Vec<usize> = items.iter().copied().filter(|&i| !self.model.loading_is_fixed(i)).collect();
            let q = free.len() as f64;
            let mut log_ratio;
            if self.model.latent_sd_free() {
                // (η_j, d_j, λ_free) → (c·η_j, c·d_j, λ_free / c)
                log_ratio = free.iter().map(|&i| ln_prior_l(self.lambda[i] / c) - ln_prior_l(self.lambda[i])).sum::<f64>();
                log_ratio += self.priors.latent_sd.ln_density(self.sd[j] * c) - self.priors.latent_sd.ln_density(self.sd[j]);
                log_ratio += (1.0 - q) * log_c;
                for &i in items.iter().filter(|&&i| self.model.loading_is_fixed(i)) {
                    let y = self.y[i];
                    let mut d = 0.0;
                    for r in 0..self.n {
                        let e = self.eta[r * m + j];
                        let a = y[r] - self.nu[i] - e;
                        let b = y[r] - self.nu[i] - c * e;
                        d += a * a - b * b;
                    }
                    log_ratio += 0.5 * d / self.theta2[i];
                }
            } else {
                // (η_j, λ_j) → (η_j / c, c·λ_j); D = I.
                let scatter = self.latent_scatter();
                let l = cholesky(&self.phi, m, 0.0).expect("Φ is positive definite");
                let inv = inverse_from_cholesky(&l, m);
                let mut scaled = scatter.clone();
                for k in 0..m {
                    if k != j {
                        scaled[j * m + k] /= c;
                        scaled[k * m + j] /= c;
                    }
                }
                scaled[j * m + j] /= c * c;
                let tr = |s: &[f64]| inv.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                log_ratio = free.iter().map(|&i| ln_prior_l(self.lambda[i] * c) - ln_prior_l(self.lambda[i])).sum::<f64>();
                log_ratio += -0.5 * (tr(&scaled) - tr(&scatter));
                log_ratio += (q - self.n as f64) * log_c;
            }
            if !log_ratio.is_finite() {
                return Err(Error::Numerical("scale move produced a non-finite ratio".into()));
            }
            let u: f64 = self.rng.random();
            let accepted = u.ln() < log_ratio;
            if accepted {
                if self.model.latent_sd_free() {
                    for &i in &free {
                        self.lambda[i] /= c;
                    }
                    self.sd[j] *= c;
                    for r in 0..self.n {
                        self.eta[r * m + j] *= c;
                    }
                } else {
                    for &i in &free {
                        self.lambda[i] *= c;
                    }
                    for r in 0..self.n {
                        self.eta[r * m + j] /= c;
                    }
                }
            }
            self.scale_step[j].record(accepted, adapting);
        }
        Ok(())
    }
}

/// Makes every focal loading nonnegative by flipping, per draw and factor,
/// the signs of that factor's loadings and its row and column of `Φ`. A
/// no-op under first-loading identification.
pub fn relabel(draws: &PosteriorDraws, model: &CfaModel) -> Result<PosteriorDraws> {
    if model.identification == Identification::FirstLoadingFixedToOne {
        return Ok(draws.clone());
    }
    let names = draws.table.names().to_vec();
    let mut cols = draws.table.columns().to_vec();
    let idx = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing column '{name}'")))
    };
    let m = model.n_factors();
    let focal_cols = model.focal.iter().map(|&i| idx(&loading_name(i))).collect::<Result<Vec<_>>>()?;
    let loading_cols: Vec<Vec<usize>> = (0..m)
        .map(|j| model.items_of(j).iter().map(|&i| idx(&loading_name(i))).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut phi_cols = vec![vec![]; m];
    for j in 0..m {
        for k in 0..m {
            if j != k {
                phi_cols[j].push(idx(&phi_name(j, k))?);
            }
        }
    }
    for r in 0..draws.table.n_rows() {
        for j in 0..m {
            if cols[focal_cols[j]][r] < 0.0 {
                for &c in &loading_cols[j] {
                    cols[c][r] = -cols[c][r];
                }
                for &c in &phi_cols[j] {
                    cols[c][r] = -cols[c][r];
                }
            }
        }
    }
    Ok(PosteriorDraws {
        table: SampleTable::from_columns(names, cols)?,
        ..draws.clone()
    })
}

/// Flips the signs of factor `j`'s loadings and of row and column `j` of `Φ`.
pub fn flip_factor(params: &CfaParams, model: &CfaModel, j: usize) -> CfaParams {
    let mut out = params.clone();
    for i in model.items_of(j) {
        out.lambda[i] = -out.lambda[i];
    }
    for k in 0..model.n_factors() {
        if k != j {
            out.phi.set(j, k, -params.phi.get(j, k));
        }
    }
    out
}
