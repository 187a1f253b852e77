//! Implied priors of ordered threshold parameters.
//!
//! A `Normal(μ, σ²)` prior declared on each of `n` thresholds does not survive
//! the ordering constraint. Two common ways of enforcing the order give
//! different implied priors:
//!
//! * reordering: draw `n` values and sort them, so threshold `k` has the
//!   density of the `k`-th order statistic;
//! * lognormal increments: `g₁` keeps the declared prior and each
//!   `log(g_k − g_{k−1})` gets the declared prior, so later thresholds are
//!   `g₁` plus a sum of lognormals.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{integrate, KdeModel, QuadratureRule};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain, StreamRng};
use crate::stats::{normal_pdf, std_normal_cdf, std_normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Translation {
    Reorder,
    LognormalIncrement,
}

/// How the second argument of a declared `Normal(μ, s)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleParam {
    Variance,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPriorSpec {
    pub n_thresholds: usize,
    pub mean: f64,
    /// Standard deviation of the declared base normal.
    pub sd: f64,
    pub translation: Translation,
}

impl ThresholdPriorSpec {
    pub fn new(n_thresholds: usize, mean: f64, sd: f64, translation: Translation) -> Result<Self> {
        if n_thresholds == 0 {
            return Err(Error::InvalidArgument("need at least one threshold".into()));
        }
        if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidArgument(format!("bad base normal N({mean}, sd {sd})")));
        }
        Ok(ThresholdPriorSpec {
            n_thresholds,
            mean,
            sd,
            translation,
        })
    }

    /// Reads `Normal(mean, arg)` with `arg` a variance or a standard deviation.
    pub fn declared(n_thresholds: usize, mean: f64, arg: f64, param: ScaleParam, translation: Translation) -> Result<Self> {
        let sd = match param {
            ScaleParam::Variance => arg.sqrt(),
            ScaleParam::Sd => arg,
        };
        Self::new(n_thresholds, mean, sd, translation)
    }

    /// Declared density of a single threshold.
    pub fn base_density(&self, x: f64) -> f64 {
        normal_pdf(x, self.mean, self.sd)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_thresholds {
            return Err(Error::InvalidArgument(format!(
                "threshold index {k} outside 1..={}",
                self.n_thresholds
            )));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Density of the `k`-th smallest (1-based) of `n` iid base draws.
pub fn order_stat_density(spec: &ThresholdPriorSpec, k: usize, x: f64) -> Result<f64> {
    spec.check_k(k)?;
    let n = spec.n_thresholds;
    let z = (x - spec.mean) / spec.sd;
    let (lower, upper) = (std_normal_cdf(z), std_normal_sf(z));
    let coef = n as f64 * binomial(n - 1, k - 1);
    Ok(coef * spec.base_density(x) * lower.powi(k as i32 - 1) * upper.powi((n - k) as i32))
}

/// CDF of the `k`-th order statistic.
pub fn order_stat_cdf(spec: &ThresholdPriorSpec, k: usize, x: f64) -> Result<f64> {
    spec.check_k(k)?;
    let n = spec.n_thresholds;
    let z = (x - spec.mean) / spec.sd;
    let (lower, upper) = (std_normal_cdf(z), std_normal_sf(z));
    Ok((k..=n)
        .map(|j| binomial(n, j) * lower.powi(j as i32) * upper.powi((n - j) as i32))
        .sum())
}

/// `n` iid base draws sorted ascending. Draws with ties are redrawn.
pub fn sample_reordered<R: Rng + ?Sized>(spec: &ThresholdPriorSpec, rng: &mut R) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..spec.n_thresholds)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                spec.mean + spec.sd * z
            })
            .collect();
        g.sort_by(f64::total_cmp);
        if g.windows(2).all(|w| w[0] < w[1]) {
            return g;
        }
    }
}

/// `g₁` from the base prior, then `g_k = g_{k−1} + exp(u)` with `u` from the
/// base prior. Draws that fail to increase in floating point are redrawn.
pub fn sample_lognormal_increment<R: Rng + ?Sized>(spec: &ThresholdPriorSpec, rng: &mut R) -> Vec<f64> {
    loop {
        let mut g = Vec::with_capacity(spec.n_thresholds);
        let z: f64 = StandardNormal.sample(rng);
        g.push(spec.mean + spec.sd * z);
        for _ in 1..spec.n_thresholds {
            let z: f64 = StandardNormal.sample(rng);
            let prev = *g.last().unwrap();
            g.push(prev + (spec.mean + spec.sd * z).exp());
        }
        if g.windows(2).all(|w| w[0] < w[1]) {
            return g;
        }
    }
}

/// Draws from either translation.
pub fn sample_thresholds<R: Rng + ?Sized>(spec: &ThresholdPriorSpec, rng: &mut R) -> Vec<f64> {
    match spec.translation {
        Translation::Reorder => sample_reordered(spec, rng),
        Translation::LognormalIncrement => sample_lognormal_increment(spec, rng),
    }
}

/// Monte Carlo draws used for thresholds beyond the second under the
/// lognormal-increment translation.
pub const DEFAULT_MC_DRAWS: usize = 200_000;

/// Implied densities under the lognormal-increment translation.
///
/// * `k = 1`: the base density.
/// * `k = 2`: with `u = log(g₂ − g₁)`, `p(x) = ∫ N(x − eᵘ; μ, σ²)·N(u; μ, σ²) du`,
///   evaluated by adaptive quadrature.
/// * `k ≥ 3`: conditional on the increments, `g_k` is normal with mean
///   `μ + Σ eᵘ`, so `p(x)` is the Monte Carlo average of those normal
///   densities. This is a Gaussian KDE with bandwidth exactly `σ` and carries
///   no smoothing bias.
#[derive(Debug, Clone)]
pub struct LognormalIncrementDensity {
    spec: ThresholdPriorSpec,
    /// Mixture for each `k ≥ 3`, indexed by `k − 3`.
    mixtures: Vec<KdeModel>,
}

impl LognormalIncrementDensity {
    pub fn new(spec: &ThresholdPriorSpec, n_mc: usize, seed: u64) -> Result<Self> {
        let mut mixtures = Vec::new();
        if spec.n_thresholds >= 3 {
            let mut rng = substream(seed, Domain::Threshold, 1, 0);
            let mut sums: Vec<Vec<f64>> = vec![Vec::with_capacity(n_mc); spec.n_thresholds - 2];
            for _ in 0..n_mc {
                let mut s = 0.0;
                for k in 2..=spec.n_thresholds {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s += (spec.mean + spec.sd * z).exp();
                    if k >= 3 {
                        sums[k - 3].push(spec.mean + s);
                    }
                }
            }
            for col in &sums {
                mixtures.push(KdeModel::with_bandwidth(&[col], vec![spec.sd], None)?);
            }
        }
        Ok(LognormalIncrementDensity { spec: *spec, mixtures })
    }

    pub fn density(&self, k: usize, x: f64) -> Result<f64> {
        self.spec.check_k(k)?;
        match k {
            1 => Ok(self.spec.base_density(x)),
            2 => increment_density_k2(&self.spec, x),
            _ => Ok(self.mixtures[k - 3].eval(&[x])),
        }
    }
}

/// Exact `p(g₂)` by quadrature. Increments `t = g₂ − g₁` below 1 are
/// integrated over `u = log t`, where the lognormal factor is smooth. Larger
/// increments are integrated over `t` itself, where the normal factor has
/// width `σ` and bounds the range.
fn increment_density_k2(spec: &ThresholdPriorSpec, x: f64) -> Result<f64> {
    let (mu, sd) = (spec.mean, spec.sd);
    let rule = QuadratureRule {
        abs_tol: 1e-12,
        ..QuadratureRule::default()
    };
    let check = |q: crate::density::Quadrature| {
        if q.converged {
            Ok(q.value)
        } else {
            Err(Error::Numerical(format!("quadrature for p(g2) at {x} did not converge")))
        }
    };
    let mut total = 0.0;
    let u_lo = mu - 12.0 * sd;
    if u_lo < 0.0 {
        let q = integrate(
            |u| normal_pdf(x - u.exp(), mu, sd) * normal_pdf(u, mu, sd),
            u_lo,
            0.0,
            &rule,
        )?;
        total += check(q)?;
    }
    let t_lo = (x - mu - 12.0 * sd).max(1.0).max(u_lo.exp());
    let t_hi = (x - mu + 12.0 * sd).min((mu + 12.0 * sd).exp());
    if t_hi > t_lo {
        let q = integrate(
            |t| normal_pdf(x - t, mu, sd) * normal_pdf(t.ln(), mu, sd) / t,
            t_lo,
            t_hi,
            &rule,
        )?;
        total += check(q)?;
    }
    Ok(total.max(0.0))
}

/// Free-standing form of [`LognormalIncrementDensity::density`]; `k ≥ 3`
/// uses [`DEFAULT_MC_DRAWS`] draws from `seed`.
pub fn lognormal_increment_density(spec: &ThresholdPriorSpec, k: usize, x: f64, seed: u64) -> Result<f64> {
    spec.check_k(k)?;
    match k {
        1 => return Ok(spec.base_density(x)),
        2 => return increment_density_k2(spec, x),
        _ => {}
    }
    LognormalIncrementDensity::new(spec, DEFAULT_MC_DRAWS, seed)?.density(k, x)
}

/// Mass of `g₂` inside `[a, b]`, integrating the exact conditional normal
/// CDF over the log increment.
pub fn increment_mass_k2(spec: &ThresholdPriorSpec, a: f64, b: f64) -> Result<f64> {
    let (mu, sd) = (spec.mean, spec.sd);
    let rule = QuadratureRule {
        abs_tol: 1e-12,
        ..QuadratureRule::default()
    };
    let q = integrate(
        |u| {
            let shift = mu + u.exp();
            let upper = std_normal_cdf((b - shift) / sd);
            let lower = std_normal_cdf((a - shift) / sd);
            (upper - lower) * normal_pdf(u, mu, sd)
        },
        mu - 12.0 * sd,
        mu + 12.0 * sd,
        &rule,
    )?;
    Ok(q.value)
}

/// Points per emitted curve.
pub const GRID_POINTS: usize = 1024;

/// One density curve; `which = 0` is the declared base density.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDensityCurve {
    pub which: usize,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl ThresholdDensityCurve {
    pub fn trapezoid_mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Grid point of the largest density.
    pub fn mode(&self) -> f64 {
        let k = (0..self.density.len())
            .max_by(|&a, &b| self.density[a].total_cmp(&self.density[b]))
            .unwrap();
        self.grid[k]
    }

    /// Trapezoid mean over the grid.
    pub fn mean(&self) -> f64 {
        let xf: Vec<f64> = self.grid.iter().zip(&self.density).map(|(x, f)| x * f).collect();
        trapezoid(&self.grid, &xf) / self.trapezoid_mass()
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Evaluation grid: `μ ± 6σ` for reordering. Lognormal increments put three
/// quarters of the points uniformly on `μ ± 6σ` and the rest geometrically
/// out to where every increment's tail beyond it is below `P(Z > 4)`.
pub fn curve_grid(spec: &ThresholdPriorSpec) -> Vec<f64> {
    let (lo, hi) = (spec.mean - 6.0 * spec.sd, spec.mean + 6.0 * spec.sd);
    match spec.translation {
        Translation::Reorder => (0..GRID_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect(),
        Translation::LognormalIncrement => {
            let n_uniform = GRID_POINTS * 3 / 4;
            let mut g: Vec<f64> = (0..n_uniform)
                .map(|i| lo + (hi - lo) * i as f64 / (n_uniform - 1) as f64)
                .collect();
            let far = hi + (spec.n_thresholds.max(2) - 1) as f64 * (spec.mean + 4.0 * spec.sd).exp();
            let n_tail = GRID_POINTS - n_uniform;
            // Geometric spacing in the distance from the mean.
            let (d0, d1) = (hi - spec.mean, far - spec.mean);
            for i in 1..=n_tail {
                g.push(spec.mean + d0 * (d1 / d0).powf(i as f64 / n_tail as f64));
            }
            g
        }
    }
}

/// The declared base curve followed by one curve per threshold.
pub fn emit_curves(spec: &ThresholdPriorSpec, seed: u64) -> Result<Vec<ThresholdDensityCurve>> {
    use rayon::prelude::*;
    let grid = curve_grid(spec);
    let mut curves = vec![ThresholdDensityCurve {
        which: 0,
        grid: grid.clone(),
        density: grid.iter().map(|&x| spec.base_density(x)).collect(),
    }];
    let lni = match spec.translation {
        Translation::LognormalIncrement => Some(LognormalIncrementDensity::new(spec, DEFAULT_MC_DRAWS, seed)?),
        Translation::Reorder => None,
    };
    for k in 1..=spec.n_thresholds {
        let density = grid
            .par_iter()
            .map(|&x| match &lni {
                None => order_stat_density(spec, k, x),
                Some(d) => d.density(k, x),
            })
            .collect::<Result<Vec<_>>>()?;
        curves.push(ThresholdDensityCurve {
            which: k,
            grid: grid.clone(),
            density,
        });
    }
    Ok(curves)
}

/// Columns `x`, `base`, `g1`, ..., `gn`.
pub fn curves_table(curves: &[ThresholdDensityCurve]) -> Result<crate::table::SampleTable> {
    let mut names = vec!["x".to_string()];
    let mut cols = vec![curves[0].grid.clone()];
    for c in curves {
        names.push(if c.which == 0 { "base".into() } else { format!("g{}", c.which) });
        cols.push(c.density.clone());
    }
    crate::table::SampleTable::from_columns(names, cols)
}

/// `n` threshold vectors from independent streams, one per draw.
pub fn sample_many(spec: &ThresholdPriorSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    const BLOCK: usize = 4096;
    (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng: StreamRng = substream(seed, Domain::Threshold, 2, b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(move |_| sample_thresholds(spec, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}
