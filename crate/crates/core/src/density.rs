//! Gaussian kernel density estimation in one and two dimensions, and the
//! quadrature rules used to integrate densities.

use crate::error::{Error, Result};
use crate::stats::{mean, std_normal_pdf};

/// Minimum sample size accepted by [`kde_fit`].
pub const MIN_KDE_POINTS: usize = 30;

/// Kernel contributions beyond this many bandwidths are dropped. The
/// truncated mass is below `exp(-50)`.
const KERNEL_CUTOFF: f64 = 10.0;

/// Gaussian product-kernel density estimate.
///
/// Points are kept sorted by their first coordinate so that evaluation only
/// visits points inside the kernel window.
#[derive(Debug, Clone)]
pub struct KdeModel {
    dim: usize,
    /// Row-major, `dim` values per point.
    points: Vec<f64>,
    weights: Option<Vec<f64>>,
    weight_sum: f64,
    bandwidth: Vec<f64>,
}

fn check_columns(columns: &[&[f64]]) -> Result<usize> {
    if columns.is_empty() || columns.len() > 2 {
        return Err(Error::InvalidArgument(format!(
            "KDE supports 1 or 2 dimensions, got {}",
            columns.len()
        )));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("KDE columns differ in length".into()));
    }
    if n < MIN_KDE_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_KDE_POINTS,
            got: n,
        });
    }
    if columns.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("KDE input".into()));
    }
    Ok(n)
}

fn weighted_sd(xs: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => {
            let m = mean(xs);
            (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
        }
        Some(w) => {
            let sw: f64 = w.iter().sum();
            let sw2: f64 = w.iter().map(|v| v * v).sum();
            let m = xs.iter().zip(w).map(|(x, v)| x * v).sum::<f64>() / sw;
            let ss: f64 = xs.iter().zip(w).map(|(x, v)| v * (x - m) * (x - m)).sum();
            (ss / (sw - sw2 / sw)).sqrt()
        }
    }
}

/// Silverman-type bandwidths: `1.06·sd·n^(-1/5)` in one dimension and
/// `sd_d·n^(-1/6)` per axis in two. With weights, `n` is the effective sample
/// size `(Σw)² / Σw²`.
pub fn silverman_bandwidth(columns: &[&[f64]], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = match weights {
        None => columns[0].len() as f64,
        Some(w) => {
            let s: f64 = w.iter().sum();
            s * s / w.iter().map(|v| v * v).sum::<f64>()
        }
    };
    columns
        .iter()
        .enumerate()
        .map(|(d, c)| {
            let sd = weighted_sd(c, weights);
            if !(sd > 0.0) {
                return Err(Error::ZeroVariance(d));
            }
            Ok(match columns.len() {
                1 => 1.06 * sd * n.powf(-0.2),
                _ => sd * n.powf(-1.0 / 6.0),
            })
        })
        .collect()
}

/// Fits a KDE with Silverman bandwidths to column-major points.
pub fn kde_fit(columns: &[&[f64]]) -> Result<KdeModel> {
    check_columns(columns)?;
    let bw = silverman_bandwidth(columns, None)?;
    KdeModel::build(columns, bw, None)
}

/// Weighted variant of [`kde_fit`]. Weights must be nonnegative with a
/// positive sum; only points with positive weight are kept.
pub fn kde_fit_weighted(columns: &[&[f64]], weights: &[f64]) -> Result<KdeModel> {
    if weights.len() != columns.first().map_or(0, |c| c.len()) {
        return Err(Error::InvalidArgument("weight count mismatch".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let cols: Vec<Vec<f64>> = columns.iter().map(|c| keep.iter().map(|&i| c[i]).collect()).collect();
    let w: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    check_columns(&refs)?;
    let bw = silverman_bandwidth(&refs, Some(&w))?;
    KdeModel::build(&refs, bw, Some(w))
}

/// Evaluates `model` at `x`.
pub fn kde_eval(model: &KdeModel, x: &[f64]) -> f64 {
    model.eval(x)
}

impl KdeModel {
    /// KDE with caller-chosen bandwidths.
    pub fn with_bandwidth(columns: &[&[f64]], bandwidth: Vec<f64>, weights: Option<Vec<f64>>) -> Result<KdeModel> {
        check_columns(columns)?;
        if bandwidth.len() != columns.len() || bandwidth.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidArgument("bandwidths must be positive, one per dimension".into()));
        }
        KdeModel::build(columns, bandwidth, weights)
    }

    fn build(columns: &[&[f64]], bandwidth: Vec<f64>, weights: Option<Vec<f64>>) -> Result<KdeModel> {
        let dim = columns.len();
        let n = columns[0].len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| columns[0][a].total_cmp(&columns[0][b]));
        let mut points = Vec::with_capacity(n * dim);
        for &i in &order {
            for c in columns {
                points.push(c[i]);
            }
        }
        let weights = weights.map(|w| order.iter().map(|&i| w[i]).collect::<Vec<_>>());
        let weight_sum = weights.as_ref().map_or(n as f64, |w| w.iter().sum());
        if !(weight_sum > 0.0) {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Ok(KdeModel {
            dim,
            points,
            weights,
            weight_sum,
            bandwidth,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    /// Range of point indices whose first coordinate lies within the kernel
    /// window around `x0`.
    fn window(&self, x0: f64) -> std::ops::Range<usize> {
        let reach = KERNEL_CUTOFF * self.bandwidth[0];
        let first = |i: usize| self.points[i * self.dim];
        let n = self.n_points();
        let lo = partition_point(n, |i| first(i) < x0 - reach);
        let hi = partition_point(n, |i| first(i) <= x0 + reach);
        lo..hi
    }

    /// Density at `x` (length must equal the model dimension).
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "evaluation point dimension");
        let norm: f64 = self.bandwidth.iter().product();
        let mut sum = 0.0;
        match self.dim {
            1 => {
                let h = self.bandwidth[0];
                for i in self.window(x[0]) {
                    let k = std_normal_pdf((x[0] - self.points[i]) / h);
                    sum += self.weights.as_ref().map_or(k, |w| w[i] * k);
                }
            }
            _ => {
                let (h0, h1) = (self.bandwidth[0], self.bandwidth[1]);
                for i in self.window(x[0]) {
                    let z1 = (x[1] - self.points[2 * i + 1]) / h1;
                    if z1.abs() > KERNEL_CUTOFF {
                        continue;
                    }
                    let z0 = (x[0] - self.points[2 * i]) / h0;
                    let k = std_normal_pdf(z0) * std_normal_pdf(z1);
                    sum += self.weights.as_ref().map_or(k, |w| w[i] * k);
                }
            }
        }
        sum / (self.weight_sum * norm)
    }

    /// Bounding box of the points padded by `pad` bandwidths per side.
    pub fn support(&self, pad: f64) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|d| {
                let (lo, hi) = self
                    .points
                    .iter()
                    .skip(d)
                    .step_by(self.dim)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                (lo - pad * self.bandwidth[d], hi + pad * self.bandwidth[d])
            })
            .collect()
    }

    /// Numerical integral of the density over its support padded by ten
    /// bandwidths. Should be 1 up to quadrature error.
    pub fn total_mass(&self) -> Result<f64> {
        let support = self.support(10.0);
        match self.dim {
            1 => {
                let rule = QuadratureRule {
                    abs_tol: 1e-7,
                    ..QuadratureRule::default()
                };
                Ok(integrate(|x| self.eval(&[x]), support[0].0, support[0].1, &rule)?.value)
            }
            _ => integrate_2d(|x, y| self.eval(&[x, y]), support[0], support[1]),
        }
    }
}

fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    AdaptiveSimpson,
    /// Fixed 512×512 composite Simpson grid.
    TensorSimpson2D,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            kind: QuadratureKind::AdaptiveSimpson,
            abs_tol: 1e-8,
            max_depth: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the local Richardson error estimates.
    pub error_estimate: f64,
    /// False when some panel hit `max_depth` before meeting its tolerance.
    pub converged: bool,
    pub evaluations: usize,
}

/// Panels the interval is split into before adaptive refinement starts, so
/// narrow features are not missed by the first coarse estimate.
const INITIAL_PANELS: usize = 16;

/// Adaptive Simpson quadrature of `f` over `[lo, hi]`.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rule: &QuadratureRule) -> Result<Quadrature> {
    if rule.kind != QuadratureKind::AdaptiveSimpson {
        return Err(Error::InvalidArgument("integrate() is one-dimensional; use integrate_2d".into()));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad interval [{lo}, {hi}]")));
    }
    if !(rule.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("abs_tol must be positive".into()));
    }
    let mut evaluations = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("integrand is {v} at x = {x}")))
        }
    };

    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }

    let width = (hi - lo) / INITIAL_PANELS as f64;
    let panel_tol = rule.abs_tol / INITIAL_PANELS as f64;
    let mut stack = Vec::new();
    let mut fa = eval(lo)?;
    for k in 0..INITIAL_PANELS {
        let a = lo + k as f64 * width;
        let b = if k + 1 == INITIAL_PANELS { hi } else { a + width };
        let fm = eval(0.5 * (a + b))?;
        let fb = eval(b)?;
        stack.push(Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
            tol: panel_tol,
            depth: 0,
        });
        fa = fb;
    }

    let (mut value, mut error_estimate, mut converged) = (0.0, 0.0, true);
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = eval(lm)?;
        let frm = eval(rm)?;
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let delta = left + right - p.whole;
        if delta.abs() <= 15.0 * p.tol || p.depth >= rule.max_depth {
            if p.depth >= rule.max_depth && delta.abs() > 15.0 * p.tol {
                converged = false;
            }
            value += left + right + delta / 15.0;
            error_estimate += delta.abs() / 15.0;
        } else {
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol: p.tol / 2.0,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol: p.tol / 2.0,
                depth: p.depth + 1,
            });
        }
    }
    Ok(Quadrature {
        value,
        error_estimate,
        converged,
        evaluations,
    })
}

/// Grid intervals per axis for [`integrate_2d`].
pub const TENSOR_GRID: usize = 512;

fn simpson_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| match k {
            0 => 1.0,
            k if k == n => 1.0,
            k if k % 2 == 1 => 4.0,
            _ => 2.0,
        })
        .collect()
}

/// Tensor-product composite Simpson rule on a fixed 512×512 grid.
pub fn integrate_2d(f: impl Fn(f64, f64) -> f64 + Sync, x: (f64, f64), y: (f64, f64)) -> Result<f64> {
    use rayon::prelude::*;
    if !(x.0 < x.1) || !(y.0 < y.1) {
        return Err(Error::InvalidArgument("bad integration rectangle".into()));
    }
    let n = TENSOR_GRID;
    let w = simpson_weights(n);
    let hx = (x.1 - x.0) / n as f64;
    let hy = (y.1 - y.0) / n as f64;
    let rows: Vec<Result<f64>> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let xi = x.0 + i as f64 * hx;
            let mut s = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let v = f(xi, y.0 + j as f64 * hy);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("integrand is {v} at ({xi}, {})", y.0 + j as f64 * hy)));
                }
                s += wj * v;
            }
            Ok(w[i] * s)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total * hx * hy / 9.0)
}
