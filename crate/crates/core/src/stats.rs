//! Descriptive statistics and distribution helpers shared across modules.

use std::f64::consts::{PI, SQRT_2};

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

pub use statrs::function::beta::ln_beta;
pub use statrs::function::gamma::ln_gamma;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal survival function `1 - Φ(z)`, computed without
/// cancellation so that `std_normal_sf(z) == std_normal_cdf(-z)` exactly.
#[inline]
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Density of `Normal(mean, sd²)`.
#[inline]
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_pdf((x - mean) / sd) / sd
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Pearson correlation. `None` if either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `xs` and `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Upper-tail probability of a chi-square statistic.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
}

/// Pearson chi-square goodness-of-fit p-value for observed counts against
/// expected counts (which need not be equal).
pub fn chi_square_gof(observed: &[usize], expected: &[f64]) -> (f64, f64) {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e) * (o as f64 - e) / e)
        .sum();
    (stat, chi_square_sf(stat, (observed.len() - 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_are_mirror_exact() {
        for &z in &[0.0, 0.3, 1.7, 4.2, 9.0] {
            assert_eq!(std_normal_sf(z), std_normal_cdf(-z));
        }
        let p = std_normal_cdf(1.959963984540054);
        assert!((p - 0.975).abs() < 1e-11, "{p}");
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&xs, |x| x) <= 0.0005 + 1e-12);
        assert!(ks_distance_two_sample(&xs, &xs) == 0.0);
    }

    #[test]
    fn chi_square_uniform_counts() {
        let (stat, p) = chi_square_gof(&[10, 10, 10, 10], &[10.0; 4]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let p = chi_square_sf(3.841458820694124, 1.0);
        assert!((p - 0.05).abs() < 1e-9);
    }

    #[test]
    fn pearson_degenerate() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }
}
