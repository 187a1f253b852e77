//! Threshold prior curves against Monte Carlo draws.

use opaque_core::density::{integrate, QuadratureRule};
use opaque_core::threshold::{
    emit_curves, increment_mass_k2, lognormal_increment_density, order_stat_cdf, sample_many, ScaleParam,
    ThresholdPriorSpec, Translation,
};

fn spec(t: Translation) -> ThresholdPriorSpec {
    ThresholdPriorSpec::declared(3, 0.0, 5.0, ScaleParam::Variance, t).unwrap()
}

/// Largest gap between a 200-bin histogram of draws and the exact bin
/// averages of the order-statistic density.
#[test]
fn reorder_histograms_match_densities() {
    let s = spec(Translation::Reorder);
    let draws = sample_many(&s, 1_000_000, 7);
    let (lo, hi, bins) = (-6.0 * s.sd, 6.0 * s.sd, 200);
    let w = (hi - lo) / bins as f64;
    for k in 1..=3 {
        let mut counts = vec![0usize; bins];
        for g in &draws {
            let b = ((g[k - 1] - lo) / w).floor();
            if b >= 0.0 && (b as usize) < bins {
                counts[b as usize] += 1;
            }
        }
        let mut sup = 0.0f64;
        for (b, &c) in counts.iter().enumerate() {
            let a = lo + b as f64 * w;
            let exact = (order_stat_cdf(&s, k, a + w).unwrap() - order_stat_cdf(&s, k, a).unwrap()) / w;
            sup = sup.max((c as f64 / 1e6 / w - exact).abs());
        }
        assert!(sup < 0.005, "k={k}: {sup}");
    }
}

#[test]
fn increment_k2_normalization() {
    let s = spec(Translation::LognormalIncrement);
    let rule = QuadratureRule {
        abs_tol: 1e-8,
        ..Default::default()
    };
    let window = integrate(|x| lognormal_increment_density(&s, 2, x, 0).unwrap(), -80.0, 200.0, &rule)
        .unwrap()
        .value;
    // Over the whole line the density integrates to one.
    let tails = increment_mass_k2(&s, 200.0, f64::MAX.sqrt()).unwrap() + increment_mass_k2(&s, -f64::MAX.sqrt(), -80.0).unwrap();
    assert!((window + tails - 1.0).abs() < 1e-3, "{window} + {tails}");
    // The window itself holds what the draws say it holds.
    let draws = sample_many(&s, 1_000_000, 8);
    let frac = draws.iter().filter(|g| g[1] > -80.0 && g[1] < 200.0).count() as f64 / 1e6;
    assert!((window - frac).abs() < 1e-3, "{window} vs {frac}");
}

#[test]
fn increment_curves() {
    let s = spec(Translation::LognormalIncrement);
    let curves = emit_curves(&s, 9).unwrap();
    for c in &curves {
        assert!((c.trapezoid_mass() - 1.0).abs() < 0.005, "curve {}: {}", c.which, c.trapezoid_mass());
        assert!(c.density.iter().all(|&d| d >= 0.0));
    }
    assert_eq!(curves[1].density, curves[0].density);
    assert!(curves[2].mean() - curves[2].mode() > 0.0);
    for k in [2, 3] {
        let sup = curves[k]
            .density
            .iter()
            .zip(&curves[0].density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup > 0.01);
    }
}

#[test]
fn increment_k3_against_draws() {
    let s = spec(Translation::LognormalIncrement);
    let draws = sample_many(&s, 1_000_000, 10);
    for x in [0.0, 3.0, 8.0] {
        let h = 0.2;
        let frac = draws.iter().filter(|g| (g[2] - x).abs() < h / 2.0).count() as f64 / 1e6 / h;
        let d = lognormal_increment_density(&s, 3, x, 11).unwrap();
        assert!((frac - d).abs() < 0.003, "x={x}: {frac} vs {d}");
    }
}

#[test]
fn reorder_mirror_symmetry() {
    let s = spec(Translation::Reorder);
    let c = emit_curves(&s, 1).unwrap();
    let n = c[1].grid.len();
    for i in 0..n {
        assert!((c[1].density[i] - c[3].density[n - 1 - i]).abs() < 1e-10);
    }
}
