use opaque_core::cfa::{CfaModel, CfaPriors, Identification};
use opaque_core::prior::UnivariatePrior;
use opaque_core::sbc::{sbc_run, SbcConfig, SignVerdict};
use opaque_core::stats::pearson;

fn config(loading: UnivariatePrior, seed: u64) -> SbcConfig {
    let model = CfaModel::simple(3, 3, Identification::LatentVarianceFixedToOne { sign_restrict_focal: true }).unwrap();
    let priors = CfaPriors {
        loading,
        ..CfaPriors::noninformative()
    };
    SbcConfig {
        relabel: true,
        ..SbcConfig::desk(model, priors, seed)
    }
}

#[test]
fn informative_priors_calibrate() {
    let report = sbc_run(&config(UnivariatePrior::Normal { mean: 1.0, variance: 1.0 / 16.0 }, 41)).unwrap();
    assert!(report.excluded.is_empty(), "{:?}", report.excluded);
    let pval = report.pooled_loading_p_value.unwrap();
    assert!(pval > 0.01, "{pval}");
    // For a calibrated posterior, cov(truth, mean) = var(mean), so
    // corr² = 1 − E[posterior variance] / prior variance.
    let recs: Vec<_> = report.loadings().flat_map(|p| &p.records).collect();
    let t: Vec<f64> = recs.iter().map(|r| r.truth).collect();
    let m: Vec<f64> = recs.iter().map(|r| r.post_mean).collect();
    let corr = pearson(&t, &m).unwrap();
    let post_var = recs.iter().map(|r| r.post_sd * r.post_sd).sum::<f64>() / recs.len() as f64;
    let implied = 1.0 - post_var / (1.0 / 16.0);
    assert!((corr * corr - implied).abs() < 0.1, "{corr} vs {implied}");
    for p in report.loadings() {
        assert!(p.sign.unwrap().corr_signed > 0.5, "{}", p.name);
        assert_ne!(p.sign.unwrap().verdict, SignVerdict::VorX);
    }
}

#[test]
fn vague_priors_show_sign_patterns() {
    let report = sbc_run(&config(UnivariatePrior::Normal { mean: 0.0, variance: 100.0 }, 42)).unwrap();
    for p in report.loadings() {
        let s = p.sign.unwrap();
        assert_eq!(s.verdict, SignVerdict::VorX, "{}: {s:?}", p.name);
    }
}
