use opaque_core::cfa::{
    flip_factor, generate_data, gibbs_fit, loading_name, log_likelihood, relabel, CfaModel, CfaParams, CfaPriors,
    FitSettings, Identification,
};
use opaque_core::stats::mean;

fn sign_flip_setup() -> (CfaModel, opaque_core::table::SampleTable) {
    let model = CfaModel::simple(3, 3, Identification::LatentVarianceFixedToOne { sign_restrict_focal: false }).unwrap();
    let truth = CfaParams::uniform(&model, -1.0);
    let data = generate_data(&model, &truth, 1000, 31).unwrap();
    (model, data)
}

#[test]
fn negative_truth_recovered_after_relabeling() {
    let (model, data) = sign_flip_setup();
    let s = FitSettings {
        chains: 3,
        warmup: 500,
        iters: 1000,
        seed: 32,
    };
    let draws = gibbs_fit(&model, &CfaPriors::noninformative(), &data, &s).unwrap();
    let fixed = relabel(&draws, &model).unwrap();
    for i in 0..9 {
        let col = fixed.table.require(&loading_name(i)).unwrap();
        let m = mean(col);
        assert!((0.8..=1.2).contains(&m), "loading {i}: {m}");
        assert!(col.iter().all(|&v| v > 0.0), "loading {i} crosses zero");
    }
}

#[test]
fn likelihood_invariant_on_posterior_draws() {
    let (model, data) = sign_flip_setup();
    let s = FitSettings {
        chains: 2,
        warmup: 100,
        iters: 50,
        seed: 33,
    };
    let draws = gibbs_fit(&model, &CfaPriors::noninformative(), &data, &s).unwrap();
    assert_eq!(draws.table.n_rows(), 100);
    for r in 0..100 {
        let p = draws.params(&model, r).unwrap();
        let base = log_likelihood(&model, &p, &data).unwrap();
        let mut q = p.clone();
        for j in 0..3 {
            q = flip_factor(&q, &model, j);
            let ll = log_likelihood(&model, &q, &data).unwrap();
            assert!((ll - base).abs() <= 1e-10 * base.abs(), "draw {r}");
        }
    }
}
