mod common;

use common::*;
use spos::kernel::KernelConfig;
use spos::samplers::*;
use spos::target::*;
use spos::variance_reduction::*;

fn enumerate_mean_and_variance(
    n: usize,
    b: usize,
    estimate: impl Fn(&[usize]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    let batches = all_batches(n, b);
    let draws: Vec<Vec<f64>> = batches.iter().map(|batch| estimate(batch)).collect();
    let d = draws[0].len();
    let count = draws.len() as f64;
    let mean: Vec<f64> = (0..d).map(|c| draws.iter().map(|g| g[c]).sum::<f64>() / count).collect();
    let var = draws
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .sum::<f64>()
        / count;
    (mean, var)
}

#[test]
fn all_estimators_are_unbiased_over_enumerated_batches() {
    let model = three_term_regression();
    let anchor = ParticleEnsemble::new(vec![0.4, -0.3], 2).unwrap();
    let theta = [0.9, 0.2];
    let full = full_gradient(&model, &theta).unwrap();
    let tol = 1e-12 * max_abs(&full).max(1.0);

    let mut saga = SagaState::new(1, 3, 2, 1 << 20).unwrap();
    saga.initialize(&model, &anchor).unwrap();
    let mut svrg = SvrgState::new(SvrgOption::II, 1).unwrap();
    let mut e = anchor.clone();
    svrg.snapshot_with_lag(&mut e, &model, 0).unwrap();

    for b in 1..=2 {
        let (plain, _) = enumerate_mean_and_variance(3, b, |batch| stochastic_gradient(&model, &theta, batch).unwrap());
        let (s, _) = enumerate_mean_and_variance(3, b, |batch| saga.estimate(0, &theta, batch, &model).unwrap());
        let (v, _) = enumerate_mean_and_variance(3, b, |batch| svrg.estimate(0, &theta, batch, &model).unwrap());
        for (name, mean) in [("plain", plain), ("saga", s), ("svrg", v)] {
            assert!(max_abs_diff(&mean, &full) <= tol, "{name} B={b}: {mean:?} vs {full:?}");
        }
    }
}

#[test]
fn saga_conditional_mean_identity_after_move() {
    let model = three_term_regression();
    let start = ParticleEnsemble::new(vec![0.1, 0.7], 2).unwrap();
    let mut saga = SagaState::new(1, 3, 2, 1 << 20).unwrap();
    saga.initialize(&model, &start).unwrap();
    // Refresh one entry at a different point so the table is stale.
    saga.commit(0, &[1.0, -1.0], &[1], &model).unwrap();
    let theta = [-0.4, 0.25];
    let (mean, _) = enumerate_mean_and_variance(3, 1, |batch| saga.estimate(0, &theta, batch, &model).unwrap());
    // table_sum + Σⱼ(Fⱼ(θ) − gⱼ) = F(θ) + (table_sum − Σⱼ gⱼ).
    let full = full_gradient(&model, &theta).unwrap();
    let entries: Vec<f64> = (0..2).map(|c| (0..3).map(|j| saga.entry(0, j)[c]).sum()).collect();
    let expected: Vec<f64> = (0..2).map(|c| full[c] + saga.cached_sum(0)[c] - entries[c]).collect();
    assert!(max_abs_diff(&mean, &expected) < 1e-12);
    assert!(max_abs_diff(&mean, &full) < 1e-12);
}

#[test]
fn svrg_variance_is_below_plain_near_the_anchor() {
    let model = three_term_regression();
    let anchor = [0.4, -0.3];
    let mut e = ParticleEnsemble::new(anchor.to_vec(), 2).unwrap();
    let mut svrg = SvrgState::new(SvrgOption::II, 1).unwrap();
    svrg.snapshot_with_lag(&mut e, &model, 0).unwrap();
    for theta in [[0.405, -0.3], [0.4, -0.293], [0.397, -0.305]] {
        for b in 1..=2 {
            let (_, plain) = enumerate_mean_and_variance(3, b, |batch| stochastic_gradient(&model, &theta, batch).unwrap());
            let (_, reduced) = enumerate_mean_and_variance(3, b, |batch| svrg.estimate(0, &theta, batch, &model).unwrap());
            assert!(reduced < plain, "θ={theta:?} B={b}: {reduced} vs {plain}");
        }
    }
    let (_, at_anchor) = enumerate_mean_and_variance(3, 2, |batch| svrg.estimate(0, &anchor, batch, &model).unwrap());
    // Every batch returns the cached full gradient; only rounding in the mean remains.
    let scale = max_abs(&full_gradient(&model, &anchor).unwrap()).max(1.0);
    assert!(at_anchor <= 1e-24 * scale * scale, "{at_anchor}");
}

#[test]
fn saga_table_stays_consistent_over_a_run() {
    let model = three_term_regression();
    let mut cfg = SamplerConfig::new(SamplerKind::SagaPos, 0.01, 1.0, 2, 100, 4);
    cfg.batch_size = 2;
    let mut e = ParticleEnsemble::gaussian(5, &[0.0, 0.0], 1.0, 4).unwrap();
    let mut sampler = Sampler::new(&model, cfg, KernelConfig::median(), &e).unwrap();
    for _ in 0..100 {
        sampler.step(&mut e).unwrap();
    }
    match sampler.estimator() {
        GradientEstimator::Saga(state) => assert!(state.audit() <= 1e-9, "{}", state.audit()),
        other => panic!("expected a SAGA estimator, got {other:?}"),
    }
}

#[test]
fn svrg_plus_never_calls_the_full_gradient() {
    let model = CountingModel::new(three_term_regression());
    let mut cfg = SamplerConfig::new(SamplerKind::SvrgPosPlus, 0.01, 1.0, 1, 200, 8);
    cfg.epoch_length = Some(10);
    cfg.snapshot_batch = Some(2);
    let init = ParticleEnsemble::gaussian(4, &[0.0, 0.0], 1.0, 8).unwrap();
    run(init, &model, &cfg, &KernelConfig::median(), &DiagnosticsConfig::default()).unwrap();
    let counts = model.counts();
    assert_eq!(counts.full_gradient_calls, 0);
    assert!(counts.term_gradient_calls > 0);

    let svrg = CountingModel::new(three_term_regression());
    let cfg = SamplerConfig { kind: SamplerKind::SvrgPos, ..cfg };
    let init = ParticleEnsemble::gaussian(4, &[0.0, 0.0], 1.0, 8).unwrap();
    run(init, &svrg, &cfg, &KernelConfig::median(), &DiagnosticsConfig::default()).unwrap();
    assert_eq!(svrg.counts().full_gradient_calls, 4 * 20);
}
