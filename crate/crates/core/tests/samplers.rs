mod common;

use common::*;
use spos::kernel::KernelConfig;
use spos::rng::Streams;
use spos::samplers::*;
use spos::target::*;

fn deterministic(kind: SamplerKind, h: f64) -> SamplerConfig {
    let mut cfg = SamplerConfig::new(kind, h, 1.0, 1, 1, 0);
    cfg.noise_scale = 0.0;
    cfg
}

/// Dense scalar evaluation of the SVGD/SPOS update with exact gradients:
/// `θᵢ′ = θᵢ − (h/β)·lang·F(θᵢ) + (h/M)·Σⱼ [−K(θᵢ−θⱼ)F(θⱼ) + (θᵢ−θⱼ)/η²·K(θᵢ−θⱼ)]`.
fn reference_update(rows: &[Vec<f64>], grad: impl Fn(&[f64]) -> Vec<f64>, h: f64, beta: f64, eta: f64, langevin: bool) -> Vec<Vec<f64>> {
    let m = rows.len();
    let grads: Vec<Vec<f64>> = rows.iter().map(|r| grad(r)).collect();
    rows.iter()
        .map(|xi| {
            (0..xi.len())
                .map(|c| {
                    let mut inter = 0.0;
                    for (xj, gj) in rows.iter().zip(&grads) {
                        let sq: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                        let k = (-sq / (2.0 * eta * eta)).exp();
                        inter += -k * gj[c] + (xi[c] - xj[c]) / (eta * eta) * k;
                    }
                    let drift = if langevin { h / beta * grad(xi)[c] } else { 0.0 };
                    xi[c] - drift + h / m as f64 * inter
                })
                .collect()
        })
        .collect()
}

fn rows_of(e: &ParticleEnsemble) -> Vec<Vec<f64>> {
    e.particles().map(<[f64]>::to_vec).collect()
}

#[test]
fn svgd_two_particles_match_dense_evaluation() {
    let model = GaussianTarget::standard(1, 1).unwrap();
    let e = ParticleEnsemble::new(vec![0.0, 2.0], 1).unwrap();
    let cfg = deterministic(SamplerKind::Svgd, 0.01);
    let next = svgd_step(&e, &model, &cfg, &KernelConfig::fixed(1.0), &mut Streams::new(0, 2)).unwrap();
    let expected = reference_update(&rows_of(&e), |t| t.to_vec(), 0.01, 1.0, 1.0, false);
    for (got, want) in next.particles().zip(&expected) {
        assert!(max_abs_diff(got, want) < 1e-14, "{got:?} vs {want:?}");
    }
}

#[test]
fn spos_three_particles_match_dense_evaluation() {
    let target = GaussianTarget::new(&GaussianTargetParams {
        mean: vec![0.5, -0.5],
        covariance: vec![vec![1.5, 0.3], vec![0.3, 0.8]],
        split_count: 1,
    })
    .unwrap();
    let mut rng = rng(21);
    for _ in 0..10 {
        let e = ParticleEnsemble::new(uniform_vec(&mut rng, 6, -2.0, 2.0), 2).unwrap();
        let mut cfg = deterministic(SamplerKind::Spos, 0.05);
        cfg.beta = 2.0;
        let next = spos_step(&e, &target, &cfg, &KernelConfig::fixed(0.8), &mut Streams::new(0, 3)).unwrap();
        let grad = |t: &[f64]| full_gradient(&target, t).unwrap();
        let expected = reference_update(&rows_of(&e), grad, 0.05, 2.0, 0.8, true);
        for (got, want) in next.particles().zip(&expected) {
            assert!(max_abs_diff(got, want) < 1e-13, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn permuting_particles_permutes_the_update() {
    let mut rng = rng(22);
    let e = ParticleEnsemble::new(uniform_vec(&mut rng, 10, -2.0, 2.0), 2).unwrap();
    let order = [3, 0, 4, 1, 2];
    // A single-term target with noise off makes the update deterministic.
    let cfg = deterministic(SamplerKind::Spos, 0.02);
    let single = GaussianTarget::new(&GaussianTargetParams {
        mean: vec![0.2, 0.1],
        covariance: vec![vec![1.0, 0.2], vec![0.2, 2.0]],
        split_count: 1,
    })
    .unwrap();
    for kernel in [KernelConfig::fixed(0.7), KernelConfig::median()] {
        let a = spos_step(&e, &single, &cfg, &kernel, &mut Streams::new(1, 5)).unwrap();
        let b = spos_step(&e.permuted(&order), &single, &cfg, &kernel, &mut Streams::new(1, 5)).unwrap();
        for (i, &src) in order.iter().enumerate() {
            assert!(max_abs_diff(b.particle(i), a.particle(src)) < 1e-14);
        }
    }
}

#[test]
fn spos_without_langevin_terms_is_svgd() {
    let model = three_term_regression();
    let mut rng = rng(23);
    for trial in 0..50 {
        let e = ParticleEnsemble::new(uniform_vec(&mut rng, 8, -2.0, 2.0), 2).unwrap();
        let mut spos = SamplerConfig::new(SamplerKind::Spos, 0.03, 1.5, 2, 1, trial);
        spos.noise_scale = 0.0;
        spos.langevin_drift = false;
        let mut svgd = spos.clone();
        svgd.kind = SamplerKind::Svgd;
        let kernel = KernelConfig::median();
        let a = spos_step(&e, &model, &spos, &kernel, &mut Streams::new(trial, 4)).unwrap();
        let b = svgd_step(&e, &model, &svgd, &kernel, &mut Streams::new(trial, 4)).unwrap();
        assert!(max_abs_diff(a.positions(), b.positions()) <= 1e-12);
    }
}

#[test]
fn injected_noise_variance_scales_with_inverse_beta() {
    // At the mode of the unit Gaussian G = 0, so each coordinate's increment is
    // pure noise with variance 2h/β.
    let model = GaussianTarget::standard(1, 1).unwrap();
    let n = 10_000;
    let e = ParticleEnsemble::new(vec![0.0; n], 1).unwrap();
    let variance = |beta: f64, seed: u64| {
        let cfg = SamplerConfig::new(SamplerKind::Sgld, 0.1, beta, 1, 1, seed);
        let next = sgld_step(&e, &model, &cfg, &mut Streams::new(seed, n)).unwrap();
        next.positions().iter().map(|x| x * x).sum::<f64>() / n as f64
    };
    let (v1, v2) = (variance(1.0, 31), variance(2.0, 32));
    assert!((v1 / v2 - 2.0).abs() <= 0.1, "{v1} / {v2}");
    assert!((v1 - 0.2).abs() <= 0.2 * 0.05, "{v1}");
}

#[test]
fn run_is_deterministic_and_counts_snapshots() {
    let model = three_term_regression();
    for kind in [SamplerKind::Sgld, SamplerKind::Spos, SamplerKind::SagaPos, SamplerKind::SvrgPos, SamplerKind::SvrgPosPlus] {
        let mut cfg = SamplerConfig::new(kind, 0.01, 1.0, 2, 23, 5);
        cfg.epoch_length = Some(4);
        cfg.snapshot_batch = Some(2);
        cfg.svrg_option = spos::variance_reduction::SvrgOption::I;
        let init = ParticleEnsemble::gaussian(6, &[0.0, 0.0], 1.0, 5).unwrap();
        let diag = DiagnosticsConfig { snapshot_every: 5, moments: true, w1_repeats: Some(2) };
        let (a, ea) = run(init.clone(), &model, &cfg, &KernelConfig::median(), &diag).unwrap();
        let (b, eb) = run(init, &model, &cfg, &KernelConfig::median(), &diag).unwrap();
        assert_eq!(ea, eb, "{kind:?}");
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.metrics, b.metrics);
        let steps: Vec<u64> = a.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 5, 10, 15, 20, 23]);
        a.check().unwrap();
        assert_eq!(ea.step(), 23);
    }
}

#[test]
fn zero_steps_and_single_step() {
    let model = GaussianTarget::standard(1, 1).unwrap();
    let init = ParticleEnsemble::gaussian(4, &[1.0], 1.0, 2).unwrap();
    let cfg = SamplerConfig::new(SamplerKind::Sgld, 0.1, 1.0, 1, 0, 9);
    let (trace, e) = run(init.clone(), &model, &cfg, &KernelConfig::default(), &DiagnosticsConfig::default()).unwrap();
    assert_eq!(e, init);
    assert_eq!(trace.snapshots.len(), 1);

    let one = SamplerConfig { total_steps: 1, ..cfg };
    let (_, e1) = run(init.clone(), &model, &one, &KernelConfig::default(), &DiagnosticsConfig::default()).unwrap();
    let direct = sgld_step(&init, &model, &one, &mut Streams::new(9, 4)).unwrap();
    assert_eq!(e1.positions(), direct.positions());
    assert_eq!(direct.step(), 1);
}

#[test]
fn sgld_chain_is_calibrated_on_unit_gaussian() {
    let model = GaussianTarget::standard(1, 1).unwrap();
    let steps = 50_000;
    let cfg = SamplerConfig::new(SamplerKind::Sgld, 0.01, 1.0, 1, steps, 77);
    let mut e = ParticleEnsemble::new(vec![0.0; 10], 1).unwrap();
    let mut sampler = Sampler::new(&model, cfg, KernelConfig::default(), &e).unwrap();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..steps {
        sampler.step(&mut e).unwrap();
        for &x in e.positions() {
            s1 += x;
            s2 += x * x;
        }
    }
    let n = (steps * 10) as f64;
    let mean = s1 / n;
    let var = s2 / n - mean * mean;
    assert!(mean.abs() <= 0.1, "{mean}");
    assert!((0.85..=1.15).contains(&var), "{var}");
}

#[test]
fn spos_ensemble_variance_on_unit_gaussian() {
    let model = GaussianTarget::standard(1, 1).unwrap();
    let cfg = SamplerConfig::new(SamplerKind::Spos, 0.05, 100.0, 1, 2000, 13);
    let init = ParticleEnsemble::gaussian(100, &[0.0], 1.0, 13).unwrap();
    let (_, e) = run(init, &model, &cfg, &KernelConfig::median(), &DiagnosticsConfig { snapshot_every: 2000, ..Default::default() }).unwrap();
    let m = spos::diagnostics::sample_moments(&e);
    let var = m.covariance.unwrap()[0][0];
    assert!((0.8..=1.2).contains(&var), "{var}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let model = three_term_regression();
    let mut cfg = SamplerConfig::new(SamplerKind::SvrgPosPlus, 0.01, 1.0, 2, 30, 3);
    cfg.epoch_length = Some(5);
    cfg.snapshot_batch = Some(2);
    let init = ParticleEnsemble::gaussian(9, &[0.0, 0.0], 1.0, 3).unwrap();
    let go = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(init.clone(), &model, &cfg, &KernelConfig::median(), &DiagnosticsConfig::default()).unwrap().1)
    };
    assert_eq!(go(1), go(4));
}
