mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use svddf::flow::{energies, first_order_step, kick_drift_eigenvalues, mode_spectral_radius, quadratic_potential};
use svddf::*;

fn dense_of(u: &DVector<f64>, rows: usize, cols: usize, cfg: &SolverConfig) -> DMatrix<f64> {
    let img =
        ImageGrid::from_column_major(rows, cols, u.as_slice().to_vec()).unwrap().with_spacing(cfg.spacing).unwrap();
    dense_operator(&img, cfg.epsilon, cfg.p, cfg.sigma)
}

#[test]
fn trajectory_matches_matrix_form() {
    for (seed, p, eta) in [(1, 1.0, 1.0), (2, 1.5, 10.0), (3, 2.0, 0.3)] {
        let u0 = random_image(8, 8, seed);
        let cfg =
            SolverConfig { p, eta, max_steps: 5, stopping: StoppingRule::MaxStepsOnly, ..SolverConfig::default() };
        let mut solver = Solver::new(&u0, cfg, Method::Svddf).unwrap();
        let d = 64;
        let mut z = DVector::zeros(2 * d);
        z.rows_mut(0, d).copy_from_slice(u0.as_column_major());
        let mut f_prev = dense_of(&z.rows(0, d).into_owned(), 8, 8, &cfg);
        for _ in 0..5 {
            let rec = solver.step().unwrap();
            let f_cur = dense_of(&z.rows(0, d).into_owned(), 8, 8, &cfg);
            let (a, b) = step_matrices(&f_prev, &f_cur, eta, rec.dt);
            z = &b * (&a * &z);
            f_prev = f_cur;
            let s = solver.state();
            assert!(max_abs_diff(&s.u, z.rows(0, d).as_slice()) < 1e-10);
            assert!(max_abs_diff(&s.v, z.rows(d, d).as_slice()) < 1e-10);
        }
    }
}

#[test]
fn kick_drift_eigenvalues_match_dense_matrix() {
    let (eta, dt) = (0.8, 0.3);
    let lap = dense_laplacian(4, 3, 1.0);
    let (a, _) = step_matrices(&lap, &lap, eta, dt);
    let dense = a.complex_eigenvalues();
    let lambdas = lap.clone().symmetric_eigen().eigenvalues;
    for lambda in lambdas.iter().map(|l| -l) {
        for mu in kick_drift_eigenvalues(lambda, eta, dt) {
            let nearest = dense.iter().map(|z| (z - mu).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-8, "lambda {lambda}: {mu} not found");
        }
    }
}

#[test]
fn mode_radius_matches_dense_iteration_matrix() {
    let lap = dense_laplacian(5, 4, 1.0);
    let lambda_max = -lap.clone().symmetric_eigen().eigenvalues.min();
    for eta in [0.5f64, 2.0, 10.0] {
        let dt = 0.9 * eta.min(2.0) / lambda_max.sqrt();
        let (a, b) = step_matrices(&lap, &lap, eta, dt);
        let dense = spectral_radius(&(&b * &a));
        let modal = lap
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|l| mode_spectral_radius(-l, eta, dt))
            .fold(0.0, f64::max);
        assert!((dense - modal).abs() < 1e-8, "eta {eta}: {dense} vs {modal}");
        assert!(dense <= 1.0 + 1e-10);
    }
}

/// Terminal error for a single cosine mode on a 32x2 grid with `p = 2`.
fn mode_error(dt: f64, t_end: f64, eta: f64) -> f64 {
    let m = 32;
    let k = 3.0;
    let shape = |i: usize| (std::f64::consts::PI * k * (i as f64 + 0.5) / m as f64).cos();
    let lambda = 4.0 * (std::f64::consts::PI * k / (2.0 * m as f64)).sin().powi(2);
    let u0 = ImageGrid::from_fn(m, 2, |i, _| shape(i)).unwrap();
    let steps = (t_end / dt).round() as usize;
    let cfg = SolverConfig {
        p: 2.0,
        eta,
        step_rule: StepRule::Fixed(dt),
        max_steps: steps,
        stopping: StoppingRule::MaxStepsOnly,
        ..SolverConfig::default()
    };
    let out = run_svddf(&u0, &cfg).unwrap();
    let exact = damped_oscillator(lambda, eta, steps as f64 * dt);
    (0..m).map(|i| (out.image.get(i, 0) - exact * shape(i)).abs()).fold(0.0, f64::max)
}

#[test]
fn second_order_in_time_for_linear_modes() {
    for eta in [0.2, 1.0, 3.0] {
        let coarse = mode_error(0.4, 20.0, eta);
        let fine = mode_error(0.2, 20.0, eta);
        let ratio = coarse / fine;
        assert!((3.2..=4.8).contains(&ratio), "eta {eta}: ratio {ratio}");
    }
}

#[test]
fn first_order_matches_matrix_exponential() {
    let u0 = random_image(8, 8, 41);
    let lap = dense_laplacian(8, 8, 1.0);
    let x0 = DVector::from_column_slice(u0.as_column_major());
    let t_end = 2.0;
    let exact = expm_apply(&lap, t_end, &x0);
    let mut errors = Vec::new();
    for dt in [0.05, 0.025] {
        let cfg = SolverConfig {
            p: 2.0,
            step_rule: StepRule::Fixed(dt),
            max_steps: (t_end / dt).round() as usize,
            stopping: StoppingRule::MaxStepsOnly,
            ..SolverConfig::default()
        };
        let out = run_first_order(&u0, &cfg).unwrap();
        errors.push(max_abs_diff(out.image.as_column_major(), exact.as_slice()));
    }
    let ratio = errors[0] / errors[1];
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    assert!(errors[0] < 0.05 * 2.0);
}

#[test]
fn mean_is_conserved() {
    let clean = synth_image(SynthKind::Disk, 32, 32).unwrap();
    let noisy = add_noise(&clean, &NoiseSpec::new(0.4, 9)).unwrap();
    let mean0 = noisy.mean();
    for method in [Method::Svddf, Method::FirstOrder] {
        let cfg =
            SolverConfig { eta: 2.0, stopping: StoppingRule::MaxStepsOnly, max_steps: 300, ..SolverConfig::default() };
        let mut solver = Solver::new(&noisy, cfg, method).unwrap();
        for _ in 0..300 {
            solver.step().unwrap();
            assert!((solver.image().mean() - mean0).abs() < 1e-10);
        }
    }
}

#[test]
fn linear_energy_is_nonincreasing() {
    let u0 = random_image(12, 10, 77);
    let cfg = SolverConfig {
        p: 2.0,
        eta: 0.5,
        step_rule: StepRule::Fixed(0.05),
        stopping: StoppingRule::MaxStepsOnly,
        max_steps: 400,
        ..SolverConfig::default()
    };
    let f = assemble(&DiffusivityField::uniform(12, 10, 1.0), 1.0);
    let mut state = FlowState::new(&u0, &cfg).unwrap();
    let total = |s: &FlowState| energies(s, &cfg).kinetic + quadratic_potential(&f, &s.u, 1.0);
    let mut last = total(&state);
    for _ in 0..400 {
        state = sv_step(&state, &cfg).unwrap().0;
        let e = total(&state);
        assert!(e <= last + 1e-8, "{e} > {last}");
        last = e;
    }
}

#[test]
fn clean_piecewise_constant_barely_moves() {
    let u = synth_image(SynthKind::PiecewiseConstant, 32, 32).unwrap();
    let cfg = SolverConfig {
        stopping: StoppingRule::Rde { tol: 0.5, n0: HighFreqIndex::default() },
        max_steps: 10,
        ..SolverConfig::default()
    };
    let out = run_svddf(&u, &cfg).unwrap();
    assert!(out.steps <= 10);
    assert!(rel_l2(out.image.as_column_major(), u.as_column_major()).unwrap() < 0.05);
}

#[test]
fn long_run_approaches_mean_with_monotone_tail() {
    let u0 = add_noise(&synth_image(SynthKind::Disk, 16, 16).unwrap(), &NoiseSpec::new(0.3, 5)).unwrap();
    let mean = u0.mean();
    let cfg =
        SolverConfig { stopping: StoppingRule::MaxStepsOnly, max_steps: 3000, eta: 2.0, ..SolverConfig::default() };
    let mut solver = Solver::new(&u0, cfg, Method::Svddf).unwrap();
    let dist = |s: &Solver| s.state().u.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
    let scale = u0.vec().norm();
    let mut history = Vec::new();
    for _ in 0..3000 {
        solver.step().unwrap();
        history.push(dist(&solver));
    }
    // tail: second half of the steps still well above rounding level
    let live: Vec<f64> = history.iter().copied().take_while(|&d| d > 1e-9 * scale).collect();
    let tail = &live[live.len() / 2..];
    assert!(tail.len() > 50);
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{:?}", &tail[..5]);
    assert!(*history.last().unwrap() < 1e-6 * scale);
}

#[test]
fn discrepancy_fires_on_noisy_disk() {
    let clean = synth_image(SynthKind::Disk, 64, 64).unwrap();
    let noisy = add_noise(&clean, &NoiseSpec::new(0.54, 3)).unwrap();
    let cfg =
        SolverConfig { stopping: StoppingRule::Discrepancy { delta: 0.3 }, max_steps: 5000, ..SolverConfig::default() };
    let out = run_svddf(&noisy, &cfg).unwrap();
    match out.stop {
        StopReason::Discrepancy { sigma } => assert!(sigma >= 0.3),
        other => panic!("stopped by {other:?}"),
    }
    let sigmas: Vec<f64> = out.log.records.iter().map(|r| r.sigma).collect();
    assert!(sigmas[..sigmas.len() - 1].iter().all(|&s| s < 0.3));
}

#[test]
fn first_order_constant_is_fixed_point() {
    let u = ImageGrid::from_fn(5, 5, |_, _| 0.3).unwrap();
    let cfg = SolverConfig { dt_max: Some(1.0), ..SolverConfig::default() };
    let s0 = FlowState::new(&u, &cfg).unwrap();
    let (s1, _) = first_order_step(&s0, &cfg).unwrap();
    assert_eq!(s1.u, s0.u);
}

#[test]
fn divergence_reports_partial_log() {
    let u0 = random_image(8, 8, 5);
    let cfg = SolverConfig {
        p: 2.0,
        step_rule: StepRule::Fixed(5.0),
        stopping: StoppingRule::MaxStepsOnly,
        max_steps: 10_000,
        ..SolverConfig::default()
    };
    match run_svddf(&u0, &cfg) {
        Err(Error::Diverged { step, log }) => {
            assert_eq!(log.len(), step - 1);
            assert!(step > 1);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}
