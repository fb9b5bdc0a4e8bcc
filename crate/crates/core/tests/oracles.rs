mod common;

use common::*;
use svddf::diffusivity::{check_bounds, h1_norm};
use svddf::operator::{lambda_max, SpectralMethod};
use svddf::stopping::SpectralEnergy;
use svddf::*;

#[test]
fn smoothed_gradient_matches_direct_convolution() {
    for (seed, sigma) in [(1, 1.0), (2, 0.4), (3, 2.5)] {
        let u = random_image(16, 16, seed);
        let g = grad_gaussian(&u, &GaussianKernel::new(sigma).unwrap());
        for j in 0..16 {
            for i in 0..16 {
                let (gx, gy) = smoothed_gradient_at(&u, sigma, i, j);
                assert!((g.gx[j * 16 + i] - gx).abs() < 1e-10);
                assert!((g.gy[j * 16 + i] - gy).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn ramp_gradient_in_interior() {
    let u = ImageGrid::from_fn(20, 20, |_, j| j as f64 * 0.5).unwrap().with_spacing(0.5).unwrap();
    let g = grad_gaussian(&u, &GaussianKernel::new(1.0).unwrap());
    for j in 4..16 {
        for i in 0..20 {
            let (gx, gy) = smoothed_gradient_at(&u, 1.0, i, j);
            assert!((g.gy[j * 20 + i] - gy).abs() < 1e-12);
            assert!((g.gy[j * 20 + i] - 1.0).abs() < 0.03);
            assert!(g.gx[j * 20 + i].abs() < 1e-12 && gx.abs() < 1e-12);
        }
    }
}

#[test]
fn half_point_coefficients_match_pointwise_evaluation() {
    let u = random_image(8, 8, 11);
    let (eps, p, sigma) = (1e-2, 1.0, 1.0);
    let field = diffusivity_half(&u, eps, p, &GaussianKernel::new(sigma).unwrap()).unwrap();
    for j in 0..8 {
        for i in 0..8 {
            if i + 1 < 8 {
                let want = face_coefficient(&u, eps, p, sigma, (i, j), (i + 1, j));
                assert!((field.below(i, j) - want).abs() < 1e-12);
                assert_eq!(field.east(i, j), Some(field.below(i, j)));
                assert_eq!(field.west(i + 1, j), field.east(i, j));
            }
            if j + 1 < 8 {
                let want = face_coefficient(&u, eps, p, sigma, (i, j), (i, j + 1));
                assert!((field.right(i, j) - want).abs() < 1e-12);
                assert_eq!(field.north(i, j + 1), field.south(i, j));
            }
        }
    }
}

#[test]
fn assembly_matches_dense_enumeration() {
    for (seed, (m, n), p) in [(5, (6, 6), 1.0), (6, (5, 7), 1.5), (7, (7, 4), 2.0)] {
        let u = random_image(m, n, seed).with_spacing(0.8).unwrap();
        let kernel = GaussianKernel::new(1.0).unwrap();
        let f = assemble(&diffusivity_half(&u, 1e-2, p, &kernel).unwrap(), 0.8);
        let oracle = dense_operator(&u, 1e-2, p, 1.0);
        assert!((f.to_dense() - &oracle).abs().max() < 1e-12);

        let ones = vec![1.0; m * n];
        assert!(f.apply(&ones).unwrap().iter().all(|x| x.abs() < 1e-12));
        for q in [0, m * n / 2, m * n - 1] {
            let mut e = vec![0.0; m * n];
            e[q] = 1.0;
            let col = f.apply(&e).unwrap();
            for r in 0..m * n {
                assert!((col[r] - oracle[(r, q)]).abs() < 1e-12);
            }
        }
        let s = f.structure();
        assert!(s.symmetric && s.signs_ok && s.dominance_ok && s.max_row_sum < 1e-12);
    }
}

#[test]
fn spectrum_is_nonpositive_and_bounded() {
    for seed in 0..10 {
        let u = random_image(6 + seed as usize % 3, 7, 100 + seed);
        let p = 1.0 + (seed as f64) / 10.0;
        let f = assemble(&diffusivity_half(&u, 1e-2, p, &GaussianKernel::new(1.0).unwrap()).unwrap(), 1.0);
        let report = spectrum_check(&f).unwrap();
        assert!(report.pass, "max eigenvalue {}", report.max_eigenvalue);
        let truth = -report.min_eigenvalue;
        let gersh = f.gershgorin_bound();
        assert!(gersh >= truth - 1e-10);
        let power = lambda_max(&f, 1e-10, 5000);
        assert!(power.lambda_max <= gersh + 1e-8);
        if power.method == SpectralMethod::PowerIteration {
            assert!((power.lambda_max - truth).abs() <= 1e-6 * truth, "{} vs {truth}", power.lambda_max);
        }
    }
}

#[test]
fn power_iteration_on_laplacian() {
    let lap = dense_laplacian(16, 16, 1.0);
    let truth = -lap.clone().symmetric_eigen().eigenvalues.min();
    let field = DiffusivityField::uniform(16, 16, 1.0);
    let b = lambda_max(&assemble(&field, 1.0), 1e-6, 200);
    assert!(b.lambda_max > 7.5 && b.lambda_max <= 8.0);
    assert!(b.lambda_max <= truth + 1e-6 || b.method == SpectralMethod::Gershgorin);
}

#[test]
fn dense_spectrum_of_unit_laplacian() {
    let lap = dense_laplacian(2, 2, 1.0);
    let mut ev: Vec<f64> = lap.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let want = [-4.0, -2.0, -2.0, 0.0];
    for (a, b) in ev.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    let f = assemble(&DiffusivityField::uniform(2, 2, 1.0), 1.0);
    assert_eq!(f.to_dense(), lap);
}

#[test]
fn high_freq_energy_matches_naive_dft() {
    for (seed, (m, n)) in [(21, (8, 8)), (22, (16, 16)), (23, (6, 10))] {
        let u = random_image(m, n, seed);
        let energy = SpectralEnergy::new(m, n);
        for n0 in [0, 1, 3, (m + n) / 2, m + n - 2, m + n - 1] {
            let want = naive_high_freq_energy(&u, n0);
            let got = energy.high_freq_energy(&u, n0);
            if want == 0.0 {
                assert_eq!(got, 0.0);
            } else {
                assert!((got - want).abs() <= 1e-9 * want, "n0={n0}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn coefficient_bounds_with_empirical_constant() {
    for seed in 0..5 {
        let u = random_image(12, 9, 300 + seed);
        for p in [1.0, 1.3, 2.0] {
            let field = diffusivity_half(&u, 1e-2, p, &GaussianKernel::new(1.0).unwrap()).unwrap();
            let h1 = h1_norm(&u);
            let c = field.max_smoothed_gradient() / h1;
            let report = check_bounds(&field, h1, c);
            assert!(report.pass, "{report:?}");
        }
    }
}
