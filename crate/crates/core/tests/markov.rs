use fracevo::markov::*;
use fracevo::noise::{gen_noise, NoiseSource};
use fracevo::sampler::{matern_cov, sample_convolution};
use fracevo::{SpectralModel, TimeGrid};
use fracevo_oracle as oracle;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_mode(lambda: f64, q: f64) -> SpectralModel {
    SpectralModel::new(vec![lambda], vec![q]).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, order: usize, modes: usize) -> MarkovState {
    MarkovState::new(Array2::from_shape_fn((order, modes), |_| rng.random_range(-2.0..2.0))).unwrap()
}

#[test]
fn incomplete_gamma_operator() {
    let m = SpectralModel::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
    assert_eq!(inc_gamma_op(3, 0.0, &m).unwrap(), vec![1.0, 1.0]);
    let v = inc_gamma_op(1, 0.7, &m).unwrap();
    assert!((v[1] - (-2.1f64).exp()).abs() < 1e-16);
    let v = inc_gamma_op(2, 1.0, &m).unwrap();
    assert!((v[0] - 0.735_758_882_342_884_6).abs() < 1e-15);
    assert!(inc_gamma_op(2, -1.0, &m).is_err());
}

#[test]
fn zeta_values() {
    let m = one_mode(1.0, 1.0);
    let xi = MarkovState::new(array![[1.0], [1.0]]).unwrap();
    let z = zeta(2, 1.0, 0.0, &xi, &m).unwrap()[0];
    assert!((z - 3.0 * (-1f64).exp()).abs() < 1e-15);
    assert_eq!(zeta(2, 0.3, 0.3, &xi, &m).unwrap()[0], 1.0);
    let one = MarkovState::new(array![[2.0]]).unwrap();
    let m2 = one_mode(0.4, 1.0);
    assert!((zeta(1, 2.5, 0.5, &one, &m2).unwrap()[0] - 2.0 * (-0.8f64).exp()).abs() < 1e-15);
    assert!(zeta(2, 0.0, 1.0, &xi, &m).is_err());
    assert!(zeta(1, 1.0, 0.0, &xi, &m).is_err());
}

#[test]
fn derivative_stack_obeys_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = SpectralModel::new(vec![0.7, 2.0], vec![1.0, 1.0]).unwrap();
    for order in 1..=4 {
        let xi = random_state(&mut rng, order, 2);
        let (t0, t) = (0.2, 1.1);
        let h = 1e-3;
        let stack = zeta_derivative_stack(order, t, t0, &xi, &m).unwrap();
        for n in 0..order.saturating_sub(1) {
            let up = zeta_derivative_stack(order, t + h, t0, &xi, &m).unwrap();
            let dn = zeta_derivative_stack(order, t - h, t0, &xi, &m).unwrap();
            let up2 = zeta_derivative_stack(order, t + 2.0 * h, t0, &xi, &m).unwrap();
            let dn2 = zeta_derivative_stack(order, t - 2.0 * h, t0, &xi, &m).unwrap();
            for j in 0..2 {
                let fd = (8.0 * (up[n][j] - dn[n][j]) - (up2[n][j] - dn2[n][j])) / (12.0 * h);
                assert!((fd - stack[n + 1][j]).abs() < 1e-9 * (1.0 + fd.abs()), "N={order} n={n}");
            }
        }
        // (d/dt + λ) ζ_N ξ = ζ_{N-1}(ξ_{k+1} + λ ξ_k)
        if order >= 2 {
            for j in 0..2 {
                let l = m.lambdas()[j];
                let f = |s: f64| zeta(order, s, t0, &xi, &m).unwrap()[j];
                let fd = (8.0 * (f(t + h) - f(t - h)) - (f(t + 2.0 * h) - f(t - 2.0 * h))) / (12.0 * h);
                let c = xi.coeffs();
                let shifted = Array2::from_shape_fn((order - 1, 2), |(k, jj)| c[[k + 1, jj]] + m.lambdas()[jj] * c[[k, jj]]);
                let rhs = zeta(order - 1, t, t0, &MarkovState::new(shifted).unwrap(), &m).unwrap()[j];
                assert!((fd + l * f(t) - rhs).abs() < 1e-9);
            }
        }
    }
    let zero = MarkovState::zeros(3, 2).unwrap();
    assert!(zeta_derivative_stack(3, 1.0, 0.0, &zero, &m).unwrap().iter().flatten().all(|v| *v == 0.0));
    assert!(zeta_derivative_stack(3, 0.0, 0.0, &zero, &m).is_err());
    assert!(zeta_derivative_stack(1, 0.0, 0.0, &MarkovState::zeros(1, 2).unwrap(), &m).is_ok());
}

#[test]
fn zeta_composes_across_intermediate_times() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = SpectralModel::new(vec![0.5, 1.0, 3.0], vec![1.0; 3]).unwrap();
    for order in 1..=4 {
        let xi = random_state(&mut rng, order, 3);
        let (t0, s, t) = (-0.3, 0.4, 1.7);
        let mid = zeta_derivative_stack(order, s, t0, &xi, &m).unwrap();
        let mid = MarkovState::new(Array2::from_shape_fn((order, 3), |(n, j)| mid[n][j])).unwrap();
        let a = zeta(order, t, s, &mid, &m).unwrap();
        let b = zeta(order, t, t0, &xi, &m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn first_order_solve_is_the_ou_convolution() {
    let m = SpectralModel::new(vec![1.0, 2.5], vec![1.0, 0.3]).unwrap();
    let g = TimeGrid::with_step(0.5, 0.01, 301).unwrap();
    let noise = gen_noise(&m, g, 4, 12).unwrap();
    let p = solve_initial_value(1, 0.5, &MarkovState::zeros(1, 2).unwrap(), g, &noise, &m).unwrap();
    let z = sample_convolution(&m, 1.0, 0.5, g, &noise).unwrap();
    for r in 0..4 {
        for j in 0..2 {
            for k in 0..301 {
                assert!((p.stack[[r, 0, j, k]] - z.paths[[r, j, k]]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn derivative_slices_are_auxiliary_combinations() {
    let (l, q) = (1.4, 0.7);
    let m = one_mode(l, q);
    let g = TimeGrid::with_step(0.0, 0.01, 200).unwrap();
    let noise = gen_noise(&m, g, 3, 8).unwrap();
    let p = solve_initial_value(3, 0.0, &MarkovState::zeros(3, 1).unwrap(), g, &noise, &m).unwrap();
    let z: Vec<_> = (1..=3).map(|i| sample_convolution(&m, i as f64, 0.0, g, &noise).unwrap()).collect();
    for r in 0..3 {
        for k in 0..200 {
            let (y1, y2, y3) = (z[0].paths[[r, 0, k]], z[1].paths[[r, 0, k]], z[2].paths[[r, 0, k]]);
            let d1 = y2 - l * y3;
            let d2 = y1 - 2.0 * l * y2 + l * l * y3;
            assert!((p.stack[[r, 0, 0, k]] - y3).abs() < 1e-12);
            assert!((p.stack[[r, 1, 0, k]] - d1).abs() < 1e-12);
            assert!((p.stack[[r, 2, 0, k]] - d2).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_noise_leaves_the_deterministic_part() {
    let m = SpectralModel::new(vec![0.8, 2.0], vec![0.0, 0.0]).unwrap();
    let g = TimeGrid::with_step(0.0, 0.05, 41).unwrap();
    let xi = MarkovState::new(array![[1.0, -0.5], [0.3, 2.0], [-1.0, 0.1]]).unwrap();
    let noise = gen_noise(&m, g, 2, 1).unwrap();
    let p = solve_initial_value(3, 0.0, &xi, g, &noise, &m).unwrap();
    for k in 1..41 {
        let want = zeta_derivative_stack(3, g.node(k), 0.0, &xi, &m).unwrap();
        for (n, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert_eq!(p.stack[[1, n, j, k]], *w);
            }
        }
    }
    assert_eq!(p.state_at(0, 0).unwrap(), xi);
}

#[test]
fn second_order_stationary_variance_and_derivative_covariance() {
    let (l, q) = (1.0, 1.0);
    let m = one_mode(l, q);
    let g = TimeGrid::with_step(0.0, 0.05, 401).unwrap();
    let noise = NoiseSource::new(&m, g, 10_000, 31).unwrap();
    let p = solve_initial_value(2, 0.0, &MarkovState::zeros(2, 1).unwrap(), g, &noise, &m).unwrap();
    let reps = 10_000;
    let cross = |a: usize, ka: usize, b: usize, kb: usize| {
        let x: Vec<f64> = (0..reps).map(|r| p.stack[[r, a, 0, ka]] * p.stack[[r, b, 0, kb]]).collect();
        fracevo::sampler::mean_and_se(&x)
    };
    let checks = [
        (0, 400, 0, 400, matern_cov(2.0, l, q, 0.0).unwrap()),
        (1, 400, 1, 400, derivative_cov(2.0, l, q, 1, 1, 0.0).unwrap()),
        (0, 390, 1, 400, derivative_cov(2.0, l, q, 0, 1, 0.5).unwrap()),
        (1, 390, 0, 400, derivative_cov(2.0, l, q, 1, 0, 0.5).unwrap()),
    ];
    for (a, ka, b, kb, want) in checks {
        let e = cross(a, ka, b, kb);
        assert!((e.estimate - want).abs() < 4.0 * e.std_error, "({a},{b}): {} vs {want} ± {}", e.estimate, e.std_error);
    }
}

#[test]
fn restart_is_exact_in_the_discrete_scheme() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for &modes in &[1usize, 3] {
        let m = SpectralModel::new((0..modes).map(|j| 0.5 + 1.5 * j as f64).collect(), vec![1.0; modes]).unwrap();
        for order in 1..=3 {
            for _ in 0..3 {
                let t0: f64 = rng.random_range(-1.0..1.0);
                let g = TimeGrid::with_step(t0, 1e-3, 1501).unwrap();
                let ks = rng.random_range(1..1500);
                let xi = random_state(&mut rng, order, modes);
                let noise = gen_noise(&m, g, 2, rng.random()).unwrap();
                let rep = restart_check(order, t0, g.node(ks), g, &xi, &noise, &m).unwrap();
                let bound = if order == 1 { 1e-12 } else { 1e-8 };
                assert!(rep.max_rel_residual <= bound, "N={order} J={modes}: {}", rep.max_rel_residual);
                assert_eq!(rep.per_mode.len(), modes);
            }
        }
    }
    let m = one_mode(1.0, 1.0);
    let g = TimeGrid::with_step(0.0, 1e-2, 101).unwrap();
    let noise = gen_noise(&m, g, 2, 1).unwrap();
    let xi = MarkovState::new(array![[1.0], [0.5]]).unwrap();
    assert_eq!(restart_check(2, 0.0, 0.0, g, &xi, &noise, &m).unwrap().max_rel_residual, 0.0);
    assert!(restart_check(2, 0.0, 0.005, g, &xi, &noise, &m).is_err());
    let json = serde_json::to_value(restart_check(2, 0.0, 0.5, g, &xi, &noise, &m).unwrap()).unwrap();
    assert!(json.get("N").is_some() && json.get("max_rel_residual").is_some() && json.get("per_mode").is_some());
}

#[test]
fn derivative_covariance_matches_differentiated_matern() {
    let q = 0.8;
    for &(g, l) in &[(2.0, 1.0), (2.7, 1.3), (3.4, 0.6)] {
        let c = |h: f64| matern_cov(g, l, q, h).unwrap();
        for &h in &[0.4, 1.1, -0.7] {
            let e = 1e-2;
            // 8th-order central differences
            let d1 = |e: f64| (672.0 * (c(h + e) - c(h - e)) - 168.0 * (c(h + 2.0 * e) - c(h - 2.0 * e))
                + 32.0 * (c(h + 3.0 * e) - c(h - 3.0 * e))
                - 3.0 * (c(h + 4.0 * e) - c(h - 4.0 * e)))
                / (840.0 * e);
            let d2 = |e: f64| (-14350.0 * c(h) + 8064.0 * (c(h + e) + c(h - e)) - 1008.0 * (c(h + 2.0 * e) + c(h - 2.0 * e))
                + 128.0 * (c(h + 3.0 * e) + c(h - 3.0 * e))
                - 9.0 * (c(h + 4.0 * e) + c(h - 4.0 * e)))
                / (5040.0 * e * e);
            let want10 = -d1(e);
            let want01 = d1(e);
            let want11 = -d2(e);
            let tol = |w: f64| 1e-7 * (1.0 + w.abs());
            let got = derivative_cov(g, l, q, 1, 0, h).unwrap();
            assert!((got - want10).abs() < tol(want10), "γ={g} h={h}: {got} vs {want10}");
            let got = derivative_cov(g, l, q, 0, 1, h).unwrap();
            assert!((got - want01).abs() < tol(want01));
            let got = derivative_cov(g, l, q, 1, 1, h).unwrap();
            assert!((got - want11).abs() < tol(want11), "γ={g} h={h}: {got} vs {want11}");
        }
    }
}

#[test]
fn derivative_covariance_special_values() {
    let (l, q) = (1.7, 0.9);
    assert_eq!(derivative_cov(1.3, l, q, 0, 0, 0.4).unwrap(), matern_cov(1.3, l, q, 0.4).unwrap());
    let v = derivative_cov(2.0, l, q, 1, 1, 0.0).unwrap();
    // Var(Z₁ − λZ₂) from the kernel covariances q/(2λ), q/(4λ²), q/(4λ³)
    let want = q / (2.0 * l) - 2.0 * l * q / (4.0 * l * l) + l * l * q / (4.0 * l * l * l);
    assert!((v - want).abs() < 1e-14 && (want - q / (4.0 * l)).abs() < 1e-15);
    for &g in &[1.6, 2.0, 2.5, 3.3] {
        assert!(derivative_cov(g, l, q, 0, 1, 0.0).unwrap().abs() < 1e-13);
    }
    assert!(derivative_cov(1.4, l, q, 1, 0, 0.0).is_err());
    // non-integer γ takes the quadrature route
    let a = derivative_cov(2.5, l, q, 1, 1, 0.3).unwrap();
    let b = {
        let k = |a: f64, u: f64| ((a - 1.0) * u.ln() - l * u - oracle::ln_gamma_stirling(a)).exp();
        let kk = |u: f64| k(1.5, u) - l * k(2.5, u);
        q * oracle::integrate_to_inf(|u| kk(u) * kk(u + 0.3), 0.0, 1e-12)
    };
    assert!((a - b).abs() < 1e-9 * b.abs(), "{a} vs {b}");
}

#[test]
fn reconstruction_identity() {
    let m = SpectralModel::new(vec![1.0, 2.2], vec![1.0, 0.4]).unwrap();
    let r = reconstruction_check(1, 0.8, &m, 0, 0).unwrap();
    assert!(r.max_rel_residual <= 1e-10);
    for (j, mode) in r.modes.iter().enumerate() {
        let (l, q) = (m.lambdas()[j], m.qs()[j]);
        let want = (-2.0 * l * 0.8).exp() * q / (2.0 * l);
        assert!((mode.kernel_tail - want).abs() < 1e-12 * want);
    }
    let one = one_mode(1.0, 1.0);
    let r = reconstruction_check(2, 0.5, &one, 0, 0).unwrap();
    assert!(r.max_rel_residual <= 1e-6, "{}", r.max_rel_residual);
    for order in 1..=3usize {
        for &tau in &[0.0, 0.5, 2.0] {
            let l = 1.3;
            let r = reconstruction_check(order, tau, &one_mode(l, 1.0), 0, 0).unwrap();
            let a = 2 * order - 1;
            // q Γ(2N-1) Q(2N-1, 2λτ) / ((2λ)^{2N-1} Γ(N)²)
            let want = oracle::gamma_stirling(a as f64) * oracle::upper_gamma_quad(a as f64, 2.0 * l * tau).min(1.0)
                / ((2.0 * l).powi(a as i32) * oracle::gamma_stirling(order as f64).powi(2));
            let want = if tau == 0.0 {
                oracle::gamma_stirling(a as f64) / ((2.0 * l).powi(a as i32) * oracle::gamma_stirling(order as f64).powi(2))
            } else {
                want
            };
            assert!((r.modes[0].kernel_tail - want).abs() < 1e-9 * want, "N={order} τ={tau}");
            assert!(r.max_rel_residual <= 1e-6);
            if tau == 0.0 {
                let c0 = matern_cov(order as f64, l, 1.0, 0.0).unwrap();
                assert!((r.modes[0].from_stack - c0).abs() < 1e-12 * c0);
            }
        }
    }
    let r = reconstruction_check(2, 0.5, &one, 4000, 19).unwrap();
    let mc = r.modes[0].monte_carlo.unwrap();
    assert!((mc.estimate - r.modes[0].kernel_tail).abs() < 4.0 * mc.std_error);
}

#[test]
fn transition_operator_properties() {
    let m = SpectralModel::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
    let x = MarkovState::new(array![[0.8, -0.3], [0.2, 0.5]]).unwrap();
    let unit = transition_operator(2, 0.0, 1.0, &x, |_| 1.0, 500, 1, &m, 0.01).unwrap();
    assert_eq!((unit.estimate, unit.std_error), (1.0, 0.0));
    let phi = |s: &MarkovState| (s.coeffs()[[0, 0]] + s.coeffs()[[1, 1]]).tanh();
    let same = transition_operator(2, 0.4, 0.4, &x, phi, 500, 1, &m, 0.01).unwrap();
    assert_eq!((same.estimate, same.std_error), (phi(&x), 0.0));

    let lin = transition_operator(2, 0.0, 0.7, &x, |s| s.coeffs()[[0, 0]], 10_000, 4, &m, 0.01).unwrap();
    let want = zeta(2, 0.7, 0.0, &x, &m).unwrap()[0];
    assert!((lin.estimate - want).abs() < 4.0 * lin.std_error);

    let ck = chapman_kolmogorov_check(2, 0.0, 0.5, 1.2, &x, phi, 10_000, 6, &m, 0.01).unwrap();
    assert!(ck.within_4se, "{ck:?}");
    let ck3 = chapman_kolmogorov_check(3, 0.0, 0.3, 0.9, &MarkovState::zeros(3, 2).unwrap(), |s| s.coeffs()[[2, 0]].cos(), 10_000, 9, &m, 0.01)
        .unwrap();
    assert!(ck3.within_4se, "{ck3:?}");
    assert!(chapman_kolmogorov_check(2, 0.0, 0.505, 1.2, &x, phi, 100, 6, &m, 0.01).is_err());
    assert!(transition_operator(2, 0.0, 1.0, &x, phi, 1, 1, &m, 0.01).is_err());
}

#[test]
fn solve_checks_shapes() {
    let m = one_mode(1.0, 1.0);
    let g = TimeGrid::with_step(0.0, 0.1, 11).unwrap();
    let noise = gen_noise(&m, g, 1, 1).unwrap();
    assert!(solve_initial_value(2, 0.0, &MarkovState::zeros(1, 1).unwrap(), g, &noise, &m).is_err());
    assert!(solve_initial_value(1, 0.5, &MarkovState::zeros(1, 1).unwrap(), g, &noise, &m).is_err());
    let other = gen_noise(&m, TimeGrid::with_step(0.0, 0.1, 12).unwrap(), 1, 1).unwrap();
    assert!(solve_initial_value(1, 0.0, &MarkovState::zeros(1, 1).unwrap(), g, &other, &m).is_err());
    assert!(MarkovState::new(array![[f64::NAN]]).is_err());
}
