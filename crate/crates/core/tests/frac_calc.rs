use fracevo::frac_calc::*;
use fracevo::{GridFunction, SpectralModel, TimeGrid};

fn window(t0: f64, t1: f64, dt: f64) -> TimeGrid {
    let n = ((t1 - t0) / dt).round() as usize + 1;
    TimeGrid::with_step(t0, dt, n).unwrap()
}

/// C^∞ ramp from 0 on (-∞, a] to 1 on [b, ∞).
fn smooth_step(t: f64, a: f64, b: f64) -> f64 {
    let e = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let x = (t - a) / (b - a);
    e(x) / (e(x) + e(1.0 - x))
}


#[test]
fn plateau_reaches_laplace_value() {
    let g = window(0.0, 30.0, 5e-3);
    let f = GridFunction::from_fn(g, |t| smooth_step(t, 1.0, 3.0));
    let out = frac_integral(&f, 0.5, 4.0).unwrap();
    let k = g.index_of(25.0).unwrap();
    assert!((out.values[k] - 0.5).abs() < 1e-8, "{}", out.values[k]);
}

#[test]
fn order_one_matches_first_order_solve() {
    let dt = 1e-3;
    let g = window(-1.5, 8.0, dt);
    let f = bump(g, 0.0, 1.0).unwrap();
    let out = frac_integral(&f, 1.0, 1.0).unwrap();
    let ode = fracevo_oracle::first_order_solve(&f.values, dt, 1.0);
    // oracle is second order: O(dt²) ≈ 1e-7 budget
    let err = out.values.iter().zip(&ode).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-6, "{err}");
}

#[test]
fn zero_in_zero_out() {
    let g = window(0.0, 5.0, 1e-2);
    let z = GridFunction::zeros(g);
    assert_eq!(frac_integral(&z, 0.7, 1.0).unwrap().max_abs(), 0.0);
    assert_eq!(frac_derivative(&z, 1.3, 1.0).unwrap().max_abs(), 0.0);
}

#[test]
fn integral_matches_direct_quadrature_of_the_definition() {
    let dt = 2e-3;
    let g = window(-1.0, 4.0, dt);
    let f = bump(g, 0.0, 1.0).unwrap();
    for &(gam, lam) in &[(0.1, 1.0), (0.35, 0.5), (1.6, 2.0)] {
        let out = frac_integral(&f, gam, lam).unwrap();
        let lg = fracevo_oracle::ln_gamma_stirling(gam);
        for &t in &[-0.5, 0.0, 0.9, 2.5] {
            let k = g.index_of(t).unwrap();
            let want = fracevo_oracle::integrate(
                |r| {
                    let u = t - r;
                    let b = if u.abs() < 1.0 { (-1.0 / (1.0 - u * u)).exp() } else { 0.0 };
                    ((gam - 1.0) * r.ln() - lam * r - lg).exp() * b
                },
                0.0,
                t + 1.0,
                1e-12,
            );
            let e = (out.values[k] - want).abs();
            assert!(e < 1e-8 * f.max_abs(), "γ={gam} t={t}: {} vs {want}", out.values[k]);
        }
    }
}

#[test]
fn semigroup_law() {
    let g = window(-1.0, 12.0, 2e-3);
    let f = bump(g, 0.0, 1.0).unwrap();
    let set = [0.3, 0.5, 1.2];
    for &lam in &[0.5, 1.0] {
        for &a in &set {
            for &b in &set {
                let two = frac_integral(&frac_integral(&f, b, lam).unwrap(), a, lam).unwrap();
                let one = frac_integral(&f, a + b, lam).unwrap();
                let err = two.sup_distance(&one).unwrap();
                assert!(err <= 1e-6 * f.max_abs(), "λ={lam} γ1={a} γ2={b}: {err}");
            }
        }
    }
}

#[test]
fn derivative_is_left_inverse() {
    let g = window(-1.0, 10.0, 1e-3);
    let f = bump(g, 0.0, 1.0).unwrap();
    for &gam in &[0.5, 1.0, 1.5, 2.75] {
        let back = frac_derivative(&frac_integral(&f, gam, 1.0).unwrap(), gam, 1.0).unwrap();
        let err = back.sup_distance(&f).unwrap();
        assert!(err < 1e-5, "γ={gam}: {err}");
    }
}

#[test]
fn derivative_routes_agree() {
    let g = window(-1.0, 10.0, 1e-3);
    let f = bump(g, 0.0, 1.0).unwrap();
    for &gam in &[0.25, 0.5, 0.75, 1.25] {
        let fd = frac_derivative(&f, gam, 1.0).unwrap();
        let ft = frac_derivative_fourier(&f, gam, 1.0).unwrap();
        let err = fd.sup_distance(&ft).unwrap();
        assert!(err < 1e-5, "γ={gam}: {err}");
    }
}

#[test]
fn integer_orders_reduce_to_classical_operators() {
    let g = window(-1.0, 3.0, 1e-3);
    let f = bump(g, 0.0, 1.0).unwrap();
    assert_eq!(frac_derivative(&f, 0.0, 1.0).unwrap(), f);
    let d = frac_derivative(&f, 1.0, 0.0).unwrap();
    let exact = GridFunction::from_fn(d.grid, |t| {
        if t.abs() >= 1.0 {
            0.0
        } else {
            let s = 1.0 - t * t;
            -2.0 * t / (s * s) * (-1.0 / s).exp()
        }
    });
    assert!(d.sup_distance(&exact).unwrap() < 1e-8);
    let sym = frac_derivative_fourier(&f, 1.0, 1.0).unwrap();
    let shifted = frac_derivative(&f, 1.0, 1.0).unwrap();
    assert!(sym.sup_distance(&shifted).unwrap() < 1e-8);
}

#[test]
fn symbol_route_is_multiplicative() {
    let g = window(-1.0, 32.0, 2e-3);
    let f = bump(g, 0.0, 1.0).unwrap();
    let two = frac_derivative_fourier(&frac_derivative_fourier(&f, 0.4, 1.0).unwrap(), 0.9, 1.0).unwrap();
    let one = frac_derivative_fourier(&f, 1.3, 1.0).unwrap();
    let err = two.sup_distance(&one).unwrap();
    assert!(err < 1e-8, "{err}");
    let int = frac_derivative_fourier(&f, -0.6, 1.0).unwrap();
    let direct = frac_integral(&f, 0.6, 1.0).unwrap();
    let err = int.sup_distance(&direct).unwrap();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn integer_orders_are_local() {
    let g = window(-1.0, 45.0, 1e-3);
    let phi = bump(g, 0.0, 1.0).unwrap();
    let psi = bump(g, 2.1, 1.0).unwrap();
    for n in 1..=3 {
        assert!(locality_functional(n as f64, 1.0, &phi, &psi).unwrap() <= 1e-6);
    }
    assert!(locality_functional(1.5, 1.0, &phi, &psi).unwrap() > 1e-3);
    let other = window(-1.0, 45.0, 2e-3);
    assert!(locality_functional(1.5, 1.0, &phi, &bump(other, 2.1, 1.0).unwrap()).is_err());
}

#[test]
fn operators_are_linear() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let g = window(-1.0, 6.0, 2e-3);
    let f1 = bump(g, 0.0, 1.0).unwrap();
    let f2 = bump(g, 1.5, 0.7).unwrap();
    for _ in 0..3 {
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix = GridFunction::from_fn(g, |_| 0.0);
        let mix = GridFunction {
            values: f1.values.iter().zip(&f2.values).map(|(x, y)| a * x + b * y).collect(),
            ..mix
        };
        let lhs = frac_derivative(&mix, 0.7, 1.0).unwrap();
        let d1 = frac_derivative(&f1, 0.7, 1.0).unwrap();
        let d2 = frac_derivative(&f2, 0.7, 1.0).unwrap();
        let err = lhs
            .values
            .iter()
            .zip(d1.values.iter().zip(&d2.values))
            .fold(0.0f64, |m, (l, (x, y))| m.max((l - a * x - b * y).abs()));
        assert!(err < 1e-10, "{err}");
    }
}

#[test]
fn coloring_per_mode() {
    let g = window(0.0, 30.0, 5e-3);
    let plateau = GridFunction::from_fn(g, |t| smooth_step(t, 1.0, 3.0));
    let m = SpectralModel::new(vec![1.0, 4.0, 2.0], vec![1.0, 2.25, 0.0]).unwrap();
    let out = apply_coloring(&m, 0.5, &[plateau.clone(), plateau.clone(), plateau.clone()]).unwrap();
    let k = g.index_of(25.0).unwrap();
    assert!((out[0].values[k] - 1.0).abs() < 1e-8);
    assert!((out[1].values[k] - 0.75).abs() < 1e-8);
    assert_eq!(out[2].max_abs(), 0.0);
    assert!(apply_coloring(&m, 0.5, &[plateau]).is_err());

    let dt = 1e-3;
    let g = window(-1.5, 6.0, dt);
    let f = bump(g, 0.0, 1.0).unwrap();
    let one = SpectralModel::new(vec![1.0], vec![1.0]).unwrap();
    let out = apply_coloring(&one, 1.0, std::slice::from_ref(&f)).unwrap();
    let ode = fracevo_oracle::first_order_solve(&f.values, dt, 1.0);
    let err = out[0].values.iter().zip(&ode).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-6);
}

#[test]
fn table_spot_checks() {
    let t = locality_table(&[0.25, 1.5, 2.0, 2.75], &[1e-1, 1e-2], 1.0).unwrap();
    let close = |v: f64, want: f64| (v - want).abs() <= f64::max(0.002, 0.02 * want);
    assert!(close(t.values[0][0], 0.004), "{}", t.values[0][0]);
    assert!(close(t.values[1][1], 0.065), "{}", t.values[1][1]);
    assert!(t.values[0][2] <= 1e-6 && t.values[1][2] <= 1e-6);
    assert!(close(t.values[0][3], 2.111), "{}", t.values[0][3]);
    let csv = t.to_csv();
    assert!(csv.starts_with("delta,gamma,value\n"));
    assert_eq!(csv.lines().count(), 9);
}
