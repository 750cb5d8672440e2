//! End-to-end acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL` line before asserting.

use std::process::Command;
use std::time::{Duration, Instant};

use fracevo::frac_calc::{bump, frac_derivative, frac_derivative_fourier, frac_integral, locality_table};
use fracevo::fqw::{
    coupled_mse, fqw_cov, kernel_cov_quadrature, limit_rate, mvn_constant, sample_fqw, FqwSpec,
};
use fracevo::markov::{
    chapman_kolmogorov_check, reconstruction_check, restart_check, transition_operator, MarkovState,
};
use fracevo::sampler::{empirical_cov, matern_cov, sample_stationary};
use fracevo::{NoiseSource, SpectralModel, TimeGrid};
use fracevo_oracle as oracle;
use ndarray::array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, ok: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} ({detail}; {:.1}s of {}s)", elapsed.as_secs_f64(), budget.as_secs());
    assert!(ok, "criterion {n}: {detail}");
    assert!(within, "criterion {n} exceeded its runtime budget");
}

const GAMMAS: [f64; 12] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0];
const DELTAS: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Published three-decimal values, rows by δ.
const PRINTED: [[f64; 12]; 3] = [
    [0.004, 0.007, 0.007, 0.0, 0.016, 0.042, 0.059, 0.0, 0.298, 1.078, 2.111, 0.0],
    [0.005, 0.009, 0.009, 0.0, 0.024, 0.065, 0.098, 0.0, 0.622, 2.568, 5.829, 0.0],
    [0.005, 0.009, 0.009, 0.0, 0.025, 0.068, 0.104, 0.0, 0.678, 2.850, 6.601, 0.0],
];

#[test]
fn criterion_1_locality_table() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracevo"))
        .args(["table1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,gamma,value"));
    let mut checked = 0;
    let mut worst = String::new();
    let mut ok = true;
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let i = DELTAS.iter().position(|d| *d == f[0]).unwrap();
        let j = GAMMAS.iter().position(|g| *g == f[1]).unwrap();
        let (got, want) = (f[2], PRINTED[i][j]);
        let good = if f[1].fract() == 0.0 {
            got.abs() <= 1e-6
        } else {
            (got - want).abs() <= f64::max(0.002, 0.02 * want)
        };
        if !good {
            ok = false;
            worst = format!("δ={} γ={}: {got} vs {want}", f[0], f[1]);
        }
        checked += 1;
    }
    let detail = if ok { format!("{checked}/36 entries within tolerance") } else { worst };
    report(1, ok && checked == 36, &detail, start.elapsed(), Duration::from_secs(120));
}

fn gamma_kernel(gamma: f64, lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        ((gamma - 1.0) * t.ln() - lambda * t - oracle::ln_gamma_stirling(gamma)).exp()
    }
}

#[test]
fn criterion_2_matern_triple_agreement() {
    let start = Instant::now();
    let (gammas, lambdas, lags, q) = ([0.75, 1.0, 1.6, 2.5], [0.5, 2.0], [0.0, 0.3, 1.0, 3.0], 1.0);
    let mut max_rel: f64 = 0.0;
    for &g in &gammas {
        for &l in &lambdas {
            for &h in &lags {
                let c = matern_cov(g, l, q, h).unwrap();
                let auto = q * oracle::integrate_to_inf(|s| gamma_kernel(g, l, s) * gamma_kernel(g, l, s + h), 0.0, 1e-12);
                max_rel = max_rel.max((c - auto).abs() / c);
            }
        }
    }
    let model = SpectralModel::new(lambdas.to_vec(), vec![q; 2]).unwrap();
    let grid = TimeGrid::with_step(0.0, 0.1, 31).unwrap();
    let mut max_z: f64 = 0.0;
    for (i, &g) in gammas.iter().enumerate() {
        let e = sample_stationary(&model, g, grid, 20_000, 100 + i as u64).unwrap();
        for &h in &lags {
            let est = empirical_cov(&e, 0, grid.index_of(h).unwrap()).unwrap();
            for (j, &l) in lambdas.iter().enumerate() {
                let z = (est[j].estimate - matern_cov(g, l, q, h).unwrap()).abs() / est[j].std_error;
                max_z = max_z.max(z);
            }
        }
    }
    let mut ou: f64 = 0.0;
    for &l in &[0.5, 1.0, 2.0, 3.7] {
        for &h in &[0.0, 0.3, -1.0, 2.5] {
            let want = (-l * f64::abs(h)).exp() * q / (2.0 * l);
            ou = ou.max((matern_cov(1.0, l, q, h).unwrap() - want).abs() / want);
        }
    }
    let ok = max_rel <= 1e-6 && max_z <= 4.0 && ou <= 1e-10;
    let detail = format!("quadrature rel {max_rel:.1e} ≤ 1e-6, Monte Carlo max z {max_z:.2} ≤ 4, OU rel {ou:.1e} ≤ 1e-10");
    report(2, ok, &detail, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_3_restart() {
    let start = Instant::now();
    let model = SpectralModel::new(vec![0.5, 2.0, 3.5], vec![1.0, 0.7, 0.4]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 3];
    for order in 1..=3usize {
        for _ in 0..3 {
            let t0: f64 = rng.random_range(-1.0..1.0);
            let grid = TimeGrid::with_step(t0, 1e-3, 2001).unwrap();
            let ks = rng.random_range(1..2000);
            let xi = MarkovState::new(ndarray::Array2::from_shape_fn((order, 3), |_| rng.random_range(-1.0..1.0))).unwrap();
            let noise = NoiseSource::new(&model, grid, 3, rng.random()).unwrap();
            let r = restart_check(order, t0, grid.node(ks), grid, &xi, &noise, &model).unwrap();
            worst[order - 1] = worst[order - 1].max(r.max_rel_residual);
        }
    }
    let ok = worst[0] <= 1e-12 && worst[1] <= 1e-8 && worst[2] <= 1e-8;
    let detail = format!("N=1 {:.1e} ≤ 1e-12, N=2 {:.1e} ≤ 1e-8, N=3 {:.1e} ≤ 1e-8", worst[0], worst[1], worst[2]);
    report(3, ok, &detail, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_4_reconstruction() {
    let start = Instant::now();
    let model = SpectralModel::new(vec![0.7, 1.9, 4.0], vec![1.0, 0.5, 2.0]).unwrap();
    let mut worst: f64 = 0.0;
    for order in 1..=2 {
        for horizon in [0.0, 0.4, 1.5] {
            worst = worst.max(reconstruction_check(order, horizon, &model, 0, 0).unwrap().max_rel_residual);
        }
    }
    report(4, worst <= 1e-6, &format!("max discrepancy {worst:.1e} ≤ 1e-6"), start.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_5_fractional_calculus() {
    let start = Instant::now();
    let grid = TimeGrid::with_step(-1.0, 2e-3, 6501).unwrap();
    let f = bump(grid, 0.0, 1.0).unwrap();
    let mut semigroup: f64 = 0.0;
    for &lam in &[0.5, 1.0] {
        for &a in &[0.3, 0.5, 1.2] {
            for &b in &[0.3, 0.5, 1.2] {
                let two = frac_integral(&frac_integral(&f, b, lam).unwrap(), a, lam).unwrap();
                let one = frac_integral(&f, a + b, lam).unwrap();
                semigroup = semigroup.max(two.sup_distance(&one).unwrap());
            }
        }
    }
    let grid = TimeGrid::with_step(-1.0, 1e-3, 11_001).unwrap();
    let f = bump(grid, 0.0, 1.0).unwrap();
    let mut inverse: f64 = 0.0;
    for &g in &[0.5, 1.0, 1.5, 2.75] {
        let back = frac_derivative(&frac_integral(&f, g, 1.0).unwrap(), g, 1.0).unwrap();
        inverse = inverse.max(back.sup_distance(&f).unwrap());
    }
    let mut routes: f64 = 0.0;
    for &g in &[0.25, 0.5, 0.75, 1.25] {
        let fd = frac_derivative(&f, g, 1.0).unwrap();
        let ft = frac_derivative_fourier(&f, g, 1.0).unwrap();
        routes = routes.max(fd.sup_distance(&ft).unwrap());
    }
    // the semigroup bound is also held to 1e-6·max|f|
    let ok = semigroup <= 1e-5 && semigroup <= 1e-6 * f.max_abs() && inverse <= 1e-5 && routes <= 1e-5;
    let detail = format!("semigroup {semigroup:.1e}, left inverse {inverse:.1e}, routes {routes:.1e}, all ≤ 1e-5");
    report(5, ok, &detail, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_6_fractional_wiener_law() {
    let start = Instant::now();
    let mut quad: f64 = 0.0;
    for h in [0.25, 0.5, 0.75] {
        for (s, t) in [(1.0, 1.0), (1.0, 2.0), (-1.0, 2.0)] {
            quad = quad.max((kernel_cov_quadrature(h, s, t).unwrap().value - fqw_cov(h, s, t).unwrap()).abs());
        }
    }
    let c_half = (mvn_constant(0.5).unwrap() - 1.0).abs();
    let model = SpectralModel::new(vec![1.0, 3.0], vec![1.0, 0.3]).unwrap();
    let grid = TimeGrid::new(-2.0, 2.0, 9).unwrap();
    let mut max_z: f64 = 0.0;
    for (i, h) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let e = sample_fqw(&FqwSpec::new(h, model.clone()).unwrap(), grid, 20_000, 40 + i as u64).unwrap();
        for k in [0, 3, 5, 8] {
            let t = grid.node(k);
            let est = empirical_cov(&e, k, k).unwrap();
            for (j, q) in model.qs().iter().enumerate() {
                max_z = max_z.max((est[j].estimate - q * t.abs().powf(2.0 * h)).abs() / est[j].std_error);
            }
        }
    }
    let ok = quad <= 1e-4 && c_half <= 1e-12 && max_z <= 4.0;
    let detail = format!("kernel quadrature {quad:.1e} ≤ 1e-4, |C_1/2 - 1| {c_half:.1e} ≤ 1e-12, variance max z {max_z:.2} ≤ 4");
    report(6, ok, &detail, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_7_limit_rate() {
    let start = Instant::now();
    let eps: Vec<f64> = (0..=7).map(|k| 2f64.powi(-k)).collect();
    let mut slopes = Vec::new();
    let mut ok = true;
    for gamma in [0.75, 1.0, 1.25] {
        let d = limit_rate(gamma, &eps, 0.25).unwrap();
        ok &= (d.fitted_slope - (3.0 - 2.0 * gamma)).abs() <= 0.15;
        slopes.push(format!("γ={gamma}: {:.3}", d.fitted_slope));
    }
    let model = SpectralModel::new(vec![1.0, 2.0], vec![1.5, 0.5]).unwrap();
    let grid = TimeGrid::with_step(-32.0, 1.0 / 128.0, 32 * 128 + 33).unwrap();
    let noise = NoiseSource::new(&model, grid, 20_000, 7).unwrap();
    let rep = coupled_mse(0.75, 0.25, &model, 0.25, &noise).unwrap();
    ok &= rep.z_trace <= 4.0;
    let detail = format!(
        "slopes {} within 0.15 of 3 - 2γ; Monte Carlo vs quadrature z = {:.2} with factor tr Q, {:.1} with (tr Q)^2; data supports {}",
        slopes.join(", "),
        rep.z_trace,
        rep.z_trace_squared,
        rep.supported_factor
    );
    report(7, ok && rep.supported_factor == "tr Q", &detail, start.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_8_transition_operator() {
    let start = Instant::now();
    let model = SpectralModel::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
    let x = MarkovState::new(array![[0.8, -0.4], [0.5, -0.15]]).unwrap();
    let phi = |s: &MarkovState| (s.coeffs()[[0, 0]] + s.coeffs()[[1, 0]]).tanh();
    let unit = transition_operator(2, 0.0, 0.8, &x, |_| 1.0, 10_000, 3, &model, 0.01).unwrap();
    let same = transition_operator(2, 0.3, 0.3, &x, phi, 10_000, 3, &model, 0.01).unwrap();
    let ck = chapman_kolmogorov_check(2, 0.0, 0.5, 1.2, &x, phi, 10_000, 5, &model, 0.01).unwrap();
    let ok = unit.estimate == 1.0
        && unit.std_error == 0.0
        && same.estimate == phi(&x)
        && same.std_error == 0.0
        && ck.z <= 4.0;
    let detail = format!(
        "T1 = {} (SE {}), T_ss φ(x) = φ(x) exactly: {}, composition z = {:.2} ≤ 4",
        unit.estimate,
        unit.std_error,
        same.estimate == phi(&x),
        ck.z
    );
    report(8, ok, &detail, start.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_9_markov_substitution() {
    // abstract weak-Markov statements are covered through their checkable
    // consequences: integer orders are local, fractional ones are not, and the
    // integer-order solver restarts exactly
    let start = Instant::now();
    let t = locality_table(&[1.0, 2.0, 3.0, 0.5, 1.5], &[1e-1], 1.0).unwrap();
    let integer = t.values[0][..3].iter().cloned().fold(0.0, f64::max);
    let fractional = t.values[0][3..].iter().cloned().fold(f64::INFINITY, f64::min);
    let model = SpectralModel::new(vec![1.0], vec![1.0]).unwrap();
    let grid = TimeGrid::with_step(0.0, 1e-2, 201).unwrap();
    let noise = NoiseSource::new(&model, grid, 2, 9).unwrap();
    let xi = MarkovState::new(array![[0.3], [-0.2]]).unwrap();
    let restart = restart_check(2, 0.0, 1.0, grid, &xi, &noise, &model).unwrap().max_rel_residual;
    let ok = integer <= 1e-6 && fractional > 1e-3 && restart <= 1e-8;
    let detail = format!(
        "documented substitution: integer-γ locality {integer:.1e} ≤ 1e-6, fractional-γ locality ≥ {fractional:.3} > 0, restart residual {restart:.1e}"
    );
    report(9, ok, &detail, start.elapsed(), Duration::from_secs(60));
}
