use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use fracevo::frac_calc::locality_table_with_step;
use fracevo::fqw::{
    coupled_mse, coupled_paths, fqw_cov, kernel_cov_quadrature, limit_rate, mvn_constant, sample_fqw,
    stationarity_and_selfsimilarity_check, FqwSpec,
};
use fracevo::markov::{chapman_kolmogorov_check, reconstruction_check, restart_check, transition_operator, MarkovState};
use fracevo::sampler::{
    empirical_cov, matern_cov, matern_cov_quadrature, sample_convolution, sample_stationary, ModeEnsemble,
};
use fracevo::spectral_model::{assumption_integral, QProfile};
use fracevo::{NoiseSource, SpectralModel, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{model_from, GridSpec, RunConfig};

/// What a command produced and whether its checks held.
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub passed: bool,
    pub summary: String,
}

fn write_text(dir: &Path, name: &str, text: &str, outputs: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text)?;
    outputs.push(p);
    Ok(())
}

fn write_json(dir: &Path, name: &str, v: &Value, outputs: &mut Vec<PathBuf>) -> Result<()> {
    write_text(dir, name, &(serde_json::to_string_pretty(v)? + "\n"), outputs)
}

fn node(grid: &TimeGrid, t: f64, what: &str) -> Result<usize> {
    grid.index_of(t).ok_or_else(|| anyhow!("{what} = {t} is not a grid node"))
}

const TABLE_GAMMAS: [f64; 12] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Table1Config {
    gammas: Vec<f64>,
    deltas: Vec<f64>,
    lambda: f64,
    step: f64,
    /// bound on entries at integer γ, where the functional vanishes
    integer_tol: f64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self { gammas: TABLE_GAMMAS.to_vec(), deltas: vec![1e-1, 1e-2, 1e-3], lambda: 1.0, step: 1e-3, integer_tol: 1e-6 }
    }
}

pub fn table1(cfg: &RunConfig) -> Result<Outcome> {
    let c: Table1Config = cfg.section("table1")?;
    let t = locality_table_with_step(&c.gammas, &c.deltas, c.lambda, c.step)?;
    let mut outputs = Vec::new();
    write_text(&cfg.out, "table1.csv", &t.to_csv(), &mut outputs)?;
    let mut summary = String::from("delta\\gamma");
    for g in &t.gammas {
        write!(summary, "\t{g}")?;
    }
    let mut worst: f64 = 0.0;
    for (i, d) in t.deltas.iter().enumerate() {
        write!(summary, "\n{d}")?;
        for (j, g) in t.gammas.iter().enumerate() {
            let v = t.values[i][j];
            write!(summary, "\t{v:.3}")?;
            if g.fract() == 0.0 {
                worst = worst.max(v);
            }
        }
    }
    write!(summary, "\nlargest integer-gamma entry: {worst:e} (bound {:e})", c.integer_tol)?;
    Ok(Outcome { outputs, passed: worst <= c.integer_tol, summary })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MaternConfig {
    gammas: Vec<f64>,
    lambdas: Vec<f64>,
    lags: Vec<f64>,
    q: f64,
    replicates: usize,
    step: f64,
    quad_rel_tol: f64,
    se_factor: f64,
    ou_tol: f64,
}

impl Default for MaternConfig {
    fn default() -> Self {
        Self {
            gammas: vec![0.75, 1.0, 1.6, 2.5],
            lambdas: vec![0.5, 2.0],
            lags: vec![0.0, 0.3, 1.0, 3.0],
            q: 1.0,
            replicates: 20_000,
            step: 0.1,
            quad_rel_tol: 1e-6,
            se_factor: 4.0,
            ou_tol: 1e-10,
        }
    }
}

pub fn matern(cfg: &RunConfig) -> Result<Outcome> {
    let c: MaternConfig = cfg.section("matern")?;
    if c.lags.is_empty() || c.lags.iter().any(|h| *h < 0.0) {
        bail!("lags must be a non-empty list of non-negative numbers");
    }
    let model = SpectralModel::new(c.lambdas.clone(), vec![c.q; c.lambdas.len()])?;
    let max_lag = c.lags.iter().cloned().fold(0.0, f64::max);
    let grid = TimeGrid::with_step(0.0, c.step, (max_lag / c.step).round() as usize + 1)?;
    let lag_nodes: Vec<usize> = c.lags.iter().map(|&h| node(&grid, h, "lag")).collect::<Result<_>>()?;
    let mut csv = String::from("gamma,lambda,h,closed_form,quadrature,rel_err,mc_estimate,mc_std_error,z\n");
    let (mut max_rel, mut max_z): (f64, f64) = (0.0, 0.0);
    for (gi, &gamma) in c.gammas.iter().enumerate() {
        let ens = sample_stationary(&model, gamma, grid, c.replicates, cfg.seed.wrapping_add(gi as u64))?;
        for (&h, &k) in c.lags.iter().zip(&lag_nodes) {
            let mc = empirical_cov(&ens, 0, k)?;
            for (j, &lambda) in c.lambdas.iter().enumerate() {
                let closed = matern_cov(gamma, lambda, c.q, h)?;
                let quad = matern_cov_quadrature(gamma, lambda, c.q, h)?.value;
                let rel = if closed == 0.0 { quad.abs() } else { (quad - closed).abs() / closed.abs() };
                let z = if mc[j].std_error > 0.0 { (mc[j].estimate - closed).abs() / mc[j].std_error } else { 0.0 };
                max_rel = max_rel.max(rel);
                max_z = max_z.max(z);
                writeln!(csv, "{gamma},{lambda},{h},{closed},{quad},{rel},{},{},{z}", mc[j].estimate, mc[j].std_error)?;
            }
        }
    }
    let mut ou_err: f64 = 0.0;
    for &lambda in &c.lambdas {
        for &h in &c.lags {
            let want = (-lambda * h).exp() * c.q / (2.0 * lambda);
            ou_err = ou_err.max((matern_cov(1.0, lambda, c.q, h)? - want).abs() / want);
        }
    }
    let passed = max_rel <= c.quad_rel_tol && max_z <= c.se_factor && ou_err <= c.ou_tol;
    let report = json!({
        "max_quadrature_rel_err": max_rel,
        "max_monte_carlo_z": max_z,
        "ou_max_rel_err": ou_err,
        "replicates": c.replicates,
        "passed": passed,
    });
    let mut outputs = Vec::new();
    write_text(&cfg.out, "matern.csv", &csv, &mut outputs)?;
    write_json(&cfg.out, "matern.json", &report, &mut outputs)?;
    let summary = format!(
        "closed form vs quadrature: max rel err {max_rel:e} (bound {:e})\nMonte Carlo: max z {max_z:.3} (bound {})\nOU case: max rel err {ou_err:e} (bound {:e})",
        c.quad_rel_tol, c.se_factor, c.ou_tol
    );
    Ok(Outcome { outputs, passed, summary })
}

fn default_model() -> fracevo::Result<SpectralModel> {
    SpectralModel::new(vec![1.0, 2.5, 4.0], vec![1.0, 1.0, 1.0])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SampleConfig {
    construction: String,
    gamma: f64,
    hurst: f64,
    model: Option<Value>,
    grid: GridSpec,
    replicates: usize,
    format: String,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            construction: "stationary".into(),
            gamma: 1.5,
            hurst: 0.75,
            model: None,
            grid: GridSpec { t0: 0.0, t1: 1.0, n: 101 },
            replicates: 4,
            format: "csv".into(),
        }
    }
}

pub fn sample(cfg: &RunConfig) -> Result<Outcome> {
    let c: SampleConfig = cfg.section("sample")?;
    let (csv, bin) = match c.format.as_str() {
        "csv" => (true, false),
        "binary" => (false, true),
        "both" => (true, true),
        other => bail!("format must be csv, binary or both, got {other:?}"),
    };
    let model = model_from(&c.model, default_model)?;
    let grid = c.grid.build()?;
    let ens: ModeEnsemble = match c.construction.as_str() {
        "stationary" => sample_stationary(&model, c.gamma, grid, c.replicates, cfg.seed)?,
        "convolution" => {
            let noise = NoiseSource::new(&model, grid, c.replicates, cfg.seed)?;
            sample_convolution(&model, c.gamma, grid.t0(), grid, &noise)?
        }
        "fqw" => sample_fqw(&FqwSpec::new(c.hurst, model)?, grid, c.replicates, cfg.seed)?,
        other => bail!("construction must be stationary, convolution or fqw, got {other:?}"),
    };
    let mut outputs = Vec::new();
    if csv {
        let p = cfg.out.join("ensemble.csv");
        ens.write_csv(BufWriter::new(File::create(&p)?))?;
        outputs.push(p);
    }
    if bin {
        let p = cfg.out.join("ensemble.bin");
        ens.write_binary(BufWriter::new(File::create(&p)?))?;
        outputs.push(p);
    }
    write_json(&cfg.out, "ensemble_meta.json", &serde_json::to_value(&ens.meta)?, &mut outputs)?;
    let summary = format!(
        "{} replicates x {} modes x {} nodes ({})",
        ens.replicates(),
        ens.modes(),
        grid.len(),
        c.construction
    );
    Ok(Outcome { outputs, passed: true, summary })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RestartConfig {
    orders: Vec<usize>,
    model: Option<Value>,
    step: f64,
    steps: usize,
    splits: usize,
    reconstruction_orders: Vec<usize>,
    horizon: f64,
    reconstruction_replicates: usize,
    tol_first_order: f64,
    tol_higher_order: f64,
    tol_reconstruction: f64,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 3],
            model: None,
            step: 1e-3,
            steps: 1500,
            splits: 3,
            reconstruction_orders: vec![1, 2],
            horizon: 0.5,
            reconstruction_replicates: 0,
            tol_first_order: 1e-12,
            tol_higher_order: 1e-8,
            tol_reconstruction: 1e-6,
        }
    }
}

pub fn restart(cfg: &RunConfig) -> Result<Outcome> {
    let c: RestartConfig = cfg.section("restart")?;
    if c.steps < 2 {
        bail!("steps must be at least 2");
    }
    let model = model_from(&c.model, || SpectralModel::new(vec![0.5, 2.0, 3.5], vec![1.0; 3]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut passed = true;
    let mut restarts = Vec::new();
    let mut summary = String::new();
    for &order in &c.orders {
        let bound = if order == 1 { c.tol_first_order } else { c.tol_higher_order };
        for split in 0..c.splits {
            let t0: f64 = rng.random_range(-1.0..1.0);
            let grid = TimeGrid::with_step(t0, c.step, c.steps + 1)?;
            let ks = rng.random_range(1..c.steps);
            let coeffs = ndarray::Array2::from_shape_fn((order, model.modes()), |_| rng.random_range(-1.0..1.0));
            let state = MarkovState::new(coeffs)?;
            let noise = NoiseSource::new(&model, grid, 2, rng.random())?;
            let rep = restart_check(order, t0, grid.node(ks), grid, &state, &noise, &model)?;
            let ok = rep.max_rel_residual <= bound;
            passed &= ok;
            writeln!(summary, "restart N={order} split {split}: residual {:e} (bound {bound:e})", rep.max_rel_residual)?;
            restarts.push(json!({
                "N": order, "split": split, "t0": t0, "s": grid.node(ks),
                "report": rep, "bound": bound, "passed": ok,
            }));
        }
    }
    let mut recon = Vec::new();
    for &order in &c.reconstruction_orders {
        let rep = reconstruction_check(order, c.horizon, &model, c.reconstruction_replicates, cfg.seed)?;
        let ok = rep.max_rel_residual <= c.tol_reconstruction;
        passed &= ok;
        writeln!(
            summary,
            "reconstruction N={order}: discrepancy {:e} (bound {:e})",
            rep.max_rel_residual, c.tol_reconstruction
        )?;
        recon.push(json!({ "report": rep, "bound": c.tol_reconstruction, "passed": ok }));
    }
    let mut outputs = Vec::new();
    let report = json!({ "restart": restarts, "reconstruction": recon, "passed": passed });
    write_json(&cfg.out, "restart.json", &report, &mut outputs)?;
    Ok(Outcome { outputs, passed, summary: summary.trim_end().to_string() })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TransitionConfig {
    order: usize,
    model: Option<Value>,
    s: f64,
    t: f64,
    u: f64,
    /// `N × J` starting coefficients
    state: Option<Vec<Vec<f64>>>,
    functional: String,
    replicates: usize,
    step: f64,
    se_factor: f64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        Self {
            order: 2,
            model: None,
            s: 0.0,
            t: 0.5,
            u: 1.2,
            state: None,
            functional: "tanh".into(),
            replicates: 10_000,
            step: 0.01,
            se_factor: 4.0,
        }
    }
}

type Functional = fn(&MarkovState) -> f64;

fn functional_named(name: &str) -> Result<Functional> {
    Ok(match name {
        "one" => |_| 1.0,
        "first" => |x| x.coeffs()[[0, 0]],
        "tanh" => |x| x.coeffs().column(0).sum().tanh(),
        "cos" => |x| x.coeffs()[[x.order() - 1, 0]].cos(),
        other => bail!("functional must be one of one, first, tanh, cos; got {other:?}"),
    })
}

pub fn transition(cfg: &RunConfig) -> Result<Outcome> {
    let c: TransitionConfig = cfg.section("transition")?;
    let model = model_from(&c.model, || SpectralModel::new(vec![1.0, 2.0], vec![1.0, 0.5]))?;
    let phi = functional_named(&c.functional)?;
    let (n, modes) = (c.order, model.modes());
    let coeffs = match &c.state {
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != modes) {
                bail!("state must be {n} rows of {modes} coefficients");
            }
            ndarray::Array2::from_shape_fn((n, modes), |(i, j)| rows[i][j])
        }
        None => ndarray::Array2::from_shape_fn((n, modes), |(i, j)| {
            (0.8 - 0.3 * i as f64) * if j % 2 == 0 { 1.0 } else { -0.5 }
        }),
    };
    let x = MarkovState::new(coeffs)?;
    let unit = transition_operator(n, c.s, c.t, &x, |_| 1.0, c.replicates, cfg.seed, &model, c.step)?;
    let same = transition_operator(n, c.s, c.s, &x, phi, c.replicates, cfg.seed, &model, c.step)?;
    let ck = chapman_kolmogorov_check(n, c.s, c.t, c.u, &x, phi, c.replicates, cfg.seed, &model, c.step)?;
    let unit_ok = unit.estimate == 1.0 && unit.std_error == 0.0;
    let same_ok = same.estimate == phi(&x) && same.std_error == 0.0;
    let ck_ok = ck.z <= c.se_factor;
    let passed = unit_ok && same_ok && ck_ok;
    let report = json!({
        "N": n,
        "functional": c.functional,
        "unit": unit,
        "identity": { "estimate": same, "phi_x": phi(&x) },
        "chapman_kolmogorov": ck,
        "se_factor": c.se_factor,
        "passed": passed,
    });
    let mut outputs = Vec::new();
    write_json(&cfg.out, "transition.json", &report, &mut outputs)?;
    let summary = format!(
        "T 1 = {} (SE {}), T_ss phi(x) - phi(x) = {:e}\nChapman-Kolmogorov: direct {:.6} composed {:.6} z = {:.3} (bound {})",
        unit.estimate,
        unit.std_error,
        same.estimate - phi(&x),
        ck.direct.estimate,
        ck.composed.estimate,
        ck.z,
        c.se_factor
    );
    Ok(Outcome { outputs, passed, summary })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FbmConfig {
    hursts: Vec<f64>,
    pairs: Vec<(f64, f64)>,
    model: Option<Value>,
    grid: GridSpec,
    times: Vec<f64>,
    replicates: usize,
    quad_tol: f64,
    se_factor: f64,
}

impl Default for FbmConfig {
    fn default() -> Self {
        Self {
            hursts: vec![0.25, 0.5, 0.75],
            pairs: vec![(1.0, 1.0), (1.0, 2.0), (-1.0, 2.0)],
            model: None,
            grid: GridSpec { t0: -2.0, t1: 2.0, n: 17 },
            times: vec![-2.0, -0.5, 1.0, 2.0],
            replicates: 20_000,
            quad_tol: 1e-4,
            se_factor: 4.0,
        }
    }
}

pub fn fbm(cfg: &RunConfig) -> Result<Outcome> {
    let c: FbmConfig = cfg.section("fbm")?;
    let model = model_from(&c.model, || SpectralModel::new(vec![1.0, 2.0], vec![1.0, 0.5]))?;
    let grid = c.grid.build()?;
    let nodes: Vec<usize> = c.times.iter().map(|&t| node(&grid, t, "time")).collect::<Result<_>>()?;
    let mut csv = String::from("hurst,s,t,closed_form,quadrature,abs_err\n");
    let (mut max_quad, mut max_z): (f64, f64) = (0.0, 0.0);
    let mut variance = Vec::new();
    let mut selfsim = Vec::new();
    let mut selfsim_ok = true;
    for (hi, &h) in c.hursts.iter().enumerate() {
        for &(s, t) in &c.pairs {
            let closed = fqw_cov(h, s, t)?;
            let quad = kernel_cov_quadrature(h, s, t)?.value;
            let err = (quad - closed).abs();
            max_quad = max_quad.max(err);
            writeln!(csv, "{h},{s},{t},{closed},{quad},{err}")?;
        }
        let rep = stationarity_and_selfsimilarity_check(h)?;
        selfsim_ok &= rep.passed;
        selfsim.push(rep);
        let ens = sample_fqw(&FqwSpec::new(h, model.clone())?, grid, c.replicates, cfg.seed.wrapping_add(hi as u64))?;
        for (&t, &k) in c.times.iter().zip(&nodes) {
            let est = empirical_cov(&ens, k, k)?;
            for (j, &q) in model.qs().iter().enumerate() {
                let want = q * t.abs().powf(2.0 * h);
                let z = if est[j].std_error > 0.0 { (est[j].estimate - want).abs() / est[j].std_error } else { 0.0 };
                max_z = max_z.max(z);
                variance.push(json!({ "hurst": h, "t": t, "mode": j, "estimate": est[j], "want": want, "z": z }));
            }
        }
    }
    let c_half = mvn_constant(0.5)?;
    let passed = max_quad <= c.quad_tol && max_z <= c.se_factor && (c_half - 1.0).abs() <= 1e-12 && selfsim_ok;
    let report = json!({
        "mvn_constant_half": c_half,
        "max_quadrature_abs_err": max_quad,
        "max_variance_z": max_z,
        "self_similarity": selfsim,
        "variance": variance,
        "passed": passed,
    });
    let mut outputs = Vec::new();
    write_text(&cfg.out, "fbm_cov.csv", &csv, &mut outputs)?;
    write_json(&cfg.out, "fbm.json", &report, &mut outputs)?;
    let summary = format!(
        "C_1/2 = {c_half}\nkernel quadrature vs closed form: max abs err {max_quad:e} (bound {:e})\nsampled variance: max z {max_z:.3} (bound {})\nself-similarity and stationary increments: {}",
        c.quad_tol,
        c.se_factor,
        if selfsim_ok { "ok" } else { "violated" }
    );
    Ok(Outcome { outputs, passed, summary })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LimitConfig {
    gamma: f64,
    epsilons: Vec<f64>,
    t: f64,
    slope_tol: f64,
    coupled: bool,
    coupled_epsilon: f64,
    model: Option<Value>,
    window_start: f64,
    step: f64,
    replicates: usize,
    export_replicates: usize,
    se_factor: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            epsilons: (0..=7).map(|k| 2f64.powi(-k)).collect(),
            t: 0.25,
            slope_tol: 0.15,
            coupled: true,
            coupled_epsilon: 0.25,
            model: None,
            window_start: -32.0,
            step: 1.0 / 128.0,
            replicates: 20_000,
            export_replicates: 2,
            se_factor: 4.0,
        }
    }
}

pub fn limit(cfg: &RunConfig) -> Result<Outcome> {
    let c: LimitConfig = cfg.section("limit")?;
    let diag = limit_rate(c.gamma, &c.epsilons, c.t)?;
    let slope_ok = (diag.fitted_slope - diag.expected_slope).abs() <= c.slope_tol;
    let mut report = serde_json::to_value(&diag)?;
    let mut outputs = Vec::new();
    let mut summary = format!(
        "gamma {}: fitted slope {:.4}, expected {:.4} (tolerance {})",
        c.gamma, diag.fitted_slope, diag.expected_slope, c.slope_tol
    );
    let mut passed = slope_ok;
    if c.coupled {
        if !(c.window_start < 0.0 && c.t >= 0.0) {
            bail!("coupled check needs window_start < 0 and t >= 0");
        }
        let model = model_from(&c.model, || SpectralModel::new(vec![1.0, 2.0], vec![1.5, 0.5]))?;
        let n = ((c.t - c.window_start) / c.step).round() as usize + 1;
        let grid = TimeGrid::with_step(c.window_start, c.step, n)?;
        let noise = NoiseSource::new(&model, grid, c.replicates, cfg.seed)?;
        let rep = coupled_mse(c.gamma, c.coupled_epsilon, &model, c.t, &noise)?;
        let ok = rep.z_trace <= c.se_factor;
        passed &= ok;
        write!(
            summary,
            "\ncoupled Monte Carlo at epsilon {}: {:.6e} +- {:.2e}; quadrature x tr Q = {:.6e} (z {:.2}), x (tr Q)^2 = {:.6e} (z {:.2}); data support: {}",
            c.coupled_epsilon,
            rep.monte_carlo.estimate,
            rep.monte_carlo.std_error,
            rep.quadrature_window * rep.trace_q,
            rep.z_trace,
            rep.quadrature_window * rep.trace_q * rep.trace_q,
            rep.z_trace_squared,
            rep.supported_factor
        )?;
        report["coupled"] = serde_json::to_value(&rep)?;
        if c.export_replicates > 0 {
            let noise = NoiseSource::new(&model, grid, c.export_replicates, cfg.seed)?;
            let (w, z) = coupled_paths(c.gamma, c.coupled_epsilon, &model, grid, &noise)?;
            let times: Vec<f64> = grid.nodes().collect();
            let mut csv = String::from("replicate,mode,t,wiener,limit\n");
            for ((r, j, k), a) in w.paths.indexed_iter() {
                writeln!(csv, "{r},{j},{},{a},{}", times[k], z.paths[[r, j, k]])?;
            }
            write_text(&cfg.out, "coupled_paths.csv", &csv, &mut outputs)?;
        }
    }
    report["passed"] = passed.into();
    write_json(&cfg.out, "limit.json", &report, &mut outputs)?;
    Ok(Outcome { outputs, passed, summary })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ValidateConfig {
    gamma0: f64,
    model: Option<Value>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { gamma0: 1.0, model: None }
    }
}

pub fn validate(cfg: &RunConfig) -> Result<Outcome> {
    let c: ValidateConfig = cfg.section("validate")?;
    let model = model_from(&c.model, || {
        SpectralModel::build_whittle_matern(1.0, 1.0, std::f64::consts::PI, 8, QProfile::Constant(1.0))
    })?;
    let rep = assumption_integral(&model, c.gamma0)?;
    let mut outputs = Vec::new();
    write_json(&cfg.out, "validate.json", &serde_json::to_value(&rep)?, &mut outputs)?;
    let summary = if rep.divergent {
        format!(
            "the integral of t^(2 gamma0 - 2) q_j e^(-2 lambda_j t) diverges at t = 0 for gamma0 = {} <= 1/2",
            c.gamma0
        )
    } else {
        format!("assumption integral for gamma0 = {}: {}", c.gamma0, rep.total.unwrap_or(f64::NAN))
    };
    Ok(Outcome { outputs, passed: rep.satisfied && !rep.divergent, summary })
}
