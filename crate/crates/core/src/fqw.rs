//! Fractional `Q`-Wiener process (Mandelbrot–Van Ness form) and the `ε → 0`
//! limit that connects it to `Z_γ` with `A = ε·Id`, `H = γ - 1/2`.
//!
//! Scaling convention: the kernel is divided by `√C_H`, which is what makes
//! `Var W(1) = Q`. Every derived quantity (the limit error, the coupled paths)
//! uses the same factor, so the limit error carries one factor `tr Q`.

use nalgebra::DMatrix;
use ndarray::Array3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{IncrementSource, Purpose};
use crate::quad::{tanh_sinh, tanh_sinh_dist, Estimate};
use crate::sampler::{
    convolution_weights, draw_with_factor, factor_with_jitter, mean_and_se, Construction, EnsembleMeta, MeanEstimate,
    ModeEnsemble,
};
use crate::specfun::{beta, gamma_q, ln_gamma};
use crate::spectral_model::SpectralModel;

fn check_hurst(func: &'static str, h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(domain(func, format!("Hurst parameter {h} outside (0, 1)")));
    }
    Ok(())
}

fn check_limit_gamma(func: &'static str, gamma: f64) -> Result<()> {
    if !(gamma > 0.5 && gamma < 1.5) {
        return Err(domain(func, format!("gamma = {gamma} outside (1/2, 3/2)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FqwSpec {
    hurst: f64,
    model: SpectralModel,
}

impl FqwSpec {
    pub fn new(hurst: f64, model: SpectralModel) -> Result<Self> {
        check_hurst("FqwSpec::new", hurst)?;
        Ok(Self { hurst, model })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }
}

/// `C_H = ∫ |(1-r)₊^{H-1/2} - (-r)₊^{H-1/2}|² dr = (3-2H)/(4H) · B(2-2H, H+1/2)`.
pub fn mvn_constant(h: f64) -> Result<f64> {
    check_hurst("mvn_constant", h)?;
    Ok((3.0 - 2.0 * h) / (4.0 * h) * beta(2.0 - 2.0 * h, h + 0.5)?)
}

fn pos_pow(x: f64, a: f64) -> f64 {
    if x > 0.0 {
        x.powf(a)
    } else {
        0.0
    }
}

/// `(t-r)₊^a - (-r)₊^a` from the exact distances `t - r` and `-r`.
fn kernel_diff(t_minus_r: f64, minus_r: f64, a: f64) -> f64 {
    if t_minus_r > 0.0 && minus_r > 0.0 {
        minus_r.powf(a) * (a * (t_minus_r / minus_r).ln()).exp_m1()
    } else {
        pos_pow(t_minus_r, a) - pos_pow(minus_r, a)
    }
}

/// `K_H(t, r) = ((t-r)₊^{H-1/2} - (-r)₊^{H-1/2}) / √C_H`.
pub fn mvn_kernel(h: f64, t: f64, r: f64) -> Result<f64> {
    let c = mvn_constant(h)?;
    Ok(kernel_diff(t - r, -r, h - 0.5) / c.sqrt())
}

/// `½(|t|^{2H} + |s|^{2H} - |t-s|^{2H})`, per unit `q`.
pub fn fqw_cov(h: f64, s: f64, t: f64) -> Result<f64> {
    check_hurst("fqw_cov", h)?;
    let p = 2.0 * h;
    Ok(0.5 * (t.abs().powf(p) + s.abs().powf(p) - (t - s).abs().powf(p)))
}

/// `∫_M^∞ ((m+s)^a - m^a)((m+t)^a - m^a) dm` from the binomial series in `1/m`;
/// needs `M ≫ max(|s|, |t|)`.
fn far_tail(a: f64, s: f64, t: f64, m: f64) -> f64 {
    const ORDERS: usize = 30;
    let mut cs = [0.0; ORDERS + 1];
    let mut ct = [0.0; ORDERS + 1];
    let mut binom = 1.0;
    let (mut ps, mut pt) = (1.0, 1.0);
    for k in 1..=ORDERS {
        binom *= (a - (k - 1) as f64) / k as f64;
        ps *= s;
        pt *= t;
        cs[k] = binom * ps;
        ct[k] = binom * pt;
    }
    let mut total = 0.0;
    for n in 2..=ORDERS {
        let c: f64 = (1..n).map(|k| cs[k] * ct[n - k]).sum();
        total += c * m.powf(2.0 * a + 1.0 - n as f64) / (n as f64 - 2.0 * a - 1.0);
    }
    total
}

/// `∫_ℝ K_H(s, r) K_H(t, r) dr` with panels split at `{0, s, t}`, geometric
/// panels into the left tail and a series beyond `r = -M`.
pub fn kernel_cov_quadrature(h: f64, s: f64, t: f64) -> Result<Estimate> {
    let c = mvn_constant(h)?;
    let a = h - 0.5;
    let mut pts = vec![0.0, s, t];
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    // p - r from a base point b with r = b + off, exact when p == b
    let dist = |p: f64, b: f64, off: f64| if p == b { -off } else { (p - b) - off };
    let prod = |sr: f64, tr: f64, mr: f64| kernel_diff(sr, mr, a) * kernel_diff(tr, mr, a);
    let (tol_abs, tol_rel) = (1e-13, 1e-12);
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panel = |l: f64, r: f64| -> Result<()> {
        let e = tanh_sinh_dist(
            |_, dl, dr| {
                let pick = |p: f64| if p == r { dr } else { dist(p, l, dl) };
                prod(pick(s), pick(t), pick(0.0))
            },
            l,
            r,
            tol_abs,
            tol_rel,
        )?;
        value += e.value;
        err += e.abs_err;
        Ok(())
    };
    for w in pts.windows(2) {
        panel(w[0], w[1])?;
    }
    let lo = pts[0];
    let far = 1e3 * (1.0 + s.abs().max(t.abs()));
    let mut width = 1.0;
    let mut right = lo;
    while right > -far {
        let left = (right - width).max(-far);
        panel(left, right)?;
        right = left;
        width *= 2.0;
    }
    value += far_tail(a, s, t, far);
    if err > 1e-6 {
        return Err(Error::Quadrature { err, tol: 1e-6 });
    }
    Ok(Estimate { value: value / c, abs_err: err / c })
}

/// Exact-in-law sampling from `q_j · fqw_cov(H, t_k, t_l)`; nodes at `t = 0` stay 0.
pub fn sample_fqw(spec: &FqwSpec, grid: TimeGrid, replicates: usize, seed: u64) -> Result<ModeEnsemble> {
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be at least 1".into()));
    }
    let h = spec.hurst;
    let zero = grid.index_of(0.0);
    let live: Vec<usize> = (0..grid.len()).filter(|k| Some(*k) != zero).collect();
    let times: Vec<f64> = live.iter().map(|&k| grid.node(k)).collect();
    let m = live.len();
    let mut base = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let v = fqw_cov(h, times[a], times[b])?;
            base[(a, b)] = v;
            base[(b, a)] = v;
        }
    }
    let scale = (0..m).map(|i| base[(i, i)]).fold(0.0, f64::max);
    let modes = spec.model.modes();
    let mut paths = Array3::zeros((replicates, modes, grid.len()));
    let mut jitter = vec![0.0; modes];
    let mut unit = Array3::zeros((replicates, modes, m));
    if m > 0 {
        let (l, jit) = factor_with_jitter(base, scale, 0)?;
        for (j, &q) in spec.model.qs().iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            jitter[j] = jit * q;
            draw_with_factor(&l, replicates, seed, Purpose::Fractional, j, &mut unit);
        }
    }
    for r in 0..replicates {
        for (j, &q) in spec.model.qs().iter().enumerate() {
            let sq = q.sqrt();
            for (i, &k) in live.iter().enumerate() {
                paths[[r, j, k]] = sq * unit[[r, j, i]];
            }
        }
    }
    ModeEnsemble::new(
        grid,
        paths,
        EnsembleMeta { gamma: h + 0.5, model: spec.model.clone(), construction: Construction::Fqw { hurst: h }, jitter },
    )
}

/// `s^{γ-1}(1 - e^{-εs})` difference at lags `|t| + s` and `s`, without cancellation.
fn limit_kernel_gap(gamma: f64, eps: f64, t: f64, s: f64) -> f64 {
    let g1 = gamma - 1.0;
    let a = (g1 * (t / s).ln_1p()).exp_m1() * -(-eps * (t + s)).exp_m1();
    let b = (-eps * s).exp() * -(-eps * t).exp_m1();
    s.powf(g1) * (a + b)
}

fn limit_parts(gamma: f64, eps: f64, t: f64, horizon: Option<f64>) -> Result<(f64, f64)> {
    check_limit_gamma("limit_mse", gamma)?;
    if !(eps > 0.0 && eps.is_finite()) || !t.is_finite() {
        return Err(domain("limit_mse", format!("need epsilon > 0 and finite t, got {eps}, {t}")));
    }
    let t = t.abs();
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let i1 = tanh_sinh(
        |s| s.powf(2.0 * gamma - 2.0) * (-eps * s).exp_m1().powi(2),
        0.0,
        t,
        0.0,
        1e-13,
    )?
    .value;
    let g = |s: f64| limit_kernel_gap(gamma, eps, t, s).powi(2);
    let tail_bound = |s_max: f64| -> Result<f64> {
        let e = 2.0 * gamma - 1.0;
        let first = 2.0 * (gamma - 1.0).powi(2) * t * t * s_max.powf(2.0 * gamma - 3.0) / (3.0 - 2.0 * gamma);
        let second = 2.0 * (eps * t).powi(2)
            * (ln_gamma(e)? - e * (2.0 * eps).ln()).exp()
            * gamma_q(e, 2.0 * eps * s_max)?;
        Ok(first + second)
    };
    let mut i2 = tanh_sinh(g, 0.0, t, 0.0, 1e-13)?.value;
    let mut lo = t;
    loop {
        let hi = match horizon {
            Some(hz) => (2.0 * lo).min(hz),
            None => 2.0 * lo,
        };
        if hi <= lo {
            break;
        }
        i2 += tanh_sinh(g, lo, hi, 0.0, 1e-13)?.value;
        lo = hi;
        if horizon.is_none() && tail_bound(lo)? < 1e-10 {
            break;
        }
        if lo > 1e300 {
            return Err(Error::Quadrature { err: tail_bound(lo)?, tol: 1e-10 });
        }
    }
    Ok((i1, i2))
}

/// `E|Ŵ_{γ-1/2}(t) - Z̄_γ^ε(t)|²` per unit `tr Q`: `(I₁ + I₂) / C_{γ-1/2}`.
pub fn limit_mse(gamma: f64, epsilon: f64, t: f64) -> Result<f64> {
    let (i1, i2) = limit_parts(gamma, epsilon, t, None)?;
    Ok((i1 + i2) / mvn_constant(gamma - 0.5)?)
}

/// As [`limit_mse`] with the noise restricted to `s ≥ -horizon`, which is what
/// coupled paths on a grid starting at `-horizon` see.
pub fn limit_mse_window(gamma: f64, epsilon: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) || t < 0.0 {
        return Err(Error::InvalidInput("window needs horizon > 0 and t ≥ 0".into()));
    }
    let (i1, i2) = limit_parts(gamma, epsilon, t, Some(horizon))?;
    Ok((i1 + i2) / mvn_constant(gamma - 0.5)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitDiagnostics {
    pub gamma: f64,
    pub epsilons: Vec<f64>,
    pub t: f64,
    pub mse: Vec<f64>,
    #[serde(rename = "slope")]
    pub fitted_slope: f64,
    /// `3 - 2γ`
    pub expected_slope: f64,
}

/// Least-squares slope of `ln mse` against `ln ε`.
pub fn limit_rate(gamma: f64, epsilons: &[f64], t: f64) -> Result<LimitDiagnostics> {
    if epsilons.len() < 4 {
        return Err(Error::InvalidInput("need at least 4 epsilons".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) || !(epsilons[epsilons.len() - 1] > 0.0) {
        return Err(Error::InvalidInput("epsilons must be positive and strictly decreasing".into()));
    }
    if epsilons[0] / epsilons[epsilons.len() - 1] < 100.0 {
        return Err(Error::InvalidInput("epsilons must span at least two decades".into()));
    }
    let mse: Vec<f64> = epsilons.par_iter().map(|&e| limit_mse(gamma, e, t)).collect::<Result<_>>()?;
    if mse.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidInput(format!("degenerate fit: non-positive error at t = {t}")));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = mse.iter().map(|m| m.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(LimitDiagnostics {
        gamma,
        epsilons: epsilons.to_vec(),
        t,
        mse,
        fitted_slope: sxy / sxx,
        expected_slope: 3.0 - 2.0 * gamma,
    })
}

/// Per-cell weights of `Ŵ` and `Z̄` (already divided by `√C`): entry `m - 1`
/// loads the increment whose cell ends `m` steps before the evaluation node.
struct CoupledWeights {
    wiener: Vec<f64>,
    limit: Vec<f64>,
}

impl CoupledWeights {
    fn new(gamma: f64, eps: f64, dt: f64, len: usize) -> Result<Self> {
        let c = mvn_constant(gamma - 0.5)?.sqrt();
        let scale = dt.powf(gamma - 1.0) / (gamma * c);
        let wiener = (1..=len)
            .map(|m| scale * ((m as f64).powf(gamma) - ((m - 1) as f64).powf(gamma)))
            .collect();
        let lg = ln_gamma(gamma)?.exp();
        let limit = convolution_weights(gamma, eps, dt, len)?.into_iter().map(|w| w * lg / c).collect();
        Ok(Self { wiener, limit })
    }

    /// `(Ŵ(t_k), Z̄(t_k))` given increments and the index of `t = 0`.
    fn eval(&self, dw: &[f64], k: usize, k0: usize) -> (f64, f64) {
        let at = |w: &[f64], k: usize| -> f64 { (0..k).map(|c| w[k - c - 1] * dw[c]).sum() };
        (at(&self.wiener, k) - at(&self.wiener, k0), at(&self.limit, k) - at(&self.limit, k0))
    }
}

fn zero_index(grid: &TimeGrid) -> Result<usize> {
    grid.index_of(0.0)
        .ok_or_else(|| Error::InvalidInput("coupled paths need t = 0 as a grid node".into()))
}

/// `Ŵ_{γ-1/2}` and `Z̄_γ^ε` on `grid` from the same increments; noise before
/// `grid.t0` is absent from both.
pub fn coupled_paths<S: IncrementSource + ?Sized>(
    gamma: f64,
    epsilon: f64,
    model: &SpectralModel,
    grid: TimeGrid,
    noise: &S,
) -> Result<(ModeEnsemble, ModeEnsemble)> {
    check_limit_gamma("coupled_paths", gamma)?;
    if !(epsilon > 0.0) {
        return Err(domain("coupled_paths", format!("epsilon = {epsilon} must be positive")));
    }
    if !noise.grid().same_as(&grid) || noise.modes() != model.modes() {
        return Err(Error::Mismatch("noise does not match grid or model".into()));
    }
    let k0 = zero_index(&grid)?;
    let n = grid.len();
    let w = CoupledWeights::new(gamma, epsilon, grid.dt(), n - 1)?;
    let (reps, modes) = (noise.replicates(), model.modes());
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..reps * modes)
        .into_par_iter()
        .map(|idx| {
            let mut dw = vec![0.0; n - 1];
            noise.fill(idx / modes, idx % modes, &mut dw);
            let y_w = crate::conv::causal_convolve(&w.wiener, &dw);
            let y_l = crate::conv::causal_convolve(&w.limit, &dw);
            let at = |y: &[f64], k: usize| if k == 0 { 0.0 } else { y[k - 1] };
            let a = (0..n).map(|k| at(&y_w, k) - at(&y_w, k0)).collect();
            let b = (0..n).map(|k| at(&y_l, k) - at(&y_l, k0)).collect();
            (a, b)
        })
        .collect();
    let mut pw = Array3::zeros((reps, modes, n));
    let mut pz = Array3::zeros((reps, modes, n));
    for (idx, (a, b)) in rows.into_iter().enumerate() {
        let (r, j) = (idx / modes, idx % modes);
        for k in 0..n {
            pw[[r, j, k]] = a[k];
            pz[[r, j, k]] = b[k];
        }
    }
    let meta = |c| EnsembleMeta { gamma, model: model.clone(), construction: c, jitter: vec![0.0; modes] };
    Ok((
        ModeEnsemble::new(grid, pw, meta(Construction::CoupledWiener { hurst: gamma - 0.5 }))?,
        ModeEnsemble::new(grid, pz, meta(Construction::CoupledLimit { epsilon }))?,
    ))
}

/// Monte Carlo `E‖Ŵ(t) - Z̄^ε(t)‖²_U` against the windowed quadrature value
/// scaled by `tr Q` and by `(tr Q)²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledReport {
    pub gamma: f64,
    pub epsilon: f64,
    pub t: f64,
    pub window_start: f64,
    pub trace_q: f64,
    pub monte_carlo: MeanEstimate,
    /// per unit `tr Q`, noise restricted to the grid window
    pub quadrature_window: f64,
    /// per unit `tr Q`, full two-sided noise
    pub quadrature_full: f64,
    pub z_trace: f64,
    pub z_trace_squared: f64,
    pub supported_factor: String,
}

pub fn coupled_mse<S: IncrementSource + ?Sized>(
    gamma: f64,
    epsilon: f64,
    model: &SpectralModel,
    t: f64,
    noise: &S,
) -> Result<CoupledReport> {
    check_limit_gamma("coupled_mse", gamma)?;
    let grid = noise.grid();
    if noise.modes() != model.modes() {
        return Err(Error::Mismatch("noise does not match the model".into()));
    }
    if noise.replicates() < 2 {
        return Err(Error::InvalidInput("need at least 2 replicates".into()));
    }
    let k0 = zero_index(&grid)?;
    let k = grid
        .index_of(t)
        .filter(|k| *k >= k0)
        .ok_or_else(|| Error::InvalidInput(format!("t = {t} must be a non-negative grid node")))?;
    let w = CoupledWeights::new(gamma, epsilon, grid.dt(), grid.len() - 1)?;
    let modes = model.modes();
    let values: Vec<f64> = (0..noise.replicates())
        .into_par_iter()
        .map(|r| {
            let mut dw = vec![0.0; grid.len() - 1];
            (0..modes)
                .map(|j| {
                    noise.fill(r, j, &mut dw);
                    let (a, b) = w.eval(&dw, k, k0);
                    (a - b).powi(2)
                })
                .sum()
        })
        .collect();
    let mc = mean_and_se(&values);
    let tr = model.trace_q();
    let horizon = -grid.t0();
    let quadrature_window = if horizon > 0.0 { limit_mse_window(gamma, epsilon, t, horizon)? } else { 0.0 };
    let quadrature_full = limit_mse(gamma, epsilon, t)?;
    let z = |f: f64| (mc.estimate - f * quadrature_window).abs() / mc.std_error;
    let (z1, z2) = (z(tr), z(tr * tr));
    let supported_factor = match (z1 <= 4.0, z2 <= 4.0) {
        (true, false) => "tr Q",
        (false, true) => "(tr Q)^2",
        (true, true) => "both",
        (false, false) => "neither",
    }
    .to_string();
    Ok(CoupledReport {
        gamma,
        epsilon,
        t,
        window_start: grid.t0(),
        trace_q: tr,
        monte_carlo: mc,
        quadrature_window,
        quadrature_full,
        z_trace: z1,
        z_trace_squared: z2,
        supported_factor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfSimilarityReport {
    pub hurst: f64,
    pub max_scaling_residual: f64,
    pub max_increment_residual: f64,
    pub passed: bool,
}

/// Covariance-level self-similarity and stationary increments on a fixed
/// grid of `(α, s, t, h)`, relative residuals against 1e-12.
pub fn stationarity_and_selfsimilarity_check(h: f64) -> Result<SelfSimilarityReport> {
    check_hurst("stationarity_and_selfsimilarity_check", h)?;
    let pts = [-2.5, -1.0, -0.3, 0.0, 0.4, 1.0, 1.7, 3.0];
    let alphas = [0.25, 0.5, 1.0, 2.0, 4.0];
    let lags = [-1.5, -0.2, 0.3, 1.0, 2.0];
    let mut scaling: f64 = 0.0;
    for &a in &alphas {
        for &s in &pts {
            for &t in &pts {
                let lhs = fqw_cov(h, a * s, a * t)?;
                let rhs = a.powf(2.0 * h) * fqw_cov(h, s, t)?;
                scaling = scaling.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            }
        }
    }
    let mut incr: f64 = 0.0;
    for &t in &pts {
        for &d in &lags {
            let v = fqw_cov(h, t + d, t + d)? + fqw_cov(h, t, t)? - 2.0 * fqw_cov(h, t, t + d)?;
            let want = d.abs().powf(2.0 * h);
            incr = incr.max((v - want).abs() / want.max(1.0));
        }
    }
    Ok(SelfSimilarityReport {
        hurst: h,
        max_scaling_residual: scaling,
        max_increment_residual: incr,
        passed: scaling <= 1e-12 && incr <= 1e-12,
    })
}
