//! N-ple Markov structure of `Z_N` for integer `N`.
//!
//! Per mode the auxiliary processes `Y_i = Z_i(·|t₀)`, `i = 1..N`, satisfy
//! `(d/dt + λ) Y_i = Y_{i-1}` with `Y_1` driven by the noise. Treating the
//! noise rate as constant on each cell, one step is the exact linear map
//! `Y ← Φ Y + b ΔW`, so a path restarted at any node from its own derivative
//! stack continues bit-for-bit up to rounding.

use ndarray::{Array2, Array4};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{fill_standard_normal, IncrementSource, Purpose};
use crate::quad::exp_sinh_dist;
use crate::sampler::{matern_cov, mean_and_se, MeanEstimate};
use crate::specfun::{gamma_kernel_cell, ln_gamma, reg_upper_gamma};
use crate::spectral_model::SpectralModel;

/// Initial-value stack `ξ = (ξ_0, …, ξ_{N-1})`, one column per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovState {
    coeffs: Array2<f64>,
}

impl MarkovState {
    /// `coeffs[[k, j]]` is `ξ_k` in mode `j`.
    pub fn new(coeffs: Array2<f64>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return Err(Error::InvalidInput("state needs N ≥ 1 and J ≥ 1".into()));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("state has non-finite entries".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(order: usize, modes: usize) -> Result<Self> {
        Self::new(Array2::zeros((order, modes)))
    }

    pub fn order(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn modes(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.coeffs.column(j).to_vec()
    }

    fn check(&self, order: usize, model: &SpectralModel) -> Result<()> {
        if self.order() != order || self.modes() != model.modes() {
            return Err(Error::Mismatch(format!(
                "state is {}×{}, expected {order}×{}",
                self.order(),
                self.modes(),
                model.modes()
            )));
        }
        Ok(())
    }
}

/// Paths with their derivative stacks, `replicate × order × mode × time`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPath {
    pub grid: TimeGrid,
    pub stack: Array4<f64>,
}

impl StackedPath {
    /// Full stack of replicate `r` at node `k`.
    pub fn state_at(&self, r: usize, k: usize) -> Result<MarkovState> {
        MarkovState::new(self.stack.slice(ndarray::s![r, .., .., k]).to_owned())
    }
}

/// `Γ̄(n, tA)` per mode.
pub fn inc_gamma_op(n: u32, t: f64, model: &SpectralModel) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(domain("inc_gamma_op", format!("t = {t} must be non-negative")));
    }
    model.lambdas().iter().map(|l| reg_upper_gamma(n, l * t)).collect()
}

fn zeta_mode(order: usize, lambda: f64, tau: f64, xi: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    let mut pow = 1.0;
    for (k, x) in xi.iter().enumerate().take(order) {
        if k > 0 {
            pow *= tau / k as f64;
        }
        s += pow * reg_upper_gamma((order - k) as u32, lambda * tau)? * x;
    }
    Ok(s)
}

/// `dⁿ/dtⁿ ζ_order ξ` from `(d/dt + λ) ζ_N ξ = ζ_{N-1}(ξ_{k+1} + λ ξ_k)`.
fn zeta_deriv_mode(n: usize, order: usize, lambda: f64, tau: f64, xi: &[f64]) -> Result<f64> {
    if order == 0 {
        return Ok(0.0);
    }
    if n == 0 {
        return zeta_mode(order, lambda, tau, xi);
    }
    let shifted: Vec<f64> = (0..order - 1).map(|k| xi[k + 1] + lambda * xi[k]).collect();
    Ok(zeta_deriv_mode(n - 1, order - 1, lambda, tau, &shifted)? - lambda * zeta_deriv_mode(n - 1, order, lambda, tau, xi)?)
}

fn zeta_stack_mode(order: usize, lambda: f64, tau: f64, xi: &[f64]) -> Result<Vec<f64>> {
    if tau == 0.0 {
        return Ok(xi.to_vec());
    }
    (0..order).map(|n| zeta_deriv_mode(n, order, lambda, tau, xi)).collect()
}

fn check_times(func: &'static str, t: f64, t0: f64) -> Result<f64> {
    if !(t >= t0) || !t.is_finite() || !t0.is_finite() {
        return Err(domain(func, format!("need t0 ≤ t, got t0 = {t0}, t = {t}")));
    }
    Ok(t - t0)
}

/// `ζ_N(t|t₀) ξ = Σ_k (t-t₀)^k/k! Γ̄(N-k, (t-t₀)A) ξ_k` per mode.
pub fn zeta(order: usize, t: f64, t0: f64, state: &MarkovState, model: &SpectralModel) -> Result<Vec<f64>> {
    state.check(order, model)?;
    let tau = check_times("zeta", t, t0)?;
    (0..model.modes())
        .map(|j| zeta_mode(order, model.lambdas()[j], tau, &state.column(j)))
        .collect()
}

/// Derivatives of orders `0..N` of `t ↦ ζ_N(t|t₀)ξ`; entry `[n][j]`.
pub fn zeta_derivative_stack(
    order: usize,
    t: f64,
    t0: f64,
    state: &MarkovState,
    model: &SpectralModel,
) -> Result<Vec<Vec<f64>>> {
    state.check(order, model)?;
    let tau = check_times("zeta_derivative_stack", t, t0)?;
    if tau == 0.0 && order > 1 {
        return Err(domain("zeta_derivative_stack", "only order 0 is defined at t = t0"));
    }
    let per_mode: Vec<Vec<f64>> = (0..model.modes())
        .map(|j| zeta_stack_mode(order, model.lambdas()[j], tau, &state.column(j)))
        .collect::<Result<_>>()?;
    Ok((0..order).map(|n| per_mode.iter().map(|m| m[n]).collect()).collect())
}

/// Exact one-step map of the auxiliary chain for one mode.
#[derive(Debug, Clone)]
struct Stepper {
    order: usize,
    lambda: f64,
    phi: Vec<f64>,
    load: Vec<f64>,
    /// `binom[n][m] (-λ)^{n-m}`: derivative stack from the auxiliary chain.
    mix: Vec<Vec<f64>>,
}

impl Stepper {
    fn new(order: usize, lambda: f64, dt: f64) -> Result<Self> {
        let decay = (-lambda * dt).exp();
        let mut phi = vec![0.0; order * order];
        for i in 0..order {
            let mut c = decay;
            for j in (0..=i).rev() {
                phi[i * order + j] = c;
                c *= dt / (i - j + 1) as f64;
            }
        }
        let load = (1..=order)
            .map(|i| Ok(gamma_kernel_cell(i as f64, lambda, 0.0, dt)? / dt))
            .collect::<Result<_>>()?;
        let mix = (0..order)
            .map(|n| (0..=n).map(|m| binomial(n, m) * (-lambda).powi((n - m) as i32)).collect())
            .collect();
        Ok(Self { order, lambda, phi, load, mix })
    }

    fn step(&self, y: &mut [f64], dw: f64) {
        let n = self.order;
        for i in (0..n).rev() {
            let row = &self.phi[i * n..i * n + i + 1];
            let mut s = 0.0;
            for (p, v) in row.iter().zip(&y[..=i]) {
                s += p * v;
            }
            y[i] = s + self.load[i] * dw;
        }
    }

    /// Derivative stack of `Y_N`: `Σ_m C(n,m) (-λ)^{n-m} Y_{N-m}`.
    fn noise_stack(&self, y: &[f64], out: &mut [f64]) {
        let top = self.order - 1;
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.mix[n].iter().enumerate().map(|(m, c)| c * y[top - m]).sum();
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Runs one mode of one replicate from node `k0` and reports the stack at
/// every node through `sink(k, stack)`.
fn run_mode<F: FnMut(usize, &[f64])>(st: &Stepper, xi: &[f64], dt: f64, k0: usize, dw: &[f64], mut sink: F) -> Result<()> {
    let mut y = vec![0.0; st.order];
    let mut noise = vec![0.0; st.order];
    for k in k0..=k0 + dw.len() {
        let det = zeta_stack_mode(st.order, st.lambda, (k - k0) as f64 * dt, xi)?;
        if k > k0 {
            st.step(&mut y, dw[k - k0 - 1]);
        }
        st.noise_stack(&y, &mut noise);
        let stack: Vec<f64> = det.iter().zip(&noise).map(|(a, b)| a + b).collect();
        sink(k, &stack);
    }
    Ok(())
}

fn check_noise<S: IncrementSource + ?Sized>(grid: &TimeGrid, noise: &S, model: &SpectralModel) -> Result<()> {
    if !noise.grid().same_as(grid) || noise.modes() != model.modes() {
        return Err(Error::Mismatch("noise does not match grid or model".into()));
    }
    Ok(())
}

/// Stacks on nodes `k0..n` of `grid`, replicate `r` started from `init(r)`.
fn solve_window<S, I>(order: usize, grid: &TimeGrid, k0: usize, init: I, noise: &S, model: &SpectralModel) -> Result<Array4<f64>>
where
    S: IncrementSource + ?Sized,
    I: Fn(usize) -> Array2<f64> + Sync,
{
    let dt = grid.dt();
    let len = grid.len() - k0;
    let steppers: Vec<Stepper> = model.lambdas().iter().map(|&l| Stepper::new(order, l, dt)).collect::<Result<_>>()?;
    let (reps, modes) = (noise.replicates(), model.modes());
    let blocks: Vec<Vec<f64>> = (0..reps * modes)
        .into_par_iter()
        .map(|idx| {
            let (r, j) = (idx / modes, idx % modes);
            let xi = init(r).column(j).to_vec();
            let mut dw = vec![0.0; grid.len() - 1];
            noise.fill(r, j, &mut dw);
            let mut out = vec![0.0; order * len];
            run_mode(&steppers[j], &xi, dt, k0, &dw[k0..], |k, s| {
                for (n, v) in s.iter().enumerate() {
                    out[n * len + k - k0] = *v;
                }
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut stack = Array4::zeros((reps, order, modes, len));
    for (idx, b) in blocks.into_iter().enumerate() {
        let (r, j) = (idx / modes, idx % modes);
        for n in 0..order {
            for k in 0..len {
                stack[[r, n, j, k]] = b[n * len + k];
            }
        }
    }
    Ok(stack)
}

/// `Z_N(t|t₀, ξ) = ζ_N(t|t₀)ξ + Z_N(t|t₀)` with its derivative stack on `grid`.
pub fn solve_initial_value<S: IncrementSource + ?Sized>(
    order: usize,
    t0: f64,
    state: &MarkovState,
    grid: TimeGrid,
    noise: &S,
    model: &SpectralModel,
) -> Result<StackedPath> {
    state.check(order, model)?;
    check_noise(&grid, noise, model)?;
    if (grid.t0() - t0).abs() > 1e-12 * grid.dt() {
        return Err(Error::Mismatch(format!("grid starts at {}, not at t0 = {t0}", grid.t0())));
    }
    let stack = solve_window(order, &grid, 0, |_| state.coeffs.clone(), noise, model)?;
    Ok(StackedPath { grid, stack })
}

/// Residual report shared by the restart and reconstruction checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    #[serde(rename = "N")]
    pub order: usize,
    pub max_rel_residual: f64,
    pub per_mode: Vec<f64>,
}

impl ResidualReport {
    fn from_modes(order: usize, per_mode: Vec<f64>) -> Self {
        let max_rel_residual = per_mode.iter().cloned().fold(0.0, f64::max);
        Self { order, max_rel_residual, per_mode }
    }
}

/// Compares the path from `t0` with the path restarted at `s` from its own
/// stack, both driven by the same increments.
pub fn restart_check<S: IncrementSource + ?Sized>(
    order: usize,
    t0: f64,
    s: f64,
    grid: TimeGrid,
    state: &MarkovState,
    noise: &S,
    model: &SpectralModel,
) -> Result<ResidualReport> {
    if !(s >= t0 && s <= grid.t1()) {
        return Err(Error::InvalidInput(format!("restart time {s} outside [{t0}, {}]", grid.t1())));
    }
    let ks = grid
        .index_of(s)
        .ok_or_else(|| Error::InvalidInput(format!("restart time {s} is not a grid node")))?;
    let left = solve_initial_value(order, t0, state, grid, noise, model)?;
    let starts: Vec<Array2<f64>> = (0..noise.replicates())
        .map(|r| left.stack.slice(ndarray::s![r, .., .., ks]).to_owned())
        .collect();
    let right = solve_window(order, &grid, ks, |r| starts[r].clone(), noise, model)?;
    let per_mode = (0..model.modes())
        .map(|j| {
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for r in 0..noise.replicates() {
                for n in 0..order {
                    for k in 0..grid.len() {
                        let a = left.stack[[r, n, j, k]];
                        scale = scale.max(a.abs());
                        if k >= ks {
                            diff = diff.max((a - right[[r, n, j, k - ks]]).abs());
                        }
                    }
                }
            }
            if scale == 0.0 {
                0.0
            } else {
                diff / scale
            }
        })
        .collect();
    Ok(ResidualReport::from_modes(order, per_mode))
}

/// `k_α(u) = u^{α-1} e^{-λu} / Γ(α)` cross term `q ∫_0^∞ k_α(u) k_β(u+h) du`, `h ≥ 0`.
fn kernel_cross(alpha: f64, beta: f64, lambda: f64, q: f64, h: f64) -> Result<f64> {
    let lga = ln_gamma(alpha)?;
    let lgb = ln_gamma(beta)?;
    if h == 0.0 {
        let e = alpha + beta - 1.0;
        return Ok(q * (ln_gamma(e)? - lga - lgb - e * (2.0 * lambda).ln()).exp());
    }
    if beta.fract() == 0.0 {
        // expand (u + h)^{β-1} binomially
        let m = beta as usize - 1;
        let mut s = 0.0;
        for i in 0..=m {
            let ln = ln_gamma(i as f64 + alpha)? - lga - lgb - (alpha + i as f64) * (2.0 * lambda).ln()
                - lambda * h;
            s += binomial(m, i) * h.powi((m - i) as i32) * ln.exp();
        }
        return Ok(q * s);
    }
    let f = |u: f64, d: f64| {
        let v = (alpha - 1.0) * d.ln() + (beta - 1.0) * (u + h).ln() - lambda * (2.0 * u + h) - lga - lgb;
        v.exp()
    };
    Ok(q * exp_sinh_dist(f, 0.0, 0.0, 1e-13)?.value)
}

/// `Cov(Z_γ^{(n1)}(t), Z_γ^{(n2)}(t+h))` for one mode, using
/// `Z_γ^{(n)} = Σ_m C(n,m) (-λ)^{n-m} Z_{γ-m}`.
pub fn derivative_cov(gamma: f64, lambda: f64, q: f64, n1: usize, n2: usize, h: f64) -> Result<f64> {
    if !(gamma - n1.max(n2) as f64 > 0.5) {
        return Err(domain(
            "derivative_cov",
            format!("gamma = {gamma} leaves no mean-square derivative of order {}", n1.max(n2)),
        ));
    }
    if !(lambda > 0.0) || !(q >= 0.0) || !h.is_finite() {
        return Err(domain("derivative_cov", "need lambda > 0, q ≥ 0 and finite h"));
    }
    if n1 == 0 && n2 == 0 {
        return matern_cov(gamma, lambda, q, h);
    }
    let mut s = 0.0;
    for m1 in 0..=n1 {
        let c1 = binomial(n1, m1) * (-lambda).powi((n1 - m1) as i32);
        for m2 in 0..=n2 {
            let c2 = binomial(n2, m2) * (-lambda).powi((n2 - m2) as i32);
            let (a, b) = (gamma - m1 as f64, gamma - m2 as f64);
            let c = if h >= 0.0 { kernel_cross(a, b, lambda, q, h)? } else { kernel_cross(b, a, lambda, q, -h)? };
            s += c1 * c2 * c;
        }
    }
    Ok(s)
}

/// Per-mode variances of `ζ_N(t|t₀) 𝐙_N(t₀)` by two routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionMode {
    /// `q ∫_τ^∞ k_N(u)² du`
    pub kernel_tail: f64,
    /// `cᵀ Σ c` from the stationary derivative covariance at `t₀`
    pub from_stack: f64,
    pub monte_carlo: Option<MeanEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionReport {
    #[serde(rename = "N")]
    pub order: usize,
    pub max_rel_residual: f64,
    pub per_mode: Vec<f64>,
    pub modes: Vec<ReconstructionMode>,
}

/// Covariance-level check of `Z̃_N(t|t₀) = ζ_N(t|t₀) 𝐙_N(t₀)` at `t = t₀ + horizon`.
/// With `replicates > 0` a Monte Carlo estimate from burned-in solves is added.
pub fn reconstruction_check(
    order: usize,
    horizon: f64,
    model: &SpectralModel,
    replicates: usize,
    seed: u64,
) -> Result<ReconstructionReport> {
    if order == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must be non-negative")));
    }
    let gamma = order as f64;
    let mut modes = Vec::with_capacity(model.modes());
    for (&lambda, &q) in model.lambdas().iter().zip(model.qs()) {
        let lg = ln_gamma(gamma)?;
        let kernel_tail = if q == 0.0 {
            0.0
        } else {
            let f = |u: f64, _d: f64| (2.0 * ((gamma - 1.0) * u.ln() - lambda * u - lg)).exp();
            let v = if horizon == 0.0 {
                matern_cov(gamma, lambda, 1.0, 0.0)?
            } else {
                exp_sinh_dist(f, horizon, 0.0, 1e-14)?.value
            };
            q * v
        };
        let c: Vec<f64> = (0..order)
            .map(|k| {
                let mut pow = 1.0;
                for i in 1..=k {
                    pow *= horizon / i as f64;
                }
                Ok(pow * reg_upper_gamma((order - k) as u32, lambda * horizon)?)
            })
            .collect::<Result<_>>()?;
        let mut from_stack = 0.0;
        for a in 0..order {
            for b in 0..order {
                from_stack += c[a] * c[b] * derivative_cov(gamma, lambda, q, a, b, 0.0)?;
            }
        }
        modes.push(ReconstructionMode { kernel_tail, from_stack, monte_carlo: None });
    }
    if replicates > 0 {
        let mc = reconstruction_monte_carlo(order, horizon, model, replicates, seed)?;
        for (m, e) in modes.iter_mut().zip(mc) {
            m.monte_carlo = Some(e);
        }
    }
    let per_mode = modes
        .iter()
        .map(|m| {
            if m.kernel_tail == 0.0 {
                m.from_stack.abs()
            } else {
                (m.kernel_tail - m.from_stack).abs() / m.kernel_tail
            }
        })
        .collect::<Vec<f64>>();
    let max_rel_residual = per_mode.iter().cloned().fold(0.0, f64::max);
    Ok(ReconstructionReport { order, max_rel_residual, per_mode, modes })
}

fn reconstruction_monte_carlo(
    order: usize,
    horizon: f64,
    model: &SpectralModel,
    replicates: usize,
    seed: u64,
) -> Result<Vec<MeanEstimate>> {
    let burn = 40.0 / model.stability_margin();
    let dt = (burn / 4000.0).min(0.01);
    let steps = (burn / dt).ceil() as usize;
    let zero = MarkovState::zeros(order, model.modes())?;
    (0..model.modes())
        .map(|j| {
            let st = Stepper::new(order, model.lambdas()[j], dt)?;
            let scale = (model.qs()[j] * dt).sqrt();
            let xi0 = zero.column(j);
            let values: Vec<f64> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut dw = vec![0.0; steps];
                    fill_standard_normal(seed, Purpose::Increments, r as u64, j, &mut dw);
                    dw.iter_mut().for_each(|v| *v *= scale);
                    let mut last = Vec::new();
                    run_mode(&st, &xi0, dt, 0, &dw, |k, s| {
                        if k == steps {
                            last = s.to_vec();
                        }
                    })?;
                    Ok(zeta_mode(order, model.lambdas()[j], horizon, &last)?.powi(2))
                })
                .collect::<Result<_>>()?;
            Ok(mean_and_se(&values))
        })
        .collect()
}

/// Endpoint stacks at `t` of independent solves from `x` at `s`, one per replicate.
#[allow(clippy::too_many_arguments)]
fn endpoint_states(
    order: usize,
    x: &MarkovState,
    span: f64,
    dt: f64,
    replicates: usize,
    seed: u64,
    purpose: Purpose,
    model: &SpectralModel,
    starts: Option<&[MarkovState]>,
) -> Result<Vec<MarkovState>> {
    let steps = lattice_steps(span, dt)?;
    let modes = model.modes();
    let h = if steps == 0 { 0.0 } else { span / steps as f64 };
    let steppers: Vec<Stepper> = if steps == 0 {
        Vec::new()
    } else {
        model.lambdas().iter().map(|&l| Stepper::new(order, l, h)).collect::<Result<_>>()?
    };
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let from = starts.map_or(x, |s| &s[r]);
            if steps == 0 {
                return Ok(from.clone());
            }
            let mut out = Array2::zeros((order, modes));
            for j in 0..modes {
                let mut dw = vec![0.0; steps];
                fill_standard_normal(seed, purpose, r as u64, j, &mut dw);
                let scale = (model.qs()[j] * h).sqrt();
                dw.iter_mut().for_each(|v| *v *= scale);
                run_mode(&steppers[j], &from.column(j), h, 0, &dw, |k, s| {
                    if k == steps {
                        for (n, v) in s.iter().enumerate() {
                            out[[n, j]] = *v;
                        }
                    }
                })?;
            }
            MarkovState::new(out)
        })
        .collect()
}

fn lattice_steps(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(span >= 0.0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and a non-negative span, got {dt}, {span}")));
    }
    if span == 0.0 {
        return Ok(0);
    }
    Ok(((span / dt) - 1e-9).ceil().max(1.0) as usize)
}

/// `T_{s,t}φ(x) = E[φ(𝐙_N(t|s, x))]` by Monte Carlo over `replicates`
/// discrete solves with step at most `dt`.
#[allow(clippy::too_many_arguments)]
pub fn transition_operator<F>(
    order: usize,
    s: f64,
    t: f64,
    x: &MarkovState,
    functional: F,
    replicates: usize,
    seed: u64,
    model: &SpectralModel,
    dt: f64,
) -> Result<MeanEstimate>
where
    F: Fn(&MarkovState) -> f64 + Sync,
{
    x.check(order, model)?;
    let span = check_times("transition_operator", t, s)?;
    if replicates < 2 {
        return Err(Error::InvalidInput("transition operator needs at least 2 replicates".into()));
    }
    if span == 0.0 {
        return Ok(MeanEstimate { estimate: functional(x), std_error: 0.0 });
    }
    let ends = endpoint_states(order, x, span, dt, replicates, seed, Purpose::Increments, model, None)?;
    let values: Vec<f64> = ends.par_iter().map(&functional).collect();
    Ok(mean_and_se(&values))
}

/// `T_{s,u}φ(x)` against the two-stage estimate of `T_{s,t}(T_{t,u}φ)(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChapmanKolmogorovReport {
    pub direct: MeanEstimate,
    pub composed: MeanEstimate,
    /// `|direct - composed| / √(SE₁² + SE₂²)`
    pub z: f64,
    pub within_4se: bool,
}

/// The composed side draws one inner solve on `[t, u]` per outer replicate,
/// with noise independent of the outer stage; both sides use step `dt`, which
/// must divide `t - s` and `u - t`.
#[allow(clippy::too_many_arguments)]
pub fn chapman_kolmogorov_check<F>(
    order: usize,
    s: f64,
    t: f64,
    u: f64,
    x: &MarkovState,
    functional: F,
    replicates: usize,
    seed: u64,
    model: &SpectralModel,
    dt: f64,
) -> Result<ChapmanKolmogorovReport>
where
    F: Fn(&MarkovState) -> f64 + Sync,
{
    x.check(order, model)?;
    check_times("chapman_kolmogorov_check", t, s)?;
    check_times("chapman_kolmogorov_check", u, t)?;
    for span in [t - s, u - t] {
        let k = span / dt;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::InvalidInput(format!("step {dt} does not divide the interval {span}")));
        }
    }
    let direct = transition_operator(order, s, u, x, &functional, replicates, seed, model, dt)?;
    let outer_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mid = endpoint_states(order, x, t - s, dt, replicates, outer_seed, Purpose::Increments, model, None)?;
    let ends = endpoint_states(order, x, u - t, dt, replicates, outer_seed, Purpose::Inner, model, Some(&mid))?;
    let values: Vec<f64> = ends.par_iter().map(&functional).collect();
    let composed = mean_and_se(&values);
    let se = (direct.std_error.powi(2) + composed.std_error.powi(2)).sqrt();
    let gap = (direct.estimate - composed.estimate).abs();
    let z = if se == 0.0 {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        gap / se
    };
    Ok(ChapmanKolmogorovReport { direct, composed, z, within_4se: z <= 4.0 })
}
