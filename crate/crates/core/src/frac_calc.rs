//! Weyl-type fractional parabolic calculus on grid functions.
//!
//! `𝔍^γ f(t) = Γ(γ)^{-1} ∫_0^∞ r^{γ-1} e^{-λr} f(t - r) dr` is evaluated by
//! product integration: on each kernel cell `f` is replaced by its 6-point
//! Lagrange interpolant through nodes at or behind the cell, and the kernel is
//! integrated against each basis polynomial. The result is a causal
//! convolution with precomputed weights.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::conv::causal_convolve;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::quad::GaussLegendre;
use crate::specfun::{gamma_q, ln_gamma};
use crate::spectral_model::SpectralModel;

const STENCIL: usize = 6;
const TAIL_MASS: f64 = 1e-17;
const SINGULAR_PANELS: i32 = 50;
/// Half-width of the central difference stencil.
const FD_HALF: usize = 3;

/// `exp(-1/(1-u²))` with `u = (t - center)/halfwidth`, zero for `|u| ≥ 1`.
pub fn bump(grid: TimeGrid, center: f64, halfwidth: f64) -> Result<GridFunction> {
    if !(halfwidth > 0.0) {
        return Err(Error::InvalidInput(format!("halfwidth {halfwidth} must be positive")));
    }
    Ok(GridFunction::from_fn(grid, |t| bump_value((t - center) / halfwidth)))
}

fn bump_value(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / ((1.0 - u) * (1.0 + u))).exp()
    }
}

/// Lagrange basis on the nodes `0..STENCIL`, evaluated at `x`.
fn lagrange(x: f64) -> [f64; STENCIL] {
    let mut out = [0.0; STENCIL];
    for (i, o) in out.iter_mut().enumerate() {
        let mut p = 1.0;
        for j in 0..STENCIL {
            if j != i {
                p *= (x - j as f64) / (i as f64 - j as f64);
            }
        }
        *o = p;
    }
    out
}

/// Precomputed convolution weights of `𝔍^γ` for a fixed step.
#[derive(Debug, Clone)]
pub struct FracIntegralOp {
    gamma: f64,
    lambda: f64,
    dt: f64,
    weights: Vec<f64>,
}

impl FracIntegralOp {
    /// Weights long enough for grids of `n` nodes.
    pub fn new(gamma: f64, lambda: f64, dt: f64, n: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("order {gamma} must be positive")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda {lambda} must be non-negative")));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("step {dt} must be positive")));
        }
        let cells = if lambda > 0.0 {
            let mut r = (gamma / lambda).max(dt);
            while gamma_q(gamma, lambda * r)? > TAIL_MASS {
                r *= 1.25;
            }
            ((r / dt).ceil() as usize).min(n)
        } else {
            n
        }
        .max(1);
        let lg = ln_gamma(gamma)?;
        let mut weights = vec![0.0; cells + STENCIL];

        // cell 0: r = dt·v^{1/γ} removes the r^{γ-1} singularity
        let g = GaussLegendre::g16();
        let pref = (gamma * dt.ln() - gamma.ln() - lg).exp();
        let mut acc = [0.0; STENCIL];
        for k in 0..=SINGULAR_PANELS {
            let (lo, hi) = if k == 0 {
                (0.0, 2f64.powi(-SINGULAR_PANELS))
            } else {
                (2f64.powi(k - SINGULAR_PANELS - 1), 2f64.powi(k - SINGULAR_PANELS))
            };
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (x, w) in g.nodes.iter().zip(&g.weights) {
                let v = c + h * x;
                let u = v.powf(1.0 / gamma);
                let e = (-lambda * dt * u).exp() * w * h;
                for (a, l) in acc.iter_mut().zip(lagrange(u)) {
                    *a += e * l;
                }
            }
        }
        for (i, a) in acc.iter().enumerate() {
            weights[i] += pref * a;
        }

        let partial: Vec<(usize, [f64; STENCIL])> = (1..cells)
            .into_par_iter()
            .map(|m| {
                let base = m.saturating_sub(2);
                let mut acc = [0.0; STENCIL];
                let (lo, hi) = (m as f64, m as f64 + 1.0);
                let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for (x, w) in g.nodes.iter().zip(&g.weights) {
                    let u = c + h * x;
                    let r = u * dt;
                    let k = ((gamma - 1.0) * r.ln() - lambda * r - lg).exp() * w * h * dt;
                    for (a, l) in acc.iter_mut().zip(lagrange(u - base as f64)) {
                        *a += k * l;
                    }
                }
                (base, acc)
            })
            .collect();
        for (base, acc) in partial {
            for (i, a) in acc.iter().enumerate() {
                weights[base + i] += a;
            }
        }
        Ok(Self { gamma, lambda, dt, weights })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if (f.grid.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::Mismatch(format!("operator built for step {}, grid has {}", self.dt, f.grid.dt())));
        }
        let scale = f.max_abs();
        if f.values[0].abs() > 1e-9 * scale {
            return Err(Error::InvalidInput(
                "function does not vanish at the first grid node; its support leaves the window".into(),
            ));
        }
        let n = f.values.len();
        let w = &self.weights[..self.weights.len().min(n)];
        Ok(GridFunction { grid: f.grid, values: causal_convolve(w, &f.values) })
    }
}

/// `𝔍^γ f` on the grid of `f`.
pub fn frac_integral(f: &GridFunction, gamma: f64, lambda: f64) -> Result<GridFunction> {
    FracIntegralOp::new(gamma, lambda, f.grid.dt(), f.grid.len())?.apply(f)
}

/// `(d/dt + λ) g` by 6th-order central differences; drops `FD_HALF` nodes per side.
fn shifted_derivative(g: &GridFunction, lambda: f64) -> Result<GridFunction> {
    let n = g.values.len();
    if n < 2 * FD_HALF + 2 {
        return Err(Error::InvalidInput("grid exhausted by derivative trimming".into()));
    }
    let grid = g.grid.slice(FD_HALF, n - 1 - FD_HALF)?;
    let inv = 1.0 / (60.0 * g.grid.dt());
    let v = &g.values;
    let values = (FD_HALF..n - FD_HALF)
        .map(|k| {
            let d = -v[k - 3] + 9.0 * v[k - 2] - 45.0 * v[k - 1] + 45.0 * v[k + 1] - 9.0 * v[k + 2] + v[k + 3];
            d * inv + lambda * v[k]
        })
        .collect();
    Ok(GridFunction { grid, values })
}

fn derivative_with(op: Option<&FracIntegralOp>, f: &GridFunction, steps: usize, lambda: f64) -> Result<GridFunction> {
    let mut g = match op {
        Some(op) => op.apply(f)?,
        None => f.clone(),
    };
    for _ in 0..steps {
        g = shifted_derivative(&g, lambda)?;
    }
    Ok(g)
}

fn derivative_parts(gamma: f64, lambda: f64, grid: &TimeGrid) -> Result<(Option<FracIntegralOp>, usize)> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("order {gamma} must be non-negative")));
    }
    let steps = gamma.ceil();
    let frac = steps - gamma;
    let op = if frac > 0.0 {
        Some(FracIntegralOp::new(frac, lambda, grid.dt(), grid.len())?)
    } else {
        None
    };
    Ok((op, steps as usize))
}

/// `𝔇^γ f = (d/dt + λ)^{⌈γ⌉} 𝔍^{⌈γ⌉-γ} f`, trimmed by 3 nodes per side for
/// each derivative application.
pub fn frac_derivative(f: &GridFunction, gamma: f64, lambda: f64) -> Result<GridFunction> {
    let (op, steps) = derivative_parts(gamma, lambda, &f.grid)?;
    derivative_with(op.as_ref(), f, steps, lambda)
}

/// Applies the symbol `(iω + λ)^γ` after zero-padding to at least four times
/// the grid length. Negative `γ` gives `𝔍^{|γ|}`.
pub fn frac_derivative_fourier(f: &GridFunction, gamma: f64, lambda: f64) -> Result<GridFunction> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "symbol route needs lambda > 0 to stay off the branch cut, got {lambda}"
        )));
    }
    if !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("order {gamma} is not finite")));
    }
    let n = f.values.len();
    let size = (4 * n).next_power_of_two();
    let dt = f.grid.dt();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = (0..size)
        .map(|k| Complex::new(if k < n { f.values[k] } else { 0.0 }, 0.0))
        .collect();
    planner.plan_fft_forward(size).process(&mut buf);
    let dw = 2.0 * std::f64::consts::PI / (size as f64 * dt);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = if k <= size / 2 { k as f64 } else { k as f64 - size as f64 };
        *b *= Complex::new(lambda, kk * dw).powf(gamma);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let s = 1.0 / size as f64;
    Ok(GridFunction { grid: f.grid, values: buf[..n].iter().map(|c| c.re * s).collect() })
}

fn trapezoid(v: &[f64], dt: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => dt * (v[1..n - 1].iter().sum::<f64>() + 0.5 * (v[0] + v[n - 1])),
    }
}

/// `|⟨𝔇^γ φ, 𝔇^γ ψ⟩|` by the trapezoidal rule on the trimmed grid.
pub fn locality_functional(gamma: f64, lambda: f64, phi: &GridFunction, psi: &GridFunction) -> Result<f64> {
    if !phi.grid.same_as(&psi.grid) {
        return Err(Error::Mismatch("phi and psi live on different grids".into()));
    }
    let (op, steps) = derivative_parts(gamma, lambda, &phi.grid)?;
    let a = derivative_with(op.as_ref(), phi, steps, lambda)?;
    let b = derivative_with(op.as_ref(), psi, steps, lambda)?;
    let prod: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    Ok(trapezoid(&prod, a.grid.dt()).abs())
}

/// Locality values for `φ = bump(0, 1)` and `ψ = bump(2 + δ, 1)`, one row per δ.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityTable {
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub const DEFAULT_TABLE_STEP: f64 = 1e-3;

pub fn locality_table(gammas: &[f64], deltas: &[f64], lambda: f64) -> Result<LocalityTable> {
    locality_table_with_step(gammas, deltas, lambda, DEFAULT_TABLE_STEP)
}

/// Each cell integrates over `[-1, 3 + δ + 40/λ]` with step `dt`.
pub fn locality_table_with_step(gammas: &[f64], deltas: &[f64], lambda: f64, dt: f64) -> Result<LocalityTable> {
    if gammas.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidInput("locality table needs at least one gamma and one delta".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda {lambda} must be positive")));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::InvalidInput(format!("delta {d} must be positive")));
    }
    let cells: Vec<(usize, usize)> = (0..deltas.len())
        .flat_map(|i| (0..gammas.len()).map(move |j| (i, j)))
        .collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let delta = deltas[i];
            let t1 = 3.0 + delta + 40.0 / lambda;
            let n = ((t1 + 1.0) / dt).ceil() as usize + 1;
            let grid = TimeGrid::with_step(-1.0, dt, n)?;
            let phi = bump(grid, 0.0, 1.0)?;
            let psi = bump(grid, 2.0 + delta, 1.0)?;
            locality_functional(gammas[j], lambda, &phi, &psi)
        })
        .collect::<Result<_>>()?;
    let values = flat.chunks(gammas.len()).map(|c| c.to_vec()).collect();
    Ok(LocalityTable { deltas: deltas.to_vec(), gammas: gammas.to_vec(), values })
}

impl LocalityTable {
    /// CSV with header `delta,gamma,value`, shortest round-trip numbers.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,gamma,value\n");
        for (i, d) in self.deltas.iter().enumerate() {
            for (j, g) in self.gammas.iter().enumerate() {
                s.push_str(&format!("{d},{g},{}\n", self.values[i][j]));
            }
        }
        s
    }
}

/// Mode `j` of `𝔍^γ Q^{1/2}`: `f_j ↦ 𝔍^γ(√q_j f_j)` at rate `λ_j`.
pub fn apply_coloring(model: &SpectralModel, gamma: f64, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
    if fs.len() != model.modes() {
        return Err(Error::Mismatch(format!("{} inputs for {} modes", fs.len(), model.modes())));
    }
    if let Some(f) = fs.iter().find(|f| !f.grid.same_as(&fs[0].grid)) {
        return Err(Error::Mismatch(format!("mode grids differ: {:?} vs {:?}", f.grid, fs[0].grid)));
    }
    fs.iter()
        .zip(model.lambdas().iter().zip(model.qs()))
        .map(|(f, (l, q))| frac_integral(&f.scaled(q.sqrt()), gamma, *l))
        .collect()
}
