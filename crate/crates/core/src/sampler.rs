//! Covariances and samplers for the mild solution `Z_γ` and its finite-start
//! variant `Z_γ(·|t₀)`, mode by mode.

use std::io::{Read, Write};

use nalgebra::{Cholesky, DMatrix};
use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::causal_convolve;
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{fill_standard_normal, IncrementSource, Purpose};
use crate::quad::{exp_sinh_dist, Estimate};
use crate::specfun::{gamma_kernel_cell, ln_bessel_k, ln_gamma};
use crate::spectral_model::SpectralModel;

/// Which construction produced an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    Stationary,
    Convolution { t0: f64 },
    Markov { order: usize, t0: f64 },
    Fqw { hurst: f64 },
    CoupledWiener { hurst: f64 },
    CoupledLimit { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub gamma: f64,
    pub model: SpectralModel,
    pub construction: Construction,
    /// Diagonal jitter added per mode during factorization (0 when none).
    #[serde(default)]
    pub jitter: Vec<f64>,
}

/// Sample paths stored `replicate × mode × time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnsemble {
    pub grid: TimeGrid,
    pub paths: Array3<f64>,
    pub meta: EnsembleMeta,
}

impl ModeEnsemble {
    pub fn new(grid: TimeGrid, paths: Array3<f64>, meta: EnsembleMeta) -> Result<Self> {
        let sh = paths.shape();
        if sh[2] != grid.len() || sh[1] != meta.model.modes() {
            return Err(Error::Mismatch(format!(
                "paths {:?} do not fit {} modes on {} nodes",
                sh,
                meta.model.modes(),
                grid.len()
            )));
        }
        if paths.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("ensemble contains non-finite values".into()));
        }
        Ok(Self { grid, paths, meta })
    }

    pub fn replicates(&self) -> usize {
        self.paths.shape()[0]
    }

    pub fn modes(&self) -> usize {
        self.paths.shape()[1]
    }

    /// CSV rows `replicate,mode,t,value` with shortest round-trip numbers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "replicate,mode,t,value")?;
        let times: Vec<f64> = self.grid.nodes().collect();
        for ((r, j, k), v) in self.paths.indexed_iter() {
            writeln!(w, "{r},{j},{},{v}", times[k])?;
        }
        Ok(())
    }

    /// `FREV1`, then `J, n, replicates` as u64 and `γ` as f64, then the paths;
    /// all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        for v in [self.modes() as u64, self.grid.len() as u64, self.replicates() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.meta.gamma.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.paths.len());
        for v in self.paths.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

pub const BINARY_MAGIC: &[u8; 5] = b"FREV1";

/// Contents of a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDump {
    pub gamma: f64,
    pub paths: Array3<f64>,
}

pub fn read_binary<R: Read>(mut r: R) -> Result<BinaryDump> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::InvalidInput("not an ensemble dump (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    let mut header = [0u64; 3];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    r.read_exact(&mut word)?;
    let gamma = f64::from_le_bytes(word);
    let [modes, n, reps] = header.map(|v| v as usize);
    let total = modes
        .checked_mul(n)
        .and_then(|x| x.checked_mul(reps))
        .ok_or_else(|| Error::InvalidInput("dump header overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * total {
        return Err(Error::Mismatch(format!("dump holds {} bytes, header needs {}", bytes.len(), 8 * total)));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let paths = Array3::from_shape_vec((reps, modes, n), data).expect("length checked");
    Ok(BinaryDump { gamma, paths })
}

fn check_gamma(func: &'static str, gamma: f64) -> Result<()> {
    if !(gamma > 0.5 && gamma.is_finite()) {
        return Err(domain(func, format!("gamma = {gamma} must exceed 1/2")));
    }
    Ok(())
}

/// Stationary covariance `Cov(Z_γ(t), Z_γ(t+h))` of one mode (Matérn type).
pub fn matern_cov(gamma: f64, lambda: f64, q: f64, h: f64) -> Result<f64> {
    check_gamma("matern_cov", gamma)?;
    if !(lambda > 0.0) {
        return Err(domain("matern_cov", format!("lambda = {lambda} must be positive")));
    }
    if !(q >= 0.0) || !h.is_finite() {
        return Err(domain("matern_cov", "q must be non-negative and h finite"));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let e = 2.0 * gamma - 1.0;
    if h == 0.0 {
        return Ok(q * (ln_gamma(e)? - 2.0 * ln_gamma(gamma)? - e * (2.0 * lambda).ln()).exp());
    }
    let nu = gamma - 0.5;
    let x = lambda * h.abs();
    let ln = (0.5 - gamma) * std::f64::consts::LN_2 - e * lambda.ln()
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma(gamma)?
        + nu * x.ln()
        + ln_bessel_k(nu, x)?;
    Ok(q * ln.exp())
}

/// `q ∫₀^∞ k(s) k(s+|h|) ds` with `k(t) = t^{γ-1} e^{-λt} / Γ(γ)`, by quadrature;
/// the independent route to [`matern_cov`].
pub fn matern_cov_quadrature(gamma: f64, lambda: f64, q: f64, h: f64) -> Result<Estimate> {
    let closed = matern_cov(gamma, lambda, q, h)?;
    if closed == 0.0 {
        return Ok(Estimate { value: 0.0, abs_err: 0.0 });
    }
    let h = h.abs();
    let lg = 2.0 * ln_gamma(gamma)?;
    let f = |_: f64, s: f64| ((gamma - 1.0) * (s.ln() + (s + h).ln()) - lambda * (2.0 * s + h) - lg).exp();
    let e = exp_sinh_dist(f, 0.0, 0.0, 1e-13)?;
    Ok(Estimate { value: q * e.value, abs_err: q * e.abs_err })
}

const JITTER_STEPS: [f64; 3] = [1e-14, 1e-13, 1e-12];

/// Lower Cholesky factor, retrying with diagonal jitter up to `1e-12·scale`.
pub(crate) fn factor_with_jitter(mut cov: DMatrix<f64>, scale: f64, mode: usize) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = Cholesky::new(cov.clone()) {
        return Ok((c.unpack(), 0.0));
    }
    let mut added = 0.0;
    for s in JITTER_STEPS {
        let j = s * scale;
        for i in 0..cov.nrows() {
            cov[(i, i)] += j - added;
        }
        added = j;
        if let Some(c) = Cholesky::new(cov.clone()) {
            return Ok((c.unpack(), j));
        }
    }
    Err(Error::Factorization { mode, jitter: added })
}

/// Draws `replicates` paths with covariance `L Lᵀ` for one mode.
pub(crate) fn draw_with_factor(
    l: &DMatrix<f64>,
    replicates: usize,
    seed: u64,
    purpose: Purpose,
    mode: usize,
    out: &mut Array3<f64>,
) {
    let n = l.nrows();
    let cols: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut xi = vec![0.0; n];
            fill_standard_normal(seed, purpose, r as u64, mode, &mut xi);
            let mut z = vec![0.0; n];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = l.row(i);
                *zi = (0..=i).map(|k| row[k] * xi[k]).sum();
            }
            z
        })
        .collect();
    for (r, z) in cols.into_iter().enumerate() {
        for (k, v) in z.into_iter().enumerate() {
            out[[r, mode, k]] = v;
        }
    }
}

/// Exact-in-law stationary sampling by factorizing the Matérn covariance matrix.
pub fn sample_stationary(
    model: &SpectralModel,
    gamma: f64,
    grid: TimeGrid,
    replicates: usize,
    seed: u64,
) -> Result<ModeEnsemble> {
    check_gamma("sample_stationary", gamma)?;
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be at least 1".into()));
    }
    let n = grid.len();
    let dt = grid.dt();
    let mut paths = Array3::zeros((replicates, model.modes(), n));
    let mut jitter = vec![0.0; model.modes()];
    for (j, (&lambda, &q)) in model.lambdas().iter().zip(model.qs()).enumerate() {
        if q == 0.0 {
            continue;
        }
        let lags: Vec<f64> = (0..n).map(|k| matern_cov(gamma, lambda, q, k as f64 * dt)).collect::<Result<_>>()?;
        let cov = DMatrix::from_fn(n, n, |a, b| lags[a.abs_diff(b)]);
        let (l, jit) = factor_with_jitter(cov, lags[0], j)?;
        jitter[j] = jit;
        draw_with_factor(&l, replicates, seed, Purpose::Stationary, j, &mut paths);
    }
    ModeEnsemble::new(
        grid,
        paths,
        EnsembleMeta { gamma, model: model.clone(), construction: Construction::Stationary, jitter },
    )
}

/// Cell-averaged kernel `w_m = dt⁻¹ ∫_{(m-1)dt}^{m dt} τ^{γ-1} e^{-λτ} dτ / Γ(γ)`,
/// returned for `m = 1..=len`.
pub fn convolution_weights(gamma: f64, lambda: f64, dt: f64, len: usize) -> Result<Vec<f64>> {
    (1..=len)
        .map(|m| Ok(gamma_kernel_cell(gamma, lambda, (m - 1) as f64 * dt, m as f64 * dt)? / dt))
        .collect()
}

/// `Z_γ(t_k|t₀) ≈ Σ_{c<k} w_{k-c} ΔW_c` with cell-exact kernel weights.
pub fn sample_convolution<S: IncrementSource + ?Sized>(
    model: &SpectralModel,
    gamma: f64,
    t0: f64,
    grid: TimeGrid,
    noise: &S,
) -> Result<ModeEnsemble> {
    check_gamma("sample_convolution", gamma)?;
    if (grid.t0() - t0).abs() > 1e-12 * grid.dt() {
        return Err(Error::Mismatch(format!("grid starts at {}, not at t0 = {t0}", grid.t0())));
    }
    if !noise.grid().same_as(&grid) || noise.modes() != model.modes() {
        return Err(Error::Mismatch("noise does not match grid or model".into()));
    }
    let n = grid.len();
    let weights: Vec<Vec<f64>> = model
        .lambdas()
        .iter()
        .map(|&l| convolution_weights(gamma, l, grid.dt(), n - 1))
        .collect::<Result<_>>()?;
    let reps = noise.replicates();
    let j_count = model.modes();
    let mut data = vec![0.0; reps * j_count * n];
    data.par_chunks_mut(n).enumerate().for_each(|(idx, out)| {
        let (r, j) = (idx / j_count, idx % j_count);
        let mut dw = vec![0.0; n - 1];
        noise.fill(r, j, &mut dw);
        let y = causal_convolve(&weights[j], &dw);
        out[0] = 0.0;
        out[1..].copy_from_slice(&y);
    });
    let paths = Array3::from_shape_vec((reps, j_count, n), data).expect("shape matches length");
    ModeEnsemble::new(
        grid,
        paths,
        EnsembleMeta {
            gamma,
            model: model.clone(),
            construction: Construction::Convolution { t0 },
            jitter: vec![0.0; j_count],
        },
    )
}

/// A Monte Carlo mean with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Per-mode cross moment `E[X(t_s) X(t_t)]` of mean-zero paths.
pub fn empirical_cov(ensemble: &ModeEnsemble, s_index: usize, t_index: usize) -> Result<Vec<MeanEstimate>> {
    let m = ensemble.replicates();
    if m < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 replicates, got {m}")));
    }
    let n = ensemble.grid.len();
    if s_index >= n || t_index >= n {
        return Err(Error::InvalidInput(format!("time index out of range for {n} nodes")));
    }
    Ok((0..ensemble.modes())
        .map(|j| {
            let prods: Vec<f64> = (0..m)
                .map(|r| ensemble.paths[[r, j, s_index]] * ensemble.paths[[r, j, t_index]])
                .collect();
            mean_and_se(&prods)
        })
        .collect())
}

/// Sample mean with the jackknife standard error (equal to `s/√M` for a mean).
pub fn mean_and_se(x: &[f64]) -> MeanEstimate {
    if x.is_empty() {
        return MeanEstimate { estimate: f64::NAN, std_error: f64::INFINITY };
    }
    if x.iter().all(|v| *v == x[0]) {
        return MeanEstimate { estimate: x[0], std_error: 0.0 };
    }
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let se = if x.len() > 1 { (ss / (m - 1.0) / m).sqrt() } else { f64::INFINITY };
    MeanEstimate { estimate: mean, std_error: se }
}

/// `X(t, x) = Σ_j path_j(t) e_j(x)`, one row per replicate.
pub fn reconstruct_field(model: &SpectralModel, ensemble: &ModeEnsemble, x: f64) -> Result<Array2<f64>> {
    if model.modes() != ensemble.modes() {
        return Err(Error::Mismatch("model and ensemble disagree on the mode count".into()));
    }
    let e = model.basis_at(x)?;
    let (reps, n) = (ensemble.replicates(), ensemble.grid.len());
    let mut out = Array2::zeros((reps, n));
    for r in 0..reps {
        for (j, ej) in e.iter().enumerate() {
            for k in 0..n {
                out[[r, k]] += ensemble.paths[[r, j, k]] * ej;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matern_reference_values() {
        assert_relative_eq!(matern_cov(1.0, 1.0, 1.0, 1.0).unwrap(), 0.183_939_720_585_721_2, max_relative = 1e-12);
        assert_relative_eq!(matern_cov(1.0, 2.0, 1.0, 0.0).unwrap(), 0.25, max_relative = 1e-13);
        assert_eq!(matern_cov(1.3, 2.0, 1.0, 0.4).unwrap(), matern_cov(1.3, 2.0, 1.0, -0.4).unwrap());
        assert!(matern_cov(0.5, 1.0, 1.0, 0.0).is_err());
        assert_eq!(matern_cov(2.0, 1.0, 0.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn mean_and_se_of_identical_values() {
        let e = mean_and_se(&[2.0, 2.0, 2.0]);
        assert_eq!(e.estimate, 2.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn weights_carry_the_kernel_mass() {
        let w = convolution_weights(0.8, 1.5, 0.01, 5000).unwrap();
        let mass: f64 = w.iter().sum::<f64>() * 0.01;
        assert_relative_eq!(mass, 1.5f64.powf(-0.8), max_relative = 1e-12);
    }
}
