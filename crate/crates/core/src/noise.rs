//! Reproducible Gaussian increments of the truncated `Q`-Wiener process.
//!
//! Every `(purpose, replicate, mode)` triple owns a ChaCha8 stream, so a
//! panel can be regenerated piecewise and in any order with identical bits.

use ndarray::{Array3, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::spectral_model::SpectralModel;

const MAX_MODES: usize = 1 << 24;
const MAX_REPLICATES: u64 = 1 << 32;

/// Stream families; distinct purposes never share a ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Increments = 0,
    Stationary = 1,
    Fractional = 2,
    Inner = 3,
}

/// `len` standard normals from the stream of `(seed, purpose, replicate, mode)`.
pub fn fill_standard_normal(seed: u64, purpose: Purpose, replicate: u64, mode: usize, out: &mut [f64]) {
    debug_assert!(replicate < MAX_REPLICATES && mode < MAX_MODES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (replicate << 24) | mode as u64);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// Anything that can hand out the `n - 1` increments of path `(r, j)`.
pub trait IncrementSource: Sync {
    fn grid(&self) -> TimeGrid;
    fn replicates(&self) -> usize;
    fn modes(&self) -> usize;
    /// Writes increments `ΔW_{r,j,k}`, `k = 0..n-1`, into `out`.
    fn fill(&self, replicate: usize, mode: usize, out: &mut [f64]);
}

/// Lazy increments: nothing is stored, each path is regenerated on request.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    grid: TimeGrid,
    scales: Vec<f64>,
    replicates: usize,
    seed: u64,
}

impl NoiseSource {
    pub fn new(model: &SpectralModel, grid: TimeGrid, replicates: usize, seed: u64) -> Result<Self> {
        if replicates == 0 || replicates as u64 >= MAX_REPLICATES {
            return Err(Error::InvalidInput(format!("replicates = {replicates} out of range")));
        }
        if model.modes() >= MAX_MODES {
            return Err(Error::InvalidInput("too many modes for the stream layout".into()));
        }
        let dt = grid.dt();
        let scales = model.qs().iter().map(|q| (q * dt).sqrt()).collect();
        Ok(Self { grid, scales, replicates, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stores every increment.
    pub fn materialize(&self) -> NoisePanel {
        let (r, j, m) = (self.replicates, self.scales.len(), self.grid.len() - 1);
        let mut data = vec![0.0; r * j * m];
        data.par_chunks_mut(m).enumerate().for_each(|(idx, out)| self.fill(idx / j, idx % j, out));
        NoisePanel {
            grid: self.grid,
            seed: self.seed,
            increments: Array3::from_shape_vec((r, j, m), data).expect("shape matches length"),
        }
    }
}

impl IncrementSource for NoiseSource {
    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn replicates(&self) -> usize {
        self.replicates
    }

    fn modes(&self) -> usize {
        self.scales.len()
    }

    fn fill(&self, replicate: usize, mode: usize, out: &mut [f64]) {
        let s = self.scales[mode];
        if s == 0.0 {
            out.fill(0.0);
            return;
        }
        fill_standard_normal(self.seed, Purpose::Increments, replicate as u64, mode, out);
        for v in out.iter_mut() {
            *v *= s;
        }
    }
}

/// Stored increments, `replicate × mode × (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePanel {
    pub grid: TimeGrid,
    pub seed: u64,
    pub increments: Array3<f64>,
}

impl NoisePanel {
    /// Wraps externally built increments (seed is recorded as given).
    pub fn from_increments(grid: TimeGrid, increments: Array3<f64>, seed: u64) -> Result<Self> {
        if increments.shape()[2] + 1 != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} increments per path for a grid of {} nodes",
                increments.shape()[2],
                grid.len()
            )));
        }
        Ok(Self { grid, seed, increments })
    }

    pub fn path(&self, replicate: usize, mode: usize) -> ArrayView1<'_, f64> {
        self.increments.slice(ndarray::s![replicate, mode, ..])
    }
}

impl IncrementSource for NoisePanel {
    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn replicates(&self) -> usize {
        self.increments.shape()[0]
    }

    fn modes(&self) -> usize {
        self.increments.shape()[1]
    }

    fn fill(&self, replicate: usize, mode: usize, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(self.path(replicate, mode)) {
            *o = *v;
        }
    }
}

/// Increments `N(0, q_j dt)` keyed by `(seed, replicate, mode)`.
pub fn gen_noise(model: &SpectralModel, grid: TimeGrid, replicates: usize, seed: u64) -> Result<NoisePanel> {
    Ok(NoiseSource::new(model, grid, replicates, seed)?.materialize())
}
