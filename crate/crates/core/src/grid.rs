//! Uniform time grids and scalar functions sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_k = t0 + k·dt`, `k = 0..n`, with `dt = (t1 - t0)/(n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || !(t1 > t0) {
            return Err(Error::InvalidInput(format!("grid needs t0 < t1, got [{t0}, {t1}]")));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2 nodes, got {n}")));
        }
        Ok(Self { t0, t1, n })
    }

    /// Grid with `n` nodes spaced `dt` apart starting at `t0`.
    pub fn with_step(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("step must be positive, got {dt}")));
        }
        Self::new(t0, t0 + dt * (n as f64 - 1.0), n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.n as f64 - 1.0)
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.node(k))
    }

    /// Index of the node equal to `t` (within a small fraction of a step).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt();
        let k = x.round();
        if k < 0.0 || k > (self.n - 1) as f64 || (x - k).abs() > 1e-7 {
            None
        } else {
            Some(k as usize)
        }
    }

    /// The sub-grid `k_lo..=k_hi`.
    pub fn slice(&self, k_lo: usize, k_hi: usize) -> Result<Self> {
        if k_hi >= self.n || k_hi <= k_lo {
            return Err(Error::InvalidInput(format!(
                "cannot slice nodes {k_lo}..={k_hi} from a grid of {}",
                self.n
            )));
        }
        Ok(Self { t0: self.node(k_lo), t1: self.node(k_hi), n: k_hi - k_lo + 1 })
    }

    /// Same spacing and node count as `other`, up to rounding.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        let tol = 1e-9 * self.dt();
        self.n == other.n && (self.t0 - other.t0).abs() <= tol && (self.t1 - other.t1).abs() <= tol
    }
}

/// A scalar function sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid function has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: TimeGrid, f: F) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Restriction to the nodes of `sub`, which must lie on this grid.
    pub fn restrict(&self, sub: &TimeGrid) -> Result<Self> {
        let k0 = self
            .grid
            .index_of(sub.t0())
            .ok_or_else(|| Error::Mismatch("sub-grid start is not a node".into()))?;
        if (sub.dt() - self.grid.dt()).abs() > 1e-9 * self.grid.dt() || k0 + sub.len() > self.grid.len() {
            return Err(Error::Mismatch("sub-grid does not fit this grid".into()));
        }
        Ok(Self { grid: *sub, values: self.values[k0..k0 + sub.len()].to_vec() })
    }

    /// Sup-norm distance on the nodes shared by both functions.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        let (a, b) = common_overlap(self, other)?;
        Ok(a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())))
    }
}

/// The overlapping value windows of two functions living on the same lattice.
pub(crate) fn common_overlap<'a>(a: &'a GridFunction, b: &'a GridFunction) -> Result<(&'a [f64], &'a [f64])> {
    let dt = a.grid.dt();
    if (dt - b.grid.dt()).abs() > 1e-9 * dt {
        return Err(Error::Mismatch(format!("grid steps differ: {} vs {}", dt, b.grid.dt())));
    }
    let shift = (b.grid.t0() - a.grid.t0()) / dt;
    if (shift - shift.round()).abs() > 1e-6 {
        return Err(Error::Mismatch("grids are not aligned to a common lattice".into()));
    }
    let shift = shift.round() as i64;
    let (a0, b0) = if shift >= 0 { (shift as usize, 0) } else { (0, (-shift) as usize) };
    if a0 >= a.values.len() || b0 >= b.values.len() {
        return Err(Error::Mismatch("grids do not overlap".into()));
    }
    let len = (a.values.len() - a0).min(b.values.len() - b0);
    Ok((&a.values[a0..a0 + len], &b.values[b0..b0 + len]))
}
