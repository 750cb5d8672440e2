//! The pair `(A, Q)` truncated to `J` shared eigenmodes.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::ln_gamma;

/// Per-mode eigenvalues of `A` (decay rates) and of `Q` (noise weights).
///
/// When `length` is set the modes are the Dirichlet sine basis on `(0, length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    lambdas: Vec<f64>,
    qs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
}

/// How the noise weights `q_j` depend on the mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QProfile {
    Constant(f64),
    /// `q_j = (κ² + (jπ/L)²)^{-α}`
    Decay { alpha: f64 },
}

impl SpectralModel {
    pub fn new(lambdas: Vec<f64>, qs: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidInput("model needs at least one mode".into()));
        }
        if lambdas.len() != qs.len() {
            return Err(Error::Mismatch(format!("{} lambdas but {} qs", lambdas.len(), qs.len())));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput(format!("decay rate {l} is not positive")));
        }
        if let Some(q) = qs.iter().find(|q| !(**q >= 0.0 && q.is_finite())) {
            return Err(Error::InvalidInput(format!("noise weight {q} is negative")));
        }
        Ok(Self { lambdas, qs, length: None })
    }

    /// Attaches the sine basis on `(0, length)`.
    pub fn with_length(mut self, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!("domain length {length} is not positive")));
        }
        self.length = Some(length);
        Ok(self)
    }

    /// `A = (κ² − Δ)^β` with Dirichlet conditions on `(0, L)`.
    pub fn build_whittle_matern(kappa: f64, beta: f64, length: f64, modes: usize, q: QProfile) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("beta", beta), ("L", length)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} = {v} must be positive")));
            }
        }
        if modes == 0 {
            return Err(Error::InvalidInput("J must be at least 1".into()));
        }
        let base: Vec<f64> = (1..=modes)
            .map(|j| kappa * kappa + (j as f64 * PI / length).powi(2))
            .collect();
        let lambdas = base.iter().map(|b| b.powf(beta)).collect();
        let qs = match q {
            QProfile::Constant(c) => vec![c; modes],
            QProfile::Decay { alpha } => base.iter().map(|b| b.powf(-alpha)).collect(),
        };
        Self::new(lambdas, qs)?.with_length(length)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(s)?;
        cfg.build()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn qs(&self) -> &[f64] {
        &self.qs
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn length(&self) -> Option<f64> {
        self.length
    }

    pub fn trace_q(&self) -> f64 {
        self.qs.iter().sum()
    }

    /// `w = min_j λ_j`; the semigroup bound constant is 1.
    pub fn stability_margin(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `e_j(x) = √(2/L) sin(jπx/L)`, `j = 1..J`.
    pub fn basis_at(&self, x: f64) -> Result<Vec<f64>> {
        let l = self
            .length
            .ok_or_else(|| Error::InvalidInput("model carries no spatial basis".into()))?;
        if !(x > 0.0 && x < l) {
            return Err(Error::InvalidInput(format!("x = {x} outside (0, {l})")));
        }
        let c = (2.0 / l).sqrt();
        Ok((1..=self.modes()).map(|j| c * (j as f64 * PI * x / l).sin()).collect())
    }
}

/// JSON model description: explicit eigenvalues, or the Whittle-Matérn builder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Explicit {
        lambdas: Vec<f64>,
        qs: Vec<f64>,
        #[serde(default, alias = "L")]
        length: Option<f64>,
    },
    Builder {
        kappa: f64,
        beta: f64,
        #[serde(rename = "L")]
        length: f64,
        #[serde(rename = "J")]
        modes: usize,
        #[serde(default)]
        q_alpha: Option<f64>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<SpectralModel> {
        match self {
            ModelConfig::Explicit { lambdas, qs, length } => {
                let m = SpectralModel::new(lambdas.clone(), qs.clone())?;
                match length {
                    Some(l) => m.with_length(*l),
                    None => Ok(m),
                }
            }
            ModelConfig::Builder { kappa, beta, length, modes, q_alpha } => {
                let q = match q_alpha {
                    Some(a) => QProfile::Decay { alpha: *a },
                    None => QProfile::Constant(1.0),
                };
                SpectralModel::build_whittle_matern(*kappa, *beta, *length, *modes, q)
            }
        }
    }
}

/// Per-mode values of `∫_0^∞ t^{2γ₀-2} q_j e^{-2λ_j t} dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub gamma0: f64,
    pub per_mode: Vec<f64>,
    /// `None` when the integral diverges.
    pub total: Option<f64>,
    pub satisfied: bool,
    pub divergent: bool,
}

pub fn assumption_integral(model: &SpectralModel, gamma0: f64) -> Result<AssumptionReport> {
    if !gamma0.is_finite() {
        return Err(Error::InvalidInput(format!("gamma0 = {gamma0} is not finite")));
    }
    if gamma0 <= 0.5 {
        return Ok(AssumptionReport {
            gamma0,
            per_mode: Vec::new(),
            total: None,
            satisfied: false,
            divergent: true,
        });
    }
    let e = 2.0 * gamma0 - 1.0;
    let lg = ln_gamma(e)?;
    let per_mode: Vec<f64> = model
        .lambdas
        .iter()
        .zip(&model.qs)
        .map(|(l, q)| if *q == 0.0 { 0.0 } else { q * (lg - e * (2.0 * l).ln()).exp() })
        .collect();
    let total = per_mode.iter().sum();
    Ok(AssumptionReport { gamma0, per_mode, total: Some(total), satisfied: true, divergent: false })
}
