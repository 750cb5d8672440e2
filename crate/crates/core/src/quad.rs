//! Quadrature rules: Gauss-Legendre for smooth panels, and double-exponential
//! (tanh-sinh / exp-sinh) rules for integrands with algebraic endpoint
//! singularities or slow algebraic decay.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn g16() -> &'static GaussLegendre {
        static G: OnceLock<GaussLegendre> = OnceLock::new();
        G.get_or_init(|| GaussLegendre::new(16))
    }

    /// Shared 10-point rule.
    pub fn g10() -> &'static GaussLegendre {
        static G: OnceLock<GaussLegendre> = OnceLock::new();
        G.get_or_init(|| GaussLegendre::new(10))
    }

    /// Integral of `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// Composite rule on `panels` equal panels of `[a, b]`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> f64 {
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * w;
                self.integrate(&mut f, lo, lo + w)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// A quadrature value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

const DE_TMAX: f64 = 4.5;
const DE_MAX_LEVEL: u32 = 12;

/// Tanh-sinh quadrature on a finite interval `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` with the two distances computed
/// without cancellation, so singular factors like `(b - x)^p` can be formed
/// accurately right up to the endpoints.
pub fn tanh_sinh_dist<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if a == b {
        return Ok(Estimate { value: 0.0, abs_err: 0.0 });
    }
    if b < a {
        let g = |x: f64, dl: f64, dr: f64| f(x, dr, dl);
        let e = tanh_sinh_dyn(&g, b, a, abs_tol, rel_tol)?;
        return Ok(Estimate { value: -e.value, abs_err: e.abs_err });
    }
    tanh_sinh_dyn(&f, a, b, abs_tol, rel_tol)
}

fn tanh_sinh_dyn(f: &dyn Fn(f64, f64, f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let c = FRAC_PI_2 * t.cosh();
        // 1 - tanh|s| without cancellation
        let e2 = (-2.0 * s.abs()).exp();
        let one_minus = 2.0 * e2 / (1.0 + e2);
        let sech2 = 4.0 * e2 / ((1.0 + e2) * (1.0 + e2));
        let w = half * c * sech2;
        let d = half * one_minus;
        if d == 0.0 || w == 0.0 {
            return 0.0;
        }
        let (x, dl, dr) = if t < 0.0 {
            (a + d, d, 2.0 * half - d)
        } else {
            (b - d, 2.0 * half - d, d)
        };
        if dl <= 0.0 || dr <= 0.0 {
            return 0.0;
        }
        let v = f(x, dl, dr);
        if v == 0.0 {
            0.0
        } else {
            w * v
        }
    };
    de_refine(eval, abs_tol, rel_tol, DE_TMAX, DE_TMAX)
}

/// Tanh-sinh quadrature for a plain integrand.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    tanh_sinh_dist(|x, _, _| f(x), a, b, abs_tol, rel_tol)
}

/// Exp-sinh quadrature on `[a, ∞)`. The integrand receives `(x, x - a)`.
pub fn exp_sinh_dist<F>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate>
where
    F: Fn(f64, f64) -> f64,
{
    let eval = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        if s > 700.0 {
            return 0.0;
        }
        let d = s.exp();
        let w = FRAC_PI_2 * t.cosh() * d;
        if d == 0.0 {
            return 0.0;
        }
        let v = f(a + d, d);
        if v == 0.0 {
            0.0
        } else {
            w * v
        }
    };
    de_refine(eval, abs_tol, rel_tol, 5.0, 5.0)
}

/// Exp-sinh quadrature for a plain integrand on `[a, ∞)`.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    exp_sinh_dist(|x, _| f(x), a, abs_tol, rel_tol)
}

fn de_refine<G: Fn(f64) -> f64>(g: G, abs_tol: f64, rel_tol: f64, t_lo: f64, t_hi: f64) -> Result<Estimate> {
    let mut h = 0.5;
    let mut sum = g(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_hi && t > t_lo {
            break;
        }
        if t <= t_hi {
            sum += g(t);
        }
        if t <= t_lo {
            sum += g(-t);
        }
        k += 1;
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for _ in 1..=DE_MAX_LEVEL {
        h *= 0.5;
        // new nodes are odd multiples of h
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_hi && t > t_lo {
                break;
            }
            if t <= t_hi {
                sum += g(t);
            }
            if t <= t_lo {
                sum += g(-t);
            }
            k += 2;
        }
        let cur = sum * h;
        err = (cur - prev).abs();
        prev = cur;
        if !cur.is_finite() {
            return Err(Error::Quadrature { err: f64::INFINITY, tol: abs_tol });
        }
        if err <= abs_tol.max(rel_tol * cur.abs()) {
            return Ok(Estimate { value: cur, abs_err: err });
        }
    }
    let tol = abs_tol.max(rel_tol * prev.abs());
    if err <= 100.0 * tol {
        // the level difference overestimates tanh-sinh error considerably
        Ok(Estimate { value: prev, abs_err: err })
    } else {
        Err(Error::Quadrature { err, tol })
    }
}
