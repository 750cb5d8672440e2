//! Reference computations for the test suites.
//!
//! Everything here is deliberately written along a different numerical route
//! than the library: globally adaptive Gauss-Kronrod (G7/K15) bisection instead
//! of double-exponential or Gauss-Legendre rules, plain series instead of
//! Lanczos, brute-force sums instead of closed forms. Nothing in this crate is
//! used by production code.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Seg {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive G7/K15 on a finite interval. Endpoint singularities are
/// fine as long as they are integrable; the node set never touches `a` or `b`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let (v, e) = gk15(&f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Seg { a: lo, b: hi, val: v, err: e });
    let mut total = v;
    let mut err = e;
    for _ in 0..200_000 {
        if err <= rel_tol * total.abs() || err < 1e-300 {
            break;
        }
        let s = heap.pop().unwrap();
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            heap.push(s);
            break;
        }
        let (v1, e1) = gk15(&f, s.a, m);
        let (v2, e2) = gk15(&f, m, s.b);
        total += v1 + v2 - s.val;
        err += e1 + e2 - s.err;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
    }
    // resum to shed accumulated cancellation in the running total
    sign * heap.iter().map(|s| s.val).sum::<f64>()
}

/// Integral over `[a, ∞)` through the map `x = a + u / (1 - u)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> f64 {
    integrate(
        |u| {
            let w = 1.0 - u;
            let x = a + u / w;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / (w * w)
            }
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// Integral over `(-∞, b]`.
pub fn integrate_from_neg_inf<F: Fn(f64) -> f64>(f: F, b: f64, rel_tol: f64) -> f64 {
    integrate_to_inf(|x| f(2.0 * b - x), b, rel_tol)
}

/// Integral over `[a, b]` with interior breakpoints where the integrand is
/// singular or kinked.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], rel_tol: f64) -> f64 {
    let mut pts: Vec<f64> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], rel_tol)).sum()
}

/// `ln Γ(x)` for `x > 0` via upward shifting and the Stirling series.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < 30.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
        - 1.0 / (1680.0 * z * z2 * z2 * z2)
        + 1.0 / (1188.0 * z * z2 * z2 * z2 * z2);
    shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

pub fn gamma_stirling(x: f64) -> f64 {
    ln_gamma_stirling(x).exp()
}

/// `Γ(a, x) / Γ(a)` by quadrature of the defining integral.
pub fn upper_gamma_quad(a: f64, x: f64) -> f64 {
    let v = integrate_to_inf(|t| t.powf(a - 1.0) * (-t).exp(), x, 1e-13);
    v / gamma_stirling(a)
}

/// `K_ν(x)` from the integral representation, by adaptive Gauss-Kronrod.
pub fn bessel_k_quad(nu: f64, x: f64) -> f64 {
    integrate_to_inf(
        |u| {
            let e = -x * u.cosh();
            if e < -745.0 {
                0.0
            } else {
                e.exp() * (nu * u).cosh()
            }
        },
        0.0,
        1e-12,
    )
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Naive O(n m) causal convolution `y_k = Σ_s w_s f_{k-s}`.
pub fn causal_convolve_naive(w: &[f64], f: &[f64]) -> Vec<f64> {
    (0..f.len())
        .map(|k| {
            let top = k.min(w.len().saturating_sub(1));
            (0..=top).map(|s| w[s] * f[k - s]).sum()
        })
        .collect()
}

/// Solves `u' + λ u = f` with `u(t0) = 0` by the exponential integrator with
/// piecewise-linear forcing, on a uniform grid.
pub fn first_order_solve(f: &[f64], dt: f64, lambda: f64) -> Vec<f64> {
    let mut u = vec![0.0; f.len()];
    let e = (-lambda * dt).exp();
    // ∫_0^dt e^{-λ(dt-s)} (1 - s/dt) ds and ∫_0^dt e^{-λ(dt-s)} s/dt ds
    let (a0, a1) = if lambda * dt < 1e-6 {
        (0.5 * dt, 0.5 * dt)
    } else {
        let l = lambda;
        let i0 = (1.0 - e) / l;
        let i1 = (dt - i0) / (l * dt);
        (i0 - i1, i1)
    };
    for k in 1..f.len() {
        u[k] = e * u[k - 1] + a0 * f[k - 1] + a1 * f[k];
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_handles_endpoint_singularity() {
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite() {
        let v = integrate_to_inf(|x| (-x).exp(), 0.0, 1e-13);
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate_to_inf(|x| 1.0 / (x * x), 1.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stirling_gamma() {
        assert!((gamma_stirling(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma_stirling(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }
}
