//! Causal discrete convolution `y_k = Σ_{s=0}^{k} w_s f_{k-s}`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const DIRECT_LIMIT: usize = 64 * 64;

pub fn causal_convolve(w: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let m = w.len().min(n);
    if n == 0 || m == 0 {
        return vec![0.0; n];
    }
    if n.saturating_mul(m) <= DIRECT_LIMIT * 16 || m <= 32 {
        return direct(&w[..m], f);
    }
    let size = (n + m).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| -> Vec<Complex<f64>> {
        (0..size).map(|i| Complex::new(v.get(i).copied().unwrap_or(0.0), 0.0)).collect()
    };
    let mut a = pad(&w[..m]);
    let mut b = pad(f);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    a[..n].iter().map(|c| c.re * scale).collect()
}

fn direct(w: &[f64], f: &[f64]) -> Vec<f64> {
    let m = w.len();
    (0..f.len())
        .map(|k| {
            let top = k.min(m - 1);
            let mut s = 0.0;
            for j in 0..=top {
                s += w[j] * f[k - j];
            }
            s
        })
        .collect()
}
