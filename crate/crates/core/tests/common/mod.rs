//! Test-only reference computations, independent of the library code paths.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Double-exponential (tanh-sinh) quadrature on `[a, b]`; tolerates
/// integrable endpoint singularities such as `ln(cos(x))` at `+-pi/2`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let h = 1.0 / 64.0;
    let mut sum = f(mid) * (PI / 2.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        // distance of the node from either endpoint, in units of `half`
        let gap = 2.0 / ((2.0 * u).exp() + 1.0);
        let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        if gap * half < 1e-300 || w < 1e-300 {
            break;
        }
        let left = a + half * gap;
        let right = b - half * gap;
        if left > a && right < b {
            sum += w * (f(left) + f(right));
        }
        k += 1;
    }
    sum * h * half
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Row-center latitudes written out directly from the ERP definition.
pub fn erp_latitudes(rows: usize) -> Vec<f64> {
    (0..rows)
        .map(|r| PI / 2.0 - (r as f64 + 0.5) * PI / rows as f64)
        .collect()
}

/// Per-pixel weighted squared error, accumulated naively.
pub fn naive_weighted_mse(a: &[u16], b: &[u16], w: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&x, &y), &wi) in a.iter().zip(b).zip(w) {
        let d = x as f64 - y as f64;
        num += wi * d * d;
        den += wi;
    }
    num / den
}

/// BD-rate of the 64-row simulator computed without interpolation: both
/// strategies have closed-form rate-vs-quality curves, integrated with
/// Simpson's rule over the overlapping quality interval.
pub fn analytic_sim_bd_rate(rows: usize, c: f64, k: f64, sweep: &[f64]) -> f64 {
    let lat = erp_latitudes(rows);
    let cos: Vec<f64> = lat.iter().map(|p| p.cos()).collect();
    let n = rows as f64;
    let arith = cos.iter().sum::<f64>() / n;
    let geo = (cos.iter().map(|x| x.ln()).sum::<f64>() / n).exp();
    // adapted: wd = 1/(K lambda0 mean(cos)), rate = sum ln(C K lambda0 cos)/K
    let adapted_q = |l0: f64| -10.0 * (1.0 / (k * l0 * arith)).log10();
    let q_lo_a = adapted_q(sweep[0]);
    let q_hi_a = adapted_q(sweep[sweep.len() - 1]);
    // uniform at matched rate: D = C exp(-K R / n); equals adapted quality shifted down by 10 log10(A/G)
    let shift = 10.0 * (arith / geo).log10();
    let (q_lo_u, q_hi_u) = (q_lo_a - shift, q_hi_a - shift);
    let lo = q_lo_a.max(q_lo_u);
    let hi = q_hi_a.min(q_hi_u);
    let rate_uniform = |q: f64| n / k * (c * 10f64.powf(q / 10.0)).ln();
    let rate_adapted = |q: f64| n / k * ((c * 10f64.powf(q / 10.0)).ln() - (arith / geo).ln());
    let gap = simpson(|q| rate_adapted(q).log10() - rate_uniform(q).log10(), lo, hi, 20_000) / (hi - lo);
    (10f64.powf(gap) - 1.0) * 100.0
}
