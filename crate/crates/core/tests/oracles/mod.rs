//! Reference computations that share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// ln Γ(k/2) for a positive integer k, by the exact recurrence from Γ(1) = 1
/// and Γ(1/2) = √π.
pub fn ln_gamma_half_integer(k: u32) -> f64 {
    assert!(k > 0);
    let (mut acc, mut x) = if k.is_multiple_of(2) {
        (0.0, 1.0)
    } else {
        (0.5 * PI.ln(), 0.5)
    };
    let target = f64::from(k) / 2.0;
    while x < target {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Density of the F(d1, d2) distribution at x > 0, for integer degrees of freedom.
pub fn f_density(x: f64, d1: u32, d2: u32) -> f64 {
    if x <= 0.0 {
        return if d1 == 2 { 1.0 } else { 0.0 };
    }
    let (a, b) = (f64::from(d1) / 2.0, f64::from(d2) / 2.0);
    let ln_beta =
        ln_gamma_half_integer(d1) + ln_gamma_half_integer(d2) - ln_gamma_half_integer(d1 + d2);
    let r = f64::from(d1) / f64::from(d2);
    (a * r.ln() + (a - 1.0) * x.ln() - (a + b) * (1.0 + r * x).ln() - ln_beta).exp()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    adaptive(f, a, fa, b, fb, m, fm, whole, tol, 60)
}

/// P(F <= x) by direct integration of the density.
pub fn f_cdf_quadrature(x: f64, d1: u32, d2: u32) -> f64 {
    integrate(&|t| f_density(t, d1, d2), 0.0, x, 1e-13)
}

/// Principal eigenvector by plain power iteration, normalized to sum 1.
pub fn power_iteration(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[i][j] * v[j]).sum())
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if diff < 1e-15 {
            break;
        }
    }
    v
}

/// Angle between two vectors, accurate for nearly parallel inputs.
pub fn angle(u: &[f64], v: &[f64]) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a / nu - b / nv).powi(2))
        .sum::<f64>()
        .sqrt();
    2.0 * (diff / 2.0).asin()
}

/// Two-factor ANOVA sums of squares by the textbook formulas, naive summation.
pub struct SumsOfSquares {
    pub rows: f64,
    pub cols: f64,
    pub error: f64,
    pub total: f64,
}

pub fn sums_of_squares(x: &[Vec<f64>]) -> SumsOfSquares {
    let r = x.len();
    let c = x[0].len();
    let grand: f64 = x.iter().flatten().sum::<f64>() / (r * c) as f64;
    let row_mean: Vec<f64> = x
        .iter()
        .map(|row| row.iter().sum::<f64>() / c as f64)
        .collect();
    let col_mean: Vec<f64> = (0..c)
        .map(|j| x.iter().map(|row| row[j]).sum::<f64>() / r as f64)
        .collect();
    let rows = c as f64 * row_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let cols = r as f64 * col_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let total = x.iter().flatten().map(|v| (v - grand).powi(2)).sum::<f64>();
    let mut error = 0.0;
    for i in 0..r {
        for j in 0..c {
            error += (x[i][j] - row_mean[i] - col_mean[j] + grand).powi(2);
        }
    }
    SumsOfSquares {
        rows,
        cols,
        error,
        total,
    }
}

/// Mid-range shares of a fully observed vector.
pub fn shares(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| v / total).collect()
}
