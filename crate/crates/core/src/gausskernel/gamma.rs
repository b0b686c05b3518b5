//! Complete and incomplete gamma functions.
//!
//! The regularized pair `P(a, x)`, `Q(a, x)` is evaluated by the power series
//! for `x < a + 1` and by Lentz's continued fraction otherwise, so whichever
//! of the two is small is always obtained without cancellation.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of `Γ(a)` for `a > 0`.
pub fn ln_gamma(a: f64) -> f64 {
    if let Some(g) = half_integer_gamma(a) {
        return g.ln();
    }
    if a < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma(1.0 - a);
    }
    let x = a - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `Γ(a)` for `a > 0`. Integer and half-integer arguments use exact products.
pub fn gamma(a: f64) -> f64 {
    half_integer_gamma(a).unwrap_or_else(|| ln_gamma(a).exp())
}

/// Exact product form of `Γ(a)` when `2a` is a positive integer small enough
/// not to overflow.
fn half_integer_gamma(a: f64) -> Option<f64> {
    let twice = 2.0 * a;
    if a <= 0.0 || a > 170.0 || twice.fract() != 0.0 {
        return None;
    }
    let n = twice as u64;
    if n.is_multiple_of(2) {
        // Γ(m) = (m-1)!
        let m = n / 2;
        Some((1..m).fold(1.0, |acc, i| acc * i as f64))
    } else {
        // Γ(m + 1/2) = sqrt(pi) * prod_{i=1}^{m} (i - 1/2)
        let m = (n - 1) / 2;
        Some((1..=m).fold(std::f64::consts::PI.sqrt(), |acc, i| acc * (i as f64 - 0.5)))
    }
}

/// Regularized incomplete gamma functions `(P(a, x), Q(a, x))`.
///
/// `x = +inf` is accepted and gives `(1, 0)`.
pub fn regularized_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma requires a > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x > a + 1.0 && log_prefactor < -800.0 {
        // Q underflows
        return Ok((1.0, 0.0));
    }
    if x < a + 1.0 {
        let p = lower_series(a, x, log_prefactor)?;
        Ok((p, 1.0 - p))
    } else {
        let q = upper_fraction(a, x, log_prefactor)?;
        Ok((1.0 - q, q))
    }
}

fn lower_series(a: f64, x: f64, log_prefactor: f64) -> Result<f64> {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum * log_prefactor.exp());
        }
    }
    Err(Error::Domain(format!("incomplete gamma series failed for a={a}, x={x}")))
}

fn upper_fraction(a: f64, x: f64, log_prefactor: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(log_prefactor.exp() * h);
        }
    }
    Err(Error::Domain(format!("incomplete gamma continued fraction failed for a={a}, x={x}")))
}

/// Upper incomplete gamma `Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt`.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    let (_, q) = regularized_pair(a, x)?;
    Ok(gamma(a) * q)
}

/// Lower incomplete gamma `γ(a, x) = ∫_0^x t^{a-1} e^{-t} dt`.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    let (p, _) = regularized_pair(a, x)?;
    Ok(gamma(a) * p)
}
