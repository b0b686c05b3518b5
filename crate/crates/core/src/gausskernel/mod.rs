//! Exact moments of Gaussian-weighted polynomials.
//!
//! Every density in this crate is a Maxwellian times a (piecewise)
//! polynomial, so its moments reduce to segment integrals
//! `∫_{lo}^{hi} e^{-z²} z^k dz` evaluated through complete and incomplete
//! gamma functions. A panel Gauss–Legendre rule over the same segments is
//! provided for products that lose precision when expanded in monomials.

mod gamma;
mod quadrature;

use std::f64::consts::PI;
use std::sync::OnceLock;

pub use gamma::{gamma, ln_gamma, lower_incomplete_gamma, regularized_pair, upper_incomplete_gamma};
pub use quadrature::{integrate_with_breaks, quadrature_oracle};

use crate::error::{Error, Result};
use crate::polyspace::Polynomial;

/// One-dimensional Maxwellian `ρ (2πθ)^{-1/2} exp(-(v-u)²/(2θ))`, with the
/// gas constant folded into `θ = RT`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maxwellian {
    pub rho: f64,
    pub u: f64,
    pub theta: f64,
}

impl Maxwellian {
    pub fn new(rho: f64, u: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("Maxwellian density must be positive, got {rho}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("Maxwellian temperature must be positive, got {theta}")));
        }
        if !u.is_finite() {
            return Err(Error::Domain(format!("Maxwellian velocity must be finite, got {u}")));
        }
        Ok(Self { rho, u, theta })
    }

    pub fn standard() -> Self {
        Self { rho: 1.0, u: 0.0, theta: 1.0 }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let d = v - self.u;
        self.rho / (2.0 * PI * self.theta).sqrt() * (-d * d / (2.0 * self.theta)).exp()
    }

    /// Width `√(2θ)` of the reduced variable `z = (v - u)/√(2θ)`.
    pub fn width(&self) -> f64 {
        (2.0 * self.theta).sqrt()
    }

    /// The velocity frame in which this Maxwellian is `ρ π^{-1/2} e^{-z²}`.
    pub fn reduced_frame(&self) -> Frame {
        Frame { center: self.u, scale: self.width() }
    }
}

/// Interval of the extended real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("invalid interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Affine velocity variable `w = (v - center)/scale` in which basis
/// polynomials are expressed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub center: f64,
    pub scale: f64,
}

impl Frame {
    pub const IDENTITY: Frame = Frame { center: 0.0, scale: 1.0 };

    pub fn new(center: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && center.is_finite()) {
            return Err(Error::Domain(format!("invalid frame center={center} scale={scale}")));
        }
        Ok(Self { center, scale })
    }

    pub fn to_frame(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }

    pub fn to_velocity(&self, w: f64) -> f64 {
        self.center + self.scale * w
    }

    pub fn interval_to_velocity(&self, iv: Interval) -> Interval {
        Interval { lo: self.to_velocity(iv.lo), hi: self.to_velocity(iv.hi) }
    }

    pub fn interval_to_frame(&self, iv: Interval) -> Interval {
        Interval { lo: self.to_frame(iv.lo), hi: self.to_frame(iv.hi) }
    }

    /// Coefficients `(a, b)` with `z = a + b w` for the reduced variable of `m`.
    fn reduced_map(&self, m: &Maxwellian) -> (f64, f64) {
        let width = m.width();
        ((self.center - m.u) / width, self.scale / width)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `∫_{x0}^{x1} t^k e^{-t²} dt` for `0 ≤ x0 ≤ x1 ≤ ∞`, taking the
/// difference on whichever side of the incomplete gamma avoids cancellation.
fn half_line_segment(k: u32, x0: f64, x1: f64) -> f64 {
    if x0 >= x1 {
        return 0.0;
    }
    let a = 0.5 * (k as f64 + 1.0);
    let (p0, q0) = regularized_pair(a, x0 * x0).expect("valid gamma arguments");
    let (p1, q1) = regularized_pair(a, x1 * x1).expect("valid gamma arguments");
    let diff = if q0 < 0.5 { q0 - q1 } else { p1 - p0 };
    0.5 * gamma(a) * diff
}

/// `∫_{lo}^{hi} e^{-v²} v^k dv` through the signed two-term gamma rule:
/// `½ sign^{1+k}(x) (Γ((1+k)/2) - Γ((1+k)/2, x²))` evaluated at both ends.
pub fn gauss_segment_moment(k: u32, iv: Interval) -> f64 {
    let (lo, hi) = (iv.lo, iv.hi);
    if lo >= hi {
        return 0.0;
    }
    // Parity factor for the mirrored half line.
    let odd = if k % 2 == 1 { -1.0 } else { 1.0 };
    if lo >= 0.0 {
        half_line_segment(k, lo, hi)
    } else if hi <= 0.0 {
        odd * half_line_segment(k, -hi, -lo)
    } else {
        let neg = odd * half_line_segment(k, 0.0, -lo);
        let pos = half_line_segment(k, 0.0, hi);
        if k % 2 == 1 && lo == -hi {
            // exact cancellation by the sign rule
            return 0.0;
        }
        pos + neg
    }
}

/// Direct transcription of the two-term rule, kept for cross-checking
/// [`gauss_segment_moment`].
pub fn gauss_segment_moment_signed(k: u32, iv: Interval) -> f64 {
    let a = 0.5 * (k as f64 + 1.0);
    let term = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let lower = gamma(a) - upper_incomplete_gamma(a, x * x).expect("valid gamma arguments");
        0.5 * lower * sign(x).powi(k as i32 + 1)
    };
    term(iv.hi) - term(iv.lo)
}

/// `∫_{iv} p(w) 𝓜(v) dv` where `p` is a polynomial in the frame variable
/// `w = (v - c)/s` and `iv` is given in that variable.
pub fn frame_poly_moment(m: &Maxwellian, frame: &Frame, p: &Polynomial, iv: Interval) -> f64 {
    if iv.lo >= iv.hi || p.is_zero() {
        return 0.0;
    }
    let (a, b) = frame.reduced_map(m);
    // p(w) with w = (z - a)/b
    let q = p.compose_affine(-a / b, 1.0 / b);
    let z_iv = Interval { lo: a + b * iv.lo, hi: a + b * iv.hi };
    let sum: f64 = q
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(n, c)| c * gauss_segment_moment(n as u32, z_iv))
        .sum();
    m.rho / PI.sqrt() * sum
}

/// Frame moments `∫_{iv} w^n 𝓜(v) dv` for `n < count`.
pub fn frame_power_moments(m: &Maxwellian, frame: &Frame, iv: Interval, count: usize) -> Vec<f64> {
    let (a, b) = frame.reduced_map(m);
    let z_iv = Interval { lo: a + b * iv.lo, hi: a + b * iv.hi };
    let segs: Vec<f64> = (0..count).map(|n| gauss_segment_moment(n as u32, z_iv)).collect();
    if a == 0.0 {
        // w = z / b
        return (0..count).map(|n| m.rho / PI.sqrt() * segs[n] / b.powi(n as i32)).collect();
    }
    (0..count)
        .map(|n| {
            let p = Polynomial::monomial(n).compose_affine(-a / b, 1.0 / b);
            m.rho / PI.sqrt() * p.coeffs().iter().zip(&segs).map(|(c, s)| c * s).sum::<f64>()
        })
        .collect()
}

/// `∫_{iv} p(v) 𝓜(v) dv` for a polynomial in the velocity itself.
pub fn maxwellian_poly_moment(m: &Maxwellian, p: &Polynomial, iv: Interval) -> f64 {
    frame_poly_moment(m, &Frame::IDENTITY, p, iv)
}

const PANEL_ORDER: usize = 24;
const PANEL_WIDTH: f64 = 0.5;
/// Reduced-variable cutoff; `e^{-z²}` is below 1e-73 beyond it.
const PANEL_CUTOFF: f64 = 13.0;

fn legendre_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = PANEL_ORDER;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

/// Quadrature nodes `(w, weight)` such that `Σ weight·h(w) ≈ ∫_{iv} h(w) 𝓜(v) dv`
/// for smooth `h` of moderate polynomial growth, with `iv` in frame variable.
///
/// Panels are laid out in the reduced variable of `m` (width 0.5, 24 points),
/// clipped to `|z| ≤ 13`, so the rule is converged to rounding for
/// polynomial-times-Gaussian integrands of degree below about 60.
pub fn panel_nodes(m: &Maxwellian, frame: &Frame, iv: Interval, out: &mut Vec<(f64, f64)>) {
    let (a, b) = frame.reduced_map(m);
    let zlo = (a + b * iv.lo).max(-PANEL_CUTOFF);
    let zhi = (a + b * iv.hi).min(PANEL_CUTOFF);
    if zlo >= zhi {
        return;
    }
    let panels = ((zhi - zlo) / PANEL_WIDTH).ceil().max(1.0) as usize;
    let h = (zhi - zlo) / panels as f64;
    let norm = m.rho / PI.sqrt();
    for j in 0..panels {
        let lo = zlo + j as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, wt) in legendre_rule() {
            let z = mid + 0.5 * h * x;
            out.push(((z - a) / b, norm * 0.5 * h * wt * (-z * z).exp()));
        }
    }
}
