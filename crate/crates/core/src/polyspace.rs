//! Dense polynomials in the monomial basis, real roots and positivity sets.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gausskernel::Interval;

/// Relative size below which trailing coefficients do not count toward the degree.
pub const DEGREE_THRESHOLD: f64 = 1e-14;

/// Polynomial `Σ coeffs[i] x^i`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        Self { coeffs }
    }

    /// `a + b x`.
    pub fn linear(a: f64, b: f64) -> Self {
        Self { coeffs: vec![a, b] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Degree after discarding trailing coefficients below
    /// [`DEGREE_THRESHOLD`] times the largest one; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return None;
        }
        self.coeffs.iter().rposition(|c| c.abs() > DEGREE_THRESHOLD * scale)
    }

    /// Copy truncated to [`Polynomial::degree`].
    pub fn trimmed(&self) -> Self {
        match self.degree() {
            Some(d) => Self { coeffs: self.coeffs[..=d].to_vec() },
            None => Self::zero(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn derivative(&self) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect() }
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| &acc * self)
    }

    /// `x ↦ p(a + b x)`, expanded by Horner's scheme on polynomials.
    pub fn compose_affine(&self, a: f64, b: f64) -> Self {
        if a == 0.0 {
            let mut s = 1.0;
            return Self {
                coeffs: self
                    .coeffs
                    .iter()
                    .map(|c| {
                        let v = c * s;
                        s *= b;
                        v
                    })
                    .collect(),
            };
        }
        let inner = Self::linear(a, b);
        self.coeffs.iter().rev().fold(Self::zero(), |acc, c| &(&acc * &inner) + &Self::constant(*c))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|i| self.coeffs.get(i).copied().unwrap_or(0.0) + rhs.coeffs.get(i).copied().unwrap_or(0.0))
            .collect();
        Polynomial { coeffs }
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }
}

pub fn poly_eval(p: &Polynomial, v: f64) -> f64 {
    p.eval(v)
}

/// Diagonal similarity scaling of a square matrix (radix-2 Parlett–Reinsch).
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0_f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

fn newton_polish(p: &Polynomial, dp: &Polynomial, mut x: f64) -> f64 {
    let mut best = x;
    let mut best_val = p.eval(x).abs();
    for _ in 0..4 {
        let d = dp.eval(x);
        if d == 0.0 {
            break;
        }
        x -= p.eval(x) / d;
        let val = p.eval(x).abs();
        if val < best_val {
            best = x;
            best_val = val;
        } else {
            break;
        }
    }
    best
}

/// Real roots of `p`, sorted, with near-coincident roots collapsed.
///
/// Eigenvalues of the balanced companion matrix, one Newton polish per root.
/// Complex pairs with `|imag| ≤ tol (1 + |real|)` count as tangential real roots.
pub fn poly_real_roots(p: &Polynomial, tol: f64) -> Result<Vec<f64>> {
    let p = p.trimmed();
    let degree = p.degree().ok_or_else(|| Error::Domain("roots of the zero polynomial".into()))?;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = p.coeffs()[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -p.coeffs()[i] / lead;
    }
    balance(&mut companion);
    let eig = companion.complex_eigenvalues();
    let dp = p.derivative();
    let mut roots: Vec<f64> = eig
        .iter()
        .filter(|z| z.im.abs() <= tol * (1.0 + z.re.abs()))
        .map(|z| newton_polish(&p, &dp, z.re))
        .filter(|r| r.is_finite())
        .collect();
    roots.sort_by(f64::total_cmp);
    let mut collapsed: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match collapsed.last_mut() {
            Some(last) if (r - *last).abs() <= tol * (1.0 + r.abs()) => {
                if p.eval(r).abs() < p.eval(*last).abs() {
                    *last = r;
                }
            }
            _ => collapsed.push(r),
        }
    }
    Ok(collapsed)
}

/// Sorted disjoint intervals where a polynomial is strictly positive.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PositivitySupport {
    intervals: Vec<Interval>,
}

impl PositivitySupport {
    pub fn whole_line() -> Self {
        Self { intervals: vec![Interval::real_line()] }
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    /// Builds a support from arbitrary intervals, sorting and merging overlaps.
    pub fn from_intervals(mut intervals: Vec<Interval>) -> Self {
        intervals.retain(|iv| iv.lo < iv.hi);
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| x > iv.lo && x < iv.hi)
    }

    /// Finite interval endpoints, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|iv| [iv.lo, iv.hi]).filter(|x| x.is_finite()).collect()
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = f64::NEG_INFINITY;
        for iv in &self.intervals {
            if iv.lo > cursor {
                out.push(Interval { lo: cursor, hi: iv.lo });
            }
            cursor = iv.hi;
        }
        if cursor < f64::INFINITY {
            out.push(Interval { lo: cursor, hi: f64::INFINITY });
        }
        Self { intervals: out }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                if let Some(iv) = a.intersect(b) {
                    out.push(iv);
                }
            }
        }
        Self::from_intervals(out)
    }

    /// Image under `w ↦ a + b w` with `b > 0`.
    pub fn map_affine(&self, a: f64, b: f64) -> Self {
        Self { intervals: self.intervals.iter().map(|iv| Interval { lo: a + b * iv.lo, hi: a + b * iv.hi }).collect() }
    }
}

/// Maximal open intervals where `p > 0`.
///
/// Roots split the line; each piece is classified by the sign at its midpoint,
/// unbounded pieces by the leading coefficient. Adjacent positive pieces are
/// merged, so even-multiplicity roots do not split the support.
pub fn positivity_support(p: &Polynomial, tol: f64) -> Result<PositivitySupport> {
    let p = p.trimmed();
    let Some(degree) = p.degree() else {
        return Ok(PositivitySupport::empty());
    };
    if degree == 0 {
        return Ok(if p.coeffs()[0] > 0.0 { PositivitySupport::whole_line() } else { PositivitySupport::empty() });
    }
    let roots = poly_real_roots(&p, tol)?;
    let lead = p.coeffs()[degree];
    let mut edges = Vec::with_capacity(roots.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(roots);
    edges.push(f64::INFINITY);
    let mut pieces = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let positive = if lo.is_infinite() && hi.is_infinite() {
            p.eval(0.0) > 0.0
        } else if lo.is_infinite() {
            lead * if degree % 2 == 0 { 1.0 } else { -1.0 } > 0.0
        } else if hi.is_infinite() {
            lead > 0.0
        } else {
            p.eval(0.5 * (lo + hi)) > 0.0
        };
        if positive {
            pieces.push(Interval { lo, hi });
        }
    }
    // from_intervals merges touching pieces (tangency rule)
    Ok(PositivitySupport::from_intervals(pieces))
}

/// Probabilists' Hermite polynomials `He_0 … He_n`, orthogonal for the
/// weight `(2π)^{-1/2} e^{-s²/2}` with norms `i!`.
pub fn hermite_basis(n: usize) -> Vec<Polynomial> {
    let mut basis = vec![Polynomial::constant(1.0)];
    if n >= 1 {
        basis.push(Polynomial::monomial(1));
    }
    let x = Polynomial::monomial(1);
    for k in 1..n {
        let next = &(&x * &basis[k]) - &basis[k - 1].scale(k as f64);
        basis.push(next);
    }
    basis
}

/// `[1, v, …, v^{k-1}]`.
pub fn monomial_basis(k: usize) -> Result<Vec<Polynomial>> {
    if k == 0 {
        return Err(Error::Domain("monomial basis needs k >= 1".into()));
    }
    Ok((0..k).map(Polynomial::monomial).collect())
}
