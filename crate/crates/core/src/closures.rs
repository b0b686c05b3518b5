//! The φ_N divergence family and the closure densities it induces.
//!
//! A closure state carries its basis in a [`Frame`]: the basis element `m_j`
//! is `w^j` with `w = (v - center)/scale`. The identity frame gives the raw
//! monomials `v^j`; the reduced frame of the background Maxwellian keeps the
//! moment matrices well scaled.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gausskernel::{frame_power_moments, panel_nodes, Frame, Interval, Maxwellian};
use crate::polyspace::{positivity_support, Polynomial, PositivitySupport};

/// Closure orders above this are rejected for basis sizes above [`ORDER_CAP_BASIS`].
pub const ORDER_CAP: u32 = 8;
pub const ORDER_CAP_BASIS: usize = 6;
/// Root tolerance used to locate the support of `1 + g/N`.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Tsallis q-exponential with `1 - q = 1/N`: `(1 + x/N)^N_+`.
pub fn q_exp(n: u32, x: f64) -> f64 {
    let base = 1.0 + x / n as f64;
    if base > 0.0 {
        base.powi(n as i32)
    } else {
        0.0
    }
}

/// Inverse of [`q_exp`] on its positive range: `N s^{1/N} - N`.
pub fn q_log(n: u32, s: f64) -> f64 {
    let n = n as f64;
    n * s.powf(1.0 / n) - n
}

/// `φ_N(s) = s (N²/(1+N) s^{1/N} - N) + N/(1+N)`.
pub fn phi_n(n: u32, s: f64) -> f64 {
    let n = n as f64;
    s * (n * n / (1.0 + n) * s.powf(1.0 / n) - n) + n / (1.0 + n)
}

/// Convex conjugate `φ*_N(t) = N/(1+N) ((1 + t/N)^{N+1}_+ - 1)`.
pub fn phi_n_conjugate(n: u32, t: f64) -> f64 {
    let nf = n as f64;
    let base = (1.0 + t / nf).max(0.0);
    nf / (1.0 + nf) * (base.powi(n as i32 + 1) - 1.0)
}

/// Entropy density `η_N(f) = 𝓜(v) φ_N(f/𝓜(v))`.
pub fn eta_n(n: u32, m: &Maxwellian, f_value: f64, v: f64) -> f64 {
    let mv = m.eval(v);
    mv * phi_n(n, f_value / mv)
}

/// Moments `⟨m_j f⟩` of the basis `m_j = w^j` of `frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub values: Vec<f64>,
    pub frame: Frame,
}

impl MomentVector {
    pub fn new(values: Vec<f64>, frame: Frame) -> Self {
        Self { values, frame }
    }

    /// Moments of the raw monomials `v^j`.
    pub fn raw(values: Vec<f64>) -> Self {
        Self { values, frame: Frame::IDENTITY }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `k` entries.
    pub fn truncated(&self, k: usize) -> Self {
        Self { values: self.values[..k.min(self.values.len())].to_vec(), frame: self.frame }
    }

    /// The same moments expressed in another frame.
    pub fn in_frame(&self, target: Frame) -> Self {
        if target == self.frame {
            return self.clone();
        }
        // w' = a + b w
        let a = (self.frame.center - target.center) / target.scale;
        let b = self.frame.scale / target.scale;
        let values = (0..self.values.len())
            .map(|j| {
                Polynomial::monomial(j).compose_affine(a, b).coeffs().iter().zip(&self.values).map(|(c, m)| c * m).sum()
            })
            .collect();
        Self { values, frame: target }
    }

    /// Positive mass and positive semidefinite Hankel matrix.
    pub fn is_realizable(&self) -> bool {
        let v = &self.values;
        if v.is_empty() || !(v[0] > 0.0) || v.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let n = v.len().div_ceil(2);
        let hankel = DMatrix::from_fn(n, n, |i, j| v[i + j]);
        let eig = hankel.symmetric_eigenvalues();
        let top = eig.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        eig.iter().all(|e| *e >= -1e-12 * top)
    }
}

/// Integration rule for closure moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MomentRule {
    /// Closed-form gamma-function moments of the expanded polynomial.
    #[default]
    Gamma,
    /// Panel Gauss–Legendre on the factored integrand. Immune to the
    /// cancellation of high-degree monomial expansions.
    Panel,
}

/// `𝓕_N = 𝓜 (1 + α·m/N)^N_+` with its support precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureState {
    order: u32,
    alpha: Vec<f64>,
    background: Maxwellian,
    frame: Frame,
    base: Polynomial,
    support: PositivitySupport,
}

impl ClosureState {
    pub fn new(order: u32, alpha: Vec<f64>, background: Maxwellian, frame: Frame) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("closure order must be positive".into()));
        }
        if alpha.len() < 3 {
            return Err(Error::Domain(format!("basis size must be at least 3, got {}", alpha.len())));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("non-finite closure coefficient".into()));
        }
        if order > ORDER_CAP && alpha.len() > ORDER_CAP_BASIS {
            return Err(Error::Envelope { order, basis: alpha.len() });
        }
        let base = support_polynomial(order, &alpha);
        let support = positivity_support(&base, SUPPORT_TOL)?;
        if support.is_empty() {
            return Err(Error::Pathological);
        }
        Ok(Self { order, alpha, background, frame, base, support })
    }

    /// The background Maxwellian itself (`α = 0`) in its reduced frame.
    pub fn equilibrium(order: u32, k: usize, background: Maxwellian) -> Result<Self> {
        Self::new(order, vec![0.0; k], background, background.reduced_frame())
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn background(&self) -> &Maxwellian {
        &self.background
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// `1 + α·m/N` in the frame variable.
    pub fn base(&self) -> &Polynomial {
        &self.base
    }

    /// `g = α·m` in the frame variable.
    pub fn g(&self) -> Polynomial {
        Polynomial::new(self.alpha.clone())
    }

    /// Support of `1 + α·m/N` in the frame variable.
    pub fn support(&self) -> &PositivitySupport {
        &self.support
    }

    /// Support in velocity.
    pub fn velocity_support(&self) -> PositivitySupport {
        self.support.map_affine(self.frame.center, self.frame.scale)
    }

    /// Support endpoints plus points spread over the background Gaussian,
    /// for adaptive quadrature of integrands built from this state.
    pub fn quadrature_breaks(&self) -> Vec<f64> {
        let mut b = self.velocity_support().breakpoints();
        b.extend(gaussian_anchors(&self.background));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        Self::new(self.order, alpha, self.background, self.frame)
    }

    pub fn eval(&self, v: f64) -> f64 {
        let b = self.base.eval(self.frame.to_frame(v));
        if b > 0.0 {
            self.background.eval(v) * b.powi(self.order as i32)
        } else {
            0.0
        }
    }

    /// `∫_S w^n 𝓜 (1 + α·m/N)^e dv` for `n < count`, over the support `S`.
    pub fn power_moments(&self, exponent: u32, count: usize, rule: MomentRule) -> Vec<f64> {
        self.power_moments_on(&self.support, exponent, count, rule)
    }

    /// As [`ClosureState::power_moments`] over `set ∩ S`, `set` in the frame variable.
    pub fn power_moments_on(&self, set: &PositivitySupport, exponent: u32, count: usize, rule: MomentRule) -> Vec<f64> {
        let region = self.support.intersect(set);
        let mut out = vec![0.0; count];
        match rule {
            MomentRule::Gamma => {
                let q = self.base.pow(exponent);
                let qc = q.coeffs();
                for iv in region.intervals() {
                    let table = frame_power_moments(&self.background, &self.frame, *iv, count + qc.len());
                    for (n, o) in out.iter_mut().enumerate() {
                        *o += qc.iter().enumerate().map(|(i, c)| c * table[n + i]).sum::<f64>();
                    }
                }
            }
            MomentRule::Panel => {
                let mut nodes = Vec::new();
                for iv in region.intervals() {
                    panel_nodes(&self.background, &self.frame, *iv, &mut nodes);
                }
                for (w, wt) in nodes {
                    let mut term = wt * self.base.eval(w).powi(exponent as i32);
                    for o in out.iter_mut() {
                        *o += term;
                        term *= w;
                    }
                }
            }
        }
        out
    }

    /// Closure moments `⟨m_j 𝓕_N⟩`, `j < k`.
    pub fn moments(&self, rule: MomentRule) -> MomentVector {
        MomentVector::new(self.power_moments(self.order, self.k(), rule), self.frame)
    }

    /// Divergence `⟨𝓜 φ_N(𝓕_N/𝓜)⟩`, exact through the polynomial form of
    /// `φ_N(base^N) = N²/(1+N) base^{N+1} - N base^N + N/(1+N)` on the support
    /// and `φ_N(0) = N/(1+N)` off it.
    pub fn divergence(&self, rule: MomentRule) -> f64 {
        let n = self.order as f64;
        let c = n / (1.0 + n);
        let up = self.power_moments(self.order + 1, 1, rule)[0];
        let mid = self.power_moments(self.order, 1, rule)[0];
        // ∫_S c 𝓜 + ∫_{S^c} c 𝓜 = c ρ
        n * c * up - n * mid + c * self.background.rho
    }
}

/// Points at `u + √(2θ)·{0, ±1.5, ±3, ±6, ±10, ±16}`.
pub fn gaussian_anchors(m: &Maxwellian) -> [f64; 11] {
    let w = m.width();
    [-16.0, -10.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 10.0, 16.0].map(|c| m.u + c * w)
}

/// `1 + α·m/N`.
pub fn support_polynomial(order: u32, alpha: &[f64]) -> Polynomial {
    let mut c: Vec<f64> = alpha.iter().map(|a| a / order as f64).collect();
    c[0] += 1.0;
    Polynomial::new(c)
}

/// Descriptor of `β_N(g) = 𝓜 (1 + g/N)^N_+`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureDensity {
    pub background: Maxwellian,
    pub frame: Frame,
    /// `(1 + g/N)^N` expanded, in the frame variable.
    pub polynomial: Polynomial,
    pub support: PositivitySupport,
}

impl ClosureDensity {
    pub fn eval(&self, v: f64) -> f64 {
        let w = self.frame.to_frame(v);
        if self.support.contains(w) {
            self.background.eval(v) * self.polynomial.eval(w)
        } else {
            0.0
        }
    }
}

pub fn beta_n_density(state: &ClosureState) -> ClosureDensity {
    ClosureDensity {
        background: state.background,
        frame: state.frame,
        polynomial: state.base.pow(state.order),
        support: state.support.clone(),
    }
}

/// Moments `⟨p 𝓕_N⟩` for test polynomials in the frame variable.
pub fn closure_moments(state: &ClosureState, test_basis: &[Polynomial], rule: MomentRule) -> Vec<f64> {
    let count = test_basis.iter().map(|p| p.coeffs().len()).max().unwrap_or(0);
    let table = state.power_moments(state.order, count, rule);
    test_basis.iter().map(|p| p.coeffs().iter().zip(&table).map(|(c, m)| c * m).sum()).collect()
}

/// The Maxwellian with the same mass, momentum and energy as the moments.
pub fn equilibrium_map(moments: &MomentVector) -> Result<Maxwellian> {
    if moments.len() < 3 {
        return Err(Error::NotRealizable(format!("need 3 invariant moments, got {}", moments.len())));
    }
    let raw = moments.truncated(3).in_frame(Frame::IDENTITY).values;
    if !(raw[0] > 0.0) {
        return Err(Error::NotRealizable(format!("non-positive mass {}", raw[0])));
    }
    let u = raw[1] / raw[0];
    let theta = raw[2] / raw[0] - u * u;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::NotRealizable(format!("non-positive variance {theta}")));
    }
    Maxwellian::new(raw[0], u, theta)
}

/// Exponential closure on the quadratic basis. Its minimizer `exp(α·m)` is
/// a Gaussian, so it coincides with [`equilibrium_map`].
pub fn levermore_quadratic_closure(moments: &MomentVector) -> Result<Maxwellian> {
    equilibrium_map(moments)
}

/// Grad's closure `𝓜 (1 + g)` with `g = α·m` in raw velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct GradDensity {
    pub background: Maxwellian,
    pub g: Polynomial,
    /// `1 + g`.
    pub one_plus: Polynomial,
    /// Set when `1 + g` is negative somewhere.
    pub negative: bool,
}

impl GradDensity {
    pub fn eval(&self, v: f64) -> f64 {
        self.background.eval(v) * self.one_plus.eval(v)
    }

    /// `max(𝓜 (1 + g), 0)`.
    pub fn clamped_eval(&self, v: f64) -> f64 {
        self.eval(v).max(0.0)
    }

    /// Raw moments `⟨v^j 𝓜 (1 + g)⟩`, `j < count`.
    pub fn moments(&self, count: usize) -> Vec<f64> {
        let p = &self.one_plus;
        let table =
            frame_power_moments(&self.background, &Frame::IDENTITY, Interval::real_line(), count + p.coeffs().len());
        (0..count).map(|n| p.coeffs().iter().enumerate().map(|(i, c)| c * table[n + i]).sum()).collect()
    }
}

pub fn grad_closure_density(alpha: &[f64], m: &Maxwellian) -> Result<GradDensity> {
    let g = Polynomial::new(alpha.to_vec());
    let one_plus = &Polynomial::constant(1.0) + &g;
    let negative = if one_plus.is_zero() { false } else { !positivity_support(&(-&one_plus), SUPPORT_TOL)?.is_empty() };
    Ok(GradDensity { background: *m, g, one_plus, negative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausskernel::quadrature_oracle;

    #[test]
    fn scalar_examples() {
        for n in [1, 2, 5] {
            assert_eq!(q_exp(n, 0.0), 1.0);
            assert_eq!(q_log(n, 1.0), 0.0);
            assert!(phi_n(n, 1.0).abs() < 1e-15);
            assert_eq!(phi_n_conjugate(n, 0.0), 0.0);
        }
        assert_eq!(q_exp(1, -2.0), 0.0);
        assert_eq!(q_exp(2, 2.0), 4.0);
        assert!((q_log(2, 4.0) - 2.0).abs() < 1e-15);
        assert!((q_log(3, 8.0) - 3.0).abs() < 1e-14);
        assert_eq!(q_log(4, 0.0), -4.0);
        assert!((phi_n(2, 4.0) - 10.0 / 3.0).abs() < 1e-14);
        assert!((phi_n_conjugate(2, 2.0) - 14.0 / 3.0).abs() < 1e-14);
        assert!((phi_n_conjugate(3, -5.0) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn phi_one_is_chi_squared() {
        for i in 0..20 {
            let s = 0.37 * i as f64;
            assert!((phi_n(1, s) - 0.5 * (s - 1.0).powi(2)).abs() < 1e-13);
        }
    }

    #[test]
    fn eta_examples() {
        let m = Maxwellian::new(1.3, 0.2, 0.7).unwrap();
        let v = 0.45;
        assert!(eta_n(3, &m, m.eval(v), v).abs() < 1e-15);
        // 𝓜(v) = 1 at v = u when ρ = √(2πθ)
        let unit = Maxwellian::new((2.0 * std::f64::consts::PI).sqrt(), 0.0, 1.0).unwrap();
        assert!((eta_n(1, &unit, 4.0, 0.0) - 4.5).abs() < 1e-13);
    }

    #[test]
    fn equilibrium_examples() {
        let m = equilibrium_map(&MomentVector::raw(vec![1.0, 0.0, 1.0])).unwrap();
        assert_eq!(m, Maxwellian::standard());
        let m = equilibrium_map(&MomentVector::raw(vec![2.0, 0.0, 10.0])).unwrap();
        assert_eq!(m, Maxwellian::new(2.0, 0.0, 5.0).unwrap());
        let m = equilibrium_map(&MomentVector::raw(vec![1.0, 1.0, 2.0])).unwrap();
        assert_eq!(m, Maxwellian::new(1.0, 1.0, 1.0).unwrap());
        assert!(matches!(equilibrium_map(&MomentVector::raw(vec![1.0, 1.0, 1.0])), Err(Error::NotRealizable(_))));
        assert_eq!(
            levermore_quadratic_closure(&MomentVector::raw(vec![2.0, 0.0, 10.0])).unwrap(),
            Maxwellian::new(2.0, 0.0, 5.0).unwrap()
        );
    }

    #[test]
    fn equilibrium_moments_of_background() {
        let basis = crate::polyspace::monomial_basis(3).unwrap();
        for (m, want) in
            [(Maxwellian::standard(), [1.0, 0.0, 1.0]), (Maxwellian::new(2.0, 0.0, 5.0).unwrap(), [2.0, 0.0, 10.0])]
        {
            let state = ClosureState::new(2, vec![0.0; 3], m, Frame::IDENTITY).unwrap();
            for rule in [MomentRule::Gamma, MomentRule::Panel] {
                let got = closure_moments(&state, &basis, rule);
                for (g, w) in got.iter().zip(want) {
                    assert!((g - w).abs() < 1e-13 * (1.0 + w), "{got:?}");
                }
            }
        }
    }

    #[test]
    fn moments_match_oracle() {
        let m = Maxwellian::new(1.2, 0.3, 1.5).unwrap();
        let state = ClosureState::new(2, vec![0.3, -0.2, -0.4, 0.1, -0.05], m, m.reduced_frame()).unwrap();
        let rule_g = state.moments(MomentRule::Gamma);
        let rule_p = state.moments(MomentRule::Panel);
        for j in 0..5 {
            let oracle = quadrature_oracle(
                |v| state.frame().to_frame(v).powi(j as i32) * state.eval(v),
                Interval::real_line(),
                1e-13,
            )
            .unwrap();
            assert!((rule_g.values[j] - oracle).abs() < 1e-9 * (1.0 + oracle.abs()));
            assert!((rule_p.values[j] - oracle).abs() < 1e-9 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn pathological_and_envelope_states_rejected() {
        let m = Maxwellian::standard();
        // 1 + α·m/N = 1 - 2 - w² < 0 everywhere
        assert_eq!(ClosureState::new(2, vec![-2.0, 0.0, -2.0], m, Frame::IDENTITY), Err(Error::Pathological));
        assert!(matches!(
            ClosureState::new(9, vec![0.0; 7], m, Frame::IDENTITY),
            Err(Error::Envelope { order: 9, basis: 7 })
        ));
        assert!(ClosureState::new(64, vec![0.0; 6], m, Frame::IDENTITY).is_ok());
    }

    #[test]
    fn density_descriptor_examples() {
        let m = Maxwellian::new(1.0, 0.5, 2.0).unwrap();
        let zero = ClosureState::new(3, vec![0.0; 4], m, Frame::IDENTITY).unwrap();
        let d = beta_n_density(&zero);
        for &v in &[-3.0, 0.0, 1.7] {
            assert!((d.eval(v) - m.eval(v)).abs() < 1e-15);
        }
        let s = ClosureState::new(1, vec![0.2, 0.5, -0.7], m, Frame::IDENTITY).unwrap();
        let d = beta_n_density(&s);
        let grad = grad_closure_density(&[0.2, 0.5, -0.7], &m).unwrap();
        assert!(grad.negative);
        for i in 0..100 {
            let v = -5.0 + 0.1 * i as f64;
            assert!((d.eval(v) - grad.clamped_eval(v)).abs() < 1e-15);
        }
    }

    #[test]
    fn grad_examples() {
        let m = Maxwellian::standard();
        let zero = grad_closure_density(&[0.0], &m).unwrap();
        assert!(!zero.negative);
        assert_eq!(zero.eval(0.3), m.eval(0.3));
        let neg = grad_closure_density(&[-2.0], &m).unwrap();
        assert!(neg.negative);
        assert!(neg.eval(0.0) < 0.0);
        let g = grad_closure_density(&[0.1, -0.4, 0.3, 0.05], &m).unwrap();
        let mom = g.moments(4);
        for (j, want) in mom.iter().enumerate() {
            let oracle = quadrature_oracle(|v| v.powi(j as i32) * g.eval(v), Interval::real_line(), 1e-13).unwrap();
            assert!((want - oracle).abs() < 1e-10 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn frame_conversion_round_trip() {
        let m = Maxwellian::new(2.0, 0.4, 1.3).unwrap();
        let state = ClosureState::new(2, vec![0.1, 0.2, -0.3, 0.0, -0.1], m, m.reduced_frame()).unwrap();
        let reduced = state.moments(MomentRule::Gamma);
        let raw = reduced.in_frame(Frame::IDENTITY);
        let direct = ClosureState::new(2, state.alpha().to_vec(), m, m.reduced_frame()).unwrap().power_moments(
            2,
            1,
            MomentRule::Gamma,
        );
        assert!((raw.values[0] - direct[0]).abs() < 1e-14);
        let back = raw.in_frame(m.reduced_frame());
        for (a, b) in back.values.iter().zip(&reduced.values) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        assert!(raw.is_realizable());
        assert!(!MomentVector::raw(vec![1.0, 0.0, -1.0]).is_realizable());
    }

    #[test]
    fn divergence_vanishes_only_at_background() {
        let m = Maxwellian::new(1.5, 0.0, 0.8).unwrap();
        let eq = ClosureState::equilibrium(2, 5, m).unwrap();
        assert!(eq.divergence(MomentRule::Gamma).abs() < 1e-14);
        let s = eq.with_alpha(vec![0.05, 0.1, -0.2, 0.0, -0.05]).unwrap();
        let d = s.divergence(MomentRule::Gamma);
        let oracle = quadrature_oracle(|v| eta_n(2, &m, s.eval(v), v), Interval::real_line(), 1e-14).unwrap();
        assert!(d > 1e-6);
        assert!((d - oracle).abs() < 1e-10);
    }
}
