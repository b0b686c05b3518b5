//! Signed mixtures of Maxwellians and closure densities.

use crate::closures::{equilibrium_map, gaussian_anchors, ClosureState, MomentRule, MomentVector};
use crate::error::{Error, Result};
use crate::gausskernel::{frame_poly_moment, frame_power_moments, integrate_with_breaks, Frame, Interval, Maxwellian};
use crate::polyspace::{Polynomial, PositivitySupport};

#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    Gaussian(Maxwellian),
    Closure(ClosureState),
}

impl Component {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Component::Gaussian(m) => m.eval(v),
            Component::Closure(s) => s.eval(v),
        }
    }

    /// `∫ w^n h(v) dv`, `n < count`, with `w` the variable of `frame`.
    pub fn moments(&self, frame: &Frame, count: usize, rule: MomentRule) -> Vec<f64> {
        match self {
            Component::Gaussian(m) => frame_power_moments(m, frame, Interval::real_line(), count),
            Component::Closure(s) => {
                let own = MomentVector::new(s.power_moments(s.order(), count, rule), *s.frame());
                own.in_frame(*frame).values
            }
        }
    }

    /// `∫_{set} p(w) h(v) dv` with `p` and `set` in the variable of `frame`.
    pub fn poly_integral(&self, frame: &Frame, p: &Polynomial, set: &PositivitySupport, rule: MomentRule) -> f64 {
        match self {
            Component::Gaussian(m) => set.intervals().iter().map(|iv| frame_poly_moment(m, frame, p, *iv)).sum(),
            Component::Closure(s) => {
                // w = a + b w_s
                let sf = s.frame();
                let a = (sf.center - frame.center) / frame.scale;
                let b = sf.scale / frame.scale;
                let q = p.compose_affine(a, b);
                let own_set = set.map_affine(-a / b, 1.0 / b);
                let table = s.power_moments_on(&own_set, s.order(), q.coeffs().len(), rule);
                q.coeffs().iter().zip(&table).map(|(c, m)| c * m).sum()
            }
        }
    }

    /// Kinks of the component and points spread over its bulk, used to
    /// split adaptive quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Component::Gaussian(m) => gaussian_anchors(m).to_vec(),
            Component::Closure(s) => s.quadrature_breaks(),
        }
    }
}

/// `Σ weight_i h_i` with signed weights.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Mixture {
    terms: Vec<(f64, Component)>,
}

impl Mixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(component: Component) -> Self {
        Self { terms: vec![(1.0, component)] }
    }

    pub fn gaussian(m: Maxwellian) -> Self {
        Self::single(Component::Gaussian(m))
    }

    pub fn closure(state: ClosureState) -> Self {
        Self::single(Component::Closure(state))
    }

    /// `Σ w_i N(mean_i, var_i)` from `(weight, mean, variance)` triples; each
    /// Gaussian carries mass `weight`, which may be negative.
    pub fn from_gaussians(spec: &[(f64, f64, f64)]) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::Domain("empty Gaussian mixture".into()));
        }
        let terms = spec
            .iter()
            .map(|&(w, mean, var)| Ok((w.signum(), Component::Gaussian(Maxwellian::new(w.abs(), mean, var)?))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, Component)] {
        &self.terms
    }

    pub fn push(&mut self, weight: f64, component: Component) {
        self.terms.push((weight, component));
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(w, c)| (w * s, c.clone())).collect() }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Mixture, b: f64) -> Self {
        let mut terms: Vec<_> = self.terms.iter().map(|(w, c)| (w * a, c.clone())).collect();
        terms.extend(other.terms.iter().map(|(w, c)| (w * b, c.clone())));
        Self { terms }
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.terms.iter().map(|(w, c)| w * c.eval(v)).sum()
    }

    /// Moments `⟨w^n f⟩`, `n < count`, in `frame`.
    pub fn moments(&self, frame: &Frame, count: usize, rule: MomentRule) -> MomentVector {
        let mut out = vec![0.0; count];
        for (w, c) in &self.terms {
            for (o, m) in out.iter_mut().zip(c.moments(frame, count, rule)) {
                *o += w * m;
            }
        }
        MomentVector::new(out, *frame)
    }

    /// Raw mass, momentum and energy moments.
    pub fn invariant_moments(&self) -> MomentVector {
        self.moments(&Frame::IDENTITY, 3, MomentRule::Gamma)
    }

    /// `𝓔_f`.
    pub fn equilibrium(&self) -> Result<Maxwellian> {
        equilibrium_map(&self.invariant_moments())
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.terms.iter().flat_map(|(_, c)| c.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `∫ weight(v) f(v) dv` by adaptive quadrature.
    pub fn integrate<W: Fn(f64) -> f64>(&self, weight: W, tol: f64) -> Result<f64> {
        integrate_with_breaks(|v| weight(v) * self.eval(v), Interval::real_line(), &self.breakpoints(), tol)
    }

    /// `‖f‖_{L¹}` by adaptive quadrature.
    pub fn l1_norm(&self, tol: f64) -> Result<f64> {
        integrate_with_breaks(|v| self.eval(v).abs(), Interval::real_line(), &self.breakpoints(), tol)
    }

    /// `⟨η_N′(𝓕) f⟩` for a closure state `𝓕`, using `η_N′(𝓕) = g` on the
    /// support of `𝓕` and `-N` off it.
    pub fn eta_prime_pairing(&self, state: &ClosureState, rule: MomentRule) -> f64 {
        let g = state.g();
        let minus_n = Polynomial::constant(-(state.order() as f64));
        let on = state.support();
        let off = on.complement();
        self.terms
            .iter()
            .map(|(w, c)| {
                w * (c.poly_integral(state.frame(), &g, on, rule)
                    + c.poly_integral(state.frame(), &minus_n, &off, rule))
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausskernel::quadrature_oracle;

    fn sample_state() -> ClosureState {
        let m = Maxwellian::new(1.4, 0.2, 1.1).unwrap();
        ClosureState::new(2, vec![0.1, 0.3, -0.5, 0.05, -0.08], m, m.reduced_frame()).unwrap()
    }

    #[test]
    fn mixture_mass_and_moments() {
        let f = Mixture::from_gaussians(&[(1.0, 2.0, 1.0), (1.0, -2.0, 1.0)]).unwrap();
        let mass = quadrature_oracle(|v| f.eval(v), Interval::real_line(), 1e-10).unwrap();
        assert!((mass - 2.0).abs() < 1e-10);
        let inv = f.invariant_moments();
        assert!((inv.values[0] - 2.0).abs() < 1e-14);
        assert!(inv.values[1].abs() < 1e-14);
        assert!((inv.values[2] - 10.0).abs() < 1e-13);
        let eq = f.equilibrium().unwrap();
        assert!((eq.rho - 2.0).abs() < 1e-14 && eq.u.abs() < 1e-14 && (eq.theta - 5.0).abs() < 1e-13);
    }

    #[test]
    fn closure_component_moments_in_other_frame() {
        let s = sample_state();
        let mix = Mixture::closure(s.clone()).combine(1.0, &Mixture::gaussian(Maxwellian::standard()), -0.5);
        let frame = Frame::new(-0.3, 0.8).unwrap();
        let got = mix.moments(&frame, 5, MomentRule::Gamma);
        for (j, g) in got.values.iter().enumerate() {
            let oracle = mix.integrate(|v| frame.to_frame(v).powi(j as i32), 1e-13).unwrap();
            assert!((g - oracle).abs() < 1e-9 * (1.0 + oracle.abs()), "j={j}");
        }
    }

    #[test]
    fn eta_prime_pairing_matches_oracle() {
        let s = sample_state();
        let other =
            ClosureState::new(1, vec![0.2, -0.1, -0.3], Maxwellian::new(1.0, -0.4, 0.7).unwrap(), Frame::IDENTITY)
                .unwrap();
        let mix =
            Mixture::closure(other).combine(2.0, &Mixture::gaussian(Maxwellian::new(0.5, 1.0, 2.0).unwrap()), -1.0);
        let exact = mix.eta_prime_pairing(&s, MomentRule::Gamma);
        let eta_prime = |v: f64| {
            let b = s.base().eval(s.frame().to_frame(v));
            if b > 0.0 {
                s.g().eval(s.frame().to_frame(v))
            } else {
                -2.0
            }
        };
        let mut breaks = mix.breakpoints();
        breaks.extend(s.quadrature_breaks());
        let oracle =
            integrate_with_breaks(|v| eta_prime(v) * mix.eval(v), Interval::real_line(), &breaks, 1e-13).unwrap();
        assert!((exact - oracle).abs() < 1e-9 * (1.0 + oracle.abs()));
    }

    #[test]
    fn l1_of_difference() {
        let a = Mixture::gaussian(Maxwellian::new(1.0, 0.0, 1.0).unwrap());
        let b = Mixture::gaussian(Maxwellian::new(1.0, 0.0, 1.0).unwrap());
        assert!(a.combine(1.0, &b, -1.0).l1_norm(1e-12).unwrap() < 1e-14);
        // ‖N(0,1) - N(d,1)‖₁ = 2 erf(d/(2√2)), erf(x) = γ(1/2, x²)/√π
        let c = Mixture::gaussian(Maxwellian::new(1.0, 0.5, 1.0).unwrap());
        let l1 = a.combine(1.0, &c, -1.0).l1_norm(1e-13).unwrap();
        let want =
            2.0 * crate::gausskernel::lower_incomplete_gamma(0.5, 0.03125).unwrap() / std::f64::consts::PI.sqrt();
        assert!((l1 - want).abs() < 1e-10, "{l1} vs {want}");
    }
}
