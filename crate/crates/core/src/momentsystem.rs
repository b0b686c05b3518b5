//! Quasi-linear structure of the closed moment system and BGK-type dynamics
//! for the spatially homogeneous problem.

use nalgebra::{DMatrix, DVector};

use crate::closures::{eta_n, q_log, ClosureState, MomentRule};
use crate::density::Mixture;
use crate::error::{Error, Result};
use crate::gausskernel::{integrate_with_breaks, Frame, Interval, Maxwellian};
use crate::polyspace::Polynomial;
use crate::projector::{project_from, ProjectorOptions};

/// `A₀ ∂_t α + A₁ ∂_x α = s` at one closure state.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicAssembly {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub s: DVector<f64>,
    /// Generalized eigenvalues of `(A₁, A₀)`, ascending; empty if `A₀` is not SPD.
    pub eigenvalues: Vec<f64>,
    pub frame: Frame,
}

/// Time and space derivatives of `(ρ, u, θ)` for a prescribed Maxwellian field.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MaxwellianRates {
    pub dt: [f64; 3],
    pub dx: [f64; 3],
}

/// Analytically prescribed space-time Maxwellian field.
pub trait MaxwellianField {
    fn rates(&self, t: f64, x: f64) -> MaxwellianRates;
}

/// Field `(t, x) ↦ 𝓜` with derivatives by central differences.
pub struct SampledField<F: Fn(f64, f64) -> Maxwellian> {
    pub field: F,
    pub step: f64,
}

impl<F: Fn(f64, f64) -> Maxwellian> MaxwellianField for SampledField<F> {
    fn rates(&self, t: f64, x: f64) -> MaxwellianRates {
        let h = self.step;
        let params = |m: Maxwellian| [m.rho, m.u, m.theta];
        let (tp, tm) = (params((self.field)(t + h, x)), params((self.field)(t - h, x)));
        let (xp, xm) = (params((self.field)(t, x + h)), params((self.field)(t, x - h)));
        let mut r = MaxwellianRates::default();
        for i in 0..3 {
            r.dt[i] = (tp[i] - tm[i]) / (2.0 * h);
            r.dx[i] = (xp[i] - xm[i]) / (2.0 * h);
        }
        r
    }
}

/// `(∂_t 𝓜 + v ∂_x 𝓜)/𝓜` as a cubic in the frame variable.
pub fn transport_polynomial(m: &Maxwellian, rates: &MaxwellianRates, frame: &Frame) -> Polynomial {
    let (rho, u, theta) = (m.rho, m.u, m.theta);
    // derivatives of log 𝓜 with respect to ρ, u, θ, as polynomials in v
    let d_rho = Polynomial::constant(1.0 / rho);
    let d_u = Polynomial::linear(-u / theta, 1.0 / theta);
    let centered = Polynomial::linear(-u, 1.0);
    let d_theta = &(&centered * &centered).scale(0.5 / (theta * theta)) - &Polynomial::constant(0.5 / theta);
    let mut total = Polynomial::zero();
    for (i, d) in [d_rho, d_u, d_theta].iter().enumerate() {
        let rate = Polynomial::linear(rates.dt[i], rates.dx[i]);
        total = &total + &(&rate * d);
    }
    total.compose_affine(frame.center, frame.scale)
}

/// Collision models for the source term and dissipation.
#[derive(Clone, Debug, PartialEq)]
pub enum Collision {
    /// `-τ⁻¹ (f - 𝓔_f)`.
    Bgk { tau: f64 },
    /// Multiscale relaxation through nested divergence projections.
    Generalized { sizes: Vec<usize>, rates: Vec<f64>, options: ProjectorOptions },
}

impl Collision {
    /// Multiscale relaxation with tight nested projections.
    pub fn generalized(sizes: Vec<usize>, rates: Vec<f64>) -> Self {
        Collision::Generalized { sizes, rates, options: ProjectorOptions::tight() }
    }

    /// `𝓒(f)` with projections taken for closure order `order` about `background`.
    pub fn apply(&self, f: &Mixture, order: u32, background: Maxwellian) -> Result<Mixture> {
        match self {
            Collision::Bgk { tau } => bgk_apply(f, *tau),
            Collision::Generalized { sizes, rates, options } => {
                Ok(generalized_bgk_apply(f, sizes, rates, order, background, options)?.operator)
            }
        }
    }
}

/// Assembles `A₀`, `A₁` and `s`. The transport part of `s` is included when
/// a Maxwellian field is supplied.
pub fn assemble_hyperbolic(
    state: &ClosureState,
    collision: &Collision,
    field: Option<(&dyn MaxwellianField, f64, f64)>,
    rule: MomentRule,
) -> Result<HyperbolicAssembly> {
    let k = state.k();
    let frame = *state.frame();
    let sums = state.power_moments(state.order() - 1, 2 * k, rule);
    let a0 = DMatrix::from_fn(k, k, |i, j| sums[i + j]);
    // v = c + s w
    let a1 = DMatrix::from_fn(k, k, |i, j| frame.center * sums[i + j] + frame.scale * sums[i + j + 1]);
    let f = Mixture::closure(state.clone());
    let op = collision.apply(&f, state.order(), *state.background())?;
    let mut s = DVector::from_vec(op.moments(&frame, k, rule).values);
    if let Some((field, t, x)) = field {
        let p = transport_polynomial(state.background(), &field.rates(t, x), &frame);
        let table = state.power_moments(state.order(), k + p.coeffs().len(), rule);
        for j in 0..k {
            s[j] -= p.coeffs().iter().enumerate().map(|(i, c)| c * table[j + i]).sum::<f64>();
        }
    }
    let mut asm = HyperbolicAssembly { a0, a1, s, eigenvalues: Vec::new(), frame };
    if let Ok(speeds) = characteristic_speeds(&asm) {
        asm.eigenvalues = speeds;
    }
    Ok(asm)
}

/// SPD verdict and smallest eigenvalue of a symmetric matrix.
pub fn check_spd(a: &DMatrix<f64>) -> (bool, f64) {
    let min = a.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    (min > 0.0, min)
}

fn reduced_pencil(asm: &HyperbolicAssembly) -> Result<DMatrix<f64>> {
    let chol = asm.a0.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite(check_spd(&asm.a0).1))?;
    let l = chol.l();
    // L⁻¹ A₁ L⁻ᵀ
    let left = l.solve_lower_triangular(&asm.a1).expect("non-singular Cholesky factor");
    let both = l.solve_lower_triangular(&left.transpose()).expect("non-singular Cholesky factor");
    Ok(both)
}

/// Real generalized eigenvalues of `A₁ x = λ A₀ x`, ascending.
pub fn characteristic_speeds(asm: &HyperbolicAssembly) -> Result<Vec<f64>> {
    let c = reduced_pencil(asm)?;
    let sym = (&c + c.transpose()) * 0.5;
    let mut speeds: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    speeds.sort_by(f64::total_cmp);
    Ok(speeds)
}

/// Largest imaginary part from a general (non-symmetric) eigensolver applied
/// to the Cholesky-reduced pencil; infinite when `A₀` is not SPD.
pub fn imaginary_residue(asm: &HyperbolicAssembly) -> f64 {
    match reduced_pencil(asm) {
        Ok(c) => c.complex_eigenvalues().iter().fold(0.0, |m, z| m.max(z.im.abs())),
        Err(_) => f64::INFINITY,
    }
}

/// `𝓒_BGK(f) = -τ⁻¹ (f - 𝓔_f)`.
pub fn bgk_apply(f: &Mixture, tau: f64) -> Result<Mixture> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("relaxation time must be positive, got {tau}")));
    }
    let eq = f.equilibrium()?;
    Ok(f.combine(-1.0 / tau, &Mixture::gaussian(eq), 1.0 / tau))
}

/// `f(t) = e^{-t/τ} f₀ + (1 - e^{-t/τ}) 𝓔_{f₀}` with `t` the elapsed time.
pub fn homogeneous_bgk_solution(f0: &Mixture, tau: f64, t: f64) -> Result<Mixture> {
    if !(tau > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need tau > 0 and t >= 0, got tau={tau}, t={t}")));
    }
    if t == 0.0 {
        return Ok(f0.clone());
    }
    let eq = f0.equilibrium()?;
    let w = (-t / tau).exp();
    Ok(f0.combine(w, &Mixture::gaussian(eq), 1.0 - w))
}

/// Multiscale operator with its nested projections `𝓕¹ … 𝓕^K`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedBgk {
    pub operator: Mixture,
    pub projections: Vec<ClosureState>,
}

/// `𝓒(f) = -θ_K (f - 𝓕^K) - Σ_{k<K} θ_k (𝓕^{k+1} - 𝓕^k)`, with `𝓕^k` the
/// divergence projection of `f` onto the first `sizes[k]` moments.
pub fn generalized_bgk_apply(
    f: &Mixture,
    sizes: &[usize],
    rates: &[f64],
    order: u32,
    background: Maxwellian,
    opts: &ProjectorOptions,
) -> Result<GeneralizedBgk> {
    if sizes.is_empty() || sizes.len() != rates.len() {
        return Err(Error::Domain("need one rate per subspace".into()));
    }
    if sizes[0] != 3 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!("subspace sizes must increase from 3, got {sizes:?}")));
    }
    if !(rates[0] > 0.0) || rates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(format!("rates must be positive and increasing, got {rates:?}")));
    }
    let frame = background.reduced_frame();
    let kmax = *sizes.last().expect("non-empty");
    let all = f.moments(&frame, kmax, MomentRule::Gamma);
    let mut projections: Vec<ClosureState> = Vec::with_capacity(sizes.len());
    for (level, &k) in sizes.iter().enumerate() {
        let target = all.truncated(k);
        let mut starts = Vec::new();
        if let Some(prev) = projections.last() {
            let mut a = prev.alpha().to_vec();
            a.resize(k, 0.0);
            starts.push(a);
        }
        starts.push(vec![0.0; k]);
        let mut outcome = Err(Error::Pathological);
        for alpha in starts {
            outcome = ClosureState::new(order, alpha, background, frame)
                .and_then(|init| project_from(&target, init, opts))
                .and_then(|r| r.into_converged());
            if outcome.is_ok() {
                break;
            }
        }
        let report = outcome.map_err(|e| Error::Level { level: level + 1, basis: k, source: Box::new(e) })?;
        projections.push(report.final_state);
    }
    let last = projections.len() - 1;
    let mut operator = f.combine(-rates[last], &Mixture::closure(projections[last].clone()), rates[last]);
    for i in 0..last {
        operator = operator.combine(1.0, &Mixture::closure(projections[i + 1].clone()), -rates[i]).combine(
            1.0,
            &Mixture::closure(projections[i].clone()),
            rates[i],
        );
    }
    Ok(GeneralizedBgk { operator, projections })
}

/// `⟨η_N′(𝓕_N) 𝓒(𝓕_N)⟩`, exact through `η_N′(𝓕_N) = g` on the support and
/// `-N` off it.
pub fn entropy_dissipation_rate(state: &ClosureState, collision: &Collision, rule: MomentRule) -> Result<f64> {
    let f = Mixture::closure(state.clone());
    let op = collision.apply(&f, state.order(), *state.background())?;
    Ok(op.eta_prime_pairing(state, rule))
}

/// Times `0` and `τ·5^{j/4}` for `j = 4 - (n - 2), …, 4`, ending at `5τ` and
/// containing `τ`.
pub fn geometric_times(tau: f64, n: usize) -> Vec<f64> {
    let mut times = vec![0.0];
    let count = n.saturating_sub(1) as i32;
    times.extend((0..count).map(|i| tau * 5f64.powf((4 - (count - 1) + i) as f64 / 4.0)));
    times
}

/// Homogeneous BGK relaxation of a distribution and of its closure.
///
/// The closed system relaxes its moments toward the equilibrium of the
/// resolved invariants, which are those of `f₀`, so
/// `𝓕_N(t) = e^{-t/τ} (𝓕_N)₀ + (1 - e^{-t/τ}) 𝓔_{f₀}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationTrace {
    pub times: Vec<f64>,
    /// `𝓕_N(t)` per time.
    pub states: Vec<Mixture>,
    pub divergence: Vec<f64>,
    pub dissipation_rate: Vec<f64>,
    pub l1_error: Vec<f64>,
}

/// Quadrature tolerance for trace integrals.
const TRACE_TOL: f64 = 1e-12;

impl RelaxationTrace {
    pub fn compute(f0: &Mixture, state0: &ClosureState, tau: f64, samples: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("relaxation time must be positive, got {tau}")));
        }
        let times = geometric_times(tau, samples);
        let eq = Mixture::gaussian(f0.equilibrium()?);
        let closure0 = Mixture::closure(state0.clone());
        let n = state0.order();
        let m = *state0.background();
        let mut trace = RelaxationTrace {
            times: times.clone(),
            states: Vec::new(),
            divergence: Vec::new(),
            dissipation_rate: Vec::new(),
            l1_error: Vec::new(),
        };
        for &t in &times {
            let w = (-t / tau).exp();
            let f = f0.combine(w, &eq, 1.0 - w);
            let fc = closure0.combine(w, &eq, 1.0 - w);
            trace.l1_error.push(f.combine(1.0, &fc, -1.0).l1_norm(TRACE_TOL)?);
            let breaks = fc.breakpoints();
            let divergence =
                integrate_with_breaks(|v| eta_n(n, &m, fc.eval(v), v), Interval::real_line(), &breaks, TRACE_TOL)?;
            trace.divergence.push(divergence);
            let op = fc.combine(-1.0 / tau, &eq, 1.0 / tau);
            let rate = integrate_with_breaks(
                |v| q_log(n, fc.eval(v).max(0.0) / m.eval(v)) * op.eval(v),
                Interval::real_line(),
                &breaks,
                TRACE_TOL,
            )?;
            trace.dissipation_rate.push(rate);
            trace.states.push(fc);
        }
        Ok(trace)
    }
}
