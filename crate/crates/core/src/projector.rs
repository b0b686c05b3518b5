//! Moment-constrained φ_N-divergence minimization.
//!
//! The projection onto moments `t` minimizes the dual objective
//! `L(α) = ⟨𝓜 φ*_N(α·m)⟩ - α·t`, whose gradient is the moment residual
//! `⟨m 𝓕_N⟩ - t` and whose Hessian is the Jacobian
//! `J(α) = ⟨m⊗m 𝓜 (1 + α·m/N)^{N-1}_+⟩`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::closures::{phi_n_conjugate, ClosureState, MomentRule, MomentVector, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::gausskernel::{frame_power_moments, maxwellian_poly_moment, panel_nodes, Frame, Interval, Maxwellian};
use crate::polyspace::{positivity_support, Polynomial, PositivitySupport};

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorOptions {
    /// Bound on the relative Newton update `‖δα‖₂/‖α‖₂` at convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Scaled residual `max_j |r_j|/(1 + |t_j|)` required alongside `tol`.
    pub residual_tol: f64,
    /// Scaled residual at which the iterate is accepted outright.
    pub exact_tol: f64,
    pub max_halvings: u32,
    pub rule: MomentRule,
}

impl Default for ProjectorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 2000,
            residual_tol: 1e-6,
            exact_tol: 1e-13,
            max_halvings: 30,
            rule: MomentRule::Panel,
        }
    }
}

impl ProjectorOptions {
    /// Iterates to near rounding level with the gamma rule, for nested
    /// projections whose invariant moments must match closely. Intended for
    /// small bases.
    pub fn tight() -> Self {
        Self { residual_tol: 1e-11, exact_tol: 1e-14, rule: MomentRule::Gamma, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonIterate {
    pub alpha: Vec<f64>,
    /// `‖δα‖₂/‖α^{(n+1)}‖₂` of the accepted step.
    pub rel_update: f64,
    /// Scaled residual at the new iterate.
    pub residual: f64,
    /// `κ∞` of the Jacobian at the new iterate.
    pub kappa_inf: f64,
    /// Line-search step length.
    pub step: f64,
    pub dual_objective: f64,
    /// Whether the step satisfied the Armijo condition on the dual objective.
    pub armijo: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterates: Vec<NewtonIterate>,
    pub converged: bool,
    pub final_state: ClosureState,
    /// Target moments in the frame of `final_state`.
    pub target: MomentVector,
}

impl NewtonReport {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }

    pub fn final_rel_update(&self) -> f64 {
        self.iterates.last().map_or(0.0, |it| it.rel_update)
    }

    pub fn final_residual(&self) -> f64 {
        let m = self.final_state.moments(MomentRule::Panel);
        scaled_residual(&m.values, &self.target.values)
    }

    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations(), rel_update: self.final_rel_update() })
        }
    }
}

fn scaled_residual(moments: &[f64], target: &[f64]) -> f64 {
    moments.iter().zip(target).fold(0.0, |m, (a, t)| m.max((a - t).abs() / (1.0 + t.abs())))
}

struct Evaluation {
    state: ClosureState,
    moments: DVector<f64>,
    jacobian: DMatrix<f64>,
    /// `⟨𝓜 φ*_N(α·m)⟩`.
    conjugate: f64,
}

fn hankel(sums: &[f64], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| sums[i + j])
}

fn evaluate(state: ClosureState, rule: MomentRule) -> Evaluation {
    let k = state.k();
    let n = state.order();
    let (moments, jac_sums, top) = match rule {
        MomentRule::Gamma => (
            state.power_moments(n, k, rule),
            state.power_moments(n - 1, 2 * k - 1, rule),
            state.power_moments(n + 1, 1, rule)[0],
        ),
        MomentRule::Panel => {
            let mut nodes = Vec::new();
            for iv in state.support().intervals() {
                panel_nodes(state.background(), state.frame(), *iv, &mut nodes);
            }
            let mut moments = vec![0.0; k];
            let mut jac = vec![0.0; 2 * k - 1];
            let mut top = 0.0;
            for (w, wt) in nodes {
                let b = state.base().eval(w);
                let lower = wt * b.powi(n as i32 - 1);
                top += lower * b * b;
                let mut term = lower;
                for (i, s) in jac.iter_mut().enumerate() {
                    if i < k {
                        moments[i] += term * b;
                    }
                    *s += term;
                    term *= w;
                }
            }
            (moments, jac, top)
        }
    };
    let nf = n as f64;
    let conjugate = nf / (1.0 + nf) * (top - state.background().rho);
    Evaluation { moments: DVector::from_vec(moments), jacobian: hankel(&jac_sums, k), conjugate, state }
}

/// `J(α) = ⟨m⊗m 𝓜 (1 + α·m/N)^{N-1}_+⟩`, symmetric by construction.
pub fn jacobian(state: &ClosureState, rule: MomentRule) -> DMatrix<f64> {
    let k = state.k();
    hankel(&state.power_moments(state.order() - 1, 2 * k - 1, rule), k)
}

/// `κ∞` with a flag for matrices singular to working precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub kappa: f64,
    pub singular: bool,
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `κ∞(J) = ‖J‖∞ ‖J⁻¹‖∞` with the inverse from an LU factorization.
pub fn condition_estimate(j: &DMatrix<f64>) -> Condition {
    let singular = Condition { kappa: f64::INFINITY, singular: true };
    if !j.is_square() || j.nrows() == 0 {
        return singular;
    }
    match j.clone().lu().try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => {
            let kappa = inf_norm(j) * inf_norm(&inv);
            if kappa.is_finite() && kappa < 1.0 / f64::EPSILON {
                Condition { kappa: kappa.max(1.0), singular: false }
            } else {
                singular
            }
        }
        _ => singular,
    }
}

fn solve(j: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    j.clone().col_piv_qr().solve(rhs).filter(|d| d.iter().all(|x| x.is_finite()))
}

/// Projects `target` with the closure of order `order` about `background`,
/// starting from `α = 0` in the reduced frame of `background`.
pub fn project(
    target: &MomentVector,
    order: u32,
    background: Maxwellian,
    opts: &ProjectorOptions,
) -> Result<NewtonReport> {
    let initial = ClosureState::equilibrium(order, target.len(), background)?;
    project_from(target, initial, opts)
}

/// Damped Newton iteration on the dual objective starting from `initial`.
///
/// Each step is the Newton direction from a column-pivoted QR solve,
/// shortened by halving until the dual objective satisfies the Armijo
/// condition or the scaled residual at least halves. If no halving satisfies it, the trial with the smallest scaled
/// residual below the current one is taken instead; otherwise the run stops
/// unconverged. It also stops unconverged once the update falls to rounding
/// level.
///
/// The run converges after a full step with relative update at most `tol`
/// and scaled residual at most `residual_tol`, or once the undamped Newton
/// update itself meets both bounds; that last update is then applied as a
/// final full step.
pub fn project_from(target: &MomentVector, initial: ClosureState, opts: &ProjectorOptions) -> Result<NewtonReport> {
    let k = target.len();
    if k < 3 {
        return Err(Error::Domain(format!("projection needs at least 3 moments, got {k}")));
    }
    if initial.k() != k {
        return Err(Error::Domain(format!("initial state has {} coefficients, target {k}", initial.k())));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let target = target.in_frame(*initial.frame());
    if !target.is_realizable() {
        return Err(Error::NotRealizable("target moments fail the Hankel test".into()));
    }
    let t = DVector::from_column_slice(&target.values);
    let dual = |e: &Evaluation| e.conjugate - DVector::from_column_slice(e.state.alpha()).dot(&t);

    let mut current = evaluate(initial, opts.rule);
    let mut objective = dual(&current);
    let mut iterates = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let r = &current.moments - &t;
        let residual = scaled_residual(current.moments.as_slice(), t.as_slice());
        let Some(d) = solve(&current.jacobian, &(-&r)) else {
            break;
        };
        let alpha = DVector::from_column_slice(current.state.alpha());
        let newton_rel = d.norm() / alpha.norm().max(f64::MIN_POSITIVE);
        let settled = residual <= opts.exact_tol
            || (!iterates.is_empty() && residual <= opts.residual_tol && newton_rel <= opts.tol);
        if settled {
            converged = true;
            if !iterates.is_empty() {
                // polish with the (negligible) final step
                let next = &alpha + &d;
                let polished = current
                    .state
                    .with_alpha(next.as_slice().to_vec())
                    .map(|state| evaluate(state, opts.rule))
                    .ok()
                    .filter(|e| scaled_residual(e.moments.as_slice(), t.as_slice()) <= residual.max(opts.residual_tol));
                if let Some(e) = polished {
                    let norm = next.norm();
                    iterates.push(NewtonIterate {
                        alpha: next.as_slice().to_vec(),
                        rel_update: if norm > 0.0 { d.norm() / norm } else { 0.0 },
                        residual: scaled_residual(e.moments.as_slice(), t.as_slice()),
                        kappa_inf: condition_estimate(&e.jacobian).kappa,
                        step: 1.0,
                        dual_objective: dual(&e),
                        armijo: false,
                    });
                    current = e;
                }
            }
            break;
        }
        let slope = r.dot(&d);
        let mut step = 1.0;
        let mut accepted: Option<(Evaluation, f64, bool)> = None;
        let mut fallback: Option<(Evaluation, f64, f64)> = None;
        for _ in 0..=opts.max_halvings {
            let trial = &alpha + &d * step;
            if let Ok(state) = current.state.with_alpha(trial.as_slice().to_vec()) {
                let e = evaluate(state, opts.rule);
                let l = dual(&e);
                let res = scaled_residual(e.moments.as_slice(), t.as_slice());
                let sufficient = l.is_finite() && l <= objective + 1e-4 * step * slope;
                if sufficient || res <= 0.5 * residual {
                    accepted = Some((e, step, sufficient));
                    break;
                }
                if res < residual && fallback.as_ref().is_none_or(|f| res < f.2) {
                    fallback = Some((e, step, res));
                }
            }
            step *= 0.5;
        }
        let Some((next, step, armijo)) = accepted.or(fallback.map(|(e, s, _)| (e, s, false))) else {
            break;
        };
        let new_alpha = DVector::from_column_slice(next.state.alpha());
        let norm = new_alpha.norm();
        let rel_update = if norm > 0.0 { (&d * step).norm() / norm } else { 0.0 };
        let new_residual = scaled_residual(next.moments.as_slice(), t.as_slice());
        objective = dual(&next);
        iterates.push(NewtonIterate {
            alpha: new_alpha.as_slice().to_vec(),
            rel_update,
            residual: new_residual,
            kappa_inf: condition_estimate(&next.jacobian).kappa,
            step,
            dual_objective: objective,
            armijo,
        });
        current = next;
        if step == 1.0 && rel_update <= opts.tol && new_residual <= opts.residual_tol {
            converged = true;
            break;
        }
        if rel_update <= f64::EPSILON {
            break;
        }
    }
    Ok(NewtonReport { iterates, converged, final_state: current.state, target })
}

/// Projections for an increasing list of basis sizes with continuation in `k`.
///
/// Each size warm-starts from the converged coefficients of `k - 2` padded
/// with zeros, then from `k - 1`, then from the background itself; the first
/// converged run is kept.
pub fn project_continuation<F>(
    ks: &[usize],
    target_for: F,
    order: u32,
    background: Maxwellian,
    opts: &ProjectorOptions,
) -> Vec<(usize, Result<NewtonReport>)>
where
    F: Fn(usize) -> Result<MomentVector>,
{
    let mut solved: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let result = target_for(k).and_then(|target| {
            let mut starts: Vec<Vec<f64>> = [2, 1]
                .iter()
                .filter_map(|lag| k.checked_sub(*lag).and_then(|p| solved.get(&p)))
                .map(|a| {
                    let mut padded = a.clone();
                    padded.resize(k, 0.0);
                    padded
                })
                .collect();
            starts.push(vec![0.0; k]);
            starts.dedup();
            let mut last = None;
            for alpha in starts {
                let attempt = ClosureState::new(order, alpha, background, background.reduced_frame())
                    .and_then(|init| project_from(&target, init, opts));
                match attempt {
                    Ok(report) if report.converged => return Ok(report),
                    other => last = Some(other),
                }
            }
            last.expect("at least one start")
        });
        if let Ok(report) = &result {
            if report.converged {
                solved.insert(k, report.final_state.alpha().to_vec());
            }
        }
        out.push((k, result));
    }
    out
}

/// `⟨𝓜 φ*_N(ξ|m|)⟩` for each basis element (rows) and `ξ` (columns).
///
/// `|m|` is split at the roots of `m`; on each piece `1 + ξ|m|/N ≥ 1`, so
/// the integrand is a polynomial times `𝓜` and the value is exact.
pub fn csiszar_condition3_check(
    basis: &[Polynomial],
    order: u32,
    m: &Maxwellian,
    xi_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if let Some(xi) = xi_grid.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Domain(format!("ξ must be positive, got {xi}")));
    }
    let nf = order as f64;
    basis
        .iter()
        .map(|p| {
            let pos = positivity_support(p, SUPPORT_TOL)?;
            let neg = positivity_support(&(-p), SUPPORT_TOL)?;
            Ok(xi_grid
                .iter()
                .map(|&xi| {
                    let integral = |sign: f64, set: &PositivitySupport| -> f64 {
                        let q = (&Polynomial::constant(1.0) + &p.scale(sign * xi / nf)).pow(order + 1);
                        set.intervals().iter().map(|iv| maxwellian_poly_moment(m, &q, *iv)).sum()
                    };
                    let total = integral(1.0, &pos) + integral(-1.0, &neg);
                    nf / (1.0 + nf) * (total - m.rho)
                })
                .collect())
        })
        .collect()
}

/// Adjusts `α_0, α_1, α_2` so that the closure has the mass, momentum and
/// energy of its background. For such states the background is the
/// equilibrium `𝓔_𝓕` of the closure itself.
pub fn match_invariants(state: &ClosureState, rule: MomentRule) -> Result<ClosureState> {
    let want = DVector::from_vec(frame_power_moments(state.background(), state.frame(), Interval::real_line(), 3));
    let scale = 1.0 + want.amax();
    let mut current = state.clone();
    for _ in 0..200 {
        let got = DVector::from_vec(current.power_moments(current.order(), 3, rule));
        let r = &got - &want;
        let res = r.amax() / scale;
        if res <= 1e-15 {
            return Ok(current);
        }
        let j = jacobian(&current, rule).view((0, 0), (3, 3)).into_owned();
        let d = solve(&j, &(-&r)).ok_or(Error::NotConverged { iterations: 0, rel_update: f64::NAN })?;
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let mut alpha = current.alpha().to_vec();
            for i in 0..3 {
                alpha[i] += step * d[i];
            }
            if let Ok(s) = current.with_alpha(alpha) {
                let rr = (&DVector::from_vec(s.power_moments(s.order(), 3, rule)) - &want).amax() / scale;
                if rr < res {
                    next = Some(s);
                    break;
                }
            }
            step *= 0.5;
        }
        match next {
            Some(s) => current = s,
            None if res <= 1e-12 => return Ok(current),
            None => break,
        }
    }
    Err(Error::NotConverged { iterations: 200, rel_update: f64::NAN })
}

/// `⟨𝓜 φ*_N(α·m)⟩` by quadrature of the closed form, for checks.
pub fn dual_conjugate_oracle(state: &ClosureState, tol: f64) -> Result<f64> {
    let g = state.g();
    let frame: Frame = *state.frame();
    let n = state.order();
    crate::gausskernel::integrate_with_breaks(
        |v| state.background().eval(v) * phi_n_conjugate(n, g.eval(frame.to_frame(v))),
        Interval::real_line(),
        &state.quadrature_breaks(),
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausskernel::quadrature_oracle;

    #[test]
    fn jacobian_example() {
        let s = ClosureState::new(2, vec![0.0; 3], Maxwellian::standard(), Frame::IDENTITY).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 3.0]);
        for rule in [MomentRule::Gamma, MomentRule::Panel] {
            let j = jacobian(&s, rule);
            assert!((&j - &want).amax() < 1e-13);
            assert_eq!(j, j.transpose());
        }
    }

    #[test]
    fn condition_examples() {
        assert_eq!(condition_estimate(&DMatrix::identity(3, 3)).kappa, 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-5]));
        assert!((condition_estimate(&d).kappa - 1e5).abs() < 1e-6);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let c = condition_estimate(&s);
        assert!(c.singular && c.kappa.is_infinite());
    }

    #[test]
    fn projecting_background_moments_is_immediate() {
        let m = Maxwellian::new(1.3, 0.4, 0.9).unwrap();
        let eq = ClosureState::equilibrium(2, 6, m).unwrap();
        let report = project(&eq.moments(MomentRule::Gamma), 2, m, &ProjectorOptions::default()).unwrap();
        assert!(report.converged);
        assert!(report.iterations() <= 1);
        assert!(report.final_state.alpha().iter().all(|a| a.abs() < 1e-10));
    }

    #[test]
    fn projection_recovers_state() {
        let m = Maxwellian::new(1.0, 0.0, 0.5).unwrap();
        let truth = ClosureState::new(2, vec![-0.3, 0.2, 0.6, -0.1, -0.2], m, m.reduced_frame()).unwrap();
        let target = truth.moments(MomentRule::Gamma);
        let report = project(&target, 2, m, &ProjectorOptions::default()).unwrap().into_converged().unwrap();
        for (a, b) in report.final_state.alpha().iter().zip(truth.alpha()) {
            assert!((a - b).abs() < 1e-8, "{:?}", report.final_state.alpha());
        }
        assert!(report.final_residual() <= 1e-3);
        for w in report.iterates.windows(2) {
            if w[1].armijo {
                assert!(w[1].dual_objective <= w[0].dual_objective + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_unrealizable_target() {
        let t = MomentVector::raw(vec![1.0, 0.0, -1.0]);
        assert!(matches!(
            project(&t, 2, Maxwellian::standard(), &ProjectorOptions::default()),
            Err(Error::NotRealizable(_))
        ));
    }

    #[test]
    fn csiszar_examples() {
        let m = Maxwellian::new(1.7, 0.0, 1.0).unwrap();
        let one = Polynomial::constant(1.0);
        let out = csiszar_condition3_check(&[one], 2, &m, &[0.5, 2.0]).unwrap();
        for (xi, v) in [0.5_f64, 2.0].iter().zip(&out[0]) {
            let want = 2.0 / 3.0 * 1.7 * ((1.0 + xi / 2.0).powi(3) - 1.0);
            assert!((v - want).abs() < 1e-13);
        }
        let small = csiszar_condition3_check(&[Polynomial::monomial(2)], 2, &m, &[1e-12]).unwrap();
        assert!(small[0][0].abs() < 1e-10);
        let v4 = Polynomial::monomial(4);
        let std = Maxwellian::standard();
        let val = csiszar_condition3_check(&[v4], 2, &std, &[1.0]).unwrap()[0][0];
        let oracle =
            quadrature_oracle(|v| std.eval(v) * phi_n_conjugate(2, v.powi(4)), Interval::real_line(), 1e-12).unwrap();
        assert!(val.is_finite() && ((val - oracle) / oracle).abs() < 1e-8);
        let odd = Polynomial::new(vec![0.5, -1.0, 0.0, 0.3]);
        let val = csiszar_condition3_check(std::slice::from_ref(&odd), 3, &std, &[0.7]).unwrap()[0][0];
        let oracle = quadrature_oracle(
            |v| std.eval(v) * phi_n_conjugate(3, 0.7 * odd.eval(v).abs()),
            Interval::real_line(),
            1e-12,
        )
        .unwrap();
        assert!(((val - oracle) / oracle).abs() < 1e-8);
    }

    #[test]
    fn invariant_matching() {
        let m = Maxwellian::new(2.0, 0.5, 1.5).unwrap();
        let s = ClosureState::new(2, vec![0.0, 0.0, 0.0, 0.3, -0.4], m, m.reduced_frame()).unwrap();
        let fixed = match_invariants(&s, MomentRule::Gamma).unwrap();
        let got = fixed.moments(MomentRule::Gamma).in_frame(Frame::IDENTITY);
        assert!((got.values[0] - 2.0).abs() < 1e-13);
        assert!((got.values[1] - 1.0).abs() < 1e-13);
        assert!((got.values[2] - 2.0 * (0.25 + 1.5)).abs() < 1e-12);
        assert_eq!(&fixed.alpha()[3..], &[0.3, -0.4]);
    }

    #[test]
    fn dual_value_matches_oracle() {
        let m = Maxwellian::new(1.0, 0.2, 0.8).unwrap();
        let s = ClosureState::new(2, vec![0.1, -0.4, -0.6, 0.2, 0.1], m, m.reduced_frame()).unwrap();
        let e = evaluate(s.clone(), MomentRule::Gamma);
        let oracle = dual_conjugate_oracle(&s, 1e-13).unwrap();
        assert!((e.conjugate - oracle).abs() < 1e-10);
        let p = evaluate(s, MomentRule::Panel);
        assert!((p.conjugate - oracle).abs() < 1e-10);
    }
}
