#![allow(dead_code)]

use divclosure::closures::{ClosureState, MomentRule};
use divclosure::gausskernel::{Frame, Maxwellian};
use divclosure::projector::match_invariants;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORDERS: [u32; 3] = [1, 2, 4];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_maxwellian(rng: &mut ChaCha8Rng) -> Maxwellian {
    Maxwellian::new(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)).unwrap()
}

/// Closure state with `N ∈ {1, 2, 4}`, `3 ≤ k ≤ kmax`, coefficients in the
/// reduced frame of a random background. About half the draws end in a
/// negative even-degree coefficient, which gives bounded support.
pub fn random_state(rng: &mut ChaCha8Rng, kmax: usize) -> ClosureState {
    loop {
        let order = ORDERS[rng.random_range(0..ORDERS.len())];
        let k = rng.random_range(3..=kmax);
        let m = random_maxwellian(rng);
        let mut alpha: Vec<f64> = (0..k).map(|j| rng.random_range(-0.6..0.6) / (1.0 + j as f64)).collect();
        if (k - 1) % 2 == 0 && rng.random_bool(0.5) {
            alpha[k - 1] = -rng.random_range(0.02..0.2);
        }
        if let Ok(s) = ClosureState::new(order, alpha, m, m.reduced_frame()) {
            return s;
        }
    }
}

/// As [`random_state`], adjusted so that the background is the equilibrium
/// of the closure.
pub fn random_consistent_state(rng: &mut ChaCha8Rng, kmax: usize) -> ClosureState {
    loop {
        let s = random_state(rng, kmax);
        if let Ok(s) = match_invariants(&s, MomentRule::Gamma) {
            return s;
        }
    }
}

/// Random frame with moderate center and scale.
pub fn random_frame(rng: &mut ChaCha8Rng) -> Frame {
    Frame::new(rng.random_range(-1.5..1.5), rng.random_range(0.4..2.0)).unwrap()
}

/// `|a - b| ≤ tol · max(|b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(floor)
}
