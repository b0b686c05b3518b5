//! Adaptive Gauss–Kronrod quadrature used as an independent check on the
//! closed-form moment kernel, and for integrands that are not
//! polynomial-times-Gaussian (L¹ errors, cosine moments).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Interval;
use crate::error::{Error, Result};

const MAX_SEGMENTS: usize = 4000;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Map from the unit parameter `t` to the integration variable, with its
/// Jacobian. Infinite ranges use `x = a + (1 - t)/t` style transforms.
#[derive(Clone, Copy, Debug)]
enum Map {
    Finite,
    UpperTail { a: f64 },
    LowerTail { b: f64 },
}

impl Map {
    fn apply(&self, t: f64) -> (f64, f64) {
        match *self {
            Map::Finite => (t, 1.0),
            Map::UpperTail { a } => (a + (1.0 - t) / t, 1.0 / (t * t)),
            Map::LowerTail { b } => (b - (1.0 - t) / t, 1.0 / (t * t)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, map: Map) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |t: f64| {
        let (x, jac) = map.apply(t);
        let y = f(x) * jac;
        if y.is_finite() {
            y
        } else {
            0.0
        }
    };
    let fc = eval(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = eval(center - dx) + eval(center + dx);
        resk += WGK[j] * pair;
        if j % 2 == 1 {
            resg += WG[j / 2] * pair;
        }
    }
    let value = resk * half;
    let error = ((resk - resg) * half).abs();
    Segment { lo, hi, map, value, error }
}

/// Adaptive integral of `f` over `iv` to absolute tolerance `tol`.
pub fn quadrature_oracle<F: Fn(f64) -> f64>(f: F, iv: Interval, tol: f64) -> Result<f64> {
    integrate_with_breaks(f, iv, &[], tol)
}

/// Adaptive integral with interior break points where `f` has kinks.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, iv: Interval, breaks: &[f64], tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if iv.lo == iv.hi {
        return Ok(0.0);
    }
    let mut points: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite() && *b > iv.lo && *b < iv.hi).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    if iv.lo.is_infinite() && iv.hi.is_infinite() && points.is_empty() {
        points.push(0.0);
    }
    let mut edges = vec![iv.lo];
    edges.extend(points);
    edges.push(iv.hi);

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = if a.is_infinite() {
            kronrod(&f, 0.0, 1.0, Map::LowerTail { b })
        } else if b.is_infinite() {
            kronrod(&f, 0.0, 1.0, Map::UpperTail { a })
        } else {
            kronrod(&f, a, b, Map::Finite)
        };
        heap.push(seg);
    }

    let totals = |heap: &BinaryHeap<Segment>| {
        heap.iter().fold((0.0, 0.0, 0.0), |(v, e, m), s| (v + s.value, e + s.error, m + s.value.abs()))
    };
    for _ in 0..MAX_SEGMENTS {
        let (value, error, magnitude) = totals(&heap);
        if error <= tol || error <= 50.0 * f64::EPSILON * magnitude {
            return Ok(value);
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // cannot bisect further
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod(&f, worst.lo, mid, worst.map));
        heap.push(kronrod(&f, mid, worst.hi, worst.map));
    }
    let (estimate, error, _) = totals(&heap);
    Err(Error::Quadrature { estimate, error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let v = quadrature_oracle(|x| (-x * x).exp(), Interval::real_line(), 1e-10).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn half_line_and_finite() {
        let v = quadrature_oracle(|x| x * (-x * x).exp(), Interval::new(0.0, f64::INFINITY).unwrap(), 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let v = quadrature_oracle(|x| x.sin(), Interval::new(0.0, std::f64::consts::PI).unwrap(), 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = quadrature_oracle(|x| x.exp(), Interval::new(f64::NEG_INFINITY, 0.0).unwrap(), 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand_with_breaks() {
        let f = |x: f64| (x - 0.3).abs() * (-x * x).exp();
        let with = integrate_with_breaks(f, Interval::real_line(), &[0.3], 1e-12).unwrap();
        let without = quadrature_oracle(f, Interval::real_line(), 1e-12).unwrap();
        assert!((with - without).abs() < 1e-10);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        assert!(quadrature_oracle(|x| x, Interval::new(0.0, 1.0).unwrap(), 0.0).is_err());
    }
}
