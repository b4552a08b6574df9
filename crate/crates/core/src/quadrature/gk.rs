//! Globally adaptive 21-point Gauss–Kronrod integration.
//!
//! Every integral is a set of segments, each living in its own coordinate map.
//! Segments sit in one max-heap keyed by error estimate; the worst one is bisected
//! until the summed error meets the target. Endpoint singularities are handled by
//! the exponential map `x = s ± w e^{-t}`, which turns a peak of width `d` at `s`
//! into a bump of width O(1) near `t = ln(w/d)`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kronrod abscissae on `[-1, 1]`, descending; odd slots are the Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Gauss weights for `XGK[1], XGK[3], .., XGK[9]`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Evaluations per segment.
pub const RULE_POINTS: u64 = 21;

/// Largest `t` used by the exponential map; `e^{-700}` is near the bottom of f64.
const MAX_LOG_SPAN: f64 = 700.0;

/// Segments per 1D integral before giving up.
const MAX_SEGMENTS: usize = 4000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: u64,
    pub converged: bool,
}

/// Evaluation budget shared by every level of a nested integral.
#[derive(Debug)]
pub struct Budget {
    used: Cell<u64>,
    cap: u64,
}

impl Budget {
    pub fn new(cap: u64) -> Self {
        Budget {
            used: Cell::new(0),
            cap,
        }
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    pub fn exhausted(&self) -> bool {
        self.used.get() >= self.cap
    }

    fn charge(&self, n: u64) {
        self.used.set(self.used.get() + n);
    }
}

/// How the integrand behaves at a flagged endpoint, used to size the exponential map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointHint {
    /// Ratio of the smallest to the largest integrand scale, e.g. `q / (max|f| + q)`.
    pub scale_ratio: f64,
    /// Power `a` in `int_0^d x^{a-1} dx`; 1 for bounded integrands, `1 - 2 gamma` for
    /// power-law test functions.
    pub power: f64,
}

impl Default for EndpointHint {
    fn default() -> Self {
        EndpointHint {
            scale_ratio: 1e-16,
            power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `x = s + w e^{-t}`.
    FromLeft { s: f64, w: f64 },
    /// `x = s - w e^{-t}`.
    FromRight { s: f64, w: f64 },
}

impl Map {
    #[inline]
    fn apply(&self, t: f64) -> (f64, f64) {
        match *self {
            Map::Identity => (t, 1.0),
            Map::FromLeft { s, w } => {
                let d = w * (-t).exp();
                (s + d, d)
            }
            Map::FromRight { s, w } => {
                let d = w * (-t).exp();
                (s - d, d)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    map: Map,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
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

/// One 21-point rule on `[a, b]` of `f(x(t)) |dx/dt|`; returns `(value, error)`.
fn rule<F: FnMut(f64) -> f64>(f: &mut F, map: Map, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |t: f64| {
        let (x, jac) = map.apply(t);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let fc = eval(center);
    let mut resk = fc * WGK[10];
    let mut resabs = resk.abs();
    let mut resg = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx);
        let f2 = eval(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let width = half.abs();
    let resk = resk * half;
    resabs *= width;
    resasc *= width;
    let mut err = (resk - resg * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (resk, err)
}

/// Adaptive integration over the initial segments until the summed error is at most
/// `max(abs_tol, rel_tol * |value|)`.
fn adapt<F: FnMut(f64) -> f64>(
    f: &mut F,
    initial: &[(Map, f64, f64)],
    rel_tol: f64,
    abs_tol: f64,
    budget: &Budget,
) -> Estimate {
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Segment> = Vec::new();
    let mut evals = 0u64;
    for &(map, a, b) in initial {
        if !(b > a) {
            continue;
        }
        let (value, error) = rule(f, map, a, b);
        evals += RULE_POINTS;
        budget.charge(RULE_POINTS);
        heap.push(Segment { map, a, b, value, error });
    }
    let mut value: f64 = heap.iter().map(|s| s.value).sum();
    let mut error: f64 = heap.iter().map(|s| s.error).sum();
    let mut converged = true;
    loop {
        let target = abs_tol.max(rel_tol * value.abs());
        if error <= target {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        if heap.len() + settled.len() >= MAX_SEGMENTS || budget.exhausted() {
            heap.push(worst);
            converged = false;
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 4.0 * f64::EPSILON * mid.abs() {
            // cannot bisect further; accept the estimate as is
            error -= worst.error;
            settled.push(worst);
            continue;
        }
        let (v1, e1) = rule(f, worst.map, worst.a, mid);
        let (v2, e2) = rule(f, worst.map, mid, worst.b);
        evals += 2 * RULE_POINTS;
        budget.charge(2 * RULE_POINTS);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment { map: worst.map, a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { map: worst.map, a: mid, b: worst.b, value: v2, error: e2 });
    }
    // resum to shed accumulated rounding from the running totals
    let value = heap.iter().chain(settled.iter()).map(|s| s.value).sum::<f64>();
    let error = heap.iter().map(|s| s.error).sum::<f64>();
    if error > abs_tol.max(rel_tol * value.abs()) {
        converged = false;
    }
    Estimate {
        value,
        error,
        evals,
        converged,
    }
}

/// Plain adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, budget: &Budget) -> Estimate {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut est = adapt(&mut f, &[(Map::Identity, lo, hi)], rel_tol, 0.0, budget);
    est.value *= sign;
    est
}

/// Adaptive integral of `f` over `[a, b]` where `f` may peak sharply at any of
/// `points`. Points inside `(a, b)` split the interval; every piece touching a
/// flagged point is integrated through the exponential map toward it.
pub fn integrate_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    hint: EndpointHint,
    rel_tol: f64,
    budget: &Budget,
) -> Estimate {
    if !(b > a) {
        return Estimate {
            value: 0.0,
            error: 0.0,
            evals: 0,
            converged: true,
        };
    }
    let snap = 1e-14 * (b - a).max(a.abs()).max(b.abs());
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a + snap && *p < b - snap)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= snap);
    let is_flagged = |x: f64| points.iter().any(|p| (p - x).abs() <= snap);

    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts.iter().copied());
    nodes.push(b);

    let ratio = hint.scale_ratio.clamp(1e-300, 1.0);
    let power = hint.power.max(1e-3);
    let span = ((-(1e-3 * rel_tol.max(1e-15) * ratio).ln()) / power).clamp(30.0, MAX_LOG_SPAN);

    let mut initial = Vec::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let left = lo == a && is_flagged(a) || lo != a;
        let right = hi == b && is_flagged(b) || hi != b;
        match (left, right) {
            (false, false) => initial.push((Map::Identity, lo, hi)),
            (true, false) => push_mapped(&mut initial, lo, hi, true, span),
            (false, true) => push_mapped(&mut initial, lo, hi, false, span),
            (true, true) => {
                let mid = 0.5 * (lo + hi);
                push_mapped(&mut initial, lo, mid, true, span);
                push_mapped(&mut initial, mid, hi, false, span);
            }
        }
    }
    adapt(&mut f, &initial, rel_tol, 0.0, budget)
}

fn push_mapped(out: &mut Vec<(Map, f64, f64)>, lo: f64, hi: f64, toward_lo: bool, span: f64) {
    let w = hi - lo;
    let rest = w * (-span).exp();
    if toward_lo {
        out.push((Map::FromLeft { s: lo, w }, 0.0, span));
        if lo + rest > lo {
            out.push((Map::Identity, lo, lo + rest));
        }
    } else {
        out.push((Map::FromRight { s: hi, w }, 0.0, span));
        if hi - rest < hi {
            out.push((Map::Identity, hi - rest, hi));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> Budget {
        Budget::new(1 << 24)
    }

    #[test]
    fn kronrod_is_exact_on_polynomials() {
        for deg in 0..=29 {
            let est = integrate(|x: f64| x.powi(deg), 0.0, 1.0, 1e-14, &budget());
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((est.value - want).abs() < 1e-14, "degree {deg}: {}", est.value);
        }
    }

    #[test]
    fn gauss_weights_integrate_constant() {
        let sum: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((sum - 2.0).abs() < 1e-14);
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((k - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrals() {
        let est = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12, &budget());
        assert!((est.value - 2.0).abs() < 1e-12);
        let est = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-12, &budget());
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-11);
        assert!(est.converged);
    }

    #[test]
    fn sharp_peak_at_interior_point() {
        let q = 1e-12;
        let est = integrate_singular(
            |x: f64| 1.0 / (x * x + q),
            -1.0,
            1.0,
            &[0.0],
            EndpointHint { scale_ratio: q, power: 1.0 },
            1e-10,
            &budget(),
        );
        let want = 2.0 * (1.0 / q.sqrt()).atan() / q.sqrt();
        assert!(((est.value - want) / want).abs() < 1e-10, "{} vs {want}", est.value);
        assert!(est.evals < 5000, "{} evals", est.evals);
    }

    #[test]
    fn algebraic_endpoint_singularity() {
        let est = integrate_singular(
            |x: f64| x.powf(-0.9),
            0.0,
            1.0,
            &[0.0],
            EndpointHint { scale_ratio: 1.0, power: 0.1 },
            1e-10,
            &budget(),
        );
        assert!((est.value - 10.0).abs() < 1e-8, "{}", est.value);
    }

    #[test]
    fn budget_exhaustion_reports_failure() {
        let b = Budget::new(100);
        let est = integrate(|x: f64| (1.0 / x).sin(), 1e-9, 1.0, 1e-14, &b);
        assert!(!est.converged);
    }
}
