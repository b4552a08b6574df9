//! Deterministic evaluation of `<V g, g> = (sigma^2 / 2) int g^2 / (-f - p) dx`.
//!
//! One-dimensional integrals use [`gk::integrate_singular`] with the symbol's zeros
//! as flagged points. Two- and three-dimensional integrals are iterated: axis 0 is
//! outermost, and every inner integral is itself adaptive with flagged points that
//! depend on the outer coordinates. Radial symbols over a disc centred at the root
//! collapse to a one-dimensional radial integral.

pub mod gk;

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbols::{FrequencySymbol, MultiIndex, SymbolKind, SymbolSpec};
use gk::{Budget, EndpointHint, Estimate};

/// Default evaluation cap for one integral.
pub const DEFAULT_MAX_EVALS: u64 = 1 << 24;

/// Relative tolerance used when none is configured.
pub fn default_tolerance(dim: usize) -> f64 {
    if dim == 1 {
        1e-8
    } else {
        1e-6
    }
}

/// Probe function `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// Indicator of the box `[lo, hi]`.
    IndicatorBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `x^{-gamma}` on `(0, eps]`, zero elsewhere; one-dimensional.
    PowerIndicator { gamma: f64, eps: f64 },
    /// Indicator of a disc, or of its quarter `x >= center` componentwise.
    IndicatorDisc {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        quarter: bool,
    },
}

impl TestFunction {
    pub fn indicator_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let g = TestFunction::IndicatorBox { lo, hi };
        g.validate()?;
        Ok(g)
    }

    /// `1_{[0, eps]^dim}`.
    pub fn unit_box(eps: f64, dim: usize) -> Result<Self> {
        Self::indicator_box(vec![0.0; dim], vec![eps; dim])
    }

    pub fn power_indicator(gamma: f64, eps: f64) -> Result<Self> {
        let g = TestFunction::PowerIndicator { gamma, eps };
        g.validate()?;
        Ok(g)
    }

    pub fn disc(center: Vec<f64>, radius: f64, quarter: bool) -> Result<Self> {
        let g = TestFunction::IndicatorDisc { center, radius, quarter };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::IndicatorBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.len() > 3 {
                    return Err(Error::arg("box bounds must have equal length in 1..=3"));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::arg("box needs finite lo < hi on every axis"));
                }
            }
            TestFunction::PowerIndicator { gamma, eps } => {
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(Error::arg("eps must be positive"));
                }
                if !gamma.is_finite() || *gamma < 0.0 {
                    return Err(Error::arg("gamma must be non-negative"));
                }
                if *gamma >= 0.5 {
                    return Err(Error::arg(format!(
                        "gamma = {gamma} >= 1/2: x^(-2 gamma) is not integrable at 0"
                    )));
                }
            }
            TestFunction::IndicatorDisc { center, radius, .. } => {
                if center.len() != 2 || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::arg("disc centre must be a finite 2D point"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::arg("disc radius must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::IndicatorBox { lo, .. } => lo.len(),
            TestFunction::PowerIndicator { .. } => 1,
            TestFunction::IndicatorDisc { .. } => 2,
        }
    }

    /// Smallest box containing the support.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            TestFunction::IndicatorBox { lo, hi } => (lo.clone(), hi.clone()),
            TestFunction::PowerIndicator { eps, .. } => (vec![0.0], vec![*eps]),
            TestFunction::IndicatorDisc { center, radius, quarter } => {
                let lo = if *quarter {
                    center.clone()
                } else {
                    center.iter().map(|c| c - radius).collect()
                };
                (lo, center.iter().map(|c| c + radius).collect())
            }
        }
    }

    /// `g(x)`; zero off the support.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::IndicatorBox { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::PowerIndicator { gamma, eps } => {
                if x[0] > 0.0 && x[0] <= *eps {
                    x[0].powf(-gamma)
                } else {
                    0.0
                }
            }
            TestFunction::IndicatorDisc { center, radius, quarter } => {
                let d0 = x[0] - center[0];
                let d1 = x[1] - center[1];
                let inside = d0.hypot(d1) <= *radius && (!quarter || (d0 >= 0.0 && d1 >= 0.0));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `g(x)^2` for points known to lie in the support.
    fn square_inside(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::PowerIndicator { gamma, .. } => x[0].powf(-2.0 * gamma),
            _ => 1.0,
        }
    }

    /// Integration limits along `axis` given the outer coordinates.
    fn limits(&self, axis: usize, outer: &[f64]) -> (f64, f64) {
        match self {
            TestFunction::IndicatorBox { lo, hi } => (lo[axis], hi[axis]),
            TestFunction::PowerIndicator { eps, .. } => (0.0, *eps),
            TestFunction::IndicatorDisc { center, radius, quarter } => {
                let c = center[axis];
                let half = if axis == 0 {
                    *radius
                } else {
                    let d = outer[0] - center[0];
                    (radius * radius - d * d).max(0.0).sqrt()
                };
                if *quarter {
                    (c, c + half)
                } else {
                    (c - half, c + half)
                }
            }
        }
    }

    /// Points along `axis` where `g^2` or the limits are non-smooth.
    fn axis_points(&self, axis: usize, out: &mut Vec<f64>) {
        match self {
            TestFunction::PowerIndicator { .. } => out.push(0.0),
            TestFunction::IndicatorDisc { center, radius, .. } if axis == 0 => {
                out.push(center[0] - radius);
                out.push(center[0] + radius);
            }
            _ => {}
        }
    }

    fn endpoint_power(&self) -> f64 {
        match self {
            TestFunction::PowerIndicator { gamma, .. } => 1.0 - 2.0 * gamma,
            _ => 1.0,
        }
    }
}

/// Inputs of [`variance_quadrature`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceQuery {
    pub symbol: SymbolSpec,
    pub g: TestFunction,
    pub p: f64,
    pub sigma: f64,
}

impl VarianceQuery {
    pub fn new(symbol: SymbolSpec, g: TestFunction, p: f64, sigma: f64) -> Self {
        VarianceQuery { symbol, g, p, sigma }
    }
}

/// Knobs for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Relative tolerance; `None` picks [`default_tolerance`].
    pub rel_tol: Option<f64>,
    pub max_evals: u64,
    /// Use the radial reduction when the symbol is radial about the disc centre.
    pub polar: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: None,
            max_evals: DEFAULT_MAX_EVALS,
            polar: true,
        }
    }
}

/// Value with its error estimate and cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
    pub evals: u64,
}

/// `(sigma^2 / 2) int_{supp g} g^2 / (-f - p) dx` at the default tolerance.
pub fn variance_quadrature(q: &VarianceQuery) -> Result<f64> {
    variance_quadrature_with(q, &QuadOptions::default()).map(|e| e.value)
}

pub fn variance_quadrature_with(q: &VarianceQuery, opts: &QuadOptions) -> Result<QuadEstimate> {
    if !(q.p < 0.0) || !q.p.is_finite() {
        return Err(Error::arg(format!("p = {} must be negative", q.p)));
    }
    if !(q.sigma > 0.0) || !q.sigma.is_finite() {
        return Err(Error::arg(format!("sigma = {} must be positive", q.sigma)));
    }
    q.g.validate()?;
    let symbol = &q.symbol;
    let dim = symbol.dim();
    if q.g.dim() != dim {
        return Err(Error::arg(format!(
            "test function has dimension {}, symbol has dimension {dim}",
            q.g.dim()
        )));
    }
    let (lo, hi) = q.g.bounding_box();
    if !symbol.domain().contains(&lo) || !symbol.domain().contains(&hi) {
        return Err(Error::arg(format!(
            "support of g [{lo:?}, {hi:?}] leaves the symbol's domain [{:?}, {:?}]",
            symbol.domain().lo,
            symbol.domain().hi
        )));
    }
    let rel_tol = opts.rel_tol.unwrap_or_else(|| default_tolerance(dim));
    let shift = -q.p;
    let hint = EndpointHint {
        scale_ratio: shift / (symbol.max_abs() + shift),
        power: q.g.endpoint_power(),
    };
    let budget = Budget::new(opts.max_evals);
    let prefactor = 0.5 * q.sigma * q.sigma;

    if opts.polar {
        if let Some(est) = polar_reduction(q, rel_tol, hint, &budget) {
            return finish(est, prefactor, &budget);
        }
    }

    let g = &q.g;
    let integrand = |x: &[f64]| g.square_inside(x) / (-symbol.value(x) + shift);
    let limits = |axis: usize, outer: &[f64]| g.limits(axis, outer);
    let points = |axis: usize, outer: &[f64], out: &mut Vec<f64>| {
        out.extend(symbol.axis_singularities(axis, outer));
        g.axis_points(axis, out);
    };
    let nested = Nested {
        dim,
        integrand: &integrand,
        limits: &limits,
        points: &points,
        hint,
        budget: &budget,
        inner_failed: Cell::new(false),
    };
    let est = nested.run(rel_tol);
    finish(est, prefactor, &budget)
}

fn finish(est: Estimate, prefactor: f64, budget: &Budget) -> Result<QuadEstimate> {
    if !est.converged {
        return Err(Error::NotConverged {
            value: prefactor * est.value,
            error: prefactor * est.error,
            evals: budget.used(),
        });
    }
    Ok(QuadEstimate {
        value: prefactor * est.value,
        error: prefactor * est.error,
        evals: budget.used(),
    })
}

/// `angle * int_0^R r / (-f(r) - p) dr` for radial symbols over a disc about the root.
fn polar_reduction(q: &VarianceQuery, rel_tol: f64, hint: EndpointHint, budget: &Budget) -> Option<Estimate> {
    let TestFunction::IndicatorDisc { center, radius, quarter } = &q.g else {
        return None;
    };
    let symbol = &q.symbol;
    let peak = match symbol.kind() {
        SymbolKind::Radial2D { .. } => 0.0,
        SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D) => 1.0,
        _ => return None,
    };
    if center.as_slice() != symbol.root() {
        return None;
    }
    let angle = if *quarter { FRAC_PI_2 } else { 2.0 * PI };
    let root = symbol.root();
    let shift = -q.p;
    let mut est = gk::integrate_singular(
        |r| r / (-symbol.value(&[root[0] + r, root[1]]) + shift),
        0.0,
        *radius,
        &[peak],
        hint,
        rel_tol,
        budget,
    );
    est.value *= angle;
    est.error *= angle;
    Some(est)
}

type PointFn<'a> = dyn Fn(usize, &[f64], &mut Vec<f64>) + 'a;
type LimitFn<'a> = dyn Fn(usize, &[f64]) -> (f64, f64) + 'a;

/// Iterated adaptive integral over a region described axis by axis.
struct Nested<'a> {
    dim: usize,
    integrand: &'a (dyn Fn(&[f64]) -> f64 + 'a),
    limits: &'a LimitFn<'a>,
    points: &'a PointFn<'a>,
    hint: EndpointHint,
    budget: &'a Budget,
    inner_failed: Cell<bool>,
}

/// Inner integrals run this much tighter than the level enclosing them; since the
/// integrands are positive, inner relative errors bound the outer relative error.
const INNER_TIGHTENING: f64 = 0.3;

impl Nested<'_> {
    fn run(&self, rel_tol: f64) -> Estimate {
        let mut est = self.axis(0, [0.0; 3], rel_tol);
        if self.inner_failed.get() {
            est.converged = false;
        }
        est
    }

    fn axis(&self, axis: usize, point: [f64; 3], rel_tol: f64) -> Estimate {
        let (lo, hi) = (self.limits)(axis, &point[..axis]);
        let mut pts = Vec::new();
        (self.points)(axis, &point[..axis], &mut pts);
        let last = axis + 1 == self.dim;
        let inner_tol = rel_tol * INNER_TIGHTENING;
        let f = |x: f64| {
            let mut pt = point;
            pt[axis] = x;
            if last {
                (self.integrand)(&pt[..self.dim])
            } else {
                let inner = self.axis(axis + 1, pt, inner_tol);
                if !inner.converged {
                    self.inner_failed.set(true);
                }
                inner.value
            }
        };
        gk::integrate_singular(f, lo, hi, &pts, self.hint, rel_tol, self.budget)
    }
}

/// Strips zero components of `j`, returning the reduced index and the prefactor
/// `eps^k` for `k` stripped slots.
pub fn dimension_reduce(j: &MultiIndex, eps: f64) -> Result<(MultiIndex, f64)> {
    if j.is_zero() {
        return Err(Error::NoBifurcation(j.to_string()));
    }
    let kept: Vec<u32> = j.components().iter().copied().filter(|&c| c > 0).collect();
    let k = j.dim() - kept.len();
    Ok((MultiIndex::new(kept), eps.powi(k as i32)))
}

/// `int_{[0, eps]^N} 1 / (x^j + q) dx` at the default tolerance.
pub fn monomial_integral(j: &MultiIndex, eps: f64, q: f64) -> Result<f64> {
    monomial_integral_with(j, eps, q, &QuadOptions::default()).map(|e| e.value)
}

pub fn monomial_integral_with(j: &MultiIndex, eps: f64, q: f64, opts: &QuadOptions) -> Result<QuadEstimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::arg("eps must be positive"));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::arg("q must be positive"));
    }
    if j.dim() == 0 || j.dim() > 3 {
        return Err(Error::arg("multi-index dimension must be 1..=3"));
    }
    if j.is_zero() {
        return Ok(QuadEstimate {
            value: eps.powi(j.dim() as i32) / (1.0 + q),
            error: 0.0,
            evals: 0,
        });
    }
    let (reduced, factor) = dimension_reduce(j, eps)?;
    let dim = reduced.dim();
    let rel_tol = opts.rel_tol.unwrap_or_else(|| default_tolerance(dim));
    let fmax = eps.powi(reduced.degree() as i32);
    let hint = EndpointHint {
        scale_ratio: q / (fmax + q),
        power: 1.0,
    };
    let budget = Budget::new(opts.max_evals);
    let integrand = |x: &[f64]| 1.0 / (reduced.monomial(x) + q);
    let limits = |_: usize, _: &[f64]| (0.0, eps);
    let points = |_: usize, _: &[f64], out: &mut Vec<f64>| out.push(0.0);
    let nested = Nested {
        dim,
        integrand: &integrand,
        limits: &limits,
        points: &points,
        hint,
        budget: &budget,
        inner_failed: Cell::new(false),
    };
    let est = nested.run(rel_tol);
    finish(est, factor, &budget)
}

/// `int_0^{1/q} z log^m(z) / (z + 1)^2 dz`, evaluated as
/// `int_{-inf}^{ln(1/q)} u^m / (1 + e^{-u})^2 du`.
pub fn appendix_c_integral(m: u32, q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::arg("q must be positive"));
    }
    let upper = (1.0 / q).ln();
    let budget = Budget::new(DEFAULT_MAX_EVALS);
    let f = |u: f64| {
        let d = 1.0 + (-u).exp();
        u.powi(m as i32) / (d * d)
    };
    // e^{2u} |u|^m is far below f64 resolution of the total at u = -400
    let lower = -400.0;
    let est = if upper > 0.0 {
        let a = gk::integrate(f, lower, 0.0, 1e-13, &budget);
        let b = gk::integrate(f, 0.0, upper, 1e-13, &budget);
        Estimate {
            value: a.value + b.value,
            error: a.error + b.error,
            evals: a.evals + b.evals,
            converged: a.converged && b.converged,
        }
    } else {
        gk::integrate(f, lower, upper, 1e-13, &budget)
    };
    if !est.converged {
        return Err(Error::NotConverged {
            value: est.value,
            error: est.error,
            evals: est.evals,
        });
    }
    Ok(est.value)
}

/// Closed form of the `m = 0` case: `log(1/q + 1) + 1/(1/q + 1) - 1`.
pub fn appendix_c_closed_form(q: f64) -> f64 {
    let z = 1.0 / q;
    (z + 1.0).ln() + 1.0 / (z + 1.0) - 1.0
}
