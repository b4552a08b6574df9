//! Catalog of scaling laws `C (-p)^s (-log(-p))^k` and their empirical estimation.
//!
//! The catalog is organised in four tables: tool functions `-|x|^alpha` with box
//! probes (table 1) and with power probes `x^{-gamma}` (table 2), and upper bounds
//! for monomial drifts in two (table 3) and three (table 4) dimensions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::dimension_reduce;
use crate::symbols::MultiIndex;

const EXACT: f64 = 1e-12;

/// Rate `(-p)^s (-log(-p))^k`, or bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub s: f64,
    pub k: u32,
    pub convergent: bool,
}

impl ScalingLaw {
    pub fn convergent() -> Self {
        ScalingLaw {
            s: 0.0,
            k: 0,
            convergent: true,
        }
    }

    /// A divergent law; `(0, 0)` is normalised to the convergent law.
    pub fn new(s: f64, k: u32) -> Self {
        if s == 0.0 && k == 0 {
            Self::convergent()
        } else {
            ScalingLaw {
                s,
                k,
                convergent: false,
            }
        }
    }

    /// True if `self` diverges no faster than `other`: larger `s`, then smaller `k`.
    pub fn tighter_than(&self, other: &ScalingLaw) -> bool {
        match (self.convergent, other.convergent) {
            (true, _) => true,
            (false, true) => false,
            (false, false) => {
                if (self.s - other.s).abs() > EXACT {
                    self.s > other.s
                } else {
                    self.k <= other.k
                }
            }
        }
    }

    /// `(-p)^s (-log(-p))^k` at `q = -p`.
    pub fn shape(&self, q: f64) -> f64 {
        if self.convergent {
            1.0
        } else {
            q.powf(self.s) * (-q.ln()).powi(self.k as i32)
        }
    }
}

impl fmt::Display for ScalingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.convergent {
            write!(f, "convergent")
        } else {
            write!(f, "s={} k={}", fmt_num(self.s), self.k)
        }
    }
}

/// Short decimal form: at most six decimals, trailing zeros dropped.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{:.6}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// A law together with the catalog row it comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub law: ScalingLaw,
    pub row: String,
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.law, self.row)
    }
}

/// Law for `f = -|x|^alpha` and `g = x^{-gamma} 1_{[0, eps]}`.
pub fn law_1d(alpha: f64, gamma: f64) -> Result<ScalingLaw> {
    law_1d_entry(alpha, gamma).map(|e| e.law)
}

pub fn law_1d_entry(alpha: f64, gamma: f64) -> Result<CatalogEntry> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::arg(format!("alpha = {alpha} must be positive")));
    }
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::arg(format!("gamma = {gamma} must lie in [0, 1/2) so that g is square integrable")));
    }
    let e = 2.0 * gamma + alpha;
    let (table, lhs) = if gamma == 0.0 {
        ("Table 1", "α")
    } else {
        ("Table 2", "2γ+α")
    };
    let (law, rel) = if (e - 1.0).abs() <= EXACT {
        (ScalingLaw::new(0.0, 1), "=1")
    } else if e < 1.0 {
        (ScalingLaw::convergent(), "<1")
    } else {
        (ScalingLaw::new(-1.0 + (1.0 - 2.0 * gamma) / alpha, 0), ">1")
    };
    Ok(CatalogEntry {
        law,
        row: format!("{table}, {lhs}{rel}"),
    })
}

/// Law for `f(x) = -sum_n a_n x^n`: that of the tool function with `alpha` equal to
/// the least index with a nonzero coefficient.
pub fn law_analytic_1d(coeffs: &BTreeMap<u32, f64>) -> Result<ScalingLaw> {
    law_analytic_1d_entry(coeffs).map(|e| e.law)
}

pub fn law_analytic_1d_entry(coeffs: &BTreeMap<u32, f64>) -> Result<CatalogEntry> {
    let (&m, _) = coeffs
        .iter()
        .find(|(_, a)| **a != 0.0)
        .ok_or_else(|| Error::arg("need at least one nonzero coefficient"))?;
    if m == 0 {
        return Err(Error::arg("a constant term contradicts f(root) = 0"));
    }
    law_1d_entry(m as f64, 0.0)
}

/// Upper bound for `int_{[0,eps]^N} 1 / (x^j + q) dx` with every component of `j`
/// positive and `N` in {2, 3}.
pub fn law_upper_bound(j: &MultiIndex) -> Result<ScalingLaw> {
    upper_bound_entry(j).map(|e| e.law)
}

pub fn upper_bound_entry(j: &MultiIndex) -> Result<CatalogEntry> {
    let n = j.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::arg(format!("upper bounds are catalogued for dimension 2 and 3, got {n}")));
    }
    if j.components().contains(&0) {
        return Err(Error::arg(format!("{j} has zero components; reduce its dimension first")));
    }
    let mut c = j.components().to_vec();
    c.sort_unstable();
    let imax = c[n - 1];
    let law = if imax == 1 {
        ScalingLaw::new(0.0, n as u32)
    } else {
        let mult = c.iter().filter(|&&i| i == imax).count() as u32;
        ScalingLaw::new(-1.0 + 1.0 / imax as f64, mult - 1)
    };
    let case = if n == 2 {
        match (c[0] == 1, c[0] == c[1]) {
            (false, false) => 1,
            (true, false) => 2,
            (false, true) => 3,
            (true, true) => 4,
        }
    } else {
        let (i1, i2, i3) = (c[0], c[1], c[2]);
        match (i1 == 1, i2 == i1, i3 == i2) {
            (false, false, false) => 1,
            (false, true, false) => 2,
            (false, false, true) => 3,
            (false, true, true) => 4,
            (true, false, false) => 5,
            (true, true, false) => 6,
            (true, false, true) => 7,
            (true, true, true) => 8,
        }
    };
    Ok(CatalogEntry {
        law,
        row: format!("Table {}, case {case}", n + 1),
    })
}

/// Law for an index after dimension reduction: tables 3 and 4 for two or three
/// positive components, table 1 for one, convergent for none.
pub fn reduced_entry(j: &MultiIndex, eps: f64) -> Result<CatalogEntry> {
    match dimension_reduce(j, eps) {
        Err(Error::NoBifurcation(_)) => Ok(CatalogEntry {
            law: ScalingLaw::convergent(),
            row: "no bifurcation".into(),
        }),
        Err(e) => Err(e),
        Ok((r, _)) if r.dim() == 1 => law_1d_entry(r.components()[0] as f64, 0.0),
        Ok((r, _)) => upper_bound_entry(&r),
    }
}

/// Tightest bound over a choice of minimal multi-indices. Two distinct unit indices
/// make the variance bounded outright; the sign condition forces their coefficients
/// to be positive, so the convergence criterion applies.
pub fn best_upper_bound(cplus: &BTreeSet<MultiIndex>, eps: f64) -> Result<ScalingLaw> {
    best_upper_bound_entry(cplus, eps).map(|e| e.law)
}

pub fn best_upper_bound_entry(cplus: &BTreeSet<MultiIndex>, eps: f64) -> Result<CatalogEntry> {
    if cplus.is_empty() {
        return Err(Error::arg("empty set of multi-indices"));
    }
    if !(eps > 0.0) {
        return Err(Error::arg("eps must be positive"));
    }
    let units: BTreeSet<usize> = cplus.iter().filter_map(MultiIndex::unit_axis).collect();
    if cplus.iter().next().map_or(0, MultiIndex::dim) > 1 && units.len() >= 2 {
        return Ok(CatalogEntry {
            law: ScalingLaw::convergent(),
            row: "two unit indices".into(),
        });
    }
    let mut best: Option<CatalogEntry> = None;
    for j in cplus {
        let entry = reduced_entry(j, eps)?;
        best = match best {
            Some(b) if b.law.tighter_than(&entry.law) => Some(b),
            _ => Some(entry),
        };
    }
    Ok(best.expect("nonempty"))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Quadrature,
    Simulation,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Quadrature => "quadrature",
            Source::Simulation => "simulation",
        })
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quadrature" => Ok(Source::Quadrature),
            "simulation" => Ok(Source::Simulation),
            other => Err(Error::arg(format!("unknown source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Samples ordered by `p` increasing toward `0-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    points: Vec<SweepPoint>,
    source: Source,
}

impl SweepResult {
    /// Sorts the points by `p` and checks `p < 0`, distinct `p`, positive values.
    pub fn new(mut points: Vec<SweepPoint>, source: Source) -> Result<Self> {
        for pt in &points {
            if !(pt.p < 0.0) {
                return Err(Error::arg(format!("p = {} must be negative", pt.p)));
            }
            if !(pt.value > 0.0) || !pt.value.is_finite() {
                return Err(Error::arg(format!("value {} at p = {} must be positive", pt.value, pt.p)));
            }
            if !(pt.stderr >= 0.0) {
                return Err(Error::arg(format!("stderr {} at p = {} must be non-negative", pt.stderr, pt.p)));
            }
        }
        points.sort_by(|a, b| a.p.total_cmp(&b.p));
        if points.windows(2).any(|w| w[0].p == w[1].p) {
            return Err(Error::arg("repeated p in sweep"));
        }
        Ok(SweepResult { points, source })
    }

    pub fn points(&self) -> &[SweepPoint] {
        &self.points
    }

    pub fn source(&self) -> Source {
        self.source
    }

    /// Points with `lo <= -p <= hi`.
    pub fn window(&self, window: FitWindow) -> Vec<SweepPoint> {
        let slack = 1e-9;
        self.points
            .iter()
            .filter(|pt| {
                let q = -pt.p;
                q >= window.lo * (1.0 - slack) && q <= window.hi * (1.0 + slack)
            })
            .copied()
            .collect()
    }
}

/// `points` values of `p = -10^e` with `e` evenly spaced from `hi_exp` down to
/// `lo_exp`, in increasing order of `p`.
pub fn log_spaced_p(lo_exp: f64, hi_exp: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(lo_exp < hi_exp) {
        return Err(Error::arg("need at least two points and lo_exp < hi_exp"));
    }
    Ok((0..points)
        .map(|i| {
            let e = hi_exp - (hi_exp - lo_exp) * i as f64 / (points - 1) as f64;
            -(10f64.powf(e))
        })
        .collect())
}

/// Evaluates `eval(p) -> (value, stderr)` at every `p` in parallel.
pub fn sweep<F>(ps: &[f64], source: Source, eval: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let points = ps
        .par_iter()
        .map(|&p| eval(p).map(|(value, stderr)| SweepPoint { p, value, stderr }))
        .collect::<Result<Vec<_>>>()?;
    SweepResult::new(points, source)
}

// ---------------------------------------------------------------------------
// Fitting

/// Range `[lo, hi]` of `-p` used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::arg(format!("fit window needs 0 < lo < hi, got [{lo}, {hi}]")));
        }
        Ok(FitWindow { lo, hi })
    }

    /// The smallest `decades` decades of `-p` covered by the sweep.
    pub fn smallest_decades(sweep: &SweepResult, decades: f64) -> Result<Self> {
        let lo = sweep
            .points()
            .iter()
            .map(|pt| -pt.p)
            .fold(f64::INFINITY, f64::min);
        if !lo.is_finite() {
            return Err(Error::Fit("empty sweep".into()));
        }
        Self::new(lo, lo * 10f64.powf(decades))
    }
}

/// Continuous estimates of `log V = c + s log(-p) + k log(-log(-p))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub s: f64,
    pub k: f64,
    pub c: f64,
    /// RMS residual in natural-log units.
    pub residual: f64,
    /// Standard error of `s` from the residual variance; zero for exact data.
    pub s_stderr: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Three-parameter least-squares fit over the window.
pub fn fit_loglog(sweep: &SweepResult, window: FitWindow) -> Result<LogLogFit> {
    fit_impl(sweep, window, None)
}

/// Fit with the log power held at `k`; a pure slope when `k = 0`.
pub fn fit_loglog_fixed_k(sweep: &SweepResult, window: FitWindow, k: f64) -> Result<LogLogFit> {
    fit_impl(sweep, window, Some(k))
}

fn fit_impl(sweep: &SweepResult, window: FitWindow, fixed_k: Option<f64>) -> Result<LogLogFit> {
    let pts = sweep.window(window);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} points in window [{:e}, {:e}], need at least {MIN_FIT_POINTS}",
            pts.len(),
            window.lo,
            window.hi
        )));
    }
    if pts.iter().any(|pt| -pt.p >= 1.0) {
        return Err(Error::Fit("fit needs -p < 1 so that -log(-p) > 0".into()));
    }
    let n = pts.len();
    let cols = if fixed_k.is_some() { 2 } else { 3 };
    let mut x = DMatrix::<f64>::zeros(n, cols);
    let mut y = DVector::<f64>::zeros(n);
    for (r, pt) in pts.iter().enumerate() {
        let lq = (-pt.p).ln();
        let llq = (-lq).ln();
        x[(r, 0)] = 1.0;
        x[(r, 1)] = lq;
        y[r] = pt.value.ln();
        match fixed_k {
            Some(k) => y[r] -= k * llq,
            None => x[(r, 2)] = llq,
        }
    }
    // scale columns so the rank test is insensitive to units
    let norms: Vec<f64> = (0..cols).map(|c| x.column(c).norm()).collect();
    if norms.contains(&0.0) {
        return Err(Error::Fit("singular design matrix".into()));
    }
    let mut xs = x.clone();
    for (c, nrm) in norms.iter().enumerate() {
        xs.column_mut(c).scale_mut(1.0 / nrm);
    }
    let svd = xs.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Fit("singular design matrix".into()));
    }
    let beta_scaled = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    let beta: Vec<f64> = beta_scaled.iter().zip(&norms).map(|(b, nrm)| b / nrm).collect();
    let resid = &y - &x * DVector::from_vec(beta.clone());
    let rss = resid.norm_squared();
    let residual = (rss / n as f64).sqrt();
    let dof = n.saturating_sub(cols).max(1) as f64;
    let sigma2 = rss / dof;
    // (X^T X)^{-1} = V S^{-2} V^T in scaled coordinates
    let vt = svd.v_t.as_ref().expect("requested");
    let var_s_scaled: f64 = (0..cols)
        .map(|i| {
            let v = vt[(i, 1)];
            v * v / (svd.singular_values[i] * svd.singular_values[i])
        })
        .sum();
    let s_stderr = (sigma2 * var_s_scaled).sqrt() / norms[1];
    Ok(LogLogFit {
        c: beta[0],
        s: beta[1],
        k: fixed_k.unwrap_or(beta.get(2).copied().unwrap_or(0.0)),
        residual,
        s_stderr,
        points: n,
    })
}

/// Outcome of snapping a fit to the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    Law(ScalingLaw),
    Unclassified { s: f64, k: f64 },
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Law(l) => write!(f, "{l}"),
            Classification::Unclassified { s, k } => {
                write!(f, "unclassified (s={} k={})", fmt_num(*s), fmt_num(*k))
            }
        }
    }
}

pub const CLASSIFY_TOLERANCE: f64 = 0.05;

/// `{0} ∪ {-1 + 1/n : n = 1..=64} ∪ {-1} ∪ extra`.
pub fn default_candidates(extra: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0, -1.0];
    c.extend((1..=64).map(|n| -1.0 + 1.0 / n as f64));
    c.extend_from_slice(extra);
    c
}

/// Snaps `k` to the nearest integer in `[0, 3]` and `s` to the nearest candidate
/// within [`CLASSIFY_TOLERANCE`].
pub fn classify(s_hat: f64, k_hat: f64, candidates: &[f64]) -> Classification {
    let k = k_hat.round().clamp(0.0, 3.0) as u32;
    let nearest = candidates
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .min_by(|a, b| (a - s_hat).abs().total_cmp(&(b - s_hat).abs()));
    match nearest {
        Some(c) if (c - s_hat).abs() <= CLASSIFY_TOLERANCE && s_hat.is_finite() && k_hat.is_finite() => {
            Classification::Law(ScalingLaw::new(c, k))
        }
        _ => Classification::Unclassified { s: s_hat, k: k_hat },
    }
}

/// `|V(smallest -p) / V(largest -p) - 1|` over the window, the bounded-variance test.
pub fn relative_change(sweep: &SweepResult, window: FitWindow) -> Result<f64> {
    let pts = sweep.window(window);
    let (first, last) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if pts.len() >= 2 => (a, b),
        _ => return Err(Error::Fit("need at least two points in window".into())),
    };
    // points are sorted by p increasing, so `last` has the smallest -p
    Ok((last.value / first.value - 1.0).abs())
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    p: f64,
    value: f64,
    stderr: f64,
    source: String,
}

pub const SWEEP_HEADER: &str = "p,value,stderr,source";

pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for pt in sweep.points() {
        w.serialize(CsvRow {
            p: pt.p,
            value: pt.value,
            stderr: pt.stderr,
            source: sweep.source().to_string(),
        })
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a `p,value,stderr,source` table. Row numbers in errors count the header as 1.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<SweepResult> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let want: Vec<&str> = SWEEP_HEADER.split(',').collect();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != want {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header {SWEEP_HEADER:?}"),
        });
    }
    let mut points = Vec::new();
    let mut source = None;
    for (i, rec) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let src: Source = rec.source.parse().map_err(|e: Error| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        match source {
            None => source = Some(src),
            Some(s) if s != src => {
                return Err(Error::Parse {
                    row,
                    message: "mixed sources in one sweep".into(),
                })
            }
            _ => {}
        }
        if !(rec.p < 0.0) {
            return Err(Error::arg(format!("row {row}: p = {} must be negative", rec.p)));
        }
        points.push(SweepPoint {
            p: rec.p,
            value: rec.value,
            stderr: rec.stderr,
        });
    }
    let source = source.ok_or(Error::Parse {
        row: 2,
        message: "no data rows".into(),
    })?;
    SweepResult::new(points, source)
}

pub const FIT_HEADER: &str = "s_hat,k_hat,c_hat,residual,classified_s,classified_k";

/// One data line matching [`FIT_HEADER`].
pub fn fit_summary_line(fit: &LogLogFit, class: &Classification) -> String {
    let (cs, ck) = match class {
        Classification::Law(l) if l.convergent => ("0".to_string(), "0".to_string()),
        Classification::Law(l) => (fmt_num(l.s), l.k.to_string()),
        Classification::Unclassified { .. } => ("unclassified".into(), "unclassified".into()),
    };
    format!("{},{},{},{},{cs},{ck}", fit.s, fit.k, fit.c, fit.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(c: &[u32]) -> MultiIndex {
        MultiIndex::new(c.to_vec())
    }

    fn law(s: f64, k: u32) -> ScalingLaw {
        ScalingLaw::new(s, k)
    }

    fn close(a: &ScalingLaw, b: &ScalingLaw) -> bool {
        a.convergent == b.convergent && a.k == b.k && (a.s - b.s).abs() < 1e-12
    }

    #[test]
    fn one_dimensional_laws() {
        assert!(close(&law_1d(2.0, 0.0).unwrap(), &law(-0.5, 0)));
        assert!(close(&law_1d(1.0, 0.0).unwrap(), &law(0.0, 1)));
        assert!(close(&law_1d(1.0, 0.25).unwrap(), &law(-0.5, 0)));
        assert!(law_1d(0.5, 0.0).unwrap().convergent);
        assert!(close(&law_1d(0.5, 0.25).unwrap(), &law(0.0, 1)));
        assert!(matches!(law_1d(1.0, 0.5), Err(Error::Argument(_))));
        assert_eq!(law_1d_entry(2.0, 0.0).unwrap().to_string(), "s=-0.5 k=0 (Table 1, α>1)");
    }

    #[test]
    fn analytic_laws() {
        let m = |pairs: &[(u32, f64)]| pairs.iter().copied().collect::<BTreeMap<_, _>>();
        assert!(close(&law_analytic_1d(&m(&[(2, 1.0), (5, 3.0)])).unwrap(), &law(-0.5, 0)));
        assert!(close(&law_analytic_1d(&m(&[(1, 1.0)])).unwrap(), &law(0.0, 1)));
        assert!(close(&law_analytic_1d(&m(&[(3, 0.5), (4, -0.1)])).unwrap(), &law(-2.0 / 3.0, 0)));
        assert!(law_analytic_1d(&BTreeMap::new()).is_err());
    }

    #[test]
    fn upper_bound_examples() {
        assert!(close(&law_upper_bound(&mi(&[2, 10])).unwrap(), &law(-0.9, 0)));
        assert!(close(&law_upper_bound(&mi(&[3, 3])).unwrap(), &law(-2.0 / 3.0, 1)));
        assert!(close(&law_upper_bound(&mi(&[1, 1])).unwrap(), &law(0.0, 2)));
        assert!(close(&law_upper_bound(&mi(&[1, 1, 1])).unwrap(), &law(0.0, 3)));
        assert!(close(&law_upper_bound(&mi(&[2, 2, 2])).unwrap(), &law(-0.5, 2)));
        assert!(close(&law_upper_bound(&mi(&[1, 2, 3])).unwrap(), &law(-2.0 / 3.0, 0)));
        assert!(law_upper_bound(&mi(&[0, 2])).is_err());
        assert_eq!(upper_bound_entry(&mi(&[1, 1])).unwrap().to_string(), "s=0 k=2 (Table 3, case 4)");
        assert_eq!(upper_bound_entry(&mi(&[3, 1, 3])).unwrap().row, "Table 4, case 7");
    }

    #[test]
    fn best_bound_examples() {
        let set = |v: &[&[u32]]| v.iter().map(|c| mi(c)).collect::<BTreeSet<_>>();
        assert!(best_upper_bound(&set(&[&[1, 0], &[0, 1]]), 1.0).unwrap().convergent);
        assert!(close(
            &best_upper_bound(&set(&[&[2, 10], &[3, 3]]), 1.0).unwrap(),
            &law(-2.0 / 3.0, 1)
        ));
        assert!(close(&best_upper_bound(&set(&[&[2, 3]]), 1.0).unwrap(), &law(-2.0 / 3.0, 0)));
        // a reduced index falls back to the one-dimensional table
        assert!(close(&best_upper_bound(&set(&[&[0, 2]]), 1.0).unwrap(), &law(-0.5, 0)));
    }

    fn exact_sweep(s: f64, k: u32, c: f64) -> SweepResult {
        let ps = log_spaced_p(-8.0, -2.0, 20).unwrap();
        let l = law(s, k);
        let pts = ps
            .iter()
            .map(|&p| SweepPoint {
                p,
                value: c * l.shape(-p),
                stderr: 0.0,
            })
            .collect();
        SweepResult::new(pts, Source::Quadrature).unwrap()
    }

    #[test]
    fn fit_recovers_exact_models() {
        let w = FitWindow::new(1e-8, 1e-2).unwrap();
        let f = fit_loglog(&exact_sweep(-0.5, 0, 1.0), w).unwrap();
        assert!((f.s + 0.5).abs() < 1e-6 && f.k.abs() < 1e-6, "{f:?}");
        let f = fit_loglog(&exact_sweep(0.0, 1, 1.0), w).unwrap();
        assert!(f.s.abs() < 1e-6 && (f.k - 1.0).abs() < 1e-6, "{f:?}");
        let f = fit_loglog_fixed_k(&exact_sweep(-0.75, 0, 3.0), w, 0.0).unwrap();
        assert!((f.s + 0.75).abs() < 1e-10 && (f.c - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let sweep = exact_sweep(-0.5, 0, 1.0);
        let narrow = FitWindow::new(1e-8, 1e-7).unwrap();
        assert!(matches!(fit_loglog(&sweep, narrow), Err(Error::Fit(_))));
        let pts = (0..10)
            .map(|i| SweepPoint {
                p: -1e-3 * (1.0 + 1e-15 * i as f64),
                value: 1.0,
                stderr: 0.0,
            })
            .collect();
        let degenerate = SweepResult::new(pts, Source::Quadrature).unwrap();
        let w = FitWindow::new(1e-4, 1e-2).unwrap();
        assert!(matches!(fit_loglog(&degenerate, w), Err(Error::Fit(_))));
    }

    #[test]
    fn classification() {
        let cands = [0.0, -0.5, -2.0 / 3.0];
        assert_eq!(classify(-0.492, 0.03, &cands), Classification::Law(law(-0.5, 0)));
        assert_eq!(classify(-0.01, 0.97, &default_candidates(&[])), Classification::Law(law(0.0, 1)));
        assert!(matches!(classify(-0.25, 0.4, &[0.0, -0.5]), Classification::Unclassified { .. }));
        assert_eq!(classify(0.003, 0.1, &cands), Classification::Law(ScalingLaw::convergent()));
    }

    #[test]
    fn csv_round_trip() {
        let sweep = exact_sweep(-0.5, 0, 2.0);
        let mut buf = Vec::new();
        write_sweep_csv(&sweep, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(SWEEP_HEADER));
        let back = read_sweep_csv(buf.as_slice()).unwrap();
        assert_eq!(back, sweep);
    }

    #[test]
    fn csv_errors_name_rows() {
        let bad = "p,value,stderr,source\n-0.1,1.0,0,quadrature\n-0.2,abc,0,quadrature\n";
        match read_sweep_csv(bad.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let positive = "p,value,stderr,source\n0.1,1.0,0,quadrature\n";
        assert!(matches!(read_sweep_csv(positive.as_bytes()), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn upper_bound_permutation_invariant(a in 1u32..=4, b in 1u32..=4, c in 1u32..=4) {
            let base = law_upper_bound(&mi(&[a, b, c])).unwrap();
            for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                prop_assert!(close(&base, &law_upper_bound(&mi(&perm)).unwrap()));
            }
            let two = law_upper_bound(&mi(&[a, b])).unwrap();
            prop_assert!(close(&two, &law_upper_bound(&mi(&[b, a])).unwrap()));
        }

        #[test]
        fn divergent_exponents_in_open_interval(alpha in 0.01f64..200.0, gamma in 0.0f64..0.4999) {
            prop_assume!(2.0 * gamma + alpha > 1.0 + 1e-9);
            let l = law_1d(alpha, gamma).unwrap();
            prop_assert!(l.s > -1.0 && l.s < 0.0);
        }

        #[test]
        fn fit_exact_recovery(s in -0.99f64..-0.01, k in 0u32..=3, c in -5.0f64..5.0) {
            let f = fit_loglog(&exact_sweep(s, k, c.exp()), FitWindow::new(1e-8, 1e-2).unwrap()).unwrap();
            prop_assert!((f.s - s).abs() < 1e-6);
            prop_assert!((f.k - k as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn exponent_tends_to_minus_one() {
        let l = law_1d(1e6, 0.0).unwrap();
        assert!((l.s + 1.0).abs() < 1e-5);
    }
}
