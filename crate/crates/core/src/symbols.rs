//! Drift functions `f` of the multiplication operator and the multi-index algebra
//! used to predict upper bounds.
//!
//! A [`SymbolSpec`] is immutable once built. Construction validates the sign
//! condition (`f <= 0` on the declared domain, `f = 0` at the root) by sampling a
//! `101^dim` lattice, so an accepted symbol can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points per axis of the sign-validation lattice.
const SIGN_LATTICE: usize = 101;

/// Exponent vector of a monomial `x^j = prod x_n^{j_n}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: impl Into<Vec<u32>>) -> Self {
        MultiIndex(components.into())
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Total degree.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Slot of the single `1` if this is a unit index `(0,..,1,..,0)`.
    pub fn unit_axis(&self) -> Option<usize> {
        let mut axis = None;
        for (i, &c) in self.0.iter().enumerate() {
            match c {
                0 => {}
                1 if axis.is_none() => axis = Some(i),
                _ => return None,
            }
        }
        axis
    }

    /// Componentwise `self <= other`.
    pub fn componentwise_le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `x^j` for a point already shifted to the root.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    /// Parses `"2,0,3"` or `"(2,0,3)"`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let comps = trimmed
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::arg(format!("bad multi-index component {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if comps.is_empty() {
            return Err(Error::arg("empty multi-index"));
        }
        Ok(MultiIndex(comps))
    }
}

/// Coefficients `a_j` of `f(x) = -sum_j a_j (x - root)^j`.
pub type Coefficients = BTreeMap<MultiIndex, f64>;

/// Multi-indices of the stored terms that no other stored term dominates from below.
///
/// `j` is kept iff there is no stored `d != j` with `d <= j` componentwise.
pub fn minimal_support(coeffs: &Coefficients) -> BTreeSet<MultiIndex> {
    let keys: Vec<&MultiIndex> = coeffs
        .iter()
        .filter(|(_, a)| **a != 0.0)
        .map(|(j, _)| j)
        .collect();
    keys.iter()
        .filter(|j| !keys.iter().any(|d| d != *j && d.componentwise_le(j)))
        .map(|j| (*j).clone())
        .collect()
}

/// Whether two distinct unit multi-indices carry positive coefficients, which forces
/// `<V g, g>` to stay bounded as `p -> 0-` for box test functions.
pub fn predicts_convergence(coeffs: &Coefficients) -> Result<bool> {
    let dim = coeffs
        .keys()
        .next()
        .map(MultiIndex::dim)
        .ok_or_else(|| Error::arg("empty coefficient map"))?;
    if dim < 2 {
        return Err(Error::arg("convergence criterion needs dimension > 1"));
    }
    let axes: BTreeSet<usize> = coeffs
        .iter()
        .filter(|(_, &a)| a > 0.0)
        .filter_map(|(j, _)| j.unit_axis())
        .collect();
    Ok(axes.len() >= 2)
}

/// Axis-aligned box `[lo, hi]` on which a symbol is declared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::arg("domain bounds must have equal, nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::arg("domain needs finite lo < hi on every axis"));
        }
        Ok(Domain { lo, hi })
    }

    fn cube(center: &[f64], below: f64, above: f64) -> Self {
        Domain {
            lo: center.iter().map(|c| c - below).collect(),
            hi: center.iter().map(|c| c + above).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a - 1e-12 && *v <= *b + 1e-12)
    }

    /// Visits every point of the `n^dim` tensor lattice.
    fn for_each_lattice_point(&self, n: usize, mut visit: impl FnMut(&[f64])) {
        let dim = self.dim();
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        loop {
            for a in 0..dim {
                let t = idx[a] as f64 / (n - 1) as f64;
                x[a] = self.lo[a] + t * (self.hi[a] - self.lo[a]);
            }
            visit(&x);
            let mut a = 0;
            loop {
                if a == dim {
                    return;
                }
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }
}

/// Operators reduced to multiplication by a function of the frequency variable.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySymbol {
    /// `f(k) = -k^{2m}`, from `(-1)^{m-1} d^{2m}/dx^{2m}`.
    Power2m { m: u32 },
    /// `f(k) = -(1 - k^2)^2`.
    SwiftHohenberg1D,
    /// `f(k) = -(1 - |k|^2)^2` on the plane.
    SwiftHohenberg2D,
    /// Real part of the Fourier transform of a sampled convolution kernel.
    ConvolutionKernel(ConvolutionKernel),
}

/// Sampled kernel whose Fourier transform is the multiplier.
///
/// Samples sit at `x_n = (n - (len-1)/2) * spacing`. The multiplier is the unitary
/// transform `(1/sqrt(2 pi)) int f(x) e^{-ikx} dx`, approximated by the trapezoid sum.
/// Other transform conventions rescale it by a positive constant, which changes
/// only the prefactor of a scaling law.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionKernel {
    samples: Vec<f64>,
    spacing: f64,
    zeros: Vec<f64>,
}

impl ConvolutionKernel {
    pub fn new(samples: Vec<f64>, spacing: f64) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("kernel needs at least one finite sample"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::arg("kernel spacing must be positive"));
        }
        let mut kernel = ConvolutionKernel {
            samples,
            spacing,
            zeros: Vec::new(),
        };
        kernel.zeros = kernel.locate_zeros();
        Ok(kernel)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Zeros of the multiplier within one period `[-pi/h, pi/h]`.
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    fn position(&self, n: usize) -> f64 {
        (n as f64 - (self.samples.len() as f64 - 1.0) / 2.0) * self.spacing
    }

    fn norm(&self) -> f64 {
        self.spacing / (2.0 * PI).sqrt()
    }

    /// Real part of the multiplier at frequency `k`.
    pub fn multiplier(&self, k: f64) -> f64 {
        let sum: f64 = self
            .samples
            .iter()
            .enumerate()
            .map(|(n, &f)| f * (k * self.position(n)).cos())
            .sum();
        self.norm() * sum
    }

    fn multiplier_slope(&self, k: f64) -> f64 {
        let sum: f64 = self
            .samples
            .iter()
            .enumerate()
            .map(|(n, &f)| {
                let x = self.position(n);
                -f * x * (k * x).sin()
            })
            .sum();
        self.norm() * sum
    }

    /// Multiplier on the zero-padded FFT grid, as `(k, Re f(k))` pairs sorted by `k`.
    pub fn fft_grid(&self) -> Vec<(f64, f64)> {
        let len = self.samples.len();
        let padded = (8 * len).next_power_of_two().max(256);
        let mut buf: Vec<Complex64> = (0..padded)
            .map(|n| Complex64::new(if n < len { self.samples[n] } else { 0.0 }, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
        let shift = (len as f64 - 1.0) / 2.0 * self.spacing;
        let mut grid: Vec<(f64, f64)> = (0..padded)
            .map(|m| {
                let signed = if m < padded / 2 {
                    m as f64
                } else {
                    m as f64 - padded as f64
                };
                let k = 2.0 * PI * signed / (padded as f64 * self.spacing);
                // undo the shift of the sample origin to the kernel centre
                let phase = Complex64::from_polar(1.0, k * shift);
                (k, self.norm() * (buf[m] * phase).re)
            })
            .collect();
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        grid
    }

    /// Local maxima of the non-positive multiplier that touch zero, refined by
    /// bisection on the sign change of the analytic derivative.
    fn locate_zeros(&self) -> Vec<f64> {
        let grid = self.fft_grid();
        let scale = grid.iter().map(|g| g.1.abs()).fold(0.0, f64::max).max(1e-300);
        let mut zeros: Vec<f64> = Vec::new();
        for w in grid.windows(3) {
            let (left, mid, right) = (w[0], w[1], w[2]);
            if !(mid.1 >= left.1 && mid.1 >= right.1) || mid.1 < -1e-6 * scale {
                continue;
            }
            let (mut a, mut b) = (left.0, right.0);
            if self.multiplier_slope(a) < 0.0 || self.multiplier_slope(b) > 0.0 {
                continue;
            }
            for _ in 0..200 {
                let c = 0.5 * (a + b);
                if self.multiplier_slope(c) > 0.0 {
                    a = c;
                } else {
                    b = c;
                }
                if b - a < 1e-15 * (1.0 + c.abs()) {
                    break;
                }
            }
            let k = 0.5 * (a + b);
            if self.multiplier(k).abs() <= 1e-9 * scale
                && !zeros.iter().any(|z| (z - k).abs() < 1e-9)
            {
                zeros.push(k);
            }
        }
        zeros
    }
}

/// Family of the drift function.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolKind {
    /// `f(x) = -|x - root|^alpha` in one dimension.
    ToolAlpha { alpha: f64 },
    /// `f(x) = -sum_j a_j (x - root)^j`.
    Polynomial(Coefficients),
    /// `left` for `x < root`, `right` for `x >= root`.
    Piecewise {
        left: Box<SymbolSpec>,
        right: Box<SymbolSpec>,
    },
    /// `f(x) = -|x - root|^exponent` on the plane.
    Radial2D { exponent: f64 },
    /// `f = 0`; violates the strict sign condition but is a useful limit case.
    Zero,
    Frequency(FrequencySymbol),
}

/// A drift function with its domain metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymbolConfig", into = "SymbolConfig")]
pub struct SymbolSpec {
    kind: SymbolKind,
    dim: usize,
    root: Vec<f64>,
    domain: Domain,
    max_abs: f64,
    sign_admissible: bool,
    /// Flattened polynomial terms for fast evaluation.
    terms: Vec<([i32; 3], f64)>,
}

impl SymbolSpec {
    pub fn tool_alpha(alpha: f64) -> Result<Self> {
        Self::build(SymbolKind::ToolAlpha { alpha }, 1, None, None)
    }

    pub fn polynomial(coeffs: Coefficients) -> Result<Self> {
        let dim = coeffs
            .keys()
            .next()
            .map(MultiIndex::dim)
            .ok_or_else(|| Error::arg("polynomial needs at least one term"))?;
        Self::build(SymbolKind::Polynomial(coeffs), dim, None, None)
    }

    /// One-dimensional polynomial from `{degree: a_n}`.
    pub fn polynomial_1d(coeffs: &BTreeMap<u32, f64>) -> Result<Self> {
        let map = coeffs
            .iter()
            .map(|(&n, &a)| (MultiIndex::new(vec![n]), a))
            .collect();
        Self::polynomial(map)
    }

    pub fn piecewise(left: SymbolSpec, right: SymbolSpec) -> Result<Self> {
        Self::build(
            SymbolKind::Piecewise {
                left: Box::new(left),
                right: Box::new(right),
            },
            1,
            None,
            None,
        )
    }

    pub fn radial_2d(exponent: f64) -> Result<Self> {
        Self::build(SymbolKind::Radial2D { exponent }, 2, None, None)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::build(SymbolKind::Zero, dim, None, None)
    }

    pub fn frequency(symbol: FrequencySymbol) -> Result<Self> {
        let dim = match symbol {
            FrequencySymbol::SwiftHohenberg2D => 2,
            _ => 1,
        };
        Self::build(SymbolKind::Frequency(symbol), dim, None, None)
    }

    /// General constructor. `root` defaults to the origin; `domain` defaults to a
    /// family-specific box around the root.
    pub fn build(
        kind: SymbolKind,
        dim: usize,
        root: Option<Vec<f64>>,
        domain: Option<Domain>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::arg(format!("dimension {dim} not in 1..=3")));
        }
        let root = root.unwrap_or_else(|| vec![0.0; dim]);
        if root.len() != dim || root.iter().any(|r| !r.is_finite()) {
            return Err(Error::arg("root must be a finite point of the symbol's dimension"));
        }
        Self::check_kind(&kind, dim, &root)?;
        let domain = match domain {
            Some(d) => d,
            None => Self::default_domain(&kind, &root),
        };
        if domain.dim() != dim {
            return Err(Error::arg("domain dimension does not match symbol dimension"));
        }
        let mut spec = SymbolSpec {
            kind,
            dim,
            root,
            domain,
            max_abs: 0.0,
            sign_admissible: true,
            terms: Vec::new(),
        };
        if let SymbolKind::Polynomial(coeffs) = &spec.kind {
            spec.terms = coeffs
                .iter()
                .map(|(j, a)| {
                    let mut e = [0i32; 3];
                    for (slot, c) in e.iter_mut().zip(j.components()) {
                        *slot = *c as i32;
                    }
                    (e, *a)
                })
                .collect();
        }
        spec.validate_sign()?;
        Ok(spec)
    }

    fn check_kind(kind: &SymbolKind, dim: usize, root: &[f64]) -> Result<()> {
        let need = |want: usize, what: &str| {
            if dim == want {
                Ok(())
            } else {
                Err(Error::arg(format!("{what} symbols are {want}-dimensional")))
            }
        };
        match kind {
            SymbolKind::ToolAlpha { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::arg("alpha must be positive"));
                }
                need(1, "tool")
            }
            SymbolKind::Polynomial(coeffs) => {
                if coeffs.is_empty() {
                    return Err(Error::arg("polynomial needs at least one term"));
                }
                for (j, a) in coeffs {
                    if j.dim() != dim {
                        return Err(Error::arg(format!("multi-index {j} does not have dimension {dim}")));
                    }
                    if j.is_zero() {
                        return Err(Error::arg("constant term is forbidden since f(root) = 0"));
                    }
                    if *a == 0.0 || !a.is_finite() {
                        return Err(Error::arg(format!("coefficient of {j} must be finite and nonzero")));
                    }
                }
                Ok(())
            }
            SymbolKind::Piecewise { left, right } => {
                need(1, "piecewise")?;
                if left.dim != 1 || right.dim != 1 {
                    return Err(Error::arg("piecewise halves must be one-dimensional"));
                }
                if left.root[0] != root[0] || right.root[0] != root[0] {
                    return Err(Error::arg("piecewise halves must share the root"));
                }
                Ok(())
            }
            SymbolKind::Radial2D { exponent } => {
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::arg("radial exponent must be positive"));
                }
                need(2, "radial")
            }
            SymbolKind::Zero => Ok(()),
            SymbolKind::Frequency(FrequencySymbol::Power2m { m }) => {
                if *m == 0 {
                    return Err(Error::arg("m must be a positive integer"));
                }
                need(1, "power2m")
            }
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg1D) => need(1, "swift-hohenberg 1d"),
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D) => need(2, "swift-hohenberg 2d"),
            SymbolKind::Frequency(FrequencySymbol::ConvolutionKernel(_)) => need(1, "convolution"),
        }
    }

    fn default_domain(kind: &SymbolKind, root: &[f64]) -> Domain {
        match kind {
            // odd powers change sign across the root
            SymbolKind::Polynomial(_) => Domain::cube(root, 0.0, 1.0),
            SymbolKind::Piecewise { left, right } => Domain {
                lo: vec![left.domain.lo[0].min(root[0] - 1e-9)],
                hi: vec![right.domain.hi[0].max(root[0] + 1e-9)],
            },
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg1D)
            | SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D) => Domain::cube(root, 2.0, 2.0),
            SymbolKind::Frequency(FrequencySymbol::ConvolutionKernel(k)) => {
                let nyquist = PI / k.spacing;
                Domain::cube(root, nyquist, nyquist)
            }
            _ => Domain::cube(root, 1.0, 1.0),
        }
    }

    fn validate_sign(&mut self) -> Result<()> {
        let mut max_val = f64::NEG_INFINITY;
        let mut max_abs: f64 = 0.0;
        let mut worst = Vec::new();
        self.domain.for_each_lattice_point(SIGN_LATTICE, |x| {
            let v = self.value(x);
            max_abs = max_abs.max(v.abs());
            if v > max_val {
                max_val = v;
                worst = x.to_vec();
            }
        });
        self.max_abs = max_abs;
        let tol = 1e-12 * (1.0 + max_abs);
        if matches!(self.kind, SymbolKind::Zero) {
            self.sign_admissible = false;
            return Ok(());
        }
        if max_val > tol {
            return Err(Error::Sign(format!(
                "f = {max_val:e} > 0 at {worst:?} on the declared domain"
            )));
        }
        let zero_points = self.zero_points();
        if zero_points.is_empty() {
            return Err(Error::Sign("symbol has no zero".into()));
        }
        for z in &zero_points {
            let v = self.value(z);
            if v.abs() > tol {
                return Err(Error::Sign(format!("f({z:?}) = {v:e}, expected 0")));
            }
        }
        Ok(())
    }

    /// Representative points of the zero set.
    fn zero_points(&self) -> Vec<Vec<f64>> {
        match &self.kind {
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg1D) => vec![vec![1.0], vec![-1.0]],
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D) => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            SymbolKind::Frequency(FrequencySymbol::ConvolutionKernel(k)) => {
                k.zeros().iter().map(|&z| vec![z]).collect()
            }
            _ => vec![self.root.clone()],
        }
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &[f64] {
        &self.root
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Largest `|f|` seen on the validation lattice.
    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// False for the zero symbol, which has no strict sign.
    pub fn satisfies_sign_condition(&self) -> bool {
        self.sign_admissible
    }

    /// Evaluates `f(x)`, checking the dimension.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::arg(format!(
                "point has dimension {}, symbol has dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation for inner loops.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SymbolKind::ToolAlpha { alpha } => -(x[0] - self.root[0]).abs().powf(*alpha),
            SymbolKind::Polynomial(_) => {
                let mut shifted = [0.0; 3];
                for (s, (xi, ri)) in shifted.iter_mut().zip(x.iter().zip(&self.root)) {
                    *s = xi - ri;
                }
                -self
                    .terms
                    .iter()
                    .map(|(e, a)| a * shifted[0].powi(e[0]) * shifted[1].powi(e[1]) * shifted[2].powi(e[2]))
                    .sum::<f64>()
            }
            SymbolKind::Piecewise { left, right } => {
                if x[0] < self.root[0] {
                    left.value(x)
                } else {
                    right.value(x)
                }
            }
            SymbolKind::Radial2D { exponent } => {
                let r = (x[0] - self.root[0]).hypot(x[1] - self.root[1]);
                -r.powf(*exponent)
            }
            SymbolKind::Zero => 0.0,
            SymbolKind::Frequency(fs) => match fs {
                FrequencySymbol::Power2m { m } => -(x[0] - self.root[0]).powi(2 * *m as i32),
                FrequencySymbol::SwiftHohenberg1D => {
                    let k = x[0] - self.root[0];
                    -(1.0 - k * k).powi(2)
                }
                FrequencySymbol::SwiftHohenberg2D => {
                    let k0 = x[0] - self.root[0];
                    let k1 = x[1] - self.root[1];
                    -(1.0 - k0 * k0 - k1 * k1).powi(2)
                }
                FrequencySymbol::ConvolutionKernel(k) => k.multiplier(x[0] - self.root[0]),
            },
        }
    }

    /// Coordinates along `axis` where the integrand `1/(-f-p)` may peak, given the
    /// already-fixed outer coordinates `outer = x[..axis]`.
    pub(crate) fn axis_singularities(&self, axis: usize, outer: &[f64]) -> Vec<f64> {
        match &self.kind {
            SymbolKind::Zero => Vec::new(),
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg1D) => {
                vec![self.root[0] - 1.0, self.root[0] + 1.0]
            }
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D) => {
                let c = self.root[axis];
                if axis == 0 {
                    vec![c - 1.0, c + 1.0]
                } else {
                    let k0 = outer[0] - self.root[0];
                    let rest = 1.0 - k0 * k0;
                    if rest > 0.0 {
                        let h = rest.sqrt();
                        vec![c - h, c + h]
                    } else {
                        vec![c]
                    }
                }
            }
            SymbolKind::Frequency(FrequencySymbol::ConvolutionKernel(k)) => {
                k.zeros().iter().map(|z| z + self.root[0]).collect()
            }
            _ => vec![self.root[axis]],
        }
    }
}

type ImagPart = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Complex-valued symbol `Re f + i Im f`. Only the real part enters the variance.
#[derive(Clone)]
pub struct ComplexSymbol {
    real: SymbolSpec,
    imag: ImagPart,
}

impl fmt::Debug for ComplexSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexSymbol")
            .field("real", &self.real)
            .finish_non_exhaustive()
    }
}

impl ComplexSymbol {
    pub fn new(real: SymbolSpec, imag: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ComplexSymbol {
            real,
            imag: Arc::new(imag),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(self.real.eval(x)?, (self.imag)(x)))
    }
}

/// The real-part symbol; every law for real symbols applies to it unchanged.
/// Check [`SymbolSpec::satisfies_sign_condition`] on the result: a purely
/// imaginary symbol yields the zero symbol, which is flagged.
pub fn real_part_symbol(s: &ComplexSymbol) -> SymbolSpec {
    s.real.clone()
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolConfig {
    ToolAlpha {
        alpha: f64,
        #[serde(default = "one")]
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        root: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    Polynomial {
        dim: usize,
        terms: Vec<TermConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        root: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    Piecewise {
        left: Box<SymbolConfig>,
        right: Box<SymbolConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        root: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    #[serde(rename = "radial_2d")]
    Radial2D {
        exponent: f64,
        #[serde(default = "two")]
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        root: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    Zero {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        root: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    Power2m {
        m: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    #[serde(rename = "swift_hohenberg_1d")]
    SwiftHohenberg1D {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    #[serde(rename = "swift_hohenberg_2d")]
    SwiftHohenberg2D {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    ConvolutionKernel {
        samples: Vec<f64>,
        spacing: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub index: MultiIndex,
    pub coeff: f64,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

impl TryFrom<SymbolConfig> for SymbolSpec {
    type Error = Error;

    fn try_from(cfg: SymbolConfig) -> Result<Self> {
        match cfg {
            SymbolConfig::ToolAlpha { alpha, dim, root, domain } => {
                SymbolSpec::build(SymbolKind::ToolAlpha { alpha }, dim, root, domain)
            }
            SymbolConfig::Polynomial { dim, terms, root, domain } => {
                let mut coeffs = Coefficients::new();
                for t in terms {
                    if coeffs.insert(t.index.clone(), t.coeff).is_some() {
                        return Err(Error::arg(format!("duplicate term {}", t.index)));
                    }
                }
                SymbolSpec::build(SymbolKind::Polynomial(coeffs), dim, root, domain)
            }
            SymbolConfig::Piecewise { left, right, root, domain } => {
                let mut left = SymbolSpec::try_from(*left)?;
                let mut right = SymbolSpec::try_from(*right)?;
                let root = root.unwrap_or_else(|| vec![0.0]);
                // halves inherit the piecewise root unless they set their own
                if left.root != root {
                    left = SymbolSpec::build(left.kind, 1, Some(root.clone()), None)?;
                }
                if right.root != root {
                    right = SymbolSpec::build(right.kind, 1, Some(root.clone()), None)?;
                }
                SymbolSpec::build(
                    SymbolKind::Piecewise {
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    1,
                    Some(root),
                    domain,
                )
            }
            SymbolConfig::Radial2D { exponent, dim, root, domain } => {
                SymbolSpec::build(SymbolKind::Radial2D { exponent }, dim, root, domain)
            }
            SymbolConfig::Zero { dim, root, domain } => SymbolSpec::build(SymbolKind::Zero, dim, root, domain),
            SymbolConfig::Power2m { m, domain } => SymbolSpec::build(
                SymbolKind::Frequency(FrequencySymbol::Power2m { m }),
                1,
                None,
                domain,
            ),
            SymbolConfig::SwiftHohenberg1D { domain } => SymbolSpec::build(
                SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg1D),
                1,
                None,
                domain,
            ),
            SymbolConfig::SwiftHohenberg2D { domain } => SymbolSpec::build(
                SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D),
                2,
                None,
                domain,
            ),
            SymbolConfig::ConvolutionKernel { samples, spacing, domain } => SymbolSpec::build(
                SymbolKind::Frequency(FrequencySymbol::ConvolutionKernel(ConvolutionKernel::new(
                    samples, spacing,
                )?)),
                1,
                None,
                domain,
            ),
        }
    }
}

impl From<SymbolSpec> for SymbolConfig {
    fn from(s: SymbolSpec) -> Self {
        let root = if s.root.iter().all(|r| *r == 0.0) {
            None
        } else {
            Some(s.root.clone())
        };
        let domain = Some(s.domain.clone());
        match s.kind {
            SymbolKind::ToolAlpha { alpha } => SymbolConfig::ToolAlpha { alpha, dim: s.dim, root, domain },
            SymbolKind::Polynomial(coeffs) => SymbolConfig::Polynomial {
                dim: s.dim,
                terms: coeffs
                    .into_iter()
                    .map(|(index, coeff)| TermConfig { index, coeff })
                    .collect(),
                root,
                domain,
            },
            SymbolKind::Piecewise { left, right } => SymbolConfig::Piecewise {
                left: Box::new((*left).into()),
                right: Box::new((*right).into()),
                root,
                domain,
            },
            SymbolKind::Radial2D { exponent } => SymbolConfig::Radial2D { exponent, dim: s.dim, root, domain },
            SymbolKind::Zero => SymbolConfig::Zero { dim: s.dim, root, domain },
            SymbolKind::Frequency(FrequencySymbol::Power2m { m }) => SymbolConfig::Power2m { m, domain },
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg1D) => SymbolConfig::SwiftHohenberg1D { domain },
            SymbolKind::Frequency(FrequencySymbol::SwiftHohenberg2D) => SymbolConfig::SwiftHohenberg2D { domain },
            SymbolKind::Frequency(FrequencySymbol::ConvolutionKernel(k)) => SymbolConfig::ConvolutionKernel {
                samples: k.samples,
                spacing: k.spacing,
                domain,
            },
        }
    }
}
