//! Operators that become multiplication operators after a Fourier transform.
//!
//! The variance along `g` equals the variance along `g_hat` for the frequency
//! symbol, so the quadrature and scaling machinery applies unchanged.

use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{variance_quadrature_with, QuadOptions, TestFunction, VarianceQuery};
use crate::scaling::ScalingLaw;
use crate::symbols::{Domain, FrequencySymbol, SymbolConfig, SymbolKind, SymbolSpec};

/// Samples per axis used to look for the zero circle inside a 2D `g_hat`.
const CIRCLE_SAMPLES: usize = 720;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "QueryConfig", into = "QueryConfig")]
pub struct FrequencyQuery {
    pub symbol: FrequencySymbol,
    pub ghat: TestFunction,
    pub p: f64,
    pub sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryConfig {
    symbol: SymbolConfig,
    ghat: TestFunction,
    p: f64,
    sigma: f64,
}

impl TryFrom<QueryConfig> for FrequencyQuery {
    type Error = Error;

    fn try_from(c: QueryConfig) -> Result<Self> {
        let spec = SymbolSpec::try_from(c.symbol)?;
        match spec.kind() {
            SymbolKind::Frequency(f) => Ok(FrequencyQuery::new(f.clone(), c.ghat, c.p, c.sigma)),
            other => Err(Error::Config(format!("{other:?} is not a frequency symbol"))),
        }
    }
}

impl From<FrequencyQuery> for QueryConfig {
    fn from(q: FrequencyQuery) -> Self {
        let spec = SymbolSpec::frequency(q.symbol).expect("frequency symbols are valid");
        QueryConfig {
            symbol: spec.into(),
            ghat: q.ghat,
            p: q.p,
            sigma: q.sigma,
        }
    }
}

impl FrequencyQuery {
    pub fn new(symbol: FrequencySymbol, ghat: TestFunction, p: f64, sigma: f64) -> Self {
        FrequencyQuery { symbol, ghat, p, sigma }
    }

    /// Whether the zero set of the symbol touches the closure of `g_hat`'s support.
    /// When it does not, the variance stays bounded as `p -> 0-`.
    pub fn is_divergent(&self) -> bool {
        let touches = |x: &[f64]| near_support(&self.ghat, x);
        match &self.symbol {
            FrequencySymbol::Power2m { .. } => touches(&[0.0]),
            FrequencySymbol::SwiftHohenberg1D => touches(&[1.0]) || touches(&[-1.0]),
            FrequencySymbol::SwiftHohenberg2D => (0..CIRCLE_SAMPLES).any(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / CIRCLE_SAMPLES as f64;
                touches(&[t.cos(), t.sin()])
            }),
            FrequencySymbol::ConvolutionKernel(k) => k.zeros().iter().any(|z| touches(&[*z])),
        }
    }
}

/// `x` lies in the support of `g` or within a relative 1e-9 of it.
fn near_support(g: &TestFunction, x: &[f64]) -> bool {
    if x.len() != g.dim() {
        return false;
    }
    let delta = 1e-9 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let offsets = [0.0, delta, -delta];
    match x.len() {
        1 => offsets.iter().any(|d| g.value(&[x[0] + d]) != 0.0),
        _ => offsets
            .iter()
            .any(|a| offsets.iter().any(|b| g.value(&[x[0] + a, x[1] + b]) != 0.0)),
    }
}

/// Symbol of the operator family on the frequency variable.
pub fn frequency_symbol(kind: FrequencySymbol) -> Result<SymbolSpec> {
    SymbolSpec::frequency(kind)
}

/// Frequency symbol whose domain also covers `[lo, hi]`.
fn symbol_covering(kind: &FrequencySymbol, lo: &[f64], hi: &[f64]) -> Result<SymbolSpec> {
    let base = SymbolSpec::frequency(kind.clone())?;
    if base.dim() != lo.len() {
        return Err(Error::arg(format!(
            "g_hat has dim {}, symbol has dim {}",
            lo.len(),
            base.dim()
        )));
    }
    let d = base.domain();
    let new_lo: Vec<f64> = d.lo.iter().zip(lo).map(|(a, b)| a.min(*b)).collect();
    let new_hi: Vec<f64> = d.hi.iter().zip(hi).map(|(a, b)| a.max(*b)).collect();
    if new_lo == d.lo && new_hi == d.hi {
        return Ok(base);
    }
    SymbolSpec::build(
        SymbolKind::Frequency(kind.clone()),
        base.dim(),
        None,
        Some(Domain::new(new_lo, new_hi)?),
    )
}

/// `(sigma^2 / 2) int |g_hat|^2 / (-f - p) dk` over the support of `g_hat`.
pub fn variance_spectral(q: &FrequencyQuery) -> Result<f64> {
    variance_spectral_with(q, &QuadOptions::default()).map(|e| e.value)
}

pub fn variance_spectral_with(q: &FrequencyQuery, opts: &QuadOptions) -> Result<crate::quadrature::QuadEstimate> {
    q.ghat.validate()?;
    let (lo, hi) = q.ghat.bounding_box();
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::arg("g_hat must have bounded support"));
    }
    let symbol = symbol_covering(&q.symbol, &lo, &hi)?;
    variance_quadrature_with(&VarianceQuery::new(symbol, q.ghat.clone(), q.p, q.sigma), opts)
}

/// Law of the operator family for a `g_hat` that covers its zero set.
pub fn predicted_spectral_law(kind: &FrequencySymbol) -> Result<ScalingLaw> {
    match kind {
        FrequencySymbol::Power2m { m } => {
            if *m == 0 {
                return Err(Error::arg("m must be at least 1"));
            }
            Ok(ScalingLaw::new(-1.0 + 1.0 / (2.0 * *m as f64), 0))
        }
        FrequencySymbol::SwiftHohenberg1D | FrequencySymbol::SwiftHohenberg2D => Ok(ScalingLaw::new(-0.5, 0)),
        FrequencySymbol::ConvolutionKernel(_) => Err(Error::arg(
            "law requires kernel analysis: sweep the variance and use fit_loglog",
        )),
    }
}

/// Law for a concrete query: convergent when `g_hat` misses the zero set.
pub fn query_law(q: &FrequencyQuery) -> Result<ScalingLaw> {
    if !q.is_divergent() {
        return Ok(ScalingLaw::convergent());
    }
    predicted_spectral_law(&q.symbol)
}

/// Reads kernel samples, one value per line, with `# spacing = h` in a comment line.
pub fn read_kernel_csv<R: Read>(input: R) -> Result<crate::symbols::ConvolutionKernel> {
    let mut spacing = None;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let row = i + 1;
        let text = line.trim();
        if let Some(comment) = text.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "spacing" {
                    let h: f64 = value.trim().parse().map_err(|_| Error::Parse {
                        row,
                        message: format!("bad spacing {:?}", value.trim()),
                    })?;
                    spacing = Some(h);
                }
            }
            continue;
        }
        if text.is_empty() {
            continue;
        }
        let v: f64 = text.parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad sample {text:?}"),
        })?;
        samples.push(v);
    }
    let spacing = spacing.ok_or_else(|| Error::Parse {
        row: 1,
        message: "missing '# spacing = h' header".into(),
    })?;
    crate::symbols::ConvolutionKernel::new(samples, spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn symbol_values() {
        let p1 = frequency_symbol(FrequencySymbol::Power2m { m: 1 }).unwrap();
        let p1 = SymbolSpec::build(p1.kind().clone(), 1, None, Some(Domain::new(vec![-3.0], vec![3.0]).unwrap())).unwrap();
        assert_eq!(p1.eval(&[2.0]).unwrap(), -4.0);
        let sh = frequency_symbol(FrequencySymbol::SwiftHohenberg1D).unwrap();
        assert_eq!(sh.eval(&[1.0]).unwrap(), 0.0);
        assert_eq!(sh.eval(&[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn swift_hohenberg_disc() {
        let g = TestFunction::disc(vec![0.0, 0.0], SQRT_2, false).unwrap();
        let q = FrequencyQuery::new(FrequencySymbol::SwiftHohenberg2D, g, -1.0, SQRT_2);
        assert!(rel(variance_spectral(&q).unwrap(), PI * PI / 2.0) < 1e-6);
    }

    #[test]
    fn power2m_arctan() {
        let g = TestFunction::unit_box(1.0, 1).unwrap();
        let q = FrequencyQuery::new(FrequencySymbol::Power2m { m: 1 }, g, -0.01, SQRT_2);
        assert!(rel(variance_spectral(&q).unwrap(), 10.0 * 10f64.atan()) < 1e-8);
    }

    #[test]
    fn ghat_beyond_default_domain() {
        let g = TestFunction::unit_box(3.0, 1).unwrap();
        let q = FrequencyQuery::new(FrequencySymbol::Power2m { m: 1 }, g, -1.0, SQRT_2);
        assert!(rel(variance_spectral(&q).unwrap(), 3f64.atan()) < 1e-8);
    }

    #[test]
    fn laws() {
        assert_eq!(
            predicted_spectral_law(&FrequencySymbol::Power2m { m: 2 }).unwrap(),
            ScalingLaw::new(-0.75, 0)
        );
        assert_eq!(
            predicted_spectral_law(&FrequencySymbol::SwiftHohenberg1D).unwrap(),
            ScalingLaw::new(-0.5, 0)
        );
        assert_eq!(
            predicted_spectral_law(&FrequencySymbol::SwiftHohenberg2D).unwrap(),
            ScalingLaw::new(-0.5, 0)
        );
        let k = crate::symbols::ConvolutionKernel::new(vec![1.0, -2.0, 1.0], 0.1).unwrap();
        assert!(predicted_spectral_law(&FrequencySymbol::ConvolutionKernel(k)).is_err());
    }

    #[test]
    fn divergence_flag() {
        let inside = TestFunction::unit_box(2.0, 1).unwrap();
        let away = TestFunction::indicator_box(vec![1.2], vec![1.8]).unwrap();
        let sh = FrequencySymbol::SwiftHohenberg1D;
        assert!(FrequencyQuery::new(sh.clone(), inside, -0.1, 1.0).is_divergent());
        let q = FrequencyQuery::new(sh, away, -0.1, 1.0);
        assert!(!q.is_divergent());
        assert!(query_law(&q).unwrap().convergent);
        let ring = TestFunction::disc(vec![0.0, 0.0], 0.5, false).unwrap();
        assert!(!FrequencyQuery::new(FrequencySymbol::SwiftHohenberg2D, ring, -0.1, 1.0).is_divergent());
    }

    #[test]
    fn kernel_csv() {
        let text = "# spacing = 0.5\n1\n-2\n1\n";
        let k = read_kernel_csv(text.as_bytes()).unwrap();
        assert_eq!(k.samples(), &[1.0, -2.0, 1.0]);
        assert_eq!(k.spacing(), 0.5);
        assert!(matches!(read_kernel_csv("1\n2\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(
            read_kernel_csv("# spacing=1\n1\nx\n".as_bytes()),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn query_json_round_trip() {
        let q = FrequencyQuery::new(
            FrequencySymbol::Power2m { m: 2 },
            TestFunction::unit_box(1.0, 1).unwrap(),
            -0.1,
            1.0,
        );
        let text = serde_json::to_string(&q).unwrap();
        let back: FrequencyQuery = serde_json::from_str(&text).unwrap();
        assert_eq!(back.symbol, q.symbol);
        assert_eq!(variance_spectral(&back).unwrap(), variance_spectral(&q).unwrap());
    }
}
