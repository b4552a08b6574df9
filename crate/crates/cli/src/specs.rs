//! Mini-syntax for symbols, probes and ranges on the command line.
//!
//! Symbols: `tool:ALPHA`, `poly:J:C;J:C` (`J` a comma-separated multi-index),
//! `radial:EXP`, `zero:DIM`, `power2m:M`, `sh1d`, `sh2d`, `kernel:FILE`, or a
//! JSON symbol config inline (`{...}`) or from a file (`@path`).
//!
//! Probes: `box:LO,HI` with one `;`-separated pair per axis, `power:GAMMA,EPS`,
//! `disc:CX,CY,R`, `quarter:CX,CY,R`, or JSON as for symbols.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ews_core::spectral::read_kernel_csv;
use ews_core::symbols::{Coefficients, Domain, SymbolConfig};
use ews_core::{FrequencySymbol, MultiIndex, SymbolSpec, TestFunction};

use crate::Usage;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn number(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| usage(format!("{what}: expected a number, got {text:?}")))
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',').map(|t| number(t, what)).collect()
}

fn json_text(text: &str) -> Result<Option<String>> {
    if let Some(path) = text.strip_prefix('@') {
        return fs::read_to_string(path)
            .map(Some)
            .with_context(|| format!("reading {path}"));
    }
    Ok(text.trim_start().starts_with('{').then(|| text.to_string()))
}

/// Frequency symbol from `power2m:M`, `sh1d`, `sh2d` or `kernel:FILE`.
pub fn parse_frequency(text: &str) -> Result<Option<FrequencySymbol>> {
    let (head, rest) = text.split_once(':').unwrap_or((text, ""));
    Ok(Some(match head {
        "power2m" => {
            let m: u32 = rest
                .trim()
                .parse()
                .map_err(|_| usage(format!("power2m:M needs a positive integer, got {rest:?}")))?;
            if m == 0 {
                return Err(usage("power2m:M needs m >= 1"));
            }
            FrequencySymbol::Power2m { m }
        }
        "sh1d" => FrequencySymbol::SwiftHohenberg1D,
        "sh2d" => FrequencySymbol::SwiftHohenberg2D,
        "kernel" => {
            let file = fs::File::open(rest).with_context(|| format!("opening kernel file {rest}"))?;
            FrequencySymbol::ConvolutionKernel(read_kernel_csv(file)?)
        }
        _ => return Ok(None),
    }))
}

pub fn parse_symbol(text: &str) -> Result<SymbolSpec> {
    if let Some(json) = json_text(text)? {
        let config: SymbolConfig = serde_json::from_str(&json).map_err(|e| usage(format!("symbol JSON: {e}")))?;
        return Ok(SymbolSpec::try_from(config)?);
    }
    if let Some(f) = parse_frequency(text)? {
        return Ok(SymbolSpec::frequency(f)?);
    }
    let (head, rest) = text.split_once(':').unwrap_or((text, ""));
    Ok(match head {
        "tool" => SymbolSpec::tool_alpha(number(rest, "tool:ALPHA")?)?,
        "radial" => SymbolSpec::radial_2d(number(rest, "radial:EXP")?)?,
        "zero" => {
            let dim: usize = rest
                .trim()
                .parse()
                .map_err(|_| usage(format!("zero:DIM needs an integer, got {rest:?}")))?;
            SymbolSpec::zero(dim)?
        }
        "poly" => SymbolSpec::polynomial(parse_terms(rest)?)?,
        _ => return Err(usage(format!("unknown symbol {text:?}"))),
    })
}

/// `J:C;J:C` with `J` comma-separated.
pub fn parse_terms(text: &str) -> Result<Coefficients> {
    let mut coeffs = Coefficients::new();
    for term in text.split(';').filter(|t| !t.trim().is_empty()) {
        let (j, c) = term
            .split_once(':')
            .ok_or_else(|| usage(format!("term {term:?} must look like INDEX:COEFF")))?;
        let index: MultiIndex = j.parse().map_err(|e| usage(format!("index {j:?}: {e}")))?;
        coeffs.insert(index, number(c, "coefficient")?);
    }
    if coeffs.is_empty() {
        return Err(usage("polynomial needs at least one term"));
    }
    Ok(coeffs)
}

pub fn parse_probe(text: &str) -> Result<TestFunction> {
    if let Some(json) = json_text(text)? {
        let g: TestFunction = serde_json::from_str(&json).map_err(|e| usage(format!("probe JSON: {e}")))?;
        g.validate()?;
        return Ok(g);
    }
    let (head, rest) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("probe {text:?} must look like KIND:ARGS")))?;
    Ok(match head {
        "box" => {
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for axis in rest.split(';') {
                match numbers(axis, "box:LO,HI")?.as_slice() {
                    [a, b] => {
                        lo.push(*a);
                        hi.push(*b);
                    }
                    _ => return Err(usage(format!("box axis {axis:?} needs LO,HI"))),
                }
            }
            TestFunction::indicator_box(lo, hi)?
        }
        "power" => match numbers(rest, "power:GAMMA,EPS")?.as_slice() {
            [gamma, eps] => TestFunction::power_indicator(*gamma, *eps)?,
            _ => return Err(usage("power:GAMMA,EPS needs two numbers")),
        },
        "disc" | "quarter" => match numbers(rest, "disc:CX,CY,R")?.as_slice() {
            [cx, cy, r] => TestFunction::disc(vec![*cx, *cy], *r, head == "quarter")?,
            _ => return Err(usage("disc:CX,CY,R needs three numbers")),
        },
        _ => return Err(usage(format!("unknown probe {text:?}"))),
    })
}

/// `LO:HI` decade exponents, e.g. `-8:-2`.
pub fn parse_decades(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("decades {text:?} must look like LO:HI")))?;
    let (lo, hi) = (number(lo, "decades")?, number(hi, "decades")?);
    if lo.is_nan() || hi.is_nan() || lo >= hi || hi > 0.0 {
        return Err(usage(format!("decades need LO < HI <= 0, got {text}")));
    }
    Ok((lo, hi))
}

pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    numbers(text, what)
}

/// Rebuilds `symbol` with a domain that also covers the bounding box of `g`.
pub fn covering(symbol: SymbolSpec, g: &TestFunction) -> Result<SymbolSpec> {
    if g.dim() != symbol.dim() {
        return Err(ews_core::Error::Argument(format!(
            "probe has dim {}, symbol has dim {}",
            g.dim(),
            symbol.dim()
        ))
        .into());
    }
    let (lo, hi) = g.bounding_box();
    let d = symbol.domain();
    if d.contains(&lo) && d.contains(&hi) {
        return Ok(symbol);
    }
    let new_lo = d.lo.iter().zip(&lo).map(|(a, b)| a.min(*b)).collect();
    let new_hi = d.hi.iter().zip(&hi).map(|(a, b)| a.max(*b)).collect();
    Ok(SymbolSpec::build(
        symbol.kind().clone(),
        symbol.dim(),
        Some(symbol.root().to_vec()),
        Some(Domain::new(new_lo, new_hi)?),
    )?)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}
