//! Subcommand implementations. Each command resolves its arguments (from flags, a
//! JSON config, or a manifest), computes, writes its outputs once, then a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use clap::{Args, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ews_core::noise::{NoiseModel, NoiseSpec};
use ews_core::quadrature::{monomial_integral_with, variance_quadrature_with, QuadOptions};
use ews_core::scaling::{
    best_upper_bound_entry, default_candidates, fit_loglog_fixed_k, fit_summary_line, law_1d_entry,
    law_analytic_1d_entry, log_spaced_p, reduced_entry, read_sweep_csv, relative_change, sweep as run_sweep, write_sweep_csv,
    CatalogEntry, FitWindow, LogLogFit, Source, SweepPoint, SweepResult, FIT_HEADER,
};
use ews_core::simulate::{predict_discrete_variance, run, run_with_trace, support_weights, Mesh, Projection, SimConfig};
use ews_core::spectral::{predicted_spectral_law, query_law, variance_spectral_with, FrequencyQuery};
use ews_core::{
    appendix_c_closed_form, appendix_c_integral, classify, fit_loglog, minimal_support, predicts_convergence,
    FrequencySymbol, MultiIndex, ScalingLaw, SymbolKind, SymbolSpec, TestFunction, VarianceQuery,
};

use crate::specs::{covering, ensure_dir, parse_decades, parse_frequency, parse_list, parse_probe, parse_symbol, parse_terms};
use crate::svg::{self, Reference, Series, Style};
use crate::{ToleranceNotMet, Usage};

pub struct Context {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
}

/// Written next to every output so the run can be repeated with `--config`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Config from `--config` when given (a bare config or a manifest), else the flags.
fn resolve<T: DeserializeOwned>(flags: T, ctx: &Context, command: &str) -> Result<(T, u64)> {
    let Some(path) = &ctx.config else {
        return Ok((flags, ctx.seed.unwrap_or(0)));
    };
    let value = read_json(path)?;
    if let Some(manifest_cmd) = value.get("command").and_then(|c| c.as_str()) {
        if manifest_cmd != command {
            return Err(usage(format!("manifest is for `{manifest_cmd}`, not `{command}`")));
        }
        let manifest: RunManifest =
            serde_json::from_value(value).map_err(|e| usage(format!("manifest {}: {e}", path.display())))?;
        let args = serde_json::from_value(manifest.config).map_err(|e| usage(format!("config: {e}")))?;
        return Ok((args, ctx.seed.unwrap_or(manifest.seed)));
    }
    let args = serde_json::from_value(value).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    Ok((args, ctx.seed.unwrap_or(0)))
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(ctx: &'a Context) -> Result<Self> {
        ensure_dir(&ctx.out)?;
        Ok(Outputs {
            dir: &ctx.out,
            names: Vec::new(),
        })
    }

    fn write(&mut self, name: String, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(&name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        self.names.push(name);
        Ok(())
    }

    fn manifest<T: Serialize>(self, stem: &str, command: &str, config: &T, seed: u64, start: Instant) -> Result<()> {
        let manifest = RunManifest {
            command: command.into(),
            config: serde_json::to_value(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: self.names,
            duration_secs: start.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(format!("{stem}.manifest.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn sweep_csv(sweep: &SweepResult) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_sweep_csv(sweep, &mut buf)?;
    Ok(buf)
}

// ---------------------------------------------------------------------------
// laws

#[derive(Subcommand, Debug)]
pub enum LawsCommand {
    /// Tool function `-|x|^alpha` with probe `x^-gamma 1_[0,eps]`.
    #[command(name = "1d")]
    OneD {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
    },
    /// Analytic symbol `-sum a_n x^n`, given as `n:a_n,...`.
    Analytic {
        #[arg(long)]
        coeffs: String,
    },
    /// Monomial `x^j` on `[0, eps]^N`.
    Nd {
        #[arg(long)]
        indices: String,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// Polynomial `-sum a_j x^j` given as `J:C;J:C`.
    Poly {
        #[arg(long)]
        terms: String,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// Frequency symbol family: `power2m:M`, `sh1d`, `sh2d`.
    Spectral {
        #[arg(long)]
        family: String,
    },
}

/// Argument errors from the catalog are usage errors here.
fn catalog<T>(r: ews_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        ews_core::Error::Argument(m) => usage(m),
        other => other.into(),
    })
}

pub fn laws(cmd: LawsCommand) -> Result<()> {
    match cmd {
        LawsCommand::OneD { alpha, gamma } => println!("{}", catalog(law_1d_entry(alpha, gamma))?),
        LawsCommand::Analytic { coeffs } => {
            let mut map = BTreeMap::new();
            for term in coeffs.split(',') {
                let (n, a) = term
                    .split_once(':')
                    .ok_or_else(|| usage(format!("coefficient {term:?} must look like DEGREE:VALUE")))?;
                let n: u32 = n.trim().parse().map_err(|_| usage(format!("bad degree {n:?}")))?;
                let a: f64 = a.trim().parse().map_err(|_| usage(format!("bad coefficient {a:?}")))?;
                map.insert(n, a);
            }
            println!("{}", catalog(law_analytic_1d_entry(&map))?);
        }
        LawsCommand::Nd { indices, eps } => {
            let j: MultiIndex = indices.parse().map_err(|e| usage(format!("indices: {e}")))?;
            if j.is_zero() {
                return Err(ews_core::Error::NoBifurcation(j.to_string()).into());
            }
            println!("{}", catalog(reduced_entry(&j, eps))?);
        }
        LawsCommand::Poly { terms, eps } => {
            let coeffs = parse_terms(&terms)?;
            let cplus = minimal_support(&coeffs);
            let listed: Vec<String> = cplus.iter().map(|j| j.to_string()).collect();
            println!("minimal support: {}", listed.join(" "));
            if coeffs.keys().next().map_or(0, MultiIndex::dim) >= 2 {
                println!("bounded variance predicted: {}", catalog(predicts_convergence(&coeffs))?);
            }
            println!("upper bound: {}", catalog(best_upper_bound_entry(&cplus, eps))?);
        }
        LawsCommand::Spectral { family } => {
            let f = parse_frequency(&family)?.ok_or_else(|| usage(format!("unknown family {family:?}")))?;
            println!("{}", catalog(predicted_spectral_law(&f))?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared simulation flags

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimFlags {
    /// Mesh half-width L.
    #[arg(long, default_value_t = 1.0)]
    pub half_width: f64,
    /// Interior mesh points per axis.
    #[arg(long, default_value_t = 199)]
    pub mesh_points: usize,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Time steps per replica.
    #[arg(long, default_value_t = 200_000)]
    pub nt: u64,
    /// Steps discarded before recording; derived from the slowest mode when absent.
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long, default_value_t = 4)]
    pub replicas: usize,
    /// Rank-M noise with sampled eigenvalues and Haar basis; identity noise when absent.
    #[arg(long)]
    pub noise_rank: Option<usize>,
    /// Plain sum over support points instead of the cell-weighted projection.
    #[arg(long)]
    pub unweighted: bool,
}

impl SimFlags {
    fn config(&self, symbol: &SymbolSpec, g: &TestFunction, p: f64, sigma: f64, seed: u64) -> Result<SimConfig> {
        let mesh = Mesh::new(self.half_width, self.mesh_points, symbol.dim())?;
        let mut c = SimConfig::new(mesh, symbol.clone(), g.clone(), p, sigma, self.dt, self.nt);
        c.burn_in = self.burn_in;
        c.replicas = self.replicas;
        c.seed = seed;
        c.noise = match self.noise_rank {
            Some(m) => NoiseSpec::Rank { m },
            None => NoiseSpec::Identity,
        };
        c.projection = if self.unweighted {
            Projection::Unweighted
        } else {
            Projection::Weighted
        };
        Ok(c)
    }

    /// Factor that puts identity-noise estimates on the scale of the continuum variance.
    fn continuum_factor(&self, dim: usize) -> Option<f64> {
        if self.noise_rank.is_some() {
            return None;
        }
        let h = 2.0 * self.half_width / (self.mesh_points + 1) as f64;
        let cell = h.powi(dim as i32);
        Some(if self.unweighted { cell } else { 1.0 / cell })
    }
}

fn symbol_and_probe(symbol: &str, g: &str) -> Result<(SymbolSpec, TestFunction)> {
    let g = parse_probe(g)?;
    let symbol = covering(parse_symbol(symbol)?, &g)?;
    Ok((symbol, g))
}

/// Catalog law for a symbol/probe pair when one applies.
fn catalog_law(symbol: &SymbolSpec, g: &TestFunction) -> Option<CatalogEntry> {
    let root = symbol.root();
    let (lo, hi) = g.bounding_box();
    let covers_root = root.iter().zip(lo.iter().zip(&hi)).all(|(r, (a, b))| a <= r && r <= b);
    let missed = || CatalogEntry {
        law: ScalingLaw::convergent(),
        row: "probe misses the root".into(),
    };
    match symbol.kind() {
        SymbolKind::ToolAlpha { alpha } => match g {
            TestFunction::PowerIndicator { gamma, .. } if root[0] == 0.0 => law_1d_entry(*alpha, *gamma).ok(),
            TestFunction::IndicatorBox { .. } if covers_root => law_1d_entry(*alpha, 0.0).ok(),
            TestFunction::IndicatorBox { .. } => Some(missed()),
            _ => None,
        },
        SymbolKind::Polynomial(coeffs) if symbol.dim() == 1 && covers_root => {
            let map: BTreeMap<u32, f64> = coeffs.iter().map(|(j, a)| (j.components()[0], *a)).collect();
            law_analytic_1d_entry(&map).ok()
        }
        SymbolKind::Polynomial(coeffs) if covers_root => {
            best_upper_bound_entry(&minimal_support(coeffs), 1.0).ok().map(|e| CatalogEntry {
                law: e.law,
                row: format!("upper bound, {}", e.row),
            })
        }
        SymbolKind::Frequency(f) => {
            let q = FrequencyQuery::new(f.clone(), g.clone(), -1.0, 1.0);
            query_law(&q).ok().map(|law| CatalogEntry {
                law,
                row: "spectral".into(),
            })
        }
        _ => None,
    }
}

fn parse_source(text: &str) -> Result<Source> {
    text.parse().map_err(|e: ews_core::Error| usage(e.to_string()))
}

fn quad_options(rel_tol: Option<f64>) -> QuadOptions {
    QuadOptions {
        rel_tol,
        ..QuadOptions::default()
    }
}

fn fit_line(fit: &LogLogFit) -> String {
    format!("fitted slope {:.2} ± {:.2}", fit.s, fit.s_stderr.max(0.005))
}

/// Fit over the smallest `decades` of the sweep, holding `k` when the catalog gives it.
fn fit_tail(sweep: &SweepResult, decades: f64, law: Option<&ScalingLaw>) -> Result<LogLogFit> {
    let window = FitWindow::smallest_decades(sweep, decades)?;
    match law {
        Some(l) if !l.convergent => Ok(fit_loglog_fixed_k(sweep, window, l.k as f64)?),
        _ => Ok(fit_loglog(sweep, window)?),
    }
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Symbol, e.g. `tool:2`, `poly:1,1:1`, `sh1d`.
    #[arg(long, required_unless_present = "monomial")]
    pub symbol: Option<String>,
    /// Probe, e.g. `box:0,1`, `power:0.25,1`.
    #[arg(long, required_unless_present = "monomial")]
    pub g: Option<String>,
    /// Sweep the monomial integral over `[0, eps]^N` instead, e.g. `2,10`.
    #[arg(long, conflicts_with_all = ["symbol", "g"])]
    pub monomial: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Decade exponents of `-p`, e.g. `-8:-2`.
    #[arg(long, default_value = "-8:-2", allow_hyphen_values = true)]
    pub p_decades: String,
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// `quadrature` or `simulation`.
    #[arg(long, default_value = "quadrature")]
    pub source: String,
    /// Relative tolerance of the quadrature; per-dimension default when absent.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimFlags,
    /// Also write a log-log SVG.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "sweep")]
    pub name: String,
}

pub fn sweep(flags: SweepArgs, ctx: &Context) -> Result<()> {
    let start = Instant::now();
    let (args, seed) = resolve(flags, ctx, "sweep")?;
    let (lo, hi) = parse_decades(&args.p_decades)?;
    let ps = log_spaced_p(lo, hi, args.points).map_err(|e| usage(e.to_string()))?;
    let source = parse_source(&args.source)?;
    let opts = quad_options(args.rel_tol);
    let mut law = None;
    let result = if let Some(j) = &args.monomial {
        let j: MultiIndex = j.parse().map_err(|e| usage(format!("monomial: {e}")))?;
        law = reduced_entry(&j, args.eps).ok();
        run_sweep(&ps, Source::Quadrature, |p| {
            monomial_integral_with(&j, args.eps, -p, &opts).map(|e| (e.value, e.error))
        })?
    } else {
        let (symbol, g) = symbol_and_probe(
            args.symbol.as_deref().unwrap_or_default(),
            args.g.as_deref().unwrap_or_default(),
        )?;
        law = law.or(catalog_law(&symbol, &g));
        match source {
            Source::Quadrature => run_sweep(&ps, source, |p| {
                variance_quadrature_with(&VarianceQuery::new(symbol.clone(), g.clone(), p, args.sigma), &opts)
                    .map(|e| (e.value, e.error))
            })?,
            Source::Simulation => {
                let configs = ps
                    .iter()
                    .map(|&p| args.sim.config(&symbol, &g, p, args.sigma, seed))
                    .collect::<Result<Vec<_>>>()?;
                run_sweep(&ps, source, |p| {
                    let c = configs.iter().find(|c| c.p == p).expect("config per p");
                    run(c).map(|e| (e.variance, e.stderr))
                })?
            }
        }
    };

    let mut out = Outputs::new(ctx)?;
    out.write(format!("{}.csv", args.name), &sweep_csv(&result)?)?;
    let fit = fit_tail(&result, 2.0, law.as_ref().map(|e| &e.law)).ok();
    if let Some(f) = &fit {
        println!("{} over the last two decades", fit_line(f));
    }
    if let Some(e) = &law {
        println!("catalog: {e}");
    }
    if args.svg {
        let picture = sweep_svg(&args.name, &result, law.as_ref(), fit.as_ref());
        out.write(format!("{}.svg", args.name), picture.as_bytes())?;
    }
    out.manifest(&args.name, "sweep", &args, seed, start)
}

fn points_of(sweep: &SweepResult, scale: f64) -> Vec<(f64, f64, f64)> {
    sweep
        .points()
        .iter()
        .map(|pt| (-pt.p, pt.value * scale, pt.stderr * scale))
        .collect()
}

fn reference_line(law: Option<&CatalogEntry>, anchor: Option<&SweepPoint>) -> Option<Reference> {
    let (law, anchor) = (law?, anchor?);
    if law.law.convergent {
        return None;
    }
    Some(Reference {
        label: format!("slope {} ({})", ews_core::scaling::fmt_num(law.law.s), law.row),
        slope: law.law.s,
        anchor: (-anchor.p, anchor.value),
    })
}

fn sweep_svg(title: &str, sweep: &SweepResult, law: Option<&CatalogEntry>, fit: Option<&LogLogFit>) -> String {
    let series = Series {
        label: sweep.source().to_string(),
        points: points_of(sweep, 1.0),
        style: match sweep.source() {
            Source::Quadrature => Style::Line,
            Source::Simulation => Style::Markers,
        },
    };
    let reference = reference_line(law, sweep.points().last());
    let notes: Vec<String> = fit.map(fit_line).into_iter().collect();
    svg::loglog(title, &[series], reference.as_ref(), &notes)
}

// ---------------------------------------------------------------------------
// fit

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    /// Sweep CSV with header `p,value,stderr,source`.
    #[arg(long)]
    pub input: PathBuf,
    /// Window of `-p` as `LO:HI`; the smallest `--decades` decades when absent.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    pub decades: f64,
    /// Hold the log power at this value.
    #[arg(long)]
    pub fixed_k: Option<f64>,
    /// Extra exponents accepted by the classifier, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub candidates: Option<String>,
    #[arg(long, default_value = "fit")]
    pub name: String,
}

pub fn fit(flags: FitArgs, ctx: &Context) -> Result<()> {
    let start = Instant::now();
    let (args, seed) = resolve(flags, ctx, "fit")?;
    let file = fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let sweep = read_sweep_csv(file)?;
    let window = match &args.window {
        Some(w) => {
            let (lo, hi) = w
                .split_once(':')
                .ok_or_else(|| usage(format!("window {w:?} must look like LO:HI")))?;
            let lo: f64 = lo.trim().parse().map_err(|_| usage(format!("bad window bound {lo:?}")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| usage(format!("bad window bound {hi:?}")))?;
            FitWindow::new(lo, hi).map_err(|e| usage(e.to_string()))?
        }
        None => FitWindow::smallest_decades(&sweep, args.decades)?,
    };
    let fit = match args.fixed_k {
        Some(k) => fit_loglog_fixed_k(&sweep, window, k)?,
        None => fit_loglog(&sweep, window)?,
    };
    let extra = match &args.candidates {
        Some(c) => parse_list(c, "candidates")?,
        None => Vec::new(),
    };
    let class = classify(fit.s, fit.k, &default_candidates(&extra));
    // A bounded variance shows as a flat tail, which the fit reports as s = 0, k = 0.
    let flat = relative_change(&sweep, window).map(|c| c < 0.01).unwrap_or(false);
    println!(
        "s_hat={:.6} ± {:.2e} k_hat={:.4} c_hat={:.4} residual={:.2e} points={}",
        fit.s, fit.s_stderr, fit.k, fit.c, fit.residual, fit.points
    );
    println!("classified: {class}{}", if flat { " (flat tail: bounded variance)" } else { "" });
    let mut out = Outputs::new(ctx)?;
    let body = format!("{FIT_HEADER}\n{}\n", fit_summary_line(&fit, &class));
    out.write(format!("{}.csv", args.name), body.as_bytes())?;
    out.manifest(&args.name, "fit", &args, seed, start)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value = "tool:2")]
    pub symbol: String,
    #[arg(long, default_value = "box:-0.1,0.1", allow_hyphen_values = true)]
    pub g: String,
    /// Comma-separated values of p.
    #[arg(long, default_value = "-0.1", allow_hyphen_values = true)]
    pub p: String,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimFlags,
    /// Stream `step,proj` of replica 0 to `<name>.trace<i>.csv`.
    #[arg(long)]
    pub trace: bool,
    /// Keep every `thin`-th step in the trace.
    #[arg(long, default_value_t = 100)]
    pub thin: u64,
    /// Write the sampled noise basis and eigenvalues.
    #[arg(long)]
    pub dump_basis: bool,
    #[arg(long, default_value = "simulate")]
    pub name: String,
}

const SIM_HEADER: &str =
    "p,variance,stderr,within_stderr,across_stderr,mean,effective_samples,log10_spread,predicted,burn_in,recorded_steps";

pub fn simulate(flags: SimulateArgs, ctx: &Context) -> Result<()> {
    let start = Instant::now();
    // A raw SimConfig is accepted as `--config` too.
    if let Some(path) = &ctx.config {
        let value = read_json(path)?;
        if value.get("mesh").is_some() {
            let mut config: SimConfig =
                serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if let Some(seed) = ctx.seed {
                config.seed = seed;
            }
            let name = flags.name.clone();
            let mut out = Outputs::new(ctx)?;
            let rows = simulate_rows(&[config.clone()], &flags, &mut out)?;
            out.write(format!("{name}.csv"), rows.as_bytes())?;
            return out.manifest(&name, "simulate-config", &config, config.seed, start);
        }
    }
    let (args, seed) = resolve(flags, ctx, "simulate")?;
    let (symbol, g) = symbol_and_probe(&args.symbol, &args.g)?;
    let configs = parse_list(&args.p, "p")?
        .into_iter()
        .map(|p| args.sim.config(&symbol, &g, p, args.sigma, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(ctx)?;
    let rows = simulate_rows(&configs, &args, &mut out)?;
    out.write(format!("{}.csv", args.name), rows.as_bytes())?;
    if args.dump_basis {
        if let Some(m) = args.sim.noise_rank {
            dump_basis(&configs[0], m, &args.name, &mut out)?;
        }
    }
    out.manifest(&args.name, "simulate", &args, seed, start)
}

fn simulate_rows(configs: &[SimConfig], args: &SimulateArgs, out: &mut Outputs) -> Result<String> {
    let mut rows = format!("{SIM_HEADER}\n");
    println!("{:>10} {:>14} {:>12} {:>14}", "p", "variance", "stderr", "predicted");
    for (i, c) in configs.iter().enumerate() {
        let est = if args.trace {
            let mut trace = String::from("step,proj\n");
            let est = run_with_trace(c, args.thin, &mut |step, proj| {
                trace.push_str(&format!("{step},{proj}\n"));
            })?;
            out.write(format!("{}.trace{i}.csv", args.name), trace.as_bytes())?;
            est
        } else {
            run(c)?
        };
        let predicted = predict_discrete_variance(c)?;
        println!("{:>10} {:>14.6e} {:>12.3e} {:>14.6e}", c.p, est.variance, est.stderr, predicted);
        rows.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            c.p,
            est.variance,
            est.stderr,
            est.within_stderr,
            est.across_stderr,
            est.mean,
            est.effective_samples,
            est.log10_spread,
            predicted,
            est.burn_in,
            est.recorded_steps
        ));
    }
    Ok(rows)
}

fn dump_basis(config: &SimConfig, m: usize, name: &str, out: &mut Outputs) -> Result<()> {
    let (support, _) = support_weights(&config.g, &config.mesh, config.projection)?;
    let model = NoiseModel::sample(m, support.clone(), config.mesh.len(), config.seed)?;
    let mut basis = String::from("mesh_index");
    for j in 1..=m {
        basis.push_str(&format!(",b{j}"));
    }
    basis.push('\n');
    for (row, idx) in support.iter().enumerate() {
        basis.push_str(&idx.to_string());
        for j in 0..m {
            basis.push_str(&format!(",{}", model.support_basis()[(row, j)]));
        }
        basis.push('\n');
    }
    out.write(format!("{name}.basis.csv"), basis.as_bytes())?;
    let mut eig = String::from("m,q\n");
    for (j, q) in model.eigenvalues().iter().enumerate() {
        eig.push_str(&format!("{},{q}\n", j + 1));
    }
    out.write(format!("{name}.eigenvalues.csv"), eig.as_bytes())
}

// ---------------------------------------------------------------------------
// compare

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, default_value = "tool:2")]
    pub symbol: String,
    #[arg(long, default_value = "box:-0.1,0.1", allow_hyphen_values = true)]
    pub g: String,
    /// Decade exponents of `-p` for the quadrature curve.
    #[arg(long, default_value = "-8:-2", allow_hyphen_values = true)]
    pub p_decades: String,
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    /// Comma-separated values of p to simulate; none when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub sim_p: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Decades of smallest `-p` used by the quadrature fit.
    #[arg(long, default_value_t = 2.0)]
    pub decades: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimFlags,
    #[arg(long, default_value = "compare")]
    pub name: String,
}

pub fn compare(flags: CompareArgs, ctx: &Context) -> Result<()> {
    let start = Instant::now();
    let (args, seed) = resolve(flags, ctx, "compare")?;
    let (symbol, g) = symbol_and_probe(&args.symbol, &args.g)?;
    let (lo, hi) = parse_decades(&args.p_decades)?;
    let ps = log_spaced_p(lo, hi, args.points).map_err(|e| usage(e.to_string()))?;
    let quad = run_sweep(&ps, Source::Quadrature, |p| {
        variance_quadrature_with(&VarianceQuery::new(symbol.clone(), g.clone(), p, args.sigma), &QuadOptions::default())
            .map(|e| (e.value, e.error))
    })?;
    let law = catalog_law(&symbol, &g);
    let quad_fit = fit_tail(&quad, args.decades, law.as_ref().map(|e| &e.law))?;
    let mut notes = vec![format!("{} (quadrature)", fit_line(&quad_fit))];

    let mut series = vec![Series {
        label: "quadrature".into(),
        points: points_of(&quad, 1.0),
        style: Style::Line,
    }];
    let mut sim = None;
    if let Some(list) = &args.sim_p {
        let sim_ps = parse_list(list, "sim-p")?;
        let configs = sim_ps
            .iter()
            .map(|&p| args.sim.config(&symbol, &g, p, args.sigma, seed))
            .collect::<Result<Vec<_>>>()?;
        let s = run_sweep(&sim_ps, Source::Simulation, |p| {
            let c = configs.iter().find(|c| c.p == p).expect("config per p");
            run(c).map(|e| (e.variance, e.stderr))
        })?;
        let scale = args.sim.continuum_factor(symbol.dim());
        series.push(Series {
            label: match scale {
                Some(_) => "simulation (continuum scale)".into(),
                None => "simulation".into(),
            },
            points: points_of(&s, scale.unwrap_or(1.0)),
            style: Style::Markers,
        });
        let full = FitWindow::new(-s.points().last().unwrap().p, -s.points()[0].p);
        if let Ok(window) = full {
            let k = law.as_ref().filter(|e| !e.law.convergent).map_or(0.0, |e| e.law.k as f64);
            if let Ok(f) = fit_loglog_fixed_k(&s, window, k) {
                notes.push(format!("{} (simulation)", fit_line(&f)));
            }
        }
        sim = Some(s);
    }
    if let Some(e) = &law {
        notes.push(format!("catalog: {e}"));
    }
    for n in &notes {
        println!("{n}");
    }

    let mut csv = sweep_csv(&quad)?;
    if let Some(s) = &sim {
        let body = sweep_csv(s)?;
        let skip = body.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
        csv.extend_from_slice(&body[skip..]);
    }
    let reference = reference_line(law.as_ref(), quad.points().last());
    let picture = svg::loglog(&args.name, &series, reference.as_ref(), &notes);
    let mut out = Outputs::new(ctx)?;
    out.write(format!("{}.csv", args.name), &csv)?;
    out.write(format!("{}.svg", args.name), picture.as_bytes())?;
    out.manifest(&args.name, "compare", &args, seed, start)
}

// ---------------------------------------------------------------------------
// spectral

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SpectralArgs {
    /// `power2m:M`, `sh1d`, `sh2d` or `kernel:FILE`.
    #[arg(long)]
    pub family: String,
    /// Probe on the frequency variable.
    #[arg(long, allow_hyphen_values = true)]
    pub ghat: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Comma-separated values of p; a sweep over `--p-decades` when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    #[arg(long, default_value = "-8:-2", allow_hyphen_values = true)]
    pub p_decades: String,
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "spectral")]
    pub name: String,
}

pub fn spectral(flags: SpectralArgs, ctx: &Context) -> Result<()> {
    let start = Instant::now();
    let (args, seed) = resolve(flags, ctx, "spectral")?;
    let family: FrequencySymbol =
        parse_frequency(&args.family)?.ok_or_else(|| usage(format!("unknown family {:?}", args.family)))?;
    let ghat = parse_probe(&args.ghat)?;
    let query = |p: f64| FrequencyQuery::new(family.clone(), ghat.clone(), p, args.sigma);
    let law = match query_law(&query(-1.0)) {
        Ok(l) => {
            println!("predicted: {l}");
            Some(l)
        }
        Err(e) => {
            println!("predicted: {e}");
            None
        }
    };
    let ps = match &args.p {
        Some(list) => parse_list(list, "p")?,
        None => {
            let (lo, hi) = parse_decades(&args.p_decades)?;
            log_spaced_p(lo, hi, args.points).map_err(|e| usage(e.to_string()))?
        }
    };
    let result = run_sweep(&ps, Source::Quadrature, |p| {
        variance_spectral_with(&query(p), &QuadOptions::default()).map(|e| (e.value, e.error))
    })?;
    for pt in result.points() {
        println!("p={} value={}", pt.p, pt.value);
    }
    let entry = law.map(|l| CatalogEntry {
        law: l,
        row: "spectral".into(),
    });
    let fit = if args.p.is_none() {
        fit_tail(&result, 2.0, None).ok()
    } else {
        None
    };
    if let Some(f) = &fit {
        let class = classify(f.s, f.k, &default_candidates(&[]));
        println!("{} k_hat={:.3}; classified: {class}", fit_line(f), f.k);
    }
    let mut out = Outputs::new(ctx)?;
    out.write(format!("{}.csv", args.name), &sweep_csv(&result)?)?;
    if args.svg {
        let picture = sweep_svg(&args.name, &result, entry.as_ref(), fit.as_ref());
        out.write(format!("{}.svg", args.name), picture.as_bytes())?;
    }
    out.manifest(&args.name, "spectral", &args, seed, start)
}

// ---------------------------------------------------------------------------
// appendix-check

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AppendixArgs {
    /// Log powers m, comma-separated.
    #[arg(long, default_value = "0,1,2")]
    pub m: String,
    /// Values of q, comma-separated.
    #[arg(long, default_value = "1e-2,1e-4,1e-6")]
    pub q: String,
    /// Required relative match of `I_m / log^{m+1}(1/q)` to `1/(m+1)`; reported only when absent.
    #[arg(long)]
    pub ratio_tol: Option<f64>,
    /// Required relative match of the m = 0 integral to its closed form.
    #[arg(long, default_value_t = 1e-10)]
    pub closed_tol: f64,
    #[arg(long, default_value = "appendix")]
    pub name: String,
}

pub fn appendix_check(flags: AppendixArgs, ctx: &Context) -> Result<()> {
    let start = Instant::now();
    let (args, seed) = resolve(flags, ctx, "appendix-check")?;
    let ms: Vec<u32> = args
        .m
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| usage(format!("bad m {t:?}"))))
        .collect::<Result<_>>()?;
    let qs = parse_list(&args.q, "q")?;
    let mut rows = String::from("m,q,integral,ratio_times_m_plus_1,closed_form,closed_rel_err\n");
    let mut failures = Vec::new();
    for &m in &ms {
        for &q in &qs {
            let value = appendix_c_integral(m, q)?;
            let ratio = value / (1.0 / q).ln().powi(m as i32 + 1) * (m + 1) as f64;
            let (closed, err) = if m == 0 {
                let c = appendix_c_closed_form(q);
                (c.to_string(), ((value - c).abs() / c).to_string())
            } else {
                (String::new(), String::new())
            };
            println!("m={m} q={q:e}: integral={value:.10} ratio*(m+1)={ratio:.4}");
            if m == 0 {
                let c = appendix_c_closed_form(q);
                let rel = (value - c).abs() / c;
                println!("  closed form {c:.10}, relative error {rel:.1e}");
                if rel > args.closed_tol {
                    failures.push(format!("m=0 q={q:e}: closed form error {rel:.1e} > {:.1e}", args.closed_tol));
                }
            }
            if let Some(tol) = args.ratio_tol {
                if (ratio - 1.0).abs() > tol {
                    failures.push(format!("m={m} q={q:e}: ratio*(m+1) = {ratio:.4} outside 1 ± {tol}"));
                }
            }
            rows.push_str(&format!("{m},{q},{value},{ratio},{closed},{err}\n"));
        }
    }
    let mut out = Outputs::new(ctx)?;
    out.write(format!("{}.csv", args.name), rows.as_bytes())?;
    out.manifest(&args.name, "appendix-check", &args, seed, start)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(ToleranceNotMet(failures.join("; ")).into())
    }
}
