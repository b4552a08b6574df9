//! Implicit Euler–Maruyama simulation of `du = (f + p) u dt + sigma dW` on a uniform
//! mesh, and the stationary variance of the projection `<u, g>`.
//!
//! The drift is diagonal, so mesh points off the support of `g` evolve independently
//! of the projection. Only support points are integrated.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{rng_for, NoiseModel, NoiseSpec, REPLICA_STREAM_BASE};
use crate::quadrature::TestFunction;
use crate::symbols::SymbolSpec;

pub const BATCHES: usize = 32;
/// Target decay of the initial transient over the burn-in.
const BURN_IN_DECAY: f64 = 1e-4;

/// Interior points `r_n = -L + 2nL/(N+1)`, `n = 1..N`, on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl Mesh {
    pub fn new(half_width: f64, points: usize, dim: usize) -> Result<Self> {
        let mesh = Mesh {
            half_width,
            points,
            dim,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::Config(format!("mesh half-width must be positive, got {}", self.half_width)));
        }
        if self.points == 0 {
            return Err(Error::Config("mesh needs at least one point".into()));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::Config(format!("simulation supports dim 1 or 2, got {}", self.dim)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points + 1) as f64
    }

    /// Coordinate of 0-based point `i` along an axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        // One rounding, so symmetric points and box edges like 0.1 come out exact.
        let num = 2.0 * (i + 1) as f64 - (self.points + 1) as f64;
        self.half_width * (num / (self.points + 1) as f64)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    /// Point of flat index `n`; axis 0 varies slowest.
    pub fn point(&self, n: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.coordinate(n)],
            _ => vec![self.coordinate(n / self.points), self.coordinate(n % self.points)],
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }
}

/// Projection convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `h^dim sum g(r_n) u_n`, approximating the L2 inner product.
    #[default]
    Weighted,
    /// `sum g(r_n) u_n`.
    Unweighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mesh: Mesh,
    pub symbol: SymbolSpec,
    pub g: TestFunction,
    pub p: f64,
    pub sigma: f64,
    pub dt: f64,
    pub nt: u64,
    /// Steps discarded before recording; chosen from the slowest mode when absent.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default = "identity")]
    pub noise: NoiseSpec,
    /// Initial state on the full mesh; zero when absent.
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub projection: Projection,
}

fn identity() -> NoiseSpec {
    NoiseSpec::Identity
}

impl SimConfig {
    /// Identity noise, one replica, automatic burn-in, zero start.
    pub fn new(mesh: Mesh, symbol: SymbolSpec, g: TestFunction, p: f64, sigma: f64, dt: f64, nt: u64) -> Self {
        SimConfig {
            mesh,
            symbol,
            g,
            p,
            sigma,
            dt,
            nt,
            burn_in: None,
            noise: NoiseSpec::Identity,
            u0: None,
            seed: 0,
            replicas: 1,
            projection: Projection::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Time average of the projection, pooled over replicas.
    pub mean: f64,
    /// Stationary second moment of the projection (its mean is zero), averaged over replicas.
    pub variance: f64,
    /// `max(within, across)`.
    pub stderr: f64,
    /// Batch-means standard error pooled over replicas.
    pub within_stderr: f64,
    /// Standard deviation of replica variances over `sqrt(replicas)`; zero for one replica.
    pub across_stderr: f64,
    pub effective_samples: f64,
    /// Standard deviation of `log10` of the replica variances.
    pub log10_spread: f64,
    pub replica_variances: Vec<f64>,
    pub burn_in: u64,
    pub recorded_steps: u64,
}

/// One implicit Euler–Maruyama step `(u + sigma inc) / (1 - drift dt)`.
pub fn step(u: &[f64], drift: &[f64], dt: f64, increment: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if u.len() != drift.len() || u.len() != increment.len() {
        return Err(Error::arg("state, drift and increment lengths differ"));
    }
    u.iter()
        .zip(drift)
        .zip(increment)
        .map(|((u, d), inc)| {
            let denom = 1.0 - d * dt;
            if denom <= 0.0 {
                Err(Error::Config(format!("1 - drift*dt = {denom} is not positive")))
            } else {
                Ok((u + sigma * inc) / denom)
            }
        })
        .collect()
}

/// `h^dim sum g(r_n) u(r_n)` over the mesh.
pub fn project(u: &[f64], g: &TestFunction, mesh: &Mesh) -> Result<f64> {
    project_with(u, g, mesh, Projection::Weighted)
}

pub fn project_with(u: &[f64], g: &TestFunction, mesh: &Mesh, projection: Projection) -> Result<f64> {
    if u.len() != mesh.len() {
        return Err(Error::arg(format!("state has {} entries, mesh has {}", u.len(), mesh.len())));
    }
    let (support, weights) = support_weights(g, mesh, projection)?;
    Ok(support.iter().zip(&weights).map(|(&i, w)| w * u[i]).sum())
}

/// Mesh indices where `g` is nonzero, with their projection weights.
pub fn support_weights(g: &TestFunction, mesh: &Mesh, projection: Projection) -> Result<(Vec<usize>, Vec<f64>)> {
    if g.dim() != mesh.dim {
        return Err(Error::arg(format!("test function has dim {}, mesh has dim {}", g.dim(), mesh.dim)));
    }
    let scale = match projection {
        Projection::Weighted => mesh.cell_volume(),
        Projection::Unweighted => 1.0,
    };
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for n in 0..mesh.len() {
        let v = g.value(&mesh.point(n));
        if v != 0.0 {
            support.push(n);
            weights.push(scale * v);
        }
    }
    if support.is_empty() {
        return Err(Error::arg("support of g contains no mesh point"));
    }
    Ok((support, weights))
}

/// Everything a replica needs, resolved once from a config.
struct Prepared {
    support: Vec<usize>,
    weights: Vec<f64>,
    /// `f(r_n) + p` on the support.
    drift: Vec<f64>,
    /// `1 / (1 - drift dt)`.
    decay: Vec<f64>,
    noise: Option<NoiseModel>,
    u0: Vec<f64>,
    burn_in: u64,
}

fn prepare(config: &SimConfig) -> Result<Prepared> {
    config.mesh.validate()?;
    config.g.validate()?;
    if !(config.p < 0.0) {
        return Err(Error::arg(format!("p must be negative, got {}", config.p)));
    }
    if !(config.sigma >= 0.0) || !config.sigma.is_finite() {
        return Err(Error::arg(format!("sigma must be non-negative, got {}", config.sigma)));
    }
    if !(config.dt > 0.0) || !config.dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {}", config.dt)));
    }
    if config.replicas == 0 {
        return Err(Error::Config("replicas must be at least 1".into()));
    }
    if config.symbol.dim() != config.mesh.dim {
        return Err(Error::arg(format!(
            "symbol has dim {}, mesh has dim {}",
            config.symbol.dim(),
            config.mesh.dim
        )));
    }
    let (support, weights) = support_weights(&config.g, &config.mesh, config.projection)?;
    let mut drift = Vec::with_capacity(support.len());
    for &n in &support {
        let x = config.mesh.point(n);
        let d = config.symbol.eval(&x)? + config.p;
        if !(d < 0.0) {
            return Err(Error::Config(format!("f + p = {d} is not negative at mesh point {x:?}")));
        }
        drift.push(d);
    }
    let decay: Vec<f64> = drift.iter().map(|d| 1.0 / (1.0 - d * config.dt)).collect();

    let noise = match config.noise {
        NoiseSpec::Identity => None,
        NoiseSpec::Rank { m } => Some(NoiseModel::sample(m, support.clone(), config.mesh.len(), config.seed)?),
    };
    let u0 = match &config.u0 {
        None => vec![0.0; support.len()],
        Some(u) if u.len() == config.mesh.len() => support.iter().map(|&n| u[n]).collect(),
        Some(u) => {
            return Err(Error::Config(format!(
                "u0 has {} entries, mesh has {}",
                u.len(),
                config.mesh.len()
            )))
        }
    };
    let burn_in = match config.burn_in {
        Some(b) => b,
        None => default_burn_in(&drift, config.dt),
    };
    Ok(Prepared {
        support,
        weights,
        drift,
        decay,
        noise,
        u0,
        burn_in,
    })
}

/// Schedule checks needed only when time stepping.
fn check_schedule(config: &SimConfig, prep: &Prepared) -> Result<()> {
    let burn_in = prep.burn_in;
    if burn_in >= config.nt {
        return Err(Error::Config(format!("burn-in {burn_in} must be below nt {}", config.nt)));
    }
    if config.nt - burn_in < BATCHES as u64 {
        return Err(Error::Config(format!(
            "need at least {BATCHES} recorded steps, have {}",
            config.nt - burn_in
        )));
    }
    Ok(())
}

/// Steps after which the slowest mode's squared amplitude has decayed below 1e-4.
///
/// Uses the discrete decay factor `1/(1 + |lambda| dt)`, which is never faster than
/// `exp(-|lambda| dt)`, so the continuous-time criterion holds as well.
pub fn default_burn_in(drift: &[f64], dt: f64) -> u64 {
    let slowest = drift.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
    let per_step = (1.0 + slowest * dt).ln();
    (-BURN_IN_DECAY.ln() / (2.0 * per_step)).ceil() as u64
}

#[derive(Debug, Clone)]
struct ReplicaStats {
    variance: f64,
    batch_stderr: f64,
    mean: f64,
    effective: f64,
    recorded: u64,
}

/// Trace sink and thinning interval.
type Trace<'a> = (&'a mut dyn FnMut(u64, f64), u64);

fn run_replica(
    config: &SimConfig,
    prep: &Prepared,
    replica: usize,
    mut trace: Option<Trace<'_>>,
) -> ReplicaStats {
    let mut rng = rng_for(config.seed, REPLICA_STREAM_BASE + replica as u64);
    let mut u = prep.u0.clone();
    let mut inc = vec![0.0; u.len()];
    let root_dt = config.dt.sqrt();
    let recorded = config.nt - prep.burn_in;
    let batch_len = recorded / BATCHES as u64;
    let used = batch_len * BATCHES as u64;

    let mut batch = [0.0f64; BATCHES];
    let (mut sum, mut sum2, mut sum4) = (0.0, 0.0, 0.0);
    for i in 0..config.nt {
        match &prep.noise {
            None => {
                for v in inc.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *v = root_dt * xi;
                }
            }
            Some(model) => {
                inc.iter_mut().for_each(|v| *v = 0.0);
                model.add_support_increment(config.dt, 1.0, &mut rng, &mut inc);
            }
        }
        let mut proj = 0.0;
        for ((u, a), (d, w)) in u.iter_mut().zip(&prep.decay).zip(inc.iter().zip(&prep.weights)) {
            *u = (*u + config.sigma * d) * a;
            proj += w * *u;
        }
        if let Some((f, thin)) = trace.as_mut() {
            if (i + 1) % *thin == 0 {
                f(i + 1, proj);
            }
        }
        if i < prep.burn_in {
            continue;
        }
        let k = i - prep.burn_in;
        if k >= used {
            continue;
        }
        let sq = proj * proj;
        sum += proj;
        sum2 += sq;
        sum4 += sq * sq;
        batch[(k / batch_len) as usize] += sq;
    }
    let n = used as f64;
    let variance = sum2 / n;
    let means: Vec<f64> = batch.iter().map(|b| b / batch_len as f64).collect();
    let batch_var = sample_variance(&means);
    let batch_stderr = (batch_var / BATCHES as f64).sqrt();
    let single_var = (sum4 / n - variance * variance).max(0.0);
    let effective = if batch_stderr > 0.0 {
        (single_var / (batch_stderr * batch_stderr)).min(n)
    } else {
        n
    };
    ReplicaStats {
        variance,
        batch_stderr,
        mean: sum / n,
        effective,
        recorded: used,
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn aggregate(stats: &[ReplicaStats], burn_in: u64) -> VarianceEstimate {
    let r = stats.len() as f64;
    let replica_variances: Vec<f64> = stats.iter().map(|s| s.variance).collect();
    let variance = replica_variances.iter().sum::<f64>() / r;
    let within = stats.iter().map(|s| s.batch_stderr.powi(2)).sum::<f64>().sqrt() / r;
    let across = (sample_variance(&replica_variances) / r).sqrt();
    let logs: Vec<f64> = replica_variances
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| v.log10())
        .collect();
    VarianceEstimate {
        mean: stats.iter().map(|s| s.mean).sum::<f64>() / r,
        variance,
        stderr: within.max(across),
        within_stderr: within,
        across_stderr: across,
        effective_samples: stats.iter().map(|s| s.effective).sum(),
        log10_spread: sample_variance(&logs).sqrt(),
        replica_variances,
        burn_in,
        recorded_steps: stats[0].recorded,
    }
}

/// Runs all replicas in parallel and aggregates their variance estimates.
pub fn run(config: &SimConfig) -> Result<VarianceEstimate> {
    let prep = prepare(config)?;
    check_schedule(config, &prep)?;
    let stats: Vec<ReplicaStats> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, &prep, r, None))
        .collect();
    Ok(aggregate(&stats, prep.burn_in))
}

/// Like [`run`], additionally passing `(step, proj)` of replica 0 to `sink` every
/// `thin` steps, burn-in included.
pub fn run_with_trace(config: &SimConfig, thin: u64, sink: &mut (dyn FnMut(u64, f64) + Send)) -> Result<VarianceEstimate> {
    if thin == 0 {
        return Err(Error::arg("thinning must be at least 1"));
    }
    let prep = prepare(config)?;
    check_schedule(config, &prep)?;
    let (first, rest) = rayon::join(
        || run_replica(config, &prep, 0, Some((sink, thin))),
        || {
            (1..config.replicas)
                .into_par_iter()
                .map(|r| run_replica(config, &prep, r, None))
                .collect::<Vec<_>>()
        },
    );
    let mut stats = vec![first];
    stats.extend(rest);
    Ok(aggregate(&stats, prep.burn_in))
}

/// Stationary second moment of `sum w_n u_n` for independent AR(1) modes
/// `u' = (u + sigma sqrt(dt) xi) / (1 - lambda dt)`.
pub fn ar1_variance(lambdas: &[f64], weights: &[f64], sigma: f64, dt: f64) -> f64 {
    lambdas
        .iter()
        .zip(weights)
        .map(|(l, w)| w * w * sigma * sigma / (2.0 * l.abs() + l * l * dt))
        .sum()
}

/// Exact stationary variance of the projected discrete chain.
///
/// With `a_n = 1/(1 - lambda_n dt)` and noise covariance `dt C`, the stationary
/// covariance solves `S = a (S + sigma^2 dt C) a`, so
/// `S_nm = a_n a_m sigma^2 dt C_nm / (1 - a_n a_m)`.
pub fn predict_discrete_variance(config: &SimConfig) -> Result<f64> {
    let prep = prepare(config)?;
    let s2 = config.sigma * config.sigma;
    Ok(match &prep.noise {
        None => ar1_variance(&prep.drift, &prep.weights, config.sigma, config.dt),
        Some(model) => {
            let c: DMatrix<f64> = model.support_covariance();
            let n = prep.support.len();
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let aa = prep.decay[i] * prep.decay[j];
                    total += prep.weights[i] * prep.weights[j] * aa * s2 * config.dt * c[(i, j)] / (1.0 - aa);
                }
            }
            total
        }
    })
}
