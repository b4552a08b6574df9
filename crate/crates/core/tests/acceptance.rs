//! Acceptance run: one PASS/FAIL line per criterion, with runtime against budget.
//!
//! Exits non-zero when a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use ews_core::noise::{gram_error, noise_increment, rng_for, sample_eigenvalues, sample_haar_basis, NoiseModel};
use ews_core::scaling::{
    default_candidates, fit_loglog, fit_loglog_fixed_k, law_upper_bound, log_spaced_p, relative_change, sweep,
    Classification, FitWindow, LogLogFit, ScalingLaw, Source, SweepPoint, SweepResult,
};
use ews_core::simulate::{ar1_variance, predict_discrete_variance, run, Mesh, Projection, SimConfig};
use ews_core::spectral::{variance_spectral, FrequencyQuery};
use ews_core::symbols::{minimal_support, Coefficients, FrequencySymbol, MultiIndex, SymbolSpec};
use ews_core::{
    appendix_c_closed_form, appendix_c_integral, best_upper_bound, classify, monomial_integral, variance_quadrature,
    Result, TestFunction, VarianceQuery,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

/// Criterion 7 asks for a 5% match of a ratio whose m = 0 value at q = 1e-6 is
/// exactly `1 - (1 - 1/(1+q^-1) - ln(1+q))/ln(1/q)` = 0.9276.
const KNOWN_FAILURES: &[u32] = &[7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn quad_sweep(lo_exp: f64, hi_exp: f64, points: usize, eval: impl Fn(f64) -> Result<f64> + Sync) -> Result<SweepResult> {
    let ps = log_spaced_p(lo_exp, hi_exp, points)?;
    sweep(&ps, Source::Quadrature, |p| eval(p).map(|v| (v, 0.0)))
}

fn fit_last(sweep: &SweepResult, decades: f64) -> Result<LogLogFit> {
    fit_loglog(sweep, FitWindow::smallest_decades(sweep, decades)?)
}

/// `(max - min) / mean` of `value / shape(q)` over the smallest decade of `q`.
fn ratio_spread(sweep: &SweepResult, shape: impl Fn(f64) -> f64) -> Result<f64> {
    let pts = sweep.window(FitWindow::smallest_decades(sweep, 1.0)?);
    let ratios: Vec<f64> = pts.iter().map(|pt| pt.value / shape(-pt.p)).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max - min) / (ratios.iter().sum::<f64>() / ratios.len() as f64))
}

fn tool(alpha: f64) -> SymbolSpec {
    SymbolSpec::tool_alpha(alpha).unwrap()
}

fn unit_interval() -> TestFunction {
    TestFunction::unit_box(1.0, 1).unwrap()
}

fn c1() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for alpha in [0.5, 1.0, 2.0, 5.0] {
        let s = quad_sweep(-9.0, -3.0, 24, |p| {
            variance_quadrature(&VarianceQuery::new(tool(alpha), unit_interval(), p, 1.0))
        })?;
        if alpha < 1.0 {
            let change = relative_change(&s, FitWindow::smallest_decades(&s, 1.0)?)?;
            pass &= change < 0.01;
            parts.push(format!("a=0.5 change={change:.1e}"));
            continue;
        }
        let fit = fit_last(&s, 2.0)?;
        let ok = match alpha as u32 {
            1 => within(fit.k, 1.0, 0.05) && within(fit.s, 0.0, 0.02),
            2 => within(fit.s, -0.5, 0.02),
            _ => within(fit.s, -0.8, 0.02),
        };
        pass &= ok;
        parts.push(format!("a={alpha} s={:.4} k={:.3}", fit.s, fit.k));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c2() -> Result<Outcome> {
    let g = TestFunction::power_indicator(0.25, 1.0)?;
    let s = quad_sweep(-9.0, -3.0, 24, |p| {
        variance_quadrature(&VarianceQuery::new(tool(1.0), g.clone(), p, 1.0))
    })?;
    let fit = fit_last(&s, 2.0)?;
    Ok(outcome(
        within(fit.s, -0.5, 0.02),
        format!("s={:.4} k={:.3} expected -1+(1-2g)/a=-0.5", fit.s, fit.k),
    ))
}

fn monomial_sweep(j: &[u32], eps: f64, lo_exp: f64, hi_exp: f64, points: usize) -> Result<SweepResult> {
    let j = MultiIndex::new(j.to_vec());
    quad_sweep(lo_exp, hi_exp, points, |p| monomial_integral(&j, eps, -p))
}

fn c3() -> Result<Outcome> {
    let wide = monomial_sweep(&[2, 10], 1.0, -8.0, -2.0, 24)?;
    let fit1 = fit_last(&wide, 2.0)?;
    // For eps = 0.1 the monomial stays below eps^12 = 1e-12, so [1e-8, 1e-2] lies
    // entirely on the 1/q side of the crossover; the asymptotic slope needs q << 1e-12.
    let shallow = monomial_sweep(&[2, 10], 0.1, -8.0, -2.0, 24)?;
    let slope_shallow = fit_loglog_fixed_k(&shallow, FitWindow::new(1e-8, 1e-2)?, 0.0)?;
    let deep = monomial_sweep(&[2, 10], 0.1, -26.0, -20.0, 24)?;
    let fit01 = fit_last(&deep, 2.0)?;
    let slope_wide_large_q = fit_loglog_fixed_k(&wide, FitWindow::new(1e-4, 1e-2)?, 0.0)?;
    let pass = within(fit1.s, -0.9, 0.02)
        && within(fit01.s, -0.9, 0.02)
        && within(slope_shallow.s, -1.0, 0.02)
        && slope_wide_large_q.s > slope_shallow.s + 0.02;
    Ok(outcome(
        pass,
        format!(
            "eps=1: s={:.4} on [1e-8,1e-6], slope {:.3} on [1e-4,1e-2]; eps=0.1: slope {:.4} on [1e-8,1e-2], s={:.4} on [1e-26,1e-24]",
            fit1.s, slope_wide_large_q.s, slope_shallow.s, fit01.s
        ),
    ))
}

fn c4() -> Result<Outcome> {
    let s11 = monomial_sweep(&[1, 1], 1.0, -8.0, -2.0, 24)?;
    let spread = ratio_spread(&s11, |q| (1.0 / q).ln().powi(2))?;
    // The (3,3) integral behaves as q^{-2/3} (log(1/q) + b) with b near 1.8, so the
    // log power only settles for q far below 1e-8.
    let s33 = monomial_sweep(&[3, 3], 1.0, -20.0, -8.0, 49)?;
    let fit = fit_last(&s33, 2.0)?;
    let pass = spread < 0.05 && within(fit.s, -2.0 / 3.0, 0.03) && within(fit.k, 1.0, 0.15);
    Ok(outcome(
        pass,
        format!(
            "(1,1) log^2 ratio spread {:.2}%; (3,3) s={:.4} k={:.3} on [1e-20,1e-18]",
            100.0 * spread,
            fit.s,
            fit.k
        ),
    ))
}

fn c5() -> Result<Outcome> {
    let s123 = monomial_sweep(&[1, 2, 3], 1.0, -14.0, -8.0, 25)?;
    let fit = fit_last(&s123, 2.0)?;
    let s111 = monomial_sweep(&[1, 1, 1], 1.0, -8.0, -2.0, 24)?;
    let spread = ratio_spread(&s111, |q| (1.0 / q).ln().powi(3))?;
    Ok(outcome(
        within(fit.s, -2.0 / 3.0, 0.03) && spread < 0.10,
        format!(
            "(1,2,3) s={:.4} k={:.3} on [1e-14,1e-12]; (1,1,1) log^3 ratio spread {:.2}%",
            fit.s,
            fit.k,
            100.0 * spread
        ),
    ))
}

fn c6() -> Result<Outcome> {
    let g = TestFunction::disc(vec![0.0, 0.0], 1.0, true)?;
    let sym = SymbolSpec::radial_2d(2.0)?;
    let s = quad_sweep(-8.0, -6.0, 9, |p| {
        variance_quadrature(&VarianceQuery::new(sym.clone(), g.clone(), p, 1.0))
    })?;
    let ratios: Vec<f64> = s.points().iter().map(|pt| pt.value / (-(-pt.p).ln())).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = (max - min) / min;
    let fit = fit_loglog_fixed_k(&s, FitWindow::new(1e-8, 1e-6)?, 1.0)?;
    let mut coeffs = Coefficients::new();
    coeffs.insert(MultiIndex::new(vec![2, 0]), -1.0);
    coeffs.insert(MultiIndex::new(vec![0, 2]), -1.0);
    let bound = best_upper_bound(&minimal_support(&coeffs), 1.0)?;
    let pass = spread < 0.02 && fit.s > bound.s + 0.4;
    Ok(outcome(
        pass,
        format!(
            "value/log(1/q) spread {:.3}% (ratio {:.5}, pi/8={:.5}); fitted s={:.4} at k=1 vs bound {bound}",
            100.0 * spread,
            ratios[0],
            PI / 8.0,
            fit.s
        ),
    ))
}

fn c7() -> Result<Outcome> {
    let q: f64 = 1e-6;
    let log = (1.0 / q).ln();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in 0..=2u32 {
        let ratio = appendix_c_integral(m, q)? / log.powi(m as i32 + 1);
        let target = 1.0 / (m + 1) as f64;
        let rel = (ratio - target).abs() / target;
        pass &= rel <= 0.05;
        parts.push(format!("m={m} ratio*(m+1)={:.4}", ratio / target));
    }
    let mut worst: f64 = 0.0;
    for q in [1e-2, 1e-4, 1e-6, 1e-9] {
        let exact = appendix_c_closed_form(q);
        worst = worst.max((appendix_c_integral(0, q)? - exact).abs() / exact);
    }
    pass &= worst <= 1e-10;
    parts.push(format!("m=0 closed form rel err {worst:.1e}"));
    Ok(outcome(pass, parts.join("; ")))
}

fn spectral_sweep(symbol: FrequencySymbol, ghat: TestFunction) -> Result<LogLogFit> {
    let s = quad_sweep(-8.0, -2.0, 24, |p| {
        variance_spectral(&FrequencyQuery::new(symbol.clone(), ghat.clone(), p, SQRT_2))
    })?;
    fit_last(&s, 2.0)
}

fn c8() -> Result<Outcome> {
    let m1 = spectral_sweep(FrequencySymbol::Power2m { m: 1 }, unit_interval())?;
    let m2 = spectral_sweep(FrequencySymbol::Power2m { m: 2 }, unit_interval())?;
    let sh1 = spectral_sweep(FrequencySymbol::SwiftHohenberg1D, TestFunction::unit_box(2.0, 1)?)?;
    let disc = TestFunction::disc(vec![0.0, 0.0], SQRT_2, false)?;
    let sh2 = variance_spectral(&FrequencyQuery::new(FrequencySymbol::SwiftHohenberg2D, disc, -1.0, SQRT_2))?;
    let rel = (sh2 - PI * PI / 2.0).abs() / (PI * PI / 2.0);
    let pass = within(m1.s, -0.5, 0.02) && within(m2.s, -0.75, 0.02) && within(sh1.s, -0.5, 0.03) && rel < 1e-4;
    Ok(outcome(
        pass,
        format!(
            "Power2m(1) s={:.4}; Power2m(2) s={:.4}; SH1D s={:.4}; SH2D(p=-1) rel err {rel:.1e}",
            m1.s, m2.s, sh1.s
        ),
    ))
}

fn c9() -> Result<Outcome> {
    let mesh = Mesh::new(1.0, 199, 1)?;
    let h = mesh.spacing();
    let g = TestFunction::indicator_box(vec![-0.1], vec![0.1])?;
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [-1.0, -0.1, -0.01] {
        let mut c = SimConfig::new(mesh, tool(2.0), g.clone(), p, 0.1, 0.01, 200_000);
        c.replicas = 4;
        c.seed = 2024;
        let est = run(&c)?;
        let pred = predict_discrete_variance(&c)?;
        let z = (est.variance - pred) / est.stderr;
        // Unit-variance noise per point is h times the white-noise discretisation, and
        // the midpoint sum covers the union of cells around the support points.
        let cells = TestFunction::indicator_box(vec![-0.1 - h / 2.0], vec![0.1 + h / 2.0])?;
        let quad = variance_quadrature(&VarianceQuery::new(tool(2.0), cells, p, 0.1))?;
        let bias = (pred / h - quad).abs() / quad;
        pass &= z.abs() <= 3.0 && bias <= 0.05;
        parts.push(format!("p={p}: z={z:+.2} bias={:.2}%", 100.0 * bias));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c10() -> Result<Outcome> {
    let mesh = Mesh::new(1.0, 1, 1)?;
    let g = TestFunction::indicator_box(vec![-0.5], vec![0.5])?;
    let mut c = SimConfig::new(mesh, tool(2.0), g, -1.0, 1.0, 0.1, 400_000);
    c.projection = Projection::Unweighted;
    c.replicas = 4;
    c.seed = 2024;
    let est = run(&c)?;
    let exact = ar1_variance(&[-1.0], &[1.0], 1.0, 0.1);
    let z = (est.variance - exact) / est.stderr;
    Ok(outcome(
        z.abs() <= 3.0 && within(exact, 0.47619, 5e-6),
        format!("estimate {:.5} +- {:.5}, exact {exact:.5}, z={z:+.2}", est.variance, est.stderr),
    ))
}

fn c11() -> Result<Outcome> {
    let gram = [4, 64, 199]
        .iter()
        .map(|&m| gram_error(&sample_haar_basis(m, 11)))
        .fold(0.0, f64::max);
    let eig = sample_eigenvalues(10_000, 11);
    let eig_ok = eig.iter().all(|q| (0.5..=2.0).contains(q));

    let model = NoiseModel::sample(4, vec![0, 1, 2, 3], 4, 11)?;
    let dt = 0.01;
    let n = 100_000;
    let mut rng = rng_for(11, 7);
    let mut acc = [[0.0f64; 4]; 4];
    for _ in 0..n {
        let inc = noise_increment(&model, dt, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                acc[i][j] += inc[i] * inc[j];
            }
        }
    }
    let exact = model.support_covariance() * dt;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let scale = (exact[(i, i)] * exact[(j, j)]).sqrt();
            worst = worst.max((acc[i][j] / n as f64 - exact[(i, j)]).abs() / scale);
        }
    }
    Ok(outcome(
        gram <= 1e-12 && eig_ok && worst <= 0.05,
        format!("Gram error {gram:.1e}; eigenvalues in [0.5,2]: {eig_ok}; covariance worst {:.2}%", 100.0 * worst),
    ))
}

fn brute_minimal(keys: &[MultiIndex]) -> BTreeSet<MultiIndex> {
    keys.iter()
        .filter(|j| !keys.iter().any(|k| k != *j && k.componentwise_le(j)))
        .cloned()
        .collect()
}

fn c12() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;

    let mut runner = TestRunner::new(Config {
        cases: 500,
        ..Config::default()
    });
    let maps = (1usize..=3).prop_flat_map(|dim| {
        prop::collection::btree_map(prop::collection::vec(0u32..5, dim), 0.1f64..2.0, 1..=8)
    });
    let r = runner.run(&maps, |m| {
        let coeffs: Coefficients = m.into_iter().map(|(k, v)| (MultiIndex::new(k), v)).collect();
        let keys: Vec<MultiIndex> = coeffs.keys().cloned().collect();
        prop_assert_eq!(minimal_support(&coeffs), brute_minimal(&keys));
        Ok(())
    });
    pass &= r.is_ok();
    parts.push(format!("minimal_support 500 maps: {}", if r.is_ok() { "ok" } else { "FAILED" }));

    let mut perm_ok = true;
    for a in 0..=4u32 {
        for b in 0..=4u32 {
            for c in 0..=4u32 {
                let base = law_upper_bound(&MultiIndex::new(vec![a, b, c])).ok();
                for p in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    perm_ok &= law_upper_bound(&MultiIndex::new(p.to_vec())).ok() == base;
                }
            }
        }
    }
    pass &= perm_ok;
    parts.push(format!("permutation invariance over 125 triples: {perm_ok}"));

    let mut runner = TestRunner::new(Config {
        cases: 256,
        ..Config::default()
    });
    let r = runner.run(&(-0.95f64..0.0, 0u32..=3, -3.0f64..3.0), |(s, k, c)| {
        let pts: Vec<SweepPoint> = log_spaced_p(-9.0, -3.0, 24)
            .unwrap()
            .into_iter()
            .map(|p| {
                let q: f64 = -p;
                let v = c.exp() * q.powf(s) * (-q.ln()).powi(k as i32);
                SweepPoint { p, value: v, stderr: 0.0 }
            })
            .collect();
        let sweep = SweepResult::new(pts, Source::Quadrature).unwrap();
        let fit = fit_loglog(&sweep, FitWindow::new(1e-9, 1e-3).unwrap()).unwrap();
        prop_assert!((fit.s - s).abs() < 1e-6 && (fit.k - k as f64).abs() < 1e-6);
        prop_assert_eq!(classify(fit.s, fit.k, &default_candidates(&[s])), Classification::Law(ScalingLaw::new(s, k)));
        Ok(())
    });
    pass &= r.is_ok();
    parts.push(format!("fit recovery: {}", if r.is_ok() { "ok" } else { "FAILED" }));

    let mut runner = TestRunner::new(Config {
        cases: 64,
        ..Config::default()
    });
    let r = runner.run(
        &(0.3f64..4.0, -6.0f64..-0.5, 0.05f64..5.0, 0.1f64..10.0),
        |(alpha, lp, sigma, c)| {
            let p = -(10f64.powf(lp));
            let base = variance_quadrature(&VarianceQuery::new(tool(alpha), unit_interval(), p, sigma)).unwrap();
            let scaled =
                variance_quadrature(&VarianceQuery::new(tool(alpha), unit_interval(), p, sigma * c)).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-13 * scaled);
            Ok(())
        },
    );
    pass &= r.is_ok();
    parts.push(format!("sigma scaling: {}", if r.is_ok() { "ok" } else { "FAILED" }));
    Ok(outcome(pass, parts.join("; ")))
}

type Criterion = (u32, &'static str, f64, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "Table 1 laws by quadrature", 10.0, c1),
        (2, "Table 2 power-weighted probe", 5.0, c2),
        (3, "2D monomial (2,10) slope and crossover", 60.0, c3),
        (4, "Table 3 log-power cases", 60.0, c4),
        (5, "Table 4 3D spot checks", 300.0, c5),
        (6, "radial log divergence", 60.0, c6),
        (7, "log-power oracle integrals", 60.0, c7),
        (8, "spectral laws", 60.0, c8),
        (9, "simulation vs discrete prediction vs quadrature", 180.0, c9),
        (10, "single-mode AR(1)", 60.0, c10),
        (11, "noise properties", 60.0, c11),
        (12, "property suites", 120.0, c12),
    ];
    let mut unexpected = 0;
    let mut failed = 0;
    let total = Instant::now();
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && secs < budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        let known = !pass && KNOWN_FAILURES.contains(&id);
        println!(
            "{tag} criterion {id:>2} {name} [{secs:.1}s / {budget:.0}s]{}: {detail}",
            if known { " (known)" } else { "" }
        );
        if !pass {
            failed += 1;
            if !known {
                unexpected += 1;
            }
        }
    }
    println!(
        "{} passed, {failed} failed ({unexpected} unexpected) in {:.1}s",
        12 - failed,
        total.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
