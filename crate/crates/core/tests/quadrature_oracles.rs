//! Quadrature against independent closed forms and a hypoexponential oracle.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ews_core::quadrature::{monomial_integral_with, QuadOptions};
use ews_core::symbols::{MultiIndex, SymbolSpec};
use ews_core::{monomial_integral, variance_quadrature, Error, TestFunction, VarianceQuery};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `int_{[0,1]^N} dx / (x^j + q)` with all `j_n` distinct and positive.
///
/// Writing `x_n = exp(-E_n)` with `E_n ~ Exp(1)` gives `E[1 / (exp(-T) + q)]` with
/// `T = sum j_n E_n` hypoexponential; its density is a signed sum of exponentials.
/// The remaining 1D integral uses composite Simpson on a log-stretched grid.
fn hypoexponential_oracle(j: &[u32], q: f64) -> f64 {
    let rates: Vec<f64> = j.iter().map(|&v| 1.0 / v as f64).collect();
    let weights: Vec<f64> = (0..rates.len())
        .map(|n| {
            rates
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != n)
                .map(|(_, r)| r / (r - rates[n]))
                .product::<f64>()
                * rates[n]
        })
        .collect();
    let density = |t: f64| -> f64 { rates.iter().zip(&weights).map(|(r, w)| w * (-r * t).exp()).sum() };
    let integrand = |t: f64| density(t) / ((-t).exp() + q);
    let t_max = 80.0 * *j.iter().max().unwrap() as f64;
    let n = 400_000;
    let h = t_max / n as f64;
    let mut sum = integrand(0.0) + integrand(t_max);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(i as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn monomials_match_hypoexponential_oracle() {
    for (j, q) in [
        (vec![1u32, 2], 1e-3),
        (vec![2, 10], 1e-6),
        (vec![1, 2, 3], 1e-4),
        (vec![1, 2, 3], 1e-8),
    ] {
        let oracle = hypoexponential_oracle(&j, q);
        let v = monomial_integral(&MultiIndex::new(j.clone()), 1.0, q).unwrap();
        assert!(rel(v, oracle) < 1e-6, "{j:?} q={q}: {v} vs {oracle}");
    }
}

#[test]
fn monomial_eps_scaling() {
    // x -> eps x maps the integral over [0, eps]^N to eps^N times one over [0,1]^N
    // with q / eps^{|j|}.
    let j = MultiIndex::new(vec![2, 3]);
    let eps: f64 = 0.5;
    let q = 1e-7;
    let direct = monomial_integral(&j, eps, q).unwrap();
    let d = eps.powi(5);
    let scaled = eps * eps / d * monomial_integral(&j, 1.0, q / d).unwrap();
    assert!(rel(direct, scaled) < 1e-6, "{direct} vs {scaled}");
}

#[test]
fn zero_index_has_no_bifurcation_and_constant_value() {
    let v = monomial_integral(&MultiIndex::new(vec![0, 0]), 1.0, 0.5).unwrap();
    assert!(rel(v, 1.0 / 1.5) < 1e-14);
    assert!(matches!(
        ews_core::dimension_reduce(&MultiIndex::new(vec![0, 0]), 1.0),
        Err(Error::NoBifurcation(_))
    ));
}

#[test]
fn budget_exhaustion_is_reported() {
    let opts = QuadOptions {
        max_evals: 500,
        ..QuadOptions::default()
    };
    let r = monomial_integral_with(&MultiIndex::new(vec![1, 2, 3]), 1.0, 1e-10, &opts);
    assert!(matches!(r, Err(Error::NotConverged { .. })), "{r:?}");
}

#[test]
fn analytic_polynomial_matches_midpoint_sum() {
    // Coefficients {2: 1, 3: 1} give f = -x^2 - x^3; checked against a fine midpoint sum.
    let mut c = BTreeMap::new();
    c.insert(2u32, 1.0);
    c.insert(3u32, 1.0);
    let sym = SymbolSpec::polynomial_1d(&c).unwrap();
    let g = TestFunction::unit_box(1.0, 1).unwrap();
    let q = 1e-2;
    let v = variance_quadrature(&VarianceQuery::new(sym, g, -q, 2f64.sqrt())).unwrap();
    let n = 2_000_000;
    let h = 1.0 / n as f64;
    let sum: f64 = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            1.0 / (x * x + x * x * x + q)
        })
        .sum::<f64>()
        * h;
    assert!(rel(v, sum) < 1e-8, "{v} vs {sum}");
}

#[test]
fn radial_disc_closed_form() {
    // int over the disc of radius R of 1/(|x|^2 + q) = pi ln(1 + R^2/q).
    let sym = SymbolSpec::radial_2d(2.0).unwrap();
    let g = TestFunction::disc(vec![0.0, 0.0], 1.0, false).unwrap();
    for q in [1.0, 1e-3, 1e-9] {
        let v = variance_quadrature(&VarianceQuery::new(sym.clone(), g.clone(), -q, 2f64.sqrt())).unwrap();
        let want = PI * (1.0 + 1.0 / q).ln();
        assert!(rel(v, want) < 1e-6, "q={q}: {v} vs {want}");
    }
}

#[test]
fn radial_quarter_disc() {
    let sym = SymbolSpec::radial_2d(2.0).unwrap();
    let g = TestFunction::disc(vec![0.0, 0.0], 1.0, true).unwrap();
    let v = variance_quadrature(&VarianceQuery::new(sym, g, -0.01, 2f64.sqrt())).unwrap();
    let want = PI / 4.0 * (1.01f64.ln() - 0.01f64.ln());
    assert!(rel(v, want) < 1e-6, "{v} vs {want}");
    assert!((v - 3.6247).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tool_alpha_two_is_arctan(lq in -10.0f64..0.0, eps in 0.05f64..1.0) {
        let q = 10f64.powf(lq);
        let g = TestFunction::unit_box(eps, 1).unwrap();
        let sym = SymbolSpec::tool_alpha(2.0).unwrap();
        let v = variance_quadrature(&VarianceQuery::new(sym, g, -q, 2f64.sqrt())).unwrap();
        let want = (eps / q.sqrt()).atan() / q.sqrt();
        prop_assert!(rel(v, want) < 1e-8, "{} vs {}", v, want);
    }

    #[test]
    fn variance_decreases_in_distance_from_bifurcation(alpha in 0.3f64..4.0, lq in -8.0f64..-1.0) {
        let q = 10f64.powf(lq);
        let sym = SymbolSpec::tool_alpha(alpha).unwrap();
        let g = TestFunction::unit_box(1.0, 1).unwrap();
        let near = variance_quadrature(&VarianceQuery::new(sym.clone(), g.clone(), -q, 1.0)).unwrap();
        let far = variance_quadrature(&VarianceQuery::new(sym, g, -2.0 * q, 1.0)).unwrap();
        prop_assert!(near > far);
    }
}
