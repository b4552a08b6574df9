//! Shared fixtures for the benchmarks.

use ews_core::{Mesh, MultiIndex, SimConfig, SymbolSpec, TestFunction, VarianceQuery};

/// `-x^2` probed on `[-0.1, 0.1]`.
pub fn tool_query(p: f64) -> VarianceQuery {
    let symbol = SymbolSpec::tool_alpha(2.0).expect("valid alpha");
    let g = TestFunction::indicator_box(vec![-0.1], vec![0.1]).expect("valid box");
    VarianceQuery::new(symbol, g, p, 1.0)
}

/// `-(x + y)` on the unit square.
pub fn square_query(p: f64) -> VarianceQuery {
    let mut coeffs = ews_core::Coefficients::new();
    coeffs.insert(MultiIndex::new(vec![1, 0]), 1.0);
    coeffs.insert(MultiIndex::new(vec![0, 1]), 1.0);
    let symbol = SymbolSpec::polynomial(coeffs).expect("valid polynomial");
    let g = TestFunction::unit_box(1.0, 2).expect("valid box");
    VarianceQuery::new(symbol, g, p, 1.0)
}

pub fn monomial(components: &[u32]) -> MultiIndex {
    MultiIndex::new(components.to_vec())
}

/// Single-replica simulation of `-x^2` on `points` mesh points.
pub fn sim_config(points: usize, nt: u64) -> SimConfig {
    let q = tool_query(-0.1);
    let mesh = Mesh::new(1.0, points, 1).expect("valid mesh");
    SimConfig::new(mesh, q.symbol, q.g, -0.1, 0.1, 0.01, nt)
}
