//! Criterion benchmarks for the nlneumann solvers; see `benches/`.
