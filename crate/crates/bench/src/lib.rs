//! Criterion benchmarks for the plafem kernels; see `benches/`.
