//! Benchmarks for the brownderiv kernels live in `benches/`.
