//! Criterion benchmarks for `moslice-core` live in `benches/`.
