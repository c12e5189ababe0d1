//! Criterion benchmarks for noisyloss; see `benches/`.
