//! Criterion benchmarks for lemaug live in `benches/`.
