//! Criterion benchmarks for collarlab; see `benches/pipeline.rs`.
