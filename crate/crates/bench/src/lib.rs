//! Criterion benchmarks for `cusp-eta`; see `benches/spectral.rs`.
