//! Benchmark-only crate; see `benches/identifiability.rs`.
