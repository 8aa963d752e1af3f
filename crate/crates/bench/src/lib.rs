//! Benchmark-only crate; see `benches/hmm.rs`.
