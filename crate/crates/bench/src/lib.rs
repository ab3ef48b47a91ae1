//! Benchmark fixtures live in the benches; this crate has no library API.
