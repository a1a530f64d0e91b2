//! Benchmarks only; run `cargo bench -p nwdro-bench`.
