//! Benchmarks of the solvers live in `benches/solvers.rs`; run them with `cargo bench -p pegfinder-bench`.
