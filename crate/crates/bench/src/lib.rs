//! Criterion benchmarks for corruption kernels, augmentations and metrics;
//! run with `cargo bench -p robustkit-bench`.
