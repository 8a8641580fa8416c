//! Criterion benchmarks for the assignment solvers and the E-step live in
//! `benches/`. Run them with `cargo bench -p eqhard-bench`.
