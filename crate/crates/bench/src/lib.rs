//! Criterion benchmarks for the simulation and analysis stages live in `benches/`.
