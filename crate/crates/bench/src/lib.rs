//! Criterion benchmarks for the routing simulator; see `benches/`.
