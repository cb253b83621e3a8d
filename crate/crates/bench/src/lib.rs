//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use reebflow_core::charts::builtin::builtin_cylinder_periodic_z;
use reebflow_core::charts::ContactChart;
use reebflow_core::fields::{families, ScalarField};
use reebflow_core::sampling;

pub fn bench_chart() -> Arc<ContactChart> {
    Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).expect("valid radii"))
}

pub fn bench_field() -> ScalarField {
    let mut rng = sampling::rng(7);
    families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2)
}
