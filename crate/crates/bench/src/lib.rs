//! Fixture models shared by the benchmarks.

use finsler_core::{MetricModel, PerturbedBase};

pub fn sphere() -> MetricModel {
    MetricModel::RoundSphere { dim: 2, radius: 1.0 }
}

pub fn randers_plane() -> MetricModel {
    MetricModel::RandersFlat { b: vec![0.4, -0.2] }
}

/// A non-Berwald Randers sphere; every quantity goes through the jet path.
pub fn perturbed_sphere() -> MetricModel {
    MetricModel::RandersPerturbed {
        base: PerturbedBase::Sphere { dim: 2, radius: 1.0 },
        eps: 0.2,
        safe_radius: None,
    }
}
