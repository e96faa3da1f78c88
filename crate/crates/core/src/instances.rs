//! The two built-in five-point data sets in the plane, both trained with the
//! mean-squared loss.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{LossConvention, ProblemInstance};

/// Shared labels of both data sets.
pub const LABELS: [f64; 5] = [0.8, -0.1, 0.3, -1.2, 1.0];

/// Non-collinear points whose arrangement has ten full-dimensional regions.
pub fn arrangement_points() -> Vec<Vec<f64>> {
    vec![
        vec![0.2, -0.1],
        vec![1.0, 0.3],
        vec![1.0, 0.0],
        vec![-0.4, 0.9],
        vec![0.5, 0.5],
    ]
}

/// Points for which the minimizer at `lambda = 0.2` has two interior atoms.
pub fn recovery_points() -> Vec<Vec<f64>> {
    vec![
        vec![0.2, -0.1],
        vec![1.0, -2.0],
        vec![1.0, 0.2],
        vec![-0.4, -0.2],
        vec![0.5, 0.5],
    ]
}

/// Regularization used with [`arrangement_points`].
pub const ARRANGEMENT_LAMBDA: f64 = 0.03;
/// Regularization used with [`recovery_points`].
pub const RECOVERY_LAMBDA: f64 = 0.2;

pub fn arrangement_instance() -> ProblemInstance {
    ProblemInstance::new(arrangement_points(), LABELS.to_vec(), ARRANGEMENT_LAMBDA)
        .expect("built-in instance is valid")
        .with_loss(LossConvention::Mean)
}

pub fn recovery_instance() -> ProblemInstance {
    ProblemInstance::new(recovery_points(), LABELS.to_vec(), RECOVERY_LAMBDA)
        .expect("built-in instance is valid")
        .with_loss(LossConvention::Mean)
}

/// The geometric grid of `count` values from `hi` down to `lo`.
pub fn geometric_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count)
            .map(|k| hi * libm::pow(lo / hi, k as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// `count` equispaced values from `lo` to `hi`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}
