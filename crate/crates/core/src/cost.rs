//! Closed-form computation and communication costs.
//!
//! FLOP counts follow the usual accounting for the three training phases:
//! projection (`n·D·(2d+1)`), bundling (`n·D`) and one retraining epoch of
//! pairwise distances (`n·C·3·(2D+1)`). All arithmetic is in `u128`.

use serde::{Deserialize, Serialize};

use crate::fedsim::RoundRecord;

/// Projection of `n` points from `d` to `dim` dimensions.
pub fn c1(n: u128, dim: u128, d: u128) -> u128 {
    n * dim * (2 * d + 1)
}

/// Bundling `n` encoded points of width `dim`.
pub fn c2(n: u128, dim: u128) -> u128 {
    n * dim
}

/// One retraining epoch over `n` points against `classes` prototypes.
pub fn c3(n: u128, classes: u128, dim: u128) -> u128 {
    n * classes * 3 * (2 * dim + 1)
}

/// Problem size shared by both cost formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    /// Training points across all clients.
    pub points: u128,
    pub classes: u128,
    /// Encoder input width (RFFM feature count when enabled).
    pub input_dim: u128,
    pub local_epochs: u128,
}

pub fn cost_baseline(w: &Workload, dim: u128, global_epochs: u128) -> u128 {
    c1(w.points, dim, w.input_dim)
        + c2(w.points, dim)
        + w.local_epochs * global_epochs * c3(w.points, w.classes, dim)
}

/// Sub-model training over `train_epochs` rounds at width `dim / submodels`,
/// then `refine_epochs` rounds over `refine_dim` positions.
pub fn cost_refhdc(
    w: &Workload,
    dim: u128,
    submodels: u128,
    train_epochs: u128,
    refine_epochs: u128,
    refine_dim: u128,
) -> u128 {
    let sub_dim = dim / submodels;
    c1(w.points, dim, w.input_dim)
        + c2(w.points, dim)
        + w.local_epochs
            * (train_epochs * c3(w.points, w.classes, sub_dim)
                + refine_epochs * c3(w.points, w.classes, refine_dim))
}

/// Bytes uploaded by `clients` clients sending `width` columns of a C-row model.
pub fn round_uplink_bytes(clients: u64, classes: u64, width: u64, bytes_per_element: u64) -> u64 {
    clients * classes * width * bytes_per_element
}

/// Stored size of a C×D model.
pub fn model_size_bytes(classes: u64, dim: u64, bytes_per_element: u64) -> u64 {
    classes * dim * bytes_per_element
}

/// First global epoch (1-based, as recorded) whose accuracy reaches `target`.
pub fn rounds_to_target(records: &[RoundRecord], target: f64) -> Option<usize> {
    records.iter().find(|r| r.accuracy >= target).map(|r| r.round)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub c1: u128,
    pub c2: u128,
    pub c3_per_epoch: u128,
    pub total_flops: u128,
    pub uplink_bytes_total: u64,
    pub rounds_to_target: Option<usize>,
}
