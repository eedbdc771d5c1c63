//! `fedhdc validate-costs`: closed-form FLOP and traffic figures for a config,
//! evaluated at the dataset's published size without running anything.

use std::fmt::Write as _;

use fedhdc::cost::{self, Workload};
use fedhdc::Method;
use serde::Serialize;

use crate::compare::format_mb;
use crate::config::ResolvedConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTable {
    pub method: Method,
    pub dataset: String,
    pub points: usize,
    pub input_dim: usize,
    pub classes: usize,
    pub c1: u128,
    pub c2: u128,
    /// One retraining epoch at each width used by the schedule.
    pub c3_full: u128,
    pub c3_sub: u128,
    pub c3_refine: u128,
    pub cost_baseline: u128,
    pub cost_refhdc: u128,
    /// Flops of the configured method.
    pub total_flops: u128,
    pub rounds: usize,
    pub round_uplink_bytes: Vec<u64>,
    pub total_uplink_bytes: u64,
    pub model_size_bytes: u64,
}

/// Evaluate the cost model for `config`, counting traffic over the first
/// `rounds` global epochs (all of them by default).
pub fn cost_table(config: &ResolvedConfig, rounds: Option<usize>) -> CostTable {
    let fed = &config.federation;
    let shape = config.dataset.published_shape();
    let points = config.published_points();
    let input_dim = config.published_input_dim();
    let w = Workload {
        points: points as u128,
        classes: shape.classes as u128,
        input_dim: input_dim as u128,
        local_epochs: fed.local_epochs as u128,
    };
    let (n, c) = (w.points, w.classes);
    let dim = fed.dim as u128;
    let g = fed.global_epochs as u128;
    let cost_baseline = cost::cost_baseline(&w, dim, g);
    let cost_refhdc = cost::cost_refhdc(
        &w,
        dim,
        fed.submodels as u128,
        fed.train_epochs as u128,
        fed.refine_epochs() as u128,
        fed.refine_dim as u128,
    );
    let rounds = rounds.unwrap_or(fed.global_epochs);
    let round_uplink_bytes: Vec<u64> = (1..=rounds)
        .map(|r| {
            cost::round_uplink_bytes(
                fed.clients as u64,
                shape.classes as u64,
                config.round_width(r) as u64,
                fed.traffic_bytes_per_element,
            )
        })
        .collect();
    CostTable {
        method: config.method,
        dataset: config.dataset.name().to_string(),
        points,
        input_dim,
        classes: shape.classes,
        c1: cost::c1(n, dim, w.input_dim),
        c2: cost::c2(n, dim),
        c3_full: cost::c3(n, c, dim),
        c3_sub: cost::c3(n, c, fed.sub_dim() as u128),
        c3_refine: cost::c3(n, c, fed.refine_dim as u128),
        cost_baseline,
        cost_refhdc,
        total_flops: match config.method {
            Method::Baseline => cost_baseline,
            Method::Refhdc => cost_refhdc,
        },
        rounds,
        total_uplink_bytes: round_uplink_bytes.iter().sum(),
        round_uplink_bytes,
        model_size_bytes: cost::model_size_bytes(shape.classes as u64, fed.dim as u64, config.storage_bytes_per_element),
    }
}

impl CostTable {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<24}{v}");
        };
        row("method", self.method.to_string());
        row("dataset", self.dataset.clone());
        row("points", self.points.to_string());
        row("input_dim", self.input_dim.to_string());
        row("classes", self.classes.to_string());
        row("c1", self.c1.to_string());
        row("c2", self.c2.to_string());
        row("c3_full", self.c3_full.to_string());
        row("c3_sub", self.c3_sub.to_string());
        row("c3_refine", self.c3_refine.to_string());
        row("cost_baseline", self.cost_baseline.to_string());
        row("cost_refhdc", self.cost_refhdc.to_string());
        row("rounds", self.rounds.to_string());
        // Per-round traffic is constant within each stage; list the distinct values.
        let mut stages: Vec<(usize, u64)> = Vec::new();
        for (i, &b) in self.round_uplink_bytes.iter().enumerate() {
            if stages.last().map(|&(_, v)| v) != Some(b) {
                stages.push((i + 1, b));
            }
        }
        for (from, bytes) in stages {
            row(&format!("round_uplink[{from}..]"), format!("{bytes} B ({} MB)", format_mb(bytes)));
        }
        row(
            "total_uplink",
            format!("{} B ({} MB)", self.total_uplink_bytes, format_mb(self.total_uplink_bytes)),
        );
        row("model_size", format!("{} B", self.model_size_bytes));
        s
    }
}
