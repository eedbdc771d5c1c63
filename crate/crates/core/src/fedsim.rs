//! Deterministic single-process federated training.
//!
//! Two schedules are simulated over pre-encoded data:
//!
//! * **Baseline**: FedAvg over the full D-dimensional model. Round 1 bundles
//!   local data; every round runs `L` local retraining epochs per client and
//!   averages the client models.
//! * **Sub-model training and refining**: `M` sub-models of width `D/M` are
//!   trained one after another on consecutive column slices of the shared
//!   encoding (`G_T/M` rounds each), then concatenated. Each remaining round
//!   the server draws `D0` positions; clients retrain and upload only those
//!   columns, and the server averages them.
//!
//! Clients train concurrently, but every client owns its state, each visits
//! its rows in a fixed seeded order, and aggregation reduces in client-index
//! order, so records do not depend on thread count.

use std::fmt;
use std::time::Instant;

use ndarray::{concatenate as nd_concat, s, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost;
use crate::datasets::{partition, ClientShard, PartitionMode, PartitionSpec};
use crate::error::{Error, Result};
use crate::model::{PositionSubset, PrototypeModel};
use crate::seed::{self, Purpose};

/// Tolerance for columns that every client must hold identically.
pub const SHARED_COLUMN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Baseline,
    Refhdc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::Refhdc => "refhdc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// N
    pub clients: usize,
    /// D, the full model width.
    pub dim: usize,
    /// M; ignored by the baseline.
    pub submodels: usize,
    /// D0; ignored by the baseline.
    pub refine_dim: usize,
    /// G
    pub global_epochs: usize,
    /// G_T; ignored by the baseline.
    pub train_epochs: usize,
    /// L
    pub local_epochs: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub partition: PartitionMode,
    pub classes_per_client: usize,
    pub traffic_bytes_per_element: u64,
}

impl FederationConfig {
    pub fn sub_dim(&self) -> usize {
        self.dim / self.submodels.max(1)
    }

    /// G_R = G - G_T
    pub fn refine_epochs(&self) -> usize {
        self.global_epochs.saturating_sub(self.train_epochs)
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec {
            clients: self.clients,
            mode: self.partition,
            seed: self.master_seed,
            classes_per_client: self.classes_per_client,
        }
    }

    /// Check every constraint `method` relies on; messages name the field.
    pub fn validate(&self, method: Method) -> Result<()> {
        let mut problems = Vec::new();
        if self.clients == 0 {
            problems.push("clients: must be at least 1".to_string());
        }
        if self.dim == 0 {
            problems.push("dim: must be at least 1".to_string());
        }
        if self.local_epochs == 0 {
            problems.push("local_epochs: must be at least 1".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            problems.push(format!("alpha: must be in (0, 1], got {}", self.alpha));
        }
        if self.traffic_bytes_per_element == 0 {
            problems.push("traffic_bytes_per_element: must be positive".to_string());
        }
        if self.partition == PartitionMode::NonIid && self.classes_per_client == 0 {
            problems.push("classes_per_client: must be at least 1".to_string());
        }
        if method == Method::Refhdc {
            if self.submodels == 0 {
                problems.push("submodels: must be at least 1".to_string());
            } else {
                if !self.dim.is_multiple_of(self.submodels) {
                    problems.push(format!(
                        "submodels: {} does not divide dim {}",
                        self.submodels, self.dim
                    ));
                }
                if !self.train_epochs.is_multiple_of(self.submodels) {
                    problems.push(format!(
                        "train_epochs: {} is not a multiple of submodels {}",
                        self.train_epochs, self.submodels
                    ));
                }
                if self.global_epochs > 0 && self.train_epochs < self.submodels {
                    problems.push(format!(
                        "train_epochs: {} leaves some of the {} sub-models untrained",
                        self.train_epochs, self.submodels
                    ));
                }
            }
            if self.train_epochs > self.global_epochs {
                problems.push(format!(
                    "train_epochs: {} exceeds global_epochs {}",
                    self.train_epochs, self.global_epochs
                ));
            }
            if self.refine_dim == 0 || self.refine_dim > self.dim {
                problems.push(format!(
                    "refine_dim: must be in [1, {}], got {}",
                    self.dim, self.refine_dim
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Stage {
    /// Training sub-model `substage` (always 0 for the baseline).
    Train { substage: usize },
    Refine,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Train { substage } => write!(f, "train-{substage}"),
            Stage::Refine => f.write_str("refine"),
        }
    }
}

/// Telemetry for one global epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based global epoch.
    pub round: usize,
    pub stage: Stage,
    /// Test accuracy of the model used for inference after this round.
    pub accuracy: f64,
    pub uplink_bytes: u64,
    pub cum_uplink_bytes: u64,
    pub cum_flops: u128,
    /// Wall-clock duration of the round.
    pub seconds: f64,
}

/// Training and test sets already mapped to the full D-dimensional HD space.
#[derive(Debug, Clone)]
pub struct EncodedData {
    pub train: Array2<f64>,
    pub train_labels: Vec<usize>,
    pub test: Array2<f64>,
    pub test_labels: Vec<usize>,
    pub class_count: usize,
    /// Width of the encoder input (for cost accounting).
    pub input_dim: usize,
}

impl EncodedData {
    fn check(&self, dim: usize) -> Result<()> {
        if self.train.ncols() != dim || self.test.ncols() != dim {
            return Err(Error::invalid(format!(
                "encoded data width {} does not match model dimension {dim}",
                self.train.ncols()
            )));
        }
        if self.train.nrows() != self.train_labels.len() || self.test.nrows() != self.test_labels.len() {
            return Err(Error::invalid("encoded rows and labels differ in count"));
        }
        Ok(())
    }
}

/// One participant: its shard and the fixed order it visits its rows in.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub shard: ClientShard,
    pub order: Vec<usize>,
}

/// Seeded visiting order of a client's rows, fixed for the whole run.
pub fn client_order(master_seed: u64, shard: &ClientShard) -> Vec<usize> {
    let mut order = shard.rows.clone();
    let mut rng = seed::derived_rng(master_seed, Purpose::ClientOrder, shard.client_id as u64);
    order.shuffle(&mut rng);
    order
}

pub fn make_clients(config: &FederationConfig, labels: &[usize], class_count: usize) -> Result<Vec<ClientState>> {
    let shards = partition(labels, class_count, &config.partition_spec())?;
    Ok(shards
        .into_iter()
        .map(|shard| ClientState {
            client_id: shard.client_id,
            order: client_order(config.master_seed, &shard),
            shard,
        })
        .collect())
}

/// Element-wise mean of the client models, summed in list order.
///
/// With a subset only those columns are averaged; every other column must be
/// identical across clients (within [`SHARED_COLUMN_TOLERANCE`]) and is taken
/// from the first model.
pub fn aggregate(models: &[PrototypeModel], subset: Option<&PositionSubset>) -> Result<PrototypeModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::protocol("aggregate needs at least one model"))?;
    let shape = first.prototypes().dim();
    if let Some(bad) = models.iter().position(|m| m.prototypes().dim() != shape) {
        return Err(Error::protocol(format!(
            "model {bad} has shape {:?}, expected {shape:?}",
            models[bad].prototypes().dim()
        )));
    }
    let n = models.len() as f64;
    match subset {
        None => {
            let mut sum = first.prototypes().to_owned();
            for m in &models[1..] {
                sum += &m.prototypes();
            }
            if models.len() > 1 {
                sum.mapv_inplace(|v| v / n);
            }
            PrototypeModel::from_matrix(sum)
        }
        Some(s) => {
            if s.indices().last().is_some_and(|&j| j >= shape.1) {
                return Err(Error::protocol("position subset exceeds model width"));
            }
            let reference = first.prototypes();
            for (k, m) in models.iter().enumerate().skip(1) {
                let p = m.prototypes();
                for j in (0..shape.1).filter(|j| !s.contains(*j)) {
                    for c in 0..shape.0 {
                        if (p[[c, j]] - reference[[c, j]]).abs() > SHARED_COLUMN_TOLERANCE {
                            return Err(Error::protocol(format!(
                                "client {k} changed column {j} outside the refined positions"
                            )));
                        }
                    }
                }
            }
            let mut out = reference.to_owned();
            for &j in s.indices() {
                for c in 0..shape.0 {
                    let mut acc = reference[[c, j]];
                    for m in &models[1..] {
                        acc += m.prototypes()[[c, j]];
                    }
                    out[[c, j]] = if models.len() > 1 { acc / n } else { acc };
                }
            }
            PrototypeModel::from_matrix(out)
        }
    }
}

/// Column-wise concatenation of sub-models in order.
pub fn concatenate(submodels: &[PrototypeModel]) -> Result<PrototypeModel> {
    let first = submodels
        .first()
        .ok_or_else(|| Error::protocol("concatenate needs at least one sub-model"))?;
    if let Some(bad) = submodels
        .iter()
        .position(|m| m.class_count() != first.class_count())
    {
        return Err(Error::protocol(format!(
            "sub-model {bad} has {} classes, expected {}",
            submodels[bad].class_count(),
            first.class_count()
        )));
    }
    let views: Vec<ArrayView2<'_, f64>> = submodels.iter().map(|m| m.prototypes()).collect();
    PrototypeModel::from_matrix(nd_concat(Axis(1), &views).expect("equal row counts"))
}

/// Server-drawn refining positions for `round`: `refine_dim` distinct columns
/// out of `dim`, uniform without replacement, sorted.
pub fn sample_positions(master_seed: u64, round: u64, dim: usize, refine_dim: usize) -> Result<PositionSubset> {
    if refine_dim == 0 || refine_dim > dim {
        return Err(Error::invalid(format!(
            "refine_dim must be in [1, {dim}], got {refine_dim}"
        )));
    }
    if refine_dim == dim {
        return Ok(PositionSubset::full(dim));
    }
    let mut rng = seed::derived_rng(master_seed, Purpose::RefinePositions, round);
    let mut picked = index::sample(&mut rng, dim, refine_dim).into_vec();
    picked.sort_unstable();
    PositionSubset::new(picked, dim)
}

/// Records plus the final inference model.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RoundRecord>,
    pub model: PrototypeModel,
}

struct Ledger {
    records: Vec<RoundRecord>,
    cum_uplink: u64,
    cum_flops: u128,
    clock: Instant,
}

impl Ledger {
    fn new() -> Self {
        Ledger {
            records: Vec::new(),
            cum_uplink: 0,
            cum_flops: 0,
            clock: Instant::now(),
        }
    }

    fn push(&mut self, stage: Stage, accuracy: f64, uplink: u64, flops: u128) {
        self.cum_uplink += uplink;
        self.cum_flops += flops;
        let round = self.records.len() + 1;
        log::info!("round {round} [{stage}] accuracy {accuracy:.4}");
        self.records.push(RoundRecord {
            round,
            stage,
            accuracy,
            uplink_bytes: uplink,
            cum_uplink_bytes: self.cum_uplink,
            cum_flops: self.cum_flops,
            seconds: self.clock.elapsed().as_secs_f64(),
        });
        self.clock = Instant::now();
    }
}

/// Everything a client round needs besides its own state.
struct RoundPlan<'a> {
    data: ArrayView2<'a, f64>,
    labels: &'a [usize],
    class_count: usize,
    local_epochs: usize,
    alpha: f64,
    subset: Option<&'a PositionSubset>,
}

fn local_round(plan: &RoundPlan<'_>, client: &ClientState, start: Option<&PrototypeModel>) -> Result<PrototypeModel> {
    let mut model = match start {
        Some(global) => global.clone(),
        None => PrototypeModel::bundle_ordered(
            plan.data,
            plan.labels,
            &client.order,
            plan.class_count,
            plan.alpha,
        )?,
    };
    for _ in 0..plan.local_epochs {
        model.retrain_epoch_ordered(plan.data, plan.labels, &client.order, plan.alpha, plan.subset)?;
    }
    Ok(model)
}

fn federated_round(
    plan: &RoundPlan<'_>,
    clients: &[ClientState],
    start: Option<&PrototypeModel>,
) -> Result<PrototypeModel> {
    let locals = clients
        .par_iter()
        .map(|c| local_round(plan, c, start))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&locals, plan.subset)
}

fn evaluate(model: &PrototypeModel, data: &EncodedData) -> Result<f64> {
    Ok(model.accuracy(data.test.view(), &data.test_labels, None)?.fraction())
}

/// Baseline federated HDC over the full model width.
pub fn run_baseline(config: &FederationConfig, data: &EncodedData) -> Result<RunOutcome> {
    config.validate(Method::Baseline)?;
    data.check(config.dim)?;
    let clients = make_clients(config, &data.train_labels, data.class_count)?;
    let mut ledger = Ledger::new();
    let mut canvas = Array2::zeros((data.class_count, config.dim));
    let model = train_block(
        config,
        data,
        &clients,
        0,
        config.dim,
        config.global_epochs,
        &mut ledger,
        &mut canvas,
    )?;
    Ok(RunOutcome {
        records: ledger.records,
        model,
    })
}

/// Sub-model training followed by federated refining of the concatenation.
///
/// During training, accuracy is measured on the concatenation of every
/// sub-model trained so far, with untrained blocks left at zero.
pub fn run_refhdc(config: &FederationConfig, data: &EncodedData) -> Result<RunOutcome> {
    config.validate(Method::Refhdc)?;
    data.check(config.dim)?;
    if config.global_epochs == 0 {
        return Ok(RunOutcome {
            records: Vec::new(),
            model: PrototypeModel::zeros(data.class_count, config.dim),
        });
    }
    let clients = make_clients(config, &data.train_labels, data.class_count)?;
    let width = config.sub_dim();
    let per_substage = config.train_epochs / config.submodels;
    let mut ledger = Ledger::new();
    let mut canvas = Array2::zeros((data.class_count, config.dim));
    let submodels = (0..config.submodels)
        .map(|m| {
            train_block(
                config,
                data,
                &clients,
                m,
                width,
                per_substage,
                &mut ledger,
                &mut canvas,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = concatenate(&submodels)?;

    let n = data.train.nrows() as u128;
    let c = data.class_count as u128;
    let uplink = cost::round_uplink_bytes(
        config.clients as u64,
        data.class_count as u64,
        config.refine_dim as u64,
        config.traffic_bytes_per_element,
    );
    let flops = config.local_epochs as u128 * cost::c3(n, c, config.refine_dim as u128);
    for round in config.train_epochs + 1..=config.global_epochs {
        let subset = sample_positions(config.master_seed, round as u64, config.dim, config.refine_dim)?;
        let plan = RoundPlan {
            data: data.train.view(),
            labels: &data.train_labels,
            class_count: data.class_count,
            local_epochs: config.local_epochs,
            alpha: config.alpha,
            subset: Some(&subset),
        };
        model = federated_round(&plan, &clients, Some(&model))?;
        let accuracy = evaluate(&model, data)?;
        ledger.push(Stage::Refine, accuracy, uplink, flops);
    }
    Ok(RunOutcome {
        records: ledger.records,
        model,
    })
}

/// Train the column block `substage` (of `width` columns) for `epochs`
/// rounds. After each round the aggregated block is written into `canvas`
/// (the full-width model, zero where untrained) and `canvas` is evaluated.
#[allow(clippy::too_many_arguments)]
fn train_block(
    config: &FederationConfig,
    data: &EncodedData,
    clients: &[ClientState],
    substage: usize,
    width: usize,
    epochs: usize,
    ledger: &mut Ledger,
    canvas: &mut Array2<f64>,
) -> Result<PrototypeModel> {
    let offset = substage * width;
    let n = data.train.nrows() as u128;
    let c = data.class_count as u128;
    let plan = RoundPlan {
        data: data.train.slice(s![.., offset..offset + width]),
        labels: &data.train_labels,
        class_count: data.class_count,
        local_epochs: config.local_epochs,
        alpha: config.alpha,
        subset: None,
    };
    let uplink = cost::round_uplink_bytes(
        config.clients as u64,
        data.class_count as u64,
        width as u64,
        config.traffic_bytes_per_element,
    );
    let setup_flops = cost::c1(n, width as u128, data.input_dim as u128) + cost::c2(n, width as u128);
    let retrain_flops = config.local_epochs as u128 * cost::c3(n, c, width as u128);
    let mut global = PrototypeModel::zeros(data.class_count, width);
    for epoch in 0..epochs {
        let (start, flops) = if epoch == 0 {
            (None, setup_flops + retrain_flops)
        } else {
            (Some(&global), retrain_flops)
        };
        global = federated_round(&plan, clients, start)?;
        canvas
            .slice_mut(s![.., offset..offset + width])
            .assign(&global.prototypes());
        let accuracy = evaluate(&PrototypeModel::from_matrix(canvas.clone())?, data)?;
        ledger.push(Stage::Train { substage }, accuracy, uplink, flops);
    }
    Ok(global)
}

/// Dispatch on `method`.
pub fn run(method: Method, config: &FederationConfig, data: &EncodedData) -> Result<RunOutcome> {
    match method {
        Method::Baseline => run_baseline(config, data),
        Method::Refhdc => run_refhdc(config, data),
    }
}
