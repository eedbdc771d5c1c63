//! `fedhdc run`: load, encode, train, and write the run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use fedhdc::datasets::Manifest;
use fedhdc::pipeline::encode_dataset;
use fedhdc::{RoundRecord, RunOutcome};
use serde::Serialize;

use crate::config::ResolvedConfig;

pub const RECORDS_HEADER: &str = "round,stage,accuracy,uplink_bytes,cum_uplink_bytes,cum_flops,seconds";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Fill the `seconds` column of records.csv. Off by default so that
    /// repeated runs produce identical files.
    pub wall_clock_in_records: bool,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub method: String,
    pub dataset: String,
    pub rounds: usize,
    pub max_accuracy: f64,
    pub max_accuracy_round: Option<usize>,
    pub final_accuracy: f64,
    pub total_uplink_bytes: u64,
    pub total_flops: u128,
    pub model_size_bytes: u64,
    pub train_points: usize,
    pub test_points: usize,
    pub encode_seconds: f64,
    pub train_seconds: f64,
    pub generator: String,
    pub assumptions: Vec<String>,
}

/// Run the experiment described by `config` and write its outputs to `out`.
/// Nothing is written unless the run completes.
pub fn execute(config: &ResolvedConfig, out: &Path, options: RunOptions) -> anyhow::Result<Summary> {
    let manifest_path = config
        .manifest
        .as_deref()
        .ok_or_else(|| anyhow!("invalid config: manifest: required for `run`"))?;
    let manifest = Manifest::from_file(manifest_path)?;
    let dataset = manifest
        .load(config.dataset)?
        .truncate(config.train_limit, config.test_limit);
    log::info!(
        "{}: {} train / {} test points, {} features, {} classes",
        dataset.name,
        dataset.train_len(),
        dataset.test_y.len(),
        dataset.feature_dim(),
        dataset.class_count
    );

    let start = Instant::now();
    let fed = &config.federation;
    let data = encode_dataset(&dataset, &config.pipeline, fed.master_seed, fed.dim)?;
    let encode_seconds = start.elapsed().as_secs_f64();
    log::info!("encoded to D={} in {encode_seconds:.1}s", fed.dim);
    drop(dataset);

    let start = Instant::now();
    let outcome = fedhdc::run(config.method, fed, &data)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let summary = summarize(config, &outcome, data.train.nrows(), data.test.nrows(), encode_seconds, train_seconds);
    write_outputs(config, &outcome, &summary, out, options)?;
    Ok(summary)
}

fn summarize(
    config: &ResolvedConfig,
    outcome: &RunOutcome,
    train_points: usize,
    test_points: usize,
    encode_seconds: f64,
    train_seconds: f64,
) -> Summary {
    let records = &outcome.records;
    let best = records
        .iter()
        .fold(None::<&RoundRecord>, |best, r| match best {
            Some(b) if b.accuracy >= r.accuracy => Some(b),
            _ => Some(r),
        });
    let last = records.last();
    let fed = &config.federation;
    Summary {
        method: config.method.to_string(),
        dataset: config.dataset.name().to_string(),
        rounds: records.len(),
        max_accuracy: best.map_or(0.0, |r| r.accuracy),
        max_accuracy_round: best.map(|r| r.round),
        final_accuracy: last.map_or(0.0, |r| r.accuracy),
        total_uplink_bytes: last.map_or(0, |r| r.cum_uplink_bytes),
        total_flops: last.map_or(0, |r| r.cum_flops),
        model_size_bytes: fedhdc::cost::model_size_bytes(
            outcome.model.class_count() as u64,
            fed.dim as u64,
            config.storage_bytes_per_element,
        ),
        train_points,
        test_points,
        encode_seconds,
        train_seconds,
        generator: config.derived.generator.clone(),
        assumptions: assumptions(config),
    }
}

fn assumptions(config: &ResolvedConfig) -> Vec<String> {
    let fed = &config.federation;
    let mut out = vec![
        "encoder is cos(xW + phi) * sin(xW), elementwise".to_string(),
        "retraining updates are applied sample by sample within an epoch".to_string(),
        "clients are weighted equally in aggregation".to_string(),
        format!(
            "uplink counts {} bytes per element; model size counts {}",
            fed.traffic_bytes_per_element, config.storage_bytes_per_element
        ),
        "accuracy is measured on the test split after each global epoch".to_string(),
    ];
    if config.method == fedhdc::Method::Refhdc {
        out.push("sub-models are consecutive column blocks of one master basis".to_string());
        out.push(
            "during sub-model training, accuracy uses trained blocks with zeros for untrained ones"
                .to_string(),
        );
        out.push("refining positions are drawn by the server each round and shared by all clients".to_string());
    }
    if let Some(n) = config.train_limit {
        out.push(format!("training set truncated to the first {n} points"));
    }
    out
}

/// Format records as CSV with LF line endings.
pub fn records_csv(records: &[RoundRecord], with_seconds: bool) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(RECORDS_HEADER);
    s.push('\n');
    for r in records {
        let _ = write!(
            s,
            "{},{},{},{},{},{},",
            r.round, r.stage, r.accuracy, r.uplink_bytes, r.cum_uplink_bytes, r.cum_flops
        );
        if with_seconds {
            let _ = write!(s, "{:.6}", r.seconds);
        }
        s.push('\n');
    }
    s
}

fn timing_csv(records: &[RoundRecord]) -> String {
    let mut s = String::from("round,seconds\n");
    for r in records {
        let _ = writeln!(s, "{},{:.6}", r.round, r.seconds);
    }
    s
}

fn write_outputs(
    config: &ResolvedConfig,
    outcome: &RunOutcome,
    summary: &Summary,
    out: &Path,
    options: RunOptions,
) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let write = |name: &str, contents: String| {
        let path = out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    };
    write("records.csv", records_csv(&outcome.records, options.wall_clock_in_records))?;
    write("timing.csv", timing_csv(&outcome.records))?;
    write("summary.json", serde_json::to_string_pretty(summary)? + "\n")?;
    write("effective-config.json", serde_json::to_string_pretty(config)? + "\n")?;
    if config.save_model {
        let checkpoint = outcome
            .model
            .to_checkpoint(config.federation.alpha, config.derived.basis_seed);
        write("model.json", checkpoint.to_json()?)?;
    }
    Ok(())
}
