//! Acceptance checks, one status line per criterion.
//!
//! Criteria that need datasets not present on this machine are reported as
//! BLOCKED (never PASS). Point the harness at local copies with
//! `FEDHDC_UCI_HAR_MANIFEST` / `FEDHDC_MNIST_MANIFEST` (dataset manifests with
//! `uci_har` / `mnist` entries), or place them at `data/uci-har/manifest.json`
//! and `data/mnist/manifest.json`. The process exits non-zero if any
//! criterion FAILs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use fedhdc::cost::{cost_baseline, cost_refhdc, Workload};
use fedhdc::datasets::{partition, DatasetKind, Manifest, PartitionMode, PartitionSpec};
use fedhdc::features::NormalizationMode;
use fedhdc::fedsim::{client_order, make_clients};
use fedhdc::pipeline::{encode_dataset, PipelineConfig, RffmSettings};
use fedhdc::{cosine_distance, make_basis, FederationConfig, PositionSubset, PrototypeModel};
use fedhdc_cli::compare::{format_delta, read_records, RoundRow};
use fedhdc_cli::config::{RffmConfig, RunConfig};
use fedhdc_cli::run::{execute, RunOptions};
use ndarray::{concatenate, Array1, Array2, Axis};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

enum Status {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// A manifest from `var`, else the default location, if it exists.
fn find_manifest(var: &str, default: &str) -> Option<PathBuf> {
    std::env::var_os(var)
        .map(PathBuf::from)
        .or_else(|| Some(workspace_root().join(default)))
        .filter(|p| p.is_file())
}

fn mnist_subset_manifest() -> Option<PathBuf> {
    Some(workspace_root().join("data/mnist-10k/manifest.json")).filter(|p| p.is_file())
}

fn check(cond: bool, detail: String) -> Status {
    if cond {
        Status::Pass(detail)
    } else {
        Status::Fail(detail)
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

struct Experiment {
    max_accuracy: f64,
    records: Vec<RoundRow>,
}

fn experiment(config: RunConfig, scratch: &Path, name: &str) -> anyhow::Result<Experiment> {
    let resolved = config.resolve()?;
    let dir = scratch.join(name);
    let start = Instant::now();
    let summary = execute(&resolved, &dir, RunOptions::default())?;
    eprintln!(
        "  ({name}: max accuracy {:.4} in {:.0}s)",
        summary.max_accuracy,
        start.elapsed().as_secs_f64()
    );
    Ok(Experiment {
        max_accuracy: summary.max_accuracy,
        records: read_records(&dir)?,
    })
}

fn mnist_config(manifest: &Path, normalization: NormalizationMode) -> RunConfig {
    RunConfig {
        dataset: Some(DatasetKind::Mnist),
        manifest: Some(manifest.to_path_buf()),
        clients: Some(20),
        local_epochs: Some(5),
        global_epochs: Some(100),
        normalization: Some(normalization),
        rffm: Some(RffmConfig {
            enabled: Some(true),
            features: Some(3200),
            sigma: Some(1.0),
        }),
        ..RunConfig::default()
    }
}

fn baseline(mut c: RunConfig, dim: usize) -> RunConfig {
    c.method = Some(fedhdc::Method::Baseline);
    c.dim = Some(dim);
    c
}

fn refhdc(mut c: RunConfig, dim: usize, submodels: usize, refine_dim: usize) -> RunConfig {
    c.method = Some(fedhdc::Method::Refhdc);
    c.dim = Some(dim);
    c.submodels = Some(submodels);
    c.train_epochs = Some(submodels);
    c.refine_dim = Some(refine_dim);
    c
}

fn uci_config(manifest: &Path, local_epochs: usize, partition: PartitionMode) -> RunConfig {
    RunConfig {
        dataset: Some(DatasetKind::UciHar),
        manifest: Some(manifest.to_path_buf()),
        clients: Some(20),
        local_epochs: Some(local_epochs),
        global_epochs: Some(100),
        partition: Some(partition),
        classes_per_client: Some(2),
        rffm: Some(RffmConfig {
            enabled: Some(true),
            features: Some(3200),
            sigma: Some(2.5),
        }),
        ..RunConfig::default()
    }
}

// 1
fn uci_har_headline(scratch: &Path) -> anyhow::Result<Status> {
    let Some(manifest) = find_manifest("FEDHDC_UCI_HAR_MANIFEST", "data/uci-har/manifest.json") else {
        return Ok(Status::Blocked("UCI HAR data not available".into()));
    };
    let cfg = uci_config(&manifest, 5, PartitionMode::Iid);
    let base = experiment(baseline(cfg.clone(), 5000), scratch, "uci-baseline")?;
    let re = experiment(refhdc(cfg, 5000, 5, 1000), scratch, "uci-refhdc")?;
    let (b, r) = (base.max_accuracy, re.max_accuracy);
    Ok(check(
        within(b, 0.936, 0.02) && within(r, 0.945, 0.02) && r >= b - 0.005,
        format!("baseline D=5K max {b:.4} (0.936±0.02), refhdc D̂=1K max {r:.4} (0.945±0.02)"),
    ))
}

// 2
fn uci_har_non_iid(scratch: &Path) -> anyhow::Result<Status> {
    let Some(manifest) = find_manifest("FEDHDC_UCI_HAR_MANIFEST", "data/uci-har/manifest.json") else {
        return Ok(Status::Blocked("UCI HAR data not available".into()));
    };
    let cfg = uci_config(&manifest, 3, PartitionMode::NonIid);
    let base = experiment(baseline(cfg.clone(), 5000), scratch, "uci-noniid-baseline")?;
    let re = experiment(refhdc(cfg, 5000, 2, 2500), scratch, "uci-noniid-refhdc")?;
    let (b, r) = (base.max_accuracy, re.max_accuracy);
    Ok(check(
        within(b, 0.898, 0.03) && within(r, 0.922, 0.03),
        format!("baseline D=5K max {b:.4} (0.898±0.03), refhdc D̂=2.5K max {r:.4} (0.922±0.03)"),
    ))
}

// 3a: reduced scale on the bundled 10k-digit subset, and 10 (stand-in) from the same run.
fn mnist_trend(scratch: &Path) -> anyhow::Result<(Status, Option<String>)> {
    let Some(manifest) = mnist_subset_manifest() else {
        return Ok((Status::Blocked("data/mnist-10k not found".into()), None));
    };
    // σ=1 is only meaningful for inputs of roughly unit length; pixel-scaled
    // digits are ~10 apart, so the kernel would be ~0 for every pair.
    let cfg = mnist_config(&manifest, NormalizationMode::UnitNorm);
    let base = experiment(baseline(cfg.clone(), 1000), scratch, "mnist10k-baseline")?;
    let re = experiment(refhdc(cfg, 5000, 5, 1000), scratch, "mnist10k-refhdc")?;
    let (b, r) = (base.max_accuracy, re.max_accuracy);
    let pre = re.records.iter().find(|x| x.round == 5).map(|x| x.accuracy);
    let fin = re.records.last().map(|x| x.accuracy);
    let refine_note = match (pre, fin) {
        (Some(p), Some(f)) => Some(format!(
            "mnist-10k stand-in: pre-refining concatenated {p:.4} -> final refined {f:.4} ({})",
            if f >= p { "holds" } else { "does not hold" }
        )),
        _ => None,
    };
    Ok((
        check(
            r >= b - 0.01,
            format!(
                "8k train / 2k test digits, unit-norm inputs: refhdc D̂=1K (D=5K) max {r:.4} vs baseline D=1K max {b:.4} (need >= {:.4})",
                b - 0.01
            ),
        ),
        refine_note,
    ))
}

// 3b
fn mnist_full_scale(scratch: &Path) -> anyhow::Result<Status> {
    let Some(manifest) = find_manifest("FEDHDC_MNIST_MANIFEST", "data/mnist/manifest.json") else {
        return Ok(Status::Blocked("full 60k MNIST not available (only the 10k subset is)".into()));
    };
    let train = Manifest::from_file(&manifest)?.load(DatasetKind::Mnist)?.train_len();
    if train < 60_000 {
        return Ok(Status::Blocked(format!("MNIST manifest has {train} training rows, not 60000")));
    }
    let cfg = mnist_config(&manifest, NormalizationMode::UnitNorm);
    let base = experiment(baseline(cfg.clone(), 1000), scratch, "mnist-baseline")?;
    let re = experiment(refhdc(cfg, 5000, 5, 1000), scratch, "mnist-refhdc")?;
    let (b, r) = (base.max_accuracy, re.max_accuracy);
    Ok(check(
        within(r, 0.969, 0.02) && within(b, 0.940, 0.02),
        format!("refhdc D̂=1K max {r:.4} (0.969±0.02), baseline D=1K max {b:.4} (0.940±0.02)"),
    ))
}

// 4
fn traffic_arithmetic(scratch: &Path) -> anyhow::Result<Status> {
    let costs = |name: &str, body: &str, rounds: usize| -> anyhow::Result<serde_json::Value> {
        let path = scratch.join(name);
        fs::write(&path, body)?;
        let out = Command::new(env!("CARGO_BIN_EXE_fedhdc"))
            .args(["validate-costs", "--json", "--rounds", &rounds.to_string(), "--config"])
            .arg(&path)
            .output()?;
        anyhow::ensure!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Ok(serde_json::from_slice(&out.stdout)?)
    };
    let base = costs("t2-base.json", r#"{"method": "baseline", "dataset": "mnist", "dim": 5000}"#, 30)?;
    let re = costs(
        "t2-re.json",
        r#"{"method": "refhdc", "dataset": "mnist", "dim": 5000, "submodels": 2, "train_epochs": 2, "refine_dim": 2500}"#,
        27,
    )?;
    let b = base["total_uplink_bytes"].as_u64().unwrap_or(0);
    let r = re["total_uplink_bytes"].as_u64().unwrap_or(0);
    let size = base["model_size_bytes"].as_u64().unwrap_or(0);
    let delta = format_delta(r, b);
    Ok(check(
        b == 240_000_000 && r == 108_000_000 && delta == "-55%" && size == 200_000,
        format!("baseline 30 rounds {b} B, refhdc D̂=2.5K 27 rounds {r} B ({delta}), model {size} B"),
    ))
}

fn deterministic_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

// 5
fn cost_identity() -> Status {
    let mut runner = deterministic_runner(100);
    let tuples = (0u128..1_000_000, 1u128..100, 1u128..5000, 1u128..100_000, 1u128..20, 0u128..1000);
    let result = runner.run(&tuples, |(n, c, d, dim, l, g)| {
        let w = Workload {
            points: n,
            classes: c,
            input_dim: d,
            local_epochs: l,
        };
        prop_assert_eq!(cost_refhdc(&w, dim, 1, g, 0, dim), cost_baseline(&w, dim, g));
        Ok(())
    });
    match result {
        Ok(()) => Status::Pass("cost_refhdc(M=1, G_R=0, G_T=G) == cost_baseline on 100 random tuples".into()),
        Err(e) => Status::Fail(e.to_string()),
    }
}

// 6
fn concentration() -> anyhow::Result<Status> {
    let x1 = Array1::from(vec![0.6, 0.8, 0.0]);
    let x2 = Array1::from(vec![0.0, 0.6, 0.8]);
    let spread = |dim: usize| -> anyhow::Result<f64> {
        let mut ds = Vec::with_capacity(100);
        for seed in 0..100u64 {
            let basis = make_basis(seed, 3, dim)?;
            let (a, b) = (basis.encode(x1.view())?, basis.encode(x2.view())?);
            ds.push(cosine_distance(a.as_slice(), b.as_slice()));
        }
        let mean = ds.iter().sum::<f64>() / 100.0;
        Ok((ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 99.0).sqrt())
    };
    let (lo, hi) = (spread(256)?, spread(4096)?);
    Ok(check(hi < lo, format!("std over 100 bases: D=256 {lo:.5}, D=4096 {hi:.5}")))
}

fn vec_strategy(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, len)
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), data).expect("shape")
}

// 7
fn invariant_suites() -> Status {
    let mut failures = Vec::new();
    let mut passed = Vec::new();
    let mut suite = |name: &str, result: Result<(), String>| match result {
        Ok(()) => passed.push(name.to_string()),
        Err(e) => failures.push(format!("{name}: {e}")),
    };

    let slicing = (1usize..6, 2usize..64, any::<u64>()).prop_flat_map(|(d, dim, seed)| {
        (Just(d), Just(dim), Just(seed), 1..dim, vec_strategy(d, -3.0, 3.0))
    });
    suite(
        "slicing/concatenation exactness",
        deterministic_runner(64)
            .run(&slicing, |(d, dim, seed, cut, x)| {
                let basis = make_basis(seed, d, dim).unwrap();
                let x = Array1::from(x);
                let full = basis.encode(x.view()).unwrap();
                let left = basis.slice_columns(0..cut).unwrap().encode(x.view()).unwrap();
                let right = basis.slice_columns(cut..dim).unwrap().encode(x.view()).unwrap();
                let joined = concatenate(Axis(0), &[left.view(), right.view()]).unwrap();
                prop_assert_eq!(full.0.to_vec(), joined.to_vec());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    suite(
        "encoding of the zero vector is zero",
        deterministic_runner(64)
            .run(&(1usize..20, 1usize..200, any::<u64>()), |(d, dim, seed)| {
                let basis = make_basis(seed, d, dim).unwrap();
                let h = basis.encode(Array1::zeros(d).view()).unwrap();
                prop_assert!(h.0.iter().all(|&v| v == 0.0));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let pair = (1usize..40).prop_flat_map(|n| (vec_strategy(n, -10.0, 10.0), vec_strategy(n, -10.0, 10.0), 0.01f64..100.0));
    suite(
        "distance bounds, symmetry, positive-scale invariance",
        deterministic_runner(256)
            .run(&pair, |(a, b, k)| {
                let d = cosine_distance(&a, &b);
                prop_assert!((0.0..=2.0).contains(&d));
                prop_assert_eq!(d, cosine_distance(&b, &a));
                let scaled: Vec<f64> = a.iter().map(|v| v * k).collect();
                prop_assert!((cosine_distance(&scaled, &b) - d).abs() <= 1e-9);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let model_and_point = (2usize..6, 2usize..24).prop_flat_map(|(c, dim)| {
        (
            Just(c),
            Just(dim),
            vec_strategy(c * dim, -1.0, 1.0),
            vec_strategy(dim, -1.0, 1.0),
            vec_strategy(c, 0.01, 100.0),
        )
    });
    suite(
        "prediction invariance under per-prototype positive scaling",
        deterministic_runner(256)
            .run(&model_and_point, |(c, dim, p, h, scales)| {
                let p = matrix(c, dim, p);
                let h = Array1::from(h);
                let mut d: Vec<f64> = p
                    .rows()
                    .into_iter()
                    .map(|r| cosine_distance(r.as_slice().unwrap(), h.as_slice().unwrap()))
                    .collect();
                d.sort_by(f64::total_cmp);
                prop_assume!(d[1] - d[0] > 1e-9);
                let model = PrototypeModel::from_matrix(p.clone()).unwrap();
                let mut scaled = p;
                for (mut row, s) in scaled.rows_mut().into_iter().zip(&scales) {
                    row *= *s;
                }
                let scaled = PrototypeModel::from_matrix(scaled).unwrap();
                prop_assert_eq!(model.predict(h.view(), None).unwrap(), scaled.predict(h.view(), None).unwrap());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let retrain = (2usize..5, 4usize..20, 2usize..15).prop_flat_map(|(c, dim, n)| {
        (
            Just(c),
            Just(dim),
            vec_strategy(c * dim, -1.0, 1.0),
            vec_strategy(n * dim, -1.0, 1.0),
            proptest::collection::vec(0..c, n),
            proptest::sample::subsequence((0..dim).collect::<Vec<_>>(), 1..dim),
        )
    });
    suite(
        "subset retraining column locality",
        deterministic_runner(128)
            .run(&retrain, |(c, dim, p, x, labels, subset)| {
                let before = PrototypeModel::from_matrix(matrix(c, dim, p)).unwrap();
                let x = matrix(labels.len(), dim, x);
                let subset = PositionSubset::new(subset, dim).unwrap();
                let mut after = before.clone();
                after.retrain_epoch(x.view(), &labels, 0.035, Some(&subset)).unwrap();
                for j in (0..dim).filter(|&j| !subset.contains(j)) {
                    prop_assert_eq!(before.prototypes().column(j).to_vec(), after.prototypes().column(j).to_vec());
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let separable = (2usize..6, 6usize..24).prop_flat_map(|(c, dim)| (Just(c), Just(dim), vec_strategy(c * dim, -1.0, 1.0)));
    suite(
        "zero misclassifications leave the model unchanged",
        deterministic_runner(128)
            .run(&separable, |(c, dim, p)| {
                // Each class's own prototype is the training point.
                let p = matrix(c, dim, p);
                let labels: Vec<usize> = (0..c).collect();
                let mut model = PrototypeModel::from_matrix(p.clone()).unwrap();
                for (i, row) in p.rows().into_iter().enumerate() {
                    prop_assume!(model.predict(row, None).unwrap() == i);
                }
                let before = model.clone();
                prop_assert_eq!(model.retrain_epoch(p.view(), &labels, 0.035, None).unwrap(), 0);
                prop_assert_eq!(before, model);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let iid = (2usize..10, 1usize..12, 0usize..200, any::<u64>())
        .prop_flat_map(|(c, n_clients, extra, seed)| {
            (Just(c), Just(n_clients), proptest::collection::vec(0..c, n_clients + extra), Just(seed))
        });
    suite(
        "partition disjointness and coverage",
        deterministic_runner(128)
            .run(&iid, |(c, n_clients, labels, seed)| {
                let spec = PartitionSpec {
                    clients: n_clients,
                    mode: PartitionMode::Iid,
                    seed,
                    classes_per_client: 2,
                };
                let shards = partition(&labels, c, &spec).unwrap();
                let mut all: Vec<usize> = shards.iter().flat_map(|s| s.rows.clone()).collect();
                prop_assert!(shards.iter().all(|s| !s.is_empty()));
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let non_iid = (2usize..10, 1usize..6, any::<u64>()).prop_flat_map(|(c, per, seed)| {
        let min_clients = c.div_ceil(2);
        (Just(c), min_clients..min_clients + 12, Just(per), Just(seed))
    });
    suite(
        "non-i.i.d. clients hold exactly 2 classes",
        deterministic_runner(128)
            .run(&non_iid, |(c, n_clients, per, seed)| {
                // Enough rows that every class can be split among all its holders.
                let labels: Vec<usize> = (0..c * n_clients * per).map(|i| i % c).collect();
                let spec = PartitionSpec {
                    clients: n_clients,
                    mode: PartitionMode::NonIid,
                    seed,
                    classes_per_client: 2,
                };
                let shards = partition(&labels, c, &spec).unwrap();
                prop_assert_eq!(shards.len(), n_clients);
                for s in &shards {
                    prop_assert_eq!(s.classes(&labels).len(), 2);
                }
                let mut all: Vec<usize> = shards.iter().flat_map(|s| s.rows.clone()).collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    if failures.is_empty() {
        Status::Pass(format!("{} suites: {}", passed.len(), passed.join("; ")))
    } else {
        Status::Fail(failures.join(" | "))
    }
}

// 8
fn degenerate_equivalence() -> anyhow::Result<Status> {
    let Some(manifest) = mnist_subset_manifest() else {
        return Ok(Status::Blocked("data/mnist-10k not found".into()));
    };
    let ds = Manifest::from_file(&manifest)?
        .load(DatasetKind::Mnist)?
        .truncate(Some(600), Some(200));
    let pipeline = PipelineConfig {
        normalization: NormalizationMode::UnitNorm,
        rffm: Some(RffmSettings { features: 256, sigma: 1.0 }),
    };
    let cfg = FederationConfig {
        clients: 1,
        dim: 400,
        submodels: 1,
        refine_dim: 400,
        global_epochs: 4,
        train_epochs: 4,
        local_epochs: 3,
        alpha: 0.035,
        master_seed: 3,
        partition: PartitionMode::Iid,
        classes_per_client: 2,
        traffic_bytes_per_element: 8,
    };
    let data = encode_dataset(&ds, &pipeline, cfg.master_seed, cfg.dim)?;
    let shard = &make_clients(&cfg, &data.train_labels, data.class_count)?[0].shard;
    let order = client_order(cfg.master_seed, shard);
    let mut central =
        PrototypeModel::bundle_ordered(data.train.view(), &data.train_labels, &order, data.class_count, cfg.alpha)?;
    for _ in 0..cfg.global_epochs * cfg.local_epochs {
        central.retrain_epoch_ordered(data.train.view(), &data.train_labels, &order, cfg.alpha, None)?;
    }
    let bits = |m: &PrototypeModel| m.prototypes().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let base = fedhdc::run_baseline(&cfg, &data)?.model;
    let re = fedhdc::run_refhdc(&cfg, &data)?.model;
    Ok(check(
        bits(&base) == bits(&central) && bits(&re) == bits(&central),
        "N=1 federated (baseline and M=1 schedule) vs centralized bundle + G·L epochs, bitwise".into(),
    ))
}

// 9
fn determinism(scratch: &Path) -> anyhow::Result<Status> {
    let Some(manifest) = mnist_subset_manifest() else {
        return Ok(Status::Blocked("data/mnist-10k not found".into()));
    };
    let cfg = scratch.join("det.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"method": "refhdc", "dataset": "mnist", "manifest": {:?}, "train_limit": 1500, "test_limit": 500,
                "dim": 500, "submodels": 5, "train_epochs": 5, "refine_dim": 100, "global_epochs": 10,
                "local_epochs": 2, "normalization": "unit-norm", "rffm": {{"features": 400}}}}"#,
            manifest.display().to_string()
        ),
    )?;
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = scratch.join(format!("det-{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_fedhdc"))
            .args(["run", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("RUST_LOG", "warn")
            .status()?;
        anyhow::ensure!(status.success(), "run with --threads {threads} failed");
        outputs.push(fs::read(out.join("records.csv"))?);
    }
    Ok(check(
        outputs[0] == outputs[1],
        format!("records.csv with --threads 1 and --threads 4: {} bytes each, identical", outputs[0].len()),
    ))
}

// 10
fn uci_refining_benefit(scratch: &Path) -> anyhow::Result<Status> {
    let Some(manifest) = find_manifest("FEDHDC_UCI_HAR_MANIFEST", "data/uci-har/manifest.json") else {
        return Ok(Status::Blocked("UCI HAR data not available".into()));
    };
    let cfg = refhdc(uci_config(&manifest, 5, PartitionMode::Iid), 5000, 5, 1000);
    let re = experiment(cfg, scratch, "uci-refine")?;
    let pre = re.records.iter().find(|r| r.round == 5).map_or(0.0, |r| r.accuracy);
    let fin = re.records.last().map_or(0.0, |r| r.accuracy);
    Ok(check(fin >= pre, format!("pre-refining concatenated {pre:.4}, final refined {fin:.4}")))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let scratch = tempfile::tempdir().expect("scratch directory");
    let scratch = scratch.path();
    let lift = |r: anyhow::Result<Status>| r.unwrap_or_else(|e| Status::Fail(format!("error: {e:#}")));

    let mut lines: Vec<(&str, &str, Status)> = Vec::new();
    let mut notes = Vec::new();
    lines.push(("1", "UCI HAR headline reproduction", lift(uci_har_headline(scratch))));
    lines.push(("2", "non-i.i.d. UCI HAR", lift(uci_har_non_iid(scratch))));
    let trend = match mnist_trend(scratch) {
        Ok((status, note)) => {
            notes.extend(note);
            status
        }
        Err(e) => Status::Fail(format!("error: {e:#}")),
    };
    lines.push(("3a", "MNIST trend check (reduced scale)", trend));
    lines.push(("3b", "MNIST trend check (full scale)", lift(mnist_full_scale(scratch))));
    lines.push(("4", "traffic arithmetic, exact", lift(traffic_arithmetic(scratch))));
    lines.push(("5", "cost-model identity", cost_identity()));
    lines.push(("6", "distance concentration", lift(concentration())));
    lines.push(("7", "invariant suites", invariant_suites()));
    lines.push(("8", "degenerate-equivalence oracle", lift(degenerate_equivalence())));
    lines.push(("9", "determinism across thread counts", lift(determinism(scratch))));
    lines.push(("10", "refining benefit (UCI HAR)", lift(uci_refining_benefit(scratch))));

    let mut failed = 0;
    println!();
    for (id, title, status) in &lines {
        let (tag, detail) = match status {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Status::Blocked(d) => ("BLOCKED", d),
        };
        println!("[{tag:<7}] {id:>3} {title}: {detail}");
    }
    for note in notes {
        println!("[INFO   ]  10 {note}");
    }
    let count = |t: &str| {
        lines
            .iter()
            .filter(|(_, _, s)| matches!((t, s), ("PASS", Status::Pass(_)) | ("BLOCKED", Status::Blocked(_))))
            .count()
    };
    println!(
        "\nacceptance: {} passed, {failed} failed, {} blocked",
        count("PASS"),
        count("BLOCKED")
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
