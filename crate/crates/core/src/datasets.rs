//! Benchmark dataset loaders and client partitioning.
//!
//! Parsers are strict: a malformed file fails the whole load with the file
//! name and the byte offset (binary formats) or line number (text formats).
//! Files whose first two bytes are the gzip magic are decompressed
//! transparently, so the `.gz` files as distributed can be used directly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Purpose};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;
pub const UCI_HAR_FEATURES: usize = 561;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    FashionMnist,
    Cifar10,
    UciHar,
}

/// Shape of the full public release of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishedShape {
    pub train: usize,
    pub test: usize,
    pub features: usize,
    pub classes: usize,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::FashionMnist => "fashion_mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::UciHar => "uci_har",
        }
    }

    pub fn is_image(self) -> bool {
        !matches!(self, DatasetKind::UciHar)
    }

    pub fn published_shape(self) -> PublishedShape {
        match self {
            DatasetKind::Mnist | DatasetKind::FashionMnist => PublishedShape {
                train: 60_000,
                test: 10_000,
                features: 784,
                classes: 10,
            },
            DatasetKind::Cifar10 => PublishedShape {
                train: 50_000,
                test: 10_000,
                features: 3072,
                classes: 10,
            },
            DatasetKind::UciHar => PublishedShape {
                train: 7352,
                test: 2947,
                features: UCI_HAR_FEATURES,
                classes: 6,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        train_x: Array2<f64>,
        train_y: Vec<usize>,
        test_x: Array2<f64>,
        test_y: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if train_x.nrows() != train_y.len() || test_x.nrows() != test_y.len() {
            return Err(Error::invalid("feature and label counts differ"));
        }
        if train_x.ncols() != test_x.ncols() {
            return Err(Error::invalid("train and test feature widths differ"));
        }
        if class_count == 0 {
            return Err(Error::invalid("class count must be positive"));
        }
        if let Some(&bad) = train_y.iter().chain(&test_y).find(|&&y| y >= class_count) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {class_count})"
            )));
        }
        if train_x.iter().chain(test_x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Dataset {
            name: name.into(),
            train_x,
            train_y,
            test_x,
            test_y,
            class_count,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.train_x.ncols()
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }

    /// Keep only the first `train` training rows and `test` test rows.
    pub fn truncate(mut self, train: Option<usize>, test: Option<usize>) -> Self {
        if let Some(n) = train.filter(|&n| n < self.train_len()) {
            self.train_x = self.train_x.slice_move(ndarray::s![..n, ..]);
            self.train_y.truncate(n);
        }
        if let Some(n) = test.filter(|&n| n < self.test_y.len()) {
            self.test_x = self.test_x.slice_move(ndarray::s![..n, ..]);
            self.test_y.truncate(n);
        }
        self
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse_err(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(path, format!("byte {offset}"), "truncated header"))
}

/// Parse an IDX3 image file into an n×(rows·cols) matrix of raw pixel values.
pub fn read_idx_images(path: &Path) -> Result<Array2<f64>> {
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(parse_err(
            path,
            "byte 0".into(),
            format!("bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        ));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let width = rows * cols;
    let expected = 16 + count * width;
    if bytes.len() != expected {
        return Err(parse_err(
            path,
            format!("byte {}", bytes.len().min(expected)),
            format!(
                "header declares {count} images of {rows}x{cols} ({expected} bytes), file has {} bytes",
                bytes.len()
            ),
        ));
    }
    let pixels = bytes[16..].iter().map(|&b| f64::from(b)).collect();
    Ok(Array2::from_shape_vec((count, width), pixels).expect("length checked"))
}

/// Parse an IDX1 label file; every label must be below `classes`.
pub fn read_idx_labels(path: &Path, classes: usize) -> Result<Vec<usize>> {
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(parse_err(
            path,
            "byte 0".into(),
            format!("bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        ));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    if bytes.len() != 8 + count {
        return Err(parse_err(
            path,
            format!("byte {}", bytes.len().min(8 + count)),
            format!("header declares {count} labels, file has {} label bytes", bytes.len().saturating_sub(8)),
        ));
    }
    bytes[8..]
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let label = usize::from(b);
            if label >= classes {
                Err(parse_err(
                    path,
                    format!("byte {}", 8 + i),
                    format!("label {label} outside [0, {classes})"),
                ))
            } else {
                Ok(label)
            }
        })
        .collect()
}

fn idx_pair(images: &Path, labels: &Path) -> Result<(Array2<f64>, Vec<usize>)> {
    let x = read_idx_images(images)?;
    let y = read_idx_labels(labels, 10)?;
    if x.nrows() != y.len() {
        return Err(parse_err(
            labels,
            "byte 4".into(),
            format!(
                "{} labels but {} images in {}",
                y.len(),
                x.nrows(),
                images.display()
            ),
        ));
    }
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// MNIST and Fashion-MNIST (identical IDX layout).
pub fn load_mnist_idx(name: &str, paths: &IdxPaths) -> Result<Dataset> {
    let (train_x, train_y) = idx_pair(&paths.train_images, &paths.train_labels)?;
    let (test_x, test_y) = idx_pair(&paths.test_images, &paths.test_labels)?;
    if train_x.ncols() != test_x.ncols() {
        return Err(parse_err(
            &paths.test_images,
            "byte 8".into(),
            "image size differs from the training images",
        ));
    }
    Dataset::new(name, train_x, train_y, test_x, test_y, 10)
}

/// Parse CIFAR-10 binary batches: each record is one label byte followed by
/// 3072 pixel bytes (1024 R, 1024 G, 1024 B, row-major), kept in stored order.
pub fn read_cifar10_batches(paths: &[PathBuf]) -> Result<(Array2<f64>, Vec<usize>)> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = read_bytes(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(parse_err(
                path,
                format!("byte {}", bytes.len() - bytes.len() % CIFAR_RECORD),
                format!(
                    "file size {} is not a positive multiple of the {CIFAR_RECORD}-byte record",
                    bytes.len()
                ),
            ));
        }
        for (r, record) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
            let label = usize::from(record[0]);
            if label >= 10 {
                return Err(parse_err(
                    path,
                    format!("byte {}", r * CIFAR_RECORD),
                    format!("label {label} outside [0, 10)"),
                ));
            }
            labels.push(label);
            pixels.extend(record[1..].iter().map(|&b| f64::from(b)));
        }
    }
    let n = labels.len();
    Ok((
        Array2::from_shape_vec((n, CIFAR_RECORD - 1), pixels).expect("whole records"),
        labels,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CifarPaths {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

pub fn load_cifar10_binary(paths: &CifarPaths) -> Result<Dataset> {
    let (train_x, train_y) = read_cifar10_batches(&paths.train)?;
    let (test_x, test_y) = read_cifar10_batches(&paths.test)?;
    Dataset::new("cifar10", train_x, train_y, test_x, test_y, 10)
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?).map_err(|e| {
        parse_err(
            path,
            format!("byte {}", e.utf8_error().valid_up_to()),
            "invalid UTF-8",
        )
    })
}

/// Whitespace-separated feature rows, each with exactly `width` fields.
pub fn read_feature_table(path: &Path, width: usize) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split_whitespace() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, format!("line {}", i + 1), format!("not a number: {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, format!("line {}", i + 1), "non-finite value"));
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != width {
            return Err(parse_err(
                path,
                format!("line {}", i + 1),
                format!("expected {width} fields, found {got}"),
            ));
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, width), values).expect("row widths checked"))
}

/// One label per line, 1-based in the file, returned 0-based.
pub fn read_label_lines(path: &Path, classes: usize) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let label: usize = field.parse().map_err(|_| {
            parse_err(path, format!("line {}", i + 1), format!("not a label: {field:?}"))
        })?;
        if label == 0 || label > classes {
            return Err(parse_err(
                path,
                format!("line {}", i + 1),
                format!("label {label} outside [1, {classes}]"),
            ));
        }
        out.push(label - 1);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UciHarPaths {
    pub train_features: PathBuf,
    pub train_labels: PathBuf,
    pub test_features: PathBuf,
    pub test_labels: PathBuf,
}

pub fn load_uci_har(paths: &UciHarPaths) -> Result<Dataset> {
    let split = |features: &Path, labels: &Path| -> Result<(Array2<f64>, Vec<usize>)> {
        let x = read_feature_table(features, UCI_HAR_FEATURES)?;
        let y = read_label_lines(labels, 6)?;
        if x.nrows() != y.len() {
            return Err(parse_err(
                labels,
                format!("line {}", y.len().min(x.nrows()) + 1),
                format!("{} labels but {} feature rows", y.len(), x.nrows()),
            ));
        }
        Ok((x, y))
    };
    let (train_x, train_y) = split(&paths.train_features, &paths.train_labels)?;
    let (test_x, test_y) = split(&paths.test_features, &paths.test_labels)?;
    Dataset::new("uci_har", train_x, train_y, test_x, test_y, 6)
}

/// Dataset file locations, keyed by dataset name in a JSON manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case")]
pub enum ManifestEntry {
    Idx(IdxPaths),
    Cifar10(CifarPaths),
    UciHar(UciHarPaths),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub datasets: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    /// Read a manifest; relative paths are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for entry in manifest.datasets.values_mut() {
            match entry {
                ManifestEntry::Idx(p) => {
                    fix(&mut p.train_images);
                    fix(&mut p.train_labels);
                    fix(&mut p.test_images);
                    fix(&mut p.test_labels);
                }
                ManifestEntry::Cifar10(p) => p.train.iter_mut().chain(p.test.iter_mut()).for_each(fix),
                ManifestEntry::UciHar(p) => {
                    fix(&mut p.train_features);
                    fix(&mut p.train_labels);
                    fix(&mut p.test_features);
                    fix(&mut p.test_labels);
                }
            }
        }
        Ok(manifest)
    }

    pub fn load(&self, kind: DatasetKind) -> Result<Dataset> {
        let entry = self.datasets.get(kind.name()).ok_or_else(|| {
            Error::invalid(format!("manifest has no entry for {:?}", kind.name()))
        })?;
        match (kind, entry) {
            (DatasetKind::Mnist | DatasetKind::FashionMnist, ManifestEntry::Idx(p)) => {
                load_mnist_idx(kind.name(), p)
            }
            (DatasetKind::Cifar10, ManifestEntry::Cifar10(p)) => load_cifar10_binary(p),
            (DatasetKind::UciHar, ManifestEntry::UciHar(p)) => load_uci_har(p),
            _ => Err(Error::invalid(format!(
                "manifest entry for {:?} has the wrong format",
                kind.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    Iid,
    NonIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub clients: usize,
    pub mode: PartitionMode,
    pub seed: u64,
    /// Distinct classes per client in non-i.i.d. mode.
    pub classes_per_client: usize,
}

/// One participant's share of the training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientShard {
    pub client_id: usize,
    /// Training-row indices, ascending.
    pub rows: Vec<usize>,
}

impl ClientShard {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classes(&self, labels: &[usize]) -> Vec<usize> {
        let mut c: Vec<usize> = self.rows.iter().map(|&r| labels[r]).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Split training rows across `spec.clients` participants.
///
/// i.i.d.: seeded shuffle, then round-robin. Non-i.i.d.: `clients ×
/// classes_per_client` slots labelled with classes in equal proportion are
/// shuffled and dealt out, colliding slots are swapped away until every
/// client holds distinct classes, and each class's rows are split evenly
/// among its holders.
pub fn partition(labels: &[usize], class_count: usize, spec: &PartitionSpec) -> Result<Vec<ClientShard>> {
    let n = labels.len();
    let clients = spec.clients;
    if clients == 0 {
        return Err(Error::invalid("partition needs at least one client"));
    }
    if n < clients {
        return Err(Error::invalid(format!(
            "{n} training rows cannot cover {clients} clients"
        )));
    }
    if clients == 1 {
        return Ok(vec![ClientShard {
            client_id: 0,
            rows: (0..n).collect(),
        }]);
    }
    let mut rng = seed::derived_rng(spec.seed, Purpose::Partition, 0);
    let mut shards = match spec.mode {
        PartitionMode::Iid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut shards = vec![Vec::with_capacity(n / clients + 1); clients];
            for (k, row) in order.into_iter().enumerate() {
                shards[k % clients].push(row);
            }
            shards
        }
        PartitionMode::NonIid => non_iid(labels, class_count, spec, &mut rng)?,
    };
    for (id, rows) in shards.iter_mut().enumerate() {
        if rows.is_empty() {
            return Err(Error::invalid(format!("client {id} received no training rows")));
        }
        rows.sort_unstable();
    }
    Ok(shards
        .into_iter()
        .enumerate()
        .map(|(client_id, rows)| ClientShard { client_id, rows })
        .collect())
}

fn non_iid(
    labels: &[usize],
    class_count: usize,
    spec: &PartitionSpec,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>> {
    let clients = spec.clients;
    let per = spec.classes_per_client;
    if per == 0 || per > class_count {
        return Err(Error::invalid(format!(
            "classes_per_client must be in [1, {class_count}], got {per}"
        )));
    }
    if clients * per < class_count {
        return Err(Error::invalid(format!(
            "{clients} clients x {per} classes cannot cover {class_count} classes"
        )));
    }
    let mut slots: Vec<usize> = (0..clients * per).map(|s| s % class_count).collect();
    slots.shuffle(rng);

    let holds = |slots: &[usize], client: usize, class: usize, skip: usize| {
        (client * per..(client + 1) * per).any(|s| s != skip && slots[s] == class)
    };
    for client in 0..clients {
        for s in client * per..(client + 1) * per {
            let mut attempts = 0;
            while holds(&slots, client, slots[s], s) {
                attempts += 1;
                if attempts > 10_000 {
                    return Err(Error::invalid("could not assign distinct classes to every client"));
                }
                let other = rng.random_range(0..slots.len());
                let owner = other / per;
                if owner == client {
                    continue;
                }
                let (mine, theirs) = (slots[s], slots[other]);
                if !holds(&slots, client, theirs, s) && !holds(&slots, owner, mine, other) {
                    slots.swap(s, other);
                }
            }
        }
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (row, &y) in labels.iter().enumerate() {
        by_class[y].push(row);
    }
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (s, &class) in slots.iter().enumerate() {
        holders[class].push(s / per);
    }
    let mut shards = vec![Vec::new(); clients];
    for (class, mut rows) in by_class.into_iter().enumerate() {
        let owners = &mut holders[class];
        owners.sort_unstable();
        if owners.is_empty() {
            continue;
        }
        rows.shuffle(rng);
        let base = rows.len() / owners.len();
        let extra = rows.len() % owners.len();
        let mut start = 0;
        for (k, &owner) in owners.iter().enumerate() {
            let take = base + usize::from(k < extra);
            shards[owner].extend_from_slice(&rows[start..start + take]);
            start += take;
        }
    }
    Ok(shards)
}

/// Class histogram of the given rows.
pub fn class_histogram(labels: &[usize], rows: impl IntoIterator<Item = usize>, class_count: usize) -> Vec<usize> {
    let mut h = vec![0; class_count];
    for r in rows {
        h[labels[r]] += 1;
    }
    h
}

/// Gather rows of a matrix in the given order.
pub fn gather_rows(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (dst, &r) in out.rows_mut().into_iter().zip(rows) {
        let src: ArrayView1<'_, f64> = x.row(r);
        dst.into_iter().zip(src).for_each(|(d, s)| *d = *s);
    }
    out
}
