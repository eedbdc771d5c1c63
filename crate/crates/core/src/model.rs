//! Class-prototype HDC model: bundling, nearest-prototype inference and the
//! online retraining rule.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hd_space::distance_from_parts;
use crate::linalg;

/// Sorted, unique column indices of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionSubset {
    indices: Vec<usize>,
}

impl PositionSubset {
    /// Validate that `indices` is non-empty, strictly increasing and below `dim`.
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("position subset must be non-empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("position subset must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::invalid(format!(
                    "position {last} out of range for dimension {dim}"
                )));
            }
        }
        Ok(PositionSubset { indices })
    }

    pub fn full(dim: usize) -> Self {
        PositionSubset {
            indices: (0..dim).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, column: usize) -> bool {
        self.indices.binary_search(&column).is_ok()
    }

    fn max_index(&self) -> usize {
        *self.indices.last().expect("non-empty")
    }

    fn gather_into(&self, src: &[f64], dst: &mut [f64]) {
        for (d, &i) in dst.iter_mut().zip(&self.indices) {
            *d = src[i];
        }
    }
}

/// Fraction of correct predictions; an empty evaluation set scores 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    /// True when nothing was evaluated (the fraction is then a placeholder 0).
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// C×D matrix whose row `i` is the prototype of class `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    prototypes: Array2<f64>,
}

impl PrototypeModel {
    pub fn zeros(class_count: usize, dim: usize) -> Self {
        PrototypeModel {
            prototypes: Array2::zeros((class_count, dim)),
        }
    }

    pub fn from_matrix(prototypes: Array2<f64>) -> Result<Self> {
        if prototypes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prototype entries must be finite"));
        }
        Ok(PrototypeModel {
            prototypes: prototypes.as_standard_layout().into_owned(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.ncols()
    }

    pub fn prototypes(&self) -> ArrayView2<'_, f64> {
        self.prototypes.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.prototypes
    }

    fn row(&self, class: usize) -> &[f64] {
        self.prototypes
            .row(class)
            .to_slice()
            .expect("standard layout")
    }

    /// `p_i = alpha · Σ θ(x)` over rows labelled `i`, in row order.
    pub fn bundle(
        encoded: ArrayView2<'_, f64>,
        labels: &[usize],
        class_count: usize,
        alpha: f64,
    ) -> Result<Self> {
        let order: Vec<usize> = (0..encoded.nrows()).collect();
        Self::bundle_ordered(encoded, labels, &order, class_count, alpha)
    }

    /// Bundle the rows listed in `order`, summing in that order.
    pub fn bundle_ordered(
        encoded: ArrayView2<'_, f64>,
        labels: &[usize],
        order: &[usize],
        class_count: usize,
        alpha: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        check_labels(encoded, labels, class_count)?;
        let mut sums = Array2::<f64>::zeros((class_count, encoded.ncols()));
        for &r in order {
            let mut p = sums.row_mut(labels[r]);
            p += &encoded.row(r);
        }
        sums.mapv_inplace(|v| alpha * v);
        Ok(PrototypeModel { prototypes: sums })
    }

    /// Index of the nearest prototype by cosine distance, restricted to
    /// `subset` columns when given. Ties go to the smallest class index.
    pub fn predict(&self, h: ArrayView1<'_, f64>, subset: Option<&PositionSubset>) -> Result<usize> {
        match subset {
            None => {
                if h.len() != self.dim() {
                    return Err(Error::invalid(format!(
                        "vector has {} entries, model dimension is {}",
                        h.len(),
                        self.dim()
                    )));
                }
                let h = h.as_standard_layout();
                let h = h.as_slice().expect("standard layout");
                let norms = self.row_norms();
                Ok(nearest(&self.prototypes, &norms, h, linalg::norm(h)).0)
            }
            Some(s) => {
                self.check_subset(s)?;
                if s.max_index() >= h.len() {
                    return Err(Error::invalid("vector shorter than the position subset requires"));
                }
                let compact = self.select(s);
                let norms = compact.row_norms();
                let h = h.as_standard_layout();
                let mut buf = vec![0.0; s.len()];
                s.gather_into(h.as_slice().expect("standard layout"), &mut buf);
                Ok(nearest(&compact.prototypes, &norms, &buf, linalg::norm(&buf)).0)
            }
        }
    }

    /// One online retraining pass over the rows in natural order.
    pub fn retrain_epoch(
        &mut self,
        encoded: ArrayView2<'_, f64>,
        labels: &[usize],
        alpha: f64,
        subset: Option<&PositionSubset>,
    ) -> Result<usize> {
        let order: Vec<usize> = (0..encoded.nrows()).collect();
        self.retrain_epoch_ordered(encoded, labels, &order, alpha, subset)
    }

    /// One online retraining pass visiting rows in `order`.
    ///
    /// For each point of true class `t` predicted as `q != t`:
    /// `p_t += α(1 - Δ_t)θ(x)` and `p_q -= α(1 - Δ_q)θ(x)`, with Δ the cosine
    /// distance to the current prototype. Updates apply immediately. With a
    /// subset, distances and updates touch only those columns. Returns the
    /// number of mispredicted points.
    pub fn retrain_epoch_ordered(
        &mut self,
        encoded: ArrayView2<'_, f64>,
        labels: &[usize],
        order: &[usize],
        alpha: f64,
        subset: Option<&PositionSubset>,
    ) -> Result<usize> {
        check_alpha(alpha)?;
        check_labels(encoded, labels, self.class_count())?;
        match subset {
            None => {
                if encoded.ncols() != self.dim() {
                    return Err(Error::invalid(format!(
                        "encoded width {} differs from model dimension {}",
                        encoded.ncols(),
                        self.dim()
                    )));
                }
                Ok(retrain_pass(&mut self.prototypes, order, alpha, labels, |r, buf| {
                    buf.iter_mut().zip(encoded.row(r)).for_each(|(b, v)| *b = *v);
                }))
            }
            Some(s) => {
                self.check_subset(s)?;
                if s.max_index() >= encoded.ncols() {
                    return Err(Error::invalid("encoded data narrower than the position subset"));
                }
                let mut compact = self.select(s).prototypes;
                let missed = retrain_pass(&mut compact, order, alpha, labels, |r, buf| {
                    let row = encoded.row(r);
                    for (b, &i) in buf.iter_mut().zip(s.indices()) {
                        *b = row[i];
                    }
                });
                for (k, &col) in s.indices().iter().enumerate() {
                    self.prototypes
                        .column_mut(col)
                        .assign(&compact.column(k));
                }
                Ok(missed)
            }
        }
    }

    pub fn accuracy(
        &self,
        encoded: ArrayView2<'_, f64>,
        labels: &[usize],
        subset: Option<&PositionSubset>,
    ) -> Result<Accuracy> {
        check_labels(encoded, labels, self.class_count())?;
        let total = labels.len();
        if total == 0 {
            log::warn!("accuracy requested on an empty evaluation set; reporting 0");
            return Ok(Accuracy { correct: 0, total });
        }
        let model = match subset {
            Some(s) => {
                self.check_subset(s)?;
                if s.max_index() >= encoded.ncols() {
                    return Err(Error::invalid("encoded data narrower than the position subset"));
                }
                self.select(s)
            }
            None => {
                if encoded.ncols() != self.dim() {
                    return Err(Error::invalid(format!(
                        "encoded width {} differs from model dimension {}",
                        encoded.ncols(),
                        self.dim()
                    )));
                }
                self.clone()
            }
        };
        let norms = model.row_norms();
        let correct = encoded
            .axis_iter(Axis(0))
            .into_par_iter()
            .zip(labels.par_iter())
            .map_init(
                || vec![0.0; model.dim()],
                |buf, (row, &y)| {
                    match subset {
                        Some(s) => {
                            for (b, &i) in buf.iter_mut().zip(s.indices()) {
                                *b = row[i];
                            }
                        }
                        None => buf.iter_mut().zip(row).for_each(|(b, v)| *b = *v),
                    }
                    let (pred, _) = nearest(&model.prototypes, &norms, buf, linalg::norm(buf));
                    usize::from(pred == y)
                },
            )
            .sum();
        Ok(Accuracy { correct, total })
    }

    /// Copy of the model restricted to `subset` columns.
    pub fn select(&self, subset: &PositionSubset) -> PrototypeModel {
        PrototypeModel {
            prototypes: self
                .prototypes
                .select(Axis(1), subset.indices())
                .as_standard_layout()
                .into_owned(),
        }
    }

    fn row_norms(&self) -> Vec<f64> {
        (0..self.class_count()).map(|c| linalg::norm(self.row(c))).collect()
    }

    fn check_subset(&self, s: &PositionSubset) -> Result<()> {
        if s.max_index() >= self.dim() {
            return Err(Error::invalid(format!(
                "position {} out of range for model dimension {}",
                s.max_index(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, alpha: f64, basis_seed: u64) -> ModelCheckpoint {
        ModelCheckpoint {
            format_version: ModelCheckpoint::FORMAT_VERSION,
            class_count: self.class_count(),
            dim: self.dim(),
            alpha,
            basis_seed,
            prototypes: self.prototypes.iter().copied().collect(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("learning rate must be in (0, 1], got {alpha}")))
    }
}

fn check_labels(encoded: ArrayView2<'_, f64>, labels: &[usize], class_count: usize) -> Result<()> {
    if encoded.nrows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} encoded rows but {} labels",
            encoded.nrows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
        return Err(Error::invalid(format!("label {bad} outside [0, {class_count})")));
    }
    Ok(())
}

/// Nearest prototype and the distances to every class.
fn nearest(prototypes: &Array2<f64>, norms: &[f64], h: &[f64], h_norm: f64) -> (usize, Vec<f64>) {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    let mut dists = Vec::with_capacity(norms.len());
    for (c, row) in prototypes.axis_iter(Axis(0)).enumerate() {
        let p = row.to_slice().expect("standard layout");
        let d = distance_from_parts(linalg::dot(p, h), norms[c], h_norm);
        if d < best_dist {
            best = c;
            best_dist = d;
        }
        dists.push(d);
    }
    (best, dists)
}

fn retrain_pass<F>(
    prototypes: &mut Array2<f64>,
    order: &[usize],
    alpha: f64,
    labels: &[usize],
    mut load: F,
) -> usize
where
    F: FnMut(usize, &mut [f64]),
{
    let mut norms: Vec<f64> = prototypes
        .axis_iter(Axis(0))
        .map(|r| linalg::norm(r.to_slice().expect("standard layout")))
        .collect();
    let mut h = vec![0.0; prototypes.ncols()];
    let mut missed = 0;
    for &r in order {
        load(r, &mut h);
        let h_norm = linalg::norm(&h);
        let (pred, dists) = nearest(prototypes, &norms, &h, h_norm);
        let truth = labels[r];
        if pred == truth {
            continue;
        }
        missed += 1;
        let gain_true = alpha * (1.0 - dists[truth]);
        let gain_pred = alpha * (1.0 - dists[pred]);
        for (class, gain) in [(truth, gain_true), (pred, -gain_pred)] {
            let mut row = prototypes.row_mut(class);
            let p = row.as_slice_mut().expect("standard layout");
            for (pv, hv) in p.iter_mut().zip(&h) {
                *pv += gain * hv;
            }
            norms[class] = linalg::norm(p);
        }
    }
    missed
}

/// Versioned model dump: row-major prototypes plus what is needed to rebuild
/// the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub class_count: usize,
    pub dim: usize,
    pub alpha: f64,
    pub basis_seed: u64,
    pub prototypes: Vec<f64>,
}

impl ModelCheckpoint {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn to_model(&self) -> Result<PrototypeModel> {
        if self.format_version != Self::FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        let m = Array2::from_shape_vec((self.class_count, self.dim), self.prototypes.clone())
            .map_err(|_| Error::invalid("checkpoint prototype count does not match C x D"))?;
        PrototypeModel::from_matrix(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
