//! Dataset → HD encoding: normalize, optionally apply random Fourier
//! features, then project with the master basis. Statistics are fitted on
//! the training split only.

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::Result;
use crate::features::{fit_normalizer, make_rffm, median_neighbour_distance, NormalizationMode};
use crate::fedsim::EncodedData;
use crate::hd_space::make_basis;
use crate::seed::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RffmSettings {
    pub features: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub normalization: NormalizationMode,
    pub rffm: Option<RffmSettings>,
}

/// Seed of the master projection basis for a run.
pub fn basis_seed(master_seed: u64) -> u64 {
    seed::derive(master_seed, Purpose::ProjectionBasis, 0)
}

pub fn rffm_seed(master_seed: u64) -> u64 {
    seed::derive(master_seed, Purpose::Rffm, 0)
}

/// Width of the vectors fed to the HD encoder.
pub fn encoder_input_dim(pipeline: &PipelineConfig, raw_features: usize) -> usize {
    pipeline.rffm.map_or(raw_features, |r| r.features)
}

pub fn encode_dataset(
    dataset: &Dataset,
    pipeline: &PipelineConfig,
    master_seed: u64,
    dim: usize,
) -> Result<EncodedData> {
    let normalizer = fit_normalizer(dataset.train_x.view(), pipeline.normalization)?;
    let mut train = normalizer.apply(dataset.train_x.view())?;
    let mut test = normalizer.apply(dataset.test_x.view())?;
    if let Some(r) = pipeline.rffm {
        if let Some(scale) = median_neighbour_distance(train.view(), 200) {
            // exp(-(4σ)²/(2σ²)) ≈ 3e-4: nearly every pair of points looks unrelated.
            if r.sigma * 4.0 < scale {
                log::warn!(
                    "RFFM sigma {} is far below the typical distance between training points ({scale:.3}); \
                     features will be close to uncorrelated noise (consider a larger sigma or unit-norm)",
                    r.sigma
                );
            }
        }
        let rffm = make_rffm(rffm_seed(master_seed), dataset.feature_dim(), r.features, r.sigma)?;
        train = rffm.transform_batch(train.view())?;
        test = rffm.transform_batch(test.view())?;
    }
    let input_dim = train.ncols();
    let basis = make_basis(basis_seed(master_seed), input_dim, dim)?;
    let train_encoded = basis.encode_batch(train.view())?;
    drop(train);
    let test_encoded = basis.encode_batch(test.view())?;
    Ok(EncodedData {
        train: train_encoded,
        train_labels: dataset.train_y.clone(),
        test: test_encoded,
        test_labels: dataset.test_y.clone(),
        class_count: dataset.class_count,
        input_dim,
    })
}
