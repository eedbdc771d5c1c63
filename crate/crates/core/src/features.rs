//! Feature preprocessing applied before HD encoding: normalization, then an
//! optional random Fourier feature map approximating the RBF kernel.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

/// Floor applied to z-score standard deviations.
pub const MIN_STD: f64 = 1e-8;

/// Random Fourier features `z(x) = sqrt(2/F) cos(x·Ω/σ + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffmBasis {
    seed: u64,
    sigma: f64,
    omega: Array2<f64>,
    offsets: Array1<f64>,
}

pub fn make_rffm(seed: u64, input_dim: usize, features: usize, sigma: f64) -> Result<RffmBasis> {
    if input_dim == 0 || features == 0 {
        return Err(Error::invalid(format!(
            "RFFM dimensions must be positive (d={input_dim}, F={features})"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("RFFM sigma must be positive, got {sigma}")));
    }
    let mut rng = seed::rng(seed);
    let omega = Array2::from_shape_simple_fn((input_dim, features), || {
        rng.sample::<f64, _>(StandardNormal)
    });
    let phase = Uniform::new(0.0, TAU).expect("valid range");
    let offsets = Array1::from_shape_simple_fn(features, || rng.sample(phase));
    Ok(RffmBasis {
        seed,
        sigma,
        omega,
        offsets,
    })
}

impl RffmBasis {
    pub fn input_dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.omega.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn omega(&self) -> ArrayView2<'_, f64> {
        self.omega.view()
    }

    pub fn transform(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, RFFM expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let out = self.transform_rows(x.insert_axis(Axis(0)));
        Ok(out.row(0).to_owned())
    }

    pub fn transform_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input matrix has {} columns, RFFM expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(self.transform_rows(x))
    }

    fn transform_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let scale = (2.0 / self.feature_count() as f64).sqrt();
        let inv_sigma = 1.0 / self.sigma;
        let offsets = &self.offsets;
        linalg::project_map(x, self.omega.view(), |j, z| {
            scale * (z * inv_sigma + offsets[j]).cos()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Divide by 255.
    PixelScale,
    /// Subtract the training mean and divide by the training standard deviation.
    ZScore,
    /// Scale each row to unit Euclidean length (all-zero rows stay zero).
    UnitNorm,
    None,
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationMode::PixelScale => "pixel-scale",
            NormalizationMode::ZScore => "z-score",
            NormalizationMode::UnitNorm => "unit-norm",
            NormalizationMode::None => "none",
        })
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel-scale" => Ok(NormalizationMode::PixelScale),
            "z-score" => Ok(NormalizationMode::ZScore),
            "unit-norm" => Ok(NormalizationMode::UnitNorm),
            "none" => Ok(NormalizationMode::None),
            other => Err(Error::invalid(format!("unknown normalization mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub mode: NormalizationMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub means: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stds: Vec<f64>,
}

/// Fit a normalizer on training features only.
pub fn fit_normalizer(train: ArrayView2<'_, f64>, mode: NormalizationMode) -> Result<NormalizationSpec> {
    match mode {
        NormalizationMode::PixelScale | NormalizationMode::UnitNorm | NormalizationMode::None => Ok(NormalizationSpec {
            mode,
            means: Vec::new(),
            stds: Vec::new(),
        }),
        NormalizationMode::ZScore => {
            if train.nrows() == 0 {
                return Err(Error::invalid("z-score normalization needs training rows"));
            }
            let n = train.nrows() as f64;
            let means = train.mean_axis(Axis(0)).expect("non-empty");
            let stds = train
                .axis_iter(Axis(1))
                .zip(means.iter())
                .map(|(col, &m)| {
                    let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                    var.sqrt().max(MIN_STD)
                })
                .collect();
            Ok(NormalizationSpec {
                mode,
                means: means.to_vec(),
                stds,
            })
        }
    }
}

impl NormalizationSpec {
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self.mode {
            NormalizationMode::None => Ok(x.to_owned()),
            NormalizationMode::PixelScale => Ok(x.mapv(|v| v / 255.0)),
            NormalizationMode::UnitNorm => {
                let mut out = x.to_owned();
                for mut row in out.axis_iter_mut(Axis(0)) {
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        row.mapv_inplace(|v| v / norm);
                    }
                }
                Ok(out)
            }
            NormalizationMode::ZScore => {
                if x.ncols() != self.means.len() {
                    return Err(Error::invalid(format!(
                        "normalizer fitted on {} features, got {}",
                        self.means.len(),
                        x.ncols()
                    )));
                }
                let mut out = x.to_owned();
                for mut row in out.axis_iter_mut(Axis(0)) {
                    for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
                        *v = (*v - m) / s;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Median Euclidean distance between consecutive rows among the first
/// `sample + 1` rows: a cheap scale estimate for choosing the RFFM σ.
pub fn median_neighbour_distance(x: ArrayView2<'_, f64>, sample: usize) -> Option<f64> {
    let n = x.nrows().min(sample + 1);
    if n < 2 {
        return None;
    }
    let mut d: Vec<f64> = (1..n)
        .map(|i| {
            x.row(i)
                .iter()
                .zip(x.row(i - 1))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}
