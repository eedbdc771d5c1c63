//! Random-projection hyperdimensional encoding.
//!
//! A [`ProjectionBasis`] holds a d×D Gaussian matrix `W` and a phase vector
//! `phi`; the encoder maps a feature vector `x` to
//! `cos(x·W + phi) ⊙ sin(x·W)` (elementwise product). Bases are generated
//! once from a seed and handed to sub-models as column slices, so a model
//! assembled from slices agrees exactly with the full-width encoder.

use std::f64::consts::TAU;
use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

/// Norms below this are treated as zero by [`cosine_distance`].
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    seed: u64,
    column_offset: usize,
    weights: Array2<f64>,
    phases: Array1<f64>,
}

/// One encoded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HdVector(pub Array1<f64>);

impl HdVector {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("owned vectors are contiguous")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }
}

impl From<Vec<f64>> for HdVector {
    fn from(v: Vec<f64>) -> Self {
        HdVector(Array1::from(v))
    }
}

/// Generate a basis. `W` is drawn row-major from N(0, 1), then `phi` from
/// U[0, 2π), all from one ChaCha8 stream seeded with `seed`.
pub fn make_basis(seed: u64, input_dim: usize, hd_dim: usize) -> Result<ProjectionBasis> {
    if input_dim == 0 || hd_dim == 0 {
        return Err(Error::invalid(format!(
            "basis dimensions must be positive (d={input_dim}, D={hd_dim})"
        )));
    }
    let mut rng = seed::rng(seed);
    let weights = Array2::from_shape_simple_fn((input_dim, hd_dim), || {
        rng.sample::<f64, _>(StandardNormal)
    });
    let phase = Uniform::new(0.0, TAU).expect("valid range");
    let phases = Array1::from_shape_simple_fn(hd_dim, || rng.sample(phase));
    Ok(ProjectionBasis {
        seed,
        column_offset: 0,
        weights,
        phases,
    })
}

impl ProjectionBasis {
    /// Assemble a basis from explicit parameters (column offset 0).
    pub fn from_parts(seed: u64, weights: Array2<f64>, phases: Array1<f64>) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::invalid("basis weights must be non-empty"));
        }
        if phases.len() != weights.ncols() {
            return Err(Error::invalid(format!(
                "phase vector has {} entries, weights have {} columns",
                phases.len(),
                weights.ncols()
            )));
        }
        Ok(ProjectionBasis {
            seed,
            column_offset: 0,
            weights: weights.as_standard_layout().into_owned(),
            phases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn hd_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Column of the master basis that column 0 of this basis came from.
    pub fn column_offset(&self) -> usize {
        self.column_offset
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn phases(&self) -> ArrayView1<'_, f64> {
        self.phases.view()
    }

    /// Columns `[a, b)` as a standalone basis.
    pub fn slice_columns(&self, range: Range<usize>) -> Result<ProjectionBasis> {
        let Range { start, end } = range;
        if start >= end || end > self.hd_dim() {
            return Err(Error::invalid(format!(
                "column range [{start}, {end}) is not a non-empty sub-range of [0, {})",
                self.hd_dim()
            )));
        }
        Ok(ProjectionBasis {
            seed: self.seed,
            column_offset: self.column_offset + start,
            weights: self
                .weights
                .slice(s![.., start..end])
                .as_standard_layout()
                .into_owned(),
            phases: self.phases.slice(s![start..end]).to_owned(),
        })
    }

    pub fn encode(&self, x: ArrayView1<'_, f64>) -> Result<HdVector> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, basis expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let row = x.insert_axis(Axis(0));
        let out = self.encode_rows(row);
        Ok(HdVector(out.row(0).to_owned()))
    }

    /// Encode every row of `x` (n×d) in one projection.
    pub fn encode_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input matrix has {} columns, basis expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(self.encode_rows(x))
    }

    fn encode_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let phases = &self.phases;
        linalg::project_map(x, self.weights.view(), |j, z| (z + phases[j]).cos() * z.sin())
    }
}

/// `1 - <a, b> / (|a| |b|)`, clamped to `[0, 2]`.
///
/// Returns 1.0 when either norm is below [`ZERO_NORM`]; the encoding of the
/// zero vector is the zero vector, so this case is reachable from valid input.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_distance on unequal lengths");
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    distance_from_parts(linalg::dot(a, b), na, nb)
}

/// Distance from a precomputed dot product and norms.
#[inline]
pub(crate) fn distance_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a < ZERO_NORM || norm_b < ZERO_NORM {
        return 1.0;
    }
    (1.0 - dot / (norm_a * norm_b)).clamp(0.0, 2.0)
}
