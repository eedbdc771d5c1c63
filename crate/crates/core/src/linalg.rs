//! Small deterministic numeric kernels.
//!
//! The projection kernel accumulates every output element over the inner
//! dimension in ascending order, one term at a time. Each output column is
//! therefore computed independently of every other column, which is what
//! makes column-sliced encodings bit-identical to the full encoding.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

const ROW_BLOCK: usize = 32;
const COL_BLOCK: usize = 512;

/// `x · w` followed by `finish(column, value)` on every element.
///
/// `x` is n×k, `w` is k×m with contiguous rows. Rows are processed in
/// independent blocks (optionally in parallel); the result does not depend on
/// the blocking or the number of threads.
pub fn project_map<F>(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, finish: F) -> Array2<f64>
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    let (n, k) = x.dim();
    let (k2, m) = w.dim();
    assert_eq!(k, k2, "inner dimensions must agree");
    let mut out = Array2::<f64>::zeros((n, m));
    if n == 0 || m == 0 {
        return out;
    }
    let w = w.as_standard_layout();
    let w_rows: Vec<&[f64]> = w
        .axis_iter(Axis(0))
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();

    out.axis_chunks_iter_mut(Axis(0), ROW_BLOCK)
        .into_par_iter()
        .enumerate()
        .for_each(|(block, mut out_block)| {
            let row0 = block * ROW_BLOCK;
            let rows = out_block.nrows();
            let mut acc = vec![0.0f64; rows * COL_BLOCK];
            for c0 in (0..m).step_by(COL_BLOCK) {
                let width = COL_BLOCK.min(m - c0);
                acc.iter_mut().for_each(|v| *v = 0.0);
                for (kk, w_row) in w_rows.iter().enumerate() {
                    let w_seg = &w_row[c0..c0 + width];
                    for r in 0..rows {
                        let xv = x[[row0 + r, kk]];
                        let a = &mut acc[r * COL_BLOCK..r * COL_BLOCK + width];
                        for (av, &wv) in a.iter_mut().zip(w_seg) {
                            *av += xv * wv;
                        }
                    }
                }
                for r in 0..rows {
                    for c in 0..width {
                        out_block[[r, c0 + c]] = finish(c0 + c, acc[r * COL_BLOCK + c]);
                    }
                }
            }
        });
    out
}

/// Dot product with a fixed four-lane reduction order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        lanes[0] += a[j] * b[j];
        lanes[1] += a[j + 1] * b[j + 1];
        lanes[2] += a[j + 2] * b[j + 2];
        lanes[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
