use std::collections::HashMap;

use super::{disk_mask, Offset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpMethod {
    Nearest,
    Bicubic,
}

/// Compressed-row sparse operator over disk-mask pixels.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, weight)` entries of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub(crate) fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Interpolation operator rotating a disk patch by `angle` radians: the row of
/// destination pixel `k` samples the source at `rot(-angle)·k`. Source samples
/// outside the disk contribute zero.
pub fn build_interp_rotation(n: usize, angle: f64, method: InterpMethod) -> Result<SparseOperator> {
    if !angle.is_finite() {
        return Err(Error::invalid("rotation angle must be finite"));
    }
    let mask = disk_mask(n)?;
    let index: HashMap<Offset, usize> = mask.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let (sin, cos) = angle.sin_cos();
    let mut row_ptr = Vec::with_capacity(mask.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for &(dy, dx) in &mask {
        let (x, y) = (f64::from(dx), f64::from(dy));
        let sx = cos * x + sin * y;
        let sy = -sin * x + cos * y;
        match method {
            InterpMethod::Nearest => {
                let k = (sy.round() as i32, sx.round() as i32);
                if let Some(&j) = index.get(&k) {
                    cols.push(j);
                    vals.push(1.0);
                }
            }
            InterpMethod::Bicubic => {
                let (x0, y0) = (sx.floor(), sy.floor());
                for oy in -1..=2 {
                    let wy = cubic(sy - (y0 + f64::from(oy)));
                    if wy == 0.0 {
                        continue;
                    }
                    for ox in -1..=2 {
                        let wx = cubic(sx - (x0 + f64::from(ox)));
                        if wx == 0.0 {
                            continue;
                        }
                        let k = (y0 as i32 + oy, x0 as i32 + ox);
                        if let Some(&j) = index.get(&k) {
                            cols.push(j);
                            vals.push(wx * wy);
                        }
                    }
                }
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator {
        dim: mask.len(),
        row_ptr,
        cols,
        vals,
    })
}
