//! Kernel application on regular grids by zero-padded FFT convolution.
//!
//! On a mask domain every node is a cell center of one `nx × ny` grid, so
//! k(x_i, x_j) depends only on the cell offset. The offset table is
//! transformed once; each application costs four batches of 1-D FFTs over a
//! `2nx × 2ny` buffer. Rows are transformed independently, so the result
//! does not depend on how rayon schedules them.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::GridLayout;
use crate::kernels::Profile;

pub(crate) struct GridConvolution {
    ny: usize,
    px: usize,
    py: usize,
    /// Flat index `iy * px + ix` of each node in the padded buffer.
    slots: Vec<usize>,
    /// Transform of the offset table, stored transposed (`px` rows of `py`).
    kernel_hat: Vec<Complex64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl GridConvolution {
    pub(crate) fn new(grid: &GridLayout, profile: Profile, singular: bool) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (px, py) = (2 * nx, 2 * ny);
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(px);
        let row_inv = planner.plan_fft_inverse(px);
        let col_fwd = planner.plan_fft_forward(py);
        let col_inv = planner.plan_fft_inverse(py);

        // Offsets wrap: slot s < n is +s, slot s > n is s − 2n, slot n unused.
        let offset = |s: usize, n: usize| -> Option<f64> {
            if s < n {
                Some(s as f64)
            } else if s > n {
                Some(s as f64 - 2.0 * n as f64)
            } else {
                None
            }
        };
        let mut table = vec![Complex64::new(0.0, 0.0); px * py];
        for sy in 0..py {
            let Some(dy) = offset(sy, ny) else { continue };
            for sx in 0..px {
                let Some(dx) = offset(sx, nx) else { continue };
                let value = if sx == 0 && sy == 0 && singular {
                    0.0
                } else {
                    profile.at((dx * grid.hx).hypot(dy * grid.hy))
                };
                table[sy * px + sx] = Complex64::new(value, 0.0);
            }
        }
        table
            .par_chunks_mut(px)
            .for_each(|row| row_fwd.process(row));
        let mut kernel_hat = transpose(&table, py, px);
        kernel_hat
            .par_chunks_mut(py)
            .for_each(|col| col_fwd.process(col));

        let slots = grid.cells.iter().map(|&(ix, iy)| iy * px + ix).collect();
        GridConvolution {
            ny,
            px,
            py,
            slots,
            kernel_hat,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
        }
    }

    /// out_i = Σ_j k(x_i, x_j) u_j.
    pub(crate) fn apply(&self, u: &[f64]) -> Vec<f64> {
        let (ny, px, py) = (self.ny, self.px, self.py);
        let mut buf = vec![Complex64::new(0.0, 0.0); px * py];
        for (&slot, &v) in self.slots.iter().zip(u) {
            buf[slot] = Complex64::new(v, 0.0);
        }
        // Rows ≥ ny are zero before the row pass.
        buf[..ny * px]
            .par_chunks_mut(px)
            .for_each(|row| self.row_fwd.process(row));
        let mut t = transpose(&buf, py, px);
        t.par_chunks_mut(py)
            .zip(self.kernel_hat.par_chunks(py))
            .for_each(|(col, k)| {
                self.col_fwd.process(col);
                for (c, kk) in col.iter_mut().zip(k) {
                    *c *= kk;
                }
                self.col_inv.process(col);
            });
        // Only the first ny rows carry node outputs.
        let mut rows = vec![Complex64::new(0.0, 0.0); ny * px];
        for sx in 0..px {
            for sy in 0..ny {
                rows[sy * px + sx] = t[sx * py + sy];
            }
        }
        rows.par_chunks_mut(px)
            .for_each(|row| self.row_inv.process(row));
        let scale = 1.0 / (px * py) as f64;
        self.slots.iter().map(|&s| rows[s].re * scale).collect()
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
    dst
}
