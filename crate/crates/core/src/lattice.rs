//! Padded storage for fields on the box `B(K) = {x : ‖x‖_∞ ≤ K}`.
//!
//! Fields are stored row-major (last coordinate fastest) inside a frame of
//! zeros of width `pad ≥ R_0`, so the generator stencil can be applied with
//! flat offsets and no bounds checks. The frame is never written, which
//! realizes the absorbing (read-as-zero) boundary rule.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{ModelError, StepDistribution};

#[derive(Debug, Clone)]
pub(crate) struct PaddedGrid {
    pub dim: usize,
    pub radius: usize,
    pub side: usize,
    pub padded_side: usize,
    pub pad: usize,
    pub len: usize,
    /// Padded flat index of the first site of every line along the last axis.
    pub line_starts: Vec<usize>,
    /// Stencil taps `(flat offset, τ(y))` for `y ≠ 0`.
    pub taps: Vec<(isize, f64)>,
    /// `1 − τ(0)`.
    pub leave_rate: f64,
}

impl PaddedGrid {
    pub fn new(step: &StepDistribution, radius: usize) -> Result<Self, ModelError> {
        let r0 = step.range();
        if radius < r0 {
            return Err(ModelError::BoxTooSmall { radius, range: r0 });
        }
        let dim = step.dim();
        let side = 2 * radius + 1;
        let pad = r0;
        let padded_side = side + 2 * pad;
        let len = padded_side.pow(dim as u32);

        let lines = side.pow(dim as u32 - 1);
        let mut line_starts = Vec::with_capacity(lines);
        for line in 0..lines {
            let mut rem = line;
            let mut idx = pad;
            let mut scale = padded_side;
            for _ in 0..dim - 1 {
                idx += (rem % side + pad) * scale;
                rem /= side;
                scale *= padded_side;
            }
            line_starts.push(idx);
        }

        let mut taps = Vec::new();
        let mut stay = 0.0;
        for (site, p) in step.support() {
            if site.iter().all(|&c| c == 0) {
                stay += p;
                continue;
            }
            let mut off = 0isize;
            for &c in site.iter() {
                off = off * padded_side as isize + c as isize;
            }
            taps.push((off, *p));
        }

        Ok(Self {
            dim,
            radius,
            side,
            padded_side,
            pad,
            len,
            line_starts,
            taps,
            leave_rate: 1.0 - stay,
        })
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.len]
    }

    /// Number of sites in the box.
    pub fn sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn padded_index(&self, site: &[i64]) -> Option<usize> {
        if site.len() != self.dim {
            return None;
        }
        let k = self.radius as i64;
        let mut idx = 0usize;
        for &c in site {
            if c < -k || c > k {
                return None;
            }
            idx = idx * self.padded_side + (c + k) as usize + self.pad;
        }
        Some(idx)
    }

    /// Copies a compact row-major field into padded storage.
    pub fn pack(&self, compact: &[f64], padded: &mut [f64]) {
        for (line, &start) in self.line_starts.iter().enumerate() {
            let src = &compact[line * self.side..(line + 1) * self.side];
            padded[start..start + self.side].copy_from_slice(src);
        }
    }

    pub fn unpack(&self, padded: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sites());
        for &start in &self.line_starts {
            out.extend_from_slice(&padded[start..start + self.side]);
        }
        out
    }

    /// Generator at padded index `i`: `Σ_{y≠0} τ(y) h(x+y) − (1 − τ(0)) h(x)`.
    #[inline(always)]
    pub fn drift_at(&self, h: &[f64], i: usize) -> f64 {
        let mut acc = -self.leave_rate * h[i];
        for &(off, p) in &self.taps {
            acc += p * h[(i as isize + off) as usize];
        }
        acc
    }

    /// `out = G h` on the box; the frame of `out` is left untouched.
    pub fn apply(&self, h: &[f64], out: &mut [f64]) {
        for &start in &self.line_starts {
            for i in start..start + self.side {
                out[i] = self.drift_at(h, i);
            }
        }
    }

    /// `out = h * τ` (convolution with the jump law), restricted to the box.
    pub fn convolve(&self, h: &[f64], out: &mut [f64]) {
        let stay = 1.0 - self.leave_rate;
        for &start in &self.line_starts {
            for i in start..start + self.side {
                let mut acc = stay * h[i];
                for &(off, p) in &self.taps {
                    acc += p * h[(i as isize - off) as usize];
                }
                out[i] = acc;
            }
        }
    }

    /// Sum over the box of padded storage.
    pub fn sum(&self, padded: &[f64]) -> f64 {
        let mut s = 0.0;
        for &start in &self.line_starts {
            s += padded[start..start + self.side].iter().sum::<f64>();
        }
        s
    }

    /// Padded indices of box sites whose sup-norm exceeds `radius − width`.
    pub fn shell(&self, width: usize) -> Vec<usize> {
        let k = self.radius as i64;
        let inner = k - width as i64;
        let mut out = Vec::new();
        let mut coords = vec![0i64; self.dim];
        for (line, &start) in self.line_starts.iter().enumerate() {
            // decode leading coordinates of this line
            let mut rem = line;
            for j in (0..self.dim - 1).rev() {
                coords[j] = (rem % self.side) as i64 - k;
                rem /= self.side;
            }
            let lead_outside = coords[..self.dim - 1].iter().any(|c| c.abs() > inner);
            for (offset, i) in (start..start + self.side).enumerate() {
                let last = offset as i64 - k;
                if lead_outside || last.abs() > inner {
                    out.push(i);
                }
            }
        }
        out
    }
}
