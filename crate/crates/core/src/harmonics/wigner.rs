//! Wigner little-d and big-D matrices.
//!
//! `D^l_{mn}(α, β, γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}`, so that
//! `D^l(R) D^l(R') = D^l(R R')` with rotations composed as 3×3 matrices.

use std::ops::Index;

use num_complex::Complex64;

use super::euler::Rotation;
use crate::error::{Error, Result};

/// Number of entries in the blocks `l = 0..bandwidth`: `Σ (2l+1)^2`.
pub const fn so3_coeff_count(bandwidth: usize) -> usize {
    (4 * bandwidth * bandwidth * bandwidth - bandwidth) / 3
}

/// Offset of block `l` in a packed stack of `(2l+1)×(2l+1)` blocks.
#[inline]
pub const fn block_offset(l: usize) -> usize {
    so3_coeff_count(l)
}

/// Stack of per-degree square matrices indexed by `m, n ∈ [-l, l]`,
/// row-major within each block.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerBlocks<T> {
    bandwidth: usize,
    data: Vec<T>,
}

impl<T: Copy> WignerBlocks<T> {
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn block(&self, l: usize) -> &[T] {
        let n = 2 * l + 1;
        &self.data[block_offset(l)..block_offset(l) + n * n]
    }

    pub fn get(&self, l: usize, m: isize, n: isize) -> T {
        let w = 2 * l + 1;
        let (i, j) = ((m + l as isize) as usize, (n + l as isize) as usize);
        self.data[block_offset(l) + i * w + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T: Copy> Index<(usize, isize, isize)> for WignerBlocks<T> {
    type Output = T;

    fn index(&self, (l, m, n): (usize, isize, isize)) -> &T {
        let w = 2 * l + 1;
        let (i, j) = ((m + l as isize) as usize, (n + l as isize) as usize);
        &self.data[block_offset(l) + i * w + j]
    }
}

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `c^a s^b` with `0^0 = 1`, evaluated in log space when both are nonzero.
fn pow_pair(ln_scale: f64, c: f64, a: usize, s: f64, b: usize) -> f64 {
    if (a > 0 && c == 0.0) || (b > 0 && s == 0.0) {
        return 0.0;
    }
    let mut lg = ln_scale;
    if a > 0 {
        lg += a as f64 * c.ln();
    }
    if b > 0 {
        lg += b as f64 * s.ln();
    }
    lg.exp()
}

/// Closed-form `d^j_{mn}(β)` on the boundary `j = max(|m|, |n|)`.
fn d_seed(j: usize, m: isize, n: isize, c: f64, s: f64, lnf: &[f64]) -> f64 {
    let ji = j as isize;
    let sign = |k: isize| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    // ln sqrt((2j)! / ((j+k)! (j-k)!))
    let ln_c = |k: isize| 0.5 * (lnf[2 * j] - lnf[(ji + k) as usize] - lnf[(ji - k) as usize]);
    if m == ji {
        sign(ji - n) * pow_pair(ln_c(n), c, (ji + n) as usize, s, (ji - n) as usize)
    } else if m == -ji {
        pow_pair(ln_c(n), c, (ji - n) as usize, s, (ji + n) as usize)
    } else if n == ji {
        pow_pair(ln_c(m), c, (ji + m) as usize, s, (ji - m) as usize)
    } else {
        sign(ji + m) * pow_pair(ln_c(m), c, (ji - m) as usize, s, (ji + m) as usize)
    }
}

/// Real orthogonal `d^l(β)` for `l = 0..bandwidth`.
///
/// Each `(m, n)` column is seeded at `l = max(|m|, |n|)` from the closed form
/// and carried upward by the three-term recurrence in `l`.
pub fn wigner_d(bandwidth: usize, beta: f64) -> Result<WignerBlocks<f64>> {
    if bandwidth == 0 {
        return Err(Error::BandwidthOutOfRange(0));
    }
    if !(0.0..=std::f64::consts::PI).contains(&beta) {
        return Err(Error::domain(format!("beta = {beta} outside [0, π]")));
    }
    let mut data = vec![0.0; so3_coeff_count(bandwidth)];
    let lnf = ln_factorials(2 * bandwidth);
    let (s, c) = (beta / 2.0).sin_cos();
    let cb = beta.cos();
    let top = bandwidth as isize - 1;
    let put = |data: &mut [f64], l: usize, m: isize, n: isize, v: f64| {
        let w = 2 * l + 1;
        data[block_offset(l) + (m + l as isize) as usize * w + (n + l as isize) as usize] = v;
    };
    for m in -top..=top {
        for n in -top..=top {
            let l0 = m.unsigned_abs().max(n.unsigned_abs());
            let (mf, nf) = (m as f64, n as f64);
            let mut prev = 0.0;
            let mut cur = d_seed(l0, m, n, c, s, &lnf);
            put(&mut data, l0, m, n, cur);
            for l in l0..bandwidth - 1 {
                let lf = l as f64;
                let l1 = lf + 1.0;
                let denom = ((l1 * l1 - mf * mf) * (l1 * l1 - nf * nf)).sqrt();
                let next = if l == 0 {
                    cb * cur
                } else {
                    let a = (2.0 * lf + 1.0) * (lf * l1 * cb - mf * nf) / (lf * denom);
                    let b = l1 * ((lf * lf - mf * mf) * (lf * lf - nf * nf)).sqrt() / (lf * denom);
                    a * cur - b * prev
                };
                prev = cur;
                cur = next;
                put(&mut data, l + 1, m, n, cur);
            }
        }
    }
    Ok(WignerBlocks { bandwidth, data })
}

/// Complex `D^l(R)` for `l = 0..bandwidth`.
#[allow(non_snake_case)]
pub fn wigner_D(bandwidth: usize, rotation: &Rotation) -> Result<WignerBlocks<Complex64>> {
    let small = wigner_d(bandwidth, rotation.beta())?;
    let (alpha, gamma) = (rotation.alpha(), rotation.gamma());
    let mut data = Vec::with_capacity(small.data.len());
    for l in 0..bandwidth {
        let li = l as isize;
        let block = small.block(l);
        let w = 2 * l + 1;
        for (i, m) in (-li..=li).enumerate() {
            for (j, n) in (-li..=li).enumerate() {
                let phase = Complex64::from_polar(1.0, -(m as f64) * alpha - (n as f64) * gamma);
                data.push(phase * block[i * w + j]);
            }
        }
    }
    Ok(WignerBlocks { bandwidth, data })
}
