//! Spherical harmonic transform by separation of variables: a length-`2b`
//! FFT along each colatitude ring followed by a weighted Legendre
//! contraction per order `m`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::S2Grid;
use super::types::{S2Signal, S2Spectrum};
use crate::error::{Error, Result};
use crate::harmonics::{normalized_legendre, tri_index};

/// Precomputed tables for forward and inverse transforms at one bandwidth.
pub struct S2Transform {
    grid: S2Grid,
    /// `λ_l^m(θ_j)` per ring, triangular layout.
    legendre: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl S2Transform {
    pub fn new(bandwidth: usize) -> Result<Self> {
        let grid = S2Grid::new(bandwidth)?;
        let legendre = grid.thetas.iter().map(|&t| normalized_legendre(bandwidth, t)).collect();
        let mut planner = FftPlanner::new();
        Ok(S2Transform {
            fft: planner.plan_fft_forward(2 * bandwidth),
            ifft: planner.plan_fft_inverse(2 * bandwidth),
            grid,
            legendre,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.grid.bandwidth
    }

    pub fn grid(&self) -> &S2Grid {
        &self.grid
    }

    /// `f̂^l_m = ∫ f conj(Y^l_m) dx` by exact quadrature.
    pub fn forward(&self, signal: &S2Signal) -> Result<S2Spectrum> {
        self.check(signal.bandwidth())?;
        let b = self.bandwidth();
        let mut out = S2Spectrum::zeros(b, signal.channels())?;
        let chan_len = b * b;
        out.coeffs_mut()
            .par_chunks_mut(chan_len)
            .enumerate()
            .for_each(|(c, dst)| self.forward_channel(signal.channel(c), dst));
        Ok(out)
    }

    fn forward_channel(&self, values: &[f64], dst: &mut [Complex64]) {
        let b = self.bandwidth();
        let n = 2 * b;
        let mut ring = vec![Complex64::new(0.0, 0.0); n];
        for (j, row) in values.chunks_exact(n).enumerate() {
            for (z, &v) in ring.iter_mut().zip(row) {
                *z = Complex64::new(v, 0.0);
            }
            self.fft.process(&mut ring);
            let w = self.grid.weights[j];
            let lam = &self.legendre[j];
            for l in 0..b {
                let base = l * l + l;
                for m in 0..=l {
                    let p = w * lam[tri_index(l, m)];
                    dst[base + m] += ring[m] * p;
                    if m > 0 {
                        // λ_{l,-m} = (-1)^m λ_{l,m}
                        let s = if m % 2 == 0 { p } else { -p };
                        dst[base - m] += ring[n - m] * s;
                    }
                }
            }
        }
    }

    /// `f(x) = Σ_{l,m} f̂^l_m Y^l_m(x)` on the grid; the real part is kept.
    pub fn inverse(&self, spectrum: &S2Spectrum) -> Result<S2Signal> {
        self.check(spectrum.bandwidth())?;
        let b = self.bandwidth();
        let n = 2 * b;
        let mut out = S2Signal::zeros(b, spectrum.channels())?;
        out.values_mut()
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(c, dst)| self.inverse_channel(spectrum.channel(c), dst));
        Ok(out)
    }

    fn inverse_channel(&self, coeffs: &[Complex64], dst: &mut [f64]) {
        let b = self.bandwidth();
        let n = 2 * b;
        let mut ring = vec![Complex64::new(0.0, 0.0); n];
        for (j, row) in dst.chunks_exact_mut(n).enumerate() {
            ring.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let lam = &self.legendre[j];
            for l in 0..b {
                let base = l * l + l;
                for m in 0..=l {
                    let p = lam[tri_index(l, m)];
                    ring[m] += coeffs[base + m] * p;
                    if m > 0 {
                        let s = if m % 2 == 0 { p } else { -p };
                        ring[n - m] += coeffs[base - m] * s;
                    }
                }
            }
            self.ifft.process(&mut ring);
            for (v, z) in row.iter_mut().zip(&ring) {
                *v = z.re;
            }
        }
    }

    fn check(&self, b: usize) -> Result<()> {
        if b != self.bandwidth() {
            Err(Error::BandwidthMismatch {
                expected: self.bandwidth(),
                found: b,
            })
        } else {
            Ok(())
        }
    }
}

pub fn s2_fft(signal: &S2Signal) -> Result<S2Spectrum> {
    S2Transform::new(signal.bandwidth())?.forward(signal)
}

pub fn s2_ifft(spectrum: &S2Spectrum) -> Result<S2Signal> {
    S2Transform::new(spectrum.bandwidth())?.inverse(spectrum)
}
