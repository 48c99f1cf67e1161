//! SO(3) Fourier transform: a 2D FFT over `(α, γ)` for every `β` slice, then
//! a weighted Wigner-d contraction over `β`. Cost `O(b^4)` per channel.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::SO3Grid;
use super::types::{SO3Signal, SO3Spectrum};
use crate::error::{Error, Result};
use crate::harmonics::{so3_coeff_count, wigner_d};

/// Precomputed Wigner-d tables and FFT plans for one bandwidth.
pub struct So3Transform {
    grid: SO3Grid,
    /// `d^l_{mn}(β_j)` per slice, packed like one spectrum channel.
    dtables: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    ones: Vec<f64>,
    degree_dim: Vec<f64>,
    degree_one: Vec<f64>,
}

#[inline]
fn wrap(k: isize, n: usize) -> usize {
    if k >= 0 {
        k as usize
    } else {
        (n as isize + k) as usize
    }
}

/// In-place 2D transform of an `n × n` row-major buffer.
fn fft2(plan: &dyn Fft<f64>, buf: &mut [Complex64], scratch: &mut [Complex64], n: usize) {
    plan.process(buf);
    for i in 0..n {
        for j in 0..n {
            scratch[j * n + i] = buf[i * n + j];
        }
    }
    plan.process(scratch);
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = scratch[j * n + i];
        }
    }
}

impl So3Transform {
    pub fn new(bandwidth: usize) -> Result<Self> {
        let grid = SO3Grid::new(bandwidth)?;
        let dtables = grid
            .betas
            .iter()
            .map(|&beta| wigner_d(bandwidth, beta).map(|d| d.as_slice().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let mut planner = FftPlanner::new();
        let n = 2 * bandwidth;
        Ok(So3Transform {
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            ones: vec![1.0; n],
            degree_dim: (0..bandwidth).map(|l| (2 * l + 1) as f64).collect(),
            degree_one: vec![1.0; bandwidth],
            grid,
            dtables,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.grid.bandwidth
    }

    pub fn grid(&self) -> &SO3Grid {
        &self.grid
    }

    /// `f̂^l_{mn} = ∫ f(R) conj(D^l_{mn}(R)) dR` by exact quadrature.
    pub fn forward(&self, signal: &SO3Signal) -> Result<SO3Spectrum> {
        self.check(signal.bandwidth())?;
        self.analysis(signal, &self.grid.weights, &self.degree_one)
    }

    /// `f(R) = Σ_l (2l+1) Σ_{mn} f̂^l_{mn} D^l_{mn}(R)` on the grid; the real
    /// part is kept.
    pub fn inverse(&self, spectrum: &SO3Spectrum) -> Result<SO3Signal> {
        self.check(spectrum.bandwidth())?;
        self.synthesis(spectrum, &self.ones, &self.degree_dim)
    }

    /// Adjoint of [`Self::inverse`] viewed as a complex-linear map into
    /// complex samples: `g ↦ (2l+1) Σ_R conj(D^l_{mn}(R)) g(R)`.
    pub fn inverse_adjoint(&self, samples: &SO3Signal) -> Result<SO3Spectrum> {
        self.check(samples.bandwidth())?;
        self.analysis(samples, &self.ones, &self.degree_dim)
    }

    /// Real part of the adjoint of [`Self::forward`]:
    /// `G ↦ Re(w_R Σ_{l,m,n} D^l_{mn}(R) G^l_{mn})`.
    pub fn forward_adjoint(&self, spectrum: &SO3Spectrum) -> Result<SO3Signal> {
        self.check(spectrum.bandwidth())?;
        self.synthesis(spectrum, &self.grid.weights, &self.degree_one)
    }

    fn analysis(&self, signal: &SO3Signal, slice_weights: &[f64], degree_scale: &[f64]) -> Result<SO3Spectrum> {
        let b = self.bandwidth();
        let mut out = SO3Spectrum::zeros(b, signal.channels())?;
        out.coeffs_mut()
            .par_chunks_mut(so3_coeff_count(b))
            .enumerate()
            .for_each(|(c, dst)| self.analysis_channel(signal.channel(c), dst, slice_weights, degree_scale));
        Ok(out)
    }

    fn analysis_channel(&self, values: &[f64], dst: &mut [Complex64], slice_weights: &[f64], degree_scale: &[f64]) {
        let b = self.bandwidth();
        let n = 2 * b;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        let mut scratch = buf.clone();
        for j in 0..n {
            for a in 0..n {
                for g in 0..n {
                    buf[a * n + g] = Complex64::new(values[(a * n + j) * n + g], 0.0);
                }
            }
            // Σ f e^{+imα} e^{+inγ}
            fft2(&*self.ifft, &mut buf, &mut scratch, n);
            let w = slice_weights[j];
            let table = &self.dtables[j];
            let mut pos = 0;
            for l in 0..b {
                let li = l as isize;
                let s = w * degree_scale[l];
                for m in -li..=li {
                    let row = wrap(m, n) * n;
                    for k in -li..=li {
                        dst[pos] += buf[row + wrap(k, n)] * (s * table[pos]);
                        pos += 1;
                    }
                }
            }
        }
    }

    fn synthesis(&self, spectrum: &SO3Spectrum, slice_weights: &[f64], degree_scale: &[f64]) -> Result<SO3Signal> {
        let b = self.bandwidth();
        let n = 2 * b;
        let mut out = SO3Signal::zeros(b, spectrum.channels())?;
        out.values_mut()
            .par_chunks_mut(n * n * n)
            .enumerate()
            .for_each(|(c, dst)| self.synthesis_channel(spectrum.channel(c), dst, slice_weights, degree_scale));
        Ok(out)
    }

    fn synthesis_channel(&self, coeffs: &[Complex64], dst: &mut [f64], slice_weights: &[f64], degree_scale: &[f64]) {
        let b = self.bandwidth();
        let n = 2 * b;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        let mut scratch = buf.clone();
        for j in 0..n {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let table = &self.dtables[j];
            let mut pos = 0;
            for l in 0..b {
                let li = l as isize;
                let s = degree_scale[l];
                for m in -li..=li {
                    let row = wrap(m, n) * n;
                    for k in -li..=li {
                        buf[row + wrap(k, n)] += coeffs[pos] * (s * table[pos]);
                        pos += 1;
                    }
                }
            }
            // Σ G e^{-imα} e^{-inγ}
            fft2(&*self.fft, &mut buf, &mut scratch, n);
            let w = slice_weights[j];
            for a in 0..n {
                for g in 0..n {
                    dst[(a * n + j) * n + g] = w * buf[a * n + g].re;
                }
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

pub fn so3_fft(signal: &SO3Signal) -> Result<SO3Spectrum> {
    So3Transform::new(signal.bandwidth())?.forward(signal)
}

pub fn so3_ifft(spectrum: &SO3Spectrum) -> Result<SO3Signal> {
    So3Transform::new(spectrum.bandwidth())?.inverse(spectrum)
}
