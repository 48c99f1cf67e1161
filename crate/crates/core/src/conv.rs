//! S² and SO(3) convolutions, computed block-wise in the spectrum.
//!
//! With `[ψ ⋆ f](R) = Σ_k ∫ ψ_k(R⁻¹x) f_k(x) dx` on either domain, real
//! signals and the transform conventions of [`crate::gft`]:
//!
//! * S² → SO(3): `ĥ^l_{mn} = Σ_k conj(f̂^l_{k,m}) ψ̂^l_{k,n} / (2l+1)`
//! * SO(3) → SO(3): `ĥ^l = Σ_k f̂^l_k (ψ̂^l_k)†`
//!
//! Both are checked against direct quadrature of the defining integral.
//! The output bandwidth is the filter bandwidth; higher degrees vanish.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gft::{check_bandwidth, s2_fft, so3_fft, Domain, S2Signal, S2Spectrum, SO3Grid, SO3Signal, SO3Spectrum};
use crate::harmonics::{so3_coeff_count, Rotation};
use crate::rotation::{eval_s2, eval_so3};

const S2_ORACLE_MAX_BANDWIDTH: usize = 8;
const SO3_ORACLE_MAX_BANDWIDTH: usize = 6;

/// Spectral filters for every `(out, in)` channel pair, stored out-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    domain: Domain,
    bandwidth: usize,
    in_channels: usize,
    out_channels: usize,
    coeffs: Vec<Complex64>,
}

fn pair_len(domain: Domain, b: usize) -> usize {
    match domain {
        Domain::S2 => b * b,
        Domain::SO3 => so3_coeff_count(b),
    }
}

impl FilterBank {
    pub fn zeros(domain: Domain, bandwidth: usize, in_channels: usize, out_channels: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(FilterBank {
            domain,
            bandwidth,
            in_channels,
            out_channels,
            coeffs: vec![Complex64::new(0.0, 0.0); in_channels * out_channels * pair_len(domain, bandwidth)],
        })
    }

    pub fn from_vec(
        domain: Domain,
        bandwidth: usize,
        in_channels: usize,
        out_channels: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        let expected = in_channels * out_channels * pair_len(domain, bandwidth);
        if coeffs.len() != expected {
            return Err(Error::Shape(format!(
                "filter bank needs {expected} coefficients, found {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("non-finite filter coefficient".into()));
        }
        Ok(FilterBank {
            domain,
            bandwidth,
            in_channels,
            out_channels,
            coeffs,
        })
    }

    /// Wraps an S² spectrum whose channels are the pairs in `(out, in)` order.
    pub fn from_s2(spectrum: S2Spectrum, out_channels: usize) -> Result<Self> {
        let in_channels = split_channels(spectrum.channels(), out_channels)?;
        let b = spectrum.bandwidth();
        FilterBank::from_vec(Domain::S2, b, in_channels, out_channels, spectrum.coeffs().to_vec())
    }

    /// Wraps an SO(3) spectrum whose channels are the pairs in `(out, in)` order.
    pub fn from_so3(spectrum: SO3Spectrum, out_channels: usize) -> Result<Self> {
        let in_channels = split_channels(spectrum.channels(), out_channels)?;
        let b = spectrum.bandwidth();
        FilterBank::from_vec(Domain::SO3, b, in_channels, out_channels, spectrum.coeffs().to_vec())
    }

    /// Gaussian filters of real signals, unit expected energy per pair.
    pub fn random_real<R: Rng + ?Sized>(
        domain: Domain,
        bandwidth: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let pairs = in_channels * out_channels;
        match domain {
            Domain::S2 => FilterBank::from_s2(S2Spectrum::random_real(bandwidth, pairs, rng)?, out_channels),
            Domain::SO3 => FilterBank::from_so3(SO3Spectrum::random_real(bandwidth, pairs, rng)?, out_channels),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn pair_len(&self) -> usize {
        pair_len(self.domain, self.bandwidth)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn pair(&self, out: usize, input: usize) -> &[Complex64] {
        let n = self.pair_len();
        let start = (out * self.in_channels + input) * n;
        &self.coeffs[start..start + n]
    }

    pub fn pair_mut(&mut self, out: usize, input: usize) -> &mut [Complex64] {
        let n = self.pair_len();
        let start = (out * self.in_channels + input) * n;
        &mut self.coeffs[start..start + n]
    }

    /// The pair spectra as one multichannel S² spectrum.
    pub fn to_s2(&self) -> Result<S2Spectrum> {
        self.expect(Domain::S2)?;
        S2Spectrum::from_vec(
            self.bandwidth,
            self.in_channels * self.out_channels,
            self.coeffs.clone(),
        )
    }

    /// The pair spectra as one multichannel SO(3) spectrum.
    pub fn to_so3(&self) -> Result<SO3Spectrum> {
        self.expect(Domain::SO3)?;
        SO3Spectrum::from_vec(
            self.bandwidth,
            self.in_channels * self.out_channels,
            self.coeffs.clone(),
        )
    }

    /// The `K_in`-channel S² filter feeding output channel `out`.
    pub fn output_s2(&self, out: usize) -> Result<S2Spectrum> {
        self.expect(Domain::S2)?;
        S2Spectrum::from_vec(self.bandwidth, self.in_channels, self.output_coeffs(out)?)
    }

    /// The `K_in`-channel SO(3) filter feeding output channel `out`.
    pub fn output_so3(&self, out: usize) -> Result<SO3Spectrum> {
        self.expect(Domain::SO3)?;
        SO3Spectrum::from_vec(self.bandwidth, self.in_channels, self.output_coeffs(out)?)
    }

    fn output_coeffs(&self, out: usize) -> Result<Vec<Complex64>> {
        if out >= self.out_channels {
            return Err(Error::Shape(format!("output channel {out} of {}", self.out_channels)));
        }
        Ok((0..self.in_channels).flat_map(|k| self.pair(out, k).to_vec()).collect())
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    fn expect(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            Err(Error::Shape(format!(
                "expected a {domain:?} filter bank, found {:?}",
                self.domain
            )))
        } else {
            Ok(())
        }
    }

    fn check_input(&self, domain: Domain, bandwidth: usize, channels: usize) -> Result<()> {
        self.expect(domain)?;
        if channels != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                found: channels,
            });
        }
        if bandwidth < self.bandwidth {
            return Err(Error::BandwidthMismatch {
                expected: self.bandwidth,
                found: bandwidth,
            });
        }
        Ok(())
    }
}

fn split_channels(pairs: usize, out_channels: usize) -> Result<usize> {
    if out_channels == 0 || pairs % out_channels != 0 {
        return Err(Error::Shape(format!(
            "{pairs} filter pairs do not split into {out_channels} outputs"
        )));
    }
    Ok(pairs / out_channels)
}

/// Offset of degree `l` inside one channel of an S² spectrum.
#[inline]
fn s2_block(l: usize) -> std::ops::Range<usize> {
    l * l..(l + 1) * (l + 1)
}

/// Offset of degree `l` inside one channel of an SO(3) spectrum.
#[inline]
fn so3_block(l: usize) -> std::ops::Range<usize> {
    let start = so3_coeff_count(l);
    start..start + (2 * l + 1) * (2 * l + 1)
}

/// Spectral S² convolution producing an SO(3) spectrum with
/// `psi.out_channels()` channels at the filter bandwidth.
pub fn s2_conv_spectral(f: &S2Spectrum, psi: &FilterBank) -> Result<SO3Spectrum> {
    psi.check_input(Domain::S2, f.bandwidth(), f.channels())?;
    let bf = psi.bandwidth();
    let mut out = SO3Spectrum::zeros(bf, psi.out_channels())?;
    out.coeffs_mut()
        .par_chunks_mut(so3_coeff_count(bf))
        .enumerate()
        .for_each(|(j, dst)| {
            for k in 0..psi.in_channels() {
                let fc = f.channel(k);
                let pc = psi.pair(j, k);
                for l in 0..bf {
                    let w = 2 * l + 1;
                    let scale = 1.0 / w as f64;
                    let fl = &fc[s2_block(l)];
                    let pl = &pc[s2_block(l)];
                    let hl = &mut dst[so3_block(l)];
                    for m in 0..w {
                        let a = fl[m].conj() * scale;
                        for n in 0..w {
                            hl[m * w + n] += a * pl[n];
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Spectral SO(3) convolution producing `psi.out_channels()` channels at
/// the filter bandwidth.
pub fn so3_conv_spectral(f: &SO3Spectrum, psi: &FilterBank) -> Result<SO3Spectrum> {
    psi.check_input(Domain::SO3, f.bandwidth(), f.channels())?;
    let bf = psi.bandwidth();
    let mut out = SO3Spectrum::zeros(bf, psi.out_channels())?;
    out.coeffs_mut()
        .par_chunks_mut(so3_coeff_count(bf))
        .enumerate()
        .for_each(|(j, dst)| {
            for k in 0..psi.in_channels() {
                let fc = f.channel(k);
                let pc = psi.pair(j, k);
                for l in 0..bf {
                    let w = 2 * l + 1;
                    let fl = &fc[so3_block(l)];
                    let pl = &pc[so3_block(l)];
                    let hl = &mut dst[so3_block(l)];
                    for p in 0..w {
                        for m in 0..w {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for n in 0..w {
                                acc += fl[p * w + n] * pl[m * w + n].conj();
                            }
                            hl[p * w + m] += acc;
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradient of a real loss with respect to the S² filters, given the
/// output gradient `grad` (as `∂L/∂Re + i ∂L/∂Im` per coefficient).
pub fn s2_conv_filter_grad(f: &S2Spectrum, psi: &FilterBank, grad: &SO3Spectrum) -> Result<FilterBank> {
    psi.check_input(Domain::S2, f.bandwidth(), f.channels())?;
    check_grad(psi, grad)?;
    let bf = psi.bandwidth();
    let mut out = FilterBank::zeros(Domain::S2, bf, psi.in_channels(), psi.out_channels())?;
    let kin = psi.in_channels();
    out.coeffs.par_chunks_mut(bf * bf).enumerate().for_each(|(pair, dst)| {
        let (j, k) = (pair / kin, pair % kin);
        let fc = f.channel(k);
        let gc = grad.channel(j);
        for l in 0..bf {
            let w = 2 * l + 1;
            let scale = 1.0 / w as f64;
            let fl = &fc[s2_block(l)];
            let gl = &gc[so3_block(l)];
            let dl = &mut dst[s2_block(l)];
            for n in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..w {
                    acc += fl[m] * gl[m * w + n];
                }
                dl[n] = acc * scale;
            }
        }
    });
    Ok(out)
}

/// Gradients of a real loss with respect to the SO(3) input spectrum and
/// filters, given the output gradient `grad`.
pub fn so3_conv_grads(f: &SO3Spectrum, psi: &FilterBank, grad: &SO3Spectrum) -> Result<(SO3Spectrum, FilterBank)> {
    psi.check_input(Domain::SO3, f.bandwidth(), f.channels())?;
    check_grad(psi, grad)?;
    let bf = psi.bandwidth();
    let kin = psi.in_channels();
    // g_F = Σ_j g_H Ψ, on degrees below the filter bandwidth.
    let mut gf = SO3Spectrum::zeros(f.bandwidth(), kin)?;
    gf.coeffs_mut()
        .par_chunks_mut(so3_coeff_count(f.bandwidth()))
        .enumerate()
        .for_each(|(k, dst)| {
            for j in 0..psi.out_channels() {
                let gc = grad.channel(j);
                let pc = psi.pair(j, k);
                for l in 0..bf {
                    let w = 2 * l + 1;
                    let gl = &gc[so3_block(l)];
                    let pl = &pc[so3_block(l)];
                    let dl = &mut dst[so3_block(l)];
                    for p in 0..w {
                        for n in 0..w {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for m in 0..w {
                                acc += gl[p * w + m] * pl[m * w + n];
                            }
                            dl[p * w + n] += acc;
                        }
                    }
                }
            }
        });
    // g_Ψ = g_H† F
    let mut gp = FilterBank::zeros(Domain::SO3, bf, kin, psi.out_channels())?;
    gp.coeffs
        .par_chunks_mut(so3_coeff_count(bf))
        .enumerate()
        .for_each(|(pair, dst)| {
            let (j, k) = (pair / kin, pair % kin);
            let gc = grad.channel(j);
            let fc = f.channel(k);
            for l in 0..bf {
                let w = 2 * l + 1;
                let gl = &gc[so3_block(l)];
                let fl = &fc[so3_block(l)];
                let dl = &mut dst[so3_block(l)];
                for m in 0..w {
                    for n in 0..w {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for p in 0..w {
                            acc += gl[p * w + m].conj() * fl[p * w + n];
                        }
                        dl[m * w + n] = acc;
                    }
                }
            }
        });
    Ok((gf, gp))
}

fn check_grad(psi: &FilterBank, grad: &SO3Spectrum) -> Result<()> {
    if grad.bandwidth() != psi.bandwidth() {
        return Err(Error::BandwidthMismatch {
            expected: psi.bandwidth(),
            found: grad.bandwidth(),
        });
    }
    if grad.channels() != psi.out_channels() {
        return Err(Error::ChannelMismatch {
            expected: psi.out_channels(),
            found: grad.channels(),
        });
    }
    Ok(())
}

fn check_oracle(b: usize, limit: usize, channels: usize, psi_channels: usize) -> Result<()> {
    if b > limit {
        return Err(Error::Domain(format!("oracle bandwidth {b} exceeds {limit}")));
    }
    if channels != psi_channels {
        return Err(Error::ChannelMismatch {
            expected: channels,
            found: psi_channels,
        });
    }
    Ok(())
}

/// Direct quadrature of `Σ_k ∫ f_k(x) ψ_k(R⁻¹x) dx` for every `R` on
/// `grid_out`, with `ψ` evaluated pointwise from its spectrum. `psi` holds
/// one channel per input channel; the result has one channel.
pub fn s2_conv_spatial_oracle(f: &S2Signal, psi: &S2Signal, grid_out: &SO3Grid) -> Result<SO3Signal> {
    let b = f.bandwidth();
    check_oracle(b, S2_ORACLE_MAX_BANDWIDTH, f.channels(), psi.channels())?;
    if psi.bandwidth() != b {
        return Err(Error::BandwidthMismatch {
            expected: b,
            found: psi.bandwidth(),
        });
    }
    let psi_hat = s2_fft(psi)?;
    let grid = crate::gft::S2Grid::new(b)?;
    let n = grid_out.size();
    let mut values = vec![0.0; n * n * n];
    values.par_chunks_mut(n * n).enumerate().for_each(|(ia, slab)| {
        for (ib, &beta) in grid_out.betas.iter().enumerate() {
            for (ig, &gamma) in grid_out.gammas.iter().enumerate() {
                let inv = Rotation::new(grid_out.alphas[ia], beta, gamma).inverse();
                let mut total = 0.0;
                for c in 0..f.channels() {
                    for (j, &theta) in grid.thetas.iter().enumerate() {
                        let mut ring = 0.0;
                        for (k, &phi) in grid.phis.iter().enumerate() {
                            let (t, p) = inv.apply_to_direction(theta, phi);
                            ring += f.get(c, j, k) * eval_s2(&psi_hat, c, t, p);
                        }
                        total += grid.weights[j] * ring;
                    }
                }
                slab[ib * n + ig] = total;
            }
        }
    });
    SO3Signal::from_vec(grid_out.bandwidth, 1, values)
}

/// Direct quadrature of `Σ_k ∫ f_k(Q) ψ_k(R⁻¹Q) dQ` over the normalized
/// Haar measure for every `R` on `grid_out`.
pub fn so3_conv_spatial_oracle(f: &SO3Signal, psi: &SO3Signal, grid_out: &SO3Grid) -> Result<SO3Signal> {
    let b = f.bandwidth();
    check_oracle(b, SO3_ORACLE_MAX_BANDWIDTH, f.channels(), psi.channels())?;
    if psi.bandwidth() != b {
        return Err(Error::BandwidthMismatch {
            expected: b,
            found: psi.bandwidth(),
        });
    }
    let psi_hat = so3_fft(psi)?;
    let grid = SO3Grid::new(b)?;
    let m = grid.size();
    let mut points = Vec::with_capacity(m * m * m);
    for &a in &grid.alphas {
        for (ib, &be) in grid.betas.iter().enumerate() {
            for &g in &grid.gammas {
                points.push((Rotation::new(a, be, g), grid.weights[ib]));
            }
        }
    }
    let n = grid_out.size();
    let mut values = vec![0.0; n * n * n];
    let channels = f.channels();
    let result: Result<()> = values.par_chunks_mut(n * n).enumerate().try_for_each(|(ia, slab)| {
        for (ib, &beta) in grid_out.betas.iter().enumerate() {
            for (ig, &gamma) in grid_out.gammas.iter().enumerate() {
                let inv = Rotation::new(grid_out.alphas[ia], beta, gamma).inverse();
                let mut total = 0.0;
                for (idx, (q, w)) in points.iter().enumerate() {
                    let rel = inv.compose(q);
                    for c in 0..channels {
                        let fv = f.channel(c)[idx];
                        if fv != 0.0 {
                            total += w * fv * eval_so3(&psi_hat, c, &rel)?;
                        }
                    }
                }
                slab[ib * n + ig] = total;
            }
        }
        Ok(())
    });
    result?;
    SO3Signal::from_vec(grid_out.bandwidth, 1, values)
}
