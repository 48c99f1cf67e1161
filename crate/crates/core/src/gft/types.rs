use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::harmonics::{block_offset, so3_coeff_count};

use super::grid::{check_bandwidth, S2Grid, SO3Grid};

/// Which manifold a signal or spectrum lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    S2,
    SO3,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Domain::S2 => 1,
            Domain::SO3 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Domain::S2),
            2 => Some(Domain::SO3),
            _ => None,
        }
    }
}

/// Position of `(l, m)`, `|m| <= l`, in a per-channel S² coefficient vector.
#[inline]
pub const fn s2_index(l: usize, m: isize) -> usize {
    ((l * l + l) as isize + m) as usize
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Shape(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::Shape(format!("expected {expected} values, found {found}")))
    } else {
        Ok(())
    }
}

/// Real multichannel samples on the `2b × 2b` sphere grid, `[channel, θ, φ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct S2Signal {
    bandwidth: usize,
    channels: usize,
    values: Vec<f64>,
}

impl S2Signal {
    pub fn zeros(bandwidth: usize, channels: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(S2Signal {
            bandwidth,
            channels,
            values: vec![0.0; channels * 4 * bandwidth * bandwidth],
        })
    }

    pub fn from_vec(bandwidth: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        check_len(channels * 4 * bandwidth * bandwidth, values.len())?;
        check_finite(&values)?;
        Ok(S2Signal {
            bandwidth,
            channels,
            values,
        })
    }

    /// Samples `f(channel, θ, φ)` on the grid.
    pub fn from_fn(bandwidth: usize, channels: usize, f: impl Fn(usize, f64, f64) -> f64) -> Result<Self> {
        let grid = S2Grid::new(bandwidth)?;
        let mut values = Vec::with_capacity(channels * 4 * bandwidth * bandwidth);
        for c in 0..channels {
            for &t in &grid.thetas {
                for &p in &grid.phis {
                    values.push(f(c, t, p));
                }
            }
        }
        S2Signal::from_vec(bandwidth, channels, values)
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel_len(&self) -> usize {
        4 * self.bandwidth * self.bandwidth
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.channel_len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, j: usize, k: usize) -> f64 {
        let n = 2 * self.bandwidth;
        self.values[(c * n + j) * n + k]
    }

    /// Quadrature `∫ Σ_c f_c^2 dx` with the sphere's `4π` measure.
    pub fn energy(&self) -> f64 {
        let grid = S2Grid::new(self.bandwidth).expect("valid bandwidth");
        let squares: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        squares
            .chunks_exact(self.channel_len())
            .map(|ch| grid.integrate(ch))
            .sum()
    }
}

/// Real multichannel samples on the `(2b)^3` SO(3) grid, `[channel, α, β, γ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SO3Signal {
    bandwidth: usize,
    channels: usize,
    values: Vec<f64>,
}

impl SO3Signal {
    pub fn zeros(bandwidth: usize, channels: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(SO3Signal {
            bandwidth,
            channels,
            values: vec![0.0; channels * 8 * bandwidth * bandwidth * bandwidth],
        })
    }

    pub fn from_vec(bandwidth: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        check_len(channels * 8 * bandwidth.pow(3), values.len())?;
        check_finite(&values)?;
        Ok(SO3Signal {
            bandwidth,
            channels,
            values,
        })
    }

    /// Samples `f(channel, α, β, γ)` on the grid.
    pub fn from_fn(bandwidth: usize, channels: usize, f: impl Fn(usize, f64, f64, f64) -> f64) -> Result<Self> {
        let grid = SO3Grid::new(bandwidth)?;
        let mut values = Vec::with_capacity(channels * 8 * bandwidth.pow(3));
        for c in 0..channels {
            for &a in &grid.alphas {
                for &b in &grid.betas {
                    for &g in &grid.gammas {
                        values.push(f(c, a, b, g));
                    }
                }
            }
        }
        SO3Signal::from_vec(bandwidth, channels, values)
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel_len(&self) -> usize {
        8 * self.bandwidth.pow(3)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.channel_len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, a: usize, j: usize, g: usize) -> f64 {
        let n = 2 * self.bandwidth;
        self.values[((c * n + a) * n + j) * n + g]
    }

    /// Quadrature `∫ Σ_c f_c^2 dR` with the normalized Haar measure.
    pub fn energy(&self) -> f64 {
        let grid = SO3Grid::new(self.bandwidth).expect("valid bandwidth");
        let squares: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        squares
            .chunks_exact(self.channel_len())
            .map(|ch| grid.integrate(ch))
            .sum()
    }
}

/// Per-channel coefficients `f̂^l_m`, `l < b`, each channel packed as
/// `[l=0 | l=1: m=-1,0,1 | ...]` (`b^2` entries).
#[derive(Clone, Debug, PartialEq)]
pub struct S2Spectrum {
    bandwidth: usize,
    channels: usize,
    coeffs: Vec<Complex64>,
}

impl S2Spectrum {
    pub fn zeros(bandwidth: usize, channels: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(S2Spectrum {
            bandwidth,
            channels,
            coeffs: vec![Complex64::new(0.0, 0.0); channels * bandwidth * bandwidth],
        })
    }

    pub fn from_vec(bandwidth: usize, channels: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        check_len(channels * bandwidth * bandwidth, coeffs.len())?;
        Ok(S2Spectrum {
            bandwidth,
            channels,
            coeffs,
        })
    }

    /// Gaussian coefficients of a real band-limited signal with unit
    /// expected energy per channel.
    pub fn random_real<R: Rng + ?Sized>(bandwidth: usize, channels: usize, rng: &mut R) -> Result<Self> {
        let mut out = S2Spectrum::zeros(bandwidth, channels)?;
        let sigma = 1.0 / bandwidth as f64;
        let half = Normal::new(0.0, sigma / 2f64.sqrt()).expect("finite sigma");
        let full = Normal::new(0.0, sigma).expect("finite sigma");
        for c in 0..channels {
            for l in 0..bandwidth {
                out.set(c, l, 0, Complex64::new(full.sample(rng), 0.0));
                for m in 1..=l as isize {
                    let z = Complex64::new(half.sample(rng), half.sample(rng));
                    out.set(c, l, m, z);
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    out.set(c, l, -m, z.conj() * sign);
                }
            }
        }
        Ok(out)
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn channel_len(&self) -> usize {
        self.bandwidth * self.bandwidth
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.channel_len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.channel_len();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficients `m = -l..=l` of degree `l` in channel `c`.
    pub fn block(&self, c: usize, l: usize) -> &[Complex64] {
        let base = c * self.channel_len() + l * l;
        &self.coeffs[base..base + 2 * l + 1]
    }

    pub fn block_mut(&mut self, c: usize, l: usize) -> &mut [Complex64] {
        let base = c * self.channel_len() + l * l;
        &mut self.coeffs[base..base + 2 * l + 1]
    }

    pub fn get(&self, c: usize, l: usize, m: isize) -> Complex64 {
        self.coeffs[c * self.channel_len() + s2_index(l, m)]
    }

    pub fn set(&mut self, c: usize, l: usize, m: isize, v: Complex64) {
        let n = self.channel_len();
        self.coeffs[c * n + s2_index(l, m)] = v;
    }

    /// `Σ |f̂^l_m|^2`, equal to the signal energy by Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest deviation from `f̂^l_{-m} = (-1)^m conj(f̂^l_m)`.
    pub fn real_symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.channels {
            for l in 0..self.bandwidth {
                for m in 0..=l as isize {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let d = self.get(c, l, -m) - self.get(c, l, m).conj() * sign;
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    pub fn truncate(&self, b_new: usize) -> Result<Self> {
        check_truncation(self.bandwidth, b_new)?;
        let mut coeffs = Vec::with_capacity(self.channels * b_new * b_new);
        for c in 0..self.channels {
            coeffs.extend_from_slice(&self.channel(c)[..b_new * b_new]);
        }
        S2Spectrum::from_vec(b_new, self.channels, coeffs)
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &S2Spectrum) -> Result<()> {
        check_same(self.bandwidth, other.bandwidth, self.channels, other.channels)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &S2Spectrum) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

/// Per-channel Wigner coefficients `f̂^l_{mn}`, `l < b`, each channel packed
/// as consecutive row-major `(2l+1)×(2l+1)` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SO3Spectrum {
    bandwidth: usize,
    channels: usize,
    coeffs: Vec<Complex64>,
}

impl SO3Spectrum {
    pub fn zeros(bandwidth: usize, channels: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(SO3Spectrum {
            bandwidth,
            channels,
            coeffs: vec![Complex64::new(0.0, 0.0); channels * so3_coeff_count(bandwidth)],
        })
    }

    pub fn from_vec(bandwidth: usize, channels: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        check_len(channels * so3_coeff_count(bandwidth), coeffs.len())?;
        Ok(SO3Spectrum {
            bandwidth,
            channels,
            coeffs,
        })
    }

    /// Gaussian coefficients of a real band-limited signal with unit expected
    /// energy per channel and a flat spectrum in the orthonormal basis
    /// `√(2l+1) D^l_{mn}`.
    pub fn random_real<R: Rng + ?Sized>(bandwidth: usize, channels: usize, rng: &mut R) -> Result<Self> {
        let mut out = SO3Spectrum::zeros(bandwidth, channels)?;
        let total = so3_coeff_count(bandwidth) as f64;
        for c in 0..channels {
            for l in 0..bandwidth {
                let sigma = 1.0 / ((2 * l + 1) as f64 * total).sqrt();
                let half = Normal::new(0.0, sigma / 2f64.sqrt()).expect("finite sigma");
                let li = l as isize;
                out.set(
                    c,
                    l,
                    0,
                    0,
                    Complex64::new(Normal::new(0.0, sigma).unwrap().sample(rng), 0.0),
                );
                for m in 0..=li {
                    let start = if m == 0 { 1 } else { -li };
                    for n in start..=li {
                        let z = Complex64::new(half.sample(rng), half.sample(rng));
                        out.set(c, l, m, n, z);
                        let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                        out.set(c, l, -m, -n, z.conj() * sign);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn channel_len(&self) -> usize {
        so3_coeff_count(self.bandwidth)
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.channel_len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.channel_len();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    pub fn block(&self, c: usize, l: usize) -> &[Complex64] {
        let base = c * self.channel_len() + block_offset(l);
        &self.coeffs[base..base + (2 * l + 1) * (2 * l + 1)]
    }

    pub fn block_mut(&mut self, c: usize, l: usize) -> &mut [Complex64] {
        let base = c * self.channel_len() + block_offset(l);
        &mut self.coeffs[base..base + (2 * l + 1) * (2 * l + 1)]
    }

    fn pos(&self, c: usize, l: usize, m: isize, n: isize) -> usize {
        let li = l as isize;
        c * self.channel_len() + block_offset(l) + ((m + li) * (2 * li + 1) + n + li) as usize
    }

    pub fn get(&self, c: usize, l: usize, m: isize, n: isize) -> Complex64 {
        self.coeffs[self.pos(c, l, m, n)]
    }

    pub fn set(&mut self, c: usize, l: usize, m: isize, n: isize, v: Complex64) {
        let p = self.pos(c, l, m, n);
        self.coeffs[p] = v;
    }

    /// `Σ_l (2l+1) Σ |f̂^l_{mn}|^2`, equal to the signal energy by Parseval.
    pub fn norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for c in 0..self.channels {
            for l in 0..self.bandwidth {
                let e: f64 = self.block(c, l).iter().map(|z| z.norm_sqr()).sum();
                total += (2 * l + 1) as f64 * e;
            }
        }
        total
    }

    /// Largest deviation from `f̂^l_{-m,-n} = (-1)^{m+n} conj(f̂^l_{mn})`.
    pub fn real_symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.channels {
            for l in 0..self.bandwidth {
                let li = l as isize;
                for m in -li..=li {
                    for n in -li..=li {
                        let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                        let d = self.get(c, l, -m, -n) - self.get(c, l, m, n).conj() * sign;
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }

    pub fn truncate(&self, b_new: usize) -> Result<Self> {
        check_truncation(self.bandwidth, b_new)?;
        let keep = so3_coeff_count(b_new);
        let mut coeffs = Vec::with_capacity(self.channels * keep);
        for c in 0..self.channels {
            coeffs.extend_from_slice(&self.channel(c)[..keep]);
        }
        SO3Spectrum::from_vec(b_new, self.channels, coeffs)
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|z| *z *= s);
    }

    pub fn axpy(&mut self, s: f64, other: &SO3Spectrum) -> Result<()> {
        check_same(self.bandwidth, other.bandwidth, self.channels, other.channels)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &SO3Spectrum) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

fn check_truncation(b: usize, b_new: usize) -> Result<()> {
    if b_new == 0 || b_new > b {
        Err(Error::BandwidthMismatch {
            expected: b,
            found: b_new,
        })
    } else {
        Ok(())
    }
}

fn check_same(b1: usize, b2: usize, k1: usize, k2: usize) -> Result<()> {
    if b1 != b2 {
        return Err(Error::BandwidthMismatch {
            expected: b1,
            found: b2,
        });
    }
    if k1 != k2 {
        return Err(Error::ChannelMismatch {
            expected: k1,
            found: k2,
        });
    }
    Ok(())
}
