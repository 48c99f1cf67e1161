use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_BANDWIDTH: usize = 128;

pub(crate) fn check_bandwidth(b: usize) -> Result<()> {
    if b == 0 || b > MAX_BANDWIDTH {
        Err(Error::BandwidthOutOfRange(b))
    } else {
        Ok(())
    }
}

/// Colatitudes `π(2j+1)/(4b)` for `j = 0..2b`.
pub fn dh_betas(b: usize) -> Vec<f64> {
    (0..2 * b).map(|j| PI * (2 * j + 1) as f64 / (4 * b) as f64).collect()
}

/// Driscoll–Healy weights for `∫_0^π g(θ) sin θ dθ` on [`dh_betas`].
///
/// Exact when `g` is a polynomial of degree below `2b` in `cos θ`; they sum
/// to 2.
pub fn dh_weights(b: usize) -> Vec<f64> {
    dh_betas(b)
        .into_iter()
        .map(|theta| {
            let series: f64 = (0..b)
                .map(|k| {
                    let odd = (2 * k + 1) as f64;
                    (odd * theta).sin() / odd
                })
                .sum();
            2.0 / b as f64 * theta.sin() * series
        })
        .collect()
}

/// Equiangular `2b × 2b` grid on the sphere.
///
/// `weights[j]` is the quadrature weight of every point on ring `j`, so that
/// `Σ_j Σ_k weights[j] f(θ_j, φ_k)` approximates `∫ f sin θ dθ dφ`.
#[derive(Clone, Debug, PartialEq)]
pub struct S2Grid {
    pub bandwidth: usize,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub weights: Vec<f64>,
}

impl S2Grid {
    pub fn new(b: usize) -> Result<Self> {
        check_bandwidth(b)?;
        let step = PI / b as f64;
        Ok(S2Grid {
            bandwidth: b,
            thetas: dh_betas(b),
            phis: (0..2 * b).map(|k| k as f64 * step).collect(),
            weights: dh_weights(b).into_iter().map(|w| w * step).collect(),
        })
    }

    /// Side length `2b`.
    pub fn size(&self) -> usize {
        2 * self.bandwidth
    }

    /// Quadrature of one channel stored `[θ, φ]` row-major.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let n = self.size();
        values
            .chunks_exact(n)
            .zip(&self.weights)
            .map(|(ring, w)| w * ring.iter().sum::<f64>())
            .sum()
    }
}

/// Equiangular `2b × 2b × 2b` grid on SO(3) in ZYZ Euler angles.
///
/// `weights[j]` belongs to every point with `β = betas[j]`; the normalized
/// Haar measure gives total mass 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SO3Grid {
    pub bandwidth: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SO3Grid {
    pub fn new(b: usize) -> Result<Self> {
        check_bandwidth(b)?;
        let step = PI / b as f64;
        let angles: Vec<f64> = (0..2 * b).map(|k| k as f64 * step).collect();
        let scale = 1.0 / (8.0 * (b * b) as f64);
        Ok(SO3Grid {
            bandwidth: b,
            alphas: angles.clone(),
            betas: dh_betas(b),
            gammas: angles,
            weights: dh_weights(b).into_iter().map(|w| w * scale).collect(),
        })
    }

    pub fn size(&self) -> usize {
        2 * self.bandwidth
    }

    /// Quadrature of one channel stored `[α, β, γ]` row-major.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let n = self.size();
        let mut total = 0.0;
        for slab in values.chunks_exact(n * n) {
            for (row, w) in slab.chunks_exact(n).zip(&self.weights) {
                total += w * row.iter().sum::<f64>();
            }
        }
        total
    }
}

pub fn make_s2_grid(b: usize) -> Result<S2Grid> {
    S2Grid::new(b)
}

pub fn make_so3_grid(b: usize) -> Result<SO3Grid> {
    SO3Grid::new(b)
}
