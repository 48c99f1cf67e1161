//! Self-checks of the cross-module contracts, grouped into suites.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{equivariance_delta, single_conv};
use crate::conv::{s2_conv_spatial_oracle, s2_conv_spectral, so3_conv_spatial_oracle, so3_conv_spectral, FilterBank};
use crate::error::{Error, Result};
use crate::gft::{s2_fft, s2_ifft, so3_fft, so3_ifft, Domain, S2Grid, S2Spectrum, SO3Grid, SO3Spectrum};
use crate::harmonics::{sph_harm, wigner_d};
use crate::nn::{Head, LayerSpec, Model, ModelConfig, TrainConfig};
use crate::rotation::rotate_s2_spectrum;
use crate::Rotation;

/// Largest bandwidth at which the convolution suite runs its oracles.
pub const ORACLE_BANDWIDTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Roundtrip,
    Orthogonality,
    ConvolutionTheorem,
    Equivariance,
    Gradient,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Roundtrip,
        Suite::Orthogonality,
        Suite::ConvolutionTheorem,
        Suite::Equivariance,
        Suite::Gradient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Roundtrip => "roundtrip",
            Suite::Orthogonality => "orthogonality",
            Suite::ConvolutionTheorem => "convolution-theorem",
            Suite::Equivariance => "equivariance",
            Suite::Gradient => "gradient",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// One measured quantity against its bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn below(suite: Suite, name: String, value: f64, tolerance: f64) -> Check {
        Check {
            suite,
            name,
            value,
            tolerance,
            passed: value.is_finite() && value < tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: {:.3e} (< {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.tolerance
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub bandwidth: usize,
    pub channels: usize,
    pub trials: usize,
    pub seed: u64,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    if opts.trials == 0 || opts.channels == 0 {
        return Err(Error::Config("trials and channels must be positive".into()));
    }
    match suite {
        Suite::Roundtrip => roundtrip(opts),
        Suite::Orthogonality => orthogonality(opts.bandwidth),
        Suite::ConvolutionTheorem => convolution_theorem(opts),
        Suite::Equivariance => equivariance(opts),
        Suite::Gradient => gradient(opts.seed),
    }
}

fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    diff / scale
}

fn l2_rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let n: f64 = b.iter().map(|y| y * y).sum();
    (d / n).sqrt()
}

/// Spectrum → signal → spectrum, worst coefficient relative to the largest.
pub fn roundtrip(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let (b, k) = (opts.bandwidth, opts.channels);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut s2, mut so3) = (0.0f64, 0.0f64);
    for _ in 0..opts.trials {
        let f = S2Spectrum::random_real(b, k, &mut rng)?;
        s2 = s2.max(max_rel(s2_fft(&s2_ifft(&f)?)?.coeffs(), f.coeffs()));
        let g = SO3Spectrum::random_real(b, k, &mut rng)?;
        so3 = so3.max(max_rel(so3_fft(&so3_ifft(&g)?)?.coeffs(), g.coeffs()));
    }
    Ok(vec![
        Check::below(Suite::Roundtrip, format!("s2 b={b}"), s2, 1e-10),
        Check::below(Suite::Roundtrip, format!("so3 b={b}"), so3, 1e-10),
    ])
}

/// Quadrature Gram matrices of the spherical harmonics and of the Wigner
/// D-functions against their closed forms.
pub fn orthogonality(b: usize) -> Result<Vec<Check>> {
    let grid = S2Grid::new(b)?;
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(b * b);
    for l in 0..b {
        for m in -(l as isize)..=l as isize {
            let mut values = Vec::with_capacity(grid.size() * grid.size());
            for &theta in &grid.thetas {
                for &phi in &grid.phis {
                    values.push(sph_harm(l, m, theta, phi)?);
                }
            }
            basis.push(values);
        }
    }
    let n = grid.size();
    let mut s2_err = 0.0f64;
    for (i, yi) in basis.iter().enumerate() {
        for (j, yj) in basis.iter().enumerate().skip(i) {
            let mut total = Complex64::new(0.0, 0.0);
            for (ring, w) in grid.weights.iter().enumerate() {
                let s: Complex64 = (0..n).map(|k| yi[ring * n + k] * yj[ring * n + k].conj()).sum();
                total += s * w;
            }
            let expected = if i == j { 1.0 } else { 0.0 };
            s2_err = s2_err.max((total - expected).norm());
        }
    }

    // The α and γ sums are exact discrete Fourier orthogonality on the grid,
    // so the SO(3) Gram matrix reduces to the β quadrature of d^l d^l'.
    let so3 = SO3Grid::new(b)?;
    let ring_mass: Vec<f64> = so3
        .weights
        .iter()
        .map(|w| w * (so3.size() * so3.size()) as f64)
        .collect();
    let ds: Vec<_> = so3.betas.iter().map(|&beta| wigner_d(b, beta)).collect::<Result<_>>()?;
    let mut so3_err = 0.0f64;
    let bi = b as isize;
    for m in -(bi - 1)..bi {
        for nn in -(bi - 1)..bi {
            let l0 = m.unsigned_abs().max(nn.unsigned_abs());
            for l in l0..b {
                for lp in l..b {
                    let total: f64 = ds
                        .iter()
                        .zip(&ring_mass)
                        .map(|(d, w)| w * d.get(l, m, nn) * d.get(lp, m, nn))
                        .sum();
                    let expected = if l == lp { 1.0 / (2 * l + 1) as f64 } else { 0.0 };
                    so3_err = so3_err.max((total - expected).abs() * (2 * l + 1) as f64);
                }
            }
        }
    }
    Ok(vec![
        Check::below(Suite::Orthogonality, format!("s2 b={b}"), s2_err, 1e-10),
        Check::below(Suite::Orthogonality, format!("so3 b={b}"), so3_err, 1e-10),
    ])
}

/// Spectral convolutions against direct quadrature, L² relative error over
/// the output grid.
pub fn convolution_theorem(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let b = opts.bandwidth.min(ORACLE_BANDWIDTH);
    let k = opts.channels.min(2);
    let grid = SO3Grid::new(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut s2, mut so3) = (0.0f64, 0.0f64);
    for _ in 0..opts.trials {
        let f_hat = S2Spectrum::random_real(b, k, &mut rng)?;
        let psi = FilterBank::random_real(Domain::S2, b, k, 1, &mut rng)?;
        let h = so3_ifft(&s2_conv_spectral(&f_hat, &psi)?)?;
        let oracle = s2_conv_spatial_oracle(&s2_ifft(&f_hat)?, &s2_ifft(&psi.output_s2(0)?)?, &grid)?;
        s2 = s2.max(l2_rel(h.values(), oracle.values()));

        let f_hat = SO3Spectrum::random_real(b, k, &mut rng)?;
        let psi = FilterBank::random_real(Domain::SO3, b, k, 1, &mut rng)?;
        let h = so3_ifft(&so3_conv_spectral(&f_hat, &psi)?)?;
        let oracle = so3_conv_spatial_oracle(&so3_ifft(&f_hat)?, &so3_ifft(&psi.output_so3(0)?)?, &grid)?;
        so3 = so3.max(l2_rel(h.values(), oracle.values()));
    }
    Ok(vec![
        Check::below(Suite::ConvolutionTheorem, format!("s2 b={b}"), s2, 1e-8),
        Check::below(Suite::ConvolutionTheorem, format!("so3 b={b}"), so3, 1e-8),
    ])
}

/// Δ of single spectral layers and rotation invariance of a conv-only
/// network with the invariant head.
pub fn equivariance(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let (b, k) = (opts.bandwidth, opts.channels);
    let mut out = Vec::new();
    for (domain, name) in [(Domain::S2, "s2conv"), (Domain::SO3, "so3conv")] {
        let map = single_conv(domain, b, k, opts.seed)?;
        let r = equivariance_delta(&map, opts.trials, opts.seed)?;
        out.push(Check::below(
            Suite::Equivariance,
            format!("{name} delta b={b} K={k}"),
            r.delta,
            1e-12,
        ));
    }
    let b1 = (b / 2).max(1);
    let b2 = (b1 / 2).max(1);
    let config = ModelConfig {
        layers: vec![
            LayerSpec::S2Conv {
                b_in: b,
                b_out: b1,
                k_in: 1,
                k_out: k,
            },
            LayerSpec::So3Conv {
                b_in: b1,
                b_out: b2,
                k_in: k,
                k_out: k,
            },
            LayerSpec::Linear { dim_in: k, dim_out: 10 },
            LayerSpec::Softmax,
        ],
        head: Head::Invariant,
        seed: opts.seed,
        train: TrainConfig::default(),
    };
    let model = Model::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spec = S2Spectrum::random_real(b, 1, &mut rng)?;
    let base = model.forward(&s2_ifft(&spec)?)?;
    let mut worst = 0.0f64;
    for _ in 0..opts.trials.min(10) {
        let r = Rotation::random(&mut rng);
        let p = model.forward(&s2_ifft(&rotate_s2_spectrum(&spec, &r)?)?)?;
        worst = p.iter().zip(&base).fold(worst, |a, (x, y)| a.max((x - y).abs()));
    }
    out.push(Check::below(
        Suite::Equivariance,
        format!("invariant head b={b}"),
        worst,
        1e-6,
    ));
    Ok(out)
}

/// Central differences with step 1e-5 on 20 parameters of a b = 4 network,
/// spread over its parameterized layers, for both heads.
pub fn gradient(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for head in [Head::Spatial, Head::Invariant] {
        let model = Model::new(ModelConfig::s2_so3_classifier([4, 3, 2], [3, 4], 10, head, seed))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        let f = s2_ifft(&S2Spectrum::random_real(4, 1, &mut rng)?)?;
        let label = rng.random_range(0..10);
        let ranges = model.param_ranges();
        let picks: Vec<usize> = (0..20)
            .map(|i| rng.random_range(ranges[i % ranges.len()].clone()))
            .collect();
        let worst = model
            .gradient_check(&f, label, &picks, 1e-5)?
            .iter()
            .fold(0.0f64, |a, c| a.max(c.relative_error));
        let name = match head {
            Head::Spatial => "spatial head b=4",
            Head::Invariant => "invariant head b=4",
        };
        out.push(Check::below(Suite::Gradient, name.into(), worst, 1e-5));
    }
    Ok(out)
}
