//! The rotation operator `L_R f(x) = f(R⁻¹ x)` on signals and spectra.
//!
//! In the spectrum the action is exact:
//! * S²: `f̂^l ↦ D^l(R) f̂^l`, from `Y^l_m(R⁻¹x) = Σ_{m'} D^l_{m'm}(R) Y^l_{m'}(x)`.
//! * SO(3): `f̂^l ↦ conj(D^l(R)) f̂^l`, from `D^l(R⁻¹R') = D^l(R)† D^l(R')`
//!   and the `conj(D)` analysis convention.
//!
//! Both compose as `L_{R'} L_R = L_{R'R}`.

use num_complex::Complex64;

use crate::error::Result;
use crate::gft::{S2Grid, S2Signal, S2Spectrum, SO3Spectrum};
use crate::harmonics::{wigner_D, Rotation};

pub fn rotate_s2_spectrum(spectrum: &S2Spectrum, rotation: &Rotation) -> Result<S2Spectrum> {
    let b = spectrum.bandwidth();
    let d = wigner_D(b, rotation)?;
    let mut out = S2Spectrum::zeros(b, spectrum.channels())?;
    for c in 0..spectrum.channels() {
        for l in 0..b {
            let w = 2 * l + 1;
            let block = d.block(l);
            let src = spectrum.block(c, l);
            let dst = out.block_mut(c, l);
            for i in 0..w {
                dst[i] = (0..w).map(|k| block[i * w + k] * src[k]).sum();
            }
        }
    }
    Ok(out)
}

pub fn rotate_so3_spectrum(spectrum: &SO3Spectrum, rotation: &Rotation) -> Result<SO3Spectrum> {
    let b = spectrum.bandwidth();
    let d = wigner_D(b, rotation)?;
    let mut out = SO3Spectrum::zeros(b, spectrum.channels())?;
    for c in 0..spectrum.channels() {
        for l in 0..b {
            let w = 2 * l + 1;
            let block = d.block(l);
            let src = spectrum.block(c, l);
            let dst = out.block_mut(c, l);
            for i in 0..w {
                for k in 0..w {
                    let a = block[i * w + k].conj();
                    for j in 0..w {
                        dst[i * w + j] += a * src[k * w + j];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Fractional grid coordinate, snapped to the nearest node when within
/// rounding distance so grid-aligned rotations reproduce samples exactly.
fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r
    } else {
        t
    }
}

/// Spatial rotation by bilinear interpolation in `(θ, φ)`, with longitude
/// wraparound and clamping beyond the outermost rings. Intended as a loose
/// cross-check of [`rotate_s2_spectrum`].
pub fn rotate_s2_signal_spatial(signal: &S2Signal, rotation: &Rotation) -> Result<S2Signal> {
    if *rotation == Rotation::IDENTITY {
        return Ok(signal.clone());
    }
    let b = signal.bandwidth();
    let n = 2 * b;
    let grid = S2Grid::new(b)?;
    let inv = rotation.inverse();
    let dtheta = std::f64::consts::PI / n as f64;
    let dphi = std::f64::consts::PI / b as f64;
    // Source stencil per output point, shared by all channels.
    let mut stencil = Vec::with_capacity(n * n);
    for &theta in &grid.thetas {
        for &phi in &grid.phis {
            let (t, p) = inv.apply_to_direction(theta, phi);
            let tf = snap(((t - grid.thetas[0]) / dtheta).clamp(0.0, (n - 1) as f64));
            let j0 = (tf.floor() as usize).min(n - 1);
            let j1 = (j0 + 1).min(n - 1);
            let ft = tf - j0 as f64;
            let pf = snap(p / dphi);
            let k0f = pf.floor();
            let fp = pf - k0f;
            let k0 = (k0f as isize).rem_euclid(n as isize) as usize;
            let k1 = (k0 + 1) % n;
            stencil.push((j0, j1, ft, k0, k1, fp));
        }
    }
    let mut values = Vec::with_capacity(signal.values().len());
    for c in 0..signal.channels() {
        for &(j0, j1, ft, k0, k1, fp) in &stencil {
            let lerp = |j: usize| {
                let (a, z) = (signal.get(c, j, k0), signal.get(c, j, k1));
                if fp == 0.0 {
                    a
                } else {
                    (1.0 - fp) * a + fp * z
                }
            };
            let top = lerp(j0);
            values.push(if ft == 0.0 {
                top
            } else {
                (1.0 - ft) * top + ft * lerp(j1)
            });
        }
    }
    S2Signal::from_vec(b, signal.channels(), values)
}

/// Evaluates a band-limited S² spectrum channel at an arbitrary direction.
pub fn eval_s2(spectrum: &S2Spectrum, channel: usize, theta: f64, phi: f64) -> f64 {
    let b = spectrum.bandwidth();
    let lam = crate::harmonics::normalized_legendre(b, theta);
    let coeffs = spectrum.channel(channel);
    let mut total = 0.0;
    for m in 0..b {
        let e = Complex64::from_polar(1.0, m as f64 * phi);
        let mut pos = Complex64::new(0.0, 0.0);
        let mut neg = Complex64::new(0.0, 0.0);
        for l in m..b {
            let p = lam[crate::harmonics::tri_index(l, m)];
            pos += coeffs[l * l + l + m] * p;
            if m > 0 {
                neg += coeffs[l * l + l - m] * p;
            }
        }
        total += (pos * e).re;
        if m > 0 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * (neg * e.conj()).re;
        }
    }
    total
}

/// Evaluates a band-limited SO(3) spectrum channel at an arbitrary rotation.
pub fn eval_so3(spectrum: &SO3Spectrum, channel: usize, rotation: &Rotation) -> Result<f64> {
    let b = spectrum.bandwidth();
    let d = wigner_D(b, rotation)?;
    let mut total = 0.0;
    for l in 0..b {
        let dim = (2 * l + 1) as f64;
        let s: Complex64 = spectrum
            .block(channel, l)
            .iter()
            .zip(d.block(l))
            .map(|(f, g)| f * g)
            .sum();
        total += dim * s.re;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gft::{s2_fft, s2_ifft, so3_ifft, SO3Grid};
    use crate::harmonics::sph_harm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_leaves_spectra_unchanged() {
        let s = S2Spectrum::random_real(6, 2, &mut rng(1)).unwrap();
        assert!(rotate_s2_spectrum(&s, &Rotation::IDENTITY).unwrap().max_abs_diff(&s) < 1e-15);
        let s = SO3Spectrum::random_real(5, 2, &mut rng(2)).unwrap();
        assert!(rotate_so3_spectrum(&s, &Rotation::IDENTITY).unwrap().max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn constants_are_invariant() {
        let mut s = S2Spectrum::zeros(4, 1).unwrap();
        s.set(0, 0, 0, Complex64::new(2.5, 0.0));
        let r = Rotation::random(&mut rng(3));
        assert!(rotate_s2_spectrum(&s, &r).unwrap().max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn eval_matches_harmonic_sum() {
        let s = S2Spectrum::random_real(5, 1, &mut rng(4)).unwrap();
        let (t, p) = (0.9, 4.1);
        let mut v = Complex64::new(0.0, 0.0);
        for l in 0..5 {
            for m in -(l as isize)..=(l as isize) {
                v += s.get(0, l, m) * sph_harm(l, m, t, p).unwrap();
            }
        }
        assert!((eval_s2(&s, 0, t, p) - v.re).abs() < 1e-12);
    }

    /// Pointwise oracle: (L_R f)(x) = f(R⁻¹x), evaluated directly.
    #[test]
    fn s2_spectral_rotation_matches_pointwise_definition() {
        let b = 8;
        let s = S2Spectrum::random_real(b, 2, &mut rng(5)).unwrap();
        let g = S2Grid::new(b).unwrap();
        for seed in 0..5 {
            let r = Rotation::random(&mut rng(100 + seed));
            let rotated = s2_ifft(&rotate_s2_spectrum(&s, &r).unwrap()).unwrap();
            let inv = r.inverse();
            for c in 0..2 {
                for (j, &t) in g.thetas.iter().enumerate() {
                    for (k, &p) in g.phis.iter().enumerate() {
                        let (t2, p2) = inv.apply_to_direction(t, p);
                        let expect = eval_s2(&s, c, t2, p2);
                        assert!((rotated.get(c, j, k) - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    /// Pointwise oracle on SO(3): (L_R f)(R') = f(R⁻¹R').
    #[test]
    fn so3_spectral_rotation_matches_pointwise_definition() {
        let b = 3;
        let s = SO3Spectrum::random_real(b, 1, &mut rng(6)).unwrap();
        let r = Rotation::random(&mut rng(7));
        let rotated = so3_ifft(&rotate_so3_spectrum(&s, &r).unwrap()).unwrap();
        let g = SO3Grid::new(b).unwrap();
        let inv = r.inverse();
        for (ia, &a) in g.alphas.iter().enumerate() {
            for (ib, &be) in g.betas.iter().enumerate() {
                for (ig, &ga) in g.gammas.iter().enumerate() {
                    let q = inv.compose(&Rotation::new(a, be, ga));
                    let d = wigner_D(b, &q).unwrap();
                    let mut v = Complex64::new(0.0, 0.0);
                    for l in 0..b {
                        let li = l as isize;
                        for m in -li..=li {
                            for n in -li..=li {
                                v += s.get(0, l, m, n) * d[(l, m, n)] * (2 * l + 1) as f64;
                            }
                        }
                    }
                    assert!((rotated.get(0, ia, ib, ig) - v.re).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn composition_law() {
        let mut r = rng(8);
        let s = SO3Spectrum::random_real(8, 1, &mut r).unwrap();
        let s2 = S2Spectrum::random_real(8, 1, &mut r).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let (a, b) = (Rotation::random(&mut r), Rotation::random(&mut r));
            let twice = rotate_so3_spectrum(&rotate_so3_spectrum(&s, &a).unwrap(), &b).unwrap();
            let once = rotate_so3_spectrum(&s, &b.compose(&a)).unwrap();
            worst = worst.max(twice.max_abs_diff(&once));
            let twice = rotate_s2_spectrum(&rotate_s2_spectrum(&s2, &a).unwrap(), &b).unwrap();
            let once = rotate_s2_spectrum(&s2, &b.compose(&a)).unwrap();
            worst = worst.max(twice.max_abs_diff(&once));
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn spectral_rotation_preserves_norm() {
        let mut r = rng(9);
        let s = SO3Spectrum::random_real(8, 2, &mut r).unwrap();
        let s2 = S2Spectrum::random_real(8, 2, &mut r).unwrap();
        for _ in 0..10 {
            let q = Rotation::random(&mut r);
            let n = rotate_so3_spectrum(&s, &q).unwrap().norm_sq();
            assert!((n - s.norm_sq()).abs() < 1e-10 * s.norm_sq());
            let n = rotate_s2_spectrum(&s2, &q).unwrap().norm_sq();
            assert!((n - s2.norm_sq()).abs() < 1e-10 * s2.norm_sq());
        }
    }

    #[test]
    fn spatial_identity_is_bitwise() {
        let f = s2_ifft(&S2Spectrum::random_real(8, 2, &mut rng(10)).unwrap()).unwrap();
        assert_eq!(rotate_s2_signal_spatial(&f, &Rotation::IDENTITY).unwrap(), f);
    }

    #[test]
    fn grid_aligned_z_rotation_permutes_columns() {
        let b = 8;
        let f = s2_ifft(&S2Spectrum::random_real(b, 1, &mut rng(11)).unwrap()).unwrap();
        for shift in 1..2 * b {
            let r = Rotation::new(0.0, 0.0, shift as f64 * PI / b as f64);
            let g = rotate_s2_signal_spatial(&f, &r).unwrap();
            for j in 0..2 * b {
                for k in 0..2 * b {
                    assert_eq!(g.get(0, j, k), f.get(0, j, (k + 2 * b - shift) % (2 * b)));
                }
            }
            // and the spectral path agrees on these exact cases
            let h = s2_ifft(&rotate_s2_spectrum(&s2_fft(&f).unwrap(), &r).unwrap()).unwrap();
            let err = g
                .values()
                .iter()
                .zip(h.values())
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(err < 1e-12);
        }
    }

    /// Bilinear error grows like `(l h)^2` for grid spacing `h`, so the
    /// bound here reflects degrees up to `b/2 - 1` at `h = π/32`.
    #[test]
    fn spatial_and_spectral_rotation_agree_on_band_limited_signals() {
        let b = 16;
        let mut r = rng(12);
        let low = S2Spectrum::random_real(b / 2, 1, &mut r).unwrap();
        let mut spec = S2Spectrum::zeros(b, 1).unwrap();
        for l in 0..b / 2 {
            spec.block_mut(0, l).copy_from_slice(low.block(0, l));
        }
        let f = s2_ifft(&spec).unwrap();
        for _ in 0..5 {
            let q = Rotation::random(&mut r);
            let spatial = rotate_s2_signal_spatial(&f, &q).unwrap();
            let spectral = s2_ifft(&rotate_s2_spectrum(&spec, &q).unwrap()).unwrap();
            let diff: f64 = spatial
                .values()
                .iter()
                .zip(spectral.values())
                .map(|(a, c)| (a - c).powi(2))
                .sum();
            let norm: f64 = spectral.values().iter().map(|a| a * a).sum();
            let rel = (diff / norm).sqrt();
            assert!(rel < 0.1, "relative error {rel}");
        }
    }

    #[test]
    fn spatial_and_spectral_rotation_max_error_low_degree() {
        let b = 16;
        let f = S2Signal::from_fn(b, 1, |_, t, p| sph_harm(1, 0, t, p).unwrap().re).unwrap();
        let spec = s2_fft(&f).unwrap();
        let mut r = rng(13);
        for _ in 0..5 {
            let q = Rotation::random(&mut r);
            let spatial = rotate_s2_signal_spatial(&f, &q).unwrap();
            let spectral = s2_ifft(&rotate_s2_spectrum(&spec, &q).unwrap()).unwrap();
            let err = spatial
                .values()
                .iter()
                .zip(spectral.values())
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(err < 1e-3, "max error {err}");
        }
    }
}
