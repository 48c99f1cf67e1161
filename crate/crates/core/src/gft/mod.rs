//! Sampling grids and generalized Fourier transforms on S² and SO(3).
//!
//! Conventions:
//! * S² carries the standard measure `sin θ dθ dφ` (total `4π`) and the
//!   orthonormal harmonics `Y^l_m`, so `f = Σ f̂^l_m Y^l_m`.
//! * SO(3) carries the normalized Haar measure (total 1), so
//!   `f(R) = Σ_l (2l+1) Σ_{mn} f̂^l_{mn} D^l_{mn}(R)` and
//!   `f̂^l_{mn} = ∫ f(R) conj(D^l_{mn}(R)) dR`.
//!
//! Grids are the `2b`-point equiangular grids with Driscoll–Healy weights;
//! forward transforms invert the inverse transforms exactly for inputs
//! band-limited to `l < b`.

mod grid;
mod s2;
mod so3;
mod types;

pub(crate) use grid::check_bandwidth;
pub use grid::{dh_betas, dh_weights, make_s2_grid, make_so3_grid, S2Grid, SO3Grid, MAX_BANDWIDTH};
pub use s2::{s2_fft, s2_ifft, S2Transform};
pub use so3::{so3_fft, so3_ifft, So3Transform};
pub use types::{s2_index, Domain, S2Signal, S2Spectrum, SO3Signal, SO3Spectrum};

use crate::error::Result;

/// Operations shared by both spectrum kinds.
pub trait Spectrum: Sized {
    fn bandwidth(&self) -> usize;
    fn channels(&self) -> usize;
    /// Keeps the degrees `l < b_new`.
    fn truncate(&self, b_new: usize) -> Result<Self>;
    /// Convention-weighted energy, equal to the signal's quadrature energy.
    fn norm_sq(&self) -> f64;
}

impl Spectrum for S2Spectrum {
    fn bandwidth(&self) -> usize {
        S2Spectrum::bandwidth(self)
    }
    fn channels(&self) -> usize {
        S2Spectrum::channels(self)
    }
    fn truncate(&self, b_new: usize) -> Result<Self> {
        S2Spectrum::truncate(self, b_new)
    }
    fn norm_sq(&self) -> f64 {
        S2Spectrum::norm_sq(self)
    }
}

impl Spectrum for SO3Spectrum {
    fn bandwidth(&self) -> usize {
        SO3Spectrum::bandwidth(self)
    }
    fn channels(&self) -> usize {
        SO3Spectrum::channels(self)
    }
    fn truncate(&self, b_new: usize) -> Result<Self> {
        SO3Spectrum::truncate(self, b_new)
    }
    fn norm_sq(&self) -> f64 {
        SO3Spectrum::norm_sq(self)
    }
}

pub fn truncate<S: Spectrum>(spectrum: &S, b_new: usize) -> Result<S> {
    spectrum.truncate(b_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{sph_harm, wigner_D, Rotation};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn y10_quadrature_is_one() {
        let g = make_s2_grid(8).unwrap();
        let s = S2Signal::from_fn(8, 1, |_, t, p| sph_harm(1, 0, t, p).unwrap().norm_sqr()).unwrap();
        assert!((g.integrate(s.channel(0)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn harmonic_gram_matrix_is_identity() {
        for b in [1, 4, 9, 16] {
            let g = make_s2_grid(b).unwrap();
            let mut basis = Vec::new();
            for l in 0..b {
                for m in -(l as isize)..=(l as isize) {
                    let mut vals = Vec::new();
                    for &t in &g.thetas {
                        for &p in &g.phis {
                            vals.push(sph_harm(l, m, t, p).unwrap());
                        }
                    }
                    basis.push(vals);
                }
            }
            let n = 2 * b;
            for (i, u) in basis.iter().enumerate() {
                for (k, v) in basis.iter().enumerate() {
                    let mut dot = Complex64::new(0.0, 0.0);
                    for (idx, (a, c)) in u.iter().zip(v).enumerate() {
                        dot += a * c.conj() * g.weights[idx / n];
                    }
                    let e = if i == k { 1.0 } else { 0.0 };
                    assert!((dot - e).norm() < 1e-10, "b={b} i={i} k={k} dot={dot}");
                }
            }
        }
    }

    #[test]
    fn s2_constant_signal() {
        let f = S2Signal::from_fn(6, 1, |_, _, _| 1.0).unwrap();
        let spec = s2_fft(&f).unwrap();
        assert!((spec.get(0, 0, 0) - Complex64::new((4.0 * PI).sqrt(), 0.0)).norm() < 1e-12);
        let others = spec.coeffs()[1..].iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(others < 1e-12);
    }

    #[test]
    fn s2_single_harmonic() {
        let f = S2Signal::from_fn(8, 1, |_, t, p| sph_harm(1, 0, t, p).unwrap().re).unwrap();
        let spec = s2_fft(&f).unwrap();
        for l in 0..8 {
            for m in -(l as isize)..=(l as isize) {
                let e = if (l, m) == (1, 0) { 1.0 } else { 0.0 };
                assert!((spec.get(0, l, m) - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn s2_synthesis_matches_pointwise_harmonics() {
        let spec = S2Spectrum::random_real(5, 1, &mut rng(1)).unwrap();
        let f = s2_ifft(&spec).unwrap();
        let g = make_s2_grid(5).unwrap();
        for (j, &t) in g.thetas.iter().enumerate() {
            for (k, &p) in g.phis.iter().enumerate() {
                let mut v = Complex64::new(0.0, 0.0);
                for l in 0..5 {
                    for m in -(l as isize)..=(l as isize) {
                        v += spec.get(0, l, m) * sph_harm(l, m, t, p).unwrap();
                    }
                }
                assert!(v.im.abs() < 1e-12);
                assert!((v.re - f.get(0, j, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s2_round_trip() {
        for (b, seed) in [(2, 1), (4, 2), (8, 3), (16, 4)] {
            let spec = S2Spectrum::random_real(b, 3, &mut rng(seed)).unwrap();
            let back = s2_fft(&s2_ifft(&spec).unwrap()).unwrap();
            assert!(spec.max_abs_diff(&back) < 1e-10, "b={b}");
            assert!(back.real_symmetry_error() < 1e-10);
        }
    }

    #[test]
    fn so3_constant_signal() {
        let f = SO3Signal::from_fn(4, 1, |_, _, _, _| 1.0).unwrap();
        let spec = so3_fft(&f).unwrap();
        assert!((spec.get(0, 0, 0, 0) - 1.0).norm() < 1e-12);
        let others = spec.coeffs()[1..].iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(others < 1e-12);
    }

    #[test]
    fn so3_cos_beta() {
        let f = SO3Signal::from_fn(4, 1, |_, _, b, _| b.cos()).unwrap();
        let spec = so3_fft(&f).unwrap();
        assert!((spec.get(0, 1, 0, 0) - 1.0 / 3.0).norm() < 1e-10);
        let total: f64 = spec.coeffs().iter().map(|z| z.norm()).sum();
        assert!((total - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn so3_synthesis_matches_pointwise_wigner() {
        let b = 3;
        let spec = SO3Spectrum::random_real(b, 1, &mut rng(5)).unwrap();
        let f = so3_ifft(&spec).unwrap();
        let g = make_so3_grid(b).unwrap();
        for (ia, &a) in g.alphas.iter().enumerate() {
            for (ib, &be) in g.betas.iter().enumerate() {
                for (ig, &ga) in g.gammas.iter().enumerate() {
                    let d = wigner_D(b, &Rotation::new(a, be, ga)).unwrap();
                    let mut v = Complex64::new(0.0, 0.0);
                    for l in 0..b {
                        let li = l as isize;
                        for m in -li..=li {
                            for n in -li..=li {
                                v += spec.get(0, l, m, n) * d[(l, m, n)] * (2 * l + 1) as f64;
                            }
                        }
                    }
                    assert!(v.im.abs() < 1e-12);
                    assert!((v.re - f.get(0, ia, ib, ig)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn so3_round_trip() {
        for (b, seed) in [(2, 1), (4, 2), (8, 3)] {
            let spec = SO3Spectrum::random_real(b, 2, &mut rng(seed)).unwrap();
            let back = so3_fft(&so3_ifft(&spec).unwrap()).unwrap();
            assert!(spec.max_abs_diff(&back) < 1e-10, "b={b}");
            assert!(back.real_symmetry_error() < 1e-10);
        }
    }

    #[test]
    fn parseval_both_domains() {
        let s = S2Spectrum::random_real(8, 2, &mut rng(7)).unwrap();
        let e = s2_ifft(&s).unwrap().energy();
        assert!((e - s.norm_sq()).abs() < 1e-9 * e);
        let s = SO3Spectrum::random_real(6, 2, &mut rng(8)).unwrap();
        let e = so3_ifft(&s).unwrap().energy();
        assert!((e - s.norm_sq()).abs() < 1e-9 * e);
    }

    #[test]
    fn linearity() {
        let f = s2_ifft(&S2Spectrum::random_real(6, 1, &mut rng(9)).unwrap()).unwrap();
        let g = s2_ifft(&S2Spectrum::random_real(6, 1, &mut rng(10)).unwrap()).unwrap();
        let (a, c) = (0.7, -2.5);
        let combo: Vec<f64> = f.values().iter().zip(g.values()).map(|(x, y)| a * x + c * y).collect();
        let lhs = s2_fft(&S2Signal::from_vec(6, 1, combo).unwrap()).unwrap();
        let mut rhs = s2_fft(&f).unwrap();
        rhs.scale(a);
        rhs.axpy(c, &s2_fft(&g).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);

        let f = so3_ifft(&SO3Spectrum::random_real(4, 1, &mut rng(11)).unwrap()).unwrap();
        let g = so3_ifft(&SO3Spectrum::random_real(4, 1, &mut rng(12)).unwrap()).unwrap();
        let combo: Vec<f64> = f.values().iter().zip(g.values()).map(|(x, y)| a * x + c * y).collect();
        let lhs = so3_fft(&SO3Signal::from_vec(4, 1, combo).unwrap()).unwrap();
        let mut rhs = so3_fft(&f).unwrap();
        rhs.scale(a);
        rhs.axpy(c, &so3_fft(&g).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn bandwidth_mismatch_is_reported() {
        let t = So3Transform::new(4).unwrap();
        let s = SO3Signal::zeros(3, 1).unwrap();
        assert!(matches!(t.forward(&s), Err(crate::Error::BandwidthMismatch { .. })));
        let t = S2Transform::new(4).unwrap();
        let s = S2Spectrum::zeros(5, 1).unwrap();
        assert!(matches!(t.inverse(&s), Err(crate::Error::BandwidthMismatch { .. })));
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        // <A x, y> = <x, A^† y> with the real inner product on samples and
        // Re Σ conj(·)· on spectra.
        let b = 3;
        let t = So3Transform::new(b).unwrap();
        let x = so3_ifft(&SO3Spectrum::random_real(b, 1, &mut rng(13)).unwrap()).unwrap();
        let mut r = rng(14);
        let noise: Vec<f64> = (0..x.values().len())
            .map(|_| rand::Rng::random_range(&mut r, -1.0..1.0))
            .collect();
        let x = SO3Signal::from_vec(b, 1, x.values().iter().zip(&noise).map(|(a, n)| a + n).collect()).unwrap();
        let y = {
            let mut s = SO3Spectrum::zeros(b, 1).unwrap();
            for z in s.coeffs_mut() {
                *z = Complex64::new(
                    rand::Rng::random_range(&mut r, -1.0..1.0),
                    rand::Rng::random_range(&mut r, -1.0..1.0),
                );
            }
            s
        };
        let ax = t.forward(&x).unwrap();
        let lhs: f64 = ax.coeffs().iter().zip(y.coeffs()).map(|(a, c)| (a.conj() * c).re).sum();
        let aty = t.forward_adjoint(&y).unwrap();
        let rhs: f64 = x.values().iter().zip(aty.values()).map(|(a, c)| a * c).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));

        let sy = t.inverse(&y).unwrap();
        let lhs: f64 = sy.values().iter().zip(x.values()).map(|(a, c)| a * c).sum();
        let stx = t.inverse_adjoint(&x).unwrap();
        let rhs: f64 = y
            .coeffs()
            .iter()
            .zip(stx.coeffs())
            .map(|(a, c)| (a.conj() * c).re)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn truncate_keeps_low_degrees() {
        let s = SO3Spectrum::random_real(5, 2, &mut rng(15)).unwrap();
        assert_eq!(truncate(&s, 5).unwrap(), s);
        let t = truncate(&s, 1).unwrap();
        assert_eq!(t.bandwidth(), 1);
        assert_eq!(t.channels(), 2);
        assert_eq!(t.get(1, 0, 0, 0), s.get(1, 0, 0, 0));
        assert!(truncate(&s, 6).is_err());
        let s2 = S2Spectrum::random_real(5, 1, &mut rng(16)).unwrap();
        assert_eq!(truncate(&s2, 3).unwrap().coeffs(), &s2.coeffs()[..9]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn truncation_never_increases_norm(seed in any::<u64>(), b in 1usize..8, cut in 1usize..8) {
            let cut = cut.min(b);
            let s = SO3Spectrum::random_real(b, 1, &mut rng(seed)).unwrap();
            prop_assert!(truncate(&s, cut).unwrap().norm_sq() <= s.norm_sq() + 1e-15);
            let s = S2Spectrum::random_real(b, 1, &mut rng(seed)).unwrap();
            prop_assert!(truncate(&s, cut).unwrap().norm_sq() <= s.norm_sq() + 1e-15);
        }

        #[test]
        fn round_trips_hold_for_any_seed(seed in any::<u64>(), b in 1usize..7) {
            let s = S2Spectrum::random_real(b, 1, &mut rng(seed)).unwrap();
            prop_assert!(s.max_abs_diff(&s2_fft(&s2_ifft(&s).unwrap()).unwrap()) < 1e-10);
            let s = SO3Spectrum::random_real(b, 1, &mut rng(seed)).unwrap();
            prop_assert!(s.max_abs_diff(&so3_fft(&so3_ifft(&s).unwrap()).unwrap()) < 1e-10);
        }
    }
}
