//! Special functions and representations of the rotation group.

mod euler;
mod legendre;
mod wigner;

pub use euler::{compose, inverse, random_rotation, Rotation};
pub use legendre::{assoc_legendre, normalized_legendre, sph_harm, tri_index};
pub use wigner::{block_offset, so3_coeff_count, wigner_D, wigner_d, WignerBlocks};

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn harmonics_are_restricted_wigner_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let theta = rng.random_range(0.0..PI);
            let phi = rng.random_range(0.0..2.0 * PI);
            let d = wigner_D(12, &Rotation::new(phi, theta, 0.0)).unwrap();
            for l in 0..12usize {
                let c = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
                for m in -(l as isize)..=(l as isize) {
                    let y = sph_harm(l, m, theta, phi).unwrap();
                    let expect = d[(l, m, 0)].conj() * c;
                    assert!((y - expect).norm() < 1e-10, "l={l} m={m}");
                }
            }
        }
    }

    #[test]
    fn harmonics_rotate_by_wigner_blocks() {
        // Y^l_m(R^{-1} x) = Σ_{m'} D^l_{m'm}(R) Y^l_{m'}(x)
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let r = Rotation::random(&mut rng);
            let d = wigner_D(6, &r).unwrap();
            let (theta, phi) = (rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
            let (t2, p2) = r.inverse().apply_to_direction(theta, phi);
            for l in 0..6usize {
                let li = l as isize;
                for m in -li..=li {
                    let lhs = sph_harm(l, m, t2, p2).unwrap();
                    let rhs: num_complex::Complex64 = (-li..=li)
                        .map(|mp| d[(l, mp, m)] * sph_harm(l, mp, theta, phi).unwrap())
                        .sum();
                    assert!((lhs - rhs).norm() < 1e-12, "l={l} m={m}");
                }
            }
        }
    }
}
