//! Associated Legendre functions and orthonormal spherical harmonics.
//!
//! Both carry the Condon–Shortley phase `(-1)^m`. Spherical harmonics are
//! normalized so that `∫ |Y^l_m|^2 sin θ dθ dφ = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Associated Legendre function `P_l^m(x)` with Condon–Shortley phase.
///
/// Computed by upward recurrence in `l` from the closed-form diagonal term
/// `P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}`. Negative orders use
/// `P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m`.
pub fn assoc_legendre(l: usize, m: isize, x: f64) -> Result<f64> {
    let am = m.unsigned_abs();
    if am > l {
        return Err(Error::domain(format!("|m| = {am} exceeds l = {l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} outside [-1, 1]")));
    }
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    for k in 1..=am {
        pmm *= -((2 * k - 1) as f64) * somx2;
    }
    let p = if l == am {
        pmm
    } else {
        let mut prev = pmm;
        let mut cur = x * (2 * am + 1) as f64 * pmm;
        for ll in (am + 2)..=l {
            let next = (x * (2 * ll - 1) as f64 * cur - (ll + am - 1) as f64 * prev) / (ll - am) as f64;
            prev = cur;
            cur = next;
        }
        cur
    };
    if m >= 0 {
        Ok(p)
    } else {
        // (l-m)!/(l+m)! for m > 0 as a running product to stay in range.
        let ratio: f64 = ((l - am + 1)..=(l + am)).map(|k| 1.0 / k as f64).product();
        let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * ratio * p)
    }
}

/// Index of `(l, m)` with `0 <= m <= l` in a triangular table.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Normalized associated Legendre values `λ_l^m(θ) = Y^l_m(θ, 0)` for
/// `0 <= m <= l < bandwidth`, stored by [`tri_index`].
///
/// Uses the normalized three-term recurrence, which stays within floating
/// point range for degrees well beyond 128.
pub fn normalized_legendre(bandwidth: usize, theta: f64) -> Vec<f64> {
    let mut out = vec![0.0; bandwidth * (bandwidth + 1) / 2];
    if bandwidth == 0 {
        return out;
    }
    let (s, x) = theta.sin_cos();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..bandwidth {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[tri_index(m, m)] = pmm;
        if m + 1 >= bandwidth {
            break;
        }
        let mut prev = pmm;
        let mut cur = x * ((2 * m + 3) as f64).sqrt() * pmm;
        out[tri_index(m + 1, m)] = cur;
        for l in (m + 2)..bandwidth {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let next = a * (x * cur - b * prev);
            prev = cur;
            cur = next;
            out[tri_index(l, m)] = cur;
        }
    }
    out
}

/// Orthonormal spherical harmonic `Y^l_m(θ, φ)` at colatitude `theta` and
/// longitude `phi`.
pub fn sph_harm(l: usize, m: isize, theta: f64, phi: f64) -> Result<Complex64> {
    let am = m.unsigned_abs();
    if am > l {
        return Err(Error::domain(format!("|m| = {am} exceeds l = {l}")));
    }
    let lambda = normalized_legendre(l + 1, theta)[tri_index(l, am)];
    let value = Complex64::from_polar(lambda, am as f64 * phi);
    if m >= 0 {
        Ok(value)
    } else if am % 2 == 0 {
        Ok(value.conj())
    } else {
        Ok(-value.conj())
    }
}
