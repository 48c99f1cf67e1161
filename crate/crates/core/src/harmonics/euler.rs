//! Rotations in ZYZ Euler form, `R = Rz(α) Ry(β) Rz(γ)` acting actively on
//! column vectors.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Below this `sin β` the α/γ split is not recoverable from the matrix.
const GIMBAL_EPS: f64 = 1e-12;

/// An element of SO(3) in canonical ZYZ Euler angles.
///
/// `alpha, gamma ∈ [0, 2π)`, `beta ∈ [0, π]`. At `beta ∈ {0, π}` only
/// `α ± γ` is determined and the canonical form sets `gamma = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid may round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    /// Canonicalizes an arbitrary Euler triple.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        let mut beta = beta.rem_euclid(TAU);
        let (mut alpha, mut gamma) = (alpha, gamma);
        if beta > PI {
            // Ry(β) = Rz(π) Ry(2π - β) Rz(-π)
            beta = TAU - beta;
            alpha += PI;
            gamma += PI;
        }
        if beta == 0.0 {
            alpha += gamma;
            gamma = 0.0;
        } else if beta == PI {
            alpha -= gamma;
            gamma = 0.0;
        }
        Rotation {
            alpha: wrap_angle(alpha),
            beta,
            gamma: wrap_angle(gamma),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn angles(&self) -> (f64, f64, f64) {
        (self.alpha, self.beta, self.gamma)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        Matrix3::new(
            ca * cb * cg - sa * sg,
            -ca * cb * sg - sa * cg,
            ca * sb,
            sa * cb * cg + ca * sg,
            -sa * cb * sg + ca * cg,
            sa * sb,
            -sb * cg,
            sb * sg,
            cb,
        )
    }

    /// Recovers canonical angles from a rotation matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let sb = m[(0, 2)].hypot(m[(1, 2)]);
        let beta = sb.atan2(m[(2, 2)]);
        if sb > GIMBAL_EPS {
            let alpha = m[(1, 2)].atan2(m[(0, 2)]);
            let gamma = m[(2, 1)].atan2(-m[(2, 0)]);
            Rotation::new(alpha, beta, gamma)
        } else if m[(2, 2)] > 0.0 {
            Rotation::new(m[(1, 0)].atan2(m[(0, 0)]), 0.0, 0.0)
        } else {
            Rotation::new((-m[(1, 0)]).atan2(-m[(0, 0)]), PI, 0.0)
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.alpha)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), self.beta)
            * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.gamma)
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation::from_matrix(q.to_rotation_matrix().matrix())
    }

    /// `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation::from_matrix(&(self.matrix() * other.matrix()))
    }

    pub fn inverse(&self) -> Rotation {
        // Rz(-γ) Ry(-β) Rz(-α) = Rz(π-γ) Ry(β) Rz(-π-α)
        if self.beta == 0.0 {
            Rotation::new(-self.alpha, 0.0, 0.0)
        } else if self.beta == PI {
            Rotation::new(self.alpha, PI, 0.0)
        } else {
            Rotation::new(PI - self.gamma, self.beta, PI - self.alpha)
        }
    }

    /// Rotates a unit vector given in spherical coordinates and returns the
    /// image's `(θ, φ)`.
    pub fn apply_to_direction(&self, theta: f64, phi: f64) -> (f64, f64) {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let v = self.matrix() * Vector3::new(st * cp, st * sp, ct);
        let t = v.x.hypot(v.y).atan2(v.z);
        let p = wrap_angle(v.y.atan2(v.x));
        (t, p)
    }

    /// Haar-uniform rotation from a normalized Gaussian quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
        loop {
            let w: f64 = rng.sample(StandardNormal);
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            let q = Quaternion::new(w, x, y, z);
            if q.norm() > 1e-8 {
                return Rotation::from_quaternion(&UnitQuaternion::from_quaternion(q));
            }
        }
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::IDENTITY
    }
}

/// Alias for [`Rotation::compose`].
pub fn compose(r1: &Rotation, r2: &Rotation) -> Rotation {
    r1.compose(r2)
}

/// Alias for [`Rotation::inverse`].
pub fn inverse(r: &Rotation) -> Rotation {
    r.inverse()
}

/// Alias for [`Rotation::random`].
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    Rotation::random(rng)
}
