//! Rigid camera poses and quaternion utilities.
//!
//! Quaternions are stored as (w, x, y, z). Every constructor canonicalizes the
//! sign so that `w >= 0`; when `w == 0` the first nonzero of (x, y, z) is made
//! non-negative. This picks one representative of the double cover.

use nalgebra::{Matrix3, Matrix4, Quaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOL: f64 = 1e-6;

/// Flip the sign of `q` into the canonical hemisphere.
pub fn canonicalize_quat(q: Quaternion<f64>) -> Quaternion<f64> {
    let c = [q.w, q.i, q.j, q.k];
    let first = c.iter().copied().find(|x| *x != 0.0).unwrap_or(0.0);
    if first < 0.0 {
        -q
    } else {
        q
    }
}

pub fn quat_to_rot(q: &Quaternion<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Shepperd's method on the largest diagonal term; output is canonicalized.
pub fn rot_to_quat(r: &Matrix3<f64>) -> Result<Quaternion<f64>> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entries".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    if ortho > UNIT_TOL {
        return Err(Error::InvalidRotation(format!(
            "R^T R deviates from identity by {ortho:e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidRotation(format!("determinant {det}")));
    }

    let trace = r.trace();
    let diag = [r[(0, 0)], r[(1, 1)], r[(2, 2)]];
    let q = if trace >= diag[0] && trace >= diag[1] && trace >= diag[2] {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quaternion::new(
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        )
    } else if diag[0] >= diag[1] && diag[0] >= diag[2] {
        let s = 2.0 * (1.0 + diag[0] - diag[1] - diag[2]).sqrt();
        Quaternion::new(
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        )
    } else if diag[1] >= diag[2] {
        let s = 2.0 * (1.0 + diag[1] - diag[0] - diag[2]).sqrt();
        Quaternion::new(
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + diag[2] - diag[0] - diag[1]).sqrt();
        Quaternion::new(
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        )
    };
    Ok(canonicalize_quat(q.normalize()))
}

/// Geodesic angle (radians) between two rotations given as unit quaternions.
pub fn quat_angle(a: &Quaternion<f64>, b: &Quaternion<f64>) -> f64 {
    // Angle of the relative rotation a⁻¹b; atan2 keeps small angles accurate.
    let r = a.conjugate() * b;
    2.0 * r.imag().norm().atan2(r.w.abs())
}

/// Camera-to-reference rigid transform: `x_ref = R * x_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Quaternion<f64>,
    translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Quaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose from a quaternion that must be unit within 1e-6; the
    /// stored value is renormalized and canonicalized.
    pub fn new(rotation: Quaternion<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.coords.iter().all(|v| v.is_finite())
            || !translation.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidRotation("non-finite pose".into()));
        }
        let n = rotation.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidRotation(format!("quaternion norm {n}")));
        }
        Ok(Self {
            rotation: canonicalize_quat(rotation / n),
            translation,
        })
    }

    /// Normalizes an arbitrary nonzero quaternion.
    pub fn from_unnormalized(rotation: Quaternion<f64>, translation: Vec3) -> Result<Self> {
        let n = rotation.norm();
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::InvalidRotation(format!("quaternion norm {n}")));
        }
        Self::new(rotation / n, translation)
    }

    pub fn from_rotation_matrix(r: &Matrix3<f64>, translation: Vec3) -> Result<Self> {
        Self::new(rot_to_quat(r)?, translation)
    }

    /// `[qw, qx, qy, qz, tx, ty, tz]`
    pub fn from_array(a: [f64; 7]) -> Result<Self> {
        Self::new(
            Quaternion::new(a[0], a[1], a[2], a[3]),
            Vec3::new(a[4], a[5], a[6]),
        )
    }

    /// Like [`Pose::from_array`], but keeps a quaternion that is already unit
    /// to rounding precision bit-for-bit, so stored poses round-trip exactly.
    pub fn from_stored(a: [f64; 7]) -> Result<Self> {
        let p = Self::from_array(a)?;
        let q = Quaternion::new(a[0], a[1], a[2], a[3]);
        if (q.norm() - 1.0).abs() <= 1e-14 {
            Ok(Self {
                rotation: canonicalize_quat(q),
                ..p
            })
        } else {
            Ok(p)
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        let q = &self.rotation;
        let t = &self.translation;
        [q.w, q.i, q.j, q.k, t.x, t.y, t.z]
    }

    pub fn rotation(&self) -> &Quaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn with_translation(&self, translation: Vec3) -> Self {
        Self {
            rotation: self.rotation,
            translation,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        quat_to_rot(&self.rotation)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation_matrix() * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r = self.rotation_matrix();
        Pose {
            rotation: canonicalize_quat((self.rotation * other.rotation).normalize()),
            translation: r * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let conj = self.rotation.conjugate();
        let rt = quat_to_rot(&conj);
        Pose {
            rotation: canonicalize_quat(conj),
            translation: -(rt * self.translation),
        }
    }

    /// Pose of `other` expressed in the frame of `self`.
    pub fn relative_to(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    /// Camera center in the reference frame.
    pub fn center(&self) -> Vec3 {
        self.translation
    }
}

pub fn pose_compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn pose_inverse(p: &Pose) -> Pose {
    p.inverse()
}

/// `compose(inverse(a), b)`.
pub fn relative_pose(a: &Pose, b: &Pose) -> Pose {
    a.relative_to(b)
}
