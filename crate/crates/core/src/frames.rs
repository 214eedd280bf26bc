//! Coordinate frames, rotation matrices and attitude error metrics.
//!
//! A [`Rotation`] maps body-frame (BCS) coordinates to local-frame (LCS)
//! coordinates: `t_local = R * t_body`. Matrices are vectorized by stacking
//! columns everywhere in this crate, which is also nalgebra's storage order.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{
    Dim, Matrix, Matrix3, Quaternion, RawStorage, SMatrix, SVector, UnitQuaternion, Vector3,
};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec9 = SVector<f64, 9>;
pub type Mat9 = SMatrix<f64, 9, 9>;

/// Tolerance used when validating that a matrix lies in SO(3).
pub const SO3_TOLERANCE: f64 = 1e-10;

/// A proper rotation matrix (orthonormal, unit determinant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps `m` after checking orthonormality and determinant to
    /// [`SO3_TOLERANCE`].
    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let gram = m.transpose() * m - Matrix3::identity();
        if gram.amax() > SO3_TOLERANCE || (m.determinant() - 1.0).abs() > SO3_TOLERANCE {
            return Err(Error::DegenerateInput(format!(
                "matrix is not in SO(3): |RtR - I|max = {:e}, det = {}",
                gram.amax(),
                m.determinant()
            )));
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking. Callers guarantee `m` is a rotation up
    /// to rounding.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Right-handed rotation by `angle` radians about the unit `axis`
    /// (Rodrigues formula).
    pub fn about_axis(axis: &Vec3, angle: f64) -> Rotation {
        let k = axis.normalize();
        exp_so3(&(k * angle))
    }

    pub fn rot_x(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Draws a rotation from the Haar (uniform) distribution on SO(3).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let uq = UnitQuaternion::from_quaternion(q);
        Rotation(*uq.to_rotation_matrix().matrix())
    }

    /// Maximum elementwise deviation from the SO(3) invariants.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = (self.0.transpose() * self.0 - Matrix3::identity()).amax();
        gram.max((self.0.determinant() - 1.0).abs())
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Yaw/pitch/roll in radians, composed as `Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Result<Self> {
        let angles = EulerAngles { yaw, pitch, roll };
        angles.validate()?;
        Ok(angles)
    }

    pub fn from_degrees(yaw: f64, pitch: f64, roll: f64) -> Result<Self> {
        Self::new(yaw.to_radians(), pitch.to_radians(), roll.to_radians())
    }

    pub fn validate(&self) -> Result<()> {
        let in_half_open = |a: f64| a > -PI && a <= PI;
        if !(self.pitch >= -PI / 2.0 && self.pitch <= PI / 2.0) {
            return Err(Error::Config(format!("pitch {} outside [-pi/2, pi/2]", self.pitch)));
        }
        if !in_half_open(self.yaw) || !in_half_open(self.roll) {
            return Err(Error::Config(format!(
                "yaw {} / roll {} outside (-pi, pi]",
                self.yaw, self.roll
            )));
        }
        Ok(())
    }
}

pub fn rotation_from_euler(angles: EulerAngles) -> Rotation {
    Rotation::rot_z(angles.yaw) * Rotation::rot_y(angles.pitch) * Rotation::rot_x(angles.roll)
}

/// Expresses a body-frame vector in the local frame.
pub fn body_to_local(r: &Rotation, t_body: &Vec3) -> Vec3 {
    r.0 * t_body
}

/// Geodesic distance between two rotations, in degrees.
pub fn geodesic_angle_deg(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.0.transpose() * b.0;
    let cos = (m.trace() - 1.0) / 2.0;
    let s = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = s.norm() / 2.0;
    sin.atan2(cos.clamp(-1.0, 1.0)).to_degrees()
}

/// Frobenius norm of `a - b`.
///
/// Panics when the shapes differ.
pub fn frobenius_error<R1, C1, S1, R2, C2, S2>(
    a: &Matrix<f64, R1, C1, S1>,
    b: &Matrix<f64, R2, C2, S2>,
) -> f64
where
    R1: Dim,
    C1: Dim,
    R2: Dim,
    C2: Dim,
    S1: RawStorage<f64, R1, C1>,
    S2: RawStorage<f64, R2, C2>,
{
    assert_eq!(a.shape(), b.shape(), "frobenius_error: dimension mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest rotation in the Frobenius norm, via SVD with a determinant fix.
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite matrix".into()));
    }
    let svd = m.svd(true, true);
    let s = svd.singular_values;
    let smax = s.max();
    let near_zero = s.iter().filter(|&&v| v <= 1e-12 * smax.max(f64::MIN_POSITIVE)).count();
    if smax == 0.0 || near_zero >= 2 {
        return Err(Error::DegenerateInput(format!(
            "cannot project a matrix of rank < 2 onto SO(3) (singular values {:?})",
            s.as_slice()
        )));
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(s.imin(), s.imin())] = -1.0;
    }
    Ok(Rotation(u * d * v_t))
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map from axis-angle vectors to rotations.
pub fn exp_so3(w: &Vec3) -> Rotation {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-8 {
        return Rotation(Matrix3::identity() + k + 0.5 * k * k);
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Rotation(Matrix3::identity() + a * k + b * k * k)
}

/// Column-stacked vectorization of a 3x3 matrix.
pub fn vec3x3(m: &Matrix3<f64>) -> Vec9 {
    Vec9::from_column_slice(m.as_slice())
}

/// Inverse of [`vec3x3`].
pub fn unvec3x3(v: &Vec9) -> Matrix3<f64> {
    Matrix3::from_column_slice(v.as_slice())
}
