use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const COLUMN_EPS: f64 = 1e-9;

/// Unit quaternion with the double cover resolved to `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    fn canonical(q: UnitQuaternion<f64>) -> Self {
        if q.w < 0.0 {
            Rotation(UnitQuaternion::new_unchecked(-q.into_inner()))
        } else {
            Rotation(q)
        }
    }

    /// Builds a rotation from raw quaternion components, normalizing them.
    pub fn from_xyzw(x: f64, y: f64, z: f64, w: f64) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < COLUMN_EPS {
            return Err(Error::DegenerateInput("quaternion norm"));
        }
        Ok(Self::canonical(UnitQuaternion::new_normalize(q)))
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self::canonical(q)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        match Unit::try_new(*axis, 1e-15) {
            Some(a) => Self::canonical(UnitQuaternion::from_axis_angle(&a, angle)),
            None => Self::identity(),
        }
    }

    /// Rotation from an axis-angle vector (direction = axis, norm = angle).
    pub fn from_scaled_axis(v: &Vec3) -> Self {
        Self::canonical(UnitQuaternion::from_scaled_axis(*v))
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let r = Rotation3::from_matrix_unchecked(*m);
        Self::canonical(UnitQuaternion::from_rotation_matrix(&r))
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn to_xyzw(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        *self.0.to_rotation_matrix().matrix()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.0.inverse())
    }

    pub fn scaled_axis(&self) -> Vec3 {
        self.0.scaled_axis()
    }

    /// Geodesic angle in [0, pi].
    pub fn angle(&self) -> f64 {
        self.0.angle()
    }

    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.0.angle_to(&other.0)
    }

    /// Rotation about +z by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle(&Vec3::z(), yaw)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation::canonical(self.0 * rhs.0)
    }
}

/// First two columns of a rotation matrix, stored column-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn from_rotation(r: &Rotation) -> Self {
        let m = r.matrix();
        Rot6D([
            m[(0, 0)],
            m[(1, 0)],
            m[(2, 0)],
            m[(0, 1)],
            m[(1, 1)],
            m[(2, 1)],
        ])
    }

    /// Gram-Schmidt reconstruction of the full rotation.
    pub fn to_rotation(&self) -> Result<Rotation> {
        Ok(Rotation::from_matrix(&self.to_matrix()?))
    }

    pub fn to_matrix(&self) -> Result<Matrix3<f64>> {
        let a = Vec3::new(self.0[0], self.0[1], self.0[2]);
        let b = Vec3::new(self.0[3], self.0[4], self.0[5]);
        if !(a.iter().chain(b.iter()).all(|v| v.is_finite())) {
            return Err(Error::NonFiniteInput("rot6d"));
        }
        let na = a.norm();
        if na <= COLUMN_EPS {
            return Err(Error::DegenerateInput("first 6d column"));
        }
        let c1 = a / na;
        let b_orth = b - c1 * c1.dot(&b);
        let nb = b_orth.norm();
        if nb <= COLUMN_EPS {
            return Err(Error::DegenerateInput("second 6d column"));
        }
        let c2 = b_orth / nb;
        let c3 = c1.cross(&c2);
        Ok(Matrix3::from_columns(&[c1, c2, c3]))
    }
}

pub fn rot_to_6d(r: &Rotation) -> Rot6D {
    Rot6D::from_rotation(r)
}

pub fn rot_from_6d(r: &Rot6D) -> Result<Rotation> {
    r.to_rotation()
}

/// Rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: Rotation,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(translation: Vec3, rotation: Rotation) -> Self {
        Pose {
            translation,
            rotation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Vec3::zeros(), Rotation::identity())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose::new(t, Rotation::identity())
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Pose::new(Vec3::zeros(), r)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation.rotate(&other.translation) + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -inv.rotate(&self.translation),
            rotation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    /// `[tx, ty, tz, qx, qy, qz, qw]`
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.rotation.to_xyzw();
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            q[0],
            q[1],
            q[2],
            q[3],
        ]
    }

    pub fn from_array(a: &[f64; 7]) -> Result<Pose> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("pose"));
        }
        Ok(Pose::new(
            Vec3::new(a[0], a[1], a[2]),
            Rotation::from_xyzw(a[3], a[4], a[5], a[6])?,
        ))
    }

    pub fn from_slice(a: &[f64]) -> Result<Pose> {
        let arr: [f64; 7] = a.try_into().map_err(|_| Error::SizeMismatch {
            expected: 7,
            got: a.len(),
        })?;
        Pose::from_array(&arr)
    }

    /// Translation distance and geodesic rotation angle to `other`.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        (
            (self.translation - other.translation).norm(),
            self.rotation.angle_to(&other.rotation),
        )
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// Serialized as `[x, y, z, w]`.
impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_xyzw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y, z, w] = <[f64; 4]>::deserialize(d)?;
        Rotation::from_xyzw(x, y, z, w).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 7]>::deserialize(d)?;
        Pose::from_array(&a).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    #[test]
    fn identity_compose() {
        let t = Pose::new(
            Vec3::new(0.3, -1.0, 2.0),
            Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 0.7),
        );
        let c = Pose::identity().compose(&t);
        assert!((c.translation - t.translation).norm() < 1e-15);
        assert!(c.rotation.angle_to(&t.rotation) < 1e-12);
    }

    #[test]
    fn pure_translations_add() {
        let a = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let b = Pose::from_translation(Vec3::new(0.0, 2.0, 0.0));
        assert_eq!(a.compose(&b).translation, Vec3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = Pose::from_rotation(Rotation::from_yaw(FRAC_PI_2));
        let p = r.transform_point(&Vec3::new(1.0, 0.0, 0.0));
        assert!((p - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn canonical_sign() {
        let r = Rotation::from_xyzw(0.0, 0.0, 0.6, -0.8).unwrap();
        assert!(r.to_xyzw()[3] >= 0.0);
        assert_eq!(r, Rotation::from_xyzw(0.0, 0.0, -0.6, 0.8).unwrap());
    }

    #[test]
    fn identity_to_6d() {
        assert_eq!(
            rot_to_6d(&Rotation::identity()).0,
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn degenerate_6d() {
        assert!(matches!(
            Rot6D([0.0; 6]).to_rotation(),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            Rot6D([1.0, 0.0, 0.0, 2.0, 0.0, 0.0]).to_rotation(),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert!(Rotation::from_xyzw(0.0, 0.0, 0.0, 0.0).is_err());
    }
}
