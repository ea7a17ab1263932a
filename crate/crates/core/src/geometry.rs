//! Shared geometric types: poses, capsules and rotation helpers.

use nalgebra::{Isometry3, Matrix3, Quaternion, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// End-effector pose: position in meters plus a unit quaternion.
///
/// Serialized as `{"position": [x, y, z], "orientation": [w, x, y, z]}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl From<PoseRepr> for Pose {
    fn from(r: PoseRepr) -> Self {
        let [w, x, y, z] = r.orientation;
        Pose {
            translation: Vec3::from(r.position),
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        }
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            position: p.translation.into(),
            orientation: quat_wxyz(&p.rotation),
        }
    }
}

impl Pose {
    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Pose {
            translation,
            rotation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Vec3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Pose::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    /// Same pose with the quaternion sign fixed so that `w >= 0`.
    pub fn canonical(&self) -> Self {
        Pose::new(self.translation, canonical_quat(&self.rotation))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }
}

/// Quaternion components in `[w, x, y, z]` order.
pub fn quat_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Flip the quaternion sign so `w >= 0` (the two signs encode one rotation).
pub fn canonical_quat(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        *q
    }
}

/// Rotation vector (axis times angle, angle in `[0, pi]`) of a unit quaternion.
///
/// Uses `atan2` on the vector and scalar parts so small angles keep full
/// precision.
pub fn rotation_vector(q: &UnitQuaternion<f64>) -> Vec3 {
    let q = canonical_quat(q);
    let v = q.imag();
    let s = v.norm();
    if s < 1e-300 {
        return Vec3::zeros();
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

/// Angle between two orientations in radians.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    rotation_vector(&(b * a.inverse())).norm()
}

/// Six-vector error from `current` to `goal`: translational difference stacked
/// over the rotation vector of `goal * current^-1`, both in the world frame.
pub fn pose_error(current: &Pose, goal: &Pose) -> Vector6<f64> {
    let dt = goal.translation - current.translation;
    let dr = if goal.rotation == current.rotation {
        Vec3::zeros()
    } else {
        rotation_vector(&(goal.rotation * current.rotation.inverse()))
    };
    Vector6::new(dt.x, dt.y, dt.z, dr.x, dr.y, dr.z)
}

/// A segment swept by a sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> Capsule {
        Capsule {
            a: iso.transform_point(&self.a.into()).coords,
            b: iso.transform_point(&self.b.into()).coords,
            radius: self.radius,
        }
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        let r = Vec3::repeat(self.radius);
        (self.a.inf(&self.b) - r, self.a.sup(&self.b) + r)
    }
}

/// Closest distance between segments `p1-q1` and `p2-q2`.
pub fn segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    const EPS: f64 = 1e-24;

    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

fn capsule_key(c: &Capsule) -> [f64; 7] {
    [c.a.x, c.a.y, c.a.z, c.b.x, c.b.y, c.b.z, c.radius]
}

/// Signed distance between two capsules: segment distance minus the radius
/// sum. Negative values mean penetration.
///
/// Arguments are put in a canonical order first, so swapping them yields a
/// bit-identical result.
pub fn capsule_distance(a: &Capsule, b: &Capsule) -> f64 {
    let ka = capsule_key(a);
    let kb = capsule_key(b);
    let swap = ka
        .iter()
        .zip(kb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .is_some_and(|o| o.is_gt());
    let (first, second) = if swap { (b, a) } else { (a, b) };
    segment_distance(&first.a, &first.b, &second.a, &second.b) - (first.radius + second.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn parallel_capsules() {
        let a = Capsule::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.1);
        let b = Capsule::new(Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0), 0.1);
        assert!((capsule_distance(&a, &b) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_capsules_give_minus_two_r() {
        let a = Capsule::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, -1.0, 0.5), 0.25);
        assert!((capsule_distance(&a, &a) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_segments_are_points() {
        let a = Capsule::new(Vec3::zeros(), Vec3::zeros(), 0.1);
        let b = Capsule::new(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 2.0), 0.1);
        assert!((capsule_distance(&a, &b) - 1.8).abs() < 1e-12);
        let c = Capsule::new(Vec3::new(-1.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0), 0.0);
        assert!((capsule_distance(&a, &c) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rotation_vector_of_quarter_turn() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2);
        let v = rotation_vector(&q);
        assert!((v - Vec3::new(0.0, 0.0, FRAC_PI_2)).norm() < 1e-12);
        // the negated quaternion is the same rotation
        let neg = UnitQuaternion::new_unchecked(-q.into_inner());
        assert!((rotation_vector(&neg) - v).norm() < 1e-12);
    }

    #[test]
    fn pose_serializes_wxyz() {
        let p = Pose::new(Vec3::new(1.0, 2.0, 3.0), UnitQuaternion::identity());
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"position":[1.0,2.0,3.0],"orientation":[1.0,0.0,0.0,0.0]}"#
        );
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
