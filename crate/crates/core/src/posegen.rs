//! Candidate end-effector poses on circles around a cut.
//!
//! Frame convention for the tool: +Z is the approach axis (pointing at the
//! cut), +X is the blade-plane normal (parallel to the branch direction).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_quat, Pose, Vec3};
use crate::treemodel::Cut;

pub const DEFAULT_APPROACH_RADIUS: f64 = 0.15;
pub const DEFAULT_CUTTING_RADIUS: f64 = 0.03;
pub const DEFAULT_ANGLE_COUNT: usize = 36;

/// Two vectors orthogonal to `v` and to each other (not normalized).
pub fn orthogonal_basis(v: &Vec3) -> Result<(Vec3, Vec3)> {
    if !(v.norm() > 0.0) || !v.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid(
            "cut direction must be a finite non-zero vector",
        ));
    }
    if v.x == 0.0 && v.y == 0.0 {
        return Ok((Vec3::x(), Vec3::y()));
    }
    let v1 = Vec3::new(v.y, -v.x, 0.0);
    let v2 = Vec3::new(v.x * v.z, v.y * v.z, -v.x * v.x - v.y * v.y);
    Ok((v1, v2))
}

/// `n` angles evenly spaced over `[-pi, pi)`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -PI + 2.0 * PI * i as f64 / n as f64)
        .collect()
}

/// Point at angle `theta` on the circle of radius `r` around the cut, in the
/// plane normal to the cut direction.
pub fn position_on_circle(cut: &Cut, r: f64, theta: f64) -> Result<Vec3> {
    if !(r > 0.0) {
        return Err(Error::invalid("ring radius must be positive"));
    }
    let (v1, v2) = orthogonal_basis(&cut.direction)?;
    Ok(cut.position + v1.normalize() * (r * theta.cos()) + v2.normalize() * (r * theta.sin()))
}

/// Tool orientation at `t_ee` for the given cut: column 1 along the cut
/// direction, column 3 from `t_ee` toward the cut, column 2 completing a
/// right-handed frame. Returned with `w >= 0`.
pub fn cutting_orientation(cut: &Cut, t_ee: &Vec3) -> Result<UnitQuaternion<f64>> {
    let approach = cut.position - t_ee;
    if !(approach.norm() > 0.0) {
        return Err(Error::DegeneratePose(
            "tool position coincides with the cut".into(),
        ));
    }
    let c = cut.direction.normalize();
    let a = approach.normalize();
    let side = a.cross(&c);
    let s = side.norm();
    if s < 1e-12 {
        return Err(Error::DegeneratePose(
            "approach direction is parallel to the cut direction".into(),
        ));
    }
    let y = side / s;
    // Re-orthogonalize so off-circle tool positions still yield a rotation.
    let z = c.cross(&y);
    let m = Matrix3::from_columns(&[c, y, z]);
    let rot = Rotation3::from_matrix_unchecked(m);
    Ok(canonical_quat(&UnitQuaternion::from_rotation_matrix(&rot)))
}

/// Poses at one radius around a cut, one per angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRing {
    pub cut: Cut,
    pub radius: f64,
    pub angles: Vec<f64>,
    pub poses: Vec<Pose>,
}

impl PoseRing {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

pub fn generate_pose_set(cut: &Cut, r: f64, angles: &[f64]) -> Result<PoseRing> {
    if let Some(bad) = angles.iter().find(|t| !(-PI..=PI).contains(*t)) {
        return Err(Error::invalid(format!("angle {bad} outside [-pi, pi]")));
    }
    let poses = angles
        .iter()
        .map(|&theta| {
            let t = position_on_circle(cut, r, theta)?;
            Ok(Pose::new(t, cutting_orientation(cut, &t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoseRing {
        cut: *cut,
        radius: r,
        angles: angles.to_vec(),
        poses,
    })
}

/// Approach and cutting rings sharing one angle list.
pub fn paired_rings(cut: &Cut, r_a: f64, r_c: f64, angles: &[f64]) -> Result<(PoseRing, PoseRing)> {
    if !(r_a >= r_c && r_c > 0.0) {
        return Err(Error::invalid("ring radii must satisfy r_a >= r_c > 0"));
    }
    Ok((
        generate_pose_set(cut, r_a, angles)?,
        generate_pose_set(cut, r_c, angles)?,
    ))
}

/// Index of the angle whose ring point at radius `r` lies closest to
/// `toward`; ties go to the lowest index.
pub fn facing_angle_index(
    cut: &Cut,
    r: f64,
    angles: &[f64],
    toward: &Vec3,
) -> Result<Option<usize>> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &theta) in angles.iter().enumerate() {
        let d = (position_on_circle(cut, r, theta)? - toward).norm();
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    Ok(best.map(|(i, _)| i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut(dir: Vec3) -> Cut {
        Cut::free(Vec3::new(0.3, -0.2, 0.5), dir).unwrap()
    }

    #[test]
    fn basis_on_x_axis() {
        let (v1, v2) = orthogonal_basis(&Vec3::x()).unwrap();
        assert_eq!(v1, Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(v2, Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn basis_fallback_on_z_axis() {
        let (v1, v2) = orthogonal_basis(&Vec3::z()).unwrap();
        assert_eq!((v1, v2), (Vec3::x(), Vec3::y()));
        assert!(matches!(
            orthogonal_basis(&Vec3::zeros()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn axis_aligned_orientation() {
        let r = 0.1;
        let c = Cut::free(Vec3::zeros(), Vec3::z()).unwrap();
        let q = cutting_orientation(&c, &Vec3::new(-r, 0.0, 0.0)).unwrap();
        let m = q.to_rotation_matrix().into_inner();
        assert!((m.column(0) - Vec3::z()).norm() < 1e-12);
        assert!((m.column(1) - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((m.column(2) - Vec3::x()).norm() < 1e-12);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_approach_is_degenerate() {
        let c = Cut::free(Vec3::zeros(), Vec3::z()).unwrap();
        let err = cutting_orientation(&c, &Vec3::new(0.0, 0.0, -0.1)).unwrap_err();
        assert!(matches!(err, Error::DegeneratePose(_)));
        assert!(matches!(
            cutting_orientation(&c, &Vec3::zeros()),
            Err(Error::DegeneratePose(_))
        ));
    }

    #[test]
    fn opposite_angles_are_symmetric() {
        let c = cut(Vec3::new(0.3, 0.4, 0.2));
        let a = position_on_circle(&c, 0.15, 0.7).unwrap();
        let b = position_on_circle(&c, 0.15, 0.7 - PI).unwrap();
        assert!(((a + b) / 2.0 - c.position).norm() < 1e-12);
        let z = position_on_circle(&c, 0.15, 0.0).unwrap();
        let (v1, _) = orthogonal_basis(&c.direction).unwrap();
        assert!((z - (c.position + v1.normalize() * 0.15)).norm() < 1e-15);
    }

    #[test]
    fn paired_rings_share_orientation() {
        let c = cut(Vec3::new(-0.2, 0.1, 0.6));
        let (a, k) = paired_rings(&c, 0.15, 0.03, &uniform_angles(36)).unwrap();
        assert_eq!(a.len(), 36);
        for (pa, pc) in a.poses.iter().zip(&k.poses) {
            assert!(pa.rotation.angle_to(&pc.rotation) < 1e-9);
            let along = pa.rotation * Vec3::z();
            assert!(((pc.translation - pa.translation) - along * 0.12).norm() < 1e-12);
        }
        assert!(paired_rings(&c, 0.01, 0.03, &[0.0]).is_err());
    }

    #[test]
    fn angles_outside_range_rejected() {
        let c = cut(Vec3::x());
        assert!(generate_pose_set(&c, 0.1, &[4.0]).is_err());
        assert_eq!(generate_pose_set(&c, 0.1, &[1.0]).unwrap().len(), 1);
        assert!(generate_pose_set(&c, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn facing_index_picks_nearest() {
        let c = Cut::free(Vec3::zeros(), Vec3::z()).unwrap();
        let angles = uniform_angles(4); // -pi, -pi/2, 0, pi/2
        let i = facing_angle_index(&c, 0.1, &angles, &Vec3::new(0.0, 5.0, 0.0)).unwrap();
        assert_eq!(i, Some(3));
    }
}
