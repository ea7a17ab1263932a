//! Serial-chain kinematics: forward kinematics, geometric Jacobian,
//! manipulability and inverse kinematics.

mod config;
mod ik;

pub use config::{
    default_chain, parse_chain, read_chain, CHAIN_SCHEMA_VERSION, DEFAULT_CHAIN_TOML,
};
pub use ik::{ik_diverse_set, ik_single, IkParams, IkSet};

use std::ops::{Index, IndexMut};

use nalgebra::{Isometry3, Matrix3, Matrix6xX, Translation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Capsule, Pose, Vec3};

/// Joint angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn new(q: Vec<f64>) -> Self {
        JointConfig(q)
    }

    pub fn zeros(n: usize) -> Self {
        JointConfig(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Largest absolute joint difference.
    pub fn linf_distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<usize> for JointConfig {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointConfig {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(q: Vec<f64>) -> Self {
        JointConfig(q)
    }
}

/// Revolute joint.
#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub axis: Unit<Vector3<f64>>,
    /// Fixed transform from the previous joint frame to this joint's frame at
    /// zero angle.
    pub origin: Isometry3<f64>,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
}

/// Collision capsule rigidly attached to a link frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkCapsule {
    /// 0 is the base; `k` is the frame after joint `k`.
    pub link: usize,
    pub capsule: Capsule,
}

/// Immutable serial chain of revolute joints.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    name: String,
    base: Isometry3<f64>,
    joints: Vec<Joint>,
    ee_offset: Isometry3<f64>,
    capsules: Vec<LinkCapsule>,
    home: Option<JointConfig>,
}

impl KinematicChain {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Joint>,
        ee_offset: Isometry3<f64>,
        capsules: Vec<LinkCapsule>,
    ) -> Result<Self> {
        if joints.len() < 6 {
            return Err(Error::invalid(format!(
                "chain needs at least 6 joints, got {}",
                joints.len()
            )));
        }
        Self::build(name.into(), joints, ee_offset, capsules)
    }

    /// Like [`KinematicChain::new`] without the six-joint minimum; for small
    /// test arms.
    pub fn new_unchecked_dof(
        name: impl Into<String>,
        joints: Vec<Joint>,
        ee_offset: Isometry3<f64>,
        capsules: Vec<LinkCapsule>,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("chain has no joints"));
        }
        Self::build(name.into(), joints, ee_offset, capsules)
    }

    fn build(
        name: String,
        joints: Vec<Joint>,
        ee_offset: Isometry3<f64>,
        capsules: Vec<LinkCapsule>,
    ) -> Result<Self> {
        for j in &joints {
            if !(j.lower < j.upper) {
                return Err(Error::invalid(format!(
                    "joint {}: lower limit must be below upper",
                    j.name
                )));
            }
            if !(j.velocity_limit > 0.0) {
                return Err(Error::invalid(format!(
                    "joint {}: velocity limit must be positive",
                    j.name
                )));
            }
        }
        for c in &capsules {
            if c.link > joints.len() {
                return Err(Error::invalid(format!(
                    "capsule attached to missing link {}",
                    c.link
                )));
            }
            if !(c.capsule.radius > 0.0) {
                return Err(Error::invalid("link capsule radius must be positive"));
            }
        }
        Ok(KinematicChain {
            name,
            base: Isometry3::identity(),
            joints,
            ee_offset,
            capsules,
            home: None,
        })
    }

    pub fn with_home(mut self, home: JointConfig) -> Result<Self> {
        if home.len() != self.dof() {
            return Err(Error::invalid(
                "home configuration length does not match the chain",
            ));
        }
        self.home = Some(home);
        Ok(self)
    }

    /// Copy of the chain mounted at `base` in the world.
    pub fn with_base(&self, base: Isometry3<f64>) -> Self {
        KinematicChain {
            base,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn ee_offset(&self) -> &Isometry3<f64> {
        &self.ee_offset
    }

    pub fn capsules(&self) -> &[LinkCapsule] {
        &self.capsules
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Home configuration, or the joint-range midpoint when none is set.
    pub fn home(&self) -> JointConfig {
        self.home.clone().unwrap_or_else(|| self.midpoint())
    }

    pub fn midpoint(&self) -> JointConfig {
        JointConfig(
            self.joints
                .iter()
                .map(|j| 0.5 * (j.lower + j.upper))
                .collect(),
        )
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(&self.joints)
            .all(|(&v, j)| v >= j.lower && v <= j.upper)
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    pub fn random_config<R: Rng>(&self, rng: &mut R) -> JointConfig {
        JointConfig(
            self.joints
                .iter()
                .map(|j| rng.gen_range(j.lower..=j.upper))
                .collect(),
        )
    }

    pub fn check_len(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::invalid(format!(
                "configuration has {} values, chain has {} joints",
                q.len(),
                self.dof()
            )));
        }
        Ok(())
    }

    /// World frames of the base and of every joint (after rotation), `n + 1`
    /// entries. `q` must hold `dof()` values.
    pub fn link_frames_into(&self, q: &[f64], out: &mut Vec<Isometry3<f64>>) {
        debug_assert_eq!(q.len(), self.dof());
        out.clear();
        out.push(self.base);
        let mut t = self.base;
        for (j, &angle) in self.joints.iter().zip(q) {
            t = t * j.origin * UnitQuaternion::from_axis_angle(&j.axis, angle);
            out.push(t);
        }
    }

    pub fn link_frames(&self, q: &[f64]) -> Vec<Isometry3<f64>> {
        let mut out = Vec::with_capacity(self.dof() + 1);
        self.link_frames_into(q, &mut out);
        out
    }

    /// End-effector transform for a raw joint slice.
    pub fn ee_transform(&self, q: &[f64]) -> Isometry3<f64> {
        debug_assert_eq!(q.len(), self.dof());
        let mut t = self.base;
        for (j, &angle) in self.joints.iter().zip(q) {
            t = t * j.origin * UnitQuaternion::from_axis_angle(&j.axis, angle);
        }
        t * self.ee_offset
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Pose> {
        self.check_len(q)?;
        Ok(Pose::from_isometry(&self.ee_transform(&q.0)))
    }

    /// Geometric Jacobian (linear rows over angular rows, world frame) and
    /// the end-effector transform at `q`.
    pub fn jacobian_and_pose(&self, q: &[f64]) -> (Matrix6xX<f64>, Isometry3<f64>) {
        let n = self.dof();
        let mut ps = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        let mut t = self.base;
        for (j, &angle) in self.joints.iter().zip(q) {
            t *= j.origin;
            ps.push(t.translation.vector);
            zs.push(t.rotation * j.axis.into_inner());
            t *= UnitQuaternion::from_axis_angle(&j.axis, angle);
        }
        let ee = t * self.ee_offset;
        let pe = ee.translation.vector;
        let mut jac = Matrix6xX::zeros(n);
        for i in 0..n {
            let lin = zs[i].cross(&(pe - ps[i]));
            let mut col = jac.column_mut(i);
            col[0] = lin.x;
            col[1] = lin.y;
            col[2] = lin.z;
            col[3] = zs[i].x;
            col[4] = zs[i].y;
            col[5] = zs[i].z;
        }
        (jac, ee)
    }

    pub fn jacobian(&self, q: &JointConfig) -> Result<Matrix6xX<f64>> {
        self.check_len(q)?;
        Ok(self.jacobian_and_pose(&q.0).0)
    }

    /// Yoshikawa manipulability of the translational Jacobian rows,
    /// `sqrt(det(Jt Jt^T))`. Zero at (and numerically past) singularities.
    pub fn manipulability(&self, q: &JointConfig) -> Result<f64> {
        self.check_len(q)?;
        Ok(manipulability_of(&self.jacobian_and_pose(&q.0).0))
    }

    /// Position of the first joint, which no joint motion can move.
    pub fn shoulder(&self) -> Vec3 {
        (self.base * self.joints[0].origin).translation.vector
    }

    /// Upper bound on the distance between [`Self::shoulder`] and the end
    /// effector over all configurations.
    pub fn reach_bound(&self) -> f64 {
        self.joints[1..]
            .iter()
            .map(|j| j.origin.translation.vector.norm())
            .sum::<f64>()
            + self.ee_offset.translation.vector.norm()
    }
}

pub fn manipulability_of(jac: &Matrix6xX<f64>) -> f64 {
    let jt = jac.fixed_rows::<3>(0);
    let gram: Matrix3<f64> = jt * jt.transpose();
    gram.determinant().max(0.0).sqrt()
}

/// Convenience constructor for a revolute joint from plain arrays.
pub fn revolute(
    name: &str,
    axis: [f64; 3],
    origin_xyz: [f64; 3],
    origin_rot: UnitQuaternion<f64>,
    limits: (f64, f64),
    velocity_limit: f64,
) -> Joint {
    Joint {
        name: name.to_string(),
        axis: Unit::new_normalize(Vector3::from(axis)),
        origin: Isometry3::from_parts(Translation3::from(Vector3::from(origin_xyz)), origin_rot),
        lower: limits.0,
        upper: limits.1,
        velocity_limit,
    }
}
