//! Position-based servoing from the approach pose to the cutting pose.

use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionWorld, Contact};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::kinematics::{JointConfig, KinematicChain};

pub use crate::geometry::pose_error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoConfig {
    /// Translational gain (1/s).
    pub k_t: f64,
    /// Rotational gain (1/s).
    pub k_r: f64,
    /// Control period (s).
    pub dt: f64,
    pub max_steps: usize,
    pub tol_t: f64,
    pub tol_r: f64,
    /// Pseudoinverse damping. Zero gives the plain pseudoinverse.
    pub damping: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            k_t: 2.0,
            k_r: 2.0,
            dt: 0.01,
            max_steps: 2000,
            tol_t: 1e-3,
            tol_r: 1e-2,
            damping: 0.01,
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.k_t, self.k_r, self.dt, self.tol_t, self.tol_r];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_steps == 0 {
            return Err(Error::invalid(
                "servo gains, period, tolerances and step budget must be positive",
            ));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::invalid("servo damping must be non-negative"));
        }
        Ok(())
    }

    fn within_tol(&self, e: &Vector6<f64>) -> bool {
        e.fixed_rows::<3>(0).norm() <= self.tol_t && e.fixed_rows::<3>(3).norm() <= self.tol_r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Success,
    JointLimit,
    VelocityLimit,
    Collision,
    /// Step budget used up without meeting the tolerance.
    NotConverged,
}

impl ExecutionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionStatus::Success => "success",
            ExecutionStatus::JointLimit => "joint_limit",
            ExecutionStatus::VelocityLimit => "velocity_limit",
            ExecutionStatus::Collision => "collision",
            ExecutionStatus::NotConverged => "not_converged",
        }
    }
}

/// One control step: the configuration reached, the command that produced
/// it, and the pose error remaining there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub error: [f64; 6],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecutionStatus,
    pub steps: usize,
    /// Final translational error (m).
    pub error_t: f64,
    /// Final rotational error (rad).
    pub error_r: f64,
    /// Offending pair when the status is a collision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactRecord>,
    /// Joint that tripped a limit, when the status is a limit violation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<usize>,
    pub log: Vec<StepLog>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub robot_capsule: usize,
    pub link: usize,
    pub static_capsule: usize,
    pub distance: f64,
}

impl From<Contact> for ContactRecord {
    fn from(c: Contact) -> Self {
        ContactRecord {
            robot_capsule: c.robot_capsule,
            link: c.link,
            static_capsule: c.static_capsule,
            distance: c.distance,
        }
    }
}

/// `(error, q_dot)` at `q`: the damped pseudoinverse of the Jacobian applied to
/// the gain-scaled pose error.
fn command(
    chain: &KinematicChain,
    q: &[f64],
    goal: &Pose,
    cfg: &ServoConfig,
) -> (Vector6<f64>, DVector<f64>) {
    let (jac, ee) = chain.jacobian_and_pose(q);
    let e = pose_error(&Pose::from_isometry(&ee), goal);
    let nu = Vector6::new(
        cfg.k_t * e[0],
        cfg.k_t * e[1],
        cfg.k_t * e[2],
        cfg.k_r * e[3],
        cfg.k_r * e[4],
        cfg.k_r * e[5],
    );
    // J+ nu = sum_i sigma_i / (sigma_i^2 + lambda^2) v_i (u_i . nu)
    let svd = jac.svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let l2 = cfg.damping * cfg.damping;
    let mut qdot = DVector::zeros(q.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let denom = s * s + l2;
        if denom == 0.0 {
            continue;
        }
        let w = s / denom * u.column(i).dot(&nu);
        qdot += vt.row(i).transpose() * w;
    }
    (e, qdot)
}

/// One servo step from `q`. Returns `(q_dot, q + q_dot * dt)`.
pub fn pbs_step(
    chain: &KinematicChain,
    q: &JointConfig,
    goal: &Pose,
    cfg: &ServoConfig,
) -> Result<(Vec<f64>, JointConfig)> {
    chain.check_len(q)?;
    let (_, qdot) = command(chain, &q.0, goal, cfg);
    let next =
        q.0.iter()
            .zip(qdot.iter())
            .map(|(a, v)| a + v * cfg.dt)
            .collect();
    Ok((qdot.as_slice().to_vec(), JointConfig(next)))
}

/// Servo toward `goal` until success, a failure condition, or the step
/// budget. After each step the checks run in this order: joint limits,
/// velocity limits (on the raw command), collision, tolerance.
pub fn simulate_approach(
    world: &CollisionWorld,
    chain: &KinematicChain,
    q_start: &JointConfig,
    goal: &Pose,
    cfg: &ServoConfig,
) -> Result<ExecutionOutcome> {
    chain.check_len(q_start)?;
    cfg.validate()?;
    let joints = chain.joints();
    let mut q = q_start.clone();
    let mut log = Vec::new();
    let (mut e, mut qdot) = command(chain, &q.0, goal, cfg);
    let finish = |status, e: &Vector6<f64>, log: Vec<StepLog>, contact, joint| ExecutionOutcome {
        status,
        steps: log.len(),
        error_t: e.fixed_rows::<3>(0).norm(),
        error_r: e.fixed_rows::<3>(3).norm(),
        contact,
        joint,
        log,
    };
    if cfg.within_tol(&e) {
        return Ok(finish(ExecutionStatus::Success, &e, log, None, None));
    }
    for _ in 0..cfg.max_steps {
        for (qi, v) in q.0.iter_mut().zip(qdot.iter()) {
            *qi += v * cfg.dt;
        }
        let (e_next, qdot_next) = command(chain, &q.0, goal, cfg);
        log.push(StepLog {
            q: q.0.clone(),
            qdot: qdot.as_slice().to_vec(),
            error: e_next.into(),
        });
        e = e_next;
        if let Some(j) =
            q.0.iter()
                .zip(joints)
                .position(|(v, jt)| *v <= jt.lower || *v >= jt.upper)
        {
            return Ok(finish(ExecutionStatus::JointLimit, &e, log, None, Some(j)));
        }
        if let Some(j) = qdot
            .iter()
            .zip(joints)
            .position(|(v, jt)| v.abs() >= jt.velocity_limit)
        {
            return Ok(finish(
                ExecutionStatus::VelocityLimit,
                &e,
                log,
                None,
                Some(j),
            ));
        }
        if let Some(c) = world.config_in_collision(chain, &q) {
            return Ok(finish(
                ExecutionStatus::Collision,
                &e,
                log,
                Some(c.into()),
                None,
            ));
        }
        if cfg.within_tol(&e) {
            return Ok(finish(ExecutionStatus::Success, &e, log, None, None));
        }
        qdot = qdot_next;
    }
    Ok(finish(ExecutionStatus::NotConverged, &e, log, None, None))
}
