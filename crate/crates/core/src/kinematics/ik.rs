//! Damped-least-squares inverse kinematics with random restarts.
//!
//! [`ik_single`] behaves like a conventional numerical solver: one answer per
//! call, starting from the caller's seed configuration. [`ik_diverse_set`]
//! starts every attempt from an independent uniform draw inside the joint
//! limits and keeps every converged result, which spreads solutions across
//! the self-motion manifold of a redundant arm.

use nalgebra::{DVector, Matrix6, Vector6};

use super::{JointConfig, KinematicChain};
use crate::geometry::{pose_error, Pose};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct IkParams {
    /// Position tolerance (m).
    pub tol_t: f64,
    /// Orientation tolerance (rad).
    pub tol_r: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Largest per-iteration joint change (rad).
    pub step_clamp: f64,
    /// Extra random starts tried by [`ik_single`] after the seed fails.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            tol_t: 1e-3,
            tol_r: 1e-2,
            max_iters: 150,
            damping: 0.05,
            step_clamp: 0.2,
            restarts: 10,
            seed: 0,
        }
    }
}

/// Converged solutions for one target pose.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IkSet {
    pub solutions: Vec<JointConfig>,
    /// Restarts attempted.
    pub attempts: usize,
}

impl IkSet {
    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    /// `(i, j, L-infinity distance)` for every pair `i < j`.
    pub fn pairwise_linf(&self) -> Vec<(usize, usize, f64)> {
        let s = &self.solutions;
        let mut out = Vec::with_capacity(s.len() * s.len().saturating_sub(1) / 2);
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                out.push((i, j, s[i].linf_distance(&s[j])));
            }
        }
        out
    }
}

fn within_tol(err: &Vector6<f64>, p: &IkParams) -> bool {
    err.fixed_rows::<3>(0).norm() <= p.tol_t && err.fixed_rows::<3>(3).norm() <= p.tol_r
}

fn unreachable(chain: &KinematicChain, target: &Pose, p: &IkParams) -> bool {
    (target.translation - chain.shoulder()).norm() > chain.reach_bound() + p.tol_t
}

/// One DLS descent from `q`. Returns the final configuration when it meets
/// the tolerances.
fn descend(
    chain: &KinematicChain,
    target: &Pose,
    mut q: DVector<f64>,
    p: &IkParams,
) -> Option<JointConfig> {
    let lambda2 = p.damping * p.damping;
    let mut checkpoint = f64::INFINITY;
    for iter in 0..=p.max_iters {
        let (jac, ee) = chain.jacobian_and_pose(q.as_slice());
        let err = pose_error(&Pose::from_isometry(&ee), target);
        if within_tol(&err, p) {
            return Some(JointConfig(q.as_slice().to_vec()));
        }
        if iter == p.max_iters {
            break;
        }
        // give up on descents that have stopped making progress
        if iter % 25 == 0 {
            let e = err.norm();
            if e > 0.95 * checkpoint {
                break;
            }
            checkpoint = e;
        }
        let jjt: Matrix6<f64> = &jac * jac.transpose() + Matrix6::identity() * lambda2;
        let y = jjt.cholesky()?.solve(&err);
        let mut dq = jac.tr_mul(&y);
        let peak = dq.amax();
        if peak > p.step_clamp {
            dq *= p.step_clamp / peak;
        }
        q += dq;
        chain.clamp(q.as_mut_slice());
    }
    None
}

/// Single solution, starting from `q_init` and falling back to
/// `params.restarts` random starts. `None` when nothing converges.
pub fn ik_single(
    chain: &KinematicChain,
    target: &Pose,
    q_init: &JointConfig,
    params: &IkParams,
) -> Option<JointConfig> {
    if q_init.len() != chain.dof() || unreachable(chain, target, params) {
        return None;
    }
    let mut start = q_init.0.clone();
    chain.clamp(&mut start);
    if let Some(q) = descend(chain, target, DVector::from_vec(start), params) {
        return Some(q);
    }
    (0..params.restarts).find_map(|k| {
        let mut r = rng::stream(params.seed, &[rng::name_key("ik_single"), k as u64]);
        let q0 = chain.random_config(&mut r);
        descend(chain, target, DVector::from_vec(q0.0), params)
    })
}

/// Up to `count` solutions from independent uniform starts. Near-duplicates
/// (within 1e-3 rad in every joint) are dropped. Attempt `k` uses a stream
/// keyed by `(seed, k)`, so the set is reproducible.
pub fn ik_diverse_set(
    chain: &KinematicChain,
    target: &Pose,
    count: usize,
    seed: u64,
    params: &IkParams,
) -> IkSet {
    let mut set = IkSet::default();
    if unreachable(chain, target, params) {
        return set;
    }
    for k in 0..count {
        set.attempts += 1;
        let mut r = rng::stream(seed, &[rng::name_key("ik_diverse"), k as u64]);
        let q0 = chain.random_config(&mut r);
        if let Some(q) = descend(chain, target, DVector::from_vec(q0.0), params) {
            if set.solutions.iter().all(|s| s.linf_distance(&q) > 1e-3) {
                set.solutions.push(q);
            }
        }
    }
    set
}
