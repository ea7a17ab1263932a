//! Holistic pose-motion planning for a single cut, and its baselines.
//!
//! A plan picks an angle around the cut and a joint configuration reaching
//! the approach pose at that angle, minimizing collision cost plus reciprocal
//! manipulability, then connects the start configuration to it with
//! RRT-Connect. The baselines differ only in which candidates they consider;
//! see [`Strategy`].

mod cost;
mod rrt;

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionWorld;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::kinematics::{ik_diverse_set, ik_single, IkParams, JointConfig, KinematicChain};
use crate::posegen::{
    facing_angle_index, paired_rings, uniform_angles, PoseRing, DEFAULT_ANGLE_COUNT,
    DEFAULT_APPROACH_RADIUS, DEFAULT_CUTTING_RADIUS,
};
use crate::rng;
use crate::treemodel::{Cut, TreeGraph};

pub use cost::{
    collision_cost, cost, joint_cost, joint_cost_from_manipulability, CollisionTerm, CostBreakdown,
    TotalCost, SINGULARITY_EPS, SINGULAR_JOINT_COST,
};
pub use rrt::{rrt_connect, RrtFailure, RrtParams, Trajectory};

/// Per-cut planning inputs shared by every cut of a tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanSettings {
    /// Approach ring radius (m).
    pub r_a: f64,
    /// Cutting ring radius (m).
    pub r_c: f64,
    /// Ring angles (rad), each in `[-pi, pi]`.
    pub angles: Vec<f64>,
    /// IK restarts per angle for diverse sets.
    pub ik_count: usize,
    /// Wall-clock budget for the whole plan (s).
    pub timeout: f64,
    pub seed: u64,
}

impl Default for PlanSettings {
    fn default() -> Self {
        PlanSettings {
            r_a: DEFAULT_APPROACH_RADIUS,
            r_c: DEFAULT_CUTTING_RADIUS,
            angles: uniform_angles(DEFAULT_ANGLE_COUNT),
            ik_count: 16,
            timeout: 30.0,
            seed: 0,
        }
    }
}

impl PlanSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_a >= self.r_c && self.r_c > 0.0) {
            return Err(Error::invalid("ring radii must satisfy r_a >= r_c > 0"));
        }
        if !(self.timeout > 0.0) {
            return Err(Error::invalid("timeout must be positive"));
        }
        if self.angles.is_empty() || self.ik_count == 0 {
            return Err(Error::invalid("need at least one angle and one IK attempt"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub cut: Cut,
    /// Start configuration.
    pub q0: JointConfig,
    #[serde(flatten)]
    pub settings: PlanSettings,
    /// Static capsules the tool may touch while advancing onto the cut.
    #[serde(default)]
    pub exempt_statics: Vec<usize>,
}

impl PlanRequest {
    pub fn new(cut: Cut, q0: JointConfig, settings: PlanSettings) -> Self {
        PlanRequest {
            cut,
            q0,
            settings,
            exempt_statics: Vec::new(),
        }
    }

    pub fn with_exempt(mut self, statics: Vec<usize>) -> Self {
        self.exempt_statics = statics;
        self
    }
}

/// Solver knobs not tied to a particular cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub rrt: RrtParams,
    pub ik_tol_t: f64,
    pub ik_tol_r: f64,
    pub ik_max_iters: usize,
    /// Extra random starts for single-solution IK.
    pub ik_restarts: usize,
    /// Screen candidates along the straight approach before accepting one.
    pub preview: bool,
    pub preview_steps: usize,
    /// Link carrying the tool; defaults to the last one.
    pub tool_link: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            rrt: RrtParams::default(),
            ik_tol_t: 1e-3,
            ik_tol_r: 1e-2,
            ik_max_iters: 150,
            ik_restarts: 10,
            preview: true,
            preview_steps: 10,
            tool_link: None,
        }
    }
}

impl PlannerConfig {
    fn ik_params(&self, seed: u64) -> IkParams {
        IkParams {
            tol_t: self.ik_tol_t,
            tol_r: self.ik_tol_r,
            max_iters: self.ik_max_iters,
            restarts: self.ik_restarts,
            seed,
            ..IkParams::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleSelection {
    /// Every ring angle.
    All,
    /// Only the angle whose approach point is nearest the robot shoulder.
    Facing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IkSelection {
    /// Diverse set from uniform restarts.
    Diverse,
    /// One solution seeded from the start configuration.
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalRing {
    Approach,
    Cutting,
}

/// Which candidates a planner class considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub angles: AngleSelection,
    pub ik: IkSelection,
    pub goal: GoalRing,
    pub preview: bool,
}

impl Strategy {
    pub fn holistic() -> Self {
        Strategy {
            angles: AngleSelection::All,
            ik: IkSelection::Diverse,
            goal: GoalRing::Approach,
            preview: true,
        }
    }

    pub fn no_posegen() -> Self {
        Strategy {
            angles: AngleSelection::Facing,
            ..Self::holistic()
        }
    }

    pub fn single_ik() -> Self {
        Strategy {
            ik: IkSelection::Single,
            ..Self::holistic()
        }
    }

    pub fn two_stage() -> Self {
        Strategy {
            angles: AngleSelection::Facing,
            ik: IkSelection::Single,
            goal: GoalRing::Approach,
            preview: false,
        }
    }

    pub fn elementary() -> Self {
        Strategy {
            goal: GoalRing::Cutting,
            ..Self::two_stage()
        }
    }
}

/// One scored IK solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub theta_index: usize,
    pub theta: f64,
    pub ik_index: usize,
    pub q: JointConfig,
    pub cost: CostBreakdown,
}

fn candidate_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.cost
        .total
        .cmp_total(&b.cost.total)
        .then(a.theta_index.cmp(&b.theta_index))
        .then(a.ik_index.cmp(&b.ik_index))
}

struct Evaluation {
    candidates: Vec<Candidate>,
    ik_calls: usize,
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    world: &CollisionWorld,
    chain: &KinematicChain,
    ring: &PoseRing,
    indices: &[usize],
    ik: IkSelection,
    q0: &JointConfig,
    ik_count: usize,
    seed: u64,
    cfg: &PlannerConfig,
    deadline: Option<Instant>,
) -> Option<Evaluation> {
    let per_angle: Vec<Option<(Vec<Candidate>, usize)>> = indices
        .par_iter()
        .map(|&i| {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return None;
            }
            let pose = &ring.poses[i];
            let s = rng::derive_seed(seed, &[i as u64]);
            let params = cfg.ik_params(s);
            let (solutions, calls) = match ik {
                IkSelection::Diverse => {
                    let set = ik_diverse_set(chain, pose, ik_count, s, &params);
                    (set.solutions, set.attempts)
                }
                IkSelection::Single => {
                    (ik_single(chain, pose, q0, &params).into_iter().collect(), 1)
                }
            };
            let scored = solutions
                .into_iter()
                .enumerate()
                .map(|(k, q)| Candidate {
                    theta_index: i,
                    theta: ring.angles[i],
                    ik_index: k,
                    cost: cost(world, chain, &q),
                    q,
                })
                .collect();
            Some((scored, calls))
        })
        .collect();
    let mut out = Evaluation {
        candidates: Vec::new(),
        ik_calls: 0,
    };
    for item in per_angle {
        let (c, n) = item?;
        out.candidates.extend(c);
        out.ik_calls += n;
    }
    out.candidates.sort_by(candidate_order);
    Some(out)
}

/// Score every IK solution of every approach-ring pose. Sorted by total
/// cost, then angle index, then IK index; infeasible candidates last.
pub fn evaluate_candidates(
    world: &CollisionWorld,
    chain: &KinematicChain,
    approach: &PoseRing,
    cutting: &PoseRing,
    ik_count: usize,
    seed: u64,
) -> Result<Vec<Candidate>> {
    if approach.angles != cutting.angles {
        return Err(Error::invalid(
            "approach and cutting rings must share angles",
        ));
    }
    let indices: Vec<usize> = (0..approach.len()).collect();
    let cfg = PlannerConfig::default();
    let q0 = chain.home();
    Ok(evaluate(
        world,
        chain,
        approach,
        &indices,
        IkSelection::Diverse,
        &q0,
        ik_count,
        seed,
        &cfg,
        None,
    )
    .expect("no deadline")
    .candidates)
}

/// World used while the tool advances onto the cut: identical to `world`
/// except that the tool link may touch `exempt`.
pub fn servo_world(
    world: &CollisionWorld,
    chain: &KinematicChain,
    tool_link: Option<usize>,
    exempt: &[usize],
) -> CollisionWorld {
    if exempt.is_empty() {
        return world.clone();
    }
    world.exempting(std::iter::once(tool_link.unwrap_or(chain.dof())), exempt)
}

/// Static capsule indices of the branch segments leaving the cut vertex,
/// assuming the world lists tree capsules first in edge order.
pub fn distal_statics(graph: &TreeGraph, cut: &Cut) -> Vec<usize> {
    cut.vertex
        .map(|v| graph.outgoing_edges(v))
        .unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Planned,
    NoCandidate,
    Timeout,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Planned => "planned",
            PlanStatus::NoCandidate => "no_candidate",
            PlanStatus::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub candidates_evaluated: usize,
    pub feasible_candidates: usize,
    pub ik_calls: usize,
    pub preview_rejections: usize,
    /// Wall time of the whole plan (s).
    pub planning_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Configuration the trajectory ends at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_star: Option<JointConfig>,
    pub goal: GoalRing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutting_pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBreakdown>,
    pub stats: PlanStats,
    /// Every scored candidate, in ranking order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
}

impl PlanResult {
    fn failed(status: PlanStatus, goal: GoalRing, why: impl Into<String>) -> Self {
        PlanResult {
            status,
            diagnostic: Some(why.into()),
            theta_index: None,
            theta: None,
            q_star: None,
            goal,
            approach_pose: None,
            cutting_pose: None,
            trajectory: None,
            cost: None,
            stats: PlanStats::default(),
            candidates: Vec::new(),
        }
    }

    pub fn is_planned(&self) -> bool {
        self.status == PlanStatus::Planned
    }

    /// Copy with the wall-clock figure zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.stats.planning_time = 0.0;
        r
    }
}

/// Configurations tracking the straight tool advance from `from` to `to`,
/// each solved locally from the previous one. `false` as soon as one fails to
/// converge, touches a joint limit, or collides.
fn preview_ok(
    world: &CollisionWorld,
    chain: &KinematicChain,
    q: &JointConfig,
    from: &Pose,
    to: &Pose,
    cfg: &PlannerConfig,
) -> bool {
    let params = IkParams {
        restarts: 0,
        ..cfg.ik_params(0)
    };
    let joints = chain.joints();
    let mut prev = q.clone();
    for k in 1..=cfg.preview_steps {
        let t = k as f64 / cfg.preview_steps as f64;
        let pose = Pose::new(
            from.translation + (to.translation - from.translation) * t,
            to.rotation,
        );
        let Some(next) = ik_single(chain, &pose, &prev, &params) else {
            return false;
        };
        if next
            .0
            .iter()
            .zip(joints)
            .any(|(v, j)| *v <= j.lower || *v >= j.upper)
            || world.in_collision(chain, &next)
        {
            return false;
        }
        prev = next;
    }
    true
}

/// Plan one cut with the holistic strategy and default solver settings.
pub fn holistic_plan(
    world: &CollisionWorld,
    chain: &KinematicChain,
    request: &PlanRequest,
) -> Result<PlanResult> {
    plan_with(
        world,
        chain,
        request,
        &Strategy::holistic(),
        &PlannerConfig::default(),
    )
}

/// Plan one cut under `strategy`.
///
/// Candidate evaluation may use at most half of the timeout; the whole call
/// reports [`PlanStatus::Timeout`] if it overruns the budget.
pub fn plan_with(
    world: &CollisionWorld,
    chain: &KinematicChain,
    request: &PlanRequest,
    strategy: &Strategy,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    let t0 = Instant::now();
    let st = &request.settings;
    st.validate()?;
    chain.check_len(&request.q0)?;
    let budget = Duration::from_secs_f64(st.timeout);
    let deadline = t0 + budget;
    let goal = strategy.goal;
    let finish = |mut r: PlanResult| {
        r.stats.planning_time = t0.elapsed().as_secs_f64();
        if r.stats.planning_time > st.timeout && r.status == PlanStatus::Planned {
            r.status = PlanStatus::Timeout;
            r.diagnostic = Some("plan completed after the time budget".into());
        }
        Ok(r)
    };

    let tool_world = servo_world(world, chain, cfg.tool_link, &request.exempt_statics);
    let target_world = match goal {
        GoalRing::Approach => world,
        GoalRing::Cutting => &tool_world,
    };
    if !chain.within_limits(&request.q0.0) || target_world.in_collision(chain, &request.q0) {
        return finish(PlanResult::failed(
            PlanStatus::NoCandidate,
            goal,
            "start configuration violates limits or collides",
        ));
    }

    let (approach, cutting) = paired_rings(&request.cut, st.r_a, st.r_c, &st.angles)?;
    let ring = match goal {
        GoalRing::Approach => &approach,
        GoalRing::Cutting => &cutting,
    };
    let indices: Vec<usize> = match strategy.angles {
        AngleSelection::All => (0..ring.len()).collect(),
        AngleSelection::Facing => {
            facing_angle_index(&request.cut, st.r_a, &st.angles, &chain.shoulder())?
                .into_iter()
                .collect()
        }
    };
    let eval_deadline = t0 + budget / 2;
    let Some(eval) = evaluate(
        target_world,
        chain,
        ring,
        &indices,
        strategy.ik,
        &request.q0,
        st.ik_count,
        st.seed,
        cfg,
        Some(eval_deadline),
    ) else {
        return finish(PlanResult::failed(
            PlanStatus::Timeout,
            goal,
            "candidate evaluation exceeded half of the time budget",
        ));
    };

    let mut result = PlanResult::failed(PlanStatus::NoCandidate, goal, "");
    result.stats.candidates_evaluated = eval.candidates.len();
    result.stats.ik_calls = eval.ik_calls;
    result.stats.feasible_candidates = eval
        .candidates
        .iter()
        .filter(|c| c.cost.is_feasible())
        .count();

    let mut selected = None;
    for (i, c) in eval.candidates.iter().enumerate() {
        if !c.cost.is_feasible() {
            break;
        }
        if strategy.preview && cfg.preview && goal == GoalRing::Approach {
            if Instant::now() >= deadline {
                result.status = PlanStatus::Timeout;
                result.diagnostic = Some("approach preview ran out of time".into());
                result.candidates = eval.candidates;
                return finish(result);
            }
            let a = &approach.poses[c.theta_index];
            let k = &cutting.poses[c.theta_index];
            if !preview_ok(&tool_world, chain, &c.q, a, k, cfg) {
                result.stats.preview_rejections += 1;
                continue;
            }
        }
        selected = Some(i);
        break;
    }
    let Some(sel) = selected else {
        result.diagnostic = Some(if eval.candidates.is_empty() {
            "no IK solution for any candidate pose".to_string()
        } else if result.stats.feasible_candidates == 0 {
            "every IK solution collides".to_string()
        } else {
            "approach preview rejected every feasible candidate".to_string()
        });
        result.candidates = eval.candidates;
        return finish(result);
    };

    let best = eval.candidates[sel].clone();
    result.theta_index = Some(best.theta_index);
    result.theta = Some(best.theta);
    result.q_star = Some(best.q.clone());
    result.cost = Some(best.cost);
    result.approach_pose = Some(approach.poses[best.theta_index]);
    result.cutting_pose = Some(cutting.poses[best.theta_index]);
    result.candidates = eval.candidates;

    let rrt_seed = rng::derive_seed(st.seed, &[rng::name_key("rrt")]);
    match rrt_connect(
        target_world,
        chain,
        &request.q0,
        &best.q,
        &cfg.rrt,
        Some(deadline),
        rrt_seed,
    )? {
        Ok(traj) => {
            result.status = PlanStatus::Planned;
            result.diagnostic = None;
            result.trajectory = Some(traj);
        }
        Err(RrtFailure::Timeout { .. }) => {
            result.status = PlanStatus::Timeout;
            result.diagnostic = Some("motion planning ran out of time".into());
        }
        Err(RrtFailure::Exhausted { iterations }) => {
            result.status = PlanStatus::Timeout;
            result.diagnostic = Some(format!(
                "motion planning found no path in {iterations} iterations"
            ));
        }
    }
    finish(result)
}

/// Plan every cut independently from `q0`. Cut `i` uses seed
/// `derive_seed(settings.seed, [i])`. With a graph, each cut's distal branch
/// capsules are exempt for the tool.
#[allow(clippy::too_many_arguments)]
pub fn plan_tree(
    world: &CollisionWorld,
    chain: &KinematicChain,
    graph: Option<&TreeGraph>,
    cuts: &[Cut],
    q0: &JointConfig,
    settings: &PlanSettings,
    strategy: &Strategy,
    cfg: &PlannerConfig,
) -> Result<Vec<PlanResult>> {
    if cuts.is_empty() {
        return Err(Error::invalid("no cuts to plan"));
    }
    cuts.iter()
        .enumerate()
        .map(|(i, cut)| {
            let request = cut_request(graph, cut, q0, settings, i);
            plan_with(world, chain, &request, strategy, cfg)
        })
        .collect()
}

/// The request [`plan_tree`] issues for cut `index`.
pub fn cut_request(
    graph: Option<&TreeGraph>,
    cut: &Cut,
    q0: &JointConfig,
    settings: &PlanSettings,
    index: usize,
) -> PlanRequest {
    let s = PlanSettings {
        seed: rng::derive_seed(settings.seed, &[index as u64]),
        ..settings.clone()
    };
    let exempt = graph.map(|g| distal_statics(g, cut)).unwrap_or_default();
    PlanRequest::new(*cut, q0.clone(), s).with_exempt(exempt)
}

/// A plan as written to disk: the request alongside its result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub chain: String,
    pub request: PlanRequest,
    pub strategy: Strategy,
    pub result: PlanResult,
}

pub fn write_plan(path: &Path, doc: &PlanDocument) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan(path: &Path) -> Result<PlanDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}
