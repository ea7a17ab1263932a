//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{UnitQuaternion, Vector6};
use prunekit::collision::CollisionWorld;
use prunekit::kinematics::default_chain;
use prunekit::treemodel::{Cut, Vertex};
use prunekit::{Capsule, JointConfig, KinematicChain, Label, Pose, TreeGraph, Vec3};
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn rand_vec<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

/// Random rooted tree: vertex `i > 0` hangs off a uniformly chosen earlier
/// vertex. Vertex ids are shuffled so the root is not always 0.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, p_remove: f64) -> TreeGraph {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let mut vertices = vec![Vertex::new(Vec3::zeros(), 0.01, Label::Keep); n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let label = if rng.gen_bool(p_remove) {
            Label::Remove
        } else {
            Label::Keep
        };
        vertices[perm[i]] = Vertex::new(rand_vec(rng, 1.0), rng.gen_range(0.005..0.05), label);
        if i > 0 {
            edges.push((perm[rng.gen_range(0..i)], perm[i]));
        }
    }
    TreeGraph::new(vertices, edges, perm[0]).expect("random tree is valid")
}

/// Every edge with a kept parent and a removed child, as a cut.
pub fn edge_scan_cuts(g: &TreeGraph) -> Vec<Cut> {
    let vs = g.vertices();
    let mut out: Vec<Cut> = g
        .edges()
        .iter()
        .filter(|&&(p, c)| g.label(p) == Label::Keep && g.label(c) == Label::Remove)
        .map(|&(p, c)| Cut {
            position: vs[c].position,
            direction: vs[c].position - vs[p].position,
            vertex: Some(c),
            parent: Some(p),
        })
        .collect();
    sort_cuts(&mut out);
    out
}

pub fn sort_cuts(cuts: &mut [Cut]) {
    cuts.sort_by_key(|c| (c.parent, c.vertex));
}

/// Point-to-segment distance by projection.
fn point_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = if l2 > 0.0 {
        ((p - a).dot(&d) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d * t)).norm()
}

/// Capsule distance by golden-section search along the first segment. The
/// point-to-segment distance is convex in the segment parameter, so the
/// search converges to the true minimum.
pub fn sampled_capsule_distance(x: &Capsule, y: &Capsule) -> f64 {
    let f = |s: f64| point_segment(&(x.a + (x.b - x.a) * s), &y.a, &y.b);
    // coarse scan first, then refine around the best sample
    let n = 64;
    let best = (0..=n)
        .map(|i| i as f64 / n as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut lo, mut hi) = (
        (best - 1.0 / n as f64).max(0.0),
        (best + 1.0 / n as f64).min(1.0),
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let d = f(0.0).min(f(1.0)).min(f((lo + hi) / 2.0));
    d - x.radius - y.radius
}

/// Pose `start` moved by the six-vector `d` (translation, world rotation vector).
pub fn displaced(start: &Pose, d: &Vector6<f64>) -> Pose {
    let dt = Vec3::new(d[0], d[1], d[2]);
    let dr = UnitQuaternion::from_scaled_axis(Vec3::new(d[3], d[4], d[5]));
    Pose::new(start.translation + dt, dr * start.rotation)
}

/// Goal 12 cm straight ahead of the tool at `q`.
pub fn straight_ahead(chain: &KinematicChain, q: &JointConfig, dist: f64) -> Pose {
    let start = chain.forward_kinematics(q).unwrap();
    Pose::new(
        start.translation + start.rotation * Vec3::z() * dist,
        start.rotation,
    )
}

/// A bar across the tool path 5 cm in front of the tool center point.
pub fn collision_fixture() -> (KinematicChain, JointConfig, Pose, CollisionWorld) {
    let chain = default_chain();
    let q = chain.home();
    let start = chain.forward_kinematics(&q).unwrap();
    let fwd = start.rotation * Vec3::z();
    let side = start.rotation * Vec3::x();
    let centre = start.translation + fwd * 0.05;
    let bar = Capsule::new(centre - side * 0.1, centre + side * 0.1, 0.01);
    let goal = straight_ahead(&chain, &q, 0.12);
    (chain, q, goal, CollisionWorld::new(vec![bar]))
}

/// Elbow stretched to its limit, which leaves one weak task direction, and a
/// goal displaced along it. The displacement sign is picked so the
/// resulting motion folds the elbow away from its limit.
pub fn near_singular_fixture() -> (KinematicChain, JointConfig, Pose) {
    let chain = default_chain();
    let mut q = chain.home();
    q.0[1] = 0.0;
    q.0[3] = chain.joints()[3].upper;
    q.0[5] = std::f64::consts::FRAC_PI_2;
    let jac = chain.jacobian(&q).unwrap();
    let svd = jac.svd(true, true);
    let k = svd.singular_values.imin();
    let u: Vector6<f64> = svd.u.unwrap().column(k).into_owned();
    let v_t = svd.v_t.unwrap();
    let sign = if v_t[(k, 3)] < 0.0 { 1.0 } else { -1.0 };
    let start = chain.forward_kinematics(&q).unwrap();
    (chain, q.clone(), displaced(&start, &(u * (0.1 * sign))))
}

/// Last joint 0.05 rad below its upper limit with a goal 0.3 rad past it.
pub fn joint_limit_fixture() -> (KinematicChain, JointConfig, Pose) {
    let chain = default_chain();
    let n = chain.dof();
    let upper = chain.joints()[n - 1].upper;
    let mut q = chain.home();
    q.0[n - 1] = upper - 0.05;
    let mut beyond = q.clone();
    beyond.0[n - 1] = upper + 0.25;
    let goal = chain.forward_kinematics(&beyond).unwrap();
    (chain, q, goal)
}

/// A bare trial record with the given outcome.
pub fn trial(
    method: prunekit::harness::PlannerClass,
    k: usize,
    outcome: prunekit::harness::Outcome,
) -> prunekit::harness::TrialRecord {
    use prunekit::controller::ExecutionStatus as E;
    use prunekit::harness::Outcome as O;
    use prunekit::planner::PlanStatus;
    let (planning_status, execution_status) = match outcome {
        O::PlanningFailure => (PlanStatus::NoCandidate, None),
        O::Success => (PlanStatus::Planned, Some(E::Success)),
        O::JointLimit => (PlanStatus::Planned, Some(E::JointLimit)),
        O::VelocityLimit => (PlanStatus::Planned, Some(E::VelocityLimit)),
        O::Collision => (PlanStatus::Planned, Some(E::Collision)),
        O::NotConverged => (PlanStatus::Planned, Some(E::NotConverged)),
    };
    prunekit::harness::TrialRecord {
        tree: format!("tree_{:02}", k / 32),
        base_index: (k / 4) % 8,
        cut_index: k % 4,
        method,
        planning_status,
        execution_status,
        outcome,
        theta_index: None,
        servo_steps: None,
        final_error_t: None,
        final_error_r: None,
        diagnostic: None,
        planning_time: 0.01 * (k % 7) as f64,
    }
}

/// 94 cuts: 25 planning failures, then 3 joint-limit, 1 velocity-limit and
/// 15 collision failures among the 69 planned, 50 successes.
pub fn field_trial_fixture() -> Vec<prunekit::harness::TrialRecord> {
    use prunekit::harness::{Outcome as O, PlannerClass};
    let counts = [
        (O::PlanningFailure, 25),
        (O::JointLimit, 3),
        (O::VelocityLimit, 1),
        (O::Collision, 15),
        (O::Success, 50),
    ];
    counts
        .iter()
        .flat_map(|&(o, n)| std::iter::repeat_n(o, n))
        .enumerate()
        .map(|(k, o)| trial(PlannerClass::Holistic, k, o))
        .collect()
}
