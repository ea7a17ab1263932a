//! Bidirectional RRT with greedy connect and shortcut smoothing.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionWorld;
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicChain};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtParams {
    /// Largest tree extension, L2 in joint space (rad).
    pub step: f64,
    /// Edge validation spacing, L-infinity (rad).
    pub resolution: f64,
    /// Probability of sampling the other tree's root.
    pub goal_bias: f64,
    /// Sampling iterations before giving up.
    pub max_iterations: usize,
    pub shortcut_passes: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            step: 0.25,
            resolution: 0.02,
            goal_bias: 0.05,
            max_iterations: 4000,
            shortcut_passes: 50,
        }
    }
}

/// Piecewise-linear joint path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<JointConfig>,
    /// Spacing the segments were validated at (rad).
    pub resolution: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Joint-space L2 length.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].l2_distance(&w[1]))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RrtFailure {
    /// Wall-clock deadline passed.
    Timeout { elapsed: f64 },
    /// Iteration budget used without connecting the trees.
    Exhausted { iterations: usize },
}

struct Tree {
    nodes: Vec<Vec<f64>>,
    parent: Vec<usize>,
}

impl Tree {
    fn new(root: Vec<f64>) -> Self {
        Tree {
            nodes: vec![root],
            parent: vec![usize::MAX],
        }
    }

    fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d: f64 = n.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn push(&mut self, q: Vec<f64>, parent: usize) -> usize {
        self.nodes.push(q);
        self.parent.push(parent);
        self.nodes.len() - 1
    }

    /// Root-to-node path.
    fn path_to(&self, mut i: usize) -> Vec<Vec<f64>> {
        let mut out = vec![self.nodes[i].clone()];
        while self.parent[i] != usize::MAX {
            i = self.parent[i];
            out.push(self.nodes[i].clone());
        }
        out.reverse();
        out
    }
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

struct Ctx<'a> {
    world: &'a CollisionWorld,
    chain: &'a KinematicChain,
    params: &'a RrtParams,
}

impl Ctx<'_> {
    fn valid(&self, a: &[f64], b: &[f64]) -> bool {
        self.world.edge_valid(
            self.chain,
            &JointConfig(a.to_vec()),
            &JointConfig(b.to_vec()),
            self.params.resolution,
        )
    }

    fn extend(&self, tree: &mut Tree, target: &[f64]) -> Extend {
        let near = tree.nearest(target);
        let from = &tree.nodes[near];
        let d: f64 = from
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let reached = d <= self.params.step;
        let new: Vec<f64> = if reached {
            target.to_vec()
        } else {
            let s = self.params.step / d;
            from.iter()
                .zip(target)
                .map(|(a, b)| a + (b - a) * s)
                .collect()
        };
        if !self.valid(from, &new) {
            return Extend::Trapped;
        }
        let id = tree.push(new, near);
        if reached {
            Extend::Reached(id)
        } else {
            Extend::Advanced(id)
        }
    }

    fn connect(&self, tree: &mut Tree, target: &[f64]) -> Extend {
        loop {
            match self.extend(tree, target) {
                Extend::Advanced(_) => continue,
                other => return other,
            }
        }
    }
}

fn check_endpoint(
    world: &CollisionWorld,
    chain: &KinematicChain,
    q: &JointConfig,
    what: &str,
) -> Result<()> {
    chain.check_len(q)?;
    if !chain.within_limits(&q.0) {
        return Err(Error::invalid(format!(
            "{what} configuration violates joint limits"
        )));
    }
    if world.in_collision(chain, q) {
        return Err(Error::invalid(format!(
            "{what} configuration is in collision"
        )));
    }
    Ok(())
}

/// Plan a collision-free path from `start` to `goal`.
///
/// The outer `Result` reports invalid endpoints; the inner one reports
/// search failure. The returned path starts and ends exactly at the
/// endpoints, and every segment passes [`CollisionWorld::edge_valid`] at
/// `params.resolution`.
pub fn rrt_connect(
    world: &CollisionWorld,
    chain: &KinematicChain,
    start: &JointConfig,
    goal: &JointConfig,
    params: &RrtParams,
    deadline: Option<Instant>,
    seed: u64,
) -> Result<std::result::Result<Trajectory, RrtFailure>> {
    if !(params.step > 0.0 && params.resolution > 0.0) {
        return Err(Error::invalid("rrt step and resolution must be positive"));
    }
    check_endpoint(world, chain, start, "start")?;
    check_endpoint(world, chain, goal, "goal")?;
    let t0 = Instant::now();
    let done = |waypoints: Vec<Vec<f64>>| {
        Ok(Ok(Trajectory {
            waypoints: waypoints.into_iter().map(JointConfig).collect(),
            resolution: params.resolution,
        }))
    };
    if start == goal {
        return done(vec![start.0.clone()]);
    }
    let ctx = Ctx {
        world,
        chain,
        params,
    };
    if ctx.valid(&start.0, &goal.0) {
        return done(vec![start.0.clone(), goal.0.clone()]);
    }
    let mut rng = rng::stream(seed, &[rng::name_key("rrt_connect")]);
    let mut a = Tree::new(start.0.clone());
    let mut b = Tree::new(goal.0.clone());
    let mut a_is_start = true;
    for _ in 0..params.max_iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(Err(RrtFailure::Timeout {
                elapsed: t0.elapsed().as_secs_f64(),
            }));
        }
        let sample = if rng.gen_bool(params.goal_bias) {
            b.nodes[0].clone()
        } else {
            chain.random_config(&mut rng).0
        };
        let new = match ctx.extend(&mut a, &sample) {
            Extend::Trapped => None,
            Extend::Reached(i) | Extend::Advanced(i) => Some(i),
        };
        if let Some(i) = new {
            let target = a.nodes[i].clone();
            if let Extend::Reached(j) = ctx.connect(&mut b, &target) {
                let mut path = a.path_to(i);
                let mut back = b.path_to(j);
                back.pop(); // same state as the end of `path`
                back.reverse();
                path.extend(back);
                if !a_is_start {
                    path.reverse();
                }
                shortcut(&ctx, &mut path, &mut rng);
                return done(path);
            }
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    Ok(Err(RrtFailure::Exhausted {
        iterations: params.max_iterations,
    }))
}

fn shortcut(ctx: &Ctx, path: &mut Vec<Vec<f64>>, rng: &mut ChaCha8Rng) {
    for _ in 0..ctx.params.shortcut_passes {
        if path.len() < 3 {
            return;
        }
        let i = rng.gen_range(0..path.len() - 2);
        let j = rng.gen_range(i + 2..path.len());
        if ctx.valid(&path[i], &path[j]) {
            path.drain(i + 1..j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::default_chain;

    #[test]
    fn same_endpoints_single_waypoint() {
        let c = default_chain();
        let q = c.home();
        let t = rrt_connect(
            &CollisionWorld::empty(),
            &c,
            &q,
            &q,
            &RrtParams::default(),
            None,
            0,
        )
        .unwrap()
        .unwrap();
        assert_eq!(t.waypoints, vec![q]);
    }

    #[test]
    fn empty_world_is_straight() {
        let c = default_chain();
        let t = rrt_connect(
            &CollisionWorld::empty(),
            &c,
            &c.home(),
            &c.midpoint(),
            &RrtParams::default(),
            None,
            0,
        )
        .unwrap()
        .unwrap();
        assert_eq!(t.waypoints, vec![c.home(), c.midpoint()]);
    }

    #[test]
    fn colliding_endpoint_is_input_error() {
        let c = default_chain();
        let q = c.home();
        let p = c.forward_kinematics(&q).unwrap().translation;
        let w = CollisionWorld::new(vec![crate::Capsule::new(p, p, 0.1)]);
        assert!(rrt_connect(&w, &c, &q, &c.midpoint(), &RrtParams::default(), None, 0).is_err());
    }
}
