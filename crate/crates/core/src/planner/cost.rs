//! Candidate cost: collision term plus reciprocal manipulability.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionWorld;
use crate::kinematics::{manipulability_of, JointConfig, KinematicChain};

/// Manipulability below this counts as singular.
pub const SINGULARITY_EPS: f64 = 1e-8;
/// Joint cost reported for singular configurations.
pub const SINGULAR_JOINT_COST: f64 = 1.0 / SINGULARITY_EPS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionTerm {
    Zero,
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalCost {
    Feasible(f64),
    Infeasible,
}

impl TotalCost {
    pub fn value(self) -> Option<f64> {
        match self {
            TotalCost::Feasible(v) => Some(v),
            TotalCost::Infeasible => None,
        }
    }

    /// Feasible values ascending, infeasible last.
    pub fn cmp_total(&self, other: &Self) -> Ordering {
        match (self, other) {
            (TotalCost::Feasible(a), TotalCost::Feasible(b)) => a.total_cmp(b),
            (TotalCost::Feasible(_), TotalCost::Infeasible) => Ordering::Less,
            (TotalCost::Infeasible, TotalCost::Feasible(_)) => Ordering::Greater,
            (TotalCost::Infeasible, TotalCost::Infeasible) => Ordering::Equal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub collision: CollisionTerm,
    pub joint: f64,
    pub total: TotalCost,
}

impl CostBreakdown {
    pub fn new(collision: CollisionTerm, joint: f64) -> Self {
        let total = match collision {
            CollisionTerm::Zero => TotalCost::Feasible(joint),
            CollisionTerm::Infinite => TotalCost::Infeasible,
        };
        CostBreakdown {
            collision,
            joint,
            total,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.collision == CollisionTerm::Zero
    }
}

pub fn collision_cost(
    world: &CollisionWorld,
    chain: &KinematicChain,
    q: &JointConfig,
) -> CollisionTerm {
    if world.in_collision(chain, q) {
        CollisionTerm::Infinite
    } else {
        CollisionTerm::Zero
    }
}

/// Reciprocal manipulability, clamped at singular configurations.
pub fn joint_cost_from_manipulability(m: f64) -> f64 {
    if m < SINGULARITY_EPS {
        SINGULAR_JOINT_COST
    } else {
        1.0 / m
    }
}

pub fn joint_cost(chain: &KinematicChain, q: &JointConfig) -> f64 {
    joint_cost_from_manipulability(manipulability_of(&chain.jacobian_and_pose(&q.0).0))
}

pub fn cost(world: &CollisionWorld, chain: &KinematicChain, q: &JointConfig) -> CostBreakdown {
    CostBreakdown::new(collision_cost(world, chain, q), joint_cost(chain, q))
}
