//! Benchmark sweeps: every cut of every tree, from eight base poses, under
//! each planner class.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionWorld;
use crate::controller::{simulate_approach, ExecutionStatus, ServoConfig};
use crate::error::{Error, Result};
use crate::geometry::{Capsule, Pose, Vec3};
use crate::kinematics::{default_chain, read_chain, KinematicChain};
use crate::planner::{
    cut_request, plan_with, servo_world, PlanRequest, PlanResult, PlanSettings, PlanStatus,
    PlannerConfig, Strategy,
};
use crate::rng;
use crate::treemodel::{
    build_collision_primitives, generate_cuts, read_skeleton, Aabb, Cut, TreeGraph,
};

pub use report::{
    aggregate, emit_report, parse_report, ExperimentReport, FailureHistogram, MethodSummary,
    Outcome, ReportFiles, TrialRecord,
};

/// Default base standoff as a fraction of the largest tree box dimension.
pub const DEFAULT_STANDOFF: f64 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerClass {
    Elementary,
    TwoStage,
    Holistic,
    AblationNoPosegen,
    AblationSingleIk,
}

impl PlannerClass {
    pub const ALL: [PlannerClass; 5] = [
        PlannerClass::Elementary,
        PlannerClass::TwoStage,
        PlannerClass::Holistic,
        PlannerClass::AblationNoPosegen,
        PlannerClass::AblationSingleIk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerClass::Elementary => "elementary",
            PlannerClass::TwoStage => "two_stage",
            PlannerClass::Holistic => "holistic",
            PlannerClass::AblationNoPosegen => "ablation_no_posegen",
            PlannerClass::AblationSingleIk => "ablation_single_ik",
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            PlannerClass::Elementary => Strategy::elementary(),
            PlannerClass::TwoStage => Strategy::two_stage(),
            PlannerClass::Holistic => Strategy::holistic(),
            PlannerClass::AblationNoPosegen => Strategy::no_posegen(),
            PlannerClass::AblationSingleIk => Strategy::single_ik(),
        }
    }

    /// Whether a servoed second stage follows the planned motion.
    pub fn servoes(self) -> bool {
        self != PlannerClass::Elementary
    }
}

impl fmt::Display for PlannerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown planner class '{s}'")))
    }
}

/// Eight base transforms around the box: four face midpoints (+x, +y, -x,
/// -y), then four corners (++, -+, --, +-), each `standoff * max extent`
/// outside the box faces, at mid-box height, with +X facing the box center.
pub fn base_pose_grid_for(bounds: &Aabb, standoff: f64) -> Result<Vec<Isometry3<f64>>> {
    let ext = bounds.extent();
    let size = ext.max();
    if !(size > 0.0) || !size.is_finite() {
        return Err(Error::invalid("tree has zero extent"));
    }
    if !(standoff > 0.0) {
        return Err(Error::invalid("standoff must be positive"));
    }
    let c = bounds.center();
    let s = standoff * size;
    let (hx, hy) = (ext.x / 2.0 + s, ext.y / 2.0 + s);
    let offsets = [
        (hx, 0.0),
        (0.0, hy),
        (-hx, 0.0),
        (0.0, -hy),
        (hx, hy),
        (-hx, hy),
        (-hx, -hy),
        (hx, -hy),
    ];
    Ok(offsets
        .iter()
        .map(|&(dx, dy)| {
            let p = Vec3::new(c.x + dx, c.y + dy, c.z);
            let yaw = (-dy).atan2(-dx);
            Isometry3::from_parts(
                Translation3::from(p),
                UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
            )
        })
        .collect())
}

pub fn base_pose_grid(tree: &TreeGraph) -> Result<Vec<Isometry3<f64>>> {
    base_pose_grid_for(&tree.bounds(), DEFAULT_STANDOFF)
}

/// One structured document tying a skeleton to its surroundings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Skeleton file, relative to the scene file.
    pub skeleton: PathBuf,
    /// Chain config; the built-in chain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    /// Robot base in the world frame.
    #[serde(default = "Pose::identity")]
    pub base: Pose,
    /// Extra static capsules besides the tree's own.
    #[serde(default)]
    pub obstacles: Vec<Capsule>,
    #[serde(default)]
    pub margin: f64,
}

impl Scene {
    pub fn read(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scene: Scene =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        scene.skeleton = dir.join(&scene.skeleton);
        scene.chain = scene.chain.map(|c| dir.join(c));
        Ok(scene)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// Skeleton, chain placed at the base, and collision world.
    pub fn load(&self) -> Result<(TreeGraph, KinematicChain, CollisionWorld)> {
        let graph = read_skeleton(&self.skeleton)?;
        let chain = load_chain(self.chain.as_deref())?.with_base(self.base.to_isometry());
        let world = tree_world(&graph, &self.obstacles, self.margin);
        Ok((graph, chain, world))
    }
}

pub fn load_chain(path: Option<&Path>) -> Result<KinematicChain> {
    match path {
        Some(p) => read_chain(p),
        None => Ok(default_chain()),
    }
}

/// Tree capsules in edge order, followed by `obstacles`.
pub fn tree_world(graph: &TreeGraph, obstacles: &[Capsule], margin: f64) -> CollisionWorld {
    let mut statics = build_collision_primitives(graph).capsules;
    statics.extend_from_slice(obstacles);
    CollisionWorld::with_margin(statics, margin)
}

/// One planner class on one tree from one base pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tree: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    pub base_index: usize,
    pub base: Pose,
    pub method: PlannerClass,
    pub seed: u64,
    pub timeout: f64,
}

/// Skeleton loaded and prepared once per tree.
#[derive(Clone, Debug)]
pub struct TreeCase {
    pub name: String,
    pub graph: TreeGraph,
    pub cuts: Vec<Cut>,
    pub world: CollisionWorld,
}

impl TreeCase {
    pub fn new(name: impl Into<String>, graph: TreeGraph) -> Self {
        let cuts = generate_cuts(&graph).cuts;
        let world = tree_world(&graph, &[], 0.0);
        TreeCase {
            name: name.into(),
            graph,
            cuts,
            world,
        }
    }

    /// Same tree with no obstacles at all.
    pub fn open(mut self) -> Self {
        self.world = CollisionWorld::empty();
        self
    }
}

/// Every `*.json` skeleton in `dir`, sorted by file name.
pub fn load_tree_dir(dir: &Path) -> Result<Vec<TreeCase>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "no skeleton files in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Ok(TreeCase::new(name, read_skeleton(p)?))
        })
        .collect()
}

/// Sweep knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub methods: Vec<PlannerClass>,
    pub settings: PlanSettings,
    pub planner: PlannerConfig,
    pub servo: ServoConfig,
    pub standoff: f64,
    /// Run trials on the rayon pool.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: PlannerClass::ALL.to_vec(),
            settings: PlanSettings::default(),
            planner: PlannerConfig::default(),
            servo: ServoConfig::default(),
            standoff: DEFAULT_STANDOFF,
            parallel: true,
        }
    }
}

/// Seed shared by every method for one (tree, base, cut) triple.
pub fn trial_seed(seed: u64, tree: &str, base: usize, cut: usize) -> u64 {
    rng::derive_seed(seed, &[rng::name_key(tree), base as u64, cut as u64])
}

/// The request a trial issues: start at the chain's home configuration,
/// paired seed, distal branch capsules exempt for the tool.
pub fn trial_request(
    case: &TreeCase,
    chain: &KinematicChain,
    base_index: usize,
    cut_index: usize,
    settings: &PlanSettings,
) -> PlanRequest {
    let cut = &case.cuts[cut_index];
    let mut request = cut_request(Some(&case.graph), cut, &chain.home(), settings, 0);
    request.settings.seed = trial_seed(settings.seed, &case.name, base_index, cut_index);
    request
}

/// Plan one cut and, for classes with a servo stage, simulate it.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    case: &TreeCase,
    chain: &KinematicChain,
    base_index: usize,
    cut_index: usize,
    method: PlannerClass,
    settings: &PlanSettings,
    planner: &PlannerConfig,
    servo: &ServoConfig,
) -> Result<(TrialRecord, PlanResult)> {
    let request = trial_request(case, chain, base_index, cut_index, settings);
    let plan = plan_with(&case.world, chain, &request, &method.strategy(), planner)?;
    let execution = match (&plan.status, method.servoes()) {
        (PlanStatus::Planned, true) => {
            let world = servo_world(
                &case.world,
                chain,
                planner.tool_link,
                &request.exempt_statics,
            );
            let q = plan
                .q_star
                .as_ref()
                .expect("planned result has a goal configuration");
            let goal = plan
                .cutting_pose
                .expect("planned result has a cutting pose");
            Some(simulate_approach(&world, chain, q, &goal, servo)?)
        }
        _ => None,
    };
    let record = TrialRecord::new(
        &case.name,
        base_index,
        cut_index,
        method,
        &plan,
        execution.as_ref(),
    );
    Ok((record, plan))
}

/// Trials for one scenario: every cut of its tree.
pub fn run_scenario(s: &Scenario, config: &BenchConfig) -> Result<Vec<TrialRecord>> {
    let graph = read_skeleton(&s.tree)?;
    let name = s
        .tree
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let case = TreeCase::new(name, graph);
    let chain = load_chain(s.chain.as_deref())?.with_base(s.base.to_isometry());
    let settings = PlanSettings {
        timeout: s.timeout,
        seed: s.seed,
        ..config.settings.clone()
    };
    (0..case.cuts.len())
        .map(|k| {
            run_trial(
                &case,
                &chain,
                s.base_index,
                k,
                s.method,
                &settings,
                &config.planner,
                &config.servo,
            )
            .map(|r| r.0)
        })
        .collect()
}

/// Full sweep over trees, base poses, cuts and methods.
pub fn run_bench(
    cases: &[TreeCase],
    chain: &KinematicChain,
    config: &BenchConfig,
) -> Result<ExperimentReport> {
    if config.methods.is_empty() {
        return Err(Error::invalid("no planner classes selected"));
    }
    let mut jobs = Vec::new();
    let mut chains: BTreeMap<(usize, usize), KinematicChain> = BTreeMap::new();
    for (t, case) in cases.iter().enumerate() {
        for (b, base) in base_pose_grid_for(&case.graph.bounds(), config.standoff)?
            .into_iter()
            .enumerate()
        {
            chains.insert((t, b), chain.with_base(base));
            for k in 0..case.cuts.len() {
                for &m in &config.methods {
                    jobs.push((t, b, k, m));
                }
            }
        }
    }
    let run = |&(t, b, k, m): &(usize, usize, usize, PlannerClass)| {
        run_trial(
            &cases[t],
            &chains[&(t, b)],
            b,
            k,
            m,
            &config.settings,
            &config.planner,
            &config.servo,
        )
        .map(|r| r.0)
    };
    let trials: Result<Vec<TrialRecord>> = if config.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    Ok(aggregate(trials?))
}

/// Execution statuses mapped to report outcomes.
pub fn outcome_of(plan: &PlanResult, execution: Option<ExecutionStatus>) -> Outcome {
    if plan.status != PlanStatus::Planned {
        return Outcome::PlanningFailure;
    }
    match execution {
        None | Some(ExecutionStatus::Success) => Outcome::Success,
        Some(ExecutionStatus::JointLimit) => Outcome::JointLimit,
        Some(ExecutionStatus::VelocityLimit) => Outcome::VelocityLimit,
        Some(ExecutionStatus::Collision) => Outcome::Collision,
        Some(ExecutionStatus::NotConverged) => Outcome::NotConverged,
    }
}
