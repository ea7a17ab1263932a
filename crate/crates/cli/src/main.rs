use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use prunekit::controller::{simulate_approach, ServoConfig};
use prunekit::harness::{
    base_pose_grid_for, emit_report, load_chain, load_tree_dir, run_bench, run_trial,
    trial_request, BenchConfig, PlannerClass, Scene, TreeCase, DEFAULT_STANDOFF,
};
use prunekit::planner::{servo_world, PlanDocument, PlanSettings, PlannerConfig};
use prunekit::posegen::{paired_rings, uniform_angles};
use prunekit::treemodel::{
    generate_cuts, read_cloud, read_skeleton, synth_tree, transfer_labels, write_cloud_ply,
    write_cuts, write_skeleton, SynthParams,
};
use prunekit::Pose;

#[derive(Parser)]
#[command(
    name = "prunekit",
    version,
    about = "Pruning-cut planning for redundant manipulators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract cuts from a skeleton, optionally relabeled from a cloud.
    Cuts {
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic labeled tree.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// JSON file with generator parameters; defaults otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Dump the approach and cutting rings of one cut.
    Rings {
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long, default_value_t = 0)]
        cut_index: usize,
        #[arg(long, default_value_t = 0.15)]
        r_a: f64,
        #[arg(long, default_value_t = 0.03)]
        r_c: f64,
        #[arg(long, default_value_t = 36)]
        angles: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan one cut.
    Plan(PlanArgs),
    /// Servo a stored plan onto its cut.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        /// Where to write the execution log; stdout summary only otherwise.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Sweep trees, base poses and planner classes.
    Bench {
        #[arg(long)]
        trees: PathBuf,
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Planner class, or `all`.
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        ik_count: usize,
        /// Ignore tree collision geometry.
        #[arg(long)]
        open: bool,
        /// Run trials one at a time.
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// Skeleton file; the base pose then comes from the eight-pose grid.
    #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
    skeleton: Option<PathBuf>,
    /// Scene file with skeleton, chain, base and obstacles.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    chain: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    base_index: usize,
    #[arg(long, default_value_t = 0)]
    cut_index: usize,
    #[arg(long, default_value = "holistic")]
    method: String,
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    ik_count: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Plan file: the scene it was made in plus the plan itself.
#[derive(Serialize, Deserialize)]
struct PlanFile {
    scene: Scene,
    plan: PlanDocument,
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn cmd_cuts(skeleton: &Path, cloud: Option<&Path>, out: &Path) -> Result<()> {
    let mut graph = read_skeleton(skeleton)?;
    if let Some(c) = cloud {
        graph = transfer_labels(&read_cloud(c)?, &graph)?;
    }
    let report = generate_cuts(&graph);
    if !report.regrowth_edges.is_empty() {
        eprintln!(
            "warning: {} edge(s) go from a removed vertex back to a kept one; no cut emitted there",
            report.regrowth_edges.len()
        );
    }
    write_cuts(out, &report)?;
    println!("{} cut(s) written to {}", report.cuts.len(), out.display());
    Ok(())
}

fn cmd_synth(
    seed: u64,
    params: Option<&Path>,
    skeleton: &Path,
    cloud: Option<&Path>,
) -> Result<()> {
    let p: SynthParams = match params {
        Some(f) => serde_json::from_str(
            &std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?,
        )
        .with_context(|| format!("parsing {}", f.display()))?,
        None => SynthParams::default(),
    };
    let (graph, points) = synth_tree(seed, &p)?;
    write_skeleton(skeleton, &graph)?;
    if let Some(c) = cloud {
        write_cloud_ply(c, &points)?;
    }
    println!(
        "{} vertices, {} cuts",
        graph.vertices().len(),
        generate_cuts(&graph).cuts.len()
    );
    Ok(())
}

fn cmd_rings(
    skeleton: &Path,
    cut_index: usize,
    r_a: f64,
    r_c: f64,
    n: usize,
    out: &Path,
) -> Result<()> {
    let graph = read_skeleton(skeleton)?;
    let cuts = generate_cuts(&graph).cuts;
    let Some(cut) = cuts.get(cut_index) else {
        bail!("cut index {cut_index} out of range ({} cuts)", cuts.len());
    };
    let (approach, cutting) = paired_rings(cut, r_a, r_c, &uniform_angles(n))?;
    write_json(
        out,
        &serde_json::json!({ "approach": approach, "cutting": cutting }),
    )
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let method: PlannerClass = a.method.parse()?;
    let scene = match (&a.scene, &a.skeleton) {
        (Some(s), _) => Scene::read(s)?,
        (None, Some(sk)) => {
            let graph = read_skeleton(sk)?;
            let grid = base_pose_grid_for(&graph.bounds(), DEFAULT_STANDOFF)?;
            let Some(base) = grid.get(a.base_index) else {
                bail!("base index {} out of range (0..8)", a.base_index);
            };
            Scene {
                skeleton: absolute(sk)?,
                chain: a.chain.as_deref().map(absolute).transpose()?,
                base: Pose::from_isometry(base),
                obstacles: Vec::new(),
                margin: 0.0,
            }
        }
        (None, None) => bail!("either --skeleton or --scene is required"),
    };
    let (graph, chain, world) = scene.load()?;
    let name = scene
        .skeleton
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let mut case = TreeCase::new(name, graph);
    case.world = world;
    if a.cut_index >= case.cuts.len() {
        bail!(
            "cut index {} out of range ({} cuts)",
            a.cut_index,
            case.cuts.len()
        );
    }
    let settings = PlanSettings {
        timeout: a.timeout,
        seed: a.seed,
        ik_count: a.ik_count,
        ..PlanSettings::default()
    };
    let planner = PlannerConfig::default();
    let (record, result) = run_trial(
        &case,
        &chain,
        a.base_index,
        a.cut_index,
        method,
        &settings,
        &planner,
        &ServoConfig::default(),
    )?;
    let request = trial_request(&case, &chain, a.base_index, a.cut_index, &settings);
    let doc = PlanDocument {
        chain: chain.name().to_string(),
        request,
        strategy: method.strategy(),
        result,
    };
    write_json(&a.out, &PlanFile { scene, plan: doc })?;
    println!(
        "{}: planning {} in {:.3} s, outcome {:?}",
        method,
        record.planning_status.as_str(),
        record.planning_time,
        record.outcome
    );
    Ok(())
}

fn cmd_simulate(plan: &Path, log: Option<&Path>) -> Result<()> {
    let text =
        std::fs::read_to_string(plan).with_context(|| format!("reading {}", plan.display()))?;
    let file: PlanFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", plan.display()))?;
    let doc = &file.plan;
    let (Some(q), Some(goal)) = (&doc.result.q_star, doc.result.cutting_pose) else {
        println!(
            "plan status {}: nothing to simulate",
            doc.result.status.as_str()
        );
        return Ok(());
    };
    let (_, chain, world) = file.scene.load()?;
    let world = servo_world(&world, &chain, None, &doc.request.exempt_statics);
    let out = simulate_approach(&world, &chain, q, &goal, &ServoConfig::default())?;
    println!(
        "{} after {} steps, final error {:.2e} m / {:.2e} rad",
        out.status.as_str(),
        out.steps,
        out.error_t,
        out.error_r
    );
    if let Some(path) = log {
        write_json(path, &out)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    trees: &Path,
    chain: Option<&Path>,
    method: &str,
    timeout: f64,
    seed: u64,
    ik_count: usize,
    open: bool,
    serial: bool,
    out: &Path,
) -> Result<()> {
    let methods = if method == "all" {
        PlannerClass::ALL.to_vec()
    } else {
        method
            .split(',')
            .map(str::parse)
            .collect::<prunekit::Result<Vec<_>>>()?
    };
    let mut cases = load_tree_dir(trees)?;
    if open {
        cases = cases.into_iter().map(TreeCase::open).collect();
    }
    let chain = load_chain(chain)?;
    let config = BenchConfig {
        methods,
        settings: PlanSettings {
            timeout,
            seed,
            ik_count,
            ..PlanSettings::default()
        },
        parallel: !serial,
        ..BenchConfig::default()
    };
    let report = run_bench(&cases, &chain, &config)?;
    let files = emit_report(&report, out)?;
    for m in &report.methods {
        println!(
            "{:<20} trials {:>4}  planning {:.3}  overall {:.3}",
            m.method.as_str(),
            m.trials,
            m.planning_success_ratio,
            m.overall_success_ratio
        );
    }
    println!(
        "report written to {}",
        files.trials.parent().unwrap_or(out).display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Cuts {
            skeleton,
            cloud,
            out,
        } => cmd_cuts(skeleton, cloud.as_deref(), out),
        Command::Synth {
            seed,
            params,
            skeleton,
            cloud,
        } => cmd_synth(*seed, params.as_deref(), skeleton, cloud.as_deref()),
        Command::Rings {
            skeleton,
            cut_index,
            r_a,
            r_c,
            angles,
            out,
        } => cmd_rings(skeleton, *cut_index, *r_a, *r_c, *angles, out),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate { plan, log } => cmd_simulate(plan, log.as_deref()),
        Command::Bench {
            trees,
            chain,
            method,
            timeout,
            seed,
            ik_count,
            open,
            serial,
            out,
        } => cmd_bench(
            trees,
            chain.as_deref(),
            method,
            *timeout,
            *seed,
            *ik_count,
            *open,
            *serial,
            out,
        ),
    }
}
