//! Trial records, aggregation, and report files.
//!
//! Everything derived from wall-clock time goes to separate `timing.*`
//! files so the remaining files are byte-identical across repeated runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{outcome_of, PlannerClass};
use crate::controller::{ExecutionOutcome, ExecutionStatus};
use crate::error::{Error, Result};
use crate::planner::{PlanResult, PlanStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    #[serde(rename = "planning")]
    PlanningFailure,
    JointLimit,
    VelocityLimit,
    Collision,
    NotConverged,
}

/// One (tree, base pose, cut, method) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub tree: String,
    pub base_index: usize,
    pub cut_index: usize,
    pub method: PlannerClass,
    pub planning_status: PlanStatus,
    pub execution_status: Option<ExecutionStatus>,
    pub outcome: Outcome,
    pub theta_index: Option<usize>,
    pub servo_steps: Option<usize>,
    pub final_error_t: Option<f64>,
    pub final_error_r: Option<f64>,
    pub diagnostic: Option<String>,
    /// Wall time of planning (s).
    pub planning_time: f64,
}

impl TrialRecord {
    pub fn new(
        tree: &str,
        base_index: usize,
        cut_index: usize,
        method: PlannerClass,
        plan: &PlanResult,
        execution: Option<&ExecutionOutcome>,
    ) -> Self {
        let exec_status = if plan.status == PlanStatus::Planned && !method.servoes() {
            // replaying a validated trajectory cannot fail
            Some(ExecutionStatus::Success)
        } else {
            execution.map(|e| e.status)
        };
        TrialRecord {
            tree: tree.to_string(),
            base_index,
            cut_index,
            method,
            planning_status: plan.status,
            execution_status: exec_status,
            outcome: outcome_of(plan, exec_status),
            theta_index: plan.theta_index,
            servo_steps: execution.map(|e| e.steps),
            final_error_t: execution.map(|e| e.error_t),
            final_error_r: execution.map(|e| e.error_r),
            diagnostic: plan.diagnostic.clone(),
            planning_time: plan.stats.planning_time,
        }
    }

    fn key(&self) -> (String, usize, usize, PlannerClass) {
        (
            self.tree.clone(),
            self.base_index,
            self.cut_index,
            self.method,
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureHistogram {
    pub planning: usize,
    pub joint_limit: usize,
    pub velocity_limit: usize,
    pub collision: usize,
    pub not_converged: usize,
}

impl FailureHistogram {
    pub fn record(&mut self, o: Outcome) {
        match o {
            Outcome::Success => {}
            Outcome::PlanningFailure => self.planning += 1,
            Outcome::JointLimit => self.joint_limit += 1,
            Outcome::VelocityLimit => self.velocity_limit += 1,
            Outcome::Collision => self.collision += 1,
            Outcome::NotConverged => self.not_converged += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.planning + self.joint_limit + self.velocity_limit + self.collision + self.not_converged
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: PlannerClass,
    pub trials: usize,
    pub planned: usize,
    pub succeeded: usize,
    pub planning_success_ratio: f64,
    pub overall_success_ratio: f64,
    pub failures: FailureHistogram,
    /// Mean planning time over planned trials (s).
    pub mean_planning_time: Option<f64>,
    /// Population standard deviation of the same (s).
    pub std_planning_time: Option<f64>,
}

impl MethodSummary {
    pub fn from_trials<'a>(
        method: PlannerClass,
        trials: impl IntoIterator<Item = &'a TrialRecord>,
    ) -> Self {
        let mut n = 0;
        let mut planned = 0;
        let mut succeeded = 0;
        let mut failures = FailureHistogram::default();
        let mut times = Vec::new();
        for t in trials {
            n += 1;
            if t.planning_status == PlanStatus::Planned {
                planned += 1;
                times.push(t.planning_time);
            }
            if t.outcome == Outcome::Success {
                succeeded += 1;
            }
            failures.record(t.outcome);
        }
        let ratio = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let (mean, std) = mean_std(&times);
        MethodSummary {
            method,
            trials: n,
            planned,
            succeeded,
            planning_success_ratio: ratio(planned),
            overall_success_ratio: ratio(succeeded),
            failures,
            mean_planning_time: mean,
            std_planning_time: std,
        }
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub trials: Vec<TrialRecord>,
    /// One entry per method present, in class order.
    pub methods: Vec<MethodSummary>,
}

impl ExperimentReport {
    pub fn summary(&self, method: PlannerClass) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Per-method ratios, failure histograms and timing statistics. Trials are
/// ordered by (tree, base pose, cut, method), so the result does not depend
/// on the order they finished in.
pub fn aggregate(mut trials: Vec<TrialRecord>) -> ExperimentReport {
    trials.sort_by_cached_key(TrialRecord::key);
    let mut by_method: BTreeMap<PlannerClass, Vec<&TrialRecord>> = BTreeMap::new();
    for t in &trials {
        by_method.entry(t.method).or_default().push(t);
    }
    let methods = by_method
        .into_iter()
        .map(|(m, ts)| MethodSummary::from_trials(m, ts))
        .collect();
    ExperimentReport { trials, methods }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub series: PathBuf,
    pub timing: PathBuf,
    pub timing_summary: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ReportFiles {
            trials: dir.join("trials.csv"),
            summary: dir.join("summary.json"),
            series: dir.join("series.json"),
            timing: dir.join("timing.csv"),
            timing_summary: dir.join("timing.json"),
        }
    }

    /// Files whose content does not depend on wall-clock time.
    pub fn deterministic(&self) -> [&Path; 3] {
        [&self.trials, &self.summary, &self.series]
    }
}

#[derive(Serialize, Deserialize)]
struct TrialRow {
    tree: String,
    base_index: usize,
    cut_index: usize,
    method: PlannerClass,
    planning_status: PlanStatus,
    execution_status: Option<ExecutionStatus>,
    outcome: Outcome,
    theta_index: Option<usize>,
    servo_steps: Option<usize>,
    final_error_t: Option<f64>,
    final_error_r: Option<f64>,
    diagnostic: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TimingRow {
    tree: String,
    base_index: usize,
    cut_index: usize,
    method: PlannerClass,
    planning_time: f64,
}

#[derive(Serialize)]
struct SummaryEntry<'a> {
    method: PlannerClass,
    trials: usize,
    planned: usize,
    succeeded: usize,
    planning_success_ratio: f64,
    overall_success_ratio: f64,
    failures: &'a FailureHistogram,
}

#[derive(Serialize)]
struct PieSlice {
    success: usize,
    planning: usize,
    joint_limit: usize,
    velocity_limit: usize,
    collision: usize,
    not_converged: usize,
}

#[derive(Serialize)]
struct Series<'a> {
    methods: Vec<&'a str>,
    planning_success_ratio: Vec<f64>,
    overall_success_ratio: Vec<f64>,
    failure_pie: BTreeMap<&'a str, PieSlice>,
}

#[derive(Serialize)]
struct TimingEntry {
    mean: Option<f64>,
    std: Option<f64>,
    /// Planning times of planned trials, in trial order.
    planned_times: Vec<f64>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    })
}

/// Write the report into `dir` (created if missing).
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles::in_dir(dir);

    let mut w = csv_writer(&files.trials)?;
    let mut tw = csv_writer(&files.timing)?;
    for t in &report.trials {
        w.serialize(TrialRow {
            tree: t.tree.clone(),
            base_index: t.base_index,
            cut_index: t.cut_index,
            method: t.method,
            planning_status: t.planning_status,
            execution_status: t.execution_status,
            outcome: t.outcome,
            theta_index: t.theta_index,
            servo_steps: t.servo_steps,
            final_error_t: t.final_error_t,
            final_error_r: t.final_error_r,
            diagnostic: t.diagnostic.clone(),
        })?;
        tw.serialize(TimingRow {
            tree: t.tree.clone(),
            base_index: t.base_index,
            cut_index: t.cut_index,
            method: t.method,
            planning_time: t.planning_time,
        })?;
    }
    w.flush().map_err(|e| Error::io(&files.trials, e))?;
    tw.flush().map_err(|e| Error::io(&files.timing, e))?;

    let summary: Vec<SummaryEntry> = report
        .methods
        .iter()
        .map(|m| SummaryEntry {
            method: m.method,
            trials: m.trials,
            planned: m.planned,
            succeeded: m.succeeded,
            planning_success_ratio: m.planning_success_ratio,
            overall_success_ratio: m.overall_success_ratio,
            failures: &m.failures,
        })
        .collect();
    write_text(&files.summary, &serde_json::to_string_pretty(&summary)?)?;

    let series = Series {
        methods: report.methods.iter().map(|m| m.method.as_str()).collect(),
        planning_success_ratio: report
            .methods
            .iter()
            .map(|m| m.planning_success_ratio)
            .collect(),
        overall_success_ratio: report
            .methods
            .iter()
            .map(|m| m.overall_success_ratio)
            .collect(),
        failure_pie: report
            .methods
            .iter()
            .map(|m| {
                let f = &m.failures;
                (
                    m.method.as_str(),
                    PieSlice {
                        success: m.succeeded,
                        planning: f.planning,
                        joint_limit: f.joint_limit,
                        velocity_limit: f.velocity_limit,
                        collision: f.collision,
                        not_converged: f.not_converged,
                    },
                )
            })
            .collect(),
    };
    write_text(&files.series, &serde_json::to_string_pretty(&series)?)?;

    let timing: BTreeMap<&str, TimingEntry> = report
        .methods
        .iter()
        .map(|m| {
            let times = report
                .trials
                .iter()
                .filter(|t| t.method == m.method && t.planning_status == PlanStatus::Planned)
                .map(|t| t.planning_time)
                .collect();
            (
                m.method.as_str(),
                TimingEntry {
                    mean: m.mean_planning_time,
                    std: m.std_planning_time,
                    planned_times: times,
                },
            )
        })
        .collect();
    write_text(
        &files.timing_summary,
        &serde_json::to_string_pretty(&timing)?,
    )?;
    Ok(files)
}

/// Rebuild a report from the files [`emit_report`] wrote.
pub fn parse_report(dir: &Path) -> Result<ExperimentReport> {
    let files = ReportFiles::in_dir(dir);
    let open =
        |p: &Path| csv::Reader::from_path(p).map_err(|e| Error::parse(p.display().to_string(), e));
    let rows: Vec<TrialRow> = open(&files.trials)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    let times: Vec<TimingRow> = open(&files.timing)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    if rows.len() != times.len() {
        return Err(Error::parse(
            files.timing.display().to_string(),
            "row count differs from trials.csv",
        ));
    }
    let trials = rows
        .into_iter()
        .zip(times)
        .map(|(r, t)| {
            let rec = TrialRecord {
                tree: r.tree,
                base_index: r.base_index,
                cut_index: r.cut_index,
                method: r.method,
                planning_status: r.planning_status,
                execution_status: r.execution_status,
                outcome: r.outcome,
                theta_index: r.theta_index,
                servo_steps: r.servo_steps,
                final_error_t: r.final_error_t,
                final_error_r: r.final_error_r,
                diagnostic: r.diagnostic,
                planning_time: t.planning_time,
            };
            if rec.key() != (t.tree, t.base_index, t.cut_index, t.method) {
                return Err(Error::parse(
                    files.timing.display().to_string(),
                    "rows out of step with trials.csv",
                ));
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(trials))
}
