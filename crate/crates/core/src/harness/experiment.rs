use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::scene::SceneSpec;
use crate::error::{Error, Result};
use crate::explorer::{explore_with, ExplorationReport, IterationRecord, Observer, Policy, StopReason};
use crate::geometry::{PointCloud, TriMesh, Vec3};
use crate::io::{write_cloud_ply, write_mesh_obj, write_mesh_ply};

/// Command-line adjustments applied on top of a scene file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub policy: Policy,
    pub udrr_threshold: Option<f64>,
    pub grid: Option<usize>,
}

impl Default for RunOverrides {
    fn default() -> Self {
        Self {
            seed: None,
            policy: Policy::Bopt,
            udrr_threshold: None,
            grid: None,
        }
    }
}

impl RunOverrides {
    /// The scene with the overrides folded into its exploration config.
    pub fn apply(&self, scene: &SceneSpec) -> Result<SceneSpec> {
        let mut out = scene.clone();
        let cfg = &mut out.exploration;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.udrr_threshold {
            cfg.udrr_threshold = t;
        }
        if let Some(g) = self.grid {
            cfg.grid_cells = g;
        }
        out.validate()?;
        Ok(out)
    }
}

/// Process exit code for a completed run.
pub fn stop_exit_code(stop: StopReason) -> i32 {
    match stop {
        StopReason::UdrrBelowThreshold => 0,
        StopReason::TouchCap => 10,
        StopReason::CandidatesExhausted | StopReason::ApproachFailures => 11,
    }
}

/// Process exit code for a run that could not complete.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidConfiguration(_) | Error::NotFound { .. } => 2,
        Error::Io { .. } => 3,
        Error::EmptyView => 4,
        _ => 5,
    }
}

/// Reads and validates a scene file.
pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SceneSpec::from_json(&text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `mesh_KK.ply` after every refit and `touch_KK.ply` for every fused fragment.
struct Exporter<'a> {
    dir: &'a Path,
}

impl Observer for Exporter<'_> {
    fn iteration(&mut self, record: &IterationRecord, mesh: &TriMesh, fragment: Option<&PointCloud>) -> Result<()> {
        write_mesh_ply(mesh, &self.dir.join(format!("mesh_{:02}.ply", record.touch)))?;
        if let Some(f) = fragment {
            write_cloud_ply(f, &self.dir.join(format!("touch_{:02}.ply", record.touch)))?;
        }
        Ok(())
    }
}

/// Result of [`run`]: the report and where its files went.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExplorationReport,
    pub dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        stop_exit_code(self.report.stop)
    }
}

/// Runs one exploration and exports its artifacts into `out`.
///
/// Files: `config.json` (the resolved scene), `report.csv`, `mesh_KK.ply`
/// per iteration with the posterior variance as vertex quality,
/// `touch_KK.ply` per fused fragment, `final.obj` and `fused.ply`.
pub fn run(scene: &SceneSpec, out: &Path, overrides: &RunOverrides) -> Result<RunOutcome> {
    let scene = overrides.apply(scene)?;
    create_dir(out)?;
    write_text(&out.join("config.json"), &scene.to_json())?;
    let shape = scene.shape.build()?;
    let camera = scene.camera.build()?;
    let report = explore_with(
        &shape,
        &camera,
        &scene.hand,
        &scene.exploration,
        overrides.policy,
        &mut Exporter { dir: out },
    )?;
    write_text(&out.join("report.csv"), &report.to_csv())?;
    write_mesh_obj(&report.final_mesh, &out.join("final.obj"))?;
    write_cloud_ply(&report.fused, &out.join("fused.ply"))?;
    Ok(RunOutcome {
        report,
        dir: out.to_path_buf(),
    })
}

/// One run inside a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub policy: Policy,
    pub seed: u64,
    /// `Err` holds the abort message; such runs are excluded from the statistics.
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub touches: usize,
    pub stop: StopReason,
    pub initial_chamfer_mm: f64,
    pub final_chamfer_mm: f64,
    pub final_udrr: f64,
    /// Candidate sets built during the run.
    pub candidate_sets: usize,
}

/// Per-policy statistics over the completed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: Policy,
    pub seeds: usize,
    pub completed: usize,
    pub avg_touches: f64,
    pub std_touches: f64,
    pub avg_chamfer_mm: f64,
    pub std_chamfer_mm: f64,
    /// Seeds whose run aborted.
    pub flagged: Vec<u64>,
}

/// Both policies over one seed list.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub rows: Vec<PolicySummary>,
    pub runs: Vec<RunRecord>,
}

/// Mean and sample standard deviation; zeros for an empty slice.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ComparisonSummary {
    /// Rebuilds the per-policy rows from the run records, in first-seen policy order.
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let mut policies: Vec<Policy> = Vec::new();
        for r in &runs {
            if !policies.contains(&r.policy) {
                policies.push(r.policy);
            }
        }
        let rows = policies
            .into_iter()
            .map(|policy| {
                let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.policy == policy).collect();
                let done: Vec<&RunSummary> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
                let touches: Vec<f64> = done.iter().map(|s| s.touches as f64).collect();
                let cds: Vec<f64> = done.iter().map(|s| s.final_chamfer_mm).collect();
                let (avg_touches, std_touches) = mean_std(&touches);
                let (avg_chamfer_mm, std_chamfer_mm) = mean_std(&cds);
                PolicySummary {
                    policy,
                    seeds: mine.len(),
                    completed: done.len(),
                    avg_touches,
                    std_touches,
                    avg_chamfer_mm,
                    std_chamfer_mm,
                    flagged: mine.iter().filter(|r| r.outcome.is_err()).map(|r| r.seed).collect(),
                }
            })
            .collect();
        Self { rows, runs }
    }

    pub fn row(&self, policy: Policy) -> Option<&PolicySummary> {
        self.rows.iter().find(|r| r.policy == policy)
    }

    /// Whether bopt shows no larger touch-count spread than random.
    pub fn bopt_spread_not_larger(&self) -> Option<bool> {
        Some(self.row(Policy::Bopt)?.std_touches <= self.row(Policy::Random)?.std_touches)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("policy,seeds,completed,avg_touches,std_touches,avg_cd_mm,std_cd_mm,flagged_seeds\n");
        for r in &self.rows {
            let flagged: Vec<String> = r.flagged.iter().map(u64::to_string).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.policy.label(),
                r.seeds,
                r.completed,
                r.avg_touches,
                r.std_touches,
                r.avg_chamfer_mm,
                r.std_chamfer_mm,
                flagged.join(" ")
            );
        }
        s
    }

    pub fn runs_csv(&self) -> String {
        let mut s =
            String::from("policy,seed,touches,stop,initial_cd_mm,final_cd_mm,final_udrr,candidate_sets,error\n");
        for r in &self.runs {
            let _ = match &r.outcome {
                Ok(o) => writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},",
                    r.policy.label(),
                    r.seed,
                    o.touches,
                    o.stop.label(),
                    o.initial_chamfer_mm,
                    o.final_chamfer_mm,
                    o.final_udrr,
                    o.candidate_sets
                ),
                Err(e) => writeln!(s, "{},{},,,,,,,\"{}\"", r.policy.label(), r.seed, e.replace('"', "'")),
            };
        }
        s
    }
}

#[derive(Default)]
struct CandidateCounter {
    sets: usize,
}

impl Observer for CandidateCounter {
    fn candidates(&mut self, _touch: usize, _candidates: &[Vec3]) {
        self.sets += 1;
    }
}

/// Runs both policies over `seeds` and writes `summary.csv`, `runs.csv`
/// and the resolved `config.json` into `out`.
///
/// Both policies go through the same exploration loop and candidate
/// machinery and differ only in how a query is drawn. Runs that abort are
/// recorded with their error and left out of the statistics.
pub fn compare(scene: &SceneSpec, seeds: &[u64], out: &Path) -> Result<ComparisonSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("compare needs at least one seed".into()));
    }
    scene.validate()?;
    create_dir(out)?;
    let mut resolved = scene.clone();
    resolved.seeds = seeds.to_vec();
    write_text(&out.join("config.json"), &resolved.to_json())?;
    let shape = scene.shape.build()?;
    let camera = scene.camera.build()?;
    let mut runs = Vec::new();
    for policy in [Policy::Bopt, Policy::Random] {
        for &seed in seeds {
            let mut cfg = scene.exploration.clone();
            cfg.seed = seed;
            let mut counter = CandidateCounter::default();
            let outcome = explore_with(&shape, &camera, &scene.hand, &cfg, policy, &mut counter)
                .map(|r| RunSummary {
                    touches: r.touch_count(),
                    stop: r.stop,
                    initial_chamfer_mm: r.initial_chamfer(),
                    final_chamfer_mm: r.final_chamfer(),
                    final_udrr: r.final_udrr(),
                    candidate_sets: counter.sets,
                })
                .map_err(|e| {
                    log::warn!("{} seed {seed} aborted: {e}", policy.label());
                    e.to_string()
                });
            runs.push(RunRecord { policy, seed, outcome });
        }
    }
    let summary = ComparisonSummary::from_runs(runs);
    write_text(&out.join("summary.csv"), &summary.summary_csv())?;
    write_text(&out.join("runs.csv"), &summary.runs_csv())?;
    Ok(summary)
}
