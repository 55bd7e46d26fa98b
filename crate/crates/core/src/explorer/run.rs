use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acquisition::{candidate_set, select_query};
use super::touch::{execute_sliding_touch, Termination};
use super::ExplorationConfig;
use crate::control::{establish_contact, HandTemplate};
use crate::error::{Error, Result};
use crate::geometry::{
    chamfer_distance, sample_mesh_surface, sample_shape_surface, NearestNeighbors, PointCloud, Provenance, ShapeModel,
    TriMesh, Vec3, BOUNDS_INFLATION,
};
use crate::gpis::{augment_off_surface, extract_surface, fit, max_variance_gap, GpisModel, KernelSpec};
use crate::sensing::{render_partial_view, CameraModel};

/// Consecutive approach or touch failures after which a run gives up.
const MAX_FAILED_ATTEMPTS: usize = 5;
const GROUND_TRUTH_SEED: u64 = 0x5eed_0001;
const MESH_SAMPLE_SEED: u64 = 0x5eed_0002;
const POLICY_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// How the next query is picked from the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Largest expected improvement.
    Bopt,
    /// Uniform draw from the same candidates.
    Random,
}

impl Policy {
    pub fn label(self) -> &'static str {
        match self {
            Policy::Bopt => "bopt",
            Policy::Random => "random",
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bopt" => Ok(Policy::Bopt),
            "random" => Ok(Policy::Random),
            _ => Err(Error::InvalidArgument(format!(
                "unknown policy `{s}` (expected bopt or random)"
            ))),
        }
    }
}

/// Why the exploration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    UdrrBelowThreshold,
    TouchCap,
    CandidatesExhausted,
    /// Several queries in a row could not be reached.
    ApproachFailures,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::UdrrBelowThreshold => "udrr",
            StopReason::TouchCap => "touch-cap",
            StopReason::CandidatesExhausted => "candidates-exhausted",
            StopReason::ApproachFailures => "approach-failures",
        }
    }
}

/// State after the visual fit (touch 0) or after one sliding touch.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub touch: usize,
    pub query: Option<Vec3>,
    pub frames: usize,
    pub termination: Option<Termination>,
    /// Candidate count the query was drawn from.
    pub candidates: usize,
    pub udrr: f64,
    pub chamfer_mm: f64,
    pub visual_points: usize,
    pub tactile_points: usize,
    /// Not part of the CSV export, which must be reproducible.
    pub wall_time: Duration,
}

/// Outcome of one exploration run.
#[derive(Debug, Clone)]
pub struct ExplorationReport {
    pub policy: Policy,
    /// Record 0 is the visual-only model; record `k` follows touch `k`.
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
    pub dist_max: f64,
    pub final_mesh: TriMesh,
    pub fused: PointCloud,
}

impl ExplorationReport {
    pub fn touch_count(&self) -> usize {
        self.records.len() - 1
    }

    pub fn initial_chamfer(&self) -> f64 {
        self.records[0].chamfer_mm
    }

    pub fn final_chamfer(&self) -> f64 {
        self.records.last().expect("record 0 always present").chamfer_mm
    }

    pub fn final_udrr(&self) -> f64 {
        self.records.last().expect("record 0 always present").udrr
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "touch,query_x,query_y,query_z,frames,termination,candidates,udrr,chamfer_mm,visual_points,tactile_points\n",
        );
        for r in &self.records {
            let q = r.query.map_or(",,".to_string(), |q| format!("{},{},{}", q.x, q.y, q.z));
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.touch,
                q,
                r.frames,
                r.termination.map_or("", |t| t.label()),
                r.candidates,
                r.udrr,
                r.chamfer_mm,
                r.visual_points,
                r.tactile_points
            );
        }
        s
    }
}

/// Hooks into the exploration loop, for instrumentation and snapshot export.
pub trait Observer {
    /// Called with every candidate set, including an empty final one.
    fn candidates(&mut self, _touch: usize, _candidates: &[Vec3]) {}

    /// Called after each refit with the new record, the reconstruction and,
    /// for touches, the fragment that was fused.
    fn iteration(&mut self, _record: &IterationRecord, _mesh: &TriMesh, _fragment: Option<&PointCloud>) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Uncertainty distance reduction ratio: the posterior variance gap over all
/// observed points relative to the gap `dist_max` of the visual-only model.
pub fn udrr(model: &GpisModel, observed: &PointCloud, dist_max: f64) -> Result<f64> {
    if !(dist_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dist_max must be positive, got {dist_max}"
        )));
    }
    Ok(max_variance_gap(model, observed.points())? / dist_max)
}

fn fit_cloud(cloud: &PointCloud, spec: &KernelSpec) -> Result<GpisModel> {
    let (points, values) = augment_off_surface(cloud)?;
    fit(&points, &values, spec)
}

fn reconstruct(model: &GpisModel, cloud: &PointCloud, cells: usize) -> Result<TriMesh> {
    let bounds = cloud
        .bounding_box()
        .expect("fused cloud is non-empty")
        .inflated(BOUNDS_INFLATION);
    extract_surface(model, &bounds, cells)
}

fn subsample(cloud: &PointCloud, keep: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    if keep >= cloud.len() {
        return cloud.clone();
    }
    let mut idx = index::sample(rng, cloud.len(), keep).into_vec();
    idx.sort_unstable();
    cloud.select(&idx)
}

/// Runs the full visuo-tactile exploration of `shape`.
pub fn explore(
    shape: &ShapeModel,
    camera: &CameraModel,
    template: &HandTemplate,
    cfg: &ExplorationConfig,
    policy: Policy,
) -> Result<ExplorationReport> {
    explore_with(shape, camera, template, cfg, policy, &mut ())
}

/// [`explore`] with an [`Observer`] attached.
///
/// The visual view is fitted first and its variance gap becomes `dist_max`.
/// Each iteration then extracts the surface, builds the candidate set, picks
/// a query by policy, establishes contact at the observed point nearest the
/// query and slides toward it. The touch cloud is downsampled, fused (capped
/// at `cfg.point_cap`) and the model refitted. The loop stops when the UDRR
/// drops below the threshold, at the touch cap, or when no candidates remain.
pub fn explore_with(
    shape: &ShapeModel,
    camera: &CameraModel,
    template: &HandTemplate,
    cfg: &ExplorationConfig,
    policy: Policy,
    observer: &mut dyn Observer,
) -> Result<ExplorationReport> {
    cfg.validate()?;
    template.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ POLICY_STREAM);
    let visual = render_partial_view(shape, camera, cfg.seed)?;
    let mut fused = subsample(&visual, cfg.point_cap, &mut rng);
    let spec = match cfg.kernel {
        Some(k) => k,
        None => {
            let diagonal = visual.bounding_box().expect("non-empty view").diagonal();
            KernelSpec::rbf(cfg.length_scale_fraction * diagonal, cfg.gp_noise)?
        }
    };
    let truth = sample_shape_surface(shape, cfg.ground_truth_samples, GROUND_TRUTH_SEED)?;
    let chamfer = |mesh: &TriMesh| -> Result<f64> {
        let est = sample_mesh_surface(mesh, cfg.ground_truth_samples, MESH_SAMPLE_SEED)?;
        chamfer_distance(&truth, &est)
    };

    let mut model = fit_cloud(&fused, &spec)?;
    let dist_max = max_variance_gap(&model, fused.points())?;
    if !(dist_max > 0.0) {
        return Err(Error::DegenerateGeometry(
            "visual model has uniform variance at the observations".into(),
        ));
    }
    let mut mesh = reconstruct(&model, &fused, cfg.grid_cells)?;
    let first = IterationRecord {
        touch: 0,
        query: None,
        frames: 0,
        termination: None,
        candidates: 0,
        udrr: udrr(&model, &fused, dist_max)?,
        chamfer_mm: chamfer(&mesh)?,
        visual_points: fused.len(),
        tactile_points: 0,
        wall_time: started.elapsed(),
    };
    observer.iteration(&first, &mesh, None)?;
    let mut records = vec![first];
    let visual_index = NearestNeighbors::new(visual.points()).expect("non-empty view");
    let mut blocked: Vec<Vec3> = Vec::new();
    let mut failures = 0;

    let stop = loop {
        let last = records.last().expect("record 0 always present");
        if last.udrr < cfg.udrr_threshold {
            break StopReason::UdrrBelowThreshold;
        }
        let touch = records.len();
        if touch > cfg.max_touches {
            break StopReason::TouchCap;
        }
        let iteration_start = Instant::now();
        let mut observed = fused.clone();
        for b in &blocked {
            observed.push(*b, Provenance::Visual)?;
        }
        let candidates = candidate_set(&model, &mesh, &observed, &camera.position(), cfg)?;
        observer.candidates(touch, &candidates);
        if candidates.is_empty() {
            break StopReason::CandidatesExhausted;
        }
        let query = match policy {
            Policy::Bopt => select_query(&model, &candidates, 0.0)?,
            Policy::Random => candidates[rng.random_range(0..candidates.len())],
        };
        let approach = visual.points()[visual_index.nearest(&query).0];
        let attempt = establish_contact(shape, &approach, template)
            .and_then(|hand| execute_sliding_touch(shape, &hand, &query, touch as u32, cfg, &mut rng));
        let (sliding, _) = match attempt {
            Ok(t) => t,
            Err(e @ (Error::ApproachFailed { .. } | Error::TouchFailed | Error::DegenerateNormal { .. })) => {
                log::warn!("touch {touch} toward {query:?} failed: {e}");
                blocked.push(query);
                failures += 1;
                if failures >= MAX_FAILED_ATTEMPTS {
                    break StopReason::ApproachFailures;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        failures = 0;
        // The query lies on the estimate and may sit off the true surface, out of reach of the exclusion radius.
        blocked.push(query);
        let fragment = sliding.cloud();
        let keep = (cfg.tactile_ratio * fragment.len() as f64).round() as usize;
        let fragment = subsample(&fragment, keep, &mut rng);
        fused.extend(&fragment);
        if fused.len() > cfg.point_cap {
            fused = subsample(&fused, cfg.point_cap, &mut rng);
        }
        model = fit_cloud(&fused, &spec)?;
        mesh = reconstruct(&model, &fused, cfg.grid_cells)?;
        let visual_points = fused.tags().iter().filter(|t| **t == Provenance::Visual).count();
        let record = IterationRecord {
            touch,
            query: Some(query),
            frames: sliding.frames.len(),
            termination: Some(sliding.termination),
            candidates: candidates.len(),
            udrr: udrr(&model, &fused, dist_max)?,
            chamfer_mm: chamfer(&mesh)?,
            visual_points,
            tactile_points: fused.len() - visual_points,
            wall_time: iteration_start.elapsed(),
        };
        log::info!(
            "touch {touch}: {} frames ({}), udrr {:.3}, cd {:.2} mm",
            record.frames,
            sliding.termination.label(),
            record.udrr,
            record.chamfer_mm
        );
        observer.iteration(&record, &mesh, Some(&fragment))?;
        records.push(record);
    };
    log::info!(
        "{} run stopped after {} touches: {}",
        policy.label(),
        records.len() - 1,
        stop.label()
    );
    Ok(ExplorationReport {
        policy,
        records,
        stop,
        dist_max,
        final_mesh: mesh,
        fused,
    })
}
