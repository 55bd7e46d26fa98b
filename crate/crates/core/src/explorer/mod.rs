//! Touch planning over the estimated surface, sliding touches and the
//! exploration loop that fuses vision and touch into one GPIS.

mod acquisition;
mod run;
mod touch;

pub use acquisition::{candidate_set, ei_closed_form, expected_improvement, select_query};
pub use run::{explore, explore_with, udrr, ExplorationReport, IterationRecord, Observer, Policy, StopReason};
pub use touch::{execute_sliding_touch, sliding_direction, SlidingTouch, Termination, TouchFrame};

use serde::{Deserialize, Serialize};

use crate::control::{ServoGains, TactileJacobian};
use crate::error::{Error, Result};
use crate::gpis::{KernelSpec, DEFAULT_GRID_CELLS};
use crate::sensing::GelPad;

/// Everything the exploration loop needs besides the scene itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    /// Distance the palm advances between sliding frames (m).
    pub step: f64,
    /// A sliding touch ends once the leader contact is this close to the query (m).
    pub min_query_distance: f64,
    pub max_frames: usize,
    /// Candidates closer than this to any observed point are excluded (m).
    pub exclusion_radius: f64,
    pub udrr_threshold: f64,
    /// Fraction of tactile contact points kept per touch.
    pub tactile_ratio: f64,
    /// Upper bound on the fused cloud size.
    pub point_cap: usize,
    /// Allowed world z range for query points (m).
    pub z_bounds: [f64; 2],
    pub max_touches: usize,
    pub grid_cells: usize,
    /// Servo iterations per sliding frame.
    pub servo_iterations: usize,
    /// Surface samples of the true shape used for Chamfer distance.
    pub ground_truth_samples: usize,
    pub seed: u64,
    /// Fixed kernel; `None` uses an RBF built from the two fields below.
    pub kernel: Option<KernelSpec>,
    /// RBF length scale as a fraction of the visual cloud's bounding-box diagonal.
    pub length_scale_fraction: f64,
    /// Observation noise of the default RBF.
    pub gp_noise: f64,
    pub gel: GelPad,
    pub jacobian: TactileJacobian,
    /// `None` uses [`ServoGains::for_gel`].
    pub gains: Option<ServoGains>,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            step: 0.005,
            min_query_distance: 0.01,
            max_frames: 15,
            exclusion_radius: 0.005,
            udrr_threshold: 0.30,
            tactile_ratio: 0.06,
            point_cap: 4500,
            z_bounds: [0.05, 0.15],
            max_touches: 12,
            grid_cells: DEFAULT_GRID_CELLS,
            servo_iterations: 30,
            ground_truth_samples: 10_000,
            seed: 0,
            kernel: None,
            length_scale_fraction: 0.8,
            gp_noise: 0.1,
            gel: GelPad::default(),
            jacobian: TactileJacobian::default(),
            gains: None,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("step", self.step),
            ("min_query_distance", self.min_query_distance),
            ("exclusion_radius", self.exclusion_radius),
            ("udrr_threshold", self.udrr_threshold),
            ("length_scale_fraction", self.length_scale_fraction),
            ("gp_noise", self.gp_noise),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfiguration(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tactile_ratio > 0.0 && self.tactile_ratio <= 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "tactile_ratio {} outside (0, 1]",
                self.tactile_ratio
            )));
        }
        let counts = [
            ("max_frames", self.max_frames),
            ("point_cap", self.point_cap),
            ("servo_iterations", self.servo_iterations),
            ("ground_truth_samples", self.ground_truth_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfiguration(format!("{name} must be at least 1")));
            }
        }
        if self.grid_cells < 2 {
            return Err(Error::InvalidConfiguration("grid_cells must be at least 2".into()));
        }
        let [lo, hi] = self.z_bounds;
        if !(lo < hi) {
            return Err(Error::InvalidConfiguration(format!("z_bounds [{lo}, {hi}] are empty")));
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        self.gel.validate()?;
        self.jacobian.validate()?;
        self.servo_gains().validate(&self.gel)
    }

    pub fn servo_gains(&self) -> ServoGains {
        self.gains.unwrap_or_else(|| ServoGains::for_gel(&self.gel))
    }
}
