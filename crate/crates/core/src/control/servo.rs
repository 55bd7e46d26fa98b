use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::hand::{Adaptation, HandState, Twist};
use crate::error::{Error, Result};
use crate::geometry::ShapeModel;
use crate::sensing::{extract_tactile_feature, render_height_map, GelPad, TactileFeature};

/// Consecutive no-contact iterations tolerated by [`servo_regulate`].
pub const MAX_LOST_ITERATIONS: usize = 5;

/// Diagonal tactile Jacobian: feature change per unit fingertip motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TactileJacobian {
    /// ∂x̄/∂θ_z in px/rad.
    pub centroid_x_per_theta_z: f64,
    /// ∂ȳ/∂θ_y in px/rad.
    pub centroid_y_per_theta_y: f64,
    /// ∂c/∂d_x in px/m.
    pub area_per_depth: f64,
}

impl Default for TactileJacobian {
    fn default() -> Self {
        Self {
            centroid_x_per_theta_z: 200.0,
            centroid_y_per_theta_y: 200.0,
            area_per_depth: 1.0e6,
        }
    }
}

impl TactileJacobian {
    pub fn validate(&self) -> Result<()> {
        let d = [
            self.centroid_x_per_theta_z,
            self.centroid_y_per_theta_y,
            self.area_per_depth,
        ];
        if d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "tactile Jacobian diagonal must be nonzero, got {d:?}"
            )));
        }
        Ok(())
    }

    /// Feature-from-twist matrix, rows (x̄, ȳ, c) and columns (θ_y, θ_z, d_x).
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0,
            self.centroid_x_per_theta_z,
            0.0,
            self.centroid_y_per_theta_y,
            0.0,
            0.0,
            0.0,
            0.0,
            self.area_per_depth,
        )
    }

    /// Pseudo-inverse of [`TactileJacobian::matrix`].
    pub fn pseudo_inverse(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0,
            1.0 / self.centroid_y_per_theta_y,
            0.0,
            1.0 / self.centroid_x_per_theta_z,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0 / self.area_per_depth,
        )
    }
}

/// Selection matrix over (θ_y, θ_z, d_x): `i` keeps the rotations, `j` the translation.
pub fn selection(i: u8, j: u8) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(i as f64, i as f64, j as f64))
}

/// PD gains, feature reference and per-step motion limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoGains {
    /// Proportional gain per feature channel (x̄, ȳ, c).
    pub kp: [f64; 3],
    /// Derivative gain per feature channel.
    pub kd: [f64; 3],
    /// Reference feature (x̄_r, ȳ_r, c_r).
    pub reference: [f64; 3],
    pub max_rotation_step: f64,
    pub max_translation_step: f64,
    /// Inward step taken while the leader has no contact.
    pub search_step: f64,
}

impl ServoGains {
    /// Defaults for `gel`: image-center reference and a contact area of a quarter of the pad.
    pub fn for_gel(gel: &GelPad) -> Self {
        let (cx, cy) = gel.center();
        Self {
            kp: [0.5; 3],
            kd: [0.1; 3],
            reference: [cx, cy, 0.25 * gel.pixel_count() as f64],
            max_rotation_step: 3f64.to_radians(),
            max_translation_step: 0.001,
            search_step: 0.0005,
        }
    }

    pub fn validate(&self, gel: &GelPad) -> Result<()> {
        if self.kp.iter().chain(&self.kd).any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfiguration("servo gains must be non-negative".into()));
        }
        let cr = self.reference[2];
        if !(cr > 0.0 && cr < gel.pixel_count() as f64) {
            return Err(Error::InvalidConfiguration(format!(
                "reference contact area {cr} outside (0, {})",
                gel.pixel_count()
            )));
        }
        let limits = [self.max_rotation_step, self.max_translation_step, self.search_step];
        if limits.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfiguration("servo step limits must be positive".into()));
        }
        Ok(())
    }

    /// `reference − feature`; `None` without contact.
    pub fn delta(&self, f: &TactileFeature) -> Option<Vector3<f64>> {
        let (x, y) = f.centroid?;
        if f.contact_area == 0 {
            return None;
        }
        Some(Vector3::from(self.reference) - Vector3::new(x, y, f.contact_area as f64))
    }

    /// Centroid within 1 px of the reference and area within 5% of c_r.
    pub fn converged(&self, delta: &Vector3<f64>) -> bool {
        delta.xy().norm() < 1.0 && delta.z.abs() < 0.05 * self.reference[2]
    }

    fn clamp(&self, v: Vector3<f64>) -> Twist {
        let r = self.max_rotation_step;
        let t = self.max_translation_step;
        Twist {
            theta_y: v.x.clamp(-r, r),
            theta_z: v.y.clamp(-r, r),
            d_x: v.z.clamp(-t, t),
        }
    }
}

/// `P J† u` for PD command `u`, for a given selection.
pub fn selected_twist(u: &Vector3<f64>, jac: &TactileJacobian, i: u8, j: u8) -> Vector3<f64> {
    selection(i, j) * jac.pseudo_inverse() * u
}

/// Twist of the leader frame driving the feature toward the reference.
///
/// The PD command on each channel is mapped through the Jacobian
/// pseudo-inverse; rotations come from the centroid channels and the normal
/// translation from the contact-area channel. Components are clamped to the
/// per-step limits.
pub fn palm_twist(
    delta: &Vector3<f64>,
    previous: Option<&Vector3<f64>>,
    jac: &TactileJacobian,
    gains: &ServoGains,
) -> Result<Twist> {
    jac.validate()?;
    let d_delta = previous.map_or(Vector3::zeros(), |p| delta - p);
    let u = Vector3::from(gains.kp).component_mul(delta) + Vector3::from(gains.kd).component_mul(&d_delta);
    let v = selected_twist(&u, jac, 1, 0) + selected_twist(&u, jac, 0, 1);
    Ok(gains.clamp(v))
}

/// One iteration of the servo loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoStep {
    pub iteration: usize,
    /// Feature error, `None` when the leader had no contact.
    pub delta: Option<Vector3<f64>>,
    pub twist: Twist,
}

/// Result of [`servo_regulate`].
#[derive(Debug, Clone)]
pub struct ServoOutcome {
    pub hand: HandState,
    pub trace: Vec<ServoStep>,
    pub converged: bool,
    /// Leader feature at the returned hand state.
    pub feature: TactileFeature,
}

/// Regulates the leader feature by moving the palm only.
///
/// Stops once the feature is within tolerance or after `max_iters` corrective
/// steps. On timeout the hand is returned at the last pose where the leader
/// was in contact, so a loop that chatters across the contact edge of a flat
/// face still ends touching.
pub fn servo_regulate(
    shape: &ShapeModel,
    hand: &HandState,
    gains: &ServoGains,
    jac: &TactileJacobian,
    gel: &GelPad,
    max_iters: usize,
) -> Result<ServoOutcome> {
    gains.validate(gel)?;
    jac.validate()?;
    let mut hand = *hand;
    let mut trace = Vec::new();
    let mut previous: Option<Vector3<f64>> = None;
    let mut lost = 0;
    let mut last_contact: Option<(HandState, TactileFeature)> = None;
    for iteration in 0..=max_iters {
        let feature = extract_tactile_feature(&render_height_map(shape, &hand.leader_pose(), gel));
        let delta = gains.delta(&feature);
        let twist = match delta {
            None => {
                lost += 1;
                if lost >= MAX_LOST_ITERATIONS {
                    return Err(Error::ContactLost {
                        iterations: iteration + 1,
                    });
                }
                previous = None;
                Twist {
                    d_x: gains.search_step,
                    ..Twist::default()
                }
            }
            Some(d) => {
                lost = 0;
                last_contact = Some((hand, feature));
                if gains.converged(&d) {
                    return Ok(ServoOutcome {
                        hand,
                        trace,
                        converged: true,
                        feature,
                    });
                }
                let t = palm_twist(&d, previous.as_ref(), jac, gains)?;
                previous = Some(d);
                t
            }
        };
        if iteration == max_iters {
            break;
        }
        hand.apply_leader_twist(&twist);
        trace.push(ServoStep {
            iteration,
            delta,
            twist,
        });
    }
    match last_contact {
        Some((hand, feature)) => Ok(ServoOutcome {
            hand,
            trace,
            converged: false,
            feature,
        }),
        None => Err(Error::ContactLost {
            iterations: max_iters + 1,
        }),
    }
}

/// One open-loop correction of each follower that is in contact.
///
/// The palm is not moved. Corrections use the same Jacobian form as the
/// leader, without the derivative term, and are clamped to the template bounds.
pub fn follower_adapt(
    shape: &ShapeModel,
    hand: &HandState,
    gains: &ServoGains,
    jac: &TactileJacobian,
    gel: &GelPad,
) -> Result<HandState> {
    let mut out = *hand;
    for i in 0..2 {
        let f = extract_tactile_feature(&render_height_map(shape, &hand.follower_pose(i), gel));
        if let Some(d) = gains.delta(&f) {
            let t = palm_twist(&d, None, jac, gains)?;
            out.adapt_follower(
                i,
                &Adaptation {
                    d_x: t.d_x,
                    theta_y: t.theta_y,
                    theta_z: t.theta_z,
                },
            );
        }
    }
    Ok(out)
}

/// CSV of a servo trace: iteration, feature error and applied twist.
pub fn trace_csv(trace: &[ServoStep]) -> String {
    let mut s = String::from("iteration,dx,dy,dc,theta_y,theta_z,d_x\n");
    for step in trace {
        let d = step.delta.map_or([f64::NAN; 3], |d| [d.x, d.y, d.z]);
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.1},{:.8},{:.8},{:.8}",
            step.iteration, d[0], d[1], d[2], step.twist.theta_y, step.twist.theta_z, step.twist.d_x
        );
    }
    s
}
