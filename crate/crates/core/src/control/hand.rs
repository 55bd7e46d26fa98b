use nalgebra::{Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_march, sdf_normal, Pose, ShapeModel, UnitVec3, Vec3};

/// Distance above the approach point from which contact is sought.
pub const APPROACH_STANDOFF: f64 = 0.01;
/// Farthest the approach ray travels looking for the surface.
pub const APPROACH_REACH: f64 = 0.05;

/// Hand geometry and adaptation limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandTemplate {
    /// Distance from the palm origin to the gel plane along the finger axis.
    pub palm_standoff: f64,
    /// Lateral distance of each follower from the leader.
    pub follower_spacing: f64,
    /// Follower adaptation bound along its finger axis (meters).
    pub adapt_translation: f64,
    /// Follower adaptation bound about its y and z axes (radians).
    pub adapt_rotation: f64,
    /// Leader penetration targeted when contact is established.
    pub press_depth: f64,
}

impl Default for HandTemplate {
    fn default() -> Self {
        Self {
            palm_standoff: 0.08,
            follower_spacing: 0.022,
            adapt_translation: 0.008,
            adapt_rotation: 20f64.to_radians(),
            press_depth: 0.0006,
        }
    }
}

impl HandTemplate {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("palm_standoff", self.palm_standoff),
            ("follower_spacing", self.follower_spacing),
            ("adapt_translation", self.adapt_translation),
            ("adapt_rotation", self.adapt_rotation),
            ("press_depth", self.press_depth),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfiguration(format!(
                    "hand {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn leader_offset(&self) -> Pose {
        Pose::translation(self.palm_standoff, 0.0, 0.0)
    }

    pub fn follower_offset(&self, i: usize) -> Pose {
        let side = if i == 0 { 1.0 } else { -1.0 };
        Pose::translation(self.palm_standoff, 0.0, side * self.follower_spacing)
    }
}

/// Follower displacement in its own fingertip frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    pub d_x: f64,
    pub theta_y: f64,
    pub theta_z: f64,
}

impl Adaptation {
    pub fn pose(&self) -> Pose {
        Pose::from_parts(
            Translation3::new(self.d_x, 0.0, 0.0),
            local_rotation(self.theta_y, self.theta_z),
        )
    }
}

pub(crate) fn local_rotation(theta_y: f64, theta_z: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::y_axis(), theta_y)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta_z)
}

/// Palm pose plus the rigid leader and two adaptive followers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandState {
    pub palm: Pose,
    pub template: HandTemplate,
    pub followers: [Adaptation; 2],
}

impl HandState {
    pub fn new(palm: Pose, template: HandTemplate) -> Self {
        Self {
            palm,
            template,
            followers: [Adaptation::default(); 2],
        }
    }

    /// Hand whose leader fingertip sits at `leader`.
    pub fn from_leader(leader: Pose, template: HandTemplate) -> Self {
        Self::new(leader * template.leader_offset().inverse(), template)
    }

    pub fn leader_pose(&self) -> Pose {
        self.palm * self.template.leader_offset()
    }

    pub fn follower_pose(&self, i: usize) -> Pose {
        self.palm * self.template.follower_offset(i) * self.followers[i].pose()
    }

    /// Leader inward normal in world coordinates.
    pub fn leader_normal(&self) -> UnitVec3 {
        UnitVec3::new_normalize(self.leader_pose().rotation * Vec3::x())
    }

    /// Moves the palm so the leader frame undergoes `twist`, expressed in the
    /// leader frame and applied about the leader gel center.
    pub fn apply_leader_twist(&mut self, twist: &Twist) {
        let motion = Pose::from_parts(
            Translation3::new(twist.d_x, 0.0, 0.0),
            local_rotation(twist.theta_y, twist.theta_z),
        );
        let leader = self.leader_pose() * motion;
        self.palm = leader * self.template.leader_offset().inverse();
    }

    pub fn translate(&mut self, world: &Vec3) {
        self.palm.translation.vector += world;
    }

    /// Adds `delta` to follower `i` and clamps to the template bounds.
    pub fn adapt_follower(&mut self, i: usize, delta: &Adaptation) {
        let t = self.template.adapt_translation;
        let r = self.template.adapt_rotation;
        let a = &mut self.followers[i];
        a.d_x = (a.d_x + delta.d_x).clamp(-t, t);
        a.theta_y = (a.theta_y + delta.theta_y).clamp(-r, r);
        a.theta_z = (a.theta_z + delta.theta_z).clamp(-r, r);
    }
}

/// Motion of a fingertip frame: rotations about its y and z axes and a
/// translation along its inward normal.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Twist {
    pub theta_y: f64,
    pub theta_z: f64,
    pub d_x: f64,
}

impl Twist {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta_y, self.theta_z, self.d_x)
    }
}

/// Places the hand with the leader pressed into the surface near `approach`.
///
/// The leader's inward normal opposes the surface normal and its frame z axis
/// is world up projected onto the tangent plane.
pub fn establish_contact(shape: &ShapeModel, approach: &Vec3, template: &HandTemplate) -> Result<HandState> {
    template.validate()?;
    let n0 = sdf_normal(shape, approach)?;
    let start = approach + n0.as_ref() * APPROACH_STANDOFF;
    let inward = UnitVec3::new_normalize(-n0.into_inner());
    let hit = if shape.distance(&start) <= 0.0 {
        None
    } else {
        ray_march(shape, &start, &inward, APPROACH_REACH)
    };
    let hit = hit.ok_or(Error::ApproachFailed {
        max_distance: APPROACH_REACH,
    })?;
    let n = sdf_normal(shape, &hit)?.into_inner();
    let x = -n;
    let mut z = Vec3::z() - x * x.dot(&Vec3::z());
    if z.norm() < 1e-6 {
        z = Vec3::x() - x * x.dot(&Vec3::x());
    }
    let z = z.normalize();
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    let leader = Pose::from_parts(
        Translation3::from(hit + x * template.press_depth),
        UnitQuaternion::from_rotation_matrix(&rot),
    );
    Ok(HandState::from_leader(leader, *template))
}
