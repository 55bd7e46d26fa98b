use nalgebra::{Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::control::HandTemplate;
use crate::error::{Error, Result};
use crate::explorer::ExplorationConfig;
use crate::geometry::{Pose, Primitive, ShapeModel, Vec3};
use crate::sensing::CameraModel;

/// Analytic shape in a scene file. Lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Sphere {
        radius: f64,
        #[serde(default)]
        pose: PoseSpec,
    },
    Box {
        half_extents: [f64; 3],
        #[serde(default)]
        pose: PoseSpec,
    },
    Cylinder {
        radius: f64,
        half_height: f64,
        #[serde(default)]
        pose: PoseSpec,
    },
    Capsule {
        radius: f64,
        half_length: f64,
        #[serde(default)]
        pose: PoseSpec,
    },
    Superellipsoid {
        radii: [f64; 3],
        e1: f64,
        e2: f64,
        #[serde(default)]
        pose: PoseSpec,
    },
    Union {
        members: Vec<ShapeSpec>,
        #[serde(default)]
        pose: PoseSpec,
    },
}

/// Position plus rotation vector (axis times angle in radians).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpec {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
}

impl PoseSpec {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: [x, y, z],
            rotation: [0.0; 3],
        }
    }

    pub fn to_pose(&self) -> Pose {
        Pose::from_parts(
            Translation3::from(Vec3::from(self.position)),
            UnitQuaternion::from_scaled_axis(Vec3::from(self.rotation)),
        )
    }
}

impl ShapeSpec {
    pub fn build(&self) -> Result<ShapeModel> {
        let (primitive, pose) = match self {
            ShapeSpec::Sphere { radius, pose } => (Primitive::Sphere { radius: *radius }, pose),
            ShapeSpec::Box { half_extents, pose } => (
                Primitive::Box {
                    half_extents: Vec3::from(*half_extents),
                },
                pose,
            ),
            ShapeSpec::Cylinder {
                radius,
                half_height,
                pose,
            } => (
                Primitive::Cylinder {
                    radius: *radius,
                    half_height: *half_height,
                },
                pose,
            ),
            ShapeSpec::Capsule {
                radius,
                half_length,
                pose,
            } => (
                Primitive::Capsule {
                    radius: *radius,
                    half_length: *half_length,
                },
                pose,
            ),
            ShapeSpec::Superellipsoid { radii, e1, e2, pose } => (
                Primitive::Superellipsoid {
                    radii: Vec3::from(*radii),
                    e1: *e1,
                    e2: *e2,
                },
                pose,
            ),
            ShapeSpec::Union { members, pose } => (
                Primitive::Union(members.iter().map(ShapeSpec::build).collect::<Result<_>>()?),
                pose,
            ),
        };
        ShapeModel::new(primitive, pose.to_pose())
    }

    /// One-line parameter summary.
    pub fn describe(&self) -> String {
        let at = |p: &PoseSpec| {
            let [x, y, z] = p.position;
            format!("at ({x}, {y}, {z}) m")
        };
        match self {
            ShapeSpec::Sphere { radius, pose } => format!("sphere radius {radius} m {}", at(pose)),
            ShapeSpec::Box { half_extents, pose } => format!("box half extents {half_extents:?} m {}", at(pose)),
            ShapeSpec::Cylinder {
                radius,
                half_height,
                pose,
            } => format!("cylinder radius {radius} m, half height {half_height} m {}", at(pose)),
            ShapeSpec::Capsule {
                radius,
                half_length,
                pose,
            } => format!("capsule radius {radius} m, half length {half_length} m {}", at(pose)),
            ShapeSpec::Superellipsoid { radii, e1, e2, pose } => {
                format!("superellipsoid radii {radii:?} m, e1 {e1}, e2 {e2} {}", at(pose))
            }
            ShapeSpec::Union { members, pose } => {
                let parts: Vec<String> = members.iter().map(ShapeSpec::describe).collect();
                format!("union {} [{}]", at(pose), parts.join("; "))
            }
        }
    }
}

/// Pinhole camera placement. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    pub width: usize,
    pub height: usize,
    pub fov_y_deg: f64,
    pub depth_noise: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            eye: [0.45, 0.0, 0.25],
            target: [0.0, 0.0, 0.1],
            up: [0.0, 0.0, 1.0],
            width: 64,
            height: 48,
            fov_y_deg: 30.0,
            depth_noise: 0.0005,
        }
    }
}

impl CameraSpec {
    pub fn build(&self) -> Result<CameraModel> {
        CameraModel::look_at(
            Vec3::from(self.eye),
            Vec3::from(self.target),
            Vec3::from(self.up),
            self.width,
            self.height,
            self.fov_y_deg.to_radians(),
            self.depth_noise,
        )
    }
}

/// A complete experiment: object, camera, hand and exploration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub shape: ShapeSpec,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub hand: HandTemplate,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    /// Seeds used by `compare`; `run` uses `exploration.seed`.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl SceneSpec {
    /// Parses a scene, naming the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scene: SceneSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |field: &str, e: Error| Error::Config {
            field: field.into(),
            message: e.to_string(),
        };
        self.shape.build().map_err(|e| field("shape", e))?;
        self.camera.build().map_err(|e| field("camera", e))?;
        self.hand.validate().map_err(|e| field("hand", e))?;
        self.exploration.validate().map_err(|e| field("exploration", e))?;
        if self.seeds.is_empty() {
            return Err(Error::Config {
                field: "seeds".into(),
                message: "need at least one seed".into(),
            });
        }
        Ok(())
    }
}

fn scene(name: &str, shape: ShapeSpec) -> SceneSpec {
    SceneSpec {
        name: name.into(),
        shape,
        camera: CameraSpec::default(),
        hand: HandTemplate::default(),
        exploration: ExplorationConfig::default(),
        seeds: default_seeds(),
    }
}

/// The six bundled scenes: parameterized stand-ins for household objects,
/// all centered 0.1 m above the table inside the workspace z range.
pub fn builtin_scenes() -> Vec<SceneSpec> {
    let center = PoseSpec::at(0.0, 0.0, 0.1);
    let quarter = std::f64::consts::FRAC_PI_2;
    vec![
        scene(
            "sphere50",
            ShapeSpec::Sphere {
                radius: 0.05,
                pose: center,
            },
        ),
        scene(
            "can",
            ShapeSpec::Cylinder {
                radius: 0.033,
                half_height: 0.05,
                pose: center,
            },
        ),
        scene(
            "box",
            ShapeSpec::Box {
                half_extents: [0.03, 0.045, 0.05],
                pose: PoseSpec {
                    position: [0.0, 0.0, 0.1],
                    rotation: [0.0, 0.0, 0.5],
                },
            },
        ),
        scene(
            "bottle",
            ShapeSpec::Superellipsoid {
                radii: [0.035, 0.035, 0.06],
                e1: 0.5,
                e2: 1.0,
                pose: center,
            },
        ),
        scene(
            "capsule",
            ShapeSpec::Capsule {
                radius: 0.03,
                half_length: 0.03,
                pose: PoseSpec {
                    position: [0.0, 0.0, 0.1],
                    rotation: [quarter, 0.0, 0.0],
                },
            },
        ),
        scene(
            "mustard",
            ShapeSpec::Union {
                members: vec![
                    ShapeSpec::Superellipsoid {
                        radii: [0.03, 0.045, 0.045],
                        e1: 0.6,
                        e2: 0.8,
                        pose: PoseSpec::at(0.0, 0.0, -0.005),
                    },
                    ShapeSpec::Cylinder {
                        radius: 0.012,
                        half_height: 0.012,
                        pose: PoseSpec::at(0.0, 0.0, 0.045),
                    },
                ],
                pose: PoseSpec {
                    position: [0.0, 0.0, 0.1],
                    rotation: [0.0, 0.0, 0.4],
                },
            },
        ),
    ]
}

/// Bundled scene by name.
pub fn builtin_scene(name: &str) -> Result<SceneSpec> {
    let all = builtin_scenes();
    let names = all.iter().map(|s| s.name.clone()).collect();
    all.into_iter().find(|s| s.name == name).ok_or(Error::NotFound {
        name: name.into(),
        available: names,
    })
}

/// One line per bundled scene: name and shape parameters.
pub fn shapes_list() -> String {
    builtin_scenes()
        .iter()
        .map(|s| format!("{:<10} {}\n", s.name, s.shape.describe()))
        .collect()
}

/// Shape parameters and camera placement of a bundled scene.
pub fn shapes_describe(name: &str) -> Result<String> {
    let s = builtin_scene(name)?;
    let c = &s.camera;
    Ok(format!(
        "{}\nshape: {}\ncamera: eye {:?} m, target {:?} m, {}x{} px, fov {} deg\n",
        s.name,
        s.shape.describe(),
        c.eye,
        c.target,
        c.width,
        c.height,
        c.fov_y_deg
    ))
}
