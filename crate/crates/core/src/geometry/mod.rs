//! Analytic shapes, poses, meshes, level-set extraction and point-cloud metrics.
//!
//! Everything here works in meters. The only place millimeters appear is the
//! return value of [`chamfer_distance`].

mod chamfer;
mod marching_cubes;
mod mc_tables;
mod mesh;
mod sampling;
mod shape;

pub use chamfer::{chamfer_distance, NearestNeighbors};
pub use marching_cubes::{marching_cubes, marching_cubes_with_scalar};
pub use mesh::{PointCloud, Provenance, TriMesh};
pub use sampling::{sample_mesh_surface, sample_shape_surface};
pub use shape::{ray_march, sdf_eval, sdf_normal, Primitive, ShapeModel};

use nalgebra::{Isometry3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;
/// Rigid transform: translation plus unit quaternion.
pub type Pose = Isometry3<f64>;

/// Finite-difference step used for SDF normals.
pub const NORMAL_FD_STEP: f64 = 1e-5;
/// Relative inflation applied per side when deriving extraction bounds from a cloud.
pub const BOUNDS_INFLATION: f64 = 0.15;

pub(crate) fn ensure_finite(p: &Vec3, what: &str) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} has non-finite coordinates")))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Grows every side by `fraction` of the largest extent.
    ///
    /// Using the largest extent keeps nearly planar clouds from producing a
    /// zero-thickness box.
    pub fn inflated(&self, fraction: f64) -> Self {
        let margin = self.extent().max() * fraction;
        let m = Vec3::repeat(margin);
        Aabb::new(self.min - m, self.max + m)
    }

    pub fn union(&self, other: &Aabb) -> Self {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn is_degenerate(&self) -> bool {
        let e = self.extent();
        !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) || !e.iter().all(|v| v.is_finite())
    }
}
