use super::{Aabb, Vec3};
use crate::error::{Error, Result};

/// Where a point of a fused cloud came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Visual,
    /// Sliding touch index, starting at 1.
    Touch(u32),
}

impl Provenance {
    /// Integer id used in exports: `0` for visual, `k` for touch `k`.
    pub fn id(self) -> u32 {
        match self {
            Provenance::Visual => 0,
            Provenance::Touch(k) => k,
        }
    }
}

/// World-frame points with a provenance tag per point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    tags: Vec<Provenance>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Vec3>, tag: Provenance) -> Result<Self> {
        let mut cloud = PointCloud::new();
        for p in points {
            cloud.push(p, tag)?;
        }
        Ok(cloud)
    }

    pub fn push(&mut self, p: Vec3, tag: Provenance) -> Result<()> {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("point cloud coordinates must be finite".into()));
        }
        self.points.push(p);
        self.tags.push(tag);
        Ok(())
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.tags.extend_from_slice(&other.tags);
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn tags(&self) -> &[Provenance] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec3, Provenance)> {
        self.points.iter().zip(self.tags.iter().copied())
    }

    /// Points carrying `tag`, in original order.
    pub fn filter_tag(&self, tag: Provenance) -> PointCloud {
        let mut out = PointCloud::new();
        for (p, t) in self.iter() {
            if t == tag {
                out.points.push(*p);
                out.tags.push(t);
            }
        }
        out
    }

    /// Keeps the points at `indices` (in the given order).
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            tags: indices.iter().map(|&i| self.tags[i]).collect(),
        }
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vec3 = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    pub fn translated(&self, offset: &Vec3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| p + offset).collect(),
            tags: self.tags.clone(),
        }
    }
}

/// Indexed triangle mesh with an optional per-vertex scalar channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex scalar (posterior variance for reconstructions).
    pub scalars: Option<Vec<f64>>,
}

/// Triangles with area at or below this are dropped from generated meshes.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume; positive when triangles wind counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Checks index ranges, scalar channel length and degenerate triangles.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} indexes past {n} vertices"
                )));
            }
            if self.triangle_area(t) <= MIN_TRIANGLE_AREA {
                return Err(Error::InvalidArgument(format!("triangle {t} is degenerate")));
            }
        }
        if let Some(s) = &self.scalars {
            if s.len() != n {
                return Err(Error::InvalidArgument("scalar channel length mismatch".into()));
            }
        }
        Ok(())
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let n = (b - a).cross(&(c - a));
            for &i in &self.triangles[t] {
                normals[i as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_rejects_non_finite() {
        let mut c = PointCloud::new();
        assert!(c.push(Vec3::new(f64::INFINITY, 0.0, 0.0), Provenance::Visual).is_err());
        assert!(c.is_empty());
    }

    #[test]
    fn tags_partition_cloud() {
        let mut c = PointCloud::new();
        c.push(Vec3::zeros(), Provenance::Visual).unwrap();
        c.push(Vec3::x(), Provenance::Touch(1)).unwrap();
        c.push(Vec3::y(), Provenance::Touch(2)).unwrap();
        c.push(Vec3::z(), Provenance::Touch(1)).unwrap();
        let parts = [Provenance::Visual, Provenance::Touch(1), Provenance::Touch(2)].map(|t| c.filter_tag(t).len());
        assert_eq!(parts, [1, 2, 1]);
        assert_eq!(parts.iter().sum::<usize>(), c.len());
    }

    #[test]
    fn validate_catches_bad_indices_and_degenerates() {
        let mut m = TriMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            triangles: vec![[0, 1, 2]],
            scalars: None,
        };
        m.validate().unwrap();
        m.triangles.push([0, 1, 3]);
        assert!(m.validate().is_err());
        m.triangles[1] = [0, 1, 1];
        assert!(m.validate().is_err());
    }
}
