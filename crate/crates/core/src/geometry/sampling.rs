use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PointCloud, Provenance, ShapeModel, TriMesh, Vec3};
use crate::error::{Error, Result};

const PROJECTION_TOL: f64 = 1e-9;
const PROJECTION_ITERS: usize = 30;

/// Area-weighted uniform samples on the triangles of `mesh`.
pub fn sample_mesh_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if mesh.is_empty() {
        return Err(Error::InvalidArgument("cannot sample an empty mesh".into()));
    }
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).collect();
    let pick =
        WeightedIndex::new(&areas).map_err(|e| Error::InvalidArgument(format!("mesh has no usable area: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud::new();
    for _ in 0..n {
        let [a, b, c] = mesh.triangle(pick.sample(&mut rng));
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        cloud.push(p, Provenance::Visual)?;
    }
    Ok(cloud)
}

/// Samples on the zero set of an analytic shape.
///
/// Candidates are drawn uniformly in a thin shell around the surface (by
/// rejection from the bounding box) and then projected onto the surface with
/// Newton steps along the SDF gradient.
pub fn sample_shape_surface(shape: &ShapeModel, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let bounds = shape.bounding_box();
    let shell = bounds.extent().min() * 0.02;
    let b = bounds.inflated(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud::new();
    let max_draws = n.saturating_mul(20_000).max(1_000_000);
    let mut draws = 0usize;
    while cloud.len() < n {
        draws += 1;
        if draws > max_draws {
            return Err(Error::DegenerateGeometry("surface sampling did not converge".into()));
        }
        let p = Vec3::from_fn(|i, _| rng.random_range(b.min[i]..b.max[i]));
        if shape.distance(&p).abs() > shell {
            continue;
        }
        if let Some(q) = project(shape, p) {
            cloud.push(q, Provenance::Visual)?;
        }
    }
    Ok(cloud)
}

fn project(shape: &ShapeModel, mut p: Vec3) -> Option<Vec3> {
    let h = 1e-7;
    for _ in 0..PROJECTION_ITERS {
        let d = shape.distance(&p);
        if d.abs() < PROJECTION_TOL {
            return Some(p);
        }
        let g = Vec3::from_fn(|i, _| {
            let mut e = Vec3::zeros();
            e[i] = h;
            (shape.distance(&(p + e)) - shape.distance(&(p - e))) / (2.0 * h)
        });
        let g2 = g.norm_squared();
        if g2 < 1e-18 {
            return None;
        }
        p -= g * (d / g2);
    }
    None
}
