use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erf;

use super::ExplorationConfig;
use crate::error::{Error, Result};
use crate::geometry::{NearestNeighbors, PointCloud, TriMesh, Vec3};
use crate::gpis::GpisModel;

/// Mesh vertices eligible as touch queries, in vertex order.
///
/// A vertex qualifies when it is farther than the exclusion radius from every
/// observed point, lies inside the workspace z range and faces away from the
/// camera according to the posterior mean gradient. An empty result means
/// the reachable unseen surface has been covered.
pub fn candidate_set(
    model: &GpisModel,
    mesh: &TriMesh,
    observed: &PointCloud,
    camera_position: &Vec3,
    cfg: &ExplorationConfig,
) -> Result<Vec<Vec3>> {
    if mesh.vertices.is_empty() {
        return Err(Error::InvalidArgument("candidate search needs a non-empty mesh".into()));
    }
    let nn = NearestNeighbors::new(observed.points());
    let [z_lo, z_hi] = cfg.z_bounds;
    let out = mesh
        .vertices
        .iter()
        .filter(|v| v.z >= z_lo && v.z <= z_hi)
        .filter(|v| nn.as_ref().is_none_or(|nn| nn.nearest(v).1 > cfg.exclusion_radius))
        .filter(|v| model.mean_gradient(v).dot(&(camera_position - *v)) < 0.0)
        .copied()
        .collect();
    Ok(out)
}

/// `E[max(y − g_best, 0)]` for `y ~ N(mu, sigma²)`.
pub fn ei_closed_form(mu: f64, sigma: f64, g_best: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - g_best).max(0.0);
    }
    let g = (mu - g_best) / sigma;
    let cdf = 0.5 * (1.0 + erf(g / SQRT_2));
    let pdf = (-0.5 * g * g).exp() / (2.0 * PI).sqrt();
    sigma * (g * cdf + pdf)
}

/// Expected improvement of the posterior at `x` over `g_best`.
pub fn expected_improvement(model: &GpisModel, x: &Vec3, g_best: f64) -> Result<f64> {
    let (mu, var) = model.predict(x)?;
    Ok(ei_closed_form(mu, var.max(0.0).sqrt(), g_best))
}

/// Candidate with the largest expected improvement; ties go to the lowest index.
pub fn select_query(model: &GpisModel, candidates: &[Vec3], g_best: f64) -> Result<Vec3> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to select from".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let ei = expected_improvement(model, c, g_best)?;
        if ei > best.1 {
            best = (i, ei);
        }
    }
    Ok(candidates[best.0])
}
