use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;

use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

/// Exact nearest-neighbour index over a fixed point set.
pub struct NearestNeighbors {
    tree: ImmutableKdTree<f64, u32, 3, 32>,
}

impl NearestNeighbors {
    /// Returns `None` for an empty point set.
    pub fn new(points: &[Vec3]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Some(Self {
            tree: ImmutableKdTree::new_from_slice(&raw),
        })
    }

    /// Index of and Euclidean distance to the nearest stored point.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        let nn = self.tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        (nn.item as usize, nn.distance.sqrt())
    }
}

fn mean_nearest(from: &[Vec3], to: &NearestNeighbors) -> f64 {
    from.iter().map(|p| to.nearest(p).1).sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance in millimeters: the average of the mean
/// nearest-neighbour distances a→b and b→a.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let (ta, tb) = match (NearestNeighbors::new(a.points()), NearestNeighbors::new(b.points())) {
        (Some(ta), Some(tb)) => (ta, tb),
        _ => return Err(Error::InvalidArgument("chamfer distance needs non-empty clouds".into())),
    };
    let ab = mean_nearest(a.points(), &tb);
    let ba = mean_nearest(b.points(), &ta);
    Ok(0.5 * (ab + ba) * 1000.0)
}
