use nalgebra::{Matrix3, Point3};
use rand::Rng;

use super::ExplorationConfig;
use crate::control::{follower_adapt, servo_regulate, HandState};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Provenance, ShapeModel, UnitVec3, Vec3};
use crate::sensing::{
    extract_tactile_feature, height_map_to_cloud, render_height_map, GelPad, HeightMap, TactileFeature,
};

/// Why a sliding touch stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedQuery,
    MaxFrames,
    ContactLost,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::ReachedQuery => "reached-query",
            Termination::MaxFrames => "max-frames",
            Termination::ContactLost => "contact-lost",
        }
    }
}

/// One regulated contact along a sliding touch.
#[derive(Debug, Clone)]
pub struct TouchFrame {
    /// Leader feature after regulation.
    pub feature: TactileFeature,
    /// Height-weighted center of the leader contact (world).
    pub contact_center: Vec3,
    /// Outward surface normal estimated from the leader contact patch.
    pub normal: UnitVec3,
    /// Contact points of every fingertip in contact, at full resolution.
    pub fragment: PointCloud,
}

/// The frames collected while sliding toward one query point.
#[derive(Debug, Clone)]
pub struct SlidingTouch {
    pub frames: Vec<TouchFrame>,
    pub query: Vec3,
    pub termination: Termination,
}

impl SlidingTouch {
    /// All frame fragments concatenated in frame order.
    pub fn cloud(&self) -> PointCloud {
        let mut out = PointCloud::new();
        for f in &self.frames {
            out.extend(&f.fragment);
        }
        out
    }
}

/// Unit tangent at `contact` pointing toward `query`: the component of
/// `query − contact` orthogonal to `normal`.
pub fn sliding_direction(query: &Vec3, contact: &Vec3, normal: &UnitVec3) -> Result<UnitVec3> {
    let v = query - contact;
    if v.norm() == 0.0 {
        return Err(Error::InvalidArgument("query coincides with the contact point".into()));
    }
    let t = v - normal.as_ref() * v.dot(normal);
    if t.norm() < 1e-9 {
        return Err(Error::DegenerateDirection);
    }
    Ok(UnitVec3::new_normalize(t))
}

fn random_tangent(normal: &UnitVec3, rng: &mut impl Rng) -> UnitVec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let t = v - normal.as_ref() * v.dot(normal);
        if t.norm() > 1e-3 {
            return UnitVec3::new_normalize(t);
        }
    }
}

/// Lifted leader contact points with their heights.
fn contact_points(m: &HeightMap, gel: &GelPad) -> Vec<(Vec3, f64)> {
    m.contact_pixels()
        .into_iter()
        .map(|(r, c)| {
            let h = m.get(r, c);
            let local = gel.pixel_local(r, c) - Vec3::x() * h;
            ((m.pose() * Point3::from(local)).coords, h)
        })
        .collect()
}

/// Least-squares plane normal of `points`, or `None` when they are (nearly) collinear.
fn plane_normal(points: &[(Vec3, f64)]) -> Option<Vec3> {
    if points.len() < 3 {
        return None;
    }
    let mean: Vec3 = points.iter().map(|(p, _)| p).sum::<Vec3>() / points.len() as f64;
    let cov: Matrix3<f64> = points.iter().map(|(p, _)| (p - mean) * (p - mean).transpose()).sum();
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    if eig.eigenvalues[order[1]] <= 1e-6 * eig.eigenvalues[order[2]] {
        return None;
    }
    Some(eig.eigenvectors.column(order[0]).into_owned())
}

fn record_frame(shape: &ShapeModel, hand: &HandState, gel: &GelPad, touch: u32) -> Result<TouchFrame> {
    let tag = Provenance::Touch(touch);
    let leader = render_height_map(shape, &hand.leader_pose(), gel);
    let feature = extract_tactile_feature(&leader);
    let contacts = contact_points(&leader, gel);
    let weight: f64 = contacts.iter().map(|(_, h)| h).sum();
    if weight <= 0.0 {
        return Err(Error::TouchFailed);
    }
    let contact_center = contacts.iter().map(|(p, h)| p * *h).sum::<Vec3>() / weight;
    let outward = -hand.leader_normal().into_inner();
    let normal = match plane_normal(&contacts) {
        Some(n) if n.dot(&outward) < 0.0 => -n,
        Some(n) => n,
        None => outward,
    };
    let mut fragment = height_map_to_cloud(&leader, gel, 1.0, 0, tag)?;
    for i in 0..2 {
        let m = render_height_map(shape, &hand.follower_pose(i), gel);
        fragment.extend(&height_map_to_cloud(&m, gel, 1.0, 0, tag)?);
    }
    Ok(TouchFrame {
        feature,
        contact_center,
        normal: UnitVec3::new_normalize(normal),
        fragment,
    })
}

/// Slides the hand over the surface toward `query`.
///
/// Each frame regulates the leader, adapts the followers, records the contact
/// and then shifts the palm by `cfg.step` along the tangent toward the query.
/// The touch ends when the leader contact center is within
/// `cfg.min_query_distance` of the query, after `cfg.max_frames` frames, or
/// when contact is lost. Losing contact before the first frame is an error.
pub fn execute_sliding_touch(
    shape: &ShapeModel,
    hand: &HandState,
    query: &Vec3,
    touch: u32,
    cfg: &ExplorationConfig,
    rng: &mut impl Rng,
) -> Result<(SlidingTouch, HandState)> {
    let gains = cfg.servo_gains();
    let mut hand = *hand;
    let mut frames = Vec::new();
    let termination = loop {
        let regulated = match servo_regulate(shape, &hand, &gains, &cfg.jacobian, &cfg.gel, cfg.servo_iterations) {
            Ok(out) => out,
            Err(Error::ContactLost { .. }) if !frames.is_empty() => break Termination::ContactLost,
            Err(Error::ContactLost { .. }) => return Err(Error::TouchFailed),
            Err(e) => return Err(e),
        };
        hand = follower_adapt(shape, &regulated.hand, &gains, &cfg.jacobian, &cfg.gel)?;
        let frame = record_frame(shape, &hand, &cfg.gel, touch)?;
        let (center, normal) = (frame.contact_center, frame.normal);
        frames.push(frame);
        if (center - query).norm() < cfg.min_query_distance {
            break Termination::ReachedQuery;
        }
        if frames.len() >= cfg.max_frames {
            break Termination::MaxFrames;
        }
        let t = match sliding_direction(query, &center, &normal) {
            Ok(t) => t,
            Err(Error::DegenerateDirection) => random_tangent(&normal, rng),
            Err(e) => return Err(e),
        };
        hand.translate(&(t.into_inner() * cfg.step));
    };
    log::debug!("touch {touch}: {} frames, {}", frames.len(), termination.label());
    Ok((
        SlidingTouch {
            frames,
            query: *query,
            termination,
        },
        hand,
    ))
}
