use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_march, PointCloud, Pose, Provenance, ShapeModel, UnitVec3, Vec3};

/// Penetration (meters) above which a pixel counts as in contact.
pub const CONTACT_THRESHOLD: f64 = 1e-4;

/// Gel pad geometry.
///
/// In the fingertip frame the gel surface is the plane x = 0 and local +x is
/// the inward normal pointing into the touched object. Image columns run
/// along local -y and rows along local +z, centered on the frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GelPad {
    /// Extent along image columns (meters).
    pub width: f64,
    /// Extent along image rows (meters).
    pub height: f64,
    pub cols: usize,
    pub rows: usize,
    pub max_deformation: f64,
}

impl Default for GelPad {
    fn default() -> Self {
        Self {
            width: 0.016,
            height: 0.012,
            cols: 32,
            rows: 24,
            max_deformation: 0.0012,
        }
    }
}

impl GelPad {
    pub fn new(width: f64, height: f64, cols: usize, rows: usize, max_deformation: f64) -> Result<Self> {
        let gel = Self {
            width,
            height,
            cols,
            rows,
            max_deformation,
        };
        gel.validate()?;
        Ok(gel)
    }

    /// Full-resolution 320×240 pad with the default sensing area.
    pub fn full_resolution() -> Self {
        Self {
            cols: 320,
            rows: 240,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols < 8 || self.rows < 8 {
            return Err(Error::InvalidArgument(format!(
                "gel resolution must be at least 8x8, got {}x{}",
                self.cols, self.rows
            )));
        }
        if !(self.max_deformation > 0.0 && self.max_deformation.is_finite()) {
            return Err(Error::InvalidArgument("gel max deformation must be positive".into()));
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(Error::InvalidArgument("gel sensing area must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Pixel spacing (along columns, along rows).
    pub fn pitch(&self) -> (f64, f64) {
        (self.width / self.cols as f64, self.height / self.rows as f64)
    }

    /// Image center in (col, row) pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.cols as f64 - 1.0), 0.5 * (self.rows as f64 - 1.0))
    }

    /// Fingertip-frame position of the center of pixel (row, col) on the gel plane.
    pub fn pixel_local(&self, row: usize, col: usize) -> Vec3 {
        self.subpixel_local(col as f64, row as f64)
    }

    /// Fingertip-frame position of a fractional (col, row) image coordinate.
    pub fn subpixel_local(&self, col: f64, row: f64) -> Vec3 {
        let (px, py) = self.pitch();
        let (cx, cy) = self.center();
        Vec3::new(0.0, -(col - cx) * px, (row - cy) * py)
    }
}

/// Gel penetration image with the fingertip pose that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pose: Pose,
}

impl HeightMap {
    /// Row-major values; all must be finite and non-negative.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, pose: Pose) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "height map needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "height values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            values,
            pose,
        })
    }

    pub fn zeros(rows: usize, cols: usize, pose: Pose) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            pose,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) -> Result<()> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidArgument(
                "height values must be finite and non-negative".into(),
            ));
        }
        self.values[row * self.cols + col] = v;
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// (row, col) of every pixel above the contact threshold, row-major.
    pub fn contact_pixels(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c) > CONTACT_THRESHOLD)
            .collect()
    }
}

/// Intensity centroid and contact area of a height map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TactileFeature {
    /// (x̄, ȳ) in (col, row) pixels; `None` for an all-zero map.
    pub centroid: Option<(f64, f64)>,
    pub contact_area: usize,
}

impl TactileFeature {
    pub fn in_contact(&self) -> bool {
        self.contact_area > 0 && self.centroid.is_some()
    }
}

/// Simulated gel contact with `shape` for a fingertip at `fingertip`.
pub fn render_height_map(shape: &ShapeModel, fingertip: &Pose, gel: &GelPad) -> HeightMap {
    let normal = UnitVec3::new_normalize(fingertip.rotation * Vec3::x());
    let depth = gel.max_deformation;
    let mut values = Vec::with_capacity(gel.pixel_count());
    for r in 0..gel.rows {
        for c in 0..gel.cols {
            let p = fingertip * nalgebra::Point3::from(gel.pixel_local(r, c));
            let start = p.coords - normal.as_ref() * depth;
            let h = if shape.distance(&start) <= 0.0 {
                depth
            } else {
                match ray_march(shape, &start, &normal, depth) {
                    Some(hit) => (depth - (hit - start).norm()).clamp(0.0, depth),
                    None => 0.0,
                }
            };
            values.push(h);
        }
    }
    HeightMap {
        rows: gel.rows,
        cols: gel.cols,
        values,
        pose: *fingertip,
    }
}

pub fn extract_tactile_feature(m: &HeightMap) -> TactileFeature {
    let (mut sum, mut sx, mut sy) = (0.0, 0.0, 0.0);
    let mut area = 0;
    for r in 0..m.rows {
        for c in 0..m.cols {
            let v = m.get(r, c);
            sum += v;
            sx += v * c as f64;
            sy += v * r as f64;
            if v > CONTACT_THRESHOLD {
                area += 1;
            }
        }
    }
    TactileFeature {
        centroid: (sum > 0.0).then(|| (sx / sum, sy / sum)),
        contact_area: area,
    }
}

/// World-frame surface points under the contact pixels, randomly thinned to
/// `round(ratio · contacts)` points.
pub fn height_map_to_cloud(
    m: &HeightMap,
    gel: &GelPad,
    downsample_ratio: f64,
    seed: u64,
    tag: Provenance,
) -> Result<PointCloud> {
    if !(downsample_ratio > 0.0 && downsample_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "downsample ratio {downsample_ratio} outside (0, 1]"
        )));
    }
    if m.rows != gel.rows || m.cols != gel.cols {
        return Err(Error::InvalidArgument("height map and gel resolution differ".into()));
    }
    let contacts = m.contact_pixels();
    let keep = ((downsample_ratio * contacts.len() as f64).round() as usize).min(contacts.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, contacts.len(), keep).into_vec();
    picked.sort_unstable();
    let mut cloud = PointCloud::new();
    for i in picked {
        let (r, c) = contacts[i];
        let local = gel.pixel_local(r, c) - Vec3::x() * m.get(r, c);
        let world = m.pose * nalgebra::Point3::from(local);
        cloud.push(world.coords, tag)?;
    }
    Ok(cloud)
}
