use nalgebra::{Matrix3, Rotation3, Translation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{ray_march, PointCloud, Pose, Provenance, ShapeModel, UnitVec3, Vec3};

/// Farthest depth a pixel ray is traced.
pub const MAX_DEPTH: f64 = 5.0;

/// Pinhole depth camera. The camera frame looks along +z with +x right and +y down.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pose: Pose,
    width: usize,
    height: usize,
    fov_y: f64,
    depth_noise: f64,
}

impl CameraModel {
    pub fn new(pose: Pose, width: usize, height: usize, fov_y: f64, depth_noise: f64) -> Result<Self> {
        if width < 8 || height < 8 {
            return Err(Error::InvalidArgument(format!(
                "camera image must be at least 8x8, got {width}x{height}"
            )));
        }
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!("field of view {fov_y} outside (0, pi)")));
        }
        if !(depth_noise >= 0.0 && depth_noise.is_finite()) {
            return Err(Error::InvalidArgument("depth noise must be non-negative".into()));
        }
        Ok(Self {
            pose,
            width,
            height,
            fov_y,
            depth_noise,
        })
    }

    /// Camera at `eye` looking at `target`, with image-up as close to `up` as possible.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        width: usize,
        height: usize,
        fov_y: f64,
        depth_noise: f64,
    ) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::InvalidArgument("camera eye and target coincide".into()));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidArgument(
                "camera up vector parallel to view direction".into(),
            ));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[right, down, forward]));
        let pose = Pose::from_parts(Translation3::from(eye), UnitQuaternion::from_rotation_matrix(&rot));
        Self::new(pose, width, height, fov_y, depth_noise)
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation.vector
    }

    pub fn view_dir(&self) -> UnitVec3 {
        UnitVec3::new_normalize(self.pose.rotation * Vec3::z())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fov_y(&self) -> f64 {
        self.fov_y
    }

    pub fn depth_noise(&self) -> f64 {
        self.depth_noise
    }

    fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.fov_y).tan()
    }

    /// World-frame ray direction through the center of pixel (row, col).
    pub fn pixel_ray(&self, row: usize, col: usize) -> UnitVec3 {
        let f = self.focal();
        let x = (col as f64 + 0.5 - 0.5 * self.width as f64) / f;
        let y = (row as f64 + 0.5 - 0.5 * self.height as f64) / f;
        UnitVec3::new_normalize(self.pose.rotation * Vec3::new(x, y, 1.0))
    }
}

/// Back-projected depth image of the camera-facing surface.
///
/// One ray per pixel; each hit is perturbed along its ray by Gaussian depth
/// noise. Occluded and back-facing surface never appears because only the
/// first crossing is kept.
pub fn render_partial_view(shape: &ShapeModel, camera: &CameraModel, seed: u64) -> Result<PointCloud> {
    let eye = camera.position();
    if shape.distance(&eye) <= 0.0 {
        return Err(Error::InvalidArgument("camera is inside the object".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, camera.depth_noise).expect("validated noise");
    let mut cloud = PointCloud::new();
    for row in 0..camera.height {
        for col in 0..camera.width {
            let dir = camera.pixel_ray(row, col);
            if let Some(hit) = ray_march(shape, &eye, &dir, MAX_DEPTH) {
                let depth = (hit - eye).norm()
                    + if camera.depth_noise > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                cloud.push(eye + dir.as_ref() * depth, Provenance::Visual)?;
            }
        }
    }
    if cloud.is_empty() {
        return Err(Error::EmptyView);
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sdf_normal;

    fn front_camera(target: Vec3, noise: f64) -> CameraModel {
        CameraModel::look_at(
            Vec3::new(0.5, 0.0, 0.1),
            target,
            Vec3::z(),
            64,
            64,
            30f64.to_radians(),
            noise,
        )
        .unwrap()
    }

    #[test]
    fn invalid_cameras_rejected() {
        assert!(CameraModel::new(Pose::identity(), 4, 64, 0.5, 0.0).is_err());
        assert!(CameraModel::new(Pose::identity(), 64, 64, 3.2, 0.0).is_err());
        assert!(CameraModel::new(Pose::identity(), 64, 64, 0.5, -1.0).is_err());
    }

    #[test]
    fn look_at_frame() {
        let cam = front_camera(Vec3::new(0.0, 0.0, 0.1), 0.0);
        let v = cam.view_dir();
        assert!((v.into_inner() - (-Vec3::x())).norm() < 1e-12);
        // Image up is world +z, so camera +y (down) is world -z.
        assert!((cam.pose().rotation * Vec3::y() + Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn noiseless_view_lies_on_front_surface() {
        let sphere = ShapeModel::sphere(0.05, Vec3::new(0.0, 0.0, 0.1)).unwrap();
        let cam = front_camera(Vec3::new(0.0, 0.0, 0.1), 0.0);
        let cloud = render_partial_view(&sphere, &cam, 0).unwrap();
        assert!(cloud.len() > 100);
        let view = cam.view_dir();
        for p in cloud.points() {
            assert!(sphere.distance(p).abs() < 1e-5);
            assert!((p - cam.position()).dot(&view) > 0.0);
            // Front hemisphere only.
            assert!(p.x > 0.0);
        }
        assert!(cloud.tags().iter().all(|t| *t == Provenance::Visual));
    }

    #[test]
    fn camera_looking_away_sees_nothing() {
        let sphere = ShapeModel::sphere(0.05, Vec3::new(0.0, 0.0, 0.1)).unwrap();
        let cam = front_camera(Vec3::new(1.0, 0.0, 0.1), 0.0);
        assert!(matches!(render_partial_view(&sphere, &cam, 0), Err(Error::EmptyView)));
    }

    #[test]
    fn camera_inside_object_rejected() {
        let sphere = ShapeModel::sphere(1.0, Vec3::zeros()).unwrap();
        let cam = front_camera(Vec3::zeros(), 0.0);
        assert!(render_partial_view(&sphere, &cam, 0).is_err());
    }

    #[test]
    fn box_view_has_no_back_faces() {
        let b = ShapeModel::cuboid(Vec3::new(0.04, 0.03, 0.05), Vec3::new(0.0, 0.0, 0.1)).unwrap();
        let cam = CameraModel::look_at(
            Vec3::new(0.35, 0.3, 0.3),
            Vec3::new(0.0, 0.0, 0.1),
            Vec3::z(),
            64,
            64,
            30f64.to_radians(),
            0.0,
        )
        .unwrap();
        let cloud = render_partial_view(&b, &cam, 0).unwrap();
        let eye = cam.position();
        let mut faces = std::collections::BTreeSet::new();
        for p in cloud.points() {
            // Analytic face normal: dominant axis of the scaled local offset.
            let q = p - Vec3::new(0.0, 0.0, 0.1);
            let s = q.component_div(&Vec3::new(0.04, 0.03, 0.05));
            let axis = s.iamax();
            let mut n = Vec3::zeros();
            n[axis] = s[axis].signum();
            faces.insert((axis, s[axis] > 0.0));
            let ray = (p - eye).normalize();
            assert!(n.dot(&ray) <= 0.0, "back face hit at {p:?}");
            let fd = sdf_normal(&b, p).unwrap();
            assert!(fd.dot(&ray) <= 1e-6);
        }
        // A diagonal view sees exactly three faces.
        assert_eq!(faces.len(), 3);
    }

    #[test]
    fn noisy_view_is_seeded() {
        let sphere = ShapeModel::sphere(0.05, Vec3::new(0.0, 0.0, 0.1)).unwrap();
        let cam = front_camera(Vec3::new(0.0, 0.0, 0.1), 0.0005);
        let a = render_partial_view(&sphere, &cam, 3).unwrap();
        let b = render_partial_view(&sphere, &cam, 3).unwrap();
        let c = render_partial_view(&sphere, &cam, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let rms = (a.points().iter().map(|p| sphere.distance(p).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
        assert!(rms > 0.0002 && rms < 0.0008, "rms {rms}");
    }
}
