use super::{ensure_finite, Aabb, Pose, UnitVec3, Vec3, NORMAL_FD_STEP};
use crate::error::{Error, Result};

/// Surface convergence threshold for sphere tracing.
pub const RAY_MARCH_EPS: f64 = 1e-6;
pub const RAY_MARCH_MAX_STEPS: usize = 256;

/// Ground-truth primitive, expressed in its own local frame.
///
/// Cylinders and capsules have their axis along local z.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere {
        radius: f64,
    },
    Box {
        half_extents: Vec3,
    },
    Cylinder {
        radius: f64,
        half_height: f64,
    },
    Capsule {
        radius: f64,
        half_length: f64,
    },
    /// `radii` are the semi-axes; `e1` shapes the z profile, `e2` the xy cross-section.
    Superellipsoid {
        radii: Vec3,
        e1: f64,
        e2: f64,
    },
    /// Members are posed relative to the union's own frame.
    Union(Vec<ShapeModel>),
}

/// An analytic signed-distance object placed in the world.
///
/// Negative strictly inside, positive strictly outside.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModel {
    primitive: Primitive,
    pose: Pose,
}

impl ShapeModel {
    pub fn new(primitive: Primitive, pose: Pose) -> Result<Self> {
        validate(&primitive)?;
        Ok(Self { primitive, pose })
    }

    pub fn sphere(radius: f64, center: Vec3) -> Result<Self> {
        Self::new(
            Primitive::Sphere { radius },
            Pose::translation(center.x, center.y, center.z),
        )
    }

    pub fn cuboid(half_extents: Vec3, center: Vec3) -> Result<Self> {
        Self::new(
            Primitive::Box { half_extents },
            Pose::translation(center.x, center.y, center.z),
        )
    }

    pub fn primitive(&self) -> &Primitive {
        &self.primitive
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    /// Signed distance without argument checks. Prefer [`sdf_eval`] at API boundaries.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let local = self.pose.inverse_transform_point(&(*p).into()).coords;
        local_distance(&self.primitive, &local)
    }

    /// Conservative world-frame bounding box.
    pub fn bounding_box(&self) -> Aabb {
        let local = match &self.primitive {
            Primitive::Sphere { radius } => Aabb::new(Vec3::repeat(-radius), Vec3::repeat(*radius)),
            Primitive::Box { half_extents } => Aabb::new(-half_extents, *half_extents),
            Primitive::Cylinder { radius, half_height } => {
                let h = Vec3::new(*radius, *radius, *half_height);
                Aabb::new(-h, h)
            }
            Primitive::Capsule { radius, half_length } => {
                let h = Vec3::new(*radius, *radius, half_length + radius);
                Aabb::new(-h, h)
            }
            Primitive::Superellipsoid { radii, .. } => Aabb::new(-radii, *radii),
            Primitive::Union(members) => members
                .iter()
                .map(ShapeModel::bounding_box)
                .reduce(|a, b| a.union(&b))
                .expect("validated non-empty union"),
        };
        transform_aabb(&self.pose, &local)
    }
}

fn transform_aabb(pose: &Pose, b: &Aabb) -> Aabb {
    let corners = (0..8).map(|i| {
        let c = Vec3::new(
            if i & 1 == 0 { b.min.x } else { b.max.x },
            if i & 2 == 0 { b.min.y } else { b.max.y },
            if i & 4 == 0 { b.min.z } else { b.max.z },
        );
        pose.transform_point(&c.into()).coords
    });
    let pts: Vec<Vec3> = corners.collect();
    Aabb::from_points(&pts).expect("eight corners")
}

fn validate(p: &Primitive) -> Result<()> {
    let positive = |v: f64, what: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} must be strictly positive, got {v}"
            )))
        }
    };
    match p {
        Primitive::Sphere { radius } => positive(*radius, "sphere radius"),
        Primitive::Box { half_extents } => half_extents.iter().try_for_each(|&h| positive(h, "box half-extent")),
        Primitive::Cylinder { radius, half_height } => {
            positive(*radius, "cylinder radius")?;
            positive(*half_height, "cylinder half-height")
        }
        Primitive::Capsule { radius, half_length } => {
            positive(*radius, "capsule radius")?;
            positive(*half_length, "capsule half-length")
        }
        Primitive::Superellipsoid { radii, e1, e2 } => {
            radii.iter().try_for_each(|&r| positive(r, "superellipsoid radius"))?;
            positive(*e1, "superellipsoid e1")?;
            positive(*e2, "superellipsoid e2")?;
            if *e1 > 2.0 || *e2 > 2.0 {
                return Err(Error::InvalidArgument(
                    "superellipsoid exponents above 2 give non-convex shapes".into(),
                ));
            }
            Ok(())
        }
        Primitive::Union(members) => {
            if members.is_empty() {
                Err(Error::InvalidArgument("union needs at least one member".into()))
            } else {
                Ok(())
            }
        }
    }
}

fn local_distance(primitive: &Primitive, p: &Vec3) -> f64 {
    match primitive {
        Primitive::Sphere { radius } => p.norm() - radius,
        Primitive::Box { half_extents } => {
            let q = p.abs() - half_extents;
            let outside = q.sup(&Vec3::zeros()).norm();
            let inside = q.max().min(0.0);
            outside + inside
        }
        Primitive::Cylinder { radius, half_height } => {
            let dr = p.xy().norm() - radius;
            let dz = p.z.abs() - half_height;
            let outside = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
            outside + dr.max(dz).min(0.0)
        }
        Primitive::Capsule { radius, half_length } => {
            let z = p.z.clamp(-half_length, *half_length);
            (p - Vec3::new(0.0, 0.0, z)).norm() - radius
        }
        Primitive::Superellipsoid { radii, e1, e2 } => superellipsoid_distance(p, radii, *e1, *e2),
        Primitive::Union(members) => members.iter().map(|m| m.distance(p)).fold(f64::INFINITY, f64::min),
    }
}

/// Radial scaling estimate of the superellipsoid distance.
///
/// The radial gap `|p| - |p_s|` (with `p_s` the surface point on the ray
/// through `p`) over-estimates the true distance; scaling by the smallest to
/// largest semi-axis ratio keeps the estimate 1-Lipschitz outside the shape.
/// Not exact, but the zero set is.
fn superellipsoid_distance(p: &Vec3, radii: &Vec3, e1: f64, e2: f64) -> f64 {
    let scale = radii.min() / radii.max();
    let r = p.norm();
    if r < 1e-12 {
        return -radii.min() * scale;
    }
    let u = p.component_div(radii);
    let xy = u.x.abs().powf(2.0 / e2) + u.y.abs().powf(2.0 / e2);
    let f = xy.powf(e2 / e1) + u.z.abs().powf(2.0 / e1);
    // f^(e1/2) is homogeneous of degree one in p, so |p| / h is the surface radius.
    let h = f.powf(e1 / 2.0);
    r * (1.0 - 1.0 / h) * scale
}

/// Signed distance from `p` to the shape surface.
pub fn sdf_eval(shape: &ShapeModel, p: &Vec3) -> Result<f64> {
    ensure_finite(p, "query point")?;
    Ok(shape.distance(p))
}

/// Outward unit normal from a central-difference SDF gradient.
pub fn sdf_normal(shape: &ShapeModel, p: &Vec3) -> Result<UnitVec3> {
    ensure_finite(p, "query point")?;
    let h = NORMAL_FD_STEP;
    let mut g = Vec3::zeros();
    for axis in 0..3 {
        let mut e = Vec3::zeros();
        e[axis] = h;
        g[axis] = (shape.distance(&(p + e)) - shape.distance(&(p - e))) / (2.0 * h);
    }
    let norm = g.norm();
    if !(norm >= 1e-9) {
        return Err(Error::DegenerateNormal {
            x: p.x,
            y: p.y,
            z: p.z,
            norm,
        });
    }
    Ok(UnitVec3::new_unchecked(g / norm))
}

/// Sphere tracing: first surface crossing along the ray within `max_dist`.
///
/// Rays that start inside the shape report the exit point.
pub fn ray_march(shape: &ShapeModel, origin: &Vec3, dir: &UnitVec3, max_dist: f64) -> Option<Vec3> {
    if !(max_dist > 0.0) {
        return None;
    }
    let start_sign = shape.distance(origin) >= 0.0;
    let mut t = 0.0;
    let mut t_prev = 0.0;
    for _ in 0..RAY_MARCH_MAX_STEPS {
        let p = origin + dir.as_ref() * t;
        let d = shape.distance(&p);
        if d.abs() < RAY_MARCH_EPS {
            return Some(p);
        }
        if (d >= 0.0) != start_sign {
            return Some(bisect(shape, origin, dir, t_prev, t, start_sign));
        }
        t_prev = t;
        t += d.abs();
        if t > max_dist {
            return None;
        }
    }
    None
}

fn bisect(shape: &ShapeModel, origin: &Vec3, dir: &UnitVec3, mut lo: f64, mut hi: f64, lo_sign: bool) -> Vec3 {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let d = shape.distance(&(origin + dir.as_ref() * mid));
        if d.abs() < RAY_MARCH_EPS {
            return origin + dir.as_ref() * mid;
        }
        if (d >= 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    origin + dir.as_ref() * (0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Translation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_sphere() -> ShapeModel {
        ShapeModel::sphere(1.0, Vec3::zeros()).unwrap()
    }

    fn unit_box() -> ShapeModel {
        ShapeModel::cuboid(Vec3::new(1.0, 1.0, 1.0), Vec3::zeros()).unwrap()
    }

    #[test]
    fn sphere_values() {
        let s = unit_sphere();
        assert_eq!(sdf_eval(&s, &Vec3::zeros()).unwrap(), -1.0);
        assert_eq!(sdf_eval(&s, &Vec3::new(2.0, 0.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn box_corner_distance_matches_dense_surface_scan() {
        let b = unit_box();
        let p = Vec3::new(2.0, 2.0, 0.0);
        let d = sdf_eval(&b, &p).unwrap();
        assert_abs_diff_eq!(d, 2f64.sqrt(), epsilon = 1e-12);

        // Oracle: nearest point over a dense sampling of the box faces.
        let n = 200;
        let mut best = f64::INFINITY;
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                for i in 0..=n {
                    for j in 0..=n {
                        let a = -1.0 + 2.0 * i as f64 / n as f64;
                        let c = -1.0 + 2.0 * j as f64 / n as f64;
                        let mut q = Vec3::zeros();
                        q[axis] = sign;
                        q[(axis + 1) % 3] = a;
                        q[(axis + 2) % 3] = c;
                        best = best.min((q - p).norm());
                    }
                }
            }
        }
        assert_abs_diff_eq!(d, best, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_point_rejected() {
        let s = unit_sphere();
        assert!(matches!(
            sdf_eval(&s, &Vec3::new(f64::NAN, 0.0, 0.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn non_positive_dimensions_rejected() {
        assert!(ShapeModel::sphere(0.0, Vec3::zeros()).is_err());
        assert!(ShapeModel::cuboid(Vec3::new(1.0, -1.0, 1.0), Vec3::zeros()).is_err());
        assert!(ShapeModel::new(Primitive::Union(vec![]), Pose::identity()).is_err());
    }

    #[test]
    fn normals() {
        let s = unit_sphere();
        let n = sdf_normal(&s, &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(n.into_inner(), Vec3::x(), epsilon = 1e-9);
        let n = sdf_normal(&s, &Vec3::new(0.0, 0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(n.into_inner(), Vec3::y(), epsilon = 1e-9);

        let b = unit_box();
        let n = sdf_normal(&b, &Vec3::new(1.0, 0.2, 0.3)).unwrap();
        assert_abs_diff_eq!(n.into_inner(), Vec3::x(), epsilon = 1e-4);
    }

    #[test]
    fn box_center_normal_is_degenerate() {
        let b = unit_box();
        assert!(matches!(
            sdf_normal(&b, &Vec3::zeros()),
            Err(Error::DegenerateNormal { .. })
        ));
    }

    #[test]
    fn ray_march_examples() {
        let s = unit_sphere();
        let hit = ray_march(&s, &Vec3::new(-3.0, 0.0, 0.0), &Vec3::x_axis(), 10.0).unwrap();
        assert_abs_diff_eq!(hit, Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-5);
        assert!(ray_march(&s, &Vec3::new(-3.0, 2.0, 0.0), &Vec3::x_axis(), 10.0).is_none());

        let b = ShapeModel::cuboid(Vec3::new(0.05, 0.05, 0.1), Vec3::zeros()).unwrap();
        let hit = ray_march(&b, &Vec3::new(0.0, 0.0, 1.0), &-Vec3::z_axis(), 2.0).unwrap();
        assert_abs_diff_eq!(hit, Vec3::new(0.0, 0.0, 0.1), epsilon = 1e-6);
    }

    #[test]
    fn ray_march_respects_max_dist() {
        let s = unit_sphere();
        assert!(ray_march(&s, &Vec3::new(-3.0, 0.0, 0.0), &Vec3::x_axis(), 1.5).is_none());
        assert!(ray_march(&s, &Vec3::new(-3.0, 0.0, 0.0), &Vec3::x_axis(), 0.0).is_none());
    }

    #[test]
    fn posed_cylinder_distance() {
        let pose = Pose::from_parts(
            Translation3::new(0.0, 0.0, 0.1),
            UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::FRAC_PI_2),
        );
        let c = ShapeModel::new(
            Primitive::Cylinder {
                radius: 0.03,
                half_height: 0.05,
            },
            pose,
        )
        .unwrap();
        // Axis now along world y; a point on +z is radially outside by 0.02.
        assert_abs_diff_eq!(c.distance(&Vec3::new(0.0, 0.0, 0.15)), 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(c.distance(&Vec3::new(0.0, 0.07, 0.1)), 0.02, epsilon = 1e-12);
    }

    fn suite() -> Vec<ShapeModel> {
        let rot = UnitQuaternion::from_euler_angles(0.3, -0.2, 0.7);
        let pose = Pose::from_parts(Translation3::new(0.01, -0.02, 0.1), rot);
        let mk = |p: Primitive| ShapeModel::new(p, pose).unwrap();
        vec![
            mk(Primitive::Sphere { radius: 0.05 }),
            mk(Primitive::Box {
                half_extents: Vec3::new(0.03, 0.05, 0.08),
            }),
            mk(Primitive::Cylinder {
                radius: 0.035,
                half_height: 0.06,
            }),
            mk(Primitive::Capsule {
                radius: 0.03,
                half_length: 0.04,
            }),
            mk(Primitive::Superellipsoid {
                radii: Vec3::new(0.04, 0.025, 0.08),
                e1: 0.4,
                e2: 0.6,
            }),
            mk(Primitive::Union(vec![
                ShapeModel::sphere(0.03, Vec3::zeros()).unwrap(),
                ShapeModel::cuboid(Vec3::new(0.01, 0.01, 0.05), Vec3::new(0.0, 0.0, 0.03)).unwrap(),
            ])),
        ]
    }

    #[test]
    fn sign_changes_once_along_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for shape in suite() {
            let center = shape.pose().translation.vector;
            for _ in 0..100 {
                let dir = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .normalize();
                let mut changes = 0;
                let mut prev = shape.distance(&center);
                assert!(prev < 0.0);
                for i in 1..=2000 {
                    let d = shape.distance(&(center + dir * (i as f64 * 1e-4)));
                    if (d >= 0.0) != (prev >= 0.0) {
                        changes += 1;
                    }
                    prev = d;
                }
                assert!(prev > 0.0);
                assert_eq!(changes, 1);
            }
        }
    }

    #[test]
    fn lipschitz_bound_outside() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for shape in suite() {
            let b = shape.bounding_box().inflated(0.5);
            for _ in 0..20_000 {
                let p = Vec3::from_fn(|i, _| rng.random_range(b.min[i]..b.max[i]));
                let q = p + Vec3::from_fn(|_, _| rng.random_range(-0.01..0.01));
                let (dp, dq) = (shape.distance(&p), shape.distance(&q));
                if dp < 0.0 && dq < 0.0 {
                    continue;
                }
                assert!(
                    (dp - dq).abs() <= (p - q).norm() * (1.0 + 1e-9),
                    "{:?}: |{dp} - {dq}| > {}",
                    shape.primitive(),
                    (p - q).norm()
                );
            }
        }
    }

    #[test]
    fn normals_match_analytic_for_sphere_and_cylinder() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = ShapeModel::sphere(0.05, Vec3::new(0.0, 0.0, 0.1)).unwrap();
        let c = ShapeModel::new(
            Primitive::Cylinder {
                radius: 0.04,
                half_height: 0.06,
            },
            Pose::translation(0.0, 0.0, 0.1),
        )
        .unwrap();
        for _ in 0..1000 {
            let dir = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let off = rng.random_range(-0.005..0.005);
            let p = Vec3::new(0.0, 0.0, 0.1) + dir * (0.05 + off);
            let n = sdf_normal(&s, &p).unwrap();
            assert_abs_diff_eq!(n.into_inner(), dir, epsilon = 1e-4);

            // Side wall of the cylinder.
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let z = rng.random_range(0.06..0.14);
            let radial = Vec3::new(theta.cos(), theta.sin(), 0.0);
            let p = radial * (0.04 + off) + Vec3::new(0.0, 0.0, z);
            let n = sdf_normal(&c, &p).unwrap();
            assert_abs_diff_eq!(n.into_inner(), radial, epsilon = 1e-4);
        }
    }
}
