use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

/// Length-scale of the default RBF kernel as a fraction of the cloud's bounding-box diagonal.
pub const DEFAULT_LENGTH_SCALE_FRACTION: f64 = 0.4;
/// Default observation noise (field units).
pub const DEFAULT_NOISE: f64 = 1e-3;

/// Covariance function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Squared exponential, `exp(-|a-b|² / 2Θ²)`.
    Rbf { length_scale: f64 },
    /// `2d³ - 3Rd² + R³` for `d ≤ R`, zero beyond. Positive definite only when
    /// `R` exceeds the diameter of the training set.
    ThinPlate { radius: f64 },
}

/// Kernel plus observation noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kernel: Kernel,
    pub noise: f64,
}

impl KernelSpec {
    pub fn rbf(length_scale: f64, noise: f64) -> Result<Self> {
        let s = Self {
            kernel: Kernel::Rbf { length_scale },
            noise,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn thin_plate(radius: f64, noise: f64) -> Result<Self> {
        let s = Self {
            kernel: Kernel::ThinPlate { radius },
            noise,
        };
        s.validate()?;
        Ok(s)
    }

    /// RBF with Θ tied to the size of `bounds`.
    pub fn default_for(bounds: &Aabb) -> Result<Self> {
        Self::rbf(DEFAULT_LENGTH_SCALE_FRACTION * bounds.diagonal(), DEFAULT_NOISE)
    }

    pub fn validate(&self) -> Result<()> {
        let scale = match self.kernel {
            Kernel::Rbf { length_scale } => length_scale,
            Kernel::ThinPlate { radius } => radius,
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel scale must be positive, got {scale}"
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise must be non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    /// `k(q, q)`.
    pub fn prior_variance(&self) -> f64 {
        match self.kernel {
            Kernel::Rbf { .. } => 1.0,
            Kernel::ThinPlate { radius } => radius.powi(3),
        }
    }

    pub fn eval_distance(&self, d: f64) -> f64 {
        match self.kernel {
            Kernel::Rbf { length_scale } => (-0.5 * (d / length_scale).powi(2)).exp(),
            Kernel::ThinPlate { radius } => {
                if d <= radius {
                    2.0 * d.powi(3) - 3.0 * radius * d * d + radius.powi(3)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∇_a k(a, b)`.
    pub fn gradient(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        let diff = a - b;
        match self.kernel {
            Kernel::Rbf { length_scale } => {
                let l2 = length_scale * length_scale;
                -diff * ((-0.5 * diff.norm_squared() / l2).exp() / l2)
            }
            Kernel::ThinPlate { radius } => {
                let d = diff.norm();
                if d == 0.0 || d > radius {
                    Vec3::zeros()
                } else {
                    diff * (6.0 * d - 6.0 * radius)
                }
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &Vec3, b: &Vec3) -> f64 {
    spec.eval_distance((a - b).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rbf_values() {
        let k = KernelSpec::rbf(0.1, 0.0).unwrap();
        let a = Vec3::new(0.3, -0.2, 0.1);
        assert_eq!(kernel_eval(&k, &a, &a), 1.0);
        let b = a + Vec3::new(0.06, 0.08, 0.0);
        assert_abs_diff_eq!(kernel_eval(&k, &a, &b), 0.606_530_659_712_633_4, epsilon = 1e-15);
        assert_eq!(kernel_eval(&k, &a, &b), kernel_eval(&k, &b, &a));
        assert!(kernel_eval(&k, &a, &(a + Vec3::x() * 10.0)) < 1e-300);
    }

    #[test]
    fn thin_plate_values() {
        let k = KernelSpec::thin_plate(1.0, 0.0).unwrap();
        assert_eq!(kernel_eval(&k, &Vec3::zeros(), &Vec3::x()), 0.0);
        assert_eq!(kernel_eval(&k, &Vec3::zeros(), &Vec3::zeros()), 1.0);
        assert_eq!(kernel_eval(&k, &Vec3::zeros(), &(Vec3::x() * 2.0)), 0.0);
        assert_abs_diff_eq!(
            kernel_eval(&k, &Vec3::zeros(), &(Vec3::x() * 0.5)),
            0.5,
            epsilon = 1e-15
        );
        let k2 = KernelSpec::thin_plate(0.5, 0.0).unwrap();
        assert_eq!(k2.prior_variance(), 0.125);
    }

    #[test]
    fn invalid_specs() {
        assert!(KernelSpec::rbf(0.0, 0.1).is_err());
        assert!(KernelSpec::rbf(0.1, -0.1).is_err());
        assert!(KernelSpec::thin_plate(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let a = Vec3::new(0.02, -0.01, 0.03);
        let b = Vec3::new(-0.01, 0.02, 0.0);
        for k in [
            KernelSpec::rbf(0.05, 0.0).unwrap(),
            KernelSpec::thin_plate(0.1, 0.0).unwrap(),
        ] {
            let g = k.gradient(&a, &b);
            let h = 1e-7;
            for i in 0..3 {
                let mut e = Vec3::zeros();
                e[i] = h;
                let fd = (kernel_eval(&k, &(a + e), &b) - kernel_eval(&k, &(a - e), &b)) / (2.0 * h);
                assert_abs_diff_eq!(g[i], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let k = KernelSpec::thin_plate(0.2, 0.001).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.contains("\"kind\":\"thin_plate\""));
        assert_eq!(serde_json::from_str::<KernelSpec>(&s).unwrap(), k);
    }
}
