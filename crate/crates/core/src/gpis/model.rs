use nalgebra::{Cholesky, DMatrix, DVector, Matrix3};

use super::kernel::{Kernel, KernelSpec};
use crate::error::{Error, Result};
use crate::geometry::{marching_cubes, Aabb, PointCloud, TriMesh, Vec3};

/// Bounding-box inflation (fraction of the largest extent) locating the exterior anchors.
pub const ANCHOR_INFLATION: f64 = 1.0;
/// Field value of the interior anchor.
pub const INTERIOR_VALUE: f64 = -1.0;
/// Field value of the exterior anchors.
pub const EXTERIOR_VALUE: f64 = 1.0;
/// Number of training pairs appended to the surface points.
pub const ANCHOR_COUNT: usize = 7;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Surface points (value 0) followed by one interior and six exterior anchors.
///
/// The interior anchor sits at the cloud centroid and the exterior anchors at
/// the face centers of the bounding box grown by [`ANCHOR_INFLATION`]. The
/// centroid is only guaranteed interior for convex shapes.
pub fn augment_off_surface(cloud: &PointCloud) -> Result<(Vec<Vec3>, Vec<f64>)> {
    check_spread(cloud.points())?;
    let centroid = cloud.centroid().expect("non-empty after spread check");
    let outer = cloud.bounding_box().expect("non-empty").inflated(ANCHOR_INFLATION);
    let c = outer.center();
    let mut points = cloud.points().to_vec();
    let mut values = vec![0.0; points.len()];
    points.push(centroid);
    values.push(INTERIOR_VALUE);
    for axis in 0..3 {
        for bound in [outer.min[axis], outer.max[axis]] {
            let mut p = c;
            p[axis] = bound;
            points.push(p);
            values.push(EXTERIOR_VALUE);
        }
    }
    Ok((points, values))
}

/// Rejects clouds with fewer than four points or no volume spread.
fn check_spread(points: &[Vec3]) -> Result<()> {
    if points.len() < 4 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 4 surface points, got {}",
            points.len()
        )));
    }
    let mean: Vec3 = points.iter().sum::<Vec3>() / points.len() as f64;
    let cov: Matrix3<f64> = points
        .iter()
        .map(|p| (p - mean) * (p - mean).transpose())
        .sum::<Matrix3<f64>>()
        / points.len() as f64;
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if hi <= 0.0 || lo <= 1e-10 * hi {
        return Err(Error::DegenerateGeometry(
            "surface points are coplanar or collinear".into(),
        ));
    }
    Ok(())
}

/// Fitted GP posterior over the implicit field.
#[derive(Debug, Clone)]
pub struct GpisModel {
    spec: KernelSpec,
    points: Vec<Vec3>,
    values: Vec<f64>,
    /// Lower Cholesky factor of `K + (σ² + jitter) I`.
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Fits the GP, escalating diagonal jitter if the Gram matrix will not factor.
pub fn fit(points: &[Vec3], values: &[f64], spec: &KernelSpec) -> Result<GpisModel> {
    spec.validate()?;
    if points.is_empty() || points.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty points and values, got {} and {}",
            points.len(),
            values.len()
        )));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("training data must be finite".into()));
    }
    let n = points.len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let k = spec.eval_distance((points[i] - points[j]).norm());
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    let noise2 = spec.noise * spec.noise;
    let mut jitter = if noise2 > 0.0 { 0.0 } else { JITTER_START };
    loop {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += noise2 + jitter;
        }
        if let Some(chol) = Cholesky::new(a) {
            let y = DVector::from_column_slice(values);
            let alpha = chol.solve(&y);
            if jitter > 0.0 {
                log::debug!("GP factorization needed jitter {jitter:e}");
            }
            return Ok(GpisModel {
                spec: *spec,
                points: points.to_vec(),
                values: values.to_vec(),
                chol: chol.unpack(),
                alpha,
                jitter,
            });
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * 1.000_001 {
            let max_diag = (0..n).map(|i| gram[(i, i)]).fold(0.0, f64::max);
            return Err(Error::Factorization {
                jitter: JITTER_MAX,
                condition_estimate: n as f64 * max_diag / (noise2 + JITTER_MAX),
            });
        }
    }
}

impl GpisModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn cross_cov(&self, q: &Vec3) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|x| self.spec.eval_distance((q - x).norm())),
        )
    }

    /// Posterior mean without argument checks.
    pub fn mean(&self, q: &Vec3) -> f64 {
        self.points
            .iter()
            .zip(self.alpha.iter())
            .map(|(x, a)| a * self.spec.eval_distance((q - x).norm()))
            .sum()
    }

    /// Gradient of the posterior mean.
    pub fn mean_gradient(&self, q: &Vec3) -> Vec3 {
        self.points
            .iter()
            .zip(self.alpha.iter())
            .map(|(x, a)| self.spec.gradient(q, x) * *a)
            .sum()
    }

    /// Posterior (mean, variance) at `q`.
    pub fn predict(&self, q: &Vec3) -> Result<(f64, f64)> {
        if !q.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("query must be finite".into()));
        }
        let k = self.cross_cov(q);
        let mean = k.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&k)
            .expect("Cholesky factor has a positive diagonal");
        let var = (self.spec.prior_variance() - v.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    /// Posterior (mean, variance) at each query, sharing one triangular solve.
    pub fn predict_batch(&self, queries: &[Vec3]) -> Result<Vec<(f64, f64)>> {
        if queries.iter().any(|q| !q.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("query must be finite".into()));
        }
        let n = self.points.len();
        let m = queries.len();
        let mut kx = DMatrix::<f64>::zeros(n, m);
        for (j, q) in queries.iter().enumerate() {
            for (i, x) in self.points.iter().enumerate() {
                kx[(i, j)] = self.spec.eval_distance((q - x).norm());
            }
        }
        let means = kx.tr_mul(&self.alpha);
        self.chol.solve_lower_triangular_mut(&mut kx);
        let prior = self.spec.prior_variance();
        Ok((0..m)
            .map(|j| (means[j], (prior - kx.column(j).norm_squared()).max(0.0)))
            .collect())
    }

    pub fn variances(&self, queries: &[Vec3]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(queries)?.into_iter().map(|(_, v)| v).collect())
    }

    /// Posterior variance at every training point.
    ///
    /// With `A = K + τI` the variance at training point `i` is
    /// `τ − τ² (A⁻¹)ᵢᵢ`, and `(A⁻¹)ᵢᵢ` is the squared norm of column `i` of
    /// `L⁻¹`. Columns are solved in blocks so each factor column is reused.
    pub fn training_variances(&self) -> Vec<f64> {
        const BLOCK: usize = 32;
        let n = self.points.len();
        let tau = self.spec.noise * self.spec.noise + self.jitter;
        let l = self.chol.as_slice();
        let mut out = Vec::with_capacity(n);
        let mut x = vec![0.0; n * BLOCK];
        for start in (0..n).step_by(BLOCK) {
            let width = BLOCK.min(n - start);
            x.fill(0.0);
            for b in 0..width {
                x[b * n + start + b] = 1.0;
            }
            for k in start..n {
                let lkk = l[k * n + k];
                let below = &l[k * n + k + 1..(k + 1) * n];
                for b in 0..width.min(k - start + 1) {
                    let col = &mut x[b * n..(b + 1) * n];
                    let xk = col[k] / lkk;
                    col[k] = xk;
                    if xk != 0.0 {
                        for (xi, li) in col[k + 1..].iter_mut().zip(below) {
                            *xi -= li * xk;
                        }
                    }
                }
            }
            for b in 0..width {
                let d: f64 = x[b * n + start + b..(b + 1) * n].iter().map(|v| v * v).sum();
                out.push((tau - tau * tau * d).max(0.0));
            }
        }
        out
    }

    /// Serializes training data and kernel into a versioned little-endian blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.points.len() * 32);
        out.extend_from_slice(DUMP_MAGIC);
        out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
        let (kind, scale) = match self.spec.kernel {
            Kernel::Rbf { length_scale } => (0u8, length_scale),
            Kernel::ThinPlate { radius } => (1u8, radius),
        };
        out.push(kind);
        out.extend_from_slice(&scale.to_le_bytes());
        out.extend_from_slice(&self.spec.noise.to_le_bytes());
        out.extend_from_slice(&(self.points.len() as u64).to_le_bytes());
        for (p, v) in self.points.iter().zip(&self.values) {
            for c in p.iter().chain(std::iter::once(v)) {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    /// Rebuilds a model from [`GpisModel::to_bytes`] output by refitting.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("model dump: {m}"));
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = r.split_at(n);
            r = tail;
            Ok(head)
        };
        if take(4)? != DUMP_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != DUMP_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let kind = take(1)?[0];
        let rd = |t: &[u8]| f64::from_le_bytes(t.try_into().unwrap());
        let scale = rd(take(8)?);
        let noise = rd(take(8)?);
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut points = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rd(take(8)?);
            let y = rd(take(8)?);
            let z = rd(take(8)?);
            points.push(Vec3::new(x, y, z));
            values.push(rd(take(8)?));
        }
        let spec = match kind {
            0 => KernelSpec::rbf(scale, noise)?,
            1 => KernelSpec::thin_plate(scale, noise)?,
            k => return Err(bad(&format!("unknown kernel kind {k}"))),
        };
        fit(&points, &values, &spec)
    }
}

const DUMP_MAGIC: &[u8; 4] = b"GPIS";
const DUMP_VERSION: u32 = 1;

/// Zero level set of the posterior mean, with posterior variance per vertex.
pub fn extract_surface(model: &GpisModel, bounds: &Aabb, cells_per_axis: usize) -> Result<TriMesh> {
    let mut mesh = marching_cubes(|p| model.mean(p), bounds, cells_per_axis)?;
    if mesh.is_empty() {
        return Err(Error::EmptySurface);
    }
    mesh.scalars = Some(model.variances(&mesh.vertices)?);
    Ok(mesh)
}

/// `max V - min V` of the posterior variance over `points`.
pub fn max_variance_gap(model: &GpisModel, points: &[Vec3]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("variance gap needs at least 2 points".into()));
    }
    let training = model.points();
    let v = if points.len() <= training.len() && points == &training[..points.len()] {
        let mut v = model.training_variances();
        v.truncate(points.len());
        v
    } else {
        model.variances(points)?
    };
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}
