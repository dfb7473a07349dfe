//! Plane fitting: total least squares on the point scatter, or RANSAC with
//! a least-squares refinement of the winning consensus set.

use crate::geom::Vec3;
use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PerceptionError;

/// Plane in Hessian form `normal . p = offset`, normal unit length and
/// oriented upward (positive world z) whenever it is not vertical.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    /// Root-mean-square orthogonal residual of the points the fit used.
    pub rms_residual: f64,
    pub inlier_count: usize,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn oriented(normal: Vec3, through: &Vec3) -> (Vec3, f64) {
        let mut n = normal;
        if n.z < 0.0 || (n.z == 0.0 && (n.x < 0.0 || (n.x == 0.0 && n.y < 0.0))) {
            n = -n;
        }
        let d = n.dot(through);
        (n, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_tol: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_tol: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMethod {
    LeastSquares,
    Ransac(RansacParams),
}

/// Centroid and scatter eigen-decomposition. Returns the eigenvalues in
/// ascending order with their eigenvectors.
fn scatter_eigen(points: &[Vec3]) -> (Vec3, [f64; 3], [Vec3; 3]) {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let vecs = [
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ];
    (centroid, vals, vecs)
}

fn tls_fit(points: &[Vec3]) -> Result<Plane, PerceptionError> {
    if points.len() < 3 {
        return Err(PerceptionError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let (centroid, vals, vecs) = scatter_eigen(points);
    // Collinear input: no spread in the second direction either.
    if vals[1] <= 1e-12 * vals[2].max(1e-12) {
        return Err(PerceptionError::Degenerate(
            "points are collinear; the plane is not unique".into(),
        ));
    }
    let normal = vecs[0].normalize();
    let (normal, offset) = Plane::oriented(normal, &centroid);
    Ok(Plane {
        normal,
        offset,
        rms_residual: vals[0].max(0.0).sqrt(),
        inlier_count: points.len(),
    })
}

fn plane_from_triple(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Vec3> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    (len > 1e-12).then(|| n / len)
}

fn ransac_fit(points: &[Vec3], params: &RansacParams) -> Result<Plane, PerceptionError> {
    if points.len() < 3 {
        return Err(PerceptionError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    if params.iterations == 0 || !(params.inlier_tol > 0.0) {
        return Err(PerceptionError::InvalidParameter(
            "ransac needs iterations >= 1 and inlier_tol > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = points.len();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for _ in 0..params.iterations {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let k = rng.gen_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(normal) = plane_from_triple(&points[i], &points[j], &points[k]) else {
            continue;
        };
        let d = normal.dot(&points[i]);
        let inliers: Vec<usize> = (0..n)
            .filter(|&m| (normal.dot(&points[m]) - d).abs() <= params.inlier_tol)
            .collect();
        // Strictly-better keeps the earliest winner, so the result is a
        // deterministic function of the seed.
        if best.as_ref().map_or(true, |(c, _)| inliers.len() > *c) {
            best = Some((inliers.len(), inliers));
        }
    }
    let (_, inliers) = best.ok_or_else(|| {
        PerceptionError::Degenerate("ransac never sampled a non-degenerate triple".into())
    })?;
    if inliers.len() < 3 {
        return Err(PerceptionError::Degenerate(
            "ransac consensus set too small".into(),
        ));
    }
    let subset: Vec<Vec3> = inliers.iter().map(|&i| points[i]).collect();
    let mut plane = tls_fit(&subset)?;
    plane.inlier_count = inliers.len();
    Ok(plane)
}

/// Fits a plane to `points` with the requested method.
pub fn fit_plane(points: &[Vec3], method: FitMethod) -> Result<Plane, PerceptionError> {
    match method {
        FitMethod::LeastSquares => tls_fit(points),
        FitMethod::Ransac(params) => ransac_fit(points, &params),
    }
}
