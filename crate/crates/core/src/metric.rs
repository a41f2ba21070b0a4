//! Whitening metric for direction proposals.
//!
//! Samplers draw directions as `v = normalize(d)` with `d ~ N(0, M^{-1})`,
//! where `M` is estimated once per outer iteration from the live-set
//! covariance. Directions then preferentially explore the wide axes of the
//! current particle cloud.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::target::Point;

/// Regularized positive-definite metric with a cached factorization.
#[derive(Clone, Debug)]
pub struct CovarianceMetric {
    matrix: DMatrix<f64>,
    /// Upper-triangular transpose of the Cholesky factor of `matrix`;
    /// solving `U d = z` yields `d ~ N(0, M^{-1})` for `z ~ N(0, I)`.
    upper: DMatrix<f64>,
    reg: f64,
    /// Set when the metric is a multiple of the identity, enabling an O(d)
    /// direction draw.
    spherical: bool,
}

impl CovarianceMetric {
    /// Identity metric: directions uniform on the sphere.
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            upper: DMatrix::identity(dim, dim),
            reg: 0.0,
            spherical: true,
        }
    }

    /// Build from a covariance estimate: `M = cov + reg * mean_diag(cov) * I`.
    ///
    /// Falls back to a spherical metric scaled by the mean sample variance
    /// (or the identity when that is zero) if the regularized matrix is not
    /// positive definite.
    pub fn from_covariance(cov: DMatrix<f64>, reg: f64) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::InvalidArgument("covariance must be square".into()));
        }
        if reg < 0.0 {
            return Err(Error::InvalidArgument("reg must be >= 0".into()));
        }
        let d = cov.nrows();
        let mean_diag = cov.diagonal().sum() / d as f64;
        let mut m = cov;
        // symmetrize against accumulation noise
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        let ridge = reg * mean_diag;
        for i in 0..d {
            m[(i, i)] += ridge;
        }
        match m.clone().cholesky() {
            Some(chol) => Ok(Self {
                upper: chol.l().transpose(),
                matrix: m,
                reg,
                spherical: false,
            }),
            None => {
                let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
                let mut fallback = Self::identity(d);
                fallback.matrix *= scale;
                fallback.upper *= scale.sqrt();
                fallback.reg = reg;
                Ok(fallback)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    /// M^{-1} reconstructed from the stored factorization.
    pub fn inverse(&self) -> DMatrix<f64> {
        let inv_upper = self
            .upper
            .clone()
            .try_inverse()
            .expect("factor is triangular with positive diagonal");
        &inv_upper * inv_upper.transpose()
    }
}

/// Estimate the metric from a particle cloud.
///
/// `M = sample covariance + reg * mean_diag * I`, with the fallback described
/// on [`CovarianceMetric::from_covariance`].
pub fn estimate_metric(points: &[Point], reg: f64) -> Result<CovarianceMetric> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints { need: 2, got: points.len() });
    }
    let d = points[0].len();
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
    }
    let n = points.len() as f64;
    let mut mean = DVector::zeros(d);
    for p in points {
        mean += p;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = p - &mean;
        cov.syger(1.0 / (n - 1.0), &c, &c, 1.0);
    }
    // syger fills the lower triangle; mirror it
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    CovarianceMetric::from_covariance(cov, reg)
}

/// Draw a unit direction `v = d / ||d||`, `d ~ N(0, M^{-1})`.
pub fn draw_direction(metric: &CovarianceMetric, rng: &mut RngStream) -> Point {
    let d = metric.dim();
    loop {
        let z = Point::from_fn(d, |_, _| rng.standard_normal());
        let dir = if metric.spherical {
            z
        } else {
            metric
                .upper
                .solve_upper_triangular(&z)
                .expect("factor has positive diagonal")
        };
        let norm = dir.norm();
        if norm > 0.0 {
            return dir / norm;
        }
    }
}
