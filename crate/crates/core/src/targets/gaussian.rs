//! Diagonal Gaussian energy on a flat box prior. Smooth level sets make this
//! the reference target for the reflective samplers and the SMC evidence
//! oracle.

use crate::quad;
use crate::rng::RngStream;
use crate::target::{Point, Target};

#[derive(Clone, Debug)]
pub struct DiagGaussianTarget {
    variances: Vec<f64>,
    half_width: f64,
    exact_log_z: f64,
}

/// `E(x) = sum_i x_i^2 / (2 var_i)` with a uniform prior on
/// `[-half_width, half_width]^d`.
pub fn diag_gaussian_target(variances: Vec<f64>, half_width: f64) -> DiagGaussianTarget {
    assert!(!variances.is_empty() && variances.iter().all(|&v| v > 0.0));
    assert!(half_width > 0.0);
    let d = variances.len();
    let mut log_z = 0.0;
    for &v in &variances {
        let mass = quad::integrate(|x| (-0.5 * x * x / v).exp(), -half_width, half_width, 1e-13);
        log_z += mass.ln();
    }
    log_z -= d as f64 * (2.0 * half_width).ln();
    DiagGaussianTarget { variances, half_width, exact_log_z: log_z }
}

impl Target for DiagGaussianTarget {
    fn dim(&self) -> usize {
        self.variances.len()
    }

    fn log_prior(&self, x: &Point) -> f64 {
        if x.iter().all(|&c| c.abs() <= self.half_width) {
            -(self.dim() as f64) * (2.0 * self.half_width).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn energy(&self, x: &Point) -> f64 {
        x.iter().zip(&self.variances).map(|(&c, &v)| 0.5 * c * c / v).sum()
    }

    fn energy_grad(&self, x: &Point) -> Option<Point> {
        Some(Point::from_fn(self.dim(), |i, _| x[i] / self.variances[i]))
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        Point::from_fn(self.dim(), |_, _| (2.0 * rng.uniform() - 1.0) * self.half_width)
    }

    fn exact_log_z(&self) -> Option<f64> {
        Some(self.exact_log_z)
    }
}
