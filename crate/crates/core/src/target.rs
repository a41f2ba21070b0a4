//! The target-model interface shared by all samplers.

use nalgebra::DVector;

use crate::rng::RngStream;

/// Parameter-space point.
pub type Point = DVector<f64>;

/// An inference target: reference density (prior), scalar energy, and
/// optional extras.
///
/// Conventions:
/// - `log_prior` returns -inf outside the support of the reference density.
/// - `energy` returns +inf for invalid points / zero likelihood. Lower energy
///   means higher likelihood.
/// - Both must be deterministic for a fixed input and safe to call
///   concurrently.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn log_prior(&self, x: &Point) -> f64;

    fn energy(&self, x: &Point) -> f64;

    /// Gradient of the energy, if available.
    fn energy_grad(&self, x: &Point) -> Option<Point> {
        let _ = x;
        None
    }

    /// Draw from the reference density. The result must have finite
    /// `log_prior`.
    fn prior_sample(&self, rng: &mut RngStream) -> Point;

    /// Analytic or semi-analytic log normalizing constant, when known.
    fn exact_log_z(&self) -> Option<f64> {
        None
    }
}

/// Central-difference gradient of the energy, for checking analytic
/// gradients.
pub fn central_difference_grad(target: &dyn Target, x: &Point, h: f64) -> Point {
    let d = x.len();
    let mut g = Point::zeros(d);
    for i in 0..d {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[i] += h;
        lo[i] -= h;
        g[i] = (target.energy(&hi) - target.energy(&lo)) / (2.0 * h);
    }
    g
}
