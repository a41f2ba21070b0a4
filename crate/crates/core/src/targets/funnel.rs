//! Neal's funnel on a uniform box prior.
//!
//! Density `N(y | 0, 3) * prod_n N(x_n | 0, exp(y/2))` with the second
//! argument read as a standard deviation; `y` is the first coordinate.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::target::{Point, Target};

const Y_STD: f64 = 3.0;

#[derive(Clone, Debug)]
pub struct FunnelTarget {
    dim: usize,
    lo: f64,
    hi: f64,
}

pub fn funnel_target(dim: usize, bounds: (f64, f64)) -> Result<FunnelTarget> {
    if dim < 2 {
        return Err(Error::InvalidConfig("funnel needs dim >= 2".into()));
    }
    if !(bounds.1 > bounds.0) {
        return Err(Error::InvalidConfig("funnel prior box must have positive extent".into()));
    }
    Ok(FunnelTarget { dim, lo: bounds.0, hi: bounds.1 })
}

impl FunnelTarget {
    /// Ground-truth draw via the non-centered parameterization
    /// (`y ~ N(0, 3^2)`, `x_n = exp(y/2) z_n`). Ignores the prior box.
    pub fn reference_sample(&self, rng: &mut RngStream) -> Point {
        let y = Y_STD * rng.standard_normal();
        let scale = (0.5 * y).exp();
        Point::from_fn(self.dim, |i, _| if i == 0 { y } else { scale * rng.standard_normal() })
    }
}

impl Target for FunnelTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, x: &Point) -> f64 {
        if x.iter().all(|&c| c >= self.lo && c <= self.hi) {
            -(self.dim as f64) * (self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn energy(&self, x: &Point) -> f64 {
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let y = x[0];
        let mut logp = -half_log_2pi - Y_STD.ln() - 0.5 * y * y / (Y_STD * Y_STD);
        let inv_var = (-y).exp();
        for i in 1..self.dim {
            logp += -half_log_2pi - 0.5 * y - 0.5 * x[i] * x[i] * inv_var;
        }
        -logp
    }

    fn energy_grad(&self, x: &Point) -> Option<Point> {
        let y = x[0];
        let inv_var = (-y).exp();
        let mut g = Point::zeros(self.dim);
        g[0] = y / (Y_STD * Y_STD);
        for i in 1..self.dim {
            g[0] += 0.5 - 0.5 * x[i] * x[i] * inv_var;
            g[i] = x[i] * inv_var;
        }
        Some(g)
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        Point::from_fn(self.dim, |_, _| self.lo + rng.uniform() * (self.hi - self.lo))
    }
}
