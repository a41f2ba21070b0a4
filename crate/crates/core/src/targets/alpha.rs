//! Interpolated Gaussian/cosine-lattice test likelihood with semi-analytic
//! evidence.
//!
//! `L_a(theta) = a f + (1-a) g` on a uniform cube prior `[-r, r]^d`, with
//! `f = exp(-|theta|^2/2)` and `g = exp(-A d + A sum_i cos(2 pi theta_i))`.
//! `a` interpolates from the periodic lattice of modes (a = 0) to the single
//! Gaussian (a = 1). The evidence factorizes into one-dimensional integrals
//! evaluated by quadrature.

use crate::error::{Error, Result};
use crate::math::logaddexp;
use crate::quad;
use crate::rng::RngStream;
use crate::target::{Point, Target};

#[derive(Clone, Debug)]
pub struct AlphaLikelihoodSpec {
    pub alpha: f64,
    pub dim: usize,
    /// prior cube half-width r
    pub half_width: f64,
    /// cosine amplitude A
    pub amplitude: f64,
}

impl AlphaLikelihoodSpec {
    pub fn new(alpha: f64, dim: usize) -> Self {
        Self { alpha, dim, half_width: 5.14, amplitude: 10.0 }
    }
}

pub struct AlphaTarget {
    spec: AlphaLikelihoodSpec,
    log_alpha: f64,
    log_one_minus_alpha: f64,
    exact_log_z: f64,
}

pub fn alpha_target(spec: AlphaLikelihoodSpec) -> Result<AlphaTarget> {
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(Error::InvalidConfig(format!("alpha must be in [0,1], got {}", spec.alpha)));
    }
    if spec.dim == 0 || !(spec.half_width > 0.0) {
        return Err(Error::InvalidConfig("alpha target needs dim >= 1 and r > 0".into()));
    }
    let r = spec.half_width;
    let a = spec.amplitude;
    let d = spec.dim as f64;
    let gauss_1d = quad::integrate(|x| (-0.5 * x * x).exp(), -r, r, 1e-12);
    let cosine_1d = quad::integrate(|x| (a * (2.0 * std::f64::consts::PI * x).cos()).exp(), -r, r, 1e-8);
    let term_f = spec.alpha.ln() + d * gauss_1d.ln();
    let term_g = (1.0 - spec.alpha).ln() - a * d + d * cosine_1d.ln();
    let exact_log_z = logaddexp(term_f, term_g) - d * (2.0 * r).ln();
    Ok(AlphaTarget {
        log_alpha: spec.alpha.ln(),
        log_one_minus_alpha: (1.0 - spec.alpha).ln(),
        spec,
        exact_log_z,
    })
}

impl AlphaTarget {
    pub fn spec(&self) -> &AlphaLikelihoodSpec {
        &self.spec
    }

    /// (log f-term, log g-term) of the mixture at `x`.
    fn branch_logs(&self, x: &Point) -> (f64, f64) {
        let a = self.spec.amplitude;
        let d = self.spec.dim as f64;
        let log_f = -0.5 * x.norm_squared();
        let cos_sum: f64 =
            x.iter().map(|&c| (2.0 * std::f64::consts::PI * c).cos()).sum();
        let log_g = -a * d + a * cos_sum;
        (self.log_alpha + log_f, self.log_one_minus_alpha + log_g)
    }
}

impl Target for AlphaTarget {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn log_prior(&self, x: &Point) -> f64 {
        let r = self.spec.half_width;
        if x.iter().all(|&c| c.abs() <= r) {
            -(self.spec.dim as f64) * (2.0 * r).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn energy(&self, x: &Point) -> f64 {
        let (tf, tg) = self.branch_logs(x);
        -logaddexp(tf, tg)
    }

    fn energy_grad(&self, x: &Point) -> Option<Point> {
        let (tf, tg) = self.branch_logs(x);
        let log_l = logaddexp(tf, tg);
        let pf = (tf - log_l).exp();
        let pg = (tg - log_l).exp();
        let a = self.spec.amplitude;
        let two_pi = 2.0 * std::f64::consts::PI;
        Some(Point::from_fn(self.spec.dim, |i, _| {
            pf * x[i] + pg * a * two_pi * (two_pi * x[i]).sin()
        }))
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        let r = self.spec.half_width;
        Point::from_fn(self.spec.dim, |_, _| (2.0 * rng.uniform() - 1.0) * r)
    }

    fn exact_log_z(&self) -> Option<f64> {
        Some(self.exact_log_z)
    }
}
