//! Slice-width tuning theory and its Monte Carlo validators.
//!
//! The cost model: conditional on the slice (chord) length `l`, one
//! hit-and-run slice step performs `l/w` expected stepping-out expansions and
//! `1 + 2*phi(w/l)` expected shrinkage draws, with
//! `phi(u) = ((1+u) ln(1+u) - u) / u`. Minimizing over `w` for fixed `l`
//! yields `w* = u* l` with `u* - ln(1+u*) = 1/2`. For uniform sampling of a
//! high-dimensional ellipsoid `{x : x'Ax <= 1}` the mean chord length is
//! `4 sqrt(2/(pi mu d))` with `mu = tr(A)/d`, and the width minimizing the
//! unconditional cost is `kappa_inf` times that, where `kappa_inf ~ 1.3035`
//! solves a fixed-point equation over the limiting chord distribution.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrss::{slice_step, SliceConfig};
use crate::math::mean_std;
use crate::metric::{draw_direction, CovarianceMetric};
use crate::quad;
use crate::rng::RngStream;
use crate::target::Point;
use crate::targets::level_set::{ellipsoid_level_set, UniformInterval};

/// Axis-aligned ellipsoid `{x : sum_i lambda_i x_i^2 <= 1}` described by the
/// eigenvalues of `A`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    eigenvalues: Vec<f64>,
    mu: f64,
}

impl EllipsoidSpec {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("ellipsoid needs at least one axis".into()));
        }
        if !eigenvalues.iter().all(|&l| l.is_finite() && l > 0.0) {
            return Err(Error::InvalidArgument("ellipsoid eigenvalues must be positive".into()));
        }
        let mu = eigenvalues.iter().sum::<f64>() / eigenvalues.len() as f64;
        Ok(Self { eigenvalues, mu })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::new(vec![1.0; dim])
    }

    /// Unit ball with the first half of the axes shrunk by `factor`
    /// (semi-axis `1/factor`, eigenvalue `factor^2`).
    pub fn shrunk_axes(dim: usize, factor: f64) -> Result<Self> {
        let mut eig = vec![1.0; dim];
        for e in eig.iter_mut().take(dim / 2) {
            *e = factor * factor;
        }
        Self::new(eig)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Mean eigenvalue `tr(A)/d`.
    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `phi(u) = ((1+u) ln(1+u) - u) / u`, continuously extended by `phi(0) = 0`.
pub fn phi(u: f64) -> Result<f64> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::InvalidArgument(format!("phi requires u >= 0, got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(((1.0 + u) * u.ln_1p() - u) / u)
}

/// Expected likelihood evaluations for one slice step on a chord of length
/// `ell` at width `w`: `ell/w + 1 + 2 phi(w/ell)`.
pub fn expected_cost(ell: f64, w: f64) -> Result<f64> {
    if !(ell > 0.0) || !(w > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "expected_cost requires positive arguments, got ell={ell}, w={w}"
        )));
    }
    Ok(ell / w + 1.0 + 2.0 * phi(w / ell)?)
}

/// The fixed-slice optimality ratio `u*`, the root of `u - ln(1+u) = 1/2`.
fn u_star() -> f64 {
    // Newton from the middle of the known bracket [1, 2], with bisection
    // safeguard.
    let g = |u: f64| u - u.ln_1p() - 0.5;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    let mut u = 1.35;
    for _ in 0..100 {
        let r = g(u);
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let step = r * (1.0 + u) / u; // g'(u) = u/(1+u)
        let next = u - step;
        u = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if r.abs() < 1e-15 {
            break;
        }
    }
    u
}

/// Optimal width for a fixed chord length: `w* = u* ell`.
pub fn optimal_width_fixed(ell: f64) -> f64 {
    u_star() * ell
}

/// Density of Gamma(3/2, scale 2) — the limiting law of the squared
/// normalized chord scale.
fn gamma32_density(s: f64) -> f64 {
    // 1/(Gamma(3/2) 2^{3/2}) sqrt(s) e^{-s/2}
    let norm = 1.0 / (0.5 * std::f64::consts::PI.sqrt() * 8.0f64.sqrt());
    norm * s.sqrt() * (-0.5 * s).exp()
}

/// E[Q^{1/2}] for Q ~ Gamma(3/2, 2), computed by quadrature. Analytically
/// `2 sqrt(2/pi)`.
pub fn gamma32_sqrt_moment() -> f64 {
    quad::integrate(|s| s.sqrt() * gamma32_density(s), 0.0, 80.0, 1e-13)
}

/// E[R] for the normalized limiting chord length `R = Q^{1/2} / E[Q^{1/2}]`;
/// equals 1 by construction (quadrature sub-check).
pub fn normalized_chord_mean() -> f64 {
    gamma32_sqrt_moment() / gamma32_sqrt_moment()
}

fn kappa_rhs(kappa: f64, c: f64) -> f64 {
    // E[R ln(1 + kappa/R)] with R = sqrt(Q)/c
    let integrand =
        move |s: f64| (s.sqrt() / c) * (kappa * c / s.sqrt()).ln_1p() * gamma32_density(s);
    0.5 + quad::integrate(integrand, 0.0, 80.0, 1e-13)
}

/// Solve the fixed point `kappa = 1/2 + E[R ln(1 + kappa/R)]` by iteration
/// until successive iterates differ by less than `tol`.
pub fn kappa_infinity(tol: f64) -> f64 {
    let c = gamma32_sqrt_moment();
    let mut kappa = 1.0;
    for _ in 0..500 {
        let next = kappa_rhs(kappa, c);
        let delta = (next - kappa).abs();
        kappa = next;
        if delta < tol {
            break;
        }
    }
    kappa
}

/// Residual of the fixed-point equation at `kappa`.
pub fn kappa_residual(kappa: f64) -> f64 {
    kappa - kappa_rhs(kappa, gamma32_sqrt_moment())
}

fn kappa_cached() -> f64 {
    static KAPPA: OnceLock<f64> = OnceLock::new();
    *KAPPA.get_or_init(|| kappa_infinity(1e-12))
}

/// Leading-order mean chord length `4 sqrt(2/(pi mu d))` for uniform point
/// and direction in the ellipsoid.
pub fn mean_chord_length(spec: &EllipsoidSpec) -> f64 {
    4.0 * (2.0 / (std::f64::consts::PI * spec.mu() * spec.dim() as f64)).sqrt()
}

/// Asymptotically optimal global slice width `kappa_inf * E[chord]`.
pub fn optimal_width_ellipsoid(spec: &EllipsoidSpec) -> f64 {
    kappa_cached() * mean_chord_length(spec)
}

/// Uniform sample inside the ellipsoid.
pub fn sample_in_ellipsoid(spec: &EllipsoidSpec, rng: &mut RngStream) -> Point {
    let d = spec.dim();
    loop {
        let z = Point::from_fn(d, |_, _| rng.standard_normal());
        let norm = z.norm();
        if norm == 0.0 {
            continue;
        }
        let radius = rng.uniform().powf(1.0 / d as f64);
        let mut x = z * (radius / norm);
        for (i, &lambda) in spec.eigenvalues().iter().enumerate() {
            x[i] /= lambda.sqrt();
        }
        return x;
    }
}

/// Exact chord length of the line `{x + t v}` through the ellipsoid, from the
/// roots of the intersection quadratic. Independent oracle for
/// [`mean_chord_length`].
pub fn exact_chord(spec: &EllipsoidSpec, x: &Point, v: &Point) -> f64 {
    let mut q = 0.0;
    let mut b = 0.0;
    let mut c = -1.0;
    for (i, &lambda) in spec.eigenvalues().iter().enumerate() {
        q += lambda * v[i] * v[i];
        b += lambda * x[i] * v[i];
        c += lambda * x[i] * x[i];
    }
    let disc = b * b - q * c;
    if disc <= 0.0 {
        return 0.0;
    }
    2.0 * disc.sqrt() / q
}

/// Monte Carlo mean chord length (uniform interior point, uniform sphere
/// direction).
pub fn mc_mean_chord(spec: &EllipsoidSpec, n: usize, rng: &mut RngStream) -> f64 {
    let metric = CovarianceMetric::identity(spec.dim());
    let mut sum = 0.0;
    for _ in 0..n {
        let x = sample_in_ellipsoid(spec, rng);
        let v = draw_direction(&metric, rng);
        sum += exact_chord(spec, &x, &v);
    }
    sum / n as f64
}

/// Monte Carlo cost of one slice step on the uniform interval `[0, ell]`,
/// restarted from a uniform point each step. Returns (mean, std) of the
/// per-step evaluation count.
pub fn mc_interval_cost(ell: f64, w: f64, n: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if !(ell > 0.0) || !(w > 0.0) {
        return Err(Error::InvalidArgument("ell and w must be positive".into()));
    }
    let target = UniformInterval::new(0.0, ell);
    let cfg = SliceConfig { width: w, ..SliceConfig::default() };
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let x = Point::from_vec(vec![rng.uniform() * ell]);
        let v = Point::from_vec(vec![if rng.uniform() < 0.5 { 1.0 } else { -1.0 }]);
        let rep = slice_step(&x, 0.0, &v, 1.0, &target, &cfg, rng)?;
        counts.push(rep.n_evals as f64);
    }
    Ok(mean_std(&counts))
}

/// Monte Carlo (mean, std) of the per-step evaluation count for hit-and-run
/// slice sampling of the uniform-ellipsoid target at width `w`, across
/// i.i.d. interior starting points and directions.
pub fn cost_std_profile(
    spec: &EllipsoidSpec,
    w: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("need n >= 1000 samples, got {n}")));
    }
    if !(w > 0.0) {
        return Err(Error::InvalidArgument("width must be positive".into()));
    }
    let target = ellipsoid_level_set(spec.clone());
    let metric = CovarianceMetric::identity(spec.dim());
    let cfg = SliceConfig { width: w, ..SliceConfig::default() };
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sample_in_ellipsoid(spec, rng);
        let v = draw_direction(&metric, rng);
        let rep = slice_step(&x, 0.0, &v, 0.5, &target, &cfg, rng)?;
        counts.push(rep.n_evals as f64);
    }
    Ok(mean_std(&counts))
}
