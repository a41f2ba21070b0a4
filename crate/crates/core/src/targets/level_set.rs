//! Hard level-set targets used by the tuning validators: energy is 0 inside
//! the region and +inf outside, with a flat prior on a bounding box.

use crate::rng::RngStream;
use crate::target::{Point, Target};
use crate::tuning::EllipsoidSpec;

/// Uniform density on `[lo, hi]` in one dimension (energy identically zero).
#[derive(Clone, Debug)]
pub struct UniformInterval {
    lo: f64,
    hi: f64,
}

impl UniformInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "empty interval");
        Self { lo, hi }
    }
}

impl Target for UniformInterval {
    fn dim(&self) -> usize {
        1
    }

    fn log_prior(&self, x: &Point) -> f64 {
        if x[0] >= self.lo && x[0] <= self.hi {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn energy(&self, _x: &Point) -> f64 {
        0.0
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        Point::from_vec(vec![self.lo + rng.uniform() * (self.hi - self.lo)])
    }
}

/// Uniform level set of an axis-aligned ellipsoid.
#[derive(Clone, Debug)]
pub struct EllipsoidLevelSet {
    spec: EllipsoidSpec,
    /// per-axis bounding half-widths 1/sqrt(lambda_i)
    bounds: Vec<f64>,
}

pub fn ellipsoid_level_set(spec: EllipsoidSpec) -> EllipsoidLevelSet {
    let bounds = spec.eigenvalues().iter().map(|&l| 1.0 / l.sqrt()).collect();
    EllipsoidLevelSet { spec, bounds }
}

impl EllipsoidLevelSet {
    pub fn spec(&self) -> &EllipsoidSpec {
        &self.spec
    }

    pub fn contains(&self, x: &Point) -> bool {
        let mut q = 0.0;
        for (i, &lambda) in self.spec.eigenvalues().iter().enumerate() {
            q += lambda * x[i] * x[i];
        }
        q <= 1.0
    }
}

impl Target for EllipsoidLevelSet {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_prior(&self, x: &Point) -> f64 {
        for (i, &b) in self.bounds.iter().enumerate() {
            if x[i].abs() > b {
                return f64::NEG_INFINITY;
            }
        }
        0.0
    }

    fn energy(&self, x: &Point) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        Point::from_fn(self.dim(), |i, _| (2.0 * rng.uniform() - 1.0) * self.bounds[i])
    }
}

/// Uniform level set of a centered cube with the given side length.
#[derive(Clone, Debug)]
pub struct CubeLevelSet {
    dim: usize,
    half_side: f64,
}

pub fn cube_level_set(dim: usize, side: f64) -> CubeLevelSet {
    assert!(side > 0.0 && dim > 0);
    CubeLevelSet { dim, half_side: 0.5 * side }
}

impl CubeLevelSet {
    pub fn contains(&self, x: &Point) -> bool {
        x.iter().all(|&c| c.abs() <= self.half_side)
    }
}

impl Target for CubeLevelSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, x: &Point) -> f64 {
        // bounding box is the cube itself
        if self.contains(x) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn energy(&self, x: &Point) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        Point::from_fn(self.dim, |_, _| (2.0 * rng.uniform() - 1.0) * self.half_side)
    }
}
