//! Hit-and-run slice sampling for hard-constrained targets.
//!
//! One step picks a random direction, draws a slice height from the prior
//! density at the current point, brackets the slice along the line by
//! stepping out, and samples from the bracket by shrinkage. The hard energy
//! constraint `E(x) < e_min` is folded into slice membership, so points
//! outside it behave as if their log density were -inf.
//!
//! Cost accounting follows the stepping-out/shrinkage step counts:
//! `n_stepout` counts bracket expansions and `n_shrink` counts shrinkage
//! candidates (including the accepted one), and `n_evals = n_stepout +
//! n_shrink`. The two probes that detect the bracket ends are not included;
//! this is the convention under which the expected cost equals
//! `tuning::expected_cost`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{draw_direction, CovarianceMetric};
use crate::rng::RngStream;
use crate::target::{Point, Target};

/// Slice kernel configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceConfig {
    /// Base bracket width in original coordinates.
    pub width: f64,
    /// Maximum stepping-out expansions per direction.
    pub max_stepout: usize,
    /// Maximum shrinkage iterations before declaring a null move.
    pub max_shrink: usize,
    /// Slice steps per replacement.
    pub steps: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self { width: 1.0, max_stepout: 10, max_shrink: 100, steps: 1 }
    }
}

impl SliceConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::InvalidConfig(format!("slice width must be > 0, got {}", self.width)));
        }
        if self.max_stepout < 1 || self.max_shrink < 1 {
            return Err(Error::InvalidConfig("stepping-out and shrinkage caps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a single slice step.
#[derive(Clone, Debug)]
pub struct SliceStepReport {
    pub new_point: Point,
    /// Energy of `new_point` (the input energy when `null_move`).
    pub new_energy: f64,
    pub n_evals: u64,
    pub n_stepout: u64,
    pub n_shrink: u64,
    pub null_move: bool,
}

pub(crate) struct LineOutcome<P> {
    /// Accepted offset and payload; `None` when the shrinkage cap was hit.
    pub accepted: Option<(f64, P)>,
    pub n_stepout: u64,
    pub n_shrink: u64,
}

impl<P> LineOutcome<P> {
    pub fn n_evals(&self) -> u64 {
        self.n_stepout + self.n_shrink
    }
}

/// Stepping-out and shrinkage along a line through the current point at
/// offset 0. `member(t)` returns `Some(payload)` when the point at offset `t`
/// lies in the slice.
pub(crate) fn slice_along_line<P>(
    mut member: impl FnMut(f64) -> Option<P>,
    cfg: &SliceConfig,
    rng: &mut RngStream,
) -> LineOutcome<P> {
    let w = cfg.width;
    let u = rng.uniform() * w;
    let mut lo = -u;
    let mut hi = lo + w;
    let mut n_stepout = 0u64;

    for _ in 0..cfg.max_stepout {
        if member(lo).is_some() {
            lo -= w;
            n_stepout += 1;
        } else {
            break;
        }
    }
    for _ in 0..cfg.max_stepout {
        if member(hi).is_some() {
            hi += w;
            n_stepout += 1;
        } else {
            break;
        }
    }

    let mut n_shrink = 0u64;
    for _ in 0..cfg.max_shrink {
        let t = lo + rng.uniform() * (hi - lo);
        n_shrink += 1;
        match member(t) {
            Some(payload) => {
                return LineOutcome { accepted: Some((t, payload)), n_stepout, n_shrink };
            }
            None => {
                if t < 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
            }
        }
    }
    LineOutcome { accepted: None, n_stepout, n_shrink }
}

/// One hit-and-run slice step on `pi(x) * 1{E(x) < e_min}` along direction
/// `v` (unit norm).
///
/// The slice height is `log u + log_prior(x)`; a candidate is in the slice
/// iff its log prior clears the height and its energy satisfies the
/// constraint. Exhausting `max_shrink` returns the input point as a null
/// move.
pub fn slice_step(
    x: &Point,
    x_energy: f64,
    v: &Point,
    e_min: f64,
    target: &dyn Target,
    cfg: &SliceConfig,
    rng: &mut RngStream,
) -> Result<SliceStepReport> {
    let lp0 = target.log_prior(x);
    if !lp0.is_finite() {
        return Err(Error::StartOutsideSupport);
    }
    let height = rng.uniform().ln() + lp0;

    let mut saw_nan = false;
    let outcome = slice_along_line(
        |t| {
            let y = x + v * t;
            let lp = target.log_prior(&y);
            if lp.is_nan() {
                saw_nan = true;
                return None;
            }
            if lp < height {
                return None;
            }
            let e = target.energy(&y);
            if e.is_nan() {
                saw_nan = true;
                return None;
            }
            if e < e_min {
                Some((y, e))
            } else {
                None
            }
        },
        cfg,
        rng,
    );
    if saw_nan {
        return Err(Error::NanFromTarget);
    }

    let (n_stepout, n_shrink) = (outcome.n_stepout, outcome.n_shrink);
    Ok(match outcome.accepted {
        Some((_, (y, e))) => SliceStepReport {
            new_point: y,
            new_energy: e,
            n_evals: n_stepout + n_shrink,
            n_stepout,
            n_shrink,
            null_move: false,
        },
        None => SliceStepReport {
            new_point: x.clone(),
            new_energy: x_energy,
            n_evals: n_stepout + n_shrink,
            n_stepout,
            n_shrink,
            null_move: true,
        },
    })
}

/// Result of a full replacement chain.
#[derive(Clone, Debug)]
pub struct ReplaceOutcome {
    pub point: Point,
    pub energy: f64,
    pub n_evals: u64,
}

/// Generate a replacement by `cfg.steps` sequential slice steps, each along a
/// fresh metric-whitened direction.
pub fn hrss_replace(
    parent: &Point,
    parent_energy: f64,
    e_min: f64,
    target: &dyn Target,
    metric: &CovarianceMetric,
    cfg: &SliceConfig,
    rng: &mut RngStream,
) -> Result<ReplaceOutcome> {
    let mut point = parent.clone();
    let mut energy = parent_energy;
    let mut n_evals = 0u64;
    for _ in 0..cfg.steps {
        let v = draw_direction(metric, rng);
        let report = slice_step(&point, energy, &v, e_min, target, cfg, rng)?;
        n_evals += report.n_evals;
        point = report.new_point;
        energy = report.new_energy;
    }
    Ok(ReplaceOutcome { point, energy, n_evals })
}
