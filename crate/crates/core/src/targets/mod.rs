//! Bundled benchmark targets and a string-id registry for the experiment
//! runner.

pub mod alpha;
pub mod funnel;
pub mod gaussian;
pub mod level_set;
pub mod mog;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::Target;
use crate::tuning::EllipsoidSpec;

pub use alpha::{alpha_target, AlphaLikelihoodSpec, AlphaTarget};
pub use funnel::{funnel_target, FunnelTarget};
pub use gaussian::{diag_gaussian_target, DiagGaussianTarget};
pub use level_set::{cube_level_set, ellipsoid_level_set, CubeLevelSet, EllipsoidLevelSet, UniformInterval};
pub use mog::{mog10, mog40, mog_target, MixtureSpec, MogTarget};

/// Optional parameter overrides for registry targets.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetParams {
    pub dim: Option<usize>,
    /// mixture coefficient of the `alpha` target
    pub alpha: Option<f64>,
    /// prior half-width of the `alpha` target
    pub half_width: Option<f64>,
    /// cosine amplitude of the `alpha` target
    pub amplitude: Option<f64>,
    /// funnel prior box bounds
    pub box_lo: Option<f64>,
    pub box_hi: Option<f64>,
    /// cube side length
    pub side: Option<f64>,
}

/// Instantiate a bundled target by id: `mog40`, `mog10`, `funnel10`, `alpha`,
/// `ball`, `cube`.
pub fn by_id(id: &str, params: &TargetParams) -> Result<Box<dyn Target>> {
    match id {
        "mog40" => Ok(Box::new(mog40())),
        "mog10" => Ok(Box::new(mog10())),
        "funnel10" => {
            let dim = params.dim.unwrap_or(10);
            let lo = params.box_lo.unwrap_or(-20.0);
            let hi = params.box_hi.unwrap_or(20.0);
            Ok(Box::new(funnel_target(dim, (lo, hi))?))
        }
        "alpha" => {
            let mut spec =
                AlphaLikelihoodSpec::new(params.alpha.unwrap_or(0.5), params.dim.unwrap_or(10));
            if let Some(r) = params.half_width {
                spec.half_width = r;
            }
            if let Some(a) = params.amplitude {
                spec.amplitude = a;
            }
            Ok(Box::new(alpha_target(spec)?))
        }
        "ball" => {
            let dim = params.dim.unwrap_or(10);
            Ok(Box::new(ellipsoid_level_set(EllipsoidSpec::unit_ball(dim)?)))
        }
        "cube" => {
            let dim = params.dim.unwrap_or(10);
            Ok(Box::new(cube_level_set(dim, params.side.unwrap_or(2.0))))
        }
        other => Err(Error::InvalidArgument(format!("unknown target id `{other}`"))),
    }
}
