//! Gradient-reflection constrained samplers and the evidence-deviation
//! comparison.
//!
//! Three chains move a particle inside the hard region
//! `{x : E(x) < e_min}` (intersected with the prior support) by ballistic
//! steps of size `eps`, reflecting the velocity off the boundary using the
//! energy gradient:
//!
//! - [`gmc_chain`]: reflect using the gradient at the rejected forward
//!   probe; reverse the velocity if the reflected probe is also outside.
//! - [`gmc2019_chain`]: probe forward/east/west/backward using the gradient
//!   at the current (inside) point and pick the move by the branch table.
//! - [`rss_chain`]: reflect once; if the reflected probe is outside, reject
//!   the remaining trajectory and re-randomize the velocity.
//!
//! A slice-sampling kernel over the same constraint (module [`crate::hrss`])
//! serves as the gradient-free control. [`compare_evidence`] runs
//! single-death nested sampling with each kernel on the interpolated
//! Gaussian/cosine likelihood and reports the evidence against its
//! quadrature value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrss::SliceConfig;
use crate::metric::CovarianceMetric;
use crate::nested::{evidence, ns_run, HrssKernel, NsConfig, ReplaceKernel, Replacement};
use crate::rng::{Phase, RngStream, StreamId};
use crate::target::{Point, Target};
use crate::targets::alpha::{alpha_target, AlphaLikelihoodSpec};

/// Reflective-chain configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReflectConfig {
    /// ballistic step size
    pub eps: f64,
    /// steps between velocity re-randomizations
    pub l_traj: usize,
    /// trajectories per replacement
    pub n_traj: usize,
    pub accept_lo: f64,
    pub accept_hi: f64,
    pub adapt_factor: f64,
}

impl ReflectConfig {
    /// Defaults for dimension `d`: 8-step trajectories, `25 d` of them.
    pub fn for_dim(d: usize) -> Self {
        Self {
            eps: 1.0,
            l_traj: 8,
            n_traj: 25 * d,
            accept_lo: 0.25,
            accept_hi: 0.5,
            adapt_factor: 1.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("eps must be positive".into()));
        }
        if !(0.0 < self.accept_lo && self.accept_lo < self.accept_hi && self.accept_hi < 1.0) {
            return Err(Error::InvalidConfig("need 0 < accept_lo < accept_hi < 1".into()));
        }
        if self.l_traj == 0 || self.n_traj == 0 || !(self.adapt_factor > 1.0) {
            return Err(Error::InvalidConfig("trajectory lengths and adapt factor invalid".into()));
        }
        Ok(())
    }
}

/// Householder reflection of `v` in the plane orthogonal to `grad`:
/// `v' = v - 2 (v . n) n` with `n = grad/|grad|`. Preserves `|v|`.
pub fn reflect(v: &Point, grad: &Point) -> Result<Point> {
    let norm = grad.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroGradient);
    }
    let n = grad / norm;
    Ok(v - &n * (2.0 * v.dot(&n)))
}

/// Chain bookkeeping shared by the three samplers.
#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub point: Point,
    pub energy: f64,
    pub n_evals: u64,
    pub n_grad_evals: u64,
    /// fraction of forward probes that landed inside the region
    pub inbound_frac: f64,
}

struct Probe<'a> {
    target: &'a dyn Target,
    e_min: f64,
    n_evals: u64,
    n_grad_evals: u64,
}

impl<'a> Probe<'a> {
    fn new(target: &'a dyn Target, e_min: f64) -> Self {
        Self { target, e_min, n_evals: 0, n_grad_evals: 0 }
    }

    /// Fused membership test: in the prior support and below the energy
    /// threshold. One evaluation regardless of the short circuit.
    fn inside(&mut self, x: &Point) -> Result<Option<f64>> {
        self.n_evals += 1;
        let lp = self.target.log_prior(x);
        if lp.is_nan() {
            return Err(Error::NanFromTarget);
        }
        if lp == f64::NEG_INFINITY {
            return Ok(None);
        }
        let e = self.target.energy(x);
        if e.is_nan() {
            return Err(Error::NanFromTarget);
        }
        Ok(if e < self.e_min { Some(e) } else { None })
    }

    fn grad(&mut self, x: &Point) -> Result<Point> {
        self.n_grad_evals += 1;
        self.target.energy_grad(x).ok_or(Error::MissingGradient)
    }
}

fn gaussian_velocity(d: usize, rng: &mut RngStream) -> Point {
    Point::from_fn(d, |_, _| rng.standard_normal())
}

/// Galilean Monte Carlo: reflect off the boundary with the gradient at the
/// rejected probe, reversing the velocity on a double rejection.
pub fn gmc_chain(
    x0: &Point,
    x0_energy: f64,
    e_min: f64,
    target: &dyn Target,
    cfg: &ReflectConfig,
    rng: &mut RngStream,
) -> Result<ChainOutcome> {
    cfg.validate()?;
    let mut probe = Probe::new(target, e_min);
    let mut x = x0.clone();
    let mut energy = x0_energy;
    let mut forward_in = 0u64;
    let mut steps = 0u64;
    for _ in 0..cfg.n_traj {
        let mut v = gaussian_velocity(x.len(), rng);
        for _ in 0..cfg.l_traj {
            steps += 1;
            let x1 = &x + &v * cfg.eps;
            match probe.inside(&x1)? {
                Some(e1) => {
                    forward_in += 1;
                    x = x1;
                    energy = e1;
                }
                None => {
                    let grad = probe.grad(&x1)?;
                    let reflected = reflect(&v, &grad)?;
                    let x2 = &x1 + &reflected * cfg.eps;
                    match probe.inside(&x2)? {
                        Some(e2) => {
                            x = x2;
                            energy = e2;
                            v = reflected;
                        }
                        None => v = -v,
                    }
                }
            }
        }
    }
    Ok(ChainOutcome {
        point: x,
        energy,
        n_evals: probe.n_evals,
        n_grad_evals: probe.n_grad_evals,
        inbound_frac: forward_in as f64 / steps as f64,
    })
}

/// The 2019 Galilean variant: on a rejected forward probe, evaluate the
/// east/west/backward probes with the gradient taken at the current inside
/// point, then pick the branch. The position never moves on a rejected step.
pub fn gmc2019_chain(
    x0: &Point,
    x0_energy: f64,
    e_min: f64,
    target: &dyn Target,
    cfg: &ReflectConfig,
    rng: &mut RngStream,
) -> Result<ChainOutcome> {
    cfg.validate()?;
    let mut probe = Probe::new(target, e_min);
    let mut x = x0.clone();
    let mut energy = x0_energy;
    let mut forward_in = 0u64;
    let mut steps = 0u64;
    for _ in 0..cfg.n_traj {
        let mut v = gaussian_velocity(x.len(), rng);
        for _ in 0..cfg.l_traj {
            steps += 1;
            let north = &x + &v * cfg.eps;
            match probe.inside(&north)? {
                Some(e1) => {
                    forward_in += 1;
                    x = north;
                    energy = e1;
                }
                None => {
                    let grad = probe.grad(&x)?;
                    let reflected = reflect(&v, &grad)?;
                    let east = probe.inside(&(&x + &reflected * cfg.eps))?.is_some();
                    let west = probe.inside(&(&x - &reflected * cfg.eps))?.is_some();
                    let south = probe.inside(&(&x - &v * cfg.eps))?.is_some();
                    v = if south && east && !west {
                        reflected
                    } else if south && west && !east {
                        -reflected
                    } else {
                        -v
                    };
                }
            }
        }
    }
    Ok(ChainOutcome {
        point: x,
        energy,
        n_evals: probe.n_evals,
        n_grad_evals: probe.n_grad_evals,
        inbound_frac: forward_in as f64 / steps as f64,
    })
}

/// Reflective slice sampling: one reflection attempt per boundary hit; if the
/// reflected probe is outside, the rest of the trajectory is rejected and the
/// velocity re-randomized.
pub fn rss_chain(
    x0: &Point,
    x0_energy: f64,
    e_min: f64,
    target: &dyn Target,
    cfg: &ReflectConfig,
    rng: &mut RngStream,
) -> Result<ChainOutcome> {
    cfg.validate()?;
    let mut probe = Probe::new(target, e_min);
    let mut x = x0.clone();
    let mut energy = x0_energy;
    let mut forward_in = 0u64;
    let mut steps = 0u64;
    for _ in 0..cfg.n_traj {
        let mut v = gaussian_velocity(x.len(), rng);
        let mut alive = true;
        let mut i = 0;
        while i < cfg.l_traj && alive {
            steps += 1;
            let mut x1 = &x + &v * cfg.eps;
            let mut e1 = match probe.inside(&x1)? {
                Some(e) => {
                    forward_in += 1;
                    Some(e)
                }
                None => None,
            };
            if e1.is_none() {
                let grad = probe.grad(&x1)?;
                let reflected = reflect(&v, &grad)?;
                let x2 = &x1 + &reflected * cfg.eps;
                match probe.inside(&x2)? {
                    Some(e2) => {
                        x1 = x2;
                        e1 = Some(e2);
                        v = reflected;
                    }
                    None => alive = false,
                }
            }
            if alive {
                x = x1;
                energy = e1.expect("alive implies the probe landed inside");
            }
            i += 1;
        }
    }
    Ok(ChainOutcome {
        point: x,
        energy,
        n_evals: probe.n_evals,
        n_grad_evals: probe.n_grad_evals,
        inbound_frac: forward_in as f64 / steps as f64,
    })
}

/// Which reflective chain to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectiveSampler {
    Gmc,
    Gmc2019,
    Rss,
}

fn run_chain(
    sampler: ReflectiveSampler,
    x0: &Point,
    x0_energy: f64,
    e_min: f64,
    target: &dyn Target,
    cfg: &ReflectConfig,
    rng: &mut RngStream,
) -> Result<ChainOutcome> {
    match sampler {
        ReflectiveSampler::Gmc => gmc_chain(x0, x0_energy, e_min, target, cfg, rng),
        ReflectiveSampler::Gmc2019 => gmc2019_chain(x0, x0_energy, e_min, target, cfg, rng),
        ReflectiveSampler::Rss => rss_chain(x0, x0_energy, e_min, target, cfg, rng),
    }
}

/// One application of the adaptation rule. Returns `None` when the measured
/// acceptance already lies in the target band.
pub fn adjust_eps(eps: f64, acceptance: f64, cfg: &ReflectConfig) -> Option<f64> {
    if acceptance < cfg.accept_lo {
        Some(eps / cfg.adapt_factor)
    } else if acceptance > cfg.accept_hi {
        Some(eps * cfg.adapt_factor)
    } else {
        None
    }
}

/// Tune the step size by trial trajectories until the in-bound proposal
/// fraction lies in `[accept_lo, accept_hi]`, adjusting by `adapt_factor` at
/// most 50 times. Returns the step size and whether the loop converged.
pub fn tune_eps(
    sampler: ReflectiveSampler,
    x0: &Point,
    x0_energy: f64,
    e_min: f64,
    target: &dyn Target,
    cfg: &ReflectConfig,
    rng: &mut RngStream,
) -> Result<(f64, bool)> {
    let mut trial = cfg.clone();
    trial.n_traj = 10;
    for _ in 0..50 {
        let out = run_chain(sampler, x0, x0_energy, e_min, target, &trial, rng)?;
        match adjust_eps(trial.eps, out.inbound_frac, cfg) {
            Some(next) => trial.eps = next,
            None => return Ok((trial.eps, true)),
        }
    }
    Ok((trial.eps, false))
}

/// Reflective replacement kernel for the nested-sampling outer loop. The
/// step size adapts between outer iterations from the batch-mean in-bound
/// fraction.
pub struct ReflectiveKernel {
    pub sampler: ReflectiveSampler,
    pub cfg: ReflectConfig,
}

impl ReplaceKernel for ReflectiveKernel {
    fn replace(
        &self,
        parent: &Point,
        parent_energy: f64,
        e_min: f64,
        target: &dyn Target,
        _metric: &CovarianceMetric,
        rng: &mut RngStream,
    ) -> Result<Replacement> {
        let out = run_chain(self.sampler, parent, parent_energy, e_min, target, &self.cfg, rng)?;
        Ok(Replacement {
            point: out.point,
            energy: out.energy,
            n_evals: out.n_evals,
            n_grad_evals: out.n_grad_evals,
            inbound_frac: Some(out.inbound_frac),
        })
    }

    fn adapt(&mut self, mean_inbound: Option<f64>) {
        if let Some(acc) = mean_inbound {
            if let Some(eps) = adjust_eps(self.cfg.eps, acc, &self.cfg) {
                self.cfg.eps = eps;
            }
        }
    }
}

/// Constrained sampler choice for the evidence comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstrainedSampler {
    Ss,
    Gmc,
    Gmc2019,
    Rss,
}

impl std::str::FromStr for ConstrainedSampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(Self::Ss),
            "gmc" => Ok(Self::Gmc),
            "gmc2019" => Ok(Self::Gmc2019),
            "rss" => Ok(Self::Rss),
            other => Err(Error::InvalidArgument(format!("unknown sampler `{other}`"))),
        }
    }
}

impl std::fmt::Display for ConstrainedSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Ss => "ss",
            Self::Gmc => "gmc",
            Self::Gmc2019 => "gmc2019",
            Self::Rss => "rss",
        };
        f.write_str(s)
    }
}

/// Settings for [`compare_evidence`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareConfig {
    pub m: usize,
    pub term_threshold: f64,
    pub shrink_sims: usize,
    /// slice steps per replacement for the SS kernel (defaults to the
    /// dimension)
    pub slice_steps: Option<usize>,
    /// initial reflective step size before adaptation
    pub eps0: f64,
    pub max_iters: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            term_threshold: 3.0,
            shrink_sims: 100,
            slice_steps: None,
            eps0: 1.0,
            max_iters: 5_000_000,
        }
    }
}

/// Result of one evidence comparison run.
#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub log_z: f64,
    pub geo_std: f64,
    pub oracle_log_z: f64,
    pub eval_count: u64,
    pub grad_eval_count: u64,
    pub iterations: u64,
}

/// Run single-death nested sampling on the interpolated likelihood in `d`
/// dimensions with the chosen constrained sampler and report the evidence
/// estimate next to the quadrature oracle.
pub fn compare_evidence(
    sampler: ConstrainedSampler,
    alpha: f64,
    d: usize,
    cfg: &CompareConfig,
    seed: u64,
) -> Result<CompareOutcome> {
    let target = alpha_target(AlphaLikelihoodSpec::new(alpha, d))?;
    let oracle_log_z = target.exact_log_z().expect("alpha target has quadrature evidence");

    let mut ns_cfg = NsConfig::new(cfg.m, 1);
    ns_cfg.term_threshold = cfg.term_threshold;
    ns_cfg.shrink_sims = cfg.shrink_sims;
    ns_cfg.inner = SliceConfig::with_steps(cfg.slice_steps.unwrap_or(d));

    let mut kernel: Box<dyn ReplaceKernel> = match sampler {
        ConstrainedSampler::Ss => Box::new(HrssKernel { cfg: ns_cfg.inner.clone() }),
        ConstrainedSampler::Gmc | ConstrainedSampler::Gmc2019 | ConstrainedSampler::Rss => {
            let mut rc = ReflectConfig::for_dim(d);
            rc.eps = cfg.eps0;
            let which = match sampler {
                ConstrainedSampler::Gmc => ReflectiveSampler::Gmc,
                ConstrainedSampler::Gmc2019 => ReflectiveSampler::Gmc2019,
                _ => ReflectiveSampler::Rss,
            };
            Box::new(ReflectiveKernel { sampler: which, cfg: rc })
        }
    };

    let state = ns_run(&target, &ns_cfg, kernel.as_mut(), seed, cfg.max_iters)?;
    let mut vol_rng = RngStream::new(seed, StreamId::new(Phase::Volume, 0, 0));
    let est = evidence(&state.dead, 1.0, cfg.shrink_sims, &mut vol_rng)?;
    Ok(CompareOutcome {
        log_z: est.log_z_mean,
        geo_std: est.log_z_std,
        oracle_log_z,
        eval_count: state.eval_count,
        grad_eval_count: state.grad_eval_count,
        iterations: state.iteration,
    })
}
