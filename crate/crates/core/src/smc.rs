//! Adaptive tempered sequential Monte Carlo baselines.
//!
//! The sampler bridges prior and posterior through the tempered family
//! `pi_beta(x) ~ Pi(x) exp(-beta E(x))`. Each stage picks the next
//! temperature so the effective sample size of the incremental weights hits
//! `rho * m`, accumulates the normalizing-constant ratio, resamples, and
//! mutates every particle with a random-walk, independent, or slice kernel
//! targeting the new temperature.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrss::{slice_along_line, SliceConfig};
use crate::math::{logsumexp, multinomial_indices};
use crate::metric::{draw_direction, CovarianceMetric};
use crate::rng::{Phase, RngStream, StreamId};
use crate::target::{Point, Target};

/// Mutation kernel choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKernel {
    Rw,
    Irmh,
    Ss,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmcConfig {
    pub m: usize,
    /// ESS target as a fraction of m
    pub ess_target: f64,
    pub kernel: MutationKernel,
    /// mutation transitions per particle per stage
    pub inner_steps: usize,
    /// random-walk proposal scale; defaults to 2.38^2 / d
    pub rw_scale: Option<f64>,
    pub max_stages: usize,
    /// slice kernel settings (width and caps; `steps` is taken from
    /// `inner_steps`)
    pub slice: SliceConfig,
    pub metric_reg: f64,
    pub init_attempt_factor: usize,
}

impl SmcConfig {
    pub fn new(m: usize, kernel: MutationKernel, inner_steps: usize) -> Self {
        Self {
            m,
            ess_target: 0.9,
            kernel,
            inner_steps,
            rw_scale: None,
            max_stages: 1000,
            slice: SliceConfig::default(),
            metric_reg: 1e-6,
            init_attempt_factor: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig("need at least 2 particles".into()));
        }
        if !(self.ess_target > 0.0 && self.ess_target < 1.0) {
            return Err(Error::InvalidConfig("ess_target must lie in (0, 1)".into()));
        }
        if self.inner_steps < 1 {
            return Err(Error::InvalidConfig("inner_steps must be >= 1".into()));
        }
        self.slice.validate()
    }
}

/// Particle-system state.
pub struct SmcState {
    pub particles: Vec<Point>,
    pub energies: Vec<f64>,
    pub log_priors: Vec<f64>,
    pub beta: f64,
    pub log_z: f64,
    pub stage: u64,
    pub eval_count: u64,
    pub beta_ladder: Vec<f64>,
    pub master_seed: u64,
}

/// log ESS of normalized weights `exp(-dbeta * E_i)`.
fn log_ess(energies: &[f64], dbeta: f64) -> f64 {
    let logw: Vec<f64> = energies.iter().map(|&e| -dbeta * e).collect();
    let logw2: Vec<f64> = energies.iter().map(|&e| -2.0 * dbeta * e).collect();
    2.0 * logsumexp(&logw) - logsumexp(&logw2)
}

/// Choose the next temperature by bisection so that `ESS(beta) = rho * m`,
/// returning 1.0 whenever even the full step keeps the ESS above target.
pub fn next_temperature(energies: &[f64], beta_t: f64, rho: f64) -> f64 {
    debug_assert!(beta_t < 1.0);
    let m = energies.len() as f64;
    let target = (rho * m).ln();
    let full = 1.0 - beta_t;
    if log_ess(energies, full) >= target {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, full);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if log_ess(energies, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    beta_t + 0.5 * (lo + hi)
}

/// Outcome of a mutation chain.
pub struct MutOutcome {
    pub point: Point,
    pub energy: f64,
    pub log_prior: f64,
    pub n_evals: u64,
    pub n_accept: u64,
}

/// Random-walk proposal: Cholesky factor of `scale * cov`.
pub struct RwProposal {
    lower: DMatrix<f64>,
}

impl RwProposal {
    pub fn new(cov: DMatrix<f64>, scale: f64) -> Result<Self> {
        let chol = (cov * scale).cholesky().ok_or(Error::SingularProposal)?;
        Ok(Self { lower: chol.l() })
    }
}

/// `p` Metropolis-Hastings steps with a Gaussian random-walk proposal,
/// targeting `Pi(x) exp(-beta E(x))`.
pub fn mutate_rw(
    x0: &Point,
    energy0: f64,
    log_prior0: f64,
    beta: f64,
    target: &dyn Target,
    prop: &RwProposal,
    p: usize,
    rng: &mut RngStream,
) -> Result<MutOutcome> {
    let d = x0.len();
    let mut x = x0.clone();
    let mut energy = energy0;
    let mut log_prior = log_prior0;
    let mut n_evals = 0;
    let mut n_accept = 0;
    for _ in 0..p {
        let z = Point::from_fn(d, |_, _| rng.standard_normal());
        let y = &x + &prop.lower * z;
        let lp = target.log_prior(&y);
        let (e, log_ratio) = if lp == f64::NEG_INFINITY {
            (f64::INFINITY, f64::NEG_INFINITY)
        } else {
            let e = target.energy(&y);
            if e.is_nan() || lp.is_nan() {
                return Err(Error::NanFromTarget);
            }
            let num = lp - beta * e;
            let den = log_prior - beta * energy;
            (e, num - den)
        };
        n_evals += 1;
        if log_ratio >= 0.0 || rng.uniform().ln() < log_ratio {
            x = y;
            energy = e;
            log_prior = lp;
            n_accept += 1;
        }
    }
    Ok(MutOutcome { point: x, energy, log_prior, n_evals, n_accept })
}

/// Independent Gaussian proposal fitted from the particle cloud.
pub struct GaussianProposal {
    mean: Point,
    chol: Cholesky<f64, Dyn>,
    /// -(d/2) ln 2pi - (1/2) ln det(cov)
    log_norm: f64,
}

impl GaussianProposal {
    pub fn new(mean: Point, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = cov.cholesky().ok_or(Error::SingularProposal)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|&v| 2.0 * v.ln()).sum();
        let log_norm = -0.5 * (d as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
        Ok(Self { mean, chol, log_norm })
    }

    pub fn log_pdf(&self, x: &Point) -> f64 {
        let delta = x - &self.mean;
        let z = self.chol.l().solve_lower_triangular(&delta).expect("SPD factor");
        self.log_norm - 0.5 * z.norm_squared()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Point {
        let z = Point::from_fn(self.mean.len(), |_, _| rng.standard_normal());
        &self.mean + self.chol.l() * z
    }
}

/// `p` independence-MH steps; the acceptance ratio includes the proposal
/// density ratio.
pub fn mutate_irmh(
    x0: &Point,
    energy0: f64,
    log_prior0: f64,
    beta: f64,
    target: &dyn Target,
    prop: &GaussianProposal,
    p: usize,
    rng: &mut RngStream,
) -> Result<MutOutcome> {
    let mut x = x0.clone();
    let mut energy = energy0;
    let mut log_prior = log_prior0;
    let mut log_q = prop.log_pdf(&x);
    let mut n_evals = 0;
    let mut n_accept = 0;
    for _ in 0..p {
        let y = prop.sample(rng);
        let lp = target.log_prior(&y);
        let (e, log_ratio, lq_y) = if lp == f64::NEG_INFINITY {
            (f64::INFINITY, f64::NEG_INFINITY, 0.0)
        } else {
            let e = target.energy(&y);
            if e.is_nan() || lp.is_nan() {
                return Err(Error::NanFromTarget);
            }
            let lq_y = prop.log_pdf(&y);
            let num = lp - beta * e - lq_y;
            let den = log_prior - beta * energy - log_q;
            (e, num - den, lq_y)
        };
        n_evals += 1;
        if log_ratio >= 0.0 || rng.uniform().ln() < log_ratio {
            x = y;
            energy = e;
            log_prior = lp;
            log_q = lq_y;
            n_accept += 1;
        }
    }
    Ok(MutOutcome { point: x, energy, log_prior, n_evals, n_accept })
}

/// `p` hit-and-run slice steps on the full tempered log density
/// `log Pi(x) - beta E(x)` (no hard constraint).
pub fn mutate_ss(
    x0: &Point,
    energy0: f64,
    log_prior0: f64,
    beta: f64,
    target: &dyn Target,
    metric: &CovarianceMetric,
    cfg: &SliceConfig,
    p: usize,
    rng: &mut RngStream,
) -> Result<MutOutcome> {
    if !(log_prior0 - beta * energy0).is_finite() {
        return Err(Error::StartOutsideSupport);
    }
    let mut x = x0.clone();
    let mut energy = energy0;
    let mut log_prior = log_prior0;
    let mut n_evals = 0;
    for _ in 0..p {
        let v = draw_direction(metric, rng);
        let height = rng.uniform().ln() + log_prior - beta * energy;
        let mut saw_nan = false;
        let outcome = slice_along_line(
            |t| {
                let y = &x + &v * t;
                let lp = target.log_prior(&y);
                if lp.is_nan() {
                    saw_nan = true;
                    return None;
                }
                if lp == f64::NEG_INFINITY {
                    return None;
                }
                let e = target.energy(&y);
                if e.is_nan() {
                    saw_nan = true;
                    return None;
                }
                if lp - beta * e >= height {
                    Some((y, e, lp))
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
        n_evals += outcome.n_evals();
        if let Some((_, (y, e, lp))) = outcome.accepted {
            x = y;
            energy = e;
            log_prior = lp;
        }
    }
    Ok(MutOutcome { point: x, energy, log_prior, n_evals, n_accept: 0 })
}

/// Weighted mean and covariance of the particle cloud (weights normalized
/// internally).
pub fn weighted_mean_cov(points: &[Point], weights: &[f64]) -> (Point, DMatrix<f64>) {
    let d = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut mean = Point::zeros(d);
    for (p, &w) in points.iter().zip(weights) {
        mean += p * (w / total);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (p, &w) in points.iter().zip(weights) {
        let c = p - &mean;
        cov.syger(w / total, &c, &c, 1.0);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    (mean, cov)
}

/// Initialize from the prior (rejecting non-finite energies).
pub fn smc_init(target: &dyn Target, cfg: &SmcConfig, seed: u64) -> Result<SmcState> {
    cfg.validate()?;
    let mut rng = RngStream::new(seed, StreamId::new(Phase::Init, 0, 0));
    let budget = cfg.init_attempt_factor * cfg.m;
    let mut particles = Vec::with_capacity(cfg.m);
    let mut energies = Vec::with_capacity(cfg.m);
    let mut log_priors = Vec::with_capacity(cfg.m);
    let mut attempts = 0usize;
    while particles.len() < cfg.m {
        if attempts >= budget {
            return Err(Error::PriorSupportMismatch { attempts });
        }
        let x = target.prior_sample(&mut rng);
        attempts += 1;
        let e = target.energy(&x);
        if e.is_nan() {
            return Err(Error::NanFromTarget);
        }
        if e.is_finite() {
            log_priors.push(target.log_prior(&x));
            energies.push(e);
            particles.push(x);
        }
    }
    Ok(SmcState {
        particles,
        energies,
        log_priors,
        beta: 0.0,
        log_z: 0.0,
        stage: 0,
        eval_count: attempts as u64,
        beta_ladder: vec![0.0],
        master_seed: seed,
    })
}

/// One tempering stage: reweight, accumulate the evidence increment,
/// resample, mutate.
pub fn smc_stage(state: &mut SmcState, cfg: &SmcConfig, target: &dyn Target) -> Result<()> {
    debug_assert!(state.beta < 1.0);
    let m = cfg.m;
    let beta_next = next_temperature(&state.energies, state.beta, cfg.ess_target);
    let dbeta = beta_next - state.beta;

    let log_w: Vec<f64> = state.energies.iter().map(|&e| -dbeta * e).collect();
    if log_w.iter().any(|w| w.is_nan()) {
        return Err(Error::NanFromTarget);
    }
    state.log_z += logsumexp(&log_w) - (m as f64).ln();

    let max_logw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|&w| (w - max_logw).exp()).collect();

    // proposal fits come from the weighted cloud, before resampling
    let (mean, cov) = weighted_mean_cov(&state.particles, &weights);
    let d = state.particles[0].len();
    enum Prop {
        Rw(RwProposal),
        Irmh(GaussianProposal),
        Ss(CovarianceMetric),
    }
    let prop = match cfg.kernel {
        MutationKernel::Rw => {
            let scale = cfg.rw_scale.unwrap_or(2.38 * 2.38 / d as f64);
            Prop::Rw(RwProposal::new(cov, scale)?)
        }
        MutationKernel::Irmh => Prop::Irmh(GaussianProposal::new(mean, cov)?),
        MutationKernel::Ss => Prop::Ss(CovarianceMetric::from_covariance(cov, cfg.metric_reg)?),
    };

    let mut resample_rng =
        RngStream::new(state.master_seed, StreamId::new(Phase::Resample, state.stage, 0));
    let ancestry = multinomial_indices(&weights, m, &mut resample_rng)?;

    let seed = state.master_seed;
    let stage = state.stage;
    let p = cfg.inner_steps;
    let slice_cfg = cfg.slice.clone();
    let outcomes: Result<Vec<MutOutcome>> = ancestry
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut rng = RngStream::new(seed, StreamId::new(Phase::Mutate, stage, i as u64));
            let x = &state.particles[a];
            let e = state.energies[a];
            let lp = state.log_priors[a];
            match &prop {
                Prop::Rw(rw) => mutate_rw(x, e, lp, beta_next, target, rw, p, &mut rng),
                Prop::Irmh(g) => mutate_irmh(x, e, lp, beta_next, target, g, p, &mut rng),
                Prop::Ss(metric) => {
                    mutate_ss(x, e, lp, beta_next, target, metric, &slice_cfg, p, &mut rng)
                }
            }
        })
        .collect();
    let outcomes = outcomes?;

    state.particles.clear();
    state.energies.clear();
    state.log_priors.clear();
    for out in outcomes {
        state.eval_count += out.n_evals;
        state.particles.push(out.point);
        state.energies.push(out.energy);
        state.log_priors.push(out.log_prior);
    }
    state.beta = beta_next;
    state.beta_ladder.push(beta_next);
    state.stage += 1;
    Ok(())
}

/// Run the full temperature ladder to beta = 1.
pub fn smc_run(target: &dyn Target, cfg: &SmcConfig, seed: u64) -> Result<SmcState> {
    let mut state = smc_init(target, cfg, seed)?;
    while state.beta < 1.0 {
        if state.stage as usize >= cfg.max_stages {
            return Err(Error::MaxStagesExceeded { max: cfg.max_stages });
        }
        smc_stage(&mut state, cfg, target)?;
    }
    Ok(state)
}
