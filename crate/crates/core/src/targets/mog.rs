//! Gaussian-mixture benchmark targets on a bounded uniform prior.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::rng::{Phase, RngStream, StreamId};
use crate::target::{Point, Target};

/// Mixture specification.
#[derive(Clone, Debug)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Point>,
    pub covs: Vec<DMatrix<f64>>,
    /// per-dimension (lo, hi) uniform prior box
    pub prior_box: Vec<(f64, f64)>,
}

struct Component {
    mean: Point,
    chol: Cholesky<f64, Dyn>,
    /// -(d/2) ln 2pi - (1/2) ln det(cov)
    log_norm: f64,
    log_weight: f64,
}

pub struct MogTarget {
    spec: MixtureSpec,
    components: Vec<Component>,
    log_box_volume: f64,
    exact_log_z: f64,
}

/// Fixed seed for the bundled mode layouts; independent of run seeds.
const LAYOUT_SEED: u64 = 0x4d6f_4734_3062;

/// Gaussian mass of one diagonal-covariance component inside the box, as a
/// product of per-axis error functions.
fn diag_box_mass(mean: &Point, cov: &DMatrix<f64>, prior_box: &[(f64, f64)]) -> f64 {
    let mut mass = 1.0;
    for (i, &(lo, hi)) in prior_box.iter().enumerate() {
        let sigma = cov[(i, i)].sqrt();
        let a = (lo - mean[i]) / (sigma * std::f64::consts::SQRT_2);
        let b = (hi - mean[i]) / (sigma * std::f64::consts::SQRT_2);
        mass *= 0.5 * (libm::erf(b) - libm::erf(a));
    }
    mass
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Monte Carlo box mass for a full-covariance component (fixed internal
/// stream, so the value is reproducible).
fn mc_box_mass(
    mean: &Point,
    chol: &Cholesky<f64, Dyn>,
    prior_box: &[(f64, f64)],
    index: u64,
) -> f64 {
    let mut rng = RngStream::new(LAYOUT_SEED, StreamId::new(Phase::Init, 9, index));
    let d = mean.len();
    let n = 200_000;
    let mut hits = 0usize;
    for _ in 0..n {
        let z = Point::from_fn(d, |_, _| rng.standard_normal());
        let x = mean + chol.l() * z;
        if prior_box.iter().enumerate().all(|(i, &(lo, hi))| x[i] >= lo && x[i] <= hi) {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

pub fn mog_target(spec: MixtureSpec) -> Result<MogTarget> {
    let n_comp = spec.weights.len();
    if n_comp == 0 || spec.means.len() != n_comp || spec.covs.len() != n_comp {
        return Err(Error::InvalidConfig("mixture components are inconsistent".into()));
    }
    let d = spec.prior_box.len();
    let weight_sum: f64 = spec.weights.iter().sum();
    if (weight_sum - 1.0).abs() > 1e-9 || spec.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidConfig("mixture weights must be a simplex vector".into()));
    }
    if spec.prior_box.iter().any(|&(lo, hi)| !(hi > lo)) {
        return Err(Error::InvalidConfig("prior box must have positive extents".into()));
    }
    for mean in &spec.means {
        if mean.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
        }
        if mean.iter().enumerate().any(|(i, &m)| m < spec.prior_box[i].0 || m > spec.prior_box[i].1)
        {
            return Err(Error::InvalidConfig("mixture means must lie inside the prior box".into()));
        }
    }

    let log_box_volume: f64 = spec.prior_box.iter().map(|&(lo, hi)| (hi - lo).ln()).sum();
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();

    let mut components = Vec::with_capacity(n_comp);
    let mut mixture_mass = 0.0;
    for j in 0..n_comp {
        let cov = &spec.covs[j];
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig(format!("component {j} covariance is not SPD")))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|&v| 2.0 * v.ln()).sum();
        let mass = if is_diagonal(cov) {
            diag_box_mass(&spec.means[j], cov, &spec.prior_box)
        } else {
            mc_box_mass(&spec.means[j], &chol, &spec.prior_box, j as u64)
        };
        mixture_mass += spec.weights[j] * mass;
        components.push(Component {
            mean: spec.means[j].clone(),
            chol,
            log_norm: -(d as f64) * half_log_2pi - 0.5 * log_det,
            log_weight: spec.weights[j].ln(),
        });
    }

    let exact_log_z = mixture_mass.ln() - log_box_volume;
    Ok(MogTarget { spec, components, log_box_volume, exact_log_z })
}

impl MogTarget {
    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    fn component_logpdfs(&self, x: &Point) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                let delta = x - &c.mean;
                let z = c.chol.l().solve_lower_triangular(&delta).expect("SPD factor");
                c.log_weight + c.log_norm - 0.5 * z.norm_squared()
            })
            .collect()
    }

    /// Exact draw from the box-truncated mixture (ground truth for metrics).
    pub fn posterior_sample(&self, rng: &mut RngStream) -> Point {
        loop {
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (j, &w) in self.spec.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            let c = &self.components[pick];
            let z = Point::from_fn(self.dim(), |_, _| rng.standard_normal());
            let x = &c.mean + c.chol.l() * z;
            if self
                .spec
                .prior_box
                .iter()
                .enumerate()
                .all(|(i, &(lo, hi))| x[i] >= lo && x[i] <= hi)
            {
                return x;
            }
        }
    }
}

impl Target for MogTarget {
    fn dim(&self) -> usize {
        self.spec.prior_box.len()
    }

    fn log_prior(&self, x: &Point) -> f64 {
        for (i, &(lo, hi)) in self.spec.prior_box.iter().enumerate() {
            if x[i] < lo || x[i] > hi {
                return f64::NEG_INFINITY;
            }
        }
        -self.log_box_volume
    }

    fn energy(&self, x: &Point) -> f64 {
        -logsumexp(&self.component_logpdfs(x))
    }

    fn energy_grad(&self, x: &Point) -> Option<Point> {
        let logpdfs = self.component_logpdfs(x);
        let log_mix = logsumexp(&logpdfs);
        let mut grad = Point::zeros(self.dim());
        for (c, lp) in self.components.iter().zip(&logpdfs) {
            let r = (lp - log_mix).exp();
            let delta = x - &c.mean;
            let z = c.chol.l().solve_lower_triangular(&delta).expect("SPD factor");
            let sig_inv_delta =
                c.chol.l().transpose().solve_upper_triangular(&z).expect("SPD factor");
            grad += sig_inv_delta * r;
        }
        Some(grad)
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Point {
        Point::from_fn(self.dim(), |i, _| {
            let (lo, hi) = self.spec.prior_box[i];
            lo + rng.uniform() * (hi - lo)
        })
    }

    fn exact_log_z(&self) -> Option<f64> {
        Some(self.exact_log_z)
    }
}

/// 40 unit-variance bivariate modes laid out uniformly over the inner 80% of
/// a [-50, 50]^2 box (fixed seeded layout).
pub fn mog40() -> MogTarget {
    let mut rng = RngStream::new(LAYOUT_SEED, StreamId::new(Phase::Init, 0, 0));
    let n = 40;
    let means: Vec<Point> =
        (0..n).map(|_| Point::from_fn(2, |_, _| (2.0 * rng.uniform() - 1.0) * 40.0)).collect();
    let spec = MixtureSpec {
        weights: vec![1.0 / n as f64; n],
        means,
        covs: vec![DMatrix::identity(2, 2); n],
        prior_box: vec![(-50.0, 50.0); 2],
    };
    mog_target(spec).expect("bundled layout is valid")
}

/// Five 10-dimensional modes with seeded random means and diagonal
/// covariances inside a [-50, 50]^10 box.
pub fn mog10() -> MogTarget {
    let mut rng = RngStream::new(LAYOUT_SEED, StreamId::new(Phase::Init, 1, 0));
    let d = 10;
    let n = 5;
    let means: Vec<Point> =
        (0..n).map(|_| Point::from_fn(d, |_, _| (2.0 * rng.uniform() - 1.0) * 40.0)).collect();
    let covs: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            DMatrix::from_fn(d, d, |i, j| if i == j { 0.5 + 1.5 * rng.uniform() } else { 0.0 })
        })
        .collect();
    let spec = MixtureSpec {
        weights: vec![1.0 / n as f64; n],
        means,
        covs,
        prior_box: vec![(-50.0, 50.0); d],
    };
    mog_target(spec).expect("bundled layout is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::central_difference_grad;

    fn stream(ix: u64) -> RngStream {
        RngStream::new(404, StreamId::new(Phase::Validate, 3, ix))
    }

    #[test]
    fn single_component_in_huge_box() {
        let spec = MixtureSpec {
            weights: vec![1.0],
            means: vec![Point::zeros(2)],
            covs: vec![DMatrix::identity(2, 2)],
            prior_box: vec![(-500.0, 500.0); 2],
        };
        let t = mog_target(spec).unwrap();
        let expect = -(1000.0f64 * 1000.0).ln();
        assert!((t.exact_log_z().unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn bundled_mog40_truth() {
        let t = mog40();
        assert!((t.exact_log_z().unwrap() - (-10_000.0f64.ln())).abs() < 1e-9);
        assert!((t.exact_log_z().unwrap() + 9.2103).abs() < 1e-3);
    }

    #[test]
    fn bundled_mog10_truth() {
        let t = mog10();
        let expect = -10.0 * 100.0f64.ln();
        assert!((t.exact_log_z().unwrap() - expect).abs() < 1e-9);
        assert!((expect + 46.052).abs() < 1e-3);
    }

    #[test]
    fn full_covariance_mass_is_consistent_with_diagonal() {
        // same diagonal matrix entered as "full" (tiny asymmetry-free
        // off-diagonal zeros are exact) must give the same evidence via the
        // MC path
        let mut cov = DMatrix::identity(2, 2);
        cov[(0, 1)] = 0.3;
        cov[(1, 0)] = 0.3;
        let spec = MixtureSpec {
            weights: vec![1.0],
            means: vec![Point::zeros(2)],
            covs: vec![cov],
            prior_box: vec![(-50.0, 50.0); 2],
        };
        let t = mog_target(spec).unwrap();
        // mass inside the huge box is 1 up to MC resolution
        let expect = -(100.0f64 * 100.0).ln();
        assert!((t.exact_log_z().unwrap() - expect).abs() < 1e-3);
    }

    #[test]
    fn invalid_specs_error() {
        let bad_weights = MixtureSpec {
            weights: vec![0.7, 0.7],
            means: vec![Point::zeros(1), Point::zeros(1)],
            covs: vec![DMatrix::identity(1, 1); 2],
            prior_box: vec![(-1.0, 1.0)],
        };
        assert!(mog_target(bad_weights).is_err());
        let mean_outside = MixtureSpec {
            weights: vec![1.0],
            means: vec![Point::from_vec(vec![5.0])],
            covs: vec![DMatrix::identity(1, 1)],
            prior_box: vec![(-1.0, 1.0)],
        };
        assert!(mog_target(mean_outside).is_err());
    }

    #[test]
    fn prior_samples_in_support_and_energy_finite_at_modes() {
        let t = mog40();
        let mut rng = stream(0);
        for _ in 0..10_000 {
            let x = t.prior_sample(&mut rng);
            assert!(t.log_prior(&x).is_finite());
        }
        for mean in &t.spec().means {
            assert!(t.energy(mean).is_finite());
        }
    }

    #[test]
    fn posterior_sampler_component_frequencies() {
        let t = mog10();
        let mut rng = stream(1);
        let n = 100_000;
        let mut counts = vec![0usize; 5];
        for _ in 0..n {
            let x = t.posterior_sample(&mut rng);
            // nearest mean identifies the component (modes are far apart)
            let (j, _) = t
                .spec()
                .means
                .iter()
                .enumerate()
                .map(|(j, m)| (j, (m - &x).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            counts[j] += 1;
        }
        let se = (0.2 * 0.8 / n as f64).sqrt();
        for &c in &counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.2).abs() < 3.0 * se, "frequency {f}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = mog40();
        let mut rng = stream(2);
        for _ in 0..5 {
            let x = t.posterior_sample(&mut rng);
            let g = t.energy_grad(&x).unwrap();
            let fd = central_difference_grad(&t, &x, 1e-5);
            let rel = (&g - &fd).norm() / fd.norm().max(1.0);
            assert!(rel < 1e-4, "relative error {rel}");
        }
    }
}
