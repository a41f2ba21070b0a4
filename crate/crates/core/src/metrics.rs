//! Sample-quality metrics: kernel MMD, sliced 2-Wasserstein distance, and
//! Kish effective sample size.

use crate::error::{Error, Result};
use crate::metric::{draw_direction, CovarianceMetric};
use crate::rng::RngStream;
use crate::target::Point;

/// Median of pairwise distances over the pooled set, excluding zero
/// distances.
pub fn median_heuristic_bandwidth(x: &[Point], y: &[Point]) -> Result<f64> {
    let pooled: Vec<&Point> = x.iter().chain(y.iter()).collect();
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            let d = (pooled[i] - pooled[j]).norm();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::DegenerateBandwidth);
    }
    dists.sort_unstable_by(f64::total_cmp);
    let n = dists.len();
    Ok(if n % 2 == 1 { dists[n / 2] } else { 0.5 * (dists[n / 2 - 1] + dists[n / 2]) })
}

/// MMD with a fixed Gaussian kernel bandwidth: U-statistic within-set terms,
/// V-statistic cross term, clamped at zero before the square root.
pub fn mmd_with_bandwidth(x: &[Point], y: &[Point], sigma: f64) -> Result<f64> {
    let (n, m) = (x.len(), y.len());
    if n < 2 || m < 2 {
        return Err(Error::TooFewPoints { need: 2, got: n.min(m) });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("bandwidth must be positive".into()));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let k = |a: &Point, b: &Point| (-(a - b).norm_squared() * inv).exp();

    let mut xx = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            xx += k(&x[i], &x[j]);
        }
    }
    xx *= 2.0 / (n as f64 * (n - 1) as f64);

    let mut yy = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            yy += k(&y[i], &y[j]);
        }
    }
    yy *= 2.0 / (m as f64 * (m - 1) as f64);

    let mut xy = 0.0;
    for xi in x {
        for yj in y {
            xy += k(xi, yj);
        }
    }
    xy /= (n * m) as f64;

    Ok((xx - 2.0 * xy + yy).max(0.0).sqrt())
}

/// MMD with the median-heuristic bandwidth.
pub fn mmd(x: &[Point], y: &[Point]) -> Result<f64> {
    let sigma = median_heuristic_bandwidth(x, y)?;
    mmd_with_bandwidth(x, y, sigma)
}

/// Sliced 2-Wasserstein distance: the root of the mean (over random unit
/// directions) of the sorted-projection squared distance.
pub fn sliced_w2(x: &[Point], y: &[Point], n_proj: usize, rng: &mut RngStream) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SampleCountMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() || n_proj == 0 {
        return Err(Error::InvalidArgument("need samples and at least one projection".into()));
    }
    let d = x[0].len();
    let n = x.len();
    let sphere = CovarianceMetric::identity(d);
    let mut total = 0.0;
    let mut px = vec![0.0f64; n];
    let mut py = vec![0.0f64; n];
    for _ in 0..n_proj {
        let theta = draw_direction(&sphere, rng);
        for (i, p) in x.iter().enumerate() {
            px[i] = p.dot(&theta);
        }
        for (i, p) in y.iter().enumerate() {
            py[i] = p.dot(&theta);
        }
        px.sort_unstable_by(f64::total_cmp);
        py.sort_unstable_by(f64::total_cmp);
        let sq: f64 = px.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum();
        total += sq / n as f64;
    }
    Ok((total / n_proj as f64).sqrt())
}

/// Kish effective sample size `(sum w)^2 / sum w^2`.
pub fn kish_ess(weights: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("weight {w} is not finite nonnegative")));
        }
        sum += w;
        sum_sq += w * w;
    }
    if sum_sq == 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(sum * sum / sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Phase, StreamId};

    fn stream(ix: u64) -> RngStream {
        RngStream::new(606, StreamId::new(Phase::Projection, 0, ix))
    }

    fn cloud(seed: u64, n: usize, d: usize, shift: f64) -> Vec<Point> {
        let mut rng = stream(1000 + seed);
        (0..n).map(|_| Point::from_fn(d, |_, _| rng.standard_normal() + shift)).collect()
    }

    #[test]
    fn mmd_zero_on_identical_inputs() {
        let x = cloud(0, 64, 3, 0.0);
        assert!(mmd(&x, &x).unwrap() < 1e-12);
    }

    #[test]
    fn two_cluster_limit_with_fixed_bandwidth() {
        // far-separated duplicate pairs: cross kernel -> 0, within -> 1
        let a = vec![Point::from_vec(vec![0.0]); 2];
        let b = vec![Point::from_vec(vec![1e8]); 2];
        let v = mmd_with_bandwidth(&a, &b, 1.0).unwrap();
        assert!((v - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_cluster_limit_with_median_bandwidth() {
        // with the median heuristic the bandwidth tracks the separation, so
        // the cross kernel tends to exp(-1/2) instead of 0
        let a = vec![Point::from_vec(vec![0.0]); 2];
        let b = vec![Point::from_vec(vec![1e8]); 2];
        let v = mmd(&a, &b).unwrap();
        let expect = (2.0 - 2.0 * (-0.5f64).exp()).sqrt();
        assert!((v - expect).abs() < 1e-9, "mmd {v} vs {expect}");
    }

    #[test]
    fn mmd_is_symmetric() {
        let x = cloud(1, 50, 2, 0.0);
        let y = cloud(2, 40, 2, 0.5);
        let a = mmd(&x, &y).unwrap();
        let b = mmd(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(a >= 0.0);
    }

    #[test]
    fn degenerate_bandwidth_is_an_error() {
        let x = vec![Point::zeros(2); 3];
        assert!(matches!(mmd(&x, &x), Err(Error::DegenerateBandwidth)));
    }

    #[test]
    fn bandwidth_invariant_under_pooled_permutation() {
        let x = cloud(3, 30, 2, 0.0);
        let y = cloud(4, 30, 2, 1.0);
        let a = median_heuristic_bandwidth(&x, &y).unwrap();
        let b = median_heuristic_bandwidth(&y, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn w2_zero_on_identical_inputs() {
        let x = cloud(5, 40, 3, 0.0);
        assert!(sliced_w2(&x, &x, 50, &mut stream(0)).unwrap() < 1e-12);
    }

    #[test]
    fn w2_one_point_one_dim_is_absolute_distance() {
        let x = vec![Point::from_vec(vec![0.0])];
        let y = vec![Point::from_vec(vec![-2.5])];
        let v = sliced_w2(&x, &y, 10, &mut stream(1)).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn w2_translation_in_two_dims() {
        // for a pure shift delta
        // W2 per direction is |delta . theta|, so the root-mean-square over
        // the circle is |delta| / sqrt(2)
        let n = 2000;
        let delta = 1.7;
        let x = cloud(6, n, 2, 0.0);
        let y: Vec<Point> =
            x.iter().map(|p| Point::from_vec(vec![p[0] + delta, p[1]])).collect();
        let v = sliced_w2(&x, &y, 400, &mut stream(2)).unwrap();
        let expect = delta / 2.0f64.sqrt();
        assert!((v - expect).abs() / expect < 0.05, "w2 {v} vs {expect}");
    }

    #[test]
    fn w2_shrinks_as_same_distribution_clouds_grow() {
        let small = sliced_w2(&cloud(7, 100, 2, 0.0), &cloud(8, 100, 2, 0.0), 100, &mut stream(3))
            .unwrap();
        let large =
            sliced_w2(&cloud(9, 10_000, 2, 0.0), &cloud(10, 10_000, 2, 0.0), 100, &mut stream(4))
                .unwrap();
        assert!(large < small, "large {large} vs small {small}");
    }

    #[test]
    fn w2_rejects_unequal_counts() {
        let x = cloud(11, 10, 2, 0.0);
        let y = cloud(12, 11, 2, 0.0);
        assert!(matches!(
            sliced_w2(&x, &y, 10, &mut stream(5)),
            Err(Error::SampleCountMismatch { .. })
        ));
    }

    #[test]
    fn kish_values() {
        assert_eq!(kish_ess(&[1.0; 7]).unwrap(), 7.0);
        assert_eq!(kish_ess(&[0.0, 5.0, 0.0]).unwrap(), 1.0);
        let v = kish_ess(&[0.5, 0.25, 0.25]).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-12);
        assert!(kish_ess(&[0.0, 0.0]).is_err());
    }
}
