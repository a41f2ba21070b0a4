//! Small numeric helpers used throughout the crate.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// log(sum(exp(v))) with the usual max shift. Returns -inf on an empty or
/// all -inf input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max; // empty, all -inf, or +inf dominates
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Two-argument logsumexp.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Sample mean and standard deviation (n-1 denominator; std is 0 for n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Draw `n` indices proportional to nonnegative `weights`.
pub fn multinomial_indices(weights: &[f64], n: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("weight {w} is not finite nonnegative")));
        }
        total += w;
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let draws = (0..n)
        .map(|_| {
            let u = rng.uniform() * total;
            cum.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect();
    Ok(draws)
}
