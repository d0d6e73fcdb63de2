//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckResult {
    pub max_relative_error: f64,
    /// One entry per probed coordinate, in probe order.
    pub per_parameter_errors: Vec<f64>,
    /// Indices of the probed coordinates.
    pub probed: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates to probe; every coordinate is checked when there are at
    /// most this many.
    pub max_probes: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_probes: 64,
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn grad_check<F>(f: F, params: &[f64], probe_seed: u64) -> Result<GradCheckResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    grad_check_with(f, params, probe_seed, GradCheckOptions::default())
}

/// Compares the analytic gradient returned by `f` with central differences
/// on a seeded subset of coordinates.
pub fn grad_check_with<F>(
    mut f: F,
    params: &[f64],
    probe_seed: u64,
    options: GradCheckOptions,
) -> Result<GradCheckResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (_, analytic) = f(params)?;
    let probed: Vec<usize> = if params.len() <= options.max_probes {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
        let mut idx = sample(&mut rng, params.len(), options.max_probes).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut work = params.to_vec();
    let mut errors = Vec::with_capacity(probed.len());
    for &i in &probed {
        let orig = work[i];
        work[i] = orig + options.step;
        let (plus, _) = f(&work)?;
        work[i] = orig - options.step;
        let (minus, _) = f(&work)?;
        work[i] = orig;
        let numeric = (plus - minus) / (2.0 * options.step);
        errors.push(relative_error(analytic[i], numeric));
    }
    Ok(GradCheckResult {
        max_relative_error: errors.iter().copied().fold(0.0, f64::max),
        per_parameter_errors: errors,
        probed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let w: Vec<f64> = (0..10).map(|i| i as f64 * 0.37 - 1.5).collect();
        let res = grad_check(
            |p| {
                Ok((
                    p.iter().map(|x| x * x).sum(),
                    p.iter().map(|x| 2.0 * x).collect(),
                ))
            },
            &w,
            0,
        )
        .unwrap();
        assert!(res.max_relative_error < 1e-7, "{}", res.max_relative_error);
        assert_eq!(res.per_parameter_errors.len(), 10);
        let max = res.per_parameter_errors.iter().copied().fold(0.0, f64::max);
        assert_eq!(max, res.max_relative_error);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let res = grad_check(|p| Ok((p[0] * p[0], vec![p[0]])), &[1.0], 0).unwrap();
        assert!(res.max_relative_error > 0.4);
    }

    #[test]
    fn probes_a_seeded_subset() {
        let w = vec![0.5; 500];
        let f = |p: &[f64]| Ok((p.iter().sum::<f64>(), vec![1.0; p.len()]));
        let a = grad_check(f, &w, 4).unwrap();
        let b = grad_check(f, &w, 4).unwrap();
        assert_eq!(a.probed.len(), 64);
        assert_eq!(a.probed, b.probed);
    }
}
