//! Small statistics toolkit for Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Mean and standard error `s / √M` (sample standard deviation).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    assert!(m >= 2, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / m as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Unbiased sample variance and its standard error for approximately normal data.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = sq.iter().sum::<f64>() / (m - 1.0);
    let (_, se) = mean_se(&sq);
    (var, se * m / (m - 1.0))
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "slope needs two points");
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Kolmogorov-Smirnov distance between the sample and `N(0, sd²)`.
pub fn ks_normal(samples: &[f64], sd: f64) -> f64 {
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

/// `½ Σ |counts/M - probs|`.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let m: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 / m as f64 - p).abs())
        .sum::<f64>()
}

/// Pearson statistic and upper-tail p-value against expected probabilities.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, f64) {
    let m: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * m as f64;
            (c as f64 - e) * (c as f64 - e) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("at least two cells");
    (stat, 1.0 - dist.cdf(stat))
}

/// Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    /// Replica `i` used stream `i` of `seed`.
    pub streams: usize,
    pub wall_seconds: f64,
}

impl ExperimentEstimate {
    pub fn from_samples(xs: &[f64], seed: u64, wall_seconds: f64) -> Self {
        let (mean, std_error) = mean_se(xs);
        ExperimentEstimate {
            mean,
            std_error,
            samples: xs.len(),
            seed,
            streams: xs.len(),
            wall_seconds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mean_and_slope() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() <= 1e-15);
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn ks_accepts_gaussian_and_rejects_shifted() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.5 * z
            })
            .collect();
        assert!(ks_normal(&xs, 0.5) < ks_critical_1pct(xs.len()));
        assert!(ks_normal(&xs, 0.6) > ks_critical_1pct(xs.len()));
        let (v, se) = variance_se(&xs);
        assert!((v - 0.25).abs() < 4.0 * se);
    }

    #[test]
    fn tv_and_chi_square() {
        assert_eq!(total_variation(&[5, 5], &[0.5, 0.5]), 0.0);
        assert!((total_variation(&[10, 0], &[0.5, 0.5]) - 0.5).abs() <= 1e-15);
        let (s, p) = chi_square(&[50, 50], &[0.5, 0.5]);
        assert_eq!(s, 0.0);
        assert!((p - 1.0).abs() <= 1e-12);
    }
}
