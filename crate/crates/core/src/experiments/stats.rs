//! Estimators and fits used by every experiment runner.
//!
//! Reductions over trials run in a fixed order with compensated summation,
//! so results do not depend on the worker count.

use crate::scalar::C64;
use num::complex::Complex64;
use serde::Serialize;

/// Monte Carlo mean with its standard error.
#[derive(Clone, Debug, Serialize)]
pub struct MomentEstimate {
    pub mean: C64,
    /// sqrt((var_re + var_im) / trials); zero for deterministic samples.
    pub stderr: f64,
    pub trials: usize,
}

/// Kahan-compensated sum in slice order.
fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Sample mean and stderr of complex trial values, parts tracked separately.
pub fn estimate_complex(values: &[C64]) -> MomentEstimate {
    let n = values.len();
    assert!(n >= 1, "estimate needs at least one trial");
    let mean_re = kahan_sum(values.iter().map(|z| z.re)) / n as f64;
    let mean_im = kahan_sum(values.iter().map(|z| z.im)) / n as f64;
    let mean = Complex64::new(mean_re, mean_im);
    if n < 2 {
        return MomentEstimate { mean, stderr: 0.0, trials: n };
    }
    let var_re = kahan_sum(values.iter().map(|z| (z.re - mean_re) * (z.re - mean_re)))
        / (n - 1) as f64;
    let var_im = kahan_sum(values.iter().map(|z| (z.im - mean_im) * (z.im - mean_im)))
        / (n - 1) as f64;
    let stderr = ((var_re + var_im) / n as f64).sqrt();
    MomentEstimate { mean, stderr, trials: n }
}

/// Sample variance (complex parts pooled) and standardized central moments.
#[derive(Clone, Debug, Serialize)]
pub struct FluctuationStats {
    pub mean: C64,
    pub mean_stderr: f64,
    /// Variance of the real part plus variance of the imaginary part.
    pub variance: f64,
    /// stderr of the variance estimate under approximate normality.
    pub variance_stderr: f64,
    /// Standardized third central moment of the real part.
    pub skewness: f64,
    /// Excess kurtosis of the real part; 0 for a Gaussian.
    pub excess_kurtosis: f64,
    /// stderr of skewness / excess kurtosis under the Gaussian null.
    pub skewness_stderr: f64,
    pub kurtosis_stderr: f64,
    pub trials: usize,
}

pub fn fluctuation_stats(values: &[C64]) -> FluctuationStats {
    let est = estimate_complex(values);
    let n = values.len();
    let nf = n as f64;
    let mre = est.mean.re;
    let var_re =
        kahan_sum(values.iter().map(|z| (z.re - mre) * (z.re - mre))) / (nf - 1.0);
    let mim = est.mean.im;
    let var_im =
        kahan_sum(values.iter().map(|z| (z.im - mim) * (z.im - mim))) / (nf - 1.0);
    let variance = var_re + var_im;
    let m3 = kahan_sum(values.iter().map(|z| (z.re - mre).powi(3))) / nf;
    let m4 = kahan_sum(values.iter().map(|z| (z.re - mre).powi(4))) / nf;
    let sd = var_re.max(1e-300).sqrt();
    let skewness = m3 / sd.powi(3);
    let excess_kurtosis = m4 / (var_re.max(1e-300) * var_re.max(1e-300)) - 3.0;
    FluctuationStats {
        mean: est.mean,
        mean_stderr: est.stderr,
        variance,
        variance_stderr: variance * (2.0 / nf).sqrt(),
        skewness,
        excess_kurtosis,
        skewness_stderr: (6.0 / nf).sqrt(),
        kurtosis_stderr: (24.0 / nf).sqrt(),
        trials: n,
    }
}

/// Weighted least-squares fit of `mean(N) = c0 + c1 / N`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub c0: C64,
    pub c1: C64,
    pub c0_stderr: f64,
    pub c1_stderr: f64,
    /// Weighted RMS residual of the fit.
    pub residual: f64,
    pub points: usize,
}

/// Fits `y = c0 + c1 x` with `x = 1/N` and weights `1/sigma^2`. Zero sigmas
/// are floored so exact (deterministic) data reduces to interpolation.
pub fn fit_two_term(dims: &[usize], means: &[C64], stderrs: &[f64]) -> Option<ExpansionFit> {
    let n = dims.len();
    if n < 3 || means.len() != n || stderrs.len() != n {
        return None;
    }
    let floor = 1e-12
        * means
            .iter()
            .map(|m| m.norm())
            .fold(1.0_f64, f64::max);
    let w: Vec<f64> = stderrs.iter().map(|s| 1.0 / (s.max(floor)).powi(2)).collect();
    let x: Vec<f64> = dims.iter().map(|&d| 1.0 / d as f64).collect();
    // Centered formulation: c1 from the weighted covariance about the
    // weighted means, then c0 = ybar - c1 xbar. Avoids cancellation when the
    // weights are enormous (deterministic data).
    let sw = kahan_sum(w.iter().copied());
    let xbar = kahan_sum(w.iter().zip(&x).map(|(w, x)| w * x)) / sw;
    let sxx = kahan_sum(w.iter().zip(&x).map(|(w, x)| w * (x - xbar) * (x - xbar)));
    if !(sxx > 0.0) || !sw.is_finite() {
        return None;
    }
    let solve = |ys: &[f64]| -> (f64, f64) {
        let ybar = kahan_sum(w.iter().zip(ys).map(|(w, y)| w * y)) / sw;
        let sxy = kahan_sum(
            w.iter().zip(&x).zip(ys).map(|((w, x), y)| w * (x - xbar) * (y - ybar)),
        );
        let c1 = sxy / sxx;
        (ybar - c1 * xbar, c1)
    };
    let ys_re: Vec<f64> = means.iter().map(|m| m.re).collect();
    let ys_im: Vec<f64> = means.iter().map(|m| m.im).collect();
    let (c0_re, c1_re) = solve(&ys_re);
    let (c0_im, c1_im) = solve(&ys_im);
    let c0 = Complex64::new(c0_re, c0_im);
    let c1 = Complex64::new(c1_re, c1_im);
    let mut ss = 0.0;
    for i in 0..n {
        let pred = c0 + c1 * x[i];
        ss += w[i] * (means[i] - pred).norm_sqr();
    }
    let residual = (ss / n as f64).sqrt();
    let c1_var = 1.0 / sxx;
    let c0_var = 1.0 / sw + xbar * xbar * c1_var;
    Some(ExpansionFit {
        c0,
        c1,
        c0_stderr: c0_var.max(0.0).sqrt(),
        c1_stderr: c1_var.max(0.0).sqrt(),
        residual,
        points: n,
    })
}

/// Least-squares slope of log|err| against log N, skipping negligible errors.
/// Returns None when fewer than two informative points remain.
pub fn log_log_slope(dims: &[usize], errors: &[f64], negligible: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = dims
        .iter()
        .zip(errors)
        .filter(|&(_, e)| *e > negligible)
        .map(|(&d, &e)| ((d as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / det)
}

/// Derived per-trial RNG: one independent ChaCha stream per
/// (seed, dimension index, trial).
pub fn trial_rng(seed: u64, dim_index: usize, trial: usize) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    use rand_chacha::rand_core::RngCore;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((dim_index as u64) << 40) ^ (trial as u64 + 1));
    // Burn a word so distinct streams decorrelate from the shared seed state.
    let _ = rng.next_u64();
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_samples_have_zero_stderr() {
        let v = vec![Complex64::new(2.5, 0.0); 7];
        let est = estimate_complex(&v);
        assert_eq!(est.mean, Complex64::new(2.5, 0.0));
        assert_eq!(est.stderr, 0.0);
        // Two equal values likewise.
        let est = estimate_complex(&v[..2]);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn coin_flip_stderr_matches_binomial() {
        // +-1 coin: stderr ~ 1/sqrt(trials).
        let trials = 4096;
        let values: Vec<C64> = (0..trials)
            .map(|i| {
                let mut rng = trial_rng(99, 0, i);
                use rand::Rng;
                let coin: bool = rng.gen();
                Complex64::new(if coin { 1.0 } else { -1.0 }, 0.0)
            })
            .collect();
        let est = estimate_complex(&values);
        let expected = 1.0 / (trials as f64).sqrt();
        assert!((est.stderr - expected).abs() / expected < 0.15, "stderr {}", est.stderr);
        assert!(est.mean.norm() < 4.0 * expected);
    }

    #[test]
    fn two_term_fit_recovers_exact_expansion() {
        let dims = [32usize, 64, 128, 256];
        let c0 = Complex64::new(0.75, 0.0);
        let c1 = Complex64::new(-3.5, 0.0);
        let means: Vec<C64> = dims.iter().map(|&d| c0 + c1 / d as f64).collect();
        let stderrs = vec![0.0; 4];
        let fit = fit_two_term(&dims, &means, &stderrs).unwrap();
        assert!((fit.c0 - c0).norm() < 1e-10);
        assert!((fit.c1 - c1).norm() < 1e-8);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn slope_of_power_law_is_recovered() {
        let dims = [32usize, 64, 128, 256];
        let errors: Vec<f64> = dims.iter().map(|&d| 5.0 / d as f64).collect();
        let slope = log_log_slope(&dims, &errors, 1e-14).unwrap();
        assert!((slope + 1.0).abs() < 1e-9);
        assert!(log_log_slope(&dims, &[0.0; 4], 1e-14).is_none());
    }

    #[test]
    fn trial_rngs_are_reproducible_and_distinct() {
        use rand_chacha::rand_core::RngCore;
        let a1 = trial_rng(7, 0, 3).next_u64();
        let a2 = trial_rng(7, 0, 3).next_u64();
        let b = trial_rng(7, 0, 4).next_u64();
        let c = trial_rng(7, 1, 3).next_u64();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_ne!(a1, c);
    }
}
