//! Maximum-likelihood power-law fits.
//!
//! The discrete fit maximises the exact likelihood
//! `L(γ) = -n ln ζ(γ, x_min) - γ Σ ln x_i` with the Hurwitz zeta normaliser.
//! The familiar closed form `1 + n / Σ ln(x_i / (x_min - 1/2))` is only an
//! approximation that drifts badly for `x_min < 6`, so it is used as the
//! starting bracket only. With `XMin::Auto`, `x_min` minimises the
//! Kolmogorov-Smirnov distance between the tail and the fitted model.

use serde::Serialize;
use thiserror::Error;

/// Minimum tail size accepted by the fits.
pub const MIN_TAIL: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("tail has {0} samples, need at least {MIN_TAIL}")]
    TooFewSamples(usize),
    #[error("degenerate support: all tail samples are equal")]
    DegenerateSupport,
    #[error("samples must be positive")]
    NonPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum XMin {
    Auto,
    Fixed(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub x_min: f64,
    pub n_tail: usize,
    /// KS distance between the tail and the fitted model.
    pub ks: f64,
    /// Largest sample in the tail.
    pub x_max: f64,
}

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q + k)^{-s}` for `s > 1`, `q > 0`,
/// by Euler-Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const N: usize = 12;
    // B_{2j} / (2j)! for j = 1..6.
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30_240.0,
        -1.0 / 1_209_600.0,
        1.0 / 47_900_160.0,
        -691.0 / 1_307_674_368_000.0,
    ];
    let mut sum: f64 = (0..N).map(|k| (q + k as f64).powf(-s)).sum();
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Rising factorial s (s+1) ... (s+2j-2) times a^{-s-2j+1}.
    let mut fact = s;
    let mut pow = a.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        sum += b * fact * pow;
        let k = 2 * j as i32 + 1;
        fact *= (s + k as f64) * (s + k as f64 + 1.0);
        pow /= a * a;
    }
    sum
}

/// Minimises a unimodal function on `[lo, hi]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Exact discrete MLE on a sorted tail (every element `>= x_min`).
fn discrete_mle(tail: &[u64], x_min: u64) -> f64 {
    let n = tail.len() as f64;
    let sum_ln: f64 = tail.iter().map(|&x| (x as f64).ln()).sum();
    let approx = 1.0 + n / (sum_ln - n * (x_min as f64 - 0.5).ln());
    let nll = |g: f64| n * hurwitz_zeta(g, x_min as f64).ln() + g * sum_ln;
    let guess = if approx.is_finite() { approx.clamp(1.05, 10.0) } else { 2.0 };
    let lo = (guess - 1.0).max(1.000_001);
    let hi = (guess + 1.0).max(lo + 1.0);
    golden_min(nll, lo, hi, 1e-8)
}

/// KS distance between a sorted discrete tail and the fitted tail CCDF.
fn discrete_ks(tail: &[u64], gamma: f64, x_min: u64) -> f64 {
    let n = tail.len() as f64;
    let z0 = hurwitz_zeta(gamma, x_min as f64);
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let x = tail[i];
        let mut j = i;
        while j < tail.len() && tail[j] == x {
            j += 1;
        }
        // P(X >= x) empirically vs model, and P(X > x) likewise.
        let emp_ge = (tail.len() - i) as f64 / n;
        let emp_gt = (tail.len() - j) as f64 / n;
        let model_ge = hurwitz_zeta(gamma, x as f64) / z0;
        let model_gt = hurwitz_zeta(gamma, x as f64 + 1.0) / z0;
        ks = ks.max((emp_ge - model_ge).abs()).max((emp_gt - model_gt).abs());
        i = j;
    }
    ks
}

/// Discrete power-law fit of positive integer samples.
pub fn fit_power_law(samples: &[u64], x_min: XMin) -> Result<PowerLawFit, FitError> {
    if samples.contains(&0) {
        return Err(FitError::NonPositive);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let fit_at = |xm: u64| -> Result<PowerLawFit, FitError> {
        let tail = &sorted[sorted.partition_point(|&x| x < xm)..];
        if tail.len() < MIN_TAIL {
            return Err(FitError::TooFewSamples(tail.len()));
        }
        if tail[0] == tail[tail.len() - 1] {
            return Err(FitError::DegenerateSupport);
        }
        let gamma = discrete_mle(tail, xm);
        Ok(PowerLawFit {
            gamma,
            x_min: xm as f64,
            n_tail: tail.len(),
            ks: discrete_ks(tail, gamma, xm),
            x_max: tail[tail.len() - 1] as f64,
        })
    };
    match x_min {
        XMin::Fixed(xm) => fit_at(xm.max(1)),
        XMin::Auto => {
            let mut candidates: Vec<u64> = sorted.clone();
            candidates.dedup();
            let mut best: Option<PowerLawFit> = None;
            let mut first_err = None;
            for xm in candidates {
                match fit_at(xm) {
                    Ok(f) => {
                        if best.is_none_or(|b| f.ks < b.ks) {
                            best = Some(f);
                        }
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                        if !matches!(first_err, Some(FitError::DegenerateSupport)) {
                            // Tails only shrink from here.
                            break;
                        }
                    }
                }
            }
            best.ok_or_else(|| first_err.unwrap_or(FitError::TooFewSamples(0)))
        }
    }
}

/// Continuous power-law MLE `1 + n / Σ ln(x_i / x_min)` over samples
/// `>= x_min`. With `x_min = None` the KS-minimising sample value is used.
/// The exponent may come out below one for truncated tails; the fit is then a
/// descriptive slope over `[x_min, x_max]` rather than a normalisable model.
pub fn fit_power_law_continuous(samples: &[f64], x_min: Option<f64>) -> Result<PowerLawFit, FitError> {
    if samples.iter().any(|&x| !(x > 0.0)) {
        return Err(FitError::NonPositive);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let fit_at = |xm: f64| -> Result<PowerLawFit, FitError> {
        let tail = &sorted[sorted.partition_point(|&x| x < xm)..];
        if tail.len() < MIN_TAIL {
            return Err(FitError::TooFewSamples(tail.len()));
        }
        if tail[0] == tail[tail.len() - 1] {
            return Err(FitError::DegenerateSupport);
        }
        let n = tail.len() as f64;
        let s: f64 = tail.iter().map(|&x| (x / xm).ln()).sum();
        let gamma = 1.0 + n / s;
        let mut ks: f64 = 0.0;
        for (i, &x) in tail.iter().enumerate() {
            let model = 1.0 - (x / xm).powf(1.0 - gamma);
            ks = ks
                .max((i as f64 / n - model).abs())
                .max(((i + 1) as f64 / n - model).abs());
        }
        Ok(PowerLawFit {
            gamma,
            x_min: xm,
            n_tail: tail.len(),
            ks,
            x_max: tail[tail.len() - 1],
        })
    };
    match x_min {
        Some(xm) => fit_at(xm),
        None => {
            let mut cands = sorted.clone();
            cands.dedup();
            // Cap the scan; beyond a few hundred candidates the choice barely moves.
            let stride = (cands.len() / 400).max(1);
            let mut best: Option<PowerLawFit> = None;
            let mut err = None;
            for xm in cands.into_iter().step_by(stride) {
                match fit_at(xm) {
                    Ok(f) => {
                        if best.is_none_or(|b| f.ks < b.ks) {
                            best = Some(f);
                        }
                    }
                    Err(e) => {
                        err.get_or_insert(e);
                    }
                }
            }
            best.ok_or_else(|| err.unwrap_or(FitError::TooFewSamples(0)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        let pi = std::f64::consts::PI;
        assert!((hurwitz_zeta(2.0, 1.0) - pi * pi / 6.0).abs() < 1e-13);
        assert!((hurwitz_zeta(4.0, 1.0) - pi.powi(4) / 90.0).abs() < 1e-13);
        // ζ(s, q) - ζ(s, q + 1) = q^{-s}.
        for &(s, q) in &[(1.3, 2.0), (2.2, 1.0), (3.7, 17.0)] {
            let d = hurwitz_zeta(s, q) - hurwitz_zeta(s, q + 1.0);
            assert!((d - f64::powf(q, -s)).abs() < 1e-12, "{s} {q}");
        }
        // Direct partial sum plus integral tail at s = 1.5.
        let direct: f64 = (1..200_000).map(|k| (k as f64).powf(-1.5)).sum::<f64>() + 2.0 / (200_000f64 - 0.5).sqrt();
        assert!((hurwitz_zeta(1.5, 1.0) - direct).abs() < 1e-8);
    }

    #[test]
    fn constant_samples_rejected() {
        let s = vec![3u64; 100];
        assert_eq!(fit_power_law(&s, XMin::Fixed(1)), Err(FitError::DegenerateSupport));
        assert!(fit_power_law(&s, XMin::Auto).is_err());
    }

    #[test]
    fn small_tail_rejected() {
        let s: Vec<u64> = (1..20).collect();
        assert_eq!(fit_power_law(&s, XMin::Fixed(1)), Err(FitError::TooFewSamples(19)));
        assert_eq!(fit_power_law(&[0, 1, 2], XMin::Auto), Err(FitError::NonPositive));
    }

    #[test]
    fn continuous_recovers_pareto() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // Inverse CDF of a Pareto with alpha = gamma - 1 = 1.5.
        let xs: Vec<f64> = (0..50_000).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.5)).collect();
        let fit = fit_power_law_continuous(&xs, Some(1.0)).unwrap();
        assert!((fit.gamma - 2.5).abs() < 0.03, "{}", fit.gamma);
        // Scale consistency: multiplying samples and x_min by a constant.
        let scaled: Vec<f64> = xs.iter().map(|x| x * 7.0).collect();
        let fit2 = fit_power_law_continuous(&scaled, Some(7.0)).unwrap();
        assert!((fit.gamma - fit2.gamma).abs() < 1e-9);
    }
}
