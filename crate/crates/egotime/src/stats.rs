//! Small descriptive statistics shared by the analyses.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with a normal-approximation 95% confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Streaming mean/variance accumulator (Welford). Merging is commutative up to
/// floating-point rounding; callers that need bit-identical output merge in a
/// fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    pub fn variance(&self) -> Option<f64> {
        (self.n > 1).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn ci(&self) -> Option<MeanCi> {
        let mean = self.mean()?;
        let half = match self.variance() {
            Some(v) => Z95 * (v / self.n as f64).sqrt(),
            None => 0.0,
        };
        Some(MeanCi {
            mean,
            lo: mean - half,
            hi: mean + half,
            n: self.n,
        })
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

pub fn mean_ci(values: impl IntoIterator<Item = f64>) -> Option<MeanCi> {
    values.into_iter().collect::<Moments>().ci()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Median of a sample (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Linear-interpolated quantile of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// An empirical proportion; `p` is absent when nothing was observed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Proportion {
    pub hits: usize,
    pub total: usize,
}

impl Proportion {
    pub fn record(&mut self, hit: bool) {
        self.total += 1;
        if hit {
            self.hits += 1;
        }
    }

    pub fn p(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

/// One bin of a logarithmically binned histogram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Count divided by bin width and by the number of positive samples.
    pub density: f64,
}

/// Histogram with equal-width bins in log10 space. Non-positive samples are
/// counted in `non_positive` and excluded from the bins.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LogHistogram {
    pub bins_per_decade: u32,
    pub bins: Vec<LogBin>,
    pub non_positive: usize,
}

impl LogHistogram {
    pub const DEFAULT_BINS_PER_DECADE: u32 = 10;

    pub fn build(samples: impl IntoIterator<Item = f64>, bins_per_decade: u32) -> Self {
        let bpd = bins_per_decade.max(1);
        let mut non_positive = 0;
        let mut idx: Vec<i64> = Vec::new();
        for x in samples {
            if x > 0.0 && x.is_finite() {
                // Small epsilon keeps exact decade boundaries (10, 100, ...) in their own bin.
                idx.push((x.log10() * bpd as f64 + 1e-9).floor() as i64);
            } else {
                non_positive += 1;
            }
        }
        let positives = idx.len();
        if idx.is_empty() {
            return Self {
                bins_per_decade: bpd,
                bins: Vec::new(),
                non_positive,
            };
        }
        idx.sort_unstable();
        let first = idx[0];
        let last = idx[idx.len() - 1];
        let mut counts = vec![0usize; (last - first + 1) as usize];
        for i in idx {
            counts[(i - first) as usize] += 1;
        }
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| {
                let b = first + k as i64;
                let lo = 10f64.powf(b as f64 / bpd as f64);
                let hi = 10f64.powf((b + 1) as f64 / bpd as f64);
                LogBin {
                    lo,
                    hi,
                    count,
                    density: count as f64 / (hi - lo) / positives as f64,
                }
            })
            .collect();
        Self {
            bins_per_decade: bpd,
            bins,
            non_positive,
        }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum::<usize>() + self.non_positive
    }
}

/// Ordinary least-squares line fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero when only two points are fitted.
    pub slope_stderr: f64,
    pub n_points: usize,
}

/// Fits `y = slope * x + intercept`. Returns `None` with fewer than two points
/// or when all `x` coincide.
pub fn least_squares(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let sse: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_two_pass() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let m: Moments = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean().unwrap() - mean).abs() < 1e-12);
        assert!((m.variance().unwrap() - var).abs() < 1e-9);
    }

    #[test]
    fn single_sample_ci_is_degenerate() {
        let ci = mean_ci([3.0]).unwrap();
        assert_eq!((ci.lo, ci.mean, ci.hi), (3.0, 3.0, 3.0));
        assert!(mean_ci(std::iter::empty()).is_none());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn log_histogram_decades() {
        let h = LogHistogram::build([1.0, 1.0, 10.0, 100.0, 0.0], 1);
        assert_eq!(h.non_positive, 1);
        assert_eq!(h.bins.len(), 3);
        assert_eq!(h.bins[0].count, 2);
        assert_eq!(h.bins[1].count, 1);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn least_squares_exact_line() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let fit = least_squares(&pts).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-9);
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }
}
