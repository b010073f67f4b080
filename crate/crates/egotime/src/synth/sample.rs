//! Samplers for the generator's session process.

use rand::Rng;
use rand_distr::{Distribution, Exp, Zipf};

/// Discrete power law on `1..=max` with `P(k) ∝ k^-gamma`.
pub(crate) struct BatchSizes {
    zipf: Zipf<f64>,
}

impl BatchSizes {
    pub(crate) fn new(gamma: f64, max: usize) -> Self {
        Self {
            zipf: Zipf::new(max.max(1) as f64, gamma).expect("validated parameters"),
        }
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> usize {
        self.zipf.sample(rng) as usize
    }
}

/// Density `∝ x^-gamma e^-x/cutoff` on `[x_min, ∞)`, by rejection.
pub(crate) struct CutoffPowerLaw {
    gamma: f64,
    x_min: f64,
    cutoff: f64,
}

impl CutoffPowerLaw {
    pub(crate) fn new(gamma: f64, x_min: f64, cutoff: f64) -> Self {
        Self { gamma, x_min, cutoff }
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.gamma > 1.0 {
            // Pareto proposal, accept with the exponential factor.
            loop {
                let u: f64 = 1.0 - rng.random::<f64>();
                let x = self.x_min * u.powf(-1.0 / (self.gamma - 1.0));
                if rng.random::<f64>() < (-(x - self.x_min) / self.cutoff).exp() {
                    return x;
                }
            }
        } else {
            // Shifted exponential proposal, accept with the power-law factor.
            let exp = Exp::new(1.0 / self.cutoff).expect("positive cutoff");
            loop {
                let x = self.x_min + exp.sample(rng);
                if rng.random::<f64>() < (x / self.x_min).powf(-self.gamma) {
                    return x;
                }
            }
        }
    }
}
