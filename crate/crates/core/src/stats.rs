//! Small statistics helpers shared by the Monte Carlo estimators.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    #[serde(rename = "se")]
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0, samples: 1 }
    }

    /// Sample mean with standard error `sd / sqrt(N)`; zero SE for fewer than two samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, var) = mean_var(xs);
        let n = xs.len();
        let se = if n > 1 { (var / n as f64).sqrt() } else { 0.0 };
        Estimate { value: mean, std_error: se, samples: n }
    }

    pub fn combined_se(&self, other: &Estimate) -> f64 {
        (self.std_error.powi(2) + other.std_error.powi(2)).sqrt()
    }
}

/// Mean and unbiased sample variance, summed in index order.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let naive = xs.iter().sum::<f64>() / n as f64;
    // second pass removes the rounding error of the first (exact for constant data)
    let mean = naive + xs.iter().map(|x| x - naive).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Running log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = other;
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Draw from Po(mean), treating a zero mean as the point mass at 0.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_matches_direct() {
        let xs = [0.1, -3.0, 2.5, 700.0, 699.0];
        let mut acc = LogSum::default();
        for &x in &xs {
            acc.add(x);
        }
        let direct = log_sum_exp(&xs);
        assert!((acc.value() - direct).abs() < 1e-12);

        let mut a = LogSum::default();
        let mut b = LogSum::default();
        for &x in &xs[..2] {
            a.add(x);
        }
        for &x in &xs[2..] {
            b.add(x);
        }
        a.merge(b);
        assert!((a.value() - direct).abs() < 1e-12);
    }

    #[test]
    fn estimate_of_constant_has_zero_se() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.std_error, 0.0);
    }
}
