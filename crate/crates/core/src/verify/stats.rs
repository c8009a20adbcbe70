//! Mergeable running moments and jackknife error bars.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Welford accumulator; shards combine with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean = (na * self.mean + nb * other.mean) / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Named accumulators, one per observable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    accumulators: BTreeMap<String, Accumulator>,
}

impl EnsembleStats {
    pub fn push(&mut self, name: &str, x: f64) {
        self.accumulators.entry(name.to_string()).or_default().push(x);
    }

    pub fn merge(&mut self, other: &EnsembleStats) {
        for (name, acc) in &other.accumulators {
            self.accumulators.entry(name.clone()).or_default().merge(acc);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Accumulator> {
        self.accumulators.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.accumulators.keys().map(String::as_str)
    }
}

/// Delete-one jackknife of a statistic of column means. Returns the statistic
/// at the full-sample means and its standard error; for a linear statistic
/// the error equals `sd / sqrt(N)`.
pub fn jackknife(rows: &[Vec<f64>], stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut totals = vec![0.0; width];
    for row in rows {
        for (t, v) in totals.iter_mut().zip(row) {
            *t += v;
        }
    }
    let nf = n as f64;
    let means: Vec<f64> = totals.iter().map(|t| t / nf).collect();
    let value = stat(&means);
    if n < 2 {
        return (value, f64::NAN);
    }
    let mut loo = vec![0.0; width];
    let thetas: Vec<f64> = rows
        .iter()
        .map(|row| {
            for ((l, t), v) in loo.iter_mut().zip(&totals).zip(row) {
                *l = (t - v) / (nf - 1.0);
            }
            stat(&loo)
        })
        .collect();
    let bar = thetas.iter().sum::<f64>() / nf;
    let ss: f64 = thetas.iter().map(|t| (t - bar).powi(2)).sum();
    (value, ((nf - 1.0) / nf * ss).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_two_pass() {
        let xs: Vec<f64> = (0..57).map(|i| (i as f64 * 0.37).sin() * 3.0 + 10.0).collect();
        let acc: Accumulator = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 57.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 56.0;
        assert!((acc.mean() - mean).abs() < 1e-13);
        assert!((acc.variance() - var).abs() < 1e-12);
        let (mut a, b): (Accumulator, Accumulator) =
            (xs[..20].iter().copied().collect(), xs[20..].iter().copied().collect());
        a.merge(&b);
        assert_eq!(a.count(), 57);
        assert!((a.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn jackknife_linear_statistic() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sqrt()]).collect();
        let acc: Accumulator = rows.iter().map(|r| r[0]).collect();
        let (v, se) = jackknife(&rows, |m| m[0]);
        assert!((v - acc.mean()).abs() < 1e-13);
        assert!((se - acc.std_error()).abs() < 1e-12);
    }

    #[test]
    fn jackknife_variance_statistic() {
        let rows: Vec<Vec<f64>> =
            (0..200).map(|i| f64::from(i % 7) - 3.0).map(|x| vec![x, x * x]).collect();
        let (v, se) = jackknife(&rows, |m| m[1] - m[0] * m[0]);
        let mean = rows.iter().map(|r| r[0]).sum::<f64>() / 200.0;
        let want = rows.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / 200.0;
        assert!((v - want).abs() < 1e-12);
        assert!(se > 0.0 && se < 0.5);
    }
}
