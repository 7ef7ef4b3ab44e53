// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.


//! Intervals, quantiles and exponential decay fits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::seed::{stream, tag};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: usize, trials: usize) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Interval { lo, hi }
}

/// Linear-interpolation quantile of sorted data; NaN when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean with a percentile bootstrap interval. Resampling draws from the
/// `BOOTSTRAP` stream of `seed`.
pub fn bootstrap_mean(values: &[f64], resamples: usize, seed: u64) -> (f64, Interval) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, Interval { lo: f64::NAN, hi: f64::NAN });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = stream(seed, tag::BOOTSTRAP, &[n as u64]);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (mean, Interval { lo: quantile(&means, 0.025), hi: quantile(&means, 0.975) })
}

/// One point of a deviation series `P̂(X_n ≤ r·n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    pub p: f64,
    pub ci: Interval,
    /// No observed event: excluded from fits.
    pub censored: bool,
}

impl SeriesPoint {
    pub fn from_counts(n: usize, successes: usize, trials: usize) -> SeriesPoint {
        let p = if trials == 0 { f64::NAN } else { successes as f64 / trials as f64 };
        SeriesPoint { n, successes, trials, p, ci: wilson(successes, trials), censored: successes == 0 }
    }

    /// An exact probability, for synthetic input.
    pub fn exact(n: usize, p: f64) -> SeriesPoint {
        SeriesPoint { n, successes: 0, trials: 0, p, ci: Interval { lo: p, hi: p }, censored: p <= 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub r: f64,
    pub kappa_hat: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% interval for the slope (Student t with `points − 2` dof).
    pub ci: Interval,
    pub n0: usize,
    pub n1: usize,
    pub points: usize,
    pub censored: usize,
    /// The interval does not exclude zero.
    pub flagged: bool,
}

/// Least squares `y = intercept + slope·x`; returns the slope's standard
/// error too.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (sse / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, intercept, stderr)
}

/// Slope of `−log p̂_n` against `n` over the uncensored points, which are
/// never interpolated or smoothed.
pub fn decay_fit(r: f64, series: &[SeriesPoint]) -> Result<DecayFit> {
    let used: Vec<&SeriesPoint> = series.iter().filter(|s| !s.censored && s.p > 0.0 && s.p.is_finite()).collect();
    let censored = series.len() - used.len();
    if used.len() < 3 {
        return Err(Error::Fit(format!("{} uncensored points, at least 3 needed", used.len())));
    }
    let xs: Vec<f64> = used.iter().map(|s| s.n as f64).collect();
    let ys: Vec<f64> = used.iter().map(|s| -s.p.ln()).collect();
    if xs.iter().all(|x| *x == xs[0]) {
        return Err(Error::Fit("all points share the same n".into()));
    }
    let (slope, intercept, stderr) = ols(&xs, &ys);
    let dof = (used.len() - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(Z95);
    let half = if stderr.is_finite() { t * stderr } else { f64::INFINITY };
    let ci = Interval { lo: slope - half, hi: slope + half };
    if !slope.is_finite() {
        return Err(Error::Fit("non-finite slope".into()));
    }
    Ok(DecayFit {
        r,
        kappa_hat: slope,
        intercept,
        stderr,
        ci,
        n0: used[0].n,
        n1: used[used.len() - 1].n,
        points: used.len(),
        censored,
        flagged: ci.contains(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // Closed form at p̂ = 1/2, n = 100.
        let iv = wilson(50, 100);
        assert!((iv.lo - 0.403_831_7).abs() < 1e-6 && (iv.hi - 0.596_168_3).abs() < 1e-6, "{iv:?}");
        let zero = wilson(0, 100);
        assert_eq!(zero.lo, 0.0);
        assert!((zero.hi - 0.036_993_498_2).abs() < 1e-9);
        assert_eq!(wilson(0, 0), Interval { lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let series: Vec<SeriesPoint> = (1..=40).map(|n| SeriesPoint::exact(n, 0.7 * (-0.3 * n as f64).exp())).collect();
        let fit = decay_fit(0.25, &series).unwrap();
        assert!((fit.kappa_hat - 0.3).abs() < 1e-6);
        assert!((fit.intercept + 0.7f64.ln()).abs() < 1e-6);
        assert!(!fit.flagged);
    }

    #[test]
    fn constant_series_is_flagged() {
        let series: Vec<SeriesPoint> =
            (1..=20).map(|n| SeriesPoint::exact(n, 0.5 + if n % 2 == 0 { 1e-3 } else { -1e-3 })).collect();
        let fit = decay_fit(0.25, &series).unwrap();
        assert!(fit.kappa_hat.abs() < 1e-3);
        assert!(fit.flagged);
    }

    #[test]
    fn censored_points_are_excluded() {
        let mut series: Vec<SeriesPoint> = (1..=3).map(|n| SeriesPoint::from_counts(n, 100 / n, 1000)).collect();
        series.push(SeriesPoint::from_counts(4, 0, 1000));
        let fit = decay_fit(0.1, &series).unwrap();
        assert_eq!((fit.points, fit.censored, fit.n1), (3, 1, 3));
        series.truncate(2);
        assert!(matches!(decay_fit(0.1, &series), Err(Error::Fit(_))));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let v: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        let a = bootstrap_mean(&v, 500, 3);
        assert_eq!(a, bootstrap_mean(&v, 500, 3));
        assert!(a.1.contains(a.0));
    }
}
