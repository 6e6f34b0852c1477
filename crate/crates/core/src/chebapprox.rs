//! Truncated Chebyshev approximation of sampled trajectory components.
//!
//! A [`SampledSignal`] is linearly resampled onto the Chebyshev nodes of its
//! time domain, projected with the discrete Chebyshev transform and stored as
//! a [`ChebSeries`]. The series stores `a_0` unhalved; the factor one half is
//! applied when evaluating, so
//!
//! ```text
//! g(t) ~ a_0 / 2 + sum_{k>=1} a_k T_k(x),   x = (2t - t_min - t_max) / (t_max - t_min)
//! ```
//!
//! Truncating the series acts as a low-pass filter on rough data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trajectory component sampled on its own time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    name: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledSignal {
    /// Validates and builds a signal. Times must be finite and strictly increasing.
    pub fn new(name: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidSignal {
            name: name.clone(),
            reason,
        };
        if times.len() != values.len() {
            return Err(invalid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(invalid("at least two samples are required".into()));
        }
        if let Some(i) = times
            .iter()
            .chain(values.iter())
            .position(|v| !v.is_finite())
        {
            return Err(invalid(format!("non-finite entry at position {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "times not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(SampledSignal {
            name,
            times,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.times[0]
    }

    pub fn t_last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Piecewise-linear interpolation at a single time inside the sample range.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.t_first(), self.t_last());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { t, min: lo, max: hi });
        }
        // index of the first sample strictly greater than t
        let upper = self.times.partition_point(|&s| s <= t);
        if upper == 0 {
            return Ok(self.values[0]);
        }
        if upper == self.times.len() {
            return Ok(self.values[upper - 1]);
        }
        let (t0, t1) = (self.times[upper - 1], self.times[upper]);
        let (v0, v1) = (self.values[upper - 1], self.values[upper]);
        if t == t0 {
            return Ok(v0);
        }
        let w = (t - t0) / (t1 - t0);
        Ok(v0 + w * (v1 - v0))
    }
}

/// Truncated Chebyshev series on the physical time domain `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
    t_min: f64,
    t_max: f64,
}

impl ChebSeries {
    pub fn new(coeffs: Vec<f64>, t_min: f64, t_max: f64) -> Result<Self> {
        check_domain(t_min, t_max)?;
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "Chebyshev series needs at least one coefficient".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "Chebyshev coefficients must be finite".into(),
            ));
        }
        Ok(ChebSeries {
            coeffs,
            t_min,
            t_max,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn to_unit(&self, t: f64) -> f64 {
        ((2.0 * t - self.t_min - self.t_max) / (self.t_max - self.t_min)).clamp(-1.0, 1.0)
    }

    /// Evaluates the series at `t` with the Clenshaw recurrence.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t >= self.t_min && t <= self.t_max) {
            return Err(Error::OutOfRange {
                t,
                min: self.t_min,
                max: self.t_max,
            });
        }
        Ok(clenshaw(&self.coeffs, self.to_unit(t)))
    }

    /// Keeps only the first `keep` coefficients.
    pub fn truncate(&self, keep: usize) -> Result<ChebSeries> {
        if keep == 0 || keep > self.coeffs.len() {
            return Err(Error::InvalidArgument(format!(
                "truncation length {keep} outside 1..={}",
                self.coeffs.len()
            )));
        }
        Ok(ChebSeries {
            coeffs: self.coeffs[..keep].to_vec(),
            t_min: self.t_min,
            t_max: self.t_max,
        })
    }

    /// Series of d/dt on the physical domain.
    ///
    /// Runs the backward recurrence `a'_{k-1} = a'_{k+1} + 2k a_k` on `[-1, 1]`
    /// and rescales by `2 / (t_max - t_min)`. The result has the same length;
    /// its highest coefficient is always zero.
    pub fn derivative(&self) -> ChebSeries {
        let n = self.coeffs.len();
        let mut d = vec![0.0; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + 2.0 * k as f64 * self.coeffs[k];
        }
        d.truncate(n);
        let scale = 2.0 / (self.t_max - self.t_min);
        d.iter_mut().for_each(|c| *c *= scale);
        ChebSeries {
            coeffs: d,
            t_min: self.t_min,
            t_max: self.t_max,
        }
    }
}

fn check_domain(t_min: f64, t_max: f64) -> Result<()> {
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(Error::InvalidArgument(format!(
            "degenerate time domain [{t_min}, {t_max}]"
        )));
    }
    Ok(())
}

/// `a_0/2 + sum_{k>=1} a_k T_k(x)` for `x` in `[-1, 1]`.
pub(crate) fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = a + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    0.5 * coeffs[0] + x * b1 - b2
}

/// The `count` Chebyshev nodes mapped onto `[t_min, t_max]`.
///
/// Node `j` is the image of `cos(pi (j + 1/2) / count)`, so the sequence is
/// returned in decreasing order, all strictly inside the domain.
pub fn chebyshev_nodes(count: usize, t_min: f64, t_max: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("node count must be positive".into()));
    }
    check_domain(t_min, t_max)?;
    let (mid, half) = (0.5 * (t_max + t_min), 0.5 * (t_max - t_min));
    Ok((0..count)
        .map(|j| mid + half * (PI * (j as f64 + 0.5) / count as f64).cos())
        .collect())
}

/// Linear interpolation of `signal` at every query time; no extrapolation.
pub fn resample_linear(signal: &SampledSignal, query_times: &[f64]) -> Result<Vec<f64>> {
    query_times.iter().map(|&t| signal.interpolate(t)).collect()
}

/// Discrete Chebyshev coefficients of `count` values given at the nodes of
/// [`chebyshev_nodes`] (same ordering).
pub fn coefficients_from_nodes(node_values: &[f64]) -> Vec<f64> {
    let n = node_values.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let sum: f64 = node_values
                .iter()
                .enumerate()
                .map(|(j, g)| g * (PI * k as f64 * (j as f64 + 0.5) / nf).cos())
                .sum();
            2.0 / nf * sum
        })
        .collect()
}

/// Fits a series with `count` coefficients over the signal's own time domain.
pub fn fit(signal: &SampledSignal, count: usize) -> Result<ChebSeries> {
    fit_on_domain(signal, count, signal.t_first(), signal.t_last())
}

/// Fits a series over a sub-window of the signal's sample range.
pub fn fit_on_domain(
    signal: &SampledSignal,
    count: usize,
    t_min: f64,
    t_max: f64,
) -> Result<ChebSeries> {
    let nodes = chebyshev_nodes(count, t_min, t_max)?;
    let values = resample_linear(signal, &nodes)?;
    ChebSeries::new(coefficients_from_nodes(&values), t_min, t_max)
}

/// Free-function form of [`ChebSeries::truncate`].
pub fn truncate(series: &ChebSeries, keep: usize) -> Result<ChebSeries> {
    series.truncate(keep)
}

/// Free-function form of [`ChebSeries::evaluate`].
pub fn evaluate(series: &ChebSeries, t: f64) -> Result<f64> {
    series.evaluate(t)
}

/// Free-function form of [`ChebSeries::derivative`].
pub fn derivative(series: &ChebSeries) -> ChebSeries {
    series.derivative()
}
