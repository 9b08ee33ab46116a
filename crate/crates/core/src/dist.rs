//! Empirical distributions of daily quantities.
//!
//! Two evaluation modes share one sorted sample store: the step ECDF, exact in
//! sample arithmetic, and a Gaussian kernel smoother whose CDF, partial
//! expectations and hinge expectations all have closed forms per kernel.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Kernels further than this many bandwidths from the query point are
/// treated as fully on one side; the neglected tail is below 1e-23.
const KERNEL_CUTOFF: f64 = 10.0;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistMode {
    Ecdf,
    Kde,
}

impl std::str::FromStr for DistMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecdf" => Ok(DistMode::Ecdf),
            "kde" => Ok(DistMode::Kde),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}`, expected ecdf or kde"
            ))),
        }
    }
}

/// Which side of a threshold a partial expectation integrates over.
///
/// The split matches the right-continuous CDF: `Below` is `X <= t`, `Above`
/// is `X > t`, so `P(Below) = cdf(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Univariate law queried by the sizing and cost code.
pub trait Distribution {
    fn cdf(&self, x: f64) -> f64;

    /// Smallest `x` with `cdf(x) >= p`, for `0 < p < 1`.
    fn quantile(&self, p: f64) -> Result<f64>;

    fn mean(&self) -> f64;

    /// `E[X 1{X > t}]` or `E[X 1{X <= t}]`.
    fn partial_expectation(&self, t: f64, side: Side) -> f64;

    /// `E[(X - b)+]`.
    fn upper_hinge(&self, b: f64) -> f64 {
        self.partial_expectation(b, Side::Above) - b * (1.0 - self.cdf(b))
    }

    /// `E[(b - X)+]`.
    fn lower_hinge(&self, b: f64) -> f64 {
        b * self.cdf(b) - self.partial_expectation(b, Side::Below)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Smoothing {
    Step,
    Gaussian { bandwidth: f64 },
}

/// Sorted samples plus the evaluation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    // prefix[i] = samples[0] + ... + samples[i - 1]
    prefix: Vec<f64>,
    smoothing: Smoothing,
}

impl EmpiricalDistribution {
    pub fn ecdf(samples: Vec<f64>) -> Result<Self> {
        Self::build(samples, Smoothing::Step)
    }

    pub fn kde(samples: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        Self::build(samples, Smoothing::Gaussian { bandwidth })
    }

    /// Gaussian KDE with the Silverman rule-of-thumb bandwidth.
    pub fn kde_silverman(samples: Vec<f64>) -> Result<Self> {
        let h = silverman_bandwidth(&samples)?;
        Self::kde(samples, h)
    }

    pub fn with_mode(samples: Vec<f64>, mode: DistMode) -> Result<Self> {
        match mode {
            DistMode::Ecdf => Self::ecdf(samples),
            DistMode::Kde => Self::kde_silverman(samples),
        }
    }

    fn build(mut samples: Vec<f64>, smoothing: Smoothing) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        samples.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for &x in &samples {
            acc += x;
            prefix.push(acc);
        }
        Ok(Self {
            samples,
            prefix,
            smoothing,
        })
    }

    pub fn mode(&self) -> DistMode {
        match self.smoothing {
            Smoothing::Step => DistMode::Ecdf,
            Smoothing::Gaussian { .. } => DistMode::Kde,
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self.smoothing {
            Smoothing::Step => None,
            Smoothing::Gaussian { bandwidth } => Some(bandwidth),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    fn n(&self) -> f64 {
        self.samples.len() as f64
    }

    /// Number of samples `<= x`.
    fn count_le(&self, x: f64) -> usize {
        self.samples.partition_point(|&s| s <= x)
    }

    /// Index range of kernels that are neither saturated at 1 nor at 0 for a
    /// query at `x`: everything before `lo` sits far below `x`, everything
    /// from `hi` on far above.
    fn kernel_window(&self, x: f64, h: f64) -> (usize, usize) {
        let reach = KERNEL_CUTOFF * h;
        let lo = self.samples.partition_point(|&s| s <= x - reach);
        let hi = self.samples.partition_point(|&s| s < x + reach);
        (lo, hi.max(lo))
    }

    fn sum_range(&self, lo: usize, hi: usize) -> f64 {
        self.prefix[hi] - self.prefix[lo]
    }

    /// Evaluates the CDF on `points` evenly spaced values over `[lo, hi]`.
    pub fn cdf_grid(&self, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
        linspace(lo, hi, points).map(|x| (x, self.cdf(x))).collect()
    }

    /// Default plotting range: the sample range padded by three bandwidths
    /// (or 5% of the range for the ECDF).
    pub fn plot_range(&self) -> (f64, f64) {
        let pad = match self.smoothing {
            Smoothing::Gaussian { bandwidth } => 3.0 * bandwidth,
            Smoothing::Step => 0.05 * (self.max() - self.min()).max(1e-9),
        };
        (self.min() - pad, self.max() + pad)
    }

    /// Writes `x,cdf` rows for external plotting.
    pub fn write_cdf_csv<W: Write>(&self, out: W, lo: f64, hi: f64, points: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "cdf"])?;
        for (x, f) in self.cdf_grid(lo, hi, points) {
            w.write_record([format!("{x:.6}"), format!("{f:.9}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Distribution for EmpiricalDistribution {
    fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.smoothing {
            Smoothing::Step => self.count_le(x) as f64 / self.n(),
            Smoothing::Gaussian { bandwidth: h } => {
                let (lo, hi) = self.kernel_window(x, h);
                let inner: f64 = self.samples[lo..hi].iter().map(|&s| std_normal_cdf((x - s) / h)).sum();
                (lo as f64 + inner) / self.n()
            }
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        match self.smoothing {
            Smoothing::Step => {
                let n = self.samples.len();
                let nf = self.n();
                // smallest k in 1..=n with k / n >= p
                let mut k = ((p * nf).ceil() as usize).clamp(1, n);
                while k > 1 && (k - 1) as f64 / nf >= p {
                    k -= 1;
                }
                while k < n && (k as f64) / nf < p {
                    k += 1;
                }
                Ok(self.samples[k - 1])
            }
            Smoothing::Gaussian { bandwidth: h } => {
                let range = self.max() - self.min();
                let tol = 1e-9 * if range > 0.0 { range } else { h };
                let mut lo = self.min() - KERNEL_CUTOFF * h;
                let mut hi = self.max() + KERNEL_CUTOFF * h;
                for _ in 0..MAX_BISECTIONS {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) >= p {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(hi)
            }
        }
    }

    fn mean(&self) -> f64 {
        self.prefix[self.samples.len()] / self.n()
    }

    fn partial_expectation(&self, t: f64, side: Side) -> f64 {
        match self.smoothing {
            Smoothing::Step => {
                let k = self.count_le(t);
                let n = self.samples.len();
                match side {
                    Side::Below => self.sum_range(0, k) / self.n(),
                    Side::Above => self.sum_range(k, n) / self.n(),
                }
            }
            Smoothing::Gaussian { bandwidth: h } => {
                let (lo, hi) = self.kernel_window(t, h);
                let n = self.samples.len();
                let (saturated, sign) = match side {
                    Side::Below => (self.sum_range(0, lo), -1.0),
                    Side::Above => (self.sum_range(hi, n), 1.0),
                };
                // per kernel N(s, h^2): E[X 1{X <= t}] = s Phi(z) - h phi(z),
                // E[X 1{X > t}] = s (1 - Phi(z)) + h phi(z), z = (t - s) / h
                let inner: f64 = self.samples[lo..hi]
                    .iter()
                    .map(|&s| {
                        let z = (t - s) / h;
                        let mass = match side {
                            Side::Below => std_normal_cdf(z),
                            Side::Above => std_normal_cdf(-z),
                        };
                        s * mass + sign * h * std_normal_pdf(z)
                    })
                    .sum();
                (saturated + inner) / self.n()
            }
        }
    }

    fn upper_hinge(&self, b: f64) -> f64 {
        match self.smoothing {
            Smoothing::Step => {
                let k = self.count_le(b);
                self.samples[k..].iter().map(|&s| s - b).sum::<f64>() / self.n()
            }
            Smoothing::Gaussian { bandwidth: h } => {
                let (lo, hi) = self.kernel_window(b, h);
                let n = self.samples.len();
                let far_above = self.sum_range(hi, n) - b * (n - hi) as f64;
                let inner: f64 = self.samples[lo..hi]
                    .iter()
                    .map(|&s| {
                        let z = (b - s) / h;
                        (s - b) * std_normal_cdf(-z) + h * std_normal_pdf(z)
                    })
                    .sum();
                (far_above + inner) / self.n()
            }
        }
    }

    fn lower_hinge(&self, b: f64) -> f64 {
        match self.smoothing {
            Smoothing::Step => {
                let k = self.count_le(b);
                self.samples[..k].iter().map(|&s| b - s).sum::<f64>() / self.n()
            }
            Smoothing::Gaussian { bandwidth: h } => {
                let (lo, hi) = self.kernel_window(b, h);
                let far_below = b * lo as f64 - self.sum_range(0, lo);
                let inner: f64 = self.samples[lo..hi]
                    .iter()
                    .map(|&s| {
                        let z = (b - s) / h;
                        (b - s) * std_normal_cdf(z) + h * std_normal_pdf(z)
                    })
                    .sum();
                (far_below + inner) / self.n()
            }
        }
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = if points > 1 {
        (hi - lo) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points).map(move |i| {
        if i + 1 == points && points > 1 {
            hi
        } else {
            lo + step * i as f64
        }
    })
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
///
/// Falls back to the standard deviation alone when the interquartile range
/// collapses to zero while the spread does not.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = sample_std(&sorted);
    if sd == 0.0 || sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateSamples);
    }
    let iqr = interpolated_quantile(&sorted, 0.75) - interpolated_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (sorted.len() as f64).powf(-0.2))
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Linear-interpolation quantile of sorted data (the usual
/// `(n - 1) p` position rule).
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Descriptive statistics in the count/mean/std/min/quartiles/max layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        Ok(Summary {
            count: n,
            mean: sorted.iter().sum::<f64>() / n as f64,
            std: if n > 1 { sample_std(&sorted) } else { 0.0 },
            min: sorted[0],
            q25: interpolated_quantile(&sorted, 0.25),
            q50: interpolated_quantile(&sorted, 0.5),
            q75: interpolated_quantile(&sorted, 0.75),
            max: sorted[n - 1],
        })
    }
}
