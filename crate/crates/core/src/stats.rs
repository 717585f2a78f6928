//! Histograms, Kolmogorov-Smirnov tests, L1 distances and sampling.

use serde::Serialize;

use crate::fp::DensityGrid1D;
use crate::rng::Stream;
use crate::special::integrate;
use crate::{Error, Result};

/// Uniform bins on `[lo, hi]`. Samples outside the range count towards the
/// total but land in no bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::Domain(format!(
                "invalid histogram range [{lo}, {hi}] with {bins} bins"
            )));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn from_samples(lo: f64, hi: f64, bins: usize, samples: &[f64]) -> Result<Self> {
        let mut h = Self::uniform(lo, hi, bins)?;
        samples.iter().for_each(|&x| h.add(x));
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    /// `[left, right)` of bin `k`.
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let w = self.width();
        (
            self.lo + k as f64 * w,
            if k + 1 == self.bins() {
                self.hi
            } else {
                self.lo + (k + 1) as f64 * w
            },
        )
    }

    /// The right edge belongs to the last bin.
    pub fn add(&mut self, x: f64) {
        self.total += 1;
        if x >= self.lo && x <= self.hi {
            let k = (((x - self.lo) / self.width()) as usize).min(self.bins() - 1);
            self.counts[k] += 1;
        }
    }

    /// Fraction of all samples in each bin.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        let w = self.width();
        self.frequencies().iter().map(|f| f / w).collect()
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi || self.bins() != other.bins() {
            return Err(Error::SupportMismatch(
                "histograms have different bins".into(),
            ));
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        self.total += other.total;
        Ok(())
    }
}

/// `Σ_b |p_b - q_b| + (1 - Σ_b q_b)`: `q_b` is the reference mass in bin `b`
/// and mass the bins do not cover counts in full. Lies in `[0, 2]`.
pub fn l1_from_masses(frequencies: &[f64], masses: &[f64]) -> Result<f64> {
    if frequencies.len() != masses.len() {
        return Err(Error::SupportMismatch(format!(
            "{} bins vs {} masses",
            frequencies.len(),
            masses.len()
        )));
    }
    let shared: f64 = frequencies
        .iter()
        .zip(masses)
        .map(|(p, q)| (p - q).abs())
        .sum();
    let missing_p = (1.0 - frequencies.iter().sum::<f64>()).max(0.0);
    let missing_q = (1.0 - masses.iter().sum::<f64>()).max(0.0);
    Ok((shared + missing_p + missing_q).min(2.0))
}

/// Mass of a density on each histogram bin by adaptive quadrature.
pub fn bin_masses(density: impl Fn(f64) -> f64, hist: &Histogram) -> Result<Vec<f64>> {
    (0..hist.bins())
        .map(|k| {
            let (a, b) = hist.bin_edges(k);
            Ok(integrate(&density, a, b, 1e-10)?.value)
        })
        .collect()
}

/// Mass of a cell-centred grid density on each histogram bin, splitting
/// cells that straddle a bin edge in proportion to the overlap.
pub fn grid_bin_masses(grid: &DensityGrid1D, hist: &Histogram) -> Vec<f64> {
    let m = grid.cells();
    let dx = 1.0 / m as f64;
    (0..hist.bins())
        .map(|k| {
            let (a, b) = hist.bin_edges(k);
            let first = ((a.max(0.0) / dx) as usize).min(m);
            let last = ((b.min(1.0) / dx).ceil() as usize).min(m);
            (first..last)
                .map(|c| {
                    let (l, r) = (c as f64 * dx, (c + 1) as f64 * dx);
                    let overlap = (r.min(b) - l.max(a)).max(0.0);
                    grid.values()[c] * overlap
                })
                .sum()
        })
        .collect()
}

/// Asymptotic Kolmogorov coefficients `c(α)` for `α = 1%` and `5%`.
pub const KS_C_1PCT: f64 = 1.628;
pub const KS_C_5PCT: f64 = 1.358;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_1pct: f64,
    pub critical_5pct: f64,
}

impl KsResult {
    pub fn passes_1pct(&self) -> bool {
        self.statistic < self.critical_1pct
    }

    pub fn passes_5pct(&self) -> bool {
        self.statistic < self.critical_5pct
    }
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample statistic `sup |F_a - F_b|` with critical values
/// `c(α) sqrt((n + m) / (n m))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let scale = ((n + m) / (n * m)).sqrt();
    Ok(KsResult {
        statistic: d,
        critical_1pct: KS_C_1PCT * scale,
        critical_5pct: KS_C_5PCT * scale,
    })
}

/// One-sample statistic against a continuous CDF, critical values
/// `c(α) / sqrt(n)`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let s = sorted(samples)?;
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let scale = 1.0 / n.sqrt();
    Ok(KsResult {
        statistic: d,
        critical_1pct: KS_C_1PCT * scale,
        critical_5pct: KS_C_5PCT * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub n: usize,
}

impl Moments {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, variance, n }
    }

    pub fn standard_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Inverse-CDF sampler for a piecewise-constant density on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct InverseCdfSampler {
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
}

impl InverseCdfSampler {
    /// `masses[k]` is the probability of cell `k`; they are renormalized.
    pub fn new(lo: f64, hi: f64, masses: &[f64]) -> Result<Self> {
        if masses.is_empty() || !(hi > lo) || masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::Domain("invalid sampler cells".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("sampler has no mass".into()));
        }
        let mut cdf = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for m in masses {
            acc += m / total;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self {
            lo,
            width: (hi - lo) / masses.len() as f64,
            cdf,
        })
    }

    pub fn from_grid(grid: &DensityGrid1D) -> Result<Self> {
        Self::new(0.0, 1.0, grid.values())
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let u = stream.uniform();
        let k = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (c0, c1) = (self.cdf[k], self.cdf[k + 1]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.lo + (k as f64 + frac) * self.width
    }
}

/// Histogram against a reference density, with optional sample-based KS.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub l1: f64,
    pub l1_threshold: f64,
    pub ks: Option<KsResult>,
    pub sample_moments: Moments,
    pub reference_mean: f64,
    pub reference_variance: f64,
    pub passed: bool,
}

/// Compares a histogram with a cell-centred grid density on `[0, 1]`.
/// With `samples`, also a one-sample KS test against the grid CDF.
pub fn compare_distributions(
    hist: &Histogram,
    density: &DensityGrid1D,
    samples: Option<&[f64]>,
    l1_threshold: f64,
) -> Result<ComparisonReport> {
    if hist.lo < 0.0 || hist.hi > 1.0 {
        return Err(Error::SupportMismatch(format!(
            "histogram range [{}, {}] is not inside [0, 1]",
            hist.lo, hist.hi
        )));
    }
    let masses = grid_bin_masses(density, hist);
    let l1 = l1_from_masses(&hist.frequencies(), &masses)?;
    let ks = match samples {
        Some(s) => Some(ks_one_sample(s, |x| grid_cdf(density, x))?),
        None => None,
    };
    let sample_moments = match samples {
        Some(s) => Moments::of(s),
        None => histogram_moments(hist),
    };
    let reference_mean = density.integrate(|x| x);
    let reference_variance = density.integrate(|x| (x - reference_mean).powi(2));
    let passed = l1 <= l1_threshold && ks.is_none_or(|k| k.passes_1pct());
    Ok(ComparisonReport {
        l1,
        l1_threshold,
        ks,
        sample_moments,
        reference_mean,
        reference_variance,
        passed,
    })
}

/// Mean and variance of the bin centres weighted by counts.
pub fn histogram_moments(hist: &Histogram) -> Moments {
    let n: u64 = hist.counts.iter().sum();
    let centers: Vec<f64> = (0..hist.bins())
        .map(|k| {
            let (a, b) = hist.bin_edges(k);
            0.5 * (a + b)
        })
        .collect();
    let mean = centers
        .iter()
        .zip(&hist.counts)
        .map(|(c, &k)| c * k as f64)
        .sum::<f64>()
        / n.max(1) as f64;
    let variance = if n > 1 {
        centers
            .iter()
            .zip(&hist.counts)
            .map(|(c, &k)| (c - mean).powi(2) * k as f64)
            .sum::<f64>()
            / (n - 1) as f64
    } else {
        0.0
    };
    Moments {
        mean,
        variance,
        n: n as usize,
    }
}

/// CDF of a cell-centred grid density read as piecewise constant.
pub fn grid_cdf(grid: &DensityGrid1D, x: f64) -> f64 {
    let m = grid.cells();
    let dx = 1.0 / m as f64;
    let y = x.clamp(0.0, 1.0);
    let k = ((y / dx) as usize).min(m);
    let below: f64 = grid.values()[..k].iter().sum::<f64>() * dx;
    let partial = if k < m {
        grid.values()[k] * (y - k as f64 * dx)
    } else {
        0.0
    };
    ((below + partial) / grid.mass()).min(1.0)
}
