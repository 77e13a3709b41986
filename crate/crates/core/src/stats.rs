//! Empirical CDFs, exact Kolmogorov distance to Φ, the exact Rademacher
//! partial-sum oracle and the CLT convergence scan.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lindeberg::ArrayFamily;
use crate::par;
use crate::sampling::{DistributionSpec, Kind, RngState};
use crate::specfun::normal_cdf;

/// Asymptotic Kolmogorov quantile at 99%: P(√N·D > 1.63) ≈ 0.01.
pub const KS_BAND_99: f64 = 1.63;
/// Asymptotic Kolmogorov quantile at 99.9%.
pub const KS_BAND_999: f64 = 1.95;
/// Largest n for the exact Rademacher oracle.
pub const EXACT_MAX_N: usize = 64;
pub const SCAN_MIN_SAMPLES: usize = 10_000;

/// Sorted sample with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pub source: String,
    pub seed: u64,
}

impl EmpiricalSample {
    /// Sorts `values` ascending; NaNs are rejected.
    pub fn new(mut values: Vec<f64>, source: impl Into<String>, seed: u64) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_nan()) {
            return Err(LabError::EmptySample);
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values, source: source.into(), seed })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fraction of values ≤ t.
pub fn empirical_cdf(sample: &EmpiricalSample, t: f64) -> f64 {
    sample.values.partition_point(|&v| v <= t) as f64 / sample.len() as f64
}

/// sup_t |F̂(t) − Φ(t)|, exact over the sorted values.
pub fn ks_distance_to_normal(sample: &EmpiricalSample) -> f64 {
    ks_distance_sorted(&sample.values, normal_cdf)
}

/// Kolmogorov distance between the empirical law of sorted `values` and a
/// continuous CDF.
pub fn ks_distance_sorted<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let n = values.len() as f64;
    values.iter().enumerate().fold(0.0, |d, (i, &v)| {
        let p = cdf(v);
        let above = ((i + 1) as f64 / n - p).abs();
        let below = (i as f64 / n - p).abs();
        d.max(above).max(below)
    })
}

fn check_oracle_n(n: usize) -> Result<()> {
    if n == 0 || n > EXACT_MAX_N {
        return Err(LabError::OracleRange { n, max: EXACT_MAX_N });
    }
    Ok(())
}

// Support points (2k − n)/√n with cumulative binomial counts.
fn rademacher_support(n: usize) -> (Vec<f64>, Vec<u128>) {
    let root = (n as f64).sqrt();
    let mut points = Vec::with_capacity(n + 1);
    let mut cumulative = Vec::with_capacity(n + 1);
    let mut binom: u128 = 1;
    let mut total: u128 = 0;
    for k in 0..=n {
        if k > 0 {
            binom = binom * (n - k + 1) as u128 / k as u128;
        }
        total += binom;
        // Same arithmetic as a sampled integer sum divided by √n.
        points.push((2.0 * k as f64 - n as f64) / root);
        cumulative.push(total);
    }
    (points, cumulative)
}

/// P((X₁+⋯+Xₙ)/√n ≤ t) for Rademacher Xᵢ, from exact binomial counts.
pub fn rademacher_exact_cdf(n: usize, t: f64) -> Result<f64> {
    check_oracle_n(n)?;
    let (points, cumulative) = rademacher_support(n);
    let below = points.partition_point(|&p| p <= t);
    let count = if below == 0 { 0 } else { cumulative[below - 1] };
    Ok(count as f64 / (1u128 << n) as f64)
}

/// Exact Kolmogorov distance between the Rademacher partial-sum law and Φ.
pub fn exact_ks_rademacher(n: usize) -> Result<f64> {
    check_oracle_n(n)?;
    let (points, cumulative) = rademacher_support(n);
    let scale = (1u128 << n) as f64;
    let mut prev = 0.0;
    let mut d: f64 = 0.0;
    for (p, c) in points.iter().zip(&cumulative) {
        let at = *c as f64 / scale;
        let phi = normal_cdf(*p);
        d = d.max((at - phi).abs()).max((prev - phi).abs());
        prev = at;
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub ks: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub exact_ks: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dist: String,
    pub rows: Vec<ConvergenceRow>,
}

fn is_unit_rademacher(d: &DistributionSpec) -> bool {
    d.kind == Kind::Rademacher && d.scale == 1.0
}

/// Draws `n_samples` values of `draw` in fixed chunks; chunk c uses a
/// substream derived from (seed, tag, c). Output order is chunk order.
pub fn draw_values<F>(tag: u64, n_samples: usize, seed: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut RngState) -> f64 + Sync + Send,
{
    let base = RngState::new(seed, tag);
    let parts = par::map_chunks(par::chunk_count(n_samples), |c| {
        let mut rng = base.substream(c as u64);
        par::chunk_range(c, n_samples).map(|_| draw(&mut rng)).collect::<Vec<f64>>()
    });
    parts.concat()
}

/// KS distance of N normalized sums (X₁+⋯+Xₙ)/√n to Φ for each n.
pub fn clt_convergence_scan(
    dist: &DistributionSpec,
    n_grid: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    let v = dist.variance();
    if (v - 1.0).abs() > 1e-12 {
        return Err(LabError::NotUnitVariance(v));
    }
    if n_samples < SCAN_MIN_SAMPLES {
        return Err(LabError::TooFewSamples { min: SCAN_MIN_SAMPLES, got: n_samples });
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n == 0 {
            return Err(LabError::NonPositive { name: "n", value: 0.0 });
        }
        let root = (n as f64).sqrt();
        let values = draw_values(n as u64, n_samples, seed, |rng| {
            let s: f64 = (0..n).map(|_| dist.sample(rng)).sum();
            s / root
        });
        let sample = EmpiricalSample::new(values, dist.to_string(), seed)?;
        let exact_ks = if is_unit_rademacher(dist) && n <= EXACT_MAX_N {
            Some(exact_ks_rademacher(n)?)
        } else {
            None
        };
        rows.push(ConvergenceRow { n, ks: ks_distance_to_normal(&sample), n_samples, seed, exact_ks });
    }
    Ok(ConvergenceReport { dist: dist.to_string(), rows })
}

/// KS distance of N row sums Σᵢ X_{n,i} to Φ for each row of a triangular array.
pub fn family_convergence_scan(
    family: &ArrayFamily,
    n_grid: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if let ArrayFamily::Iid(d) = family {
        let mut r = clt_convergence_scan(d, n_grid, n_samples, seed)?;
        r.dist = family.to_string();
        return Ok(r);
    }
    if n_samples < SCAN_MIN_SAMPLES {
        return Err(LabError::TooFewSamples { min: SCAN_MIN_SAMPLES, got: n_samples });
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let row = family.row(n)?;
        let values = draw_values(n as u64, n_samples, seed, |rng| row.sample_sum(rng));
        let sample = EmpiricalSample::new(values, family.to_string(), seed)?;
        rows.push(ConvergenceRow { n, ks: ks_distance_to_normal(&sample), n_samples, seed, exact_ks: None });
    }
    Ok(ConvergenceReport { dist: family.to_string(), rows })
}

/// True when `ks` is strictly decreasing along the rows.
pub fn strictly_decreasing(report: &ConvergenceReport) -> bool {
    report.rows.windows(2).all(|w| w[1].ks < w[0].ks)
}
