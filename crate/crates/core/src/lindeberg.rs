//! Triangular arrays, the Lindeberg condition, the companion normal row and
//! the normal tail-sum bound 3δ⁻²·maxᵢ vᵢ.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exchange::MCEstimate;
use crate::mc::{compensated_sum, Moments};
use crate::par;
use crate::sampling::{DistributionSpec, Kind, RngState};
use crate::specfun::normal_truncated_second_moment;

/// Tolerance on Σᵢ Var(X_{n,i}) = 1.
pub const VARIANCE_SUM_TOL: f64 = 1e-10;
/// Tolerance on each entry's mean.
pub const MEAN_TOL: f64 = 1e-12;
/// Slack allowed in normal_tail_sum ≤ normal_tail_bound.
pub const NORMAL_TAIL_SLACK: f64 = 1e-10;

/// One row X_{n,1}, …, X_{n,m} of independent mean-zero entries whose
/// variances sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularRow {
    #[serde(rename = "n")]
    pub n_index: usize,
    pub entries: Vec<DistributionSpec>,
}

impl TriangularRow {
    /// Builds and validates a row.
    pub fn new(n_index: usize, entries: Vec<DistributionSpec>) -> Result<Self> {
        let row = Self { n_index, entries };
        validate_row(&row)?;
        Ok(row)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.entries.iter().map(DistributionSpec::variance).collect()
    }

    pub fn variance_sum(&self) -> f64 {
        compensated_sum(self.entries.iter().map(DistributionSpec::variance))
    }

    pub fn max_variance(&self) -> f64 {
        self.entries.iter().map(DistributionSpec::variance).fold(0.0, f64::max)
    }

    /// One draw of Σᵢ X_{n,i}.
    pub fn sample_sum(&self, rng: &mut RngState) -> f64 {
        self.entries.iter().map(|e| e.sample(rng)).sum()
    }
}

pub fn validate_row(row: &TriangularRow) -> Result<()> {
    if row.entries.is_empty() {
        return Err(LabError::EmptyRow);
    }
    for (index, e) in row.entries.iter().enumerate() {
        let mean = e.mean();
        if mean.abs() > MEAN_TOL {
            return Err(LabError::NonZeroMean { index, mean });
        }
    }
    let sum = row.variance_sum();
    if (sum - 1.0).abs() > VARIANCE_SUM_TOL {
        return Err(LabError::VarianceSum { sum });
    }
    Ok(())
}

/// A rule producing one row per n.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayFamily {
    /// n copies of the base law at scale 1/√n.
    Iid(DistributionSpec),
    /// One entry at scale 1/√2 plus n entries at scale 1/√(2n).
    Spike(DistributionSpec),
    /// Rows loaded from a file, looked up by their `n`.
    Custom(Vec<TriangularRow>),
}

/// File form of a custom array: `{"rows": [{"n": 3, "entries": [...]}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomArrayFile {
    pub rows: Vec<TriangularRow>,
}

fn unit_base(base: DistributionSpec) -> Result<DistributionSpec> {
    let v = base.variance();
    if (v - 1.0).abs() > 1e-12 {
        return Err(LabError::NotUnitVariance(v));
    }
    Ok(base)
}

impl ArrayFamily {
    pub fn iid(base: DistributionSpec) -> Result<Self> {
        Ok(Self::Iid(unit_base(base)?))
    }

    pub fn spike(base: DistributionSpec) -> Result<Self> {
        Ok(Self::Spike(unit_base(base)?))
    }

    /// Parses a custom-array JSON document and validates every row.
    pub fn custom_from_json(text: &str) -> std::result::Result<Self, String> {
        let file: CustomArrayFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.rows.is_empty() {
            return Err("custom array has no rows".into());
        }
        for row in &file.rows {
            validate_row(row).map_err(|e| format!("row n={}: {e}", row.n_index))?;
        }
        Ok(Self::Custom(file.rows))
    }

    pub fn row(&self, n: usize) -> Result<TriangularRow> {
        if n == 0 {
            return Err(LabError::NonPositive { name: "n", value: 0.0 });
        }
        match self {
            Self::Iid(base) => {
                let e = base.scaled(1.0 / (n as f64).sqrt());
                TriangularRow::new(n, vec![e; n])
            }
            Self::Spike(base) => {
                let mut entries = Vec::with_capacity(n + 1);
                entries.push(base.scaled(std::f64::consts::FRAC_1_SQRT_2));
                entries.extend(std::iter::repeat_n(base.scaled(1.0 / (2.0 * n as f64).sqrt()), n));
                TriangularRow::new(n, entries)
            }
            Self::Custom(rows) => rows
                .iter()
                .find(|r| r.n_index == n)
                .cloned()
                .ok_or_else(|| LabError::InvalidFamily(format!("custom array has no row n={n}"))),
        }
    }

    /// Row labels available without a grid (custom arrays only).
    pub fn indices(&self) -> Option<Vec<usize>> {
        match self {
            Self::Custom(rows) => Some(rows.iter().map(|r| r.n_index).collect()),
            _ => None,
        }
    }
}

impl fmt::Display for ArrayFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iid(d) => write!(f, "iid:{d}"),
            Self::Spike(d) => write!(f, "spike:{d}"),
            Self::Custom(rows) => write!(f, "custom({} rows)", rows.len()),
        }
    }
}

/// Parses `iid:<dist>` or `spike:<dist>`.
impl FromStr for ArrayFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let (preset, dist) =
            s.split_once(':').ok_or_else(|| LabError::InvalidFamily(s.to_string()))?;
        let base: DistributionSpec = dist.parse()?;
        match preset.trim() {
            "iid" => Self::iid(base),
            "spike" => Self::spike(base),
            _ => Err(LabError::InvalidFamily(s.to_string())),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(LabError::NonPositive { name: "delta", value: delta });
    }
    Ok(())
}

/// Σᵢ E[X_{n,i}²; |X_{n,i}| > δ].
pub fn lindeberg_tail_sum(row: &TriangularRow, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    // Rows are mostly runs of identical entries; reuse the last term.
    let mut last: Option<(DistributionSpec, f64)> = None;
    let mut terms = Vec::with_capacity(row.len());
    for e in &row.entries {
        let t = match last {
            Some((prev, t)) if prev == *e => t,
            _ => e.truncated_second_moment(delta)?,
        };
        last = Some((*e, t));
        terms.push(t);
    }
    Ok(compensated_sum(terms))
}

/// (maxᵢ E[X²], ε² + Σᵢ E[X²; |X| > ε]); the first never exceeds the second.
pub fn max_row_variance_bound(row: &TriangularRow, epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0) {
        return Err(LabError::NonPositive { name: "epsilon", value: epsilon });
    }
    Ok((row.max_variance(), epsilon * epsilon + lindeberg_tail_sum(row, epsilon)?))
}

/// Row of √vᵢ·N entries matching the variances of `row`.
pub fn companion_normal_row(row: &TriangularRow) -> Result<TriangularRow> {
    let entries = row
        .entries
        .iter()
        .map(|e| DistributionSpec { kind: Kind::Normal { variance: e.variance() }, scale: 1.0 })
        .collect();
    TriangularRow::new(row.n_index, entries)
}

/// (Σᵢ E[Yᵢ²; |Yᵢ| > δ], 3δ⁻²·maxᵢ vᵢ) for the companion normals Yᵢ.
pub fn normal_tail_sum_bound(row: &TriangularRow, delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let sum =
        compensated_sum(row.entries.iter().map(|e| normal_truncated_second_moment(e.variance(), delta)));
    Ok((sum, 3.0 * row.max_variance() / (delta * delta)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindebergReport {
    pub n_index: usize,
    pub row_len: usize,
    pub delta: f64,
    pub tail_sum: f64,
    pub max_variance: f64,
    pub normal_tail_sum: f64,
    pub normal_tail_bound: f64,
}

impl LindebergReport {
    pub fn normal_bound_holds(&self) -> bool {
        self.normal_tail_sum <= self.normal_tail_bound + NORMAL_TAIL_SLACK
    }
}

pub fn lindeberg_report(row: &TriangularRow, delta: f64) -> Result<LindebergReport> {
    let tail_sum = lindeberg_tail_sum(row, delta)?;
    let (normal_tail_sum, normal_tail_bound) = normal_tail_sum_bound(row, delta)?;
    Ok(LindebergReport {
        n_index: row.n_index,
        row_len: row.len(),
        delta,
        tail_sum,
        max_variance: row.max_variance(),
        normal_tail_sum,
        normal_tail_bound,
    })
}

/// Finite-grid heuristic for whether a tail sum tends to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayVerdict {
    /// Dropped by at least 10× from the smallest to the largest n.
    Vanishing,
    /// Positive at every n without a 10× drop.
    NonVanishing,
    Inconclusive,
}

impl fmt::Display for DecayVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vanishing => "vanishing",
            Self::NonVanishing => "non-vanishing",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Judges `(n, tail_sum)` pairs; the grid order does not matter.
pub fn decay_verdict(points: &[(usize, f64)]) -> DecayVerdict {
    if points.len() < 2 {
        return DecayVerdict::Inconclusive;
    }
    let first = points.iter().min_by_key(|p| p.0).map(|p| p.1).unwrap_or(0.0);
    let last = points.iter().max_by_key(|p| p.0).map(|p| p.1).unwrap_or(0.0);
    let floor = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if last <= first / 10.0 {
        DecayVerdict::Vanishing
    } else if floor > 0.0 {
        DecayVerdict::NonVanishing
    } else {
        DecayVerdict::Inconclusive
    }
}

/// Monte Carlo E[Z²] and E[Z⁴] for the normal sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub second: MCEstimate,
    pub fourth: MCEstimate,
}

pub const MOMENT_MIN_SAMPLES: usize = 10_000;

pub fn moment_identity_check(n_samples: usize, seed: u64) -> Result<MomentCheck> {
    if n_samples < MOMENT_MIN_SAMPLES {
        return Err(LabError::TooFewSamples { min: MOMENT_MIN_SAMPLES, got: n_samples });
    }
    let parts = par::map_chunks(par::chunk_count(n_samples), |c| {
        let mut rng = RngState::new(seed, c as u64);
        let (mut m2, mut m4) = (Moments::default(), Moments::default());
        for _ in par::chunk_range(c, n_samples) {
            let z = rng.standard_normal();
            let z2 = z * z;
            m2.push(z2);
            m4.push(z2 * z2);
        }
        (m2, m4)
    });
    let (m2, m4) = par::pairwise_reduce(parts, |a, b| (a.0.merge(b.0), a.1.merge(b.1)))
        .unwrap_or_default();
    Ok(MomentCheck {
        second: MCEstimate::from_moments(&m2, seed),
        fourth: MCEstimate::from_moments(&m4, seed),
    })
}

/// First and third sample moments over antithetic pairs (z, −z); each pair
/// contributes exactly zero.
pub fn antithetic_odd_moments(n_pairs: usize, seed: u64) -> (f64, f64) {
    let mut rng = RngState::new(seed, 0);
    let (mut s1, mut s3) = (0.0, 0.0);
    for _ in 0..n_pairs {
        let z = rng.standard_normal();
        let w = -z;
        s1 += z + w;
        s3 += z * z * z + w * w * w;
    }
    let n = (2 * n_pairs.max(1)) as f64;
    (s1 / n, s3 / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid(d: &str, n: usize) -> TriangularRow {
        format!("iid:{d}").parse::<ArrayFamily>().unwrap().row(n).unwrap()
    }

    fn spike(n: usize) -> TriangularRow {
        "spike:rademacher".parse::<ArrayFamily>().unwrap().row(n).unwrap()
    }

    #[test]
    fn presets_validate() {
        assert!(validate_row(&iid("rademacher", 10)).is_ok());
        let s = spike(5);
        assert_eq!(s.len(), 6);
        assert!(validate_row(&s).is_ok());
    }

    #[test]
    fn rejects_bad_variance_sum() {
        let e = DistributionSpec::rademacher().scaled(0.6f64.sqrt());
        match TriangularRow::new(1, vec![e, e]) {
            Err(LabError::VarianceSum { sum }) => assert!((sum - 1.2).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(TriangularRow::new(1, vec![]), Err(LabError::EmptyRow));
    }

    #[test]
    fn rejects_non_unit_base() {
        assert!("iid:uniform*2".parse::<ArrayFamily>().is_err());
        assert!("iid:normal:0.5".parse::<ArrayFamily>().is_err());
        assert!("blob:rademacher".parse::<ArrayFamily>().is_err());
    }

    #[test]
    fn rademacher_tail_sums() {
        assert_eq!(lindeberg_tail_sum(&iid("rademacher", 200), 0.1).unwrap(), 0.0);
        assert_eq!(lindeberg_tail_sum(&iid("rademacher", 50), 0.1).unwrap(), 1.0);
        for n in [1, 3, 10, 1000] {
            assert!(lindeberg_tail_sum(&spike(n), 0.5).unwrap() >= 0.5);
        }
        assert!(lindeberg_tail_sum(&spike(1), 0.0).is_err());
    }

    #[test]
    fn max_variance_bound_examples() {
        let (m, b) = max_row_variance_bound(&iid("rademacher", 100), 0.2).unwrap();
        assert!((m - 0.01).abs() < 1e-15);
        assert!((b - 0.04).abs() < 1e-15);
        let (m, b) = max_row_variance_bound(&iid("twopoint:0.3", 7), 1.0).unwrap();
        assert!(b >= 1.0 && m <= b);
        let (m, b) = max_row_variance_bound(&spike(20), 0.1).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert!(b >= 0.01 + 0.5 && m <= b);
    }

    #[test]
    fn companion_rows() {
        let c = companion_normal_row(&iid("rademacher", 4)).unwrap();
        assert_eq!(c.len(), 4);
        for e in &c.entries {
            assert!(matches!(e.kind, Kind::Normal { variance } if (variance - 0.25).abs() < 1e-16));
        }
        assert_eq!(companion_normal_row(&c).unwrap().variances(), c.variances());

        let zero = DistributionSpec::normal(0.0).unwrap();
        let row = TriangularRow::new(1, vec![zero, DistributionSpec::rademacher()]).unwrap();
        let comp = companion_normal_row(&row).unwrap();
        assert_eq!(comp.entries[0].variance(), 0.0);
    }

    #[test]
    fn normal_tail_bound_examples() {
        let (sum, bound) = normal_tail_sum_bound(&iid("uniform", 100), 0.5).unwrap();
        assert!((bound - 0.12).abs() < 1e-15);
        assert!(sum <= bound);
        let single = TriangularRow::new(1, vec![DistributionSpec::normal(1.0).unwrap()]).unwrap();
        let (sum, bound) = normal_tail_sum_bound(&single, 0.7).unwrap();
        assert_eq!(sum, normal_truncated_second_moment(1.0, 0.7));
        assert!((bound - 3.0 / 0.49).abs() < 1e-14);
        let (sum, bound) = normal_tail_sum_bound(&spike(9), 10.0).unwrap();
        assert!(sum < 1e-20);
        assert!((bound - 0.03 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn verdicts() {
        assert_eq!(decay_verdict(&[(10, 0.3), (1000, 0.01)]), DecayVerdict::Vanishing);
        assert_eq!(decay_verdict(&[(10, 0.0), (1000, 0.0)]), DecayVerdict::Vanishing);
        assert_eq!(decay_verdict(&[(10, 1.0), (100, 0.5), (1000, 0.5)]), DecayVerdict::NonVanishing);
        assert_eq!(decay_verdict(&[(10, 0.0), (100, 0.5)]), DecayVerdict::Inconclusive);
        assert_eq!(decay_verdict(&[(10, 1.0)]), DecayVerdict::Inconclusive);
    }

    #[test]
    fn custom_file_rows() {
        let text = r#"{"rows": [
            {"n": 2, "entries": [{"kind": "rademacher", "scale": 0.6}, {"kind": "normal", "param": 0.64}]},
            {"n": 3, "entries": [{"kind": "uniform"}]}
        ]}"#;
        let fam = ArrayFamily::custom_from_json(text).unwrap();
        assert_eq!(fam.indices(), Some(vec![2, 3]));
        assert_eq!(fam.row(2).unwrap().len(), 2);
        assert!(fam.row(4).is_err());
        let bad = r#"{"rows": [{"n": 1, "entries": [{"kind": "uniform", "scale": 0.5}]}]}"#;
        assert!(ArrayFamily::custom_from_json(bad).is_err());
    }

    #[test]
    fn antithetic_odd_moments_vanish() {
        assert_eq!(antithetic_odd_moments(10_000, 3), (0.0, 0.0));
    }

    #[test]
    fn moment_check_rejects_small_n() {
        assert!(moment_identity_check(100, 1).is_err());
    }
}
