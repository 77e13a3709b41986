//! Hybrid sums Z_{n,i} / S_{n,i}, per-swap error bounds and the telescoping
//! swap-chain scan from Z_{n,m} (all original terms) down to Z_{n,0} (all
//! companion normals).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lindeberg::{validate_row, TriangularRow};
use crate::mc::Moments;
use crate::par;
use crate::sampling::{DistributionSpec, RngState};
use crate::specfun::{delta_for_epsilon, normal_truncated_second_moment, DerivBoundCert, Direction, TransitionFn};

/// Standard errors of slack in every statistical pass/fail decision.
pub const SE_TOLERANCE: f64 = 4.0;
/// Slack for tail_y ≤ var_i in [`per_swap_bound`].
pub const TAIL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MCEstimate {
    pub fn from_moments(m: &Moments, seed: u64) -> Self {
        Self { mean: m.mean, std_error: m.std_error(), n_samples: m.count as usize, seed }
    }
}

/// A bounded test function with bounded first three derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFn {
    Transition(TransitionFn),
    /// cos(ωt).
    Cosine { omega: f64 },
}

impl TestFn {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Transition(f) => f.value(t),
            Self::Cosine { omega } => (omega * t).cos(),
        }
    }

    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        match self {
            Self::Transition(f) => f.eval(t, order),
            Self::Cosine { omega } => {
                let w = *omega;
                let x = w * t;
                match order {
                    0 => Ok(x.cos()),
                    1 => Ok(-w * x.sin()),
                    2 => Ok(-w * w * x.cos()),
                    3 => Ok(w * w * w * x.sin()),
                    k => Err(LabError::DerivativeOrder(k)),
                }
            }
        }
    }

    pub fn bounds(&self) -> DerivBoundCert {
        match self {
            Self::Transition(f) => f.bounds(),
            Self::Cosine { omega } => {
                let w = omega.abs();
                DerivBoundCert { sup_f1: w, sup_f2: w * w, sup_f3: w * w * w }
            }
        }
    }
}

impl fmt::Display for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Transition(t) => {
                let d = match t.direction {
                    Direction::DropBefore => "before",
                    Direction::DropAfter => "after",
                };
                write!(f, "{d}:{}:{}", t.x, t.eta)
            }
            Self::Cosine { omega } => write!(f, "cos:{omega}"),
        }
    }
}

/// Parses `before:<x>:<eta>`, `after:<x>:<eta>` or `cos:<omega>`.
impl FromStr for TestFn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| p.parse::<f64>().map_err(|_| format!("`{p}` is not a number"));
        match parts.as_slice() {
            [dir @ ("before" | "after"), x, eta] => {
                let direction =
                    if *dir == "before" { Direction::DropBefore } else { Direction::DropAfter };
                TransitionFn::new(num(x)?, num(eta)?, direction)
                    .map(Self::Transition)
                    .map_err(|e| e.to_string())
            }
            ["cos", w] => {
                let omega = num(w)?;
                if omega == 0.0 || !omega.is_finite() {
                    return Err("omega must be nonzero".into());
                }
                Ok(Self::Cosine { omega })
            }
            _ => Err(format!("unknown test function `{s}` (before:x:eta, after:x:eta, cos:omega)")),
        }
    }
}

/// Everything a swap-chain run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub row: TriangularRow,
    pub f: TestFn,
    pub samples: usize,
    pub seed: u64,
}

impl ChainSpec {
    pub fn new(row: TriangularRow, f: TestFn, samples: usize, seed: u64) -> Result<Self> {
        validate_row(&row)?;
        if samples < 2 {
            return Err(LabError::TooFewSamples { min: 2, got: samples });
        }
        Ok(Self { row, f, samples, seed })
    }

    /// The i.i.d. chain: n copies of `dist` at scale 1/√n.
    pub fn iid(dist: DistributionSpec, n: usize, f: TestFn, samples: usize, seed: u64) -> Result<Self> {
        let row = crate::lindeberg::ArrayFamily::iid(dist)?.row(n)?;
        Self::new(row, f, samples, seed)
    }

    pub fn len(&self) -> usize {
        self.row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row.is_empty()
    }
}

#[inline]
fn companion_draw(entry: &DistributionSpec, rng: &mut RngState) -> f64 {
    entry.variance().sqrt() * rng.standard_normal()
}

/// One draw of Z_{n,i} = X₁+⋯+X_i+Y_{i+1}+⋯+Y_m (`include_x_i`) or of
/// S_{n,i} = X₁+⋯+X_{i−1}+Y_{i+1}+⋯+Y_m. Terms are drawn left to right.
pub fn sample_hybrid(chain: &ChainSpec, i: usize, include_x_i: bool, rng: &mut RngState) -> Result<f64> {
    let m = chain.len();
    let lo = if include_x_i { 0 } else { 1 };
    if i < lo || i > m {
        return Err(LabError::IndexOutOfRange { index: i, max: m });
    }
    let x_upto = if include_x_i { i } else { i - 1 };
    let mut sum = 0.0;
    for (j, e) in chain.row.entries.iter().enumerate() {
        let k = j + 1;
        if k <= x_upto {
            sum += e.sample(rng);
        } else if k > i {
            sum += companion_draw(e, rng);
        }
    }
    Ok(sum)
}

/// Mean and standard error of `f(sampler(rng))` over `n` draws. Chunk `c`
/// draws from stream `c` of `seed`; the result does not depend on the number
/// of workers.
pub fn estimate_expectation<S, F>(sampler: S, f: F, n: usize, seed: u64) -> Result<MCEstimate>
where
    S: Fn(&mut RngState) -> f64 + Sync + Send,
    F: Fn(f64) -> f64 + Sync + Send,
{
    if n < 2 {
        return Err(LabError::TooFewSamples { min: 2, got: n });
    }
    let parts = par::map_chunks(par::chunk_count(n), |c| {
        let mut rng = RngState::new(seed, c as u64);
        let mut m = Moments::default();
        for _ in par::chunk_range(c, n) {
            m.push(f(sampler(&mut rng)));
        }
        m
    });
    let m = par::pairwise_reduce(parts, Moments::merge).unwrap_or_default();
    Ok(MCEstimate::from_moments(&m, seed))
}

/// ε·var_i + M·(tail_x + tail_y).
pub fn per_swap_bound(var_i: f64, tail_x: f64, tail_y: f64, epsilon: f64, m: f64) -> Result<f64> {
    let fail = |msg: String| Err(LabError::BoundPrecondition(msg));
    for (name, v) in [("var_i", var_i), ("tail_x", tail_x), ("tail_y", tail_y), ("epsilon", epsilon), ("M", m)] {
        if !(v >= 0.0) {
            return fail(format!("{name} = {v} is negative"));
        }
    }
    if tail_x > var_i + TAIL_SLACK {
        return fail(format!("tail_x = {tail_x} exceeds var_i = {var_i}"));
    }
    if tail_y > var_i + TAIL_SLACK {
        return fail(format!("tail_y = {tail_y} exceeds var_i = {var_i}"));
    }
    Ok(epsilon * var_i + m * (tail_x + tail_y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapChainReport {
    pub n_index: usize,
    pub row_len: usize,
    pub test_fn: String,
    pub samples: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "M")]
    pub curvature_bound: f64,
    pub sup_f3: f64,
    /// E[f(Z_{n,i})] for i = 0..=m.
    pub estimates: Vec<MCEstimate>,
    /// Signed Δᵢ = estimates[i] − estimates[i−1], i = 1..=m.
    pub per_swap_gaps: Vec<f64>,
    /// Standard error of each Δᵢ from paired per-path differences.
    pub gap_std_errors: Vec<f64>,
    /// Bᵢ from exact truncated moments.
    pub per_swap_bounds: Vec<f64>,
    /// 2ε·E[X_i²], the large-n regime bound.
    pub regime_bounds: Vec<f64>,
    /// 1-based indices i with |Δᵢ| > Bᵢ + 4·SEᵢ.
    pub flagged: Vec<usize>,
    pub total_gap: f64,
    pub total_bound: f64,
    pub total_std_error: f64,
    pub regime_total_bound: f64,
    pub total_within_bound: bool,
}

impl SwapChainReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty() && self.total_within_bound
    }

    /// |total_gap − ΣΔᵢ|.
    pub fn telescoping_residual(&self) -> f64 {
        (self.total_gap - self.per_swap_gaps.iter().sum::<f64>()).abs()
    }
}

struct ChainAccum {
    levels: Vec<Moments>,
    diffs: Vec<Moments>,
}

impl ChainAccum {
    fn merge(mut self, other: ChainAccum) -> ChainAccum {
        for (a, b) in self.levels.iter_mut().zip(other.levels) {
            *a = a.merge(b);
        }
        for (a, b) in self.diffs.iter_mut().zip(other.diffs) {
            *a = a.merge(b);
        }
        self
    }
}

/// Estimates E[f(Z_{n,i})] for every i from shared sample paths (common
/// random numbers) and returns (levels, paired differences).
fn chain_moments(chain: &ChainSpec) -> (Vec<Moments>, Vec<Moments>) {
    let m = chain.len();
    let n = chain.samples;
    let entries = &chain.row.entries;
    let sds: Vec<f64> = entries.iter().map(|e| e.variance().sqrt()).collect();
    let parts = par::map_chunks(par::chunk_count(n), |c| {
        let mut rng = RngState::new(chain.seed, c as u64);
        let mut acc = ChainAccum { levels: vec![Moments::default(); m + 1], diffs: vec![Moments::default(); m] };
        let mut xs = vec![0.0; m];
        let mut tail_y = vec![0.0; m + 1];
        let mut fv = vec![0.0; m + 1];
        let mut ydraws = vec![0.0; m];
        for _ in par::chunk_range(c, n) {
            for (x, e) in xs.iter_mut().zip(entries) {
                *x = e.sample(&mut rng);
            }
            // tail_y[i] = Y_{i+1} + … + Y_m (1-based Y), so Z_i = X₁..X_i + tail_y[i].
            let mut ys = 0.0;
            tail_y[m] = 0.0;
            for (y, s) in ydraws.iter_mut().zip(&sds) {
                *y = s * rng.standard_normal();
            }
            for j in (0..m).rev() {
                ys += ydraws[j];
                tail_y[j] = ys;
            }
            let mut prefix = 0.0;
            fv[0] = chain.f.value(tail_y[0]);
            for i in 1..=m {
                prefix += xs[i - 1];
                fv[i] = chain.f.value(prefix + tail_y[i]);
            }
            for i in 0..=m {
                acc.levels[i].push(fv[i]);
            }
            for i in 1..=m {
                acc.diffs[i - 1].push(fv[i] - fv[i - 1]);
            }
        }
        acc
    });
    let acc = par::pairwise_reduce(parts, ChainAccum::merge).expect("samples >= 2");
    (acc.levels, acc.diffs)
}

/// Runs the full swap chain and compares every per-swap gap with its bound.
pub fn swap_chain_scan(chain: &ChainSpec, epsilon: f64) -> Result<SwapChainReport> {
    let mut reports = swap_chain_scan_multi(chain, &[epsilon])?;
    Ok(reports.remove(0))
}

/// [`swap_chain_scan`] for several ε sharing the same sampled estimates.
pub fn swap_chain_scan_multi(chain: &ChainSpec, epsilons: &[f64]) -> Result<Vec<SwapChainReport>> {
    validate_row(&chain.row)?;
    if chain.samples < 2 {
        return Err(LabError::TooFewSamples { min: 2, got: chain.samples });
    }
    for &e in epsilons {
        if !(e > 0.0) {
            return Err(LabError::NonPositive { name: "epsilon", value: e });
        }
    }
    let (levels, diffs) = chain_moments(chain);
    let estimates: Vec<MCEstimate> = levels.iter().map(|m| MCEstimate::from_moments(m, chain.seed)).collect();
    let gaps: Vec<f64> = estimates.windows(2).map(|w| w[1].mean - w[0].mean).collect();
    let gap_se: Vec<f64> = diffs.iter().map(Moments::std_error).collect();
    let total_gap = estimates[chain.len()].mean - estimates[0].mean;
    let total_std_error: f64 = gap_se.iter().sum();
    let certs = chain.f.bounds();
    let variances = chain.row.variances();

    epsilons
        .iter()
        .map(|&epsilon| {
            let delta = delta_for_epsilon(epsilon, certs.sup_f3)?;
            let big_m = certs.sup_f2;
            let mut bounds = Vec::with_capacity(chain.len());
            for (e, &v) in chain.row.entries.iter().zip(&variances) {
                let tail_x = e.truncated_second_moment(delta)?;
                let tail_y = normal_truncated_second_moment(v, delta);
                bounds.push(per_swap_bound(v, tail_x, tail_y, epsilon, big_m)?);
            }
            let flagged = (0..chain.len())
                .filter(|&i| gaps[i].abs() > bounds[i] + SE_TOLERANCE * gap_se[i])
                .map(|i| i + 1)
                .collect();
            let total_bound: f64 = bounds.iter().sum();
            let regime_bounds: Vec<f64> = variances.iter().map(|v| 2.0 * epsilon * v).collect();
            Ok(SwapChainReport {
                n_index: chain.row.n_index,
                row_len: chain.len(),
                test_fn: chain.f.to_string(),
                samples: chain.samples,
                seed: chain.seed,
                epsilon,
                delta,
                curvature_bound: big_m,
                sup_f3: certs.sup_f3,
                estimates: estimates.clone(),
                per_swap_gaps: gaps.clone(),
                gap_std_errors: gap_se.clone(),
                regime_total_bound: regime_bounds.iter().sum(),
                regime_bounds,
                per_swap_bounds: bounds,
                flagged,
                total_gap,
                total_within_bound: total_gap.abs() <= total_bound + SE_TOLERANCE * total_std_error,
                total_bound,
                total_std_error,
            })
        })
        .collect()
}

/// (mean of DropBefore(x, η), fraction ≤ x, mean of DropAfter(x, η)) over
/// `samples`. The ordering a ≤ b ≤ c holds exactly for any input.
pub fn sandwich_check(samples: &[f64], x: f64, eta: f64) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(LabError::EmptySample);
    }
    let lower = TransitionFn::drop_before(x, eta)?;
    let upper = TransitionFn::drop_after(x, eta)?;
    let n = samples.len() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &s in samples {
        a += lower.value(s);
        b += if s <= x { 1.0 } else { 0.0 };
        c += upper.value(s);
    }
    Ok((a / n, b / n, c / n))
}
