//! Seedable substream RNG and the catalog of mean-zero laws.
//!
//! Uniform consumption per draw, which keeps streams aligned:
//!
//! | kind          | uniforms per draw                           |
//! |---------------|---------------------------------------------|
//! | `rademacher`  | 1                                           |
//! | `uniform`     | 1                                           |
//! | `exp`         | 1                                           |
//! | `twopoint:p`  | 1                                           |
//! | `normal:v`    | 2 on every other draw (Box–Muller pair, second value cached) |

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad;
use crate::specfun::normal_truncated_second_moment;

/// Absolute tolerance for quadrature-backed truncated moments.
pub const QUAD_TOL: f64 = 1e-12;

const TWO_POINT_MIN: f64 = 0.01;
const TWO_POINT_MAX: f64 = 0.99;

/// A ChaCha8 generator bound to one `(seed, stream)` pair.
///
/// Not shareable: parallel code derives one substream per work chunk with
/// [`RngState::substream`].
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    counter: u64,
    inner: ChaCha8Rng,
    cached_normal: Option<f64>,
}

pub fn make_rng(seed: u64, stream: u64) -> RngState {
    RngState::new(seed, stream)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, counter: 0, inner, cached_normal: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Fresh generator on a stream derived from this one's stream and `index`.
    pub fn substream(&self, index: u64) -> RngState {
        RngState::new(self.seed, splitmix64(splitmix64(self.stream) ^ index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller; the sine branch is cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.cached_normal = Some(r * s);
        r * c
    }
}

/// The unscaled law. All kinds have mean 0; all but `Normal` have variance 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// ±1 with equal probability.
    Rademacher,
    /// Uniform on [−√3, √3].
    UniformSym,
    /// Exp(1) − 1.
    ExpCentered,
    /// √((1−p)/p) with probability p, −√(p/(1−p)) otherwise.
    TwoPoint { p: f64 },
    /// √v·N for N standard normal.
    Normal { variance: f64 },
}

/// A sampleable law: `kind` multiplied by `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct DistributionSpec {
    pub kind: Kind,
    pub scale: f64,
}

impl DistributionSpec {
    pub fn new(kind: Kind, scale: f64) -> Result<Self> {
        let spec = Self { kind, scale };
        spec.check()?;
        Ok(spec)
    }

    pub fn rademacher() -> Self {
        Self { kind: Kind::Rademacher, scale: 1.0 }
    }

    pub fn uniform() -> Self {
        Self { kind: Kind::UniformSym, scale: 1.0 }
    }

    pub fn exp_centered() -> Self {
        Self { kind: Kind::ExpCentered, scale: 1.0 }
    }

    pub fn two_point(p: f64) -> Result<Self> {
        Self::new(Kind::TwoPoint { p }, 1.0)
    }

    pub fn normal(variance: f64) -> Result<Self> {
        Self::new(Kind::Normal { variance }, 1.0)
    }

    /// Same law with its scale multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self { kind: self.kind, scale: self.scale * factor }
    }

    fn check(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(LabError::InvalidDistribution { input: self.to_string(), reason })
        };
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return bad(format!("scale must be positive and finite, got {}", self.scale));
        }
        match self.kind {
            Kind::TwoPoint { p } if !(TWO_POINT_MIN..=TWO_POINT_MAX).contains(&p) => {
                bad(format!("two-point p must lie in [{TWO_POINT_MIN}, {TWO_POINT_MAX}], got {p}"))
            }
            Kind::Normal { variance } if !(variance >= 0.0) || !variance.is_finite() => {
                bad(format!("normal variance must be finite and >= 0, got {variance}"))
            }
            _ => Ok(()),
        }
    }

    fn two_point_values(p: f64) -> (f64, f64) {
        (((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt())
    }

    /// Mean computed from the law's support; zero up to rounding for every kind.
    pub fn mean(&self) -> f64 {
        match self.kind {
            Kind::TwoPoint { p } => {
                let (hi, lo) = Self::two_point_values(p);
                self.scale * (p * hi + (1.0 - p) * lo)
            }
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.kind {
            Kind::Normal { variance } => variance * s2,
            _ => s2,
        }
    }

    /// max |X| when the support is bounded.
    pub fn support_bound(&self) -> Option<f64> {
        match self.kind {
            Kind::Rademacher => Some(self.scale),
            Kind::UniformSym => Some(self.scale * 3f64.sqrt()),
            Kind::TwoPoint { p } => {
                let (hi, lo) = Self::two_point_values(p);
                Some(self.scale * hi.max(-lo))
            }
            Kind::Normal { variance } if variance == 0.0 => Some(0.0),
            Kind::ExpCentered | Kind::Normal { .. } => None,
        }
    }

    /// One draw from the scaled law.
    #[inline]
    pub fn sample(&self, rng: &mut RngState) -> f64 {
        let unit = match self.kind {
            Kind::Rademacher => {
                if rng.uniform() < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            Kind::UniformSym => 3f64.sqrt() * (2.0 * rng.uniform() - 1.0),
            Kind::ExpCentered => -(1.0 - rng.uniform()).ln() - 1.0,
            Kind::TwoPoint { p } => {
                let (hi, lo) = Self::two_point_values(p);
                if rng.uniform() < p {
                    hi
                } else {
                    lo
                }
            }
            Kind::Normal { variance } => variance.sqrt() * rng.standard_normal(),
        };
        self.scale * unit
    }

    /// E[X²; |X| > c] for the scaled law.
    pub fn truncated_second_moment(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0) {
            return Err(LabError::NegativeTruncation(c));
        }
        let s = self.scale;
        let s2 = s * s;
        Ok(match self.kind {
            Kind::Rademacher => {
                if s > c {
                    s2
                } else {
                    0.0
                }
            }
            Kind::UniformSym => {
                let edge = s * 3f64.sqrt();
                if c >= edge {
                    0.0
                } else {
                    s2 * (1.0 - (c / edge).powi(3))
                }
            }
            Kind::TwoPoint { p } => {
                let (hi, lo) = Self::two_point_values(p);
                [(hi, p), (lo, 1.0 - p)]
                    .into_iter()
                    .filter(|(v, _)| (s * v).abs() > c)
                    .map(|(v, w)| s2 * v * v * w)
                    .sum()
            }
            Kind::ExpCentered => s2 * exp_centered_truncated(c / s),
            Kind::Normal { variance } => normal_truncated_second_moment(variance * s2, c),
        })
    }
}

// E[X²; |X| > k] for X = Exp(1) − 1, density e^{−(x+1)} on [−1, ∞).
fn exp_centered_truncated(k: f64) -> f64 {
    let density = |x: f64| x * x * (-(x + 1.0)).exp();
    let upper = quad::integrate(density, k, k + 60.0, QUAD_TOL);
    let lower = if k < 1.0 { quad::integrate(density, -1.0, -k, QUAD_TOL) } else { 0.0 };
    upper + lower
}

pub fn sample_dist(spec: &DistributionSpec, rng: &mut RngState) -> f64 {
    spec.sample(rng)
}

pub fn truncated_second_moment(spec: &DistributionSpec, c: f64) -> Result<f64> {
    spec.truncated_second_moment(c)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::Rademacher => write!(f, "rademacher")?,
            Kind::UniformSym => write!(f, "uniform")?,
            Kind::ExpCentered => write!(f, "exp")?,
            Kind::TwoPoint { p } => write!(f, "twopoint:{p}")?,
            Kind::Normal { variance } => write!(f, "normal:{variance}")?,
        }
        if self.scale != 1.0 {
            write!(f, "*{}", self.scale)?;
        }
        Ok(())
    }
}

/// Parses `kind[:param][*scale]`.
///
/// Kinds: `rademacher`, `uniform` (alias `uniformsym`), `exp` (alias
/// `expcentered`), `twopoint:<p>` with p in [0.01, 0.99], `normal[:<variance>]`
/// (variance defaults to 1). Scale defaults to 1 and must be positive.
impl FromStr for DistributionSpec {
    type Err = LabError;

    fn from_str(input: &str) -> Result<Self> {
        let err = |reason: &str| LabError::InvalidDistribution {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let text = input.trim().to_ascii_lowercase();
        let (body, scale) = match text.split_once('*') {
            Some((b, s)) => (b, s.trim().parse::<f64>().map_err(|_| err("scale is not a number"))?),
            None => (text.as_str(), 1.0),
        };
        let (name, param) = match body.split_once(':') {
            Some((n, p)) => {
                (n.trim(), Some(p.trim().parse::<f64>().map_err(|_| err("parameter is not a number"))?))
            }
            None => (body.trim(), None),
        };
        let no_param = |kind: Kind| match param {
            None => Ok(kind),
            Some(_) => Err(err("this kind takes no parameter")),
        };
        let kind = match name {
            "rademacher" => no_param(Kind::Rademacher)?,
            "uniform" | "uniformsym" => no_param(Kind::UniformSym)?,
            "exp" | "expcentered" => no_param(Kind::ExpCentered)?,
            "twopoint" => Kind::TwoPoint { p: param.ok_or_else(|| err("twopoint needs :p"))? },
            "normal" => Kind::Normal { variance: param.unwrap_or(1.0) },
            _ => return Err(err("unknown kind (rademacher, uniform, exp, twopoint:p, normal:v)")),
        };
        Self::new(kind, scale).map_err(|e| match e {
            LabError::InvalidDistribution { reason, .. } => err(&reason),
            other => other,
        })
    }
}

/// JSON form of a spec: `{"kind": "twopoint", "param": 0.1, "scale": 1.0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<SpecRecord> for DistributionSpec {
    type Error = LabError;

    fn try_from(r: SpecRecord) -> Result<Self> {
        let base: DistributionSpec = match r.param {
            Some(p) => format!("{}:{}", r.kind, p).parse()?,
            None => r.kind.parse()?,
        };
        DistributionSpec::new(base.kind, r.scale)
    }
}

impl From<DistributionSpec> for SpecRecord {
    fn from(d: DistributionSpec) -> Self {
        let (kind, param) = match d.kind {
            Kind::Rademacher => ("rademacher", None),
            Kind::UniformSym => ("uniform", None),
            Kind::ExpCentered => ("exp", None),
            Kind::TwoPoint { p } => ("twopoint", Some(p)),
            Kind::Normal { variance } => ("normal", Some(variance)),
        };
        SpecRecord { kind: kind.to_string(), param, scale: d.scale }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::rademacher(),
            DistributionSpec::uniform(),
            DistributionSpec::exp_centered(),
            DistributionSpec::two_point(0.1).unwrap(),
            DistributionSpec::normal(1.0).unwrap(),
        ]
    }

    #[test]
    fn streams_are_deterministic_and_separate() {
        let a: Vec<u64> = (0..1000).scan(make_rng(42, 0), |r, _| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..1000).scan(make_rng(42, 0), |r, _| Some(r.next_u64())).collect();
        let c: Vec<u64> = (0..1000).scan(make_rng(42, 1), |r, _| Some(r.next_u64())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let u = make_rng(1, 0).uniform();
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn counter_tracks_consumption() {
        let mut rng = make_rng(3, 0);
        DistributionSpec::rademacher().sample(&mut rng);
        assert_eq!(rng.counter(), 1);
        let n = DistributionSpec::normal(1.0).unwrap();
        n.sample(&mut rng);
        assert_eq!(rng.counter(), 3);
        n.sample(&mut rng);
        assert_eq!(rng.counter(), 3);
    }

    #[test]
    fn substreams_differ() {
        let base = make_rng(9, 0);
        let mut a = base.substream(0);
        let mut b = base.substream(1);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_eq!(base.substream(5).stream(), base.substream(5).stream());
    }

    #[test]
    fn rademacher_support() {
        let mut rng = make_rng(5, 0);
        let d = DistributionSpec::rademacher();
        assert!((0..1000).all(|_| d.sample(&mut rng).abs() == 1.0));
    }

    #[test]
    fn two_point_moments_exact() {
        for p in [0.01, 0.1, 0.5, 0.9] {
            let d = DistributionSpec::two_point(p).unwrap();
            let (hi, lo) = DistributionSpec::two_point_values(p);
            assert!((p * hi * hi + (1.0 - p) * lo * lo - 1.0).abs() < 1e-14);
            assert!(d.mean().abs() < 1e-15);
        }
    }

    #[test]
    fn truncated_moment_examples() {
        let r = DistributionSpec::rademacher();
        assert_eq!(r.truncated_second_moment(0.0).unwrap(), 1.0);
        let small = r.scaled(1.0 / 200f64.sqrt());
        assert_eq!(small.truncated_second_moment(0.1).unwrap(), 0.0);
        assert_eq!(DistributionSpec::uniform().truncated_second_moment(0.0).unwrap(), 1.0);
        assert_eq!(r.truncated_second_moment(-0.1), Err(LabError::NegativeTruncation(-0.1)));
    }

    #[test]
    fn exp_centered_quadrature_matches_closed_form() {
        // ∫ x² e^{-(x+1)} dx = -e^{-(x+1)}(x² + 2x + 2)
        let anti = |x: f64| -(-(x + 1.0)).exp() * (x * x + 2.0 * x + 2.0);
        let exact = |k: f64| {
            let upper = -anti(k);
            let lower = if k < 1.0 { anti(-k) - anti(-1.0) } else { 0.0 };
            upper + lower
        };
        for s in [1.0, 0.5, 0.1] {
            let d = DistributionSpec::exp_centered().scaled(s);
            for c in [0.0, 0.05, 0.3, 0.5, 1.0, 2.0, 7.0] {
                let got = d.truncated_second_moment(c).unwrap();
                let want = s * s * exact(c / s);
                assert!((got - want).abs() < 1e-10, "s={s} c={c}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn full_truncation_is_variance() {
        for d in catalog() {
            for s in [1.0, 0.3] {
                let d = d.scaled(s);
                let t = d.truncated_second_moment(0.0).unwrap();
                assert!((t - d.variance()).abs() < 1e-10, "{d}");
            }
        }
    }

    #[test]
    fn degenerate_normal_is_zero() {
        let d = DistributionSpec::normal(0.0).unwrap();
        let mut rng = make_rng(1, 1);
        assert_eq!(d.sample(&mut rng), 0.0);
        assert_eq!(d.truncated_second_moment(0.0).unwrap(), 0.0);
        assert_eq!(d.support_bound(), Some(0.0));
    }

    #[test]
    fn parse_grammar() {
        let d: DistributionSpec = "twopoint:0.1".parse().unwrap();
        assert_eq!(d.kind, Kind::TwoPoint { p: 0.1 });
        let u: DistributionSpec = "uniform*0.25".parse().unwrap();
        assert_eq!(u.scale, 0.25);
        let n: DistributionSpec = "normal:0.5".parse().unwrap();
        assert_eq!(n.variance(), 0.5);
        assert_eq!("normal".parse::<DistributionSpec>().unwrap().variance(), 1.0);
        for bad in ["twopoint:1.5", "twopoint", "cauchy", "rademacher:2", "uniform*-1", "normal:-1", "exp*x"] {
            assert!(bad.parse::<DistributionSpec>().is_err(), "{bad}");
        }
        for d in catalog() {
            let d = d.scaled(0.125);
            assert_eq!(d.to_string().parse::<DistributionSpec>().unwrap(), d);
        }
    }

    #[test]
    fn json_record_round_trip() {
        let d = DistributionSpec::two_point(0.2).unwrap().scaled(0.5);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"kind":"twopoint","param":0.2,"scale":0.5}"#);
        assert_eq!(serde_json::from_str::<DistributionSpec>(&s).unwrap(), d);
        let r: DistributionSpec = serde_json::from_str(r#"{"kind":"rademacher"}"#).unwrap();
        assert_eq!(r, DistributionSpec::rademacher());
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"kind":"twopoint","param":2}"#).is_err());
    }
}
