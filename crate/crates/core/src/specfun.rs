//! Standard normal density and distribution function, C³ smooth transition
//! functions with certified derivative bounds, and the ε→η / ε→δ selectors.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502_415_765_284_811_045_3;

/// Beyond this |x| the distribution function switches from the power series
/// to the continued fraction for the tail.
const SERIES_LIMIT: f64 = 3.0;

/// Standard normal density e^{-t²/2}/√(2π).
pub fn phi_density(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Standard normal distribution function Φ(x), absolute error below 1e-15.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < -SERIES_LIMIT {
        upper_tail(-x)
    } else if x > SERIES_LIMIT {
        1.0 - upper_tail(x)
    } else {
        0.5 + phi_density(x) * odd_series(x)
    }
}

/// Upper tail 1 − Φ(x), accurate in the relative sense for large x.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

// Σ x^{2k+1} / (2k+1)!!, all terms share the sign of x.
fn odd_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    loop {
        term *= x2 / (2.0 * k + 1.0);
        let next = sum + term;
        if next == sum {
            return sum;
        }
        sum = next;
        k += 1.0;
    }
}

// 1 − Φ(x) for x > 0 via φ(x) / (x + 1/(x + 2/(x + 3/(x + …)))), modified Lentz.
fn upper_tail(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..10_000 {
        let a = j as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    phi_density(x) / f
}

/// E[Y²; |Y| > δ] for Y normal with mean 0 and variance `v`:
/// v·(2bφ(b) + 2(1 − Φ(b))) with b = δ/√v. Zero for v = 0.
pub fn normal_truncated_second_moment(v: f64, delta: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let b = delta / v.sqrt();
    v * 2.0 * (b * phi_density(b) + normal_sf(b))
}

/// Which side of the threshold the drop sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// 1 on (−∞, x−η], 0 on [x, ∞).
    DropBefore,
    /// 1 on (−∞, x], 0 on [x+η, ∞).
    DropAfter,
}

/// A non-increasing C³ function from 1 to 0 across an interval of width `eta`,
/// built from the smoothstep S(s) = 35s⁴ − 84s⁵ + 70s⁶ − 20s⁷.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionFn {
    pub x: f64,
    pub eta: f64,
    pub direction: Direction,
}

/// Suprema over ℝ of |f′|, |f″|, |f‴|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivBoundCert {
    pub sup_f1: f64,
    pub sup_f2: f64,
    pub sup_f3: f64,
}

/// sup |S′| on [0, 1], attained at s = 1/2.
pub const CORE_SUP_1: f64 = 2.1875;
/// sup |S‴| on [0, 1], attained at s = 1/2.
pub const CORE_SUP_3: f64 = 52.5;

/// sup |S″| on [0, 1] = 3.36·√5, attained at s = (5 ± √5)/10.
pub fn core_sup_2() -> f64 {
    3.36 * 5f64.sqrt()
}

/// k-th derivative of the smoothstep core on [0, 1].
pub fn smoothstep(s: f64, order: usize) -> f64 {
    let u = s * (1.0 - s);
    match order {
        0 => s.powi(4) * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s))),
        1 => 140.0 * u * u * u,
        2 => 420.0 * u * u * (1.0 - 2.0 * s),
        3 => 840.0 * u * (1.0 - 5.0 * u),
        _ => f64::NAN,
    }
}

impl TransitionFn {
    pub fn new(x: f64, eta: f64, direction: Direction) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(LabError::NonPositive { name: "eta", value: eta });
        }
        Ok(Self { x, eta, direction })
    }

    pub fn drop_before(x: f64, eta: f64) -> Result<Self> {
        Self::new(x, eta, Direction::DropBefore)
    }

    pub fn drop_after(x: f64, eta: f64) -> Result<Self> {
        Self::new(x, eta, Direction::DropAfter)
    }

    /// `[lo, hi]` over which the function falls from 1 to 0.
    pub fn support(&self) -> (f64, f64) {
        match self.direction {
            Direction::DropBefore => (self.x - self.eta, self.x),
            Direction::DropAfter => (self.x, self.x + self.eta),
        }
    }

    /// Value (order 0) or derivative of the given order at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(LabError::DerivativeOrder(order));
        }
        Ok(self.eval_unchecked(t, order))
    }

    /// [`eval`](Self::eval) for orders already known to be in 0..=3.
    #[inline]
    pub fn eval_unchecked(&self, t: f64, order: usize) -> f64 {
        let (lo, hi) = self.support();
        // Plateaus are decided against the threshold itself so that the
        // indicator sandwich holds exactly in floating point.
        if t <= lo {
            return if order == 0 { 1.0 } else { 0.0 };
        }
        if t >= hi {
            return 0.0;
        }
        let s = ((t - lo) / self.eta).clamp(0.0, 1.0);
        match order {
            0 => (1.0 - smoothstep(s, 0)).clamp(0.0, 1.0),
            k => -smoothstep(s, k) / self.eta.powi(k as i32),
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.eval_unchecked(t, 0)
    }

    pub fn bounds(&self) -> DerivBoundCert {
        transition_bounds(self)
    }
}

pub fn transition_eval(f: &TransitionFn, t: f64, order: usize) -> Result<f64> {
    f.eval(t, order)
}

/// Certified derivative suprema; each scales as sup|S⁽ᵏ⁾| / ηᵏ.
pub fn transition_bounds(f: &TransitionFn) -> DerivBoundCert {
    let eta = f.eta;
    DerivBoundCert {
        sup_f1: CORE_SUP_1 / eta,
        sup_f2: core_sup_2() / (eta * eta),
        sup_f3: CORE_SUP_3 / (eta * eta * eta),
    }
}

/// Maximizes |S⁽ᵏ⁾| on [0, 1] by a uniform grid followed by repeated local
/// refinement around the best node. Used to certify the stored constants.
pub fn certify_core_sup(order: usize) -> f64 {
    let g = |s: f64| smoothstep(s, order).abs();
    let n = 10_000usize;
    let mut best_s = 0.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let v = g(s);
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let mut width = 1.0 / n as f64;
    for _ in 0..40 {
        let lo = (best_s - width).max(0.0);
        let hi = (best_s + width).min(1.0);
        for i in 0..=100 {
            let s = lo + (hi - lo) * i as f64 / 100.0;
            let v = g(s);
            if v > best {
                best = v;
                best_s = s;
            }
        }
        width /= 25.0;
    }
    best
}

/// η = ε·√(2π); since φ ≤ 1/√(2π), Φ(x+η) − Φ(x) ≤ ε for every x.
pub fn eta_for_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(LabError::NonPositive { name: "epsilon", value: epsilon });
    }
    Ok(epsilon * SQRT_2PI)
}

/// δ = ε / sup|f‴|, so |u − v| ≤ δ forces |f″(u) − f″(v)| ≤ ε.
pub fn delta_for_epsilon(epsilon: f64, sup_f3: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(LabError::NonPositive { name: "epsilon", value: epsilon });
    }
    if !(sup_f3 > 0.0) {
        return Err(LabError::NonPositive { name: "sup_f3", value: sup_f3 });
    }
    Ok(epsilon / sup_f3)
}
