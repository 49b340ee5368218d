//! Trip descriptions, validity checks, the reference fixtures and seeded
//! random generation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reduced-form description of one ride offer.
///
/// Field order matches the scenario CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TravelScenario<T> {
    pub label: String,
    /// Objective utility of the certain alternative.
    pub u0: T,
    /// Tariff coefficient, $^-1, negative.
    pub b_sm: T,
    pub gamma_min: T,
    pub gamma_max: T,
    /// Non-price utility of the worst ride outcome.
    pub x_low: T,
    /// Non-price utility of the best ride outcome.
    pub x_high: T,
}

/// A broken scenario invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    NonFinite,
    NonNegativeTariffCoefficient,
    EmptyTariffInterval,
    InvertedOutcomes,
    /// `x_low + b γ_min > u0`: the ride beats the alternative even in its worst case.
    RideDominates,
    /// `u0 > x_high + b γ_max`: the alternative beats the ride even in its best case.
    AlternativeDominates,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::NonFinite => "non-finite field",
            Violation::NonNegativeTariffCoefficient => "tariff coefficient b_sm must be negative",
            Violation::EmptyTariffInterval => "empty tariff interval",
            Violation::InvertedOutcomes => "x_low exceeds x_high",
            Violation::RideDominates => "ride dominates (x_low + b_sm*gamma_min > u0)",
            Violation::AlternativeDominates => "alternative dominates (u0 > x_high + b_sm*gamma_max)",
        })
    }
}

impl<T: Scalar> TravelScenario<T> {
    pub fn new(label: impl Into<String>, u0: T, b_sm: T, gamma_min: T, gamma_max: T, x_low: T, x_high: T) -> Self {
        TravelScenario { label: label.into(), u0, b_sm, gamma_min, gamma_max, x_low, x_high }
    }

    /// Every violated invariant, in a fixed order.
    ///
    /// Utilities fall with the tariff, so checking the choice set at the two
    /// tariff bounds covers the whole interval.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let fields = [self.u0, self.b_sm, self.gamma_min, self.gamma_max, self.x_low, self.x_high];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(vec![Violation::NonFinite]);
        }
        let mut out = Vec::new();
        if self.b_sm >= T::zero() {
            out.push(Violation::NonNegativeTariffCoefficient);
        }
        if self.gamma_min >= self.gamma_max {
            out.push(Violation::EmptyTariffInterval);
        }
        if self.x_low > self.x_high {
            out.push(Violation::InvertedOutcomes);
        }
        if self.x_low + self.b_sm * self.gamma_min > self.u0 {
            out.push(Violation::RideDominates);
        }
        if self.u0 > self.x_high + self.b_sm * self.gamma_max {
            out.push(Violation::AlternativeDominates);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(|violations| Error::InvalidScenario { label: self.label.clone(), violations })
    }

    /// `(u_low, u_high, u0)` at tariff `gamma`.
    #[inline]
    pub fn utilities_at(&self, gamma: T) -> (T, T, T) {
        (self.x_low + self.b_sm * gamma, self.x_high + self.b_sm * gamma, self.u0)
    }

    pub fn width(&self) -> T {
        self.gamma_max - self.gamma_min
    }

    pub fn clamp(&self, gamma: T) -> T {
        gamma.max(self.gamma_min).min(self.gamma_max)
    }

    pub fn cast<U: Scalar>(&self) -> TravelScenario<U> {
        let c = |v: T| U::lit(v.as_f64());
        TravelScenario {
            label: self.label.clone(),
            u0: c(self.u0),
            b_sm: c(self.b_sm),
            gamma_min: c(self.gamma_min),
            gamma_max: c(self.gamma_max),
            x_low: c(self.x_low),
            x_high: c(self.x_high),
        }
    }
}

/// The five representative scenarios S1..S5.
pub fn fixtures<T: Scalar>() -> Vec<TravelScenario<T>> {
    const ROWS: [(&str, f64, f64, f64, f64, f64, f64); 5] = [
        ("S1", 8.17, -0.14, 4.66, 8.41, 2.46, 15.45),
        ("S2", -7.62, -0.08, 2.04, 19.26, -8.67, -5.15),
        ("S3", -2.54, -0.72, 4.12, 12.99, 0.32, 10.98),
        ("S4", 9.51, -0.40, 1.11, 13.49, 1.06, 24.36),
        ("S5", 9.55, -0.04, 4.24, 7.92, 4.41, 12.92),
    ];
    ROWS.iter()
        .map(|&(label, u0, b, gl, gh, xl, xh)| {
            TravelScenario::new(label, T::lit(u0), T::lit(b), T::lit(gl), T::lit(gh), T::lit(xl), T::lit(xh))
        })
        .collect()
}

/// Sampling box for [`generate_random`]. Spreads are sampled instead of the
/// upper ends so that `x_low <= x_high` and `gamma_min < gamma_max` hold by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRanges {
    pub u0: (f64, f64),
    pub x_low: (f64, f64),
    pub x_spread: (f64, f64),
    pub b_sm: (f64, f64),
    pub gamma_min: (f64, f64),
    pub gamma_width: (f64, f64),
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        ScenarioRanges {
            u0: (-10.0, 10.0),
            x_low: (-10.0, 5.0),
            x_spread: (1.0, 20.0),
            b_sm: (-0.8, -0.02),
            gamma_min: (1.0, 5.0),
            gamma_width: (2.0, 16.0),
        }
    }
}

impl ScenarioRanges {
    fn check(&self) -> Result<()> {
        let all = [self.u0, self.x_low, self.x_spread, self.b_sm, self.gamma_min, self.gamma_width];
        if all.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return Err(Error::Config("scenario ranges must be finite with lo <= hi".into()));
        }
        if self.b_sm.1 >= 0.0 {
            return Err(Error::Config("b_sm range must be strictly negative".into()));
        }
        if self.x_spread.0 < 0.0 || self.gamma_width.0 <= 0.0 {
            return Err(Error::Config("spreads must be nonnegative and tariff widths positive".into()));
        }
        Ok(())
    }
}

const MAX_DRAWS_BEFORE_CHECK: usize = 1_000_000;
const MIN_ACCEPTANCE_RATE: f64 = 1e-3;

/// Rejection-sample `count` valid scenarios, labelled `R0001`, `R0002`, ...
pub fn generate_random<T: Scalar>(ranges: &ScenarioRanges, count: usize, seed: u64) -> Result<Vec<TravelScenario<T>>> {
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    ranges.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        let u0 = draw(ranges.u0);
        let x_low = draw(ranges.x_low);
        let x_high = x_low + draw(ranges.x_spread);
        let b_sm = draw(ranges.b_sm);
        let gamma_min = draw(ranges.gamma_min);
        let gamma_max = gamma_min + draw(ranges.gamma_width);
        draws += 1;
        let s = TravelScenario::new(
            format!("R{:04}", out.len() + 1),
            T::lit(u0),
            T::lit(b_sm),
            T::lit(gamma_min),
            T::lit(gamma_max),
            T::lit(x_low),
            T::lit(x_high),
        );
        if s.validate().is_ok() {
            out.push(s);
        }
        if draws >= MAX_DRAWS_BEFORE_CHECK && (out.len() as f64) < MIN_ACCEPTANCE_RATE * draws as f64 {
            return Err(Error::GenerationStalled { accepted: out.len(), draws });
        }
    }
    Ok(out)
}
