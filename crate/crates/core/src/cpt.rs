//! Prospect-theory evaluation of a binary ride offer.
//!
//! A shared ride has two possible outcomes: a worst-case utility `u_low`
//! occurring with probability `p`, and a best-case utility `u_high`. The
//! rider compares the offer with a certain alternative of utility `u_alt`.
//! Both are valued relative to a reference point `R`:
//!
//! ```text
//!   V(u)  = (u - R)^β           u ≥ R
//!         = -λ (R - u)^β        u < R
//!   π(p)  = exp(-(-ln p)^α),    π(0) = 0, π(1) = 1
//! ```
//!
//! Outcomes below the reference take rank-dependent weights from the CDF,
//! outcomes at or above it from the decumulative distribution. The
//! acceptance probability is the logit of the two subjective utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::CptParams;
use crate::scalar::Scalar;
use crate::scenario::TravelScenario;

/// Largest magnitude passed to `exp` inside the logistic.
const EXP_CLAMP: f64 = 700.0;

/// How the reference point is chosen for an offer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum ReferencePolicy<T> {
    /// `R = u_alt`.
    StaticAlternative,
    /// `R = p u_low + (1 - p) u_high`.
    ExpectedUtility,
    /// `R = u_high`.
    #[default]
    BestCase,
    /// `R = u_low`.
    WorstCase,
    FixedValue(T),
}

impl<T: Scalar> ReferencePolicy<T> {
    pub fn fixed(level: T) -> Result<Self> {
        if level.is_finite() {
            Ok(ReferencePolicy::FixedValue(level))
        } else {
            Err(Error::Domain { what: "fixed reference level", value: level.as_f64() })
        }
    }

    pub fn is_best_case(&self) -> bool {
        matches!(self, ReferencePolicy::BestCase)
    }

    pub fn label(&self) -> String {
        match self {
            ReferencePolicy::StaticAlternative => "static".into(),
            ReferencePolicy::ExpectedUtility => "expected".into(),
            ReferencePolicy::BestCase => "best".into(),
            ReferencePolicy::WorstCase => "worst".into(),
            ReferencePolicy::FixedValue(v) => format!("fixed:{v}"),
        }
    }
}


/// Two-outcome prospect: `u_low` with probability `p_worst`, else `u_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BinaryProspect<T> {
    u_low: T,
    u_high: T,
    p_worst: T,
}

impl<T: Scalar> BinaryProspect<T> {
    pub fn new(u_low: T, u_high: T, p_worst: T) -> Result<Self> {
        if !u_low.is_finite() || !u_high.is_finite() {
            return Err(Error::Domain { what: "prospect utility", value: f64::NAN });
        }
        if u_low > u_high {
            return Err(Error::Domain { what: "u_low - u_high", value: (u_low - u_high).as_f64() });
        }
        if !(p_worst > T::zero() && p_worst < T::one()) {
            return Err(Error::Domain { what: "p_worst", value: p_worst.as_f64() });
        }
        Ok(BinaryProspect { u_low, u_high, p_worst })
    }

    pub fn u_low(&self) -> T {
        self.u_low
    }

    pub fn u_high(&self) -> T {
        self.u_high
    }

    pub fn p_worst(&self) -> T {
        self.p_worst
    }
}

/// Everything the rider "perceives" about one offer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SubjectiveEvaluation<T> {
    pub reference: T,
    pub w_low: T,
    pub w_high: T,
    pub v_low: T,
    pub v_high: T,
    pub u_smods_subjective: T,
    pub u_alt_subjective: T,
}

/// Reference-dependent value of an objective utility.
pub fn value<T: Scalar>(u: T, reference: T, params: &CptParams<T>) -> Result<T> {
    if !u.is_finite() {
        return Err(Error::Domain { what: "u", value: u.as_f64() });
    }
    if !reference.is_finite() {
        return Err(Error::Domain { what: "reference", value: reference.as_f64() });
    }
    Ok(value_unchecked(u, reference, params.beta(), params.lambda()))
}

#[inline]
pub(crate) fn value_unchecked<T: Scalar>(u: T, reference: T, beta: T, lambda: T) -> T {
    if u >= reference {
        pow0(u - reference, beta)
    } else {
        -lambda * pow0(reference - u, beta)
    }
}

/// `x^e` with `0^e = 0` exactly.
#[inline]
pub(crate) fn pow0<T: Scalar>(x: T, e: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.powf(e)
    }
}

/// Probability distortion `π(p) = exp(-(-ln p)^α)`.
pub fn weight<T: Scalar>(prob: T, alpha: T) -> Result<T> {
    if !(prob >= T::zero() && prob <= T::one()) {
        return Err(Error::Domain { what: "probability", value: prob.as_f64() });
    }
    if !(alpha > T::zero()) {
        return Err(Error::Domain { what: "alpha", value: alpha.as_f64() });
    }
    Ok(weight_unchecked(prob, alpha))
}

#[inline]
pub(crate) fn weight_unchecked<T: Scalar>(prob: T, alpha: T) -> T {
    if prob <= T::zero() {
        T::zero()
    } else if prob >= T::one() {
        T::one()
    } else {
        (-(-prob.ln()).powf(alpha)).exp()
    }
}

pub fn resolve_reference<T: Scalar>(policy: &ReferencePolicy<T>, prospect: &BinaryProspect<T>, u_alt: T) -> T {
    resolve_unchecked(policy, prospect.u_low, prospect.u_high, prospect.p_worst, u_alt)
}

#[inline]
fn resolve_unchecked<T: Scalar>(policy: &ReferencePolicy<T>, u_low: T, u_high: T, p: T, u_alt: T) -> T {
    match *policy {
        ReferencePolicy::StaticAlternative => u_alt,
        ReferencePolicy::ExpectedUtility => p * u_low + (T::one() - p) * u_high,
        ReferencePolicy::BestCase => u_high,
        ReferencePolicy::WorstCase => u_low,
        ReferencePolicy::FixedValue(v) => v,
    }
}

/// Decision weights `(w_low, w_high)` from the rank-dependent rule.
///
/// Losses (`u_i < R`) take `π(F(u_i)) - π(F(u_{i-1}))`, gains take
/// `π(1 - F(u_{i-1})) - π(1 - F(u_i))`, with `F(u_0) = 0`, `F(u_low) = p`,
/// `F(u_high) = 1`.
pub fn rank_dependent_weights<T: Scalar>(prospect: &BinaryProspect<T>, reference: T, alpha: T) -> (T, T) {
    weights_unchecked(prospect.u_low, prospect.u_high, prospect.p_worst, reference, alpha)
}

fn weights_unchecked<T: Scalar>(u_low: T, u_high: T, p: T, reference: T, alpha: T) -> (T, T) {
    let outcomes = [u_low, u_high];
    let cdf = [p, T::one()];
    let pi = |q: T| weight_unchecked(q, alpha);
    let mut w = [T::zero(); 2];
    for i in 0..2 {
        let below = if i == 0 { T::zero() } else { cdf[i - 1] };
        w[i] = if outcomes[i] < reference {
            pi(cdf[i]) - pi(below)
        } else {
            pi(T::one() - below) - pi(T::one() - cdf[i])
        };
    }
    (w[0], w[1])
}

pub fn subjective_utilities<T: Scalar>(
    prospect: &BinaryProspect<T>,
    u_alt: T,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<SubjectiveEvaluation<T>> {
    if !u_alt.is_finite() {
        return Err(Error::Domain { what: "u_alt", value: u_alt.as_f64() });
    }
    if u_alt < prospect.u_low || u_alt > prospect.u_high {
        return Err(Error::ChoiceSet(format!(
            "u_alt = {u_alt} outside [{}, {}]",
            prospect.u_low, prospect.u_high
        )));
    }
    let p = prospect.p_worst;
    Ok(evaluate_unchecked(prospect.u_low, prospect.u_high, u_alt, params_with_p(params, p), policy))
}

// The prospect carries its own p; evaluation uses it in place of the parameter copy.
fn params_with_p<T: Scalar>(params: &CptParams<T>, p: T) -> (T, T, T, T) {
    (params.alpha(), params.beta(), params.lambda(), p)
}

#[inline]
pub(crate) fn evaluate_unchecked<T: Scalar>(
    u_low: T,
    u_high: T,
    u_alt: T,
    (alpha, beta, lambda, p): (T, T, T, T),
    policy: &ReferencePolicy<T>,
) -> SubjectiveEvaluation<T> {
    let reference = resolve_unchecked(policy, u_low, u_high, p, u_alt);
    let (w_low, w_high) = weights_unchecked(u_low, u_high, p, reference, alpha);
    let v_low = value_unchecked(u_low, reference, beta, lambda);
    let v_high = value_unchecked(u_high, reference, beta, lambda);
    SubjectiveEvaluation {
        reference,
        w_low,
        w_high,
        v_low,
        v_high,
        u_smods_subjective: w_low * v_low + w_high * v_high,
        u_alt_subjective: value_unchecked(u_alt, reference, beta, lambda),
    }
}

/// `e^U / (e^U + e^A)` in the single-exponential form `1 / (1 + e^(A - U))`.
#[inline]
pub fn logistic<T: Scalar>(u_smods: T, u_alt: T) -> T {
    let clamp = T::lit(EXP_CLAMP);
    let z = (u_alt - u_smods).max(-clamp).min(clamp);
    T::one() / (T::one() + z.exp())
}

fn check_choice_set<T: Scalar>(gamma: T, scenario: &TravelScenario<T>) -> Result<(T, T, T)> {
    if !gamma.is_finite() {
        return Err(Error::Domain { what: "gamma", value: gamma.as_f64() });
    }
    let (u_low, u_high, u0) = scenario.utilities_at(gamma);
    if u0 < u_low || u0 > u_high {
        return Err(Error::ChoiceSet(format!(
            "scenario `{}` at gamma = {gamma}: u0 = {u0} outside [{u_low}, {u_high}]",
            scenario.label
        )));
    }
    Ok((u_low, u_high, u0))
}

/// Subjective probability that the rider accepts the offer at tariff `gamma`.
pub fn acceptance_probability<T: Scalar>(
    gamma: T,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<T> {
    let (u_low, u_high, u0) = check_choice_set(gamma, scenario)?;
    let ev = evaluate_unchecked(u_low, u_high, u0, params_with_p(params, params.p_worst()), policy);
    Ok(logistic(ev.u_smods_subjective, ev.u_alt_subjective))
}

/// Expected revenue per offer, `γ · p_s(γ)`.
pub fn expected_revenue<T: Scalar>(
    gamma: T,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<T> {
    Ok(gamma * acceptance_probability(gamma, scenario, params, policy)?)
}

/// Revenue through the general evaluation path without the choice-set
/// check; used by solvers and finite differences that probe just outside
/// the tariff box.
#[inline]
pub(crate) fn revenue_unchecked<T: Scalar>(
    gamma: T,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> T {
    let (u_low, u_high, u0) = scenario.utilities_at(gamma);
    let ev = evaluate_unchecked(u_low, u_high, u0, params_with_p(params, params.p_worst()), policy);
    gamma * logistic(ev.u_smods_subjective, ev.u_alt_subjective)
}

/// Best-case-reference revenue in closed form:
///
/// ```text
///   f = γ / (1 + exp(λ (π(p) (x̄ - x̲)^β - (x̄ + bγ - u0)^β)))
/// ```
pub fn closed_form_revenue_bestcase<T: Scalar>(gamma: T, scenario: &TravelScenario<T>, params: &CptParams<T>) -> Result<T> {
    if !gamma.is_finite() {
        return Err(Error::Domain { what: "gamma", value: gamma.as_f64() });
    }
    let gap = scenario.x_high + scenario.b_sm * gamma - scenario.u0;
    if gap < T::zero() {
        return Err(Error::ChoiceSet(format!(
            "scenario `{}` at gamma = {gamma}: u0 exceeds the best-case utility by {}",
            scenario.label, -gap
        )));
    }
    let pi = weight_unchecked(params.p_worst(), params.alpha());
    let spread = pow0(scenario.x_high - scenario.x_low, params.beta());
    let z = params.lambda() * (pi * spread - pow0(gap, params.beta()));
    let clamp = T::lit(EXP_CLAMP);
    Ok(gamma / (T::one() + z.max(-clamp).min(clamp).exp()))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::scenario::fixtures;

    fn nominal() -> CptParams<f64> {
        CptParams::nominal()
    }

    // Values from a 40-digit evaluation of the model, frozen here.
    const PI_075_082: f64 = 0.697_672_859_474_286_8;
    const PI_025_082: f64 = 0.270_593_359_621_819_9;
    const S1_G6_U: f64 = -12.210_168_790_403_194;
    const S1_G6_A: f64 = -9.983_692_863_760_04;
    const S1_G6_PS: f64 = 0.097_398_008_792_173_46;
    const S1_G6_F: f64 = 0.584_388_052_753_040_7;
    const S2_G10_F: f64 = 2.880_602_349_792_72;

    #[test]
    fn value_examples() {
        let p = CptParams::new(0.82, 0.8, 2.25, 0.75).unwrap();
        assert_eq!(value(3.0, 3.0, &p).unwrap(), 0.0);
        for beta in [0.3, 0.8, 1.7] {
            let q = p.with(crate::Param::Beta, beta).unwrap();
            assert_eq!(value(4.0, 3.0, &q).unwrap(), 1.0);
        }
        assert_eq!(value(2.0, 3.0, &p).unwrap(), -2.25);
        assert!(value(f64::NAN, 0.0, &p).is_err());
        assert!(value(0.0, f64::INFINITY, &p).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight(1.0, 0.82).unwrap(), 1.0);
        assert_eq!(weight(0.0, 0.82).unwrap(), 0.0);
        assert_eq!(weight(1.0, 3.0).unwrap(), 1.0);
        assert_relative_eq!(weight(0.3, 1.0).unwrap(), 0.3, max_relative = 1e-15);
        assert_relative_eq!(weight(0.75, 0.82).unwrap(), PI_075_082, max_relative = 1e-14);
        assert!(weight(1.2, 0.5).is_err());
        assert!(weight(-0.1, 0.5).is_err());
    }

    #[test]
    fn reference_resolution() {
        let pr = BinaryProspect::new(0.0, 7.2, 0.75).unwrap();
        assert_eq!(resolve_reference(&ReferencePolicy::BestCase, &pr, 1.0), 7.2);
        assert_eq!(resolve_reference(&ReferencePolicy::WorstCase, &pr, 1.0), 0.0);
        assert_eq!(resolve_reference(&ReferencePolicy::FixedValue(3.5), &pr, 1.0), 3.5);
        let pr = BinaryProspect::new(0.0, 4.0, 0.75).unwrap();
        assert_eq!(resolve_reference(&ReferencePolicy::ExpectedUtility, &pr, 1.0), 1.0);
        let pr = BinaryProspect::new(-9.0, -5.0, 0.75).unwrap();
        assert_eq!(resolve_reference(&ReferencePolicy::StaticAlternative, &pr, -7.62), -7.62);
        assert!(ReferencePolicy::fixed(f64::NAN).is_err());
    }

    #[test]
    fn prospect_invariants() {
        assert!(BinaryProspect::new(2.0, 1.0, 0.5).is_err());
        assert!(BinaryProspect::new(1.0, 2.0, 1.0).is_err());
        assert!(BinaryProspect::new(1.0, 1.0, 0.5).is_ok());
    }

    #[test]
    fn weights_at_best_case_reference() {
        let pr = BinaryProspect::new(1.0, 5.0, 0.75).unwrap();
        let (wl, wh) = rank_dependent_weights(&pr, 5.0, 0.82);
        assert_relative_eq!(wl, PI_075_082, max_relative = 1e-14);
        assert_relative_eq!(wh, PI_025_082, max_relative = 1e-14);
    }

    #[test]
    fn weights_closed_forms() {
        let a = 0.82;
        let pi = |q: f64| weight(q, a).unwrap();
        let pr = BinaryProspect::new(1.0, 5.0, 0.6).unwrap();
        // reference at the worst outcome: both are gains
        let (wl, wh) = rank_dependent_weights(&pr, 1.0, a);
        assert_relative_eq!(wl, 1.0 - pi(0.4), max_relative = 1e-14);
        assert_relative_eq!(wh, pi(0.4), max_relative = 1e-14);
        // interior reference
        let (wl, wh) = rank_dependent_weights(&pr, 3.3, a);
        assert_relative_eq!(wl, pi(0.6), max_relative = 1e-14);
        assert_relative_eq!(wh, pi(0.4), max_relative = 1e-14);
        // reference above the support: both losses
        let (wl, wh) = rank_dependent_weights(&pr, 9.0, a);
        assert_relative_eq!(wl, pi(0.6), max_relative = 1e-14);
        assert_relative_eq!(wh, 1.0 - pi(0.6), max_relative = 1e-14);
        // subcertainty at the interior reference
        assert!(pi(0.6) + pi(0.4) < 1.0);
    }

    #[test]
    fn best_case_reference_zeroes_high_value() {
        let pr = BinaryProspect::new(1.0, 5.0, 0.75).unwrap();
        let ev = subjective_utilities(&pr, 5.0, &nominal(), &ReferencePolicy::BestCase).unwrap();
        assert_eq!(ev.v_high, 0.0);
        assert_eq!(ev.u_alt_subjective, 0.0);
        assert_relative_eq!(ev.u_smods_subjective, PI_075_082 * ev.v_low, max_relative = 1e-15);
    }

    #[test]
    fn choice_set_violation_rejected() {
        let pr = BinaryProspect::new(1.0, 5.0, 0.75).unwrap();
        assert!(matches!(
            subjective_utilities(&pr, 6.0, &nominal(), &ReferencePolicy::BestCase),
            Err(Error::ChoiceSet(_))
        ));
    }

    #[test]
    fn s1_at_six_dollars() {
        let s1 = &fixtures::<f64>()[0];
        let (ul, uh, u0) = s1.utilities_at(6.0);
        let pr = BinaryProspect::new(ul, uh, 0.75).unwrap();
        let ev = subjective_utilities(&pr, u0, &nominal(), &ReferencePolicy::BestCase).unwrap();
        assert_relative_eq!(ev.u_smods_subjective, S1_G6_U, max_relative = 1e-13);
        assert_relative_eq!(ev.u_alt_subjective, S1_G6_A, max_relative = 1e-13);
        let ps = acceptance_probability(6.0, s1, &nominal(), &ReferencePolicy::BestCase).unwrap();
        assert_relative_eq!(ps, S1_G6_PS, max_relative = 1e-12);
        let f = expected_revenue(6.0, s1, &nominal(), &ReferencePolicy::BestCase).unwrap();
        assert_relative_eq!(f, S1_G6_F, max_relative = 1e-12);
        let g = closed_form_revenue_bestcase(6.0, s1, &nominal()).unwrap();
        assert_relative_eq!(g, f, max_relative = 1e-12);
    }

    #[test]
    fn s2_closed_form_fixture() {
        let s2 = &fixtures::<f64>()[1];
        let f = closed_form_revenue_bestcase(10.0, s2, &nominal()).unwrap();
        assert_relative_eq!(f, S2_G10_F, max_relative = 1e-12);
    }

    #[test]
    fn acceptance_monotone_in_tariff_on_s1() {
        let s1 = &fixtures::<f64>()[0];
        let lo = acceptance_probability(4.66, s1, &nominal(), &ReferencePolicy::BestCase).unwrap();
        let hi = acceptance_probability(8.41, s1, &nominal(), &ReferencePolicy::BestCase).unwrap();
        assert!(lo > hi);
    }

    #[test]
    fn logistic_symmetry_and_stability() {
        assert_eq!(logistic(-3.0, -3.0), 0.5);
        let tiny = logistic(-1e6, 0.0_f64);
        assert!(tiny > 0.0 && tiny < 1e-300);
        let big = logistic(1e6, 0.0_f64);
        assert!(big <= 1.0 && big > 0.999);
    }

    #[test]
    fn revenue_edge_cases() {
        let s1 = &fixtures::<f64>()[0];
        assert_eq!(expected_revenue(0.0, s1, &nominal(), &ReferencePolicy::BestCase).unwrap(), 0.0);
        // u0 above the best case at this tariff
        assert!(closed_form_revenue_bestcase(60.0, s1, &nominal()).is_err());
        assert!(acceptance_probability(60.0, s1, &nominal(), &ReferencePolicy::BestCase).is_err());
    }

    #[test]
    fn heavy_loss_aversion_crushes_revenue() {
        let s1 = &fixtures::<f64>()[0];
        let p = nominal().with(crate::Param::Lambda, 50.0).unwrap();
        let f = closed_form_revenue_bestcase(6.0, s1, &p).unwrap();
        assert!(f < 1e-10, "f = {f}");
    }

    #[test]
    fn f32_path_tracks_f64() {
        let s1 = &fixtures::<f32>()[0];
        let f = closed_form_revenue_bestcase(6.0f32, s1, &CptParams::nominal()).unwrap();
        assert!((f as f64 - S1_G6_F).abs() < 1e-5);
    }

    fn scenario_strategy() -> impl Strategy<Value = (TravelScenario<f64>, f64)> {
        (-10.0..10.0f64, -10.0..5.0f64, 1.0..20.0f64, -0.8..-0.02f64, 1.0..5.0f64, 2.0..16.0f64, 0.0..1.0f64)
            .prop_filter_map("valid scenario", |(u0, xl, spread, b, gl, width, t)| {
                let s = TravelScenario::new("P", u0, b, gl, gl + width, xl, xl + spread);
                s.validate().is_ok().then_some((s, gl + t * width))
            })
    }

    proptest! {
        #[test]
        fn value_strictly_increasing(a in -20.0..20.0f64, d in 1e-6..20.0f64, r in -20.0..20.0f64) {
            let p = nominal();
            prop_assert!(value(a, r, &p).unwrap() < value(a + d, r, &p).unwrap());
        }

        #[test]
        fn weight_strictly_increasing(a in 1e-6..0.999f64, d in 1e-4..0.5f64, alpha in 0.1..2.0f64) {
            let b = (a + d).min(1.0 - 1e-9);
            prop_assume!(b > a);
            prop_assert!(weight(a, alpha).unwrap() < weight(b, alpha).unwrap());
        }

        #[test]
        fn identity_distortion_recovers_probabilities(
            lo in -10.0..10.0f64, spread in 0.0..10.0f64, p in 0.01..0.99f64, r in -25.0..25.0f64
        ) {
            let pr = BinaryProspect::new(lo, lo + spread, p).unwrap();
            let (wl, wh) = rank_dependent_weights(&pr, r, 1.0);
            prop_assert!((wl - p).abs() < 1e-12);
            prop_assert!((wh - (1.0 - p)).abs() < 1e-12);
        }

        #[test]
        fn closed_form_matches_general_path((s, g) in scenario_strategy()) {
            let p = nominal();
            let a = expected_revenue(g, &s, &p, &ReferencePolicy::BestCase).unwrap();
            let b = closed_form_revenue_bestcase(g, &s, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{} vs {}", a, b);
        }

        #[test]
        fn revenue_below_tariff((s, g) in scenario_strategy()) {
            for pol in [ReferencePolicy::BestCase, ReferencePolicy::WorstCase,
                        ReferencePolicy::ExpectedUtility, ReferencePolicy::StaticAlternative] {
                let f = expected_revenue(g, &s, &nominal(), &pol).unwrap();
                prop_assert!(f >= 0.0 && f < g);
            }
        }
    }
}
