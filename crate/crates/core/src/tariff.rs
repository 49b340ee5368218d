//! Bounded expected-revenue maximization over the tariff box.
//!
//! The problem is posed as minimizing `-f(γ; θ)` subject to
//! `γ_min - γ <= 0` and `γ - γ_max <= 0`, with Lagrangian
//!
//! ```text
//!   L = -f + μ_high (γ - γ_max) + μ_low (γ_min - γ)
//! ```
//!
//! so stationarity reads `-f_γ + μ_high - μ_low = 0`. Multipliers are named
//! after the bound they price; there are no numbered constraints.

use serde::{Deserialize, Serialize};

use crate::analytic::{bestcase_f_gamma, bestcase_partials};
use crate::cpt::{closed_form_revenue_bestcase, revenue_unchecked, ReferencePolicy};
use crate::error::{Error, Result};
use crate::numerics::{
    bracket_root, central_derivative, central_second_derivative, grid_golden_maximize, mixed_partial, ScalarFunction,
};
use crate::param::{CptParams, Param, PerParam};
use crate::scalar::Scalar;
use crate::scenario::TravelScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveSet {
    Interior,
    LowerBound,
    UpperBound,
}

impl ActiveSet {
    pub fn name(self) -> &'static str {
        match self {
            ActiveSet::Interior => "interior",
            ActiveSet::LowerBound => "lower_bound",
            ActiveSet::UpperBound => "upper_bound",
        }
    }

    pub fn is_bound(self) -> bool {
        self != ActiveSet::Interior
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OptimumRecord<T> {
    pub gamma_star: T,
    pub f_star: T,
    pub mu_low: T,
    pub mu_high: T,
    pub active: ActiveSet,
    pub kkt_residual: T,
    /// The printed concavity inequality holds on the whole tariff grid
    /// (best-case reference only; `false` otherwise).
    pub concave_certified: bool,
    /// A bound is active but its multiplier is below the strict
    /// complementarity threshold.
    pub degenerate: bool,
    pub gamma_min: T,
    pub gamma_max: T,
    pub evaluations: usize,
}

impl<T: Scalar> OptimumRecord<T> {
    /// The multiplier of the active bound, zero when interior.
    pub fn active_multiplier(&self) -> T {
        match self.active {
            ActiveSet::Interior => T::zero(),
            ActiveSet::LowerBound => self.mu_low,
            ActiveSet::UpperBound => self.mu_high,
        }
    }

    pub fn accepted(&self, gate: T) -> bool {
        self.kkt_residual <= gate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub presieve: usize,
    /// Bracket tolerance as a fraction of `γ_max - γ_min`.
    pub gamma_rel_tol: f64,
    pub kkt_gate: f64,
    /// Active multipliers below this are flagged degenerate.
    pub strict_complementarity: f64,
    /// Run the derivative-free oracle and fail on disagreement.
    pub cross_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            presieve: 64,
            gamma_rel_tol: 1e-9,
            kkt_gate: 1e-7,
            strict_complementarity: 1e-6,
            cross_check: true,
        }
    }
}

/// Revenue and slope of one pricing problem. The best-case reference uses
/// the closed form and its analytic slope; other references go through the
/// general evaluation with a Richardson slope.
#[derive(Debug, Clone, Copy)]
pub struct RevenueModel<'a, T> {
    pub scenario: &'a TravelScenario<T>,
    pub params: &'a CptParams<T>,
    pub policy: &'a ReferencePolicy<T>,
}

impl<'a, T: Scalar> RevenueModel<'a, T> {
    pub fn new(scenario: &'a TravelScenario<T>, params: &'a CptParams<T>, policy: &'a ReferencePolicy<T>) -> Self {
        RevenueModel { scenario, params, policy }
    }

    pub fn revenue(&self, gamma: T) -> T {
        if self.policy.is_best_case() {
            closed_form_revenue_bestcase(gamma, self.scenario, self.params).unwrap_or_else(|_| T::nan())
        } else {
            revenue_unchecked(gamma, self.scenario, self.params, self.policy)
        }
    }

    pub fn slope(&self, gamma: T) -> T {
        if self.policy.is_best_case() {
            bestcase_f_gamma(gamma, self.scenario, self.params)
        } else {
            let f = ScalarFunction::new(|g: T| revenue_unchecked(g, self.scenario, self.params, self.policy));
            central_derivative(&f, gamma, T::fd_step(1e-5), 2).unwrap_or_else(|_| T::nan())
        }
    }
}

pub fn solve<T: Scalar>(
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<OptimumRecord<T>> {
    solve_with(scenario, params, policy, &SolverConfig::default())
}

/// Maximize expected revenue over `[γ_min, γ_max]`.
///
/// Stationary points of `f_γ` are bracketed on a presieve grid and polished
/// with Brent's method; each candidate is compared with both endpoints.
pub fn solve_with<T: Scalar>(
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
    config: &SolverConfig,
) -> Result<OptimumRecord<T>> {
    scenario.ensure_valid()?;
    if config.presieve < 8 {
        return Err(Error::Config("presieve must be at least 8".into()));
    }
    let model = RevenueModel::new(scenario, params, policy);
    let (lo, hi) = (scenario.gamma_min, scenario.gamma_max);
    let width = hi - lo;
    let tol = (T::lit(config.gamma_rel_tol) * width).max(T::epsilon() * hi.abs());

    let slope = ScalarFunction::new(|g: T| model.slope(g));
    let value = ScalarFunction::new(|g: T| model.revenue(g));

    let n = config.presieve;
    let step = width / T::from_count(n);
    let grid: Vec<T> = (0..=n).map(|i| if i == n { hi } else { lo + step * T::from_count(i) }).collect();
    let slopes = grid.iter().map(|&g| slope.call_signed(g)).collect::<Result<Vec<T>>>()?;

    let mut candidates = vec![lo, hi];
    for i in 0..n {
        let (a, b) = (slopes[i], slopes[i + 1]);
        if a == T::zero() && i > 0 {
            candidates.push(grid[i]);
        } else if a > T::zero() && b < T::zero() {
            candidates.push(bracket_root(&slope, grid[i], grid[i + 1], tol)?);
        }
    }

    let mut best = (lo, value.call(lo)?);
    for &g in &candidates[1..] {
        let v = value.call(g)?;
        if v > best.1 {
            best = (g, v);
        }
    }
    let (mut gamma_star, mut f_star) = best;

    let active = if gamma_star - lo <= tol {
        ActiveSet::LowerBound
    } else if hi - gamma_star <= tol {
        ActiveSet::UpperBound
    } else {
        ActiveSet::Interior
    };
    match active {
        ActiveSet::LowerBound if gamma_star != lo => {
            gamma_star = lo;
            f_star = value.call(lo)?;
        }
        ActiveSet::UpperBound if gamma_star != hi => {
            gamma_star = hi;
            f_star = value.call(hi)?;
        }
        _ => {}
    }

    let gate = T::gate(config.kkt_gate);
    let f_g = slope.call_signed(gamma_star)?;
    let (mut mu_low, mut mu_high) = match active {
        ActiveSet::Interior => (T::zero(), T::zero()),
        ActiveSet::LowerBound => (-f_g, T::zero()),
        ActiveSet::UpperBound => (T::zero(), f_g),
    };
    // A root snapped onto a bound leaves a multiplier of rounding size and either sign.
    if mu_low < T::zero() && -mu_low <= gate {
        mu_low = T::zero();
    }
    if mu_high < T::zero() && -mu_high <= gate {
        mu_high = T::zero();
    }
    let degenerate = match active {
        ActiveSet::Interior => false,
        ActiveSet::LowerBound => mu_low < T::lit(config.strict_complementarity),
        ActiveSet::UpperBound => mu_high < T::lit(config.strict_complementarity),
    };

    let mut record = OptimumRecord {
        gamma_star,
        f_star,
        mu_low,
        mu_high,
        active,
        kkt_residual: T::zero(),
        concave_certified: false,
        degenerate,
        gamma_min: lo,
        gamma_max: hi,
        evaluations: 0,
    };
    record.kkt_residual = residuals_from_slope(&record, f_g).max;
    if policy.is_best_case() {
        record.concave_certified = certificate_grid(scenario, params).iter().all(|&(_, m)| m >= T::zero());
    }

    if config.cross_check {
        let oracle = grid_golden_maximize(&value, lo, hi, n, (T::lit(1e-10) * width).max(T::epsilon() * hi))?;
        let apart = (oracle.argmax - record.gamma_star).abs() > T::lit(2.0) * step;
        let better = oracle.max - record.f_star > T::gate(1e-12) * (T::one() + record.f_star.abs());
        if apart && better {
            return Err(Error::SolverDisagreement {
                solve: record.gamma_star.as_f64(),
                f_solve: record.f_star.as_f64(),
                oracle: oracle.argmax.as_f64(),
                f_oracle: oracle.max.as_f64(),
            });
        }
    }
    record.evaluations = slope.evaluations() + value.evaluations();
    Ok(record)
}

/// KKT diagnostics for a record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KktReport<T> {
    /// `|-f_γ + μ_high - μ_low|`.
    pub stationarity: T,
    pub slackness_low: T,
    pub slackness_high: T,
    /// `max(0, -μ)` per multiplier.
    pub dual_low: T,
    pub dual_high: T,
    pub max: T,
}

impl<T: Scalar> KktReport<T> {
    pub fn passes(&self, gate: T) -> bool {
        self.max <= gate
    }

    pub fn dual_infeasible(&self) -> bool {
        self.dual_low > T::zero() || self.dual_high > T::zero()
    }
}

fn residuals_from_slope<T: Scalar>(r: &OptimumRecord<T>, f_g: T) -> KktReport<T> {
    let stationarity = (-f_g + r.mu_high - r.mu_low).abs();
    let slackness_low = (r.mu_low * (r.gamma_min - r.gamma_star)).abs();
    let slackness_high = (r.mu_high * (r.gamma_star - r.gamma_max)).abs();
    let dual_low = (-r.mu_low).max(T::zero());
    let dual_high = (-r.mu_high).max(T::zero());
    let max = [stationarity, slackness_low, slackness_high, dual_low, dual_high]
        .into_iter()
        .fold(T::zero(), |a, b| if b.is_nan() || b > a { b } else { a });
    KktReport { stationarity, slackness_low, slackness_high, dual_low, dual_high, max }
}

pub fn kkt_residuals<T: Scalar>(
    record: &OptimumRecord<T>,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> KktReport<T> {
    let f_g = RevenueModel::new(scenario, params, policy).slope(record.gamma_star);
    residuals_from_slope(record, f_g)
}

const CERTIFICATE_GRID: usize = 101;
const CURVATURE_GATE: f64 = 1e-8;

/// `RHS - LHS` of the printed best-case concavity inequality at `γ`:
///
/// ```text
///   e^{-λ(ū-u0)^β} ( e^{-e^{-λ(ū-u̲)^β (-ln p)^α}} + γ λ β b (ū-u0)^{β-1} )
///       <= -( e^{-e^{-λ(ū-u̲)^β (-ln p)^α}} )²
/// ```
///
/// Evaluated verbatim; nonnegative means the inequality holds.
pub fn certificate_margin<T: Scalar>(gamma: T, scenario: &TravelScenario<T>, params: &CptParams<T>) -> T {
    let (alpha, beta, lambda, p) = (params.alpha(), params.beta(), params.lambda(), params.p_worst());
    let (u_low, u_high, u0) = scenario.utilities_at(gamma);
    let gap = u_high - u0;
    let inner = (-(-lambda * (u_high - u_low).powf(beta) * (-p.ln()).powf(alpha)).exp()).exp();
    let lhs = (-lambda * gap.powf(beta)).exp() * (inner + gamma * lambda * beta * scenario.b_sm * gap.powf(beta - T::one()));
    let rhs = -(inner * inner);
    rhs - lhs
}

fn certificate_grid<T: Scalar>(scenario: &TravelScenario<T>, params: &CptParams<T>) -> Vec<(T, T)> {
    let n = CERTIFICATE_GRID - 1;
    (0..=n)
        .map(|i| {
            let g = if i == n {
                scenario.gamma_max
            } else {
                scenario.gamma_min + scenario.width() * T::from_count(i) / T::from_count(n)
            };
            (g, certificate_margin(g, scenario, params))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConcavityReport<T> {
    pub certified: bool,
    /// Smallest `RHS - LHS` over the grid.
    pub margin: T,
    /// Largest numeric `f_γγ` over the grid.
    pub max_curvature: T,
    /// Grid tariffs where the certificate holds but `f_γγ > 1e-8`.
    pub disagreements: Vec<T>,
    /// Grid tariffs where the numeric scan produced no finite value.
    pub unscanned: Vec<T>,
}

/// Check the printed concavity inequality on a 101-point grid and compare
/// it with a central-difference curvature scan of `f`.
pub fn concavity_certificate<T: Scalar>(
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<ConcavityReport<T>> {
    if !policy.is_best_case() {
        return Err(Error::UnsupportedPolicy(format!(
            "concavity certificate is derived for the best-case reference only, got `{}`",
            policy.label()
        )));
    }
    scenario.ensure_valid()?;
    let grid = certificate_grid(scenario, params);
    let f = ScalarFunction::new(|g: T| revenue_unchecked(g, scenario, params, policy));
    let mut margin = T::infinity();
    let mut max_curvature = T::neg_infinity();
    let mut disagreements = Vec::new();
    let mut unscanned = Vec::new();
    let mut certified = true;
    for &(g, m) in &grid {
        let holds = m >= T::zero();
        certified &= holds;
        if !m.is_nan() {
            margin = margin.min(m);
        }
        match central_second_derivative(&f, g, T::fd_step(1e-3), 3) {
            Ok(c) => {
                max_curvature = max_curvature.max(c);
                if holds && c > T::lit(CURVATURE_GATE) {
                    log::warn!("concavity certificate holds at gamma = {g} but f_gg = {c:e} in `{}`", scenario.label);
                    disagreements.push(g);
                }
            }
            Err(_) => unscanned.push(g),
        }
    }
    Ok(ConcavityReport { certified, margin, max_curvature, disagreements, unscanned })
}

/// Partial derivatives of `L = -f` (bound terms have no θ and are linear in γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LagrangianDerivatives<T> {
    pub l_g: T,
    pub l_gg: T,
    pub l_gtheta: PerParam<T>,
    pub l_theta: PerParam<T>,
    pub l_thetatheta: PerParam<T>,
}

/// Closed form for the best-case reference, finite differences otherwise.
pub fn lagrangian_derivatives<T: Scalar>(
    gamma: T,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<LagrangianDerivatives<T>> {
    if policy.is_best_case() {
        let r = bestcase_partials(gamma, scenario, params)?;
        Ok(LagrangianDerivatives {
            l_g: -r.f_g,
            l_gg: -r.f_gg,
            l_gtheta: r.f_gtheta.map(|_, v| -*v),
            l_theta: r.f_theta.map(|_, v| -*v),
            l_thetatheta: r.f_thetatheta.map(|_, v| -*v),
        })
    } else {
        lagrangian_derivatives_fd(gamma, scenario, params, policy)
    }
}

/// Richardson finite differences through the general evaluation path.
pub fn lagrangian_derivatives_fd<T: Scalar>(
    gamma: T,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<LagrangianDerivatives<T>> {
    let first = T::fd_step(1e-5);
    let second = T::fd_step(1e-3);
    let at = |g: T, th: &CptParams<T>| -revenue_unchecked(g, scenario, th, policy);
    let in_gamma = ScalarFunction::new(|g: T| at(g, params));
    let l_g = central_derivative(&in_gamma, gamma, first, 2)?;
    let l_gg = central_second_derivative(&in_gamma, gamma, second, 3)?;
    let perturbed = |k: Param, t: T| params.with(k, t).map(|th| at(gamma, &th)).unwrap_or_else(|_| T::nan());

    let l_theta = PerParam::try_from_fn(|k| {
        central_derivative(&ScalarFunction::new(|t: T| perturbed(k, t)), params.get(k), first, 2)
    })?;
    let l_thetatheta = PerParam::try_from_fn(|k| {
        central_second_derivative(&ScalarFunction::new(|t: T| perturbed(k, t)), params.get(k), second, 3)
    })?;
    let l_gtheta = PerParam::try_from_fn(|k| {
        mixed_partial(
            |g: T, t: T| params.with(k, t).map(|th| at(g, &th)).unwrap_or_else(|_| T::nan()),
            gamma,
            params.get(k),
            second,
            3,
        )
    })?;
    Ok(LagrangianDerivatives { l_g, l_gg, l_gtheta, l_theta, l_thetatheta })
}
