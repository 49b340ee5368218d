//! Post-optimal sensitivity of the optimal tariff at one operating point.
//!
//! At an interior optimum the differentials come from the reduced KKT system
//! `L_γγ dγ* + L_γθ = 0`. With a bound active the tariff is pinned, so
//! `dγ*/dθ = 0` and the active multiplier absorbs the change:
//! `μ_low = L_γ` on the lower bound and `μ_high = -L_γ` on the upper one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{CptParams, Param, PerParam};
use crate::scalar::Scalar;
use crate::scenario::TravelScenario;
use crate::tariff::{lagrangian_derivatives, ActiveSet, OptimumRecord};
use crate::ReferencePolicy;

pub const KKT_GATE: f64 = 1e-7;
const SINGULAR_CURVATURE: f64 = 1e-10;
/// Events further than this (in % of the nominal value) are reported as none.
pub const DOMAIN_HORIZON_PCT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SensitivityDifferentials<T> {
    pub active: ActiveSet,
    pub theta0: PerParam<T>,
    pub gamma0: T,
    pub f0: T,
    pub dgamma_dtheta: PerParam<T>,
    /// Drift of the active multiplier; zero when interior.
    pub dmu_dtheta: PerParam<T>,
    /// `∂f/∂θ` at the optimum: the revenue differential.
    pub df_dtheta: PerParam<T>,
    /// `L_θ = -∂f/∂θ`: the same differential in minimization form.
    pub dl_dtheta: PerParam<T>,
    pub d2f_dtheta2: PerParam<T>,
}

pub fn differentials<T: Scalar>(
    opt: &OptimumRecord<T>,
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<SensitivityDifferentials<T>> {
    let gate = T::gate(KKT_GATE);
    if !opt.accepted(gate) {
        return Err(Error::KktRejected { residual: opt.kkt_residual.as_f64(), gate: gate.as_f64() });
    }
    let ld = lagrangian_derivatives(opt.gamma_star, scenario, params, policy)?;
    let zero = PerParam::from_fn(|_| T::zero());
    let (dgamma, dmu) = match opt.active {
        ActiveSet::Interior => {
            if ld.l_gg.abs() < T::lit(SINGULAR_CURVATURE) {
                return Err(Error::SingularHessian { l_gg: ld.l_gg.as_f64() });
            }
            if ld.l_gg < T::zero() {
                log::warn!("negative curvature L_gg = {:e} at interior optimum of `{}`", ld.l_gg, scenario.label);
            }
            (ld.l_gtheta.map(|_, v| -*v / ld.l_gg), zero)
        }
        ActiveSet::LowerBound => (zero, ld.l_gtheta),
        ActiveSet::UpperBound => (zero, ld.l_gtheta.map(|_, v| -*v)),
    };
    let d2f = PerParam::from_fn(|k| {
        let d = dgamma[k];
        -(ld.l_gg * d * d + T::lit(2.0) * ld.l_gtheta[k] * d + ld.l_thetatheta[k])
    });
    Ok(SensitivityDifferentials {
        active: opt.active,
        theta0: PerParam::from_fn(|k| params.get(k)),
        gamma0: opt.gamma_star,
        f0: opt.f_star,
        dgamma_dtheta: dgamma,
        dmu_dtheta: dmu,
        df_dtheta: ld.l_theta.map(|_, v| -*v),
        dl_dtheta: ld.l_theta,
        d2f_dtheta2: d2f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaylorConfig {
    /// Put `1/2` on the quadratic revenue term. Off by default, in which case
    /// the quadratic term carries coefficient one.
    pub half_factor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TaylorPrediction<T> {
    pub gamma_star: T,
    pub f_star: T,
}

/// Predict the optimum at `theta_new` from differentials at the nominal
/// point. The tariff is clamped to the box; order 2 only changes revenue.
pub fn taylor_predict<T: Scalar>(
    opt: &OptimumRecord<T>,
    diffs: &SensitivityDifferentials<T>,
    param: Param,
    theta_new: T,
    order: u8,
    config: TaylorConfig,
) -> Result<TaylorPrediction<T>> {
    if !theta_new.is_finite() {
        return Err(Error::Domain { what: "theta_new", value: theta_new.as_f64() });
    }
    let delta = theta_new - diffs.theta0[param];
    let gamma = (diffs.gamma0 + diffs.dgamma_dtheta[param] * delta).max(opt.gamma_min).min(opt.gamma_max);
    let linear = diffs.f0 + diffs.df_dtheta[param] * delta;
    let f = match order {
        1 => linear,
        2 => {
            let c = if config.half_factor { T::lit(0.5) } else { T::one() };
            linear + c * diffs.d2f_dtheta2[param] * delta * delta
        }
        _ => return Err(Error::Config(format!("taylor order must be 1 or 2, got {order}"))),
    };
    Ok(TaylorPrediction { gamma_star: gamma, f_star: f })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingEvent {
    MultiplierVanishes,
    LowerBoundHit,
    UpperBoundHit,
    None,
}

impl BindingEvent {
    pub fn name(self) -> &'static str {
        match self {
            BindingEvent::MultiplierVanishes => "multiplier_vanishes",
            BindingEvent::LowerBoundHit => "lower_bound_hit",
            BindingEvent::UpperBoundHit => "upper_bound_hit",
            BindingEvent::None => "none",
        }
    }
}

/// Admissible perturbations of one parameter, in % of its nominal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParamDomain<T> {
    pub delta_max_pos: Option<T>,
    pub delta_max_neg: Option<T>,
    pub event_pos: BindingEvent,
    pub event_neg: BindingEvent,
}

impl<T: Scalar> ParamDomain<T> {
    fn unbounded() -> Self {
        ParamDomain { delta_max_pos: None, delta_max_neg: None, event_pos: BindingEvent::None, event_neg: BindingEvent::None }
    }

    /// The unsigned domain: the nearer of the two directional events.
    pub fn magnitude(&self) -> Option<T> {
        match (self.delta_max_pos, self.delta_max_neg) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn binding_event(&self) -> BindingEvent {
        match (self.delta_max_pos, self.delta_max_neg) {
            (Some(a), Some(b)) if b < a => self.event_neg,
            (Some(_), _) => self.event_pos,
            (None, Some(_)) => self.event_neg,
            (None, None) => BindingEvent::None,
        }
    }

    /// Whether a signed perturbation (in %) stays inside the domain.
    pub fn contains(&self, delta_pct: T) -> bool {
        if delta_pct >= T::zero() {
            self.delta_max_pos.is_none_or(|d| delta_pct <= d)
        } else {
            self.delta_max_neg.is_none_or(|d| -delta_pct <= d)
        }
    }

    fn set(&mut self, delta_pct: T, event: BindingEvent) {
        if !delta_pct.is_finite() || delta_pct.abs() > T::lit(DOMAIN_HORIZON_PCT) {
            return;
        }
        if delta_pct >= T::zero() {
            self.delta_max_pos = Some(delta_pct);
            self.event_pos = event;
        } else {
            self.delta_max_neg = Some(-delta_pct);
            self.event_neg = event;
        }
    }
}

pub type LocalDomain<T> = PerParam<ParamDomain<T>>;

/// First-order distance from the operating point to the next active-set
/// change, per direction. Interior optima stop when the predicted tariff
/// reaches a bound; bound optima stop when the active multiplier reaches zero.
pub fn local_domain<T: Scalar>(opt: &OptimumRecord<T>, diffs: &SensitivityDifferentials<T>, param: Param) -> ParamDomain<T> {
    let theta0 = diffs.theta0[param];
    let pct = |delta: T| delta / theta0 * T::lit(100.0);
    let mut domain = ParamDomain::unbounded();
    match opt.active {
        ActiveSet::Interior => {
            let slope = diffs.dgamma_dtheta[param];
            if slope != T::zero() {
                domain.set(pct((opt.gamma_max - opt.gamma_star) / slope), BindingEvent::UpperBoundHit);
                domain.set(pct((opt.gamma_min - opt.gamma_star) / slope), BindingEvent::LowerBoundHit);
            }
        }
        ActiveSet::LowerBound | ActiveSet::UpperBound => {
            let drift = diffs.dmu_dtheta[param];
            if drift != T::zero() {
                domain.set(pct(-opt.active_multiplier() / drift), BindingEvent::MultiplierVanishes);
            }
        }
    }
    domain
}

pub fn local_domains<T: Scalar>(opt: &OptimumRecord<T>, diffs: &SensitivityDifferentials<T>) -> LocalDomain<T> {
    PerParam::from_fn(|k| local_domain(opt, diffs, k))
}
