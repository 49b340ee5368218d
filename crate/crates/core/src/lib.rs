//! Prospect-theory passenger acceptance, revenue-maximizing tariffs and
//! post-optimal sensitivity of the tariff to the behavioural parameters.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the bottom fix the common `f64` case.

pub mod analytic;
pub mod cpt;
pub mod error;
pub mod global;
pub mod io;
pub mod local;
pub mod numerics;
pub mod param;
pub mod scalar;
pub mod scenario;
pub mod tariff;

pub use cpt::{
    acceptance_probability, closed_form_revenue_bestcase, expected_revenue, rank_dependent_weights,
    resolve_reference, subjective_utilities, value, weight, BinaryProspect, ReferencePolicy, SubjectiveEvaluation,
};
pub use error::{Error, Result};
pub use global::{
    mismatch_loss, numeric_sweep, piecewise_continuation, MismatchReport, PiecewiseApprox, Segment, SweepRow, SweepSpec,
};
pub use local::{
    differentials, local_domain, local_domains, taylor_predict, BindingEvent, LocalDomain, ParamDomain,
    SensitivityDifferentials, TaylorConfig, TaylorPrediction,
};
pub use param::{CptParams, Param, PerParam};
pub use scalar::Scalar;
pub use scenario::{fixtures, generate_random, ScenarioRanges, TravelScenario, Violation};
pub use tariff::{
    concavity_certificate, kkt_residuals, lagrangian_derivatives, solve, solve_with, ActiveSet, ConcavityReport,
    KktReport, LagrangianDerivatives, OptimumRecord, RevenueModel, SolverConfig,
};

pub type Params = CptParams<f64>;
pub type Scenario = TravelScenario<f64>;
pub type Policy = ReferencePolicy<f64>;
pub type Optimum = OptimumRecord<f64>;

pub type Params32 = CptParams<f32>;
pub type Scenario32 = TravelScenario<f32>;
pub type Policy32 = ReferencePolicy<f32>;
pub type Optimum32 = OptimumRecord<f32>;
