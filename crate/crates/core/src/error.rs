use thiserror::Error;

use crate::scenario::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("scenario `{label}` is invalid: {}", join(violations))]
    InvalidScenario {
        label: String,
        violations: Vec<Violation>,
    },

    #[error("choice set is trivial at this tariff: {0}")]
    ChoiceSet(String),

    #[error("non-finite evaluation at x = {at}")]
    NonFinite { at: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("solver disagreement: bracketed solve gave {solve} (f = {f_solve}), oracle gave {oracle} (f = {f_oracle})")]
    SolverDisagreement {
        solve: f64,
        f_solve: f64,
        oracle: f64,
        f_oracle: f64,
    },

    #[error("KKT residual {residual:e} exceeds gate {gate:e}")]
    KktRejected { residual: f64, gate: f64 },

    #[error("singular Hessian at interior optimum: L_gg = {l_gg:e}")]
    SingularHessian { l_gg: f64 },

    #[error("singular point: {term} is not finite")]
    SingularPoint { term: &'static str },

    #[error("unsupported reference policy for this operation: {0}")]
    UnsupportedPolicy(String),

    #[error("unknown parameter `{0}` (expected alpha, beta, lambda or p)")]
    UnknownParameter(String),

    #[error("degenerate continuation: breakpoints {a} and {b} coincide")]
    DegenerateContinuation { a: f64, b: f64 },

    #[error("continuation needs more than {limit} segments")]
    TooManySegments { limit: usize },

    #[error("scenario generation stalled: {accepted} accepted of {draws} draws")]
    GenerationStalled { accepted: usize, draws: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
