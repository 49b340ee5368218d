//! Behavioral parameters and the per-parameter container used by every
//! sensitivity result.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One of the four perturbable rider parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Alpha,
    Beta,
    Lambda,
    P,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Alpha, Param::Beta, Param::Lambda, Param::P];

    pub fn name(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::Lambda => "lambda",
            Param::P => "p",
        }
    }

    /// Probability-valued parameters live on the open unit interval.
    pub fn is_probability(self) -> bool {
        matches!(self, Param::P)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(Param::Alpha),
            "beta" => Ok(Param::Beta),
            "lambda" => Ok(Param::Lambda),
            "p" | "p_worst" => Ok(Param::P),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

/// A value for each of the four parameters, indexable by [`Param`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerParam<V> {
    pub alpha: V,
    pub beta: V,
    pub lambda: V,
    pub p: V,
}

impl<V> PerParam<V> {
    pub fn from_fn(mut f: impl FnMut(Param) -> V) -> Self {
        PerParam {
            alpha: f(Param::Alpha),
            beta: f(Param::Beta),
            lambda: f(Param::Lambda),
            p: f(Param::P),
        }
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(Param) -> Result<V, E>) -> Result<Self, E> {
        Ok(PerParam {
            alpha: f(Param::Alpha)?,
            beta: f(Param::Beta)?,
            lambda: f(Param::Lambda)?,
            p: f(Param::P)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, &V)> {
        Param::ALL.into_iter().map(move |k| (k, &self[k]))
    }

    pub fn map<W>(&self, mut f: impl FnMut(Param, &V) -> W) -> PerParam<W> {
        PerParam::from_fn(|k| f(k, &self[k]))
    }
}

impl<V> Index<Param> for PerParam<V> {
    type Output = V;

    fn index(&self, k: Param) -> &V {
        match k {
            Param::Alpha => &self.alpha,
            Param::Beta => &self.beta,
            Param::Lambda => &self.lambda,
            Param::P => &self.p,
        }
    }
}

impl<V> IndexMut<Param> for PerParam<V> {
    fn index_mut(&mut self, k: Param) -> &mut V {
        match k {
            Param::Alpha => &mut self.alpha,
            Param::Beta => &mut self.beta,
            Param::Lambda => &mut self.lambda,
            Param::P => &mut self.p,
        }
    }
}

/// The rider's behavioral parameters.
///
/// `beta` is shared by the gain and loss branches of the value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound = "T: Scalar")]
pub struct CptParams<T> {
    alpha: T,
    beta: T,
    lambda: T,
    p_worst: T,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawParams<T> {
    alpha: T,
    beta: T,
    lambda: T,
    p_worst: T,
}

impl<T: Scalar> TryFrom<RawParams<T>> for CptParams<T> {
    type Error = Error;

    fn try_from(r: RawParams<T>) -> Result<Self> {
        CptParams::new(r.alpha, r.beta, r.lambda, r.p_worst)
    }
}

impl<T: Scalar> CptParams<T> {
    pub fn new(alpha: T, beta: T, lambda: T, p_worst: T) -> Result<Self> {
        let positive = |name: &str, v: T| {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        positive("lambda", lambda)?;
        if !(p_worst.is_finite() && p_worst > T::zero() && p_worst < T::one()) {
            return Err(Error::InvalidParams(format!("p_worst must lie in (0, 1), got {p_worst}")));
        }
        Ok(CptParams { alpha, beta, lambda, p_worst })
    }

    /// α 0.82, β 0.8, λ 2.25, p 0.75.
    pub fn nominal() -> Self {
        CptParams {
            alpha: T::lit(0.82),
            beta: T::lit(0.8),
            lambda: T::lit(2.25),
            p_worst: T::lit(0.75),
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn p_worst(&self) -> T {
        self.p_worst
    }

    pub fn get(&self, k: Param) -> T {
        match k {
            Param::Alpha => self.alpha,
            Param::Beta => self.beta,
            Param::Lambda => self.lambda,
            Param::P => self.p_worst,
        }
    }

    /// Copy with one parameter replaced; revalidates.
    pub fn with(&self, k: Param, v: T) -> Result<Self> {
        let mut out = *self;
        match k {
            Param::Alpha => out.alpha = v,
            Param::Beta => out.beta = v,
            Param::Lambda => out.lambda = v,
            Param::P => out.p_worst = v,
        }
        CptParams::new(out.alpha, out.beta, out.lambda, out.p_worst)
    }
}
