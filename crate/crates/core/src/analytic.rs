//! Hand-derived partial derivatives of the best-case-reference revenue.
//!
//! With `S = x̄ - x̲`, `D = x̄ + bγ - u0`, `q = -ln p` and `π = exp(-q^α)`:
//!
//! ```text
//!   E = λ (π S^β - D^β)         s = 1 / (1 + e^E)         f = γ s
//!   s_E  = -s (1 - s)           s_EE = s (1 - s)(1 - 2s)
//!
//!   f_γ   = s + γ s_E E_γ
//!   f_γγ  = 2 s_E E_γ + γ (s_EE E_γ² + s_E E_γγ)
//!   f_θ   = γ s_E E_θ
//!   f_γθ  = s_E E_θ + γ (s_EE E_γ E_θ + s_E E_γθ)
//!   f_θθ  = γ (s_EE E_θ² + s_E E_θθ)
//! ```
//!
//! Partials of `E`:
//!
//! ```text
//!   E_γ   = -λ β b D^(β-1)               E_γγ = -λ β (β-1) b² D^(β-2)
//!   E_λ   = π S^β - D^β                  E_γλ = -β b D^(β-1)            E_λλ = 0
//!   E_α   = λ S^β π_α                    E_γα = 0                       E_αα = λ S^β π_αα
//!   E_p   = λ S^β π_p                    E_γp = 0                       E_pp = λ S^β π_pp
//!   E_β   = λ (π S^β ln S - D^β ln D)    E_γβ = -λ b D^(β-1) (1 + β ln D)
//!   E_ββ  = λ (π S^β ln²S - D^β ln²D)
//!
//!   π_α  = -π q^α ln q                   π_αα = π q^α ln²q (q^α - 1)
//!   π_p  = π h,  h = α q^(α-1) / p       π_pp = π (h² + h_p),  h_p = -α q^(α-2) (α - 1 + q) / p²
//! ```
//!
//! `x^e ln x` and `x^e ln² x` take their limit 0 at `x = 0` when `e > 0`.
//! Terms with a negative power of `D` are singular at `D = 0`.

use crate::cpt::{pow0, weight_unchecked};
use crate::error::{Error, Result};
use crate::param::{CptParams, Param, PerParam};
use crate::scalar::Scalar;
use crate::scenario::TravelScenario;

/// Revenue and its partials at one `(γ, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenuePartials<T> {
    pub f: T,
    pub f_g: T,
    pub f_gg: T,
    pub f_theta: PerParam<T>,
    pub f_gtheta: PerParam<T>,
    pub f_thetatheta: PerParam<T>,
}

fn pow_log<T: Scalar>(x: T, e: T, k: i32) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.powf(e) * x.ln().powi(k)
    }
}

fn finite<T: Scalar>(v: T, term: &'static str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularPoint { term })
    }
}

/// Revenue `f = γ s(E)` from its exponent, clamped like the logistic.
fn sigmoid_parts<T: Scalar>(e: T) -> (T, T, T) {
    let c = T::lit(700.0);
    let s = T::one() / (T::one() + e.max(-c).min(c).exp());
    let s_e = -s * (T::one() - s);
    let s_ee = -s_e * (T::one() - T::lit(2.0) * s);
    (s, s_e, s_ee)
}

/// Closed-form partials of the best-case revenue.
pub fn bestcase_partials<T: Scalar>(gamma: T, scenario: &TravelScenario<T>, params: &CptParams<T>) -> Result<RevenuePartials<T>> {
    let (alpha, beta, lambda, p) = (params.alpha(), params.beta(), params.lambda(), params.p_worst());
    let b = scenario.b_sm;
    let spread = scenario.x_high - scenario.x_low;
    let gap = scenario.x_high + b * gamma - scenario.u0;
    if gap < T::zero() {
        return Err(Error::ChoiceSet(format!(
            "scenario `{}` at gamma = {gamma}: u0 above the best-case utility",
            scenario.label
        )));
    }
    let one = T::one();
    let two = T::lit(2.0);

    let q = -p.ln();
    let qa = q.powf(alpha);
    let lnq = q.ln();
    let pi = weight_unchecked(p, alpha);
    let pi_a = -pi * qa * lnq;
    let pi_aa = pi * qa * lnq * lnq * (qa - one);
    let h = alpha * q.powf(alpha - one) / p;
    let h_p = -alpha * q.powf(alpha - two) * (alpha - one + q) / (p * p);
    let pi_p = pi * h;
    let pi_pp = pi * (h * h + h_p);

    let s_b = pow0(spread, beta);
    let d_b = pow0(gap, beta);
    let e = lambda * (pi * s_b - d_b);

    // D^(β-1) and D^(β-2) blow up at D = 0 for β < 1 (resp. β < 2).
    let d_bm1 = finite(gap.powf(beta - one), "D^(beta-1) at zero base")?;
    let d_bm2 = if beta == one { T::zero() } else { gap.powf(beta - two) };
    let d_bm2 = finite(d_bm2, "D^(beta-2) at zero base")?;
    let ln_d_term = if gap == T::zero() { T::zero() } else { d_bm1 * (one + beta * gap.ln()) };

    let e_g = -lambda * beta * b * d_bm1;
    let e_gg = -lambda * beta * (beta - one) * b * b * d_bm2;

    let e_theta = PerParam {
        alpha: lambda * s_b * pi_a,
        beta: lambda * (pi * pow_log(spread, beta, 1) - pow_log(gap, beta, 1)),
        lambda: pi * s_b - d_b,
        p: lambda * s_b * pi_p,
    };
    let e_gtheta = PerParam {
        alpha: T::zero(),
        beta: -lambda * b * ln_d_term,
        lambda: -beta * b * d_bm1,
        p: T::zero(),
    };
    let e_tt = PerParam {
        alpha: lambda * s_b * pi_aa,
        beta: lambda * (pi * pow_log(spread, beta, 2) - pow_log(gap, beta, 2)),
        lambda: T::zero(),
        p: lambda * s_b * pi_pp,
    };

    let (s, s_e, s_ee) = sigmoid_parts(e);
    let f = gamma * s;
    let f_g = s + gamma * s_e * e_g;
    let f_gg = two * s_e * e_g + gamma * (s_ee * e_g * e_g + s_e * e_gg);
    let f_theta = PerParam::from_fn(|k| gamma * s_e * e_theta[k]);
    let f_gtheta = PerParam::from_fn(|k| s_e * e_theta[k] + gamma * (s_ee * e_g * e_theta[k] + s_e * e_gtheta[k]));
    let f_thetatheta = PerParam::from_fn(|k| gamma * (s_ee * e_theta[k] * e_theta[k] + s_e * e_tt[k]));

    let out = RevenuePartials { f, f_g, f_gg, f_theta, f_gtheta, f_thetatheta };
    check_finite(&out)?;
    Ok(out)
}

fn check_finite<T: Scalar>(r: &RevenuePartials<T>) -> Result<()> {
    finite(r.f, "f")?;
    finite(r.f_g, "f_gamma")?;
    finite(r.f_gg, "f_gamma_gamma")?;
    for k in Param::ALL {
        let term = match k {
            Param::Alpha => ["f_alpha", "f_gamma_alpha", "f_alpha_alpha"],
            Param::Beta => ["f_beta", "f_gamma_beta", "f_beta_beta"],
            Param::Lambda => ["f_lambda", "f_gamma_lambda", "f_lambda_lambda"],
            Param::P => ["f_p", "f_gamma_p", "f_p_p"],
        };
        finite(r.f_theta[k], term[0])?;
        finite(r.f_gtheta[k], term[1])?;
        finite(r.f_thetatheta[k], term[2])?;
    }
    Ok(())
}

/// `f_γ` alone, allowing `-∞` at `D = 0` so root brackets still see the sign.
pub(crate) fn bestcase_f_gamma<T: Scalar>(gamma: T, scenario: &TravelScenario<T>, params: &CptParams<T>) -> T {
    let (alpha, beta, lambda, p) = (params.alpha(), params.beta(), params.lambda(), params.p_worst());
    let b = scenario.b_sm;
    let gap = scenario.x_high + b * gamma - scenario.u0;
    if gap < T::zero() {
        return T::nan();
    }
    let pi = weight_unchecked(p, alpha);
    let e = lambda * (pi * pow0(scenario.x_high - scenario.x_low, beta) - pow0(gap, beta));
    let (s, s_e, _) = sigmoid_parts(e);
    let e_g = -lambda * beta * b * gap.powf(beta - T::one());
    if e_g.is_infinite() {
        // s_E < 0 and E_γ = +∞: the slope is -∞ unless s saturated.
        return if s_e == T::zero() { s } else { T::neg_infinity() };
    }
    s + gamma * s_e * e_g
}
