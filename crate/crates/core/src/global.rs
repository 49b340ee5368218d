//! Sensitivity over finite parameter ranges: exact re-optimization sweeps,
//! piecewise-linear continuation across active-set changes, and the revenue
//! lost by pricing with misestimated parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{differentials, local_domain, taylor_predict, SensitivityDifferentials, TaylorConfig};
use crate::param::{CptParams, Param};
use crate::scalar::Scalar;
use crate::scenario::TravelScenario;
use crate::tariff::{solve, ActiveSet, OptimumRecord, RevenueModel};
use crate::ReferencePolicy;

pub const P_SWEEP_MIN: f64 = 0.001;
pub const P_SWEEP_MAX: f64 = 0.999;
pub const MAX_SEGMENTS: usize = 32;
const MISMATCH_GATE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: Param,
    /// Half-width of the sweep as a fraction of the nominal value.
    pub rel_range: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn new(param: Param) -> Self {
        SweepSpec { param, rel_range: 0.2, steps: 41 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 3 {
            return Err(Error::Config(format!("sweep needs at least 3 steps, got {}", self.steps)));
        }
        if !(self.rel_range.is_finite() && self.rel_range > 0.0) {
            return Err(Error::Config(format!("sweep range must be positive, got {}", self.rel_range)));
        }
        Ok(())
    }

    /// Grid values with a flag for probability values pulled into
    /// `[0.001, 0.999]`. With an odd step count the middle value is `theta0`
    /// exactly.
    pub fn grid<T: Scalar>(&self, theta0: T) -> Vec<(T, bool)> {
        let n = self.steps;
        let r = T::lit(self.rel_range);
        (0..n)
            .map(|i| {
                let u = T::lit(2.0) * T::from_count(i) / T::from_count(n - 1) - T::one();
                self.clamp(theta0 * (T::one() + r * u))
            })
            .collect()
    }

    /// Sweep end points `(lo, hi)`, clamped like the grid.
    pub fn bounds<T: Scalar>(&self, theta0: T) -> (T, T) {
        let r = T::lit(self.rel_range);
        (self.clamp(theta0 * (T::one() - r)).0, self.clamp(theta0 * (T::one() + r)).0)
    }

    fn clamp<T: Scalar>(&self, theta: T) -> (T, bool) {
        if !self.param.is_probability() {
            return (theta, false);
        }
        let c = theta.max(T::lit(P_SWEEP_MIN)).min(T::lit(P_SWEEP_MAX));
        (c, c != theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepRow<T> {
    pub theta_name: Param,
    pub theta_value: T,
    pub gamma_star_numeric: T,
    pub f_star_numeric: T,
    pub gamma_star_taylor1: T,
    pub f_star_taylor1: T,
    pub f_star_taylor2: T,
    pub mu_low: T,
    pub mu_high: T,
    /// `None` when this row failed; see `error`.
    pub active: Option<ActiveSet>,
    pub mismatch_loss: T,
    pub clamped: bool,
    pub error: Option<String>,
}

/// Re-solve the pricing problem at every grid value of one parameter, next
/// to first- and second-order predictions from the nominal point. Mismatch
/// loss treats the nominal parameters as the rider's true ones.
///
/// A failed row is kept with NaN fields and its error message.
pub fn numeric_sweep<T: Scalar>(
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
    spec: &SweepSpec,
    taylor: TaylorConfig,
) -> Result<Vec<SweepRow<T>>> {
    spec.validate()?;
    let nominal = solve(scenario, params, policy)?;
    let diffs = differentials(&nominal, scenario, params, policy)?;
    let truth = RevenueModel::new(scenario, params, policy);
    let k = spec.param;
    let rows = spec
        .grid(params.get(k))
        .into_par_iter()
        .map(|(theta, clamped)| {
            let row = (|| -> Result<SweepRow<T>> {
                let perturbed = params.with(k, theta)?;
                let r = solve(scenario, &perturbed, policy)?;
                let t1 = taylor_predict(&nominal, &diffs, k, theta, 1, taylor)?;
                let t2 = taylor_predict(&nominal, &diffs, k, theta, 2, taylor)?;
                Ok(SweepRow {
                    theta_name: k,
                    theta_value: theta,
                    gamma_star_numeric: r.gamma_star,
                    f_star_numeric: r.f_star,
                    gamma_star_taylor1: t1.gamma_star,
                    f_star_taylor1: t1.f_star,
                    f_star_taylor2: t2.f_star,
                    mu_low: r.mu_low,
                    mu_high: r.mu_high,
                    active: Some(r.active),
                    mismatch_loss: nominal.f_star - truth.revenue(r.gamma_star),
                    clamped,
                    error: None,
                })
            })();
            row.unwrap_or_else(|e| {
                log::warn!("sweep row {k} = {theta} of `{}` failed: {e}", scenario.label);
                SweepRow {
                    theta_name: k,
                    theta_value: theta,
                    gamma_star_numeric: T::nan(),
                    f_star_numeric: T::nan(),
                    gamma_star_taylor1: T::nan(),
                    f_star_taylor1: T::nan(),
                    f_star_taylor2: T::nan(),
                    mu_low: T::nan(),
                    mu_high: T::nan(),
                    active: None,
                    mismatch_loss: T::nan(),
                    clamped,
                    error: Some(e.to_string()),
                }
            })
        })
        .collect();
    Ok(rows)
}

/// One linearization `γ* ≈ gamma_anchor + slope (θ - theta_anchor)` valid on
/// `[theta_start, theta_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Segment<T> {
    pub theta_start: T,
    pub theta_end: T,
    pub theta_anchor: T,
    pub gamma_anchor: T,
    pub slope: T,
    pub active: ActiveSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PiecewiseApprox<T> {
    pub param: Param,
    pub gamma_min: T,
    pub gamma_max: T,
    /// Parameter values where the active set changes, increasing.
    pub breakpoints: Vec<T>,
    /// Contiguous, ordered by `theta_start`.
    pub segments: Vec<Segment<T>>,
}

impl<T: Scalar> PiecewiseApprox<T> {
    pub fn theta_range(&self) -> (T, T) {
        (self.segments[0].theta_start, self.segments[self.segments.len() - 1].theta_end)
    }

    pub fn segment_at(&self, theta: T) -> Option<&Segment<T>> {
        self.segments.iter().find(|s| s.theta_start <= theta && theta <= s.theta_end)
    }

    /// Predicted optimal tariff, clamped to the box; `None` outside the range.
    pub fn predict(&self, theta: T) -> Option<T> {
        self.segment_at(theta).map(|s| {
            (s.gamma_anchor + s.slope * (theta - s.theta_anchor)).max(self.gamma_min).min(self.gamma_max)
        })
    }
}

struct Tracker<'a, T: Scalar> {
    scenario: &'a TravelScenario<T>,
    params: &'a CptParams<T>,
    policy: &'a ReferencePolicy<T>,
    param: Param,
    theta0: T,
}

#[derive(Clone, Copy)]
struct Anchor<T> {
    theta: T,
    record: OptimumRecord<T>,
    diffs: SensitivityDifferentials<T>,
}

impl<T: Scalar> Tracker<'_, T> {
    fn solve_at(&self, theta: T) -> Result<OptimumRecord<T>> {
        solve(self.scenario, &self.params.with(self.param, theta)?, self.policy)
    }

    fn anchor(&self, theta: T, record: OptimumRecord<T>) -> Result<Anchor<T>> {
        let params = self.params.with(self.param, theta)?;
        let diffs = differentials(&record, self.scenario, &params, self.policy)?;
        Ok(Anchor { theta, record, diffs })
    }

    /// Walk from the nominal anchor towards `end`, collecting every exact
    /// solution used for a linearization (nominal excluded) and the
    /// breakpoints, both in walking order.
    fn walk(&self, nominal: &Anchor<T>, end: T, positive: bool) -> Result<(Vec<Anchor<T>>, Vec<T>)> {
        let dir = if positive { T::one() } else { -T::one() };
        let min_step = T::lit(1e-6) * self.theta0.abs();
        let bisect_tol = T::lit(1e-6) * self.theta0.abs();
        let mut current = *nominal;
        let mut anchors = Vec::new();
        let mut breakpoints: Vec<T> = Vec::new();
        loop {
            if anchors.len() >= MAX_SEGMENTS {
                return Err(Error::TooManySegments { limit: MAX_SEGMENTS });
            }
            let domain = local_domain(&current.record, &current.diffs, self.param);
            let reach = if positive { domain.delta_max_pos } else { domain.delta_max_neg };
            let step = reach.map_or(T::infinity(), |pct| pct / T::lit(100.0) * current.theta.abs()).max(min_step);
            let mut target = current.theta + dir * step;
            if dir * (target - end) >= T::zero() {
                target = end;
            }
            let at_target = self.solve_at(target)?;
            if at_target.active == current.record.active {
                if target == end {
                    return Ok((anchors, breakpoints));
                }
                current = self.anchor(target, at_target)?;
                anchors.push(current);
                continue;
            }
            let mut inside = (current.theta, current.record);
            let mut outside = (target, at_target);
            while (outside.0 - inside.0).abs() > bisect_tol {
                let mid = (inside.0 + outside.0) / T::lit(2.0);
                let r = self.solve_at(mid)?;
                if r.active == current.record.active {
                    inside = (mid, r);
                } else {
                    outside = (mid, r);
                }
            }
            let bp = (inside.0 + outside.0) / T::lit(2.0);
            if let Some(&last) = breakpoints.last() {
                if (bp - last).abs() <= T::lit(1e-10) * T::one().max(self.theta0.abs()) {
                    return Err(Error::DegenerateContinuation { a: last.as_f64(), b: bp.as_f64() });
                }
            }
            breakpoints.push(bp);
            if inside.0 != current.theta {
                anchors.push(self.anchor(inside.0, inside.1)?);
            }
            current = self.anchor(outside.0, outside.1)?;
            anchors.push(current);
        }
    }
}

/// Piecewise-linear tracking of `γ*(θ)` over the sweep range.
///
/// From the nominal point, step to the first-order prediction of the next
/// active-set change and re-solve there. An unchanged active set refreshes
/// the linearization at that point; a changed one is bisected to `1e-6 θ0`,
/// which yields a breakpoint and exact solutions on both sides of it.
///
/// Every exact solution anchors one segment. Inside an active-set interval
/// each anchor covers up to the midpoints with its neighbours, so a value
/// of θ is predicted from the nearest anchor of its own active set.
pub fn piecewise_continuation<T: Scalar>(
    scenario: &TravelScenario<T>,
    params: &CptParams<T>,
    policy: &ReferencePolicy<T>,
    spec: &SweepSpec,
) -> Result<PiecewiseApprox<T>> {
    spec.validate()?;
    let param = spec.param;
    let theta0 = params.get(param);
    let tracker = Tracker { scenario, params, policy, param, theta0 };
    let nominal = tracker.anchor(theta0, solve(scenario, params, policy)?)?;
    let (lo, hi) = spec.bounds(theta0);

    let (up, up_bps) = tracker.walk(&nominal, hi, true)?;
    let (down, down_bps) = tracker.walk(&nominal, lo, false)?;
    let anchors: Vec<Anchor<T>> = down.into_iter().rev().chain(std::iter::once(nominal)).chain(up).collect();
    if anchors.len() > MAX_SEGMENTS {
        return Err(Error::TooManySegments { limit: MAX_SEGMENTS });
    }
    let breakpoints: Vec<T> = down_bps.into_iter().rev().chain(up_bps).collect();

    // Between neighbouring anchors there is at most one breakpoint, since
    // both sides of every breakpoint are anchored.
    let boundary = |a: &Anchor<T>, b: &Anchor<T>| {
        breakpoints
            .iter()
            .copied()
            .find(|&bp| a.theta < bp && bp < b.theta)
            .unwrap_or_else(|| (a.theta + b.theta) / T::lit(2.0))
    };
    let segments = anchors
        .iter()
        .enumerate()
        .map(|(i, a)| Segment {
            theta_start: if i == 0 { lo } else { boundary(&anchors[i - 1], a) },
            theta_end: anchors.get(i + 1).map_or(hi, |b| boundary(a, b)),
            theta_anchor: a.theta,
            gamma_anchor: a.record.gamma_star,
            slope: a.diffs.dgamma_dtheta[param],
            active: a.record.active,
        })
        .collect();
    Ok(PiecewiseApprox { param, gamma_min: scenario.gamma_min, gamma_max: scenario.gamma_max, breakpoints, segments })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MismatchReport<T> {
    /// `f(γ*_true; θ_true) - f(γ̃*; θ_true)`.
    pub delta_f: T,
    pub gamma_true: T,
    pub gamma_assumed: T,
    pub f_true: T,
    /// Revenue of the assumed-parameter tariff under the true parameters.
    pub f_assumed: T,
}

/// Revenue forgone by pricing with `theta_assumed` when riders behave
/// according to `theta_true`.
pub fn mismatch_loss<T: Scalar>(
    scenario: &TravelScenario<T>,
    theta_true: &CptParams<T>,
    theta_assumed: &CptParams<T>,
    policy: &ReferencePolicy<T>,
) -> Result<MismatchReport<T>> {
    let truth = solve(scenario, theta_true, policy)?;
    let assumed = solve(scenario, theta_assumed, policy)?;
    let f_assumed = RevenueModel::new(scenario, theta_true, policy).revenue(assumed.gamma_star);
    let delta_f = truth.f_star - f_assumed;
    if delta_f < -T::gate(MISMATCH_GATE) {
        return Err(Error::SolverDisagreement {
            solve: truth.gamma_star.as_f64(),
            f_solve: truth.f_star.as_f64(),
            oracle: assumed.gamma_star.as_f64(),
            f_oracle: f_assumed.as_f64(),
        });
    }
    Ok(MismatchReport { delta_f, gamma_true: truth.gamma_star, gamma_assumed: assumed.gamma_star, f_true: truth.f_star, f_assumed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures;

    const BEST: ReferencePolicy<f64> = ReferencePolicy::BestCase;

    fn sweep(i: usize, k: Param) -> Vec<SweepRow<f64>> {
        numeric_sweep(&fixtures()[i], &CptParams::nominal(), &BEST, &SweepSpec::new(k), TaylorConfig::default()).unwrap()
    }

    #[test]
    fn grid_centre_is_nominal() {
        let g = SweepSpec::new(Param::Alpha).grid(0.82f64);
        assert_eq!(g.len(), 41);
        assert_eq!(g[20], (0.82, false));
        assert!((g[0].0 - 0.656).abs() < 1e-12 && (g[40].0 - 0.984).abs() < 1e-12);
    }

    #[test]
    fn probability_grid_is_clamped() {
        let spec = SweepSpec { param: Param::P, rel_range: 0.5, steps: 5 };
        let g = spec.grid(0.75f64);
        assert_eq!(g[4], (0.999, true));
        assert!(!g[0].1);
        assert_eq!(spec.bounds(0.75), (0.375, 0.999));
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec { param: Param::Beta, rel_range: 0.2, steps: 2 }.validate().is_err());
        assert!(SweepSpec { param: Param::Beta, rel_range: 0.0, steps: 9 }.validate().is_err());
    }

    #[test]
    fn nominal_row_has_zero_loss() {
        let s = &fixtures::<f64>()[0];
        let r0 = solve(s, &CptParams::nominal(), &BEST).unwrap();
        for k in Param::ALL {
            let rows = sweep(0, k);
            assert_eq!(rows[20].gamma_star_numeric, r0.gamma_star);
            assert_eq!(rows[20].mismatch_loss, 0.0);
            assert!(rows.iter().all(|r| r.mismatch_loss >= -1e-9 && r.error.is_none()));
        }
    }

    #[test]
    fn s1_p_sweep_has_flat_bound_segment() {
        let rows = sweep(0, Param::P);
        let pinned: Vec<_> = rows.iter().filter(|r| r.active.is_some_and(ActiveSet::is_bound)).collect();
        assert!(pinned.len() >= 2);
        for w in pinned.windows(2) {
            assert_eq!(w[0].gamma_star_numeric, w[1].gamma_star_numeric);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        assert_eq!(sweep(1, Param::Lambda), sweep(1, Param::Lambda));
    }

    #[test]
    fn wide_domain_gives_single_segment() {
        let pw = piecewise_continuation(&fixtures()[0], &CptParams::nominal(), &BEST, &SweepSpec::new(Param::Alpha)).unwrap();
        assert_eq!(pw.segments.len(), 1);
        assert!(pw.breakpoints.is_empty());
        let (lo, hi) = pw.theta_range();
        assert!((lo - 0.656).abs() < 1e-12 && (hi - 0.984).abs() < 1e-12);
    }

    #[test]
    fn s1_beta_breaks_past_first_order_domain() {
        let pw = piecewise_continuation(&fixtures()[0], &CptParams::nominal(), &BEST, &SweepSpec::new(Param::Beta)).unwrap();
        assert_eq!(pw.breakpoints.len(), 2, "{:?}", pw.breakpoints);
        // the first-order domain is 8.69 %; curvature pushes the exact switch further out
        let pct = (pw.breakpoints[1] / 0.8 - 1.0) * 100.0;
        assert!(pct > 8.69 && pct < 12.0, "{pct}");
        for w in pw.segments.windows(2) {
            assert_eq!(w[0].theta_end, w[1].theta_start);
        }
        assert!(pw.breakpoints[0] < pw.breakpoints[1]);
        assert_eq!(pw.segments[0].active, ActiveSet::UpperBound);
        assert_eq!(pw.segments.last().unwrap().active, ActiveSet::LowerBound);
    }

    fn worst_errors(i: usize, k: Param) -> (f64, f64, PiecewiseApprox<f64>, Vec<SweepRow<f64>>) {
        let spec = SweepSpec::new(k);
        let pw = piecewise_continuation(&fixtures()[i], &CptParams::nominal(), &BEST, &spec).unwrap();
        let rows = sweep(i, k);
        let mut worst = (0.0f64, 0.0f64);
        for r in &rows {
            worst.0 = worst.0.max((pw.predict(r.theta_value).unwrap() - r.gamma_star_numeric).abs());
            worst.1 = worst.1.max((r.gamma_star_taylor1 - r.gamma_star_numeric).abs());
        }
        (worst.0, worst.1, pw, rows)
    }

    #[test]
    fn continuation_never_worse_than_single_anchor() {
        for i in 0..5 {
            for k in Param::ALL {
                let (cont, single, pw, _) = worst_errors(i, k);
                if pw.breakpoints.is_empty() {
                    assert!(cont <= single + 1e-12, "S{} {k}", i + 1);
                } else {
                    assert!(cont < single, "S{} {k}: {cont} vs {single}", i + 1);
                }
            }
        }
    }

    #[test]
    fn s1_beta_segments_track_sweep_away_from_breakpoints() {
        let (_, _, pw, rows) = worst_errors(0, Param::Beta);
        let step = 0.4 * 0.8 / 40.0;
        for r in rows.iter().filter(|r| pw.breakpoints.iter().all(|b| (b - r.theta_value).abs() > step)) {
            let g = pw.predict(r.theta_value).unwrap();
            assert!((g - r.gamma_star_numeric).abs() < 0.02 * r.gamma_star_numeric, "{}", r.theta_value);
        }
    }

    #[test]
    fn mismatch_zero_and_nonnegative() {
        let s = &fixtures::<f64>()[0];
        let p = CptParams::nominal();
        assert_eq!(mismatch_loss(s, &p, &p, &BEST).unwrap().delta_f, 0.0);
        let m = mismatch_loss(s, &p, &p.with(Param::Lambda, 2.7).unwrap(), &BEST).unwrap();
        assert!(m.delta_f >= 0.0);
        assert!(m.gamma_assumed < m.gamma_true);
    }

    #[test]
    fn s1_lambda_overestimate_matches_double_solve_oracle() {
        // brute-force grid + root polish of both problems in 30-digit arithmetic
        const GAMMA_TRUE: f64 = 6.336296079688258;
        const GAMMA_ASSUMED: f64 = 5.20840743046646;
        const DELTA_F: f64 = 0.011673163830570393;
        let p = CptParams::nominal();
        let m = mismatch_loss(&fixtures()[0], &p, &p.with(Param::Lambda, 2.7).unwrap(), &BEST).unwrap();
        assert!((m.gamma_true - GAMMA_TRUE).abs() < 1e-7);
        assert!((m.gamma_assumed - GAMMA_ASSUMED).abs() < 1e-7);
        assert!((m.delta_f - DELTA_F).abs() < 1e-10);
    }
}
