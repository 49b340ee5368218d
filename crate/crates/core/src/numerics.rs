//! Scalar kernels that validate the analytic paths: a derivative-free
//! bounded maximizer, bracketed root finding and Richardson-extrapolated
//! finite differences.
//!
//! None of these share code with the closed-form derivatives, so agreement
//! between the two is meaningful.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Golden-section iterations allowed per refined cell.
const GOLDEN_MAX_EVALS: usize = 200;

/// A scalar function with an evaluation counter.
pub struct ScalarFunction<F> {
    f: F,
    evals: Cell<usize>,
}

impl<F> ScalarFunction<F> {
    pub fn new(f: F) -> Self {
        ScalarFunction { f, evals: Cell::new(0) }
    }

    pub fn evaluations(&self) -> usize {
        self.evals.get()
    }

    pub fn call<T: Scalar>(&self, x: T) -> Result<T>
    where
        F: Fn(T) -> T,
    {
        self.evals.set(self.evals.get() + 1);
        let y = (self.f)(x);
        if y.is_nan() || y.is_infinite() {
            Err(Error::NonFinite { at: x.as_f64() })
        } else {
            Ok(y)
        }
    }

    /// Like [`call`](Self::call) but lets infinities through; only NaN is an error.
    pub fn call_signed<T: Scalar>(&self, x: T) -> Result<T>
    where
        F: Fn(T) -> T,
    {
        self.evals.set(self.evals.get() + 1);
        let y = (self.f)(x);
        if y.is_nan() {
            Err(Error::NonFinite { at: x.as_f64() })
        } else {
            Ok(y)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<T> {
    pub argmax: T,
    pub max: T,
    pub evaluations: usize,
}

/// Global maximum of `f` on `[lo, hi]`.
///
/// Samples `presieve + 1` equispaced points, then golden-section refines
/// the two cells around every sampled local peak (endpoints included). The
/// best refined or sampled point wins.
pub fn grid_golden_maximize<T, F>(f: &ScalarFunction<F>, lo: T, hi: T, presieve: usize, tol: T) -> Result<Maximum<T>>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if !(lo < hi) || presieve < 8 || !(tol > T::zero()) {
        return Err(Error::Config(format!(
            "grid_golden_maximize needs lo < hi, presieve >= 8, tol > 0 (got [{lo}, {hi}], {presieve}, {tol})"
        )));
    }
    let start = f.evaluations();
    let n = presieve;
    let step = (hi - lo) / T::from_count(n);
    let xs: Vec<T> = (0..=n).map(|i| if i == n { hi } else { lo + step * T::from_count(i) }).collect();
    let ys = xs.iter().map(|&x| f.call(x)).collect::<Result<Vec<T>>>()?;

    let (mut best_x, mut best_y) = (xs[0], ys[0]);
    for (&x, &y) in xs.iter().zip(&ys) {
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }

    for i in 0..=n {
        let left_ok = i == 0 || ys[i] >= ys[i - 1];
        let right_ok = i == n || ys[i] >= ys[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(n)];
        let (x, y) = golden_section(f, a, b, tol)?;
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    Ok(Maximum { argmax: best_x, max: best_y, evaluations: f.evaluations() - start })
}

fn golden_section<T, F>(f: &ScalarFunction<F>, mut a: T, mut b: T, tol: T) -> Result<(T, T)>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let invphi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f.call(c)?;
    let mut fd = f.call(d)?;
    let mut evals = 2;
    while (b - a) > tol && evals < GOLDEN_MAX_EVALS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f.call(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f.call(d)?;
        }
        evals += 1;
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

fn step_for<T: Scalar>(x: T, rel: T) -> T {
    if x == T::zero() {
        T::lit(1e-6).max(rel)
    } else {
        rel * x.abs()
    }
}

/// Richardson table over successively halved steps; `estimate(h)` must have
/// an error expansion in even powers of `h`.
fn richardson<T: Scalar>(h0: T, levels: usize, mut estimate: impl FnMut(T) -> Result<T>) -> Result<T> {
    let mut row: Vec<T> = Vec::with_capacity(levels);
    let mut h = h0;
    for i in 0..levels {
        let mut cur = estimate(h)?;
        let mut factor = T::lit(4.0);
        for prev in row.iter_mut().take(i) {
            let next = cur + (cur - *prev) / (factor - T::one());
            *prev = cur;
            cur = next;
            factor *= T::lit(4.0);
        }
        row.push(cur);
        h /= T::lit(2.0);
    }
    row.pop().ok_or_else(|| Error::Config("richardson needs at least one level".into()))
}

fn check_levels(levels: usize) -> Result<()> {
    if (1..=4).contains(&levels) {
        Ok(())
    } else {
        Err(Error::Config(format!("richardson_levels must be in [1, 4], got {levels}")))
    }
}

/// Central difference with `levels` Richardson stages; error `O(h^(2 levels))`.
///
/// The step is `rel_step * |x|`, or an absolute `1e-6` at `x = 0`.
pub fn central_derivative<T, F>(f: &ScalarFunction<F>, x: T, rel_step: T, levels: usize) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    check_levels(levels)?;
    let h0 = step_for(x, rel_step);
    richardson(h0, levels, |h| Ok((f.call(x + h)? - f.call(x - h)?) / (T::lit(2.0) * h)))
}

/// Central second difference with Richardson stages.
pub fn central_second_derivative<T, F>(f: &ScalarFunction<F>, x: T, rel_step: T, levels: usize) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    check_levels(levels)?;
    let h0 = step_for(x, rel_step);
    let fx = f.call(x)?;
    richardson(h0, levels, |h| Ok((f.call(x + h)? - T::lit(2.0) * fx + f.call(x - h)?) / (h * h)))
}

/// Mixed partial `∂²f/∂x∂y` from the four-corner stencil, both steps halved
/// together at each Richardson stage.
pub fn mixed_partial<T, F>(f: F, x: T, y: T, rel_step: T, levels: usize) -> Result<T>
where
    T: Scalar,
    F: Fn(T, T) -> T,
{
    check_levels(levels)?;
    let hx = step_for(x, rel_step);
    let hy = step_for(y, rel_step);
    let eval = |a: T, b: T| {
        let v = f(a, b);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { at: a.as_f64() })
        }
    };
    let ratio = hy / hx;
    richardson(hx, levels, |h| {
        let k = h * ratio;
        let s = eval(x + h, y + k)? - eval(x + h, y - k)? - eval(x - h, y + k)? + eval(x - h, y - k)?;
        Ok(s / (T::lit(4.0) * h * k))
    })
}

/// Root of `f` in `[lo, hi]` by Brent's method (bisection, secant and
/// inverse quadratic steps). Stops when the bracket is narrower than `tol`
/// or `f` vanishes exactly. Infinite endpoint values force bisection.
pub fn bracket_root<T, F>(f: &ScalarFunction<F>, lo: T, hi: T, tol: T) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f.call_signed(a)?;
    let mut fb = f.call_signed(b)?;
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * tol;
        let m = half * (c - b);
        if m.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        let finite = fa.is_finite() && fb.is_finite() && fc.is_finite();
        if finite && e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (T::lit(3.0) * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f.call_signed(b)?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_maximum() {
        let f = ScalarFunction::new(|x: f64| -(x - 2.0) * (x - 2.0));
        let m = grid_golden_maximize(&f, 0.0, 5.0, 64, 1e-12).unwrap();
        assert!((m.argmax - 2.0).abs() < 1e-9, "{}", m.argmax);
        assert!(m.evaluations <= 64 + 1 + 200 * 3);
    }

    #[test]
    fn monotone_maximum_at_upper_end() {
        let f = ScalarFunction::new(|x: f64| x.exp());
        let m = grid_golden_maximize(&f, -1.0, 3.0, 16, 1e-10).unwrap();
        assert_eq!(m.argmax, 3.0);
        assert_eq!(m.max, 3.0f64.exp());
    }

    #[test]
    fn picks_global_of_two_peaks() {
        let f = ScalarFunction::new(|x: f64| (-(x - 1.0).powi(2) * 20.0).exp() + 1.5 * (-(x - 4.0).powi(2) * 20.0).exp());
        let m = grid_golden_maximize(&f, 0.0, 5.0, 64, 1e-12).unwrap();
        assert!((m.argmax - 4.0).abs() < 1e-6);
    }

    #[test]
    fn maximizer_rejects_bad_arguments() {
        let f = ScalarFunction::new(|x: f64| x);
        assert!(grid_golden_maximize(&f, 1.0, 1.0, 64, 1e-9).is_err());
        assert!(grid_golden_maximize(&f, 0.0, 1.0, 4, 1e-9).is_err());
        let g = ScalarFunction::new(|x: f64| if x > 0.5 { f64::NAN } else { x });
        assert!(matches!(grid_golden_maximize(&g, 0.0, 1.0, 8, 1e-9), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn cubic_derivative() {
        let f = ScalarFunction::new(|x: f64| x * x * x);
        let d = central_derivative(&f, 2.0, 1e-5, 2).unwrap();
        assert!((d - 12.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn sine_at_zero_uses_absolute_step() {
        let f = ScalarFunction::new(|x: f64| x.sin());
        let d = central_derivative(&f, 0.0, 1e-5, 2).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_improves_order() {
        let f = ScalarFunction::new(|x: f64| x.exp());
        let e1 = (central_derivative(&f, 1.0, 1e-2, 1).unwrap() - 1f64.exp()).abs();
        let e3 = (central_derivative(&f, 1.0, 1e-2, 3).unwrap() - 1f64.exp()).abs();
        assert!(e3 < e1 * 1e-4, "{e1} {e3}");
        assert!(central_derivative(&f, 1.0, 1e-2, 5).is_err());
    }

    #[test]
    fn second_and_mixed() {
        let f = ScalarFunction::new(|x: f64| x.sin());
        let d2 = central_second_derivative(&f, 0.7, 1e-3, 3).unwrap();
        assert!((d2 + 0.7f64.sin()).abs() < 1e-8);
        let m = mixed_partial(|x: f64, y: f64| (x * y).exp(), 0.3, 1.2, 1e-3, 3).unwrap();
        let exact = (0.36f64).exp() * (1.0 + 0.36);
        assert!((m - exact).abs() < 1e-9 * exact, "{m} {exact}");
    }

    #[test]
    fn linear_root() {
        let f = ScalarFunction::new(|x: f64| x - 1.0);
        assert!((bracket_root(&f, 0.0, 2.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        let f = ScalarFunction::new(|x: f64| x * x);
        assert!(matches!(bracket_root(&f, -1.0, 2.0, 1e-12), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn root_with_infinite_end() {
        let f = ScalarFunction::new(|x: f64| if x >= 3.0 { f64::NEG_INFINITY } else { 1.0 - x });
        let r = bracket_root(&f, 0.0, 3.0, 1e-13).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn root_hard_case() {
        let f = ScalarFunction::new(|x: f64| x.powi(3) - 2.0 * x - 5.0);
        let r = bracket_root(&f, 2.0, 3.0, 1e-14).unwrap();
        assert!((r - 2.094_551_481_542_326_5).abs() < 1e-13);
        assert!(f.evaluations() < 20);
    }
}
