//! The one-layer erasure recurrence `f(t)` and its fixed-point structure.
//!
//! With `p` the retrieval probability of the child layer, `q` the probability
//! that a child is *not* wired to a given parent, and `n` the parent layer
//! width, the expected erased fraction of the child layer given a parent
//! erased fraction `t` is
//!
//! ```text
//! f(t) = (1 - p) q^n (q^(-n t) - 1 + t) + p
//! ```
//!
//! `g(t) = f(t) - t` starts at `g(0) = p`, ends at `g(1) = 0`, and is convex.
//! When `p < h(q, n) = 1 - 1 / (q^n - n ln q)` it dips below zero, so the
//! cascade stalls at the first zero `t_hat`.

use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Default absolute tolerance on `|g(t_hat)|`.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Bisection iteration cap.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Number of interior points used to confirm `g < 0` on `(t_hat, 1)`.
const SIGN_GRID: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceParams {
    pub p: f64,
    pub q: f64,
    pub n: u32,
}

impl RecurrenceParams {
    pub fn new(p: f64, q: f64, n: u32) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return domain(format!("retrieval probability p={p} must lie in [0, 1)"));
        }
        check_q_n(q, n)?;
        Ok(Self { p, q, n })
    }

    fn qn(&self) -> f64 {
        self.q.powi(self.n as i32)
    }

    fn n_ln_q(&self) -> f64 {
        self.n as f64 * self.q.ln()
    }
}

pub(crate) fn check_q_n(q: f64, n: u32) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("non-connection probability q={q} must lie in (0, 1)"));
    }
    if n == 0 {
        return domain("parent layer width n must be at least 1");
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("erased fraction t={t} must lie in [0, 1]"));
    }
    Ok(())
}

/// Expected erased fraction of the child layer given parent fraction `t`.
pub fn eval_f(t: f64, params: &RecurrenceParams) -> Result<f64> {
    check_t(t)?;
    Ok(f_unchecked(t, params))
}

pub fn eval_g(t: f64, params: &RecurrenceParams) -> Result<f64> {
    check_t(t)?;
    Ok(g_unchecked(t, params))
}

/// `g'(t) = (1 - p) q^n (1 - n q^(-n t) ln q) - 1`.
pub fn eval_g_prime(t: f64, params: &RecurrenceParams) -> Result<f64> {
    check_t(t)?;
    let RecurrenceParams { p, q, n } = *params;
    let n = n as f64;
    Ok((1.0 - p) * params.qn() * (1.0 - n * q.powf(-n * t) * q.ln()) - 1.0)
}

fn f_unchecked(t: f64, params: &RecurrenceParams) -> f64 {
    let RecurrenceParams { p, q, n } = *params;
    let n = n as f64;
    (1.0 - p) * params.qn() * (q.powf(-n * t) - 1.0 + t) + p
}

fn g_unchecked(t: f64, params: &RecurrenceParams) -> f64 {
    f_unchecked(t, params) - t
}

/// Raw stationary point of `g`, `1 + ln((p-1) n ln q / (1 - (1-p) q^n)) / (n ln q)`.
///
/// This may fall outside `[0, 1]`; see [`critical_point`].
pub fn critical_point_raw(params: &RecurrenceParams) -> f64 {
    let RecurrenceParams { p, .. } = *params;
    let n_ln_q = params.n_ln_q();
    let ratio = (p - 1.0) * n_ln_q / (1.0 - (1.0 - p) * params.qn());
    1.0 + ratio.ln() / n_ln_q
}

/// Location of the minimum of `g`, if it lies strictly inside `(0, 1)`.
pub fn critical_point(params: &RecurrenceParams) -> Option<f64> {
    let t = critical_point_raw(params);
    (t > 0.0 && t < 1.0).then_some(t)
}

/// Fission threshold `h(q, n) = 1 - 1 / (q^n - n ln q)`.
///
/// `ln q^n` and `n ln q` are the same quantity; the latter is what gets
/// evaluated. As `q -> 1` the threshold tends to 0.
pub fn threshold_h(q: f64, n: u32) -> Result<f64> {
    check_q_n(q, n)?;
    let n_f = n as f64;
    Ok(1.0 - 1.0 / (q.powi(n as i32) - n_f * q.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub params: RecurrenceParams,
    pub threshold_h: f64,
    /// `p < h(q, n)`.
    pub has_fixed_point: bool,
    /// Set when `p = 0`, where `t_hat = 0` is a boundary fixed point.
    pub degenerate: bool,
    pub critical_t: Option<f64>,
    pub t_hat: Option<f64>,
    pub residual: Option<f64>,
    /// `g < 0` held on every interior grid point of `(t_hat, 1)`.
    pub negative_beyond: bool,
}

impl FixedPointReport {
    /// First zero of `g` on `[0, 1]`: `t_hat` when it exists, otherwise the
    /// trivial zero at `t = 1` (the cascade saturates).
    pub fn first_zero_or_one(&self) -> f64 {
        self.t_hat.unwrap_or(1.0)
    }
}

/// Locates the first zero of `g` on `(0, 1)` by bisection on `[0, t*]`.
pub fn first_zero(params: &RecurrenceParams, tol: f64) -> Result<FixedPointReport> {
    if !(tol > 0.0) {
        return domain(format!("tolerance {tol} must be positive"));
    }
    let h = threshold_h(params.q, params.n)?;
    let critical_t = critical_point(params);
    let mut report = FixedPointReport {
        params: *params,
        threshold_h: h,
        has_fixed_point: params.p < h,
        degenerate: false,
        critical_t,
        t_hat: None,
        residual: None,
        negative_beyond: false,
    };
    if !report.has_fixed_point {
        return Ok(report);
    }
    if params.p == 0.0 {
        report.degenerate = true;
        report.t_hat = Some(0.0);
        report.residual = Some(0.0);
        report.negative_beyond = negative_on_grid(params, 0.0);
        return Ok(report);
    }
    let Some(upper) = critical_t else {
        return Err(Error::Numeric(format!(
            "p={} < h={h} but the minimum of g is not inside (0, 1)",
            params.p
        )));
    };

    let (mut lo, mut hi) = (0.0_f64, upper);
    let mut mid = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..MAX_BISECTION_ITERS {
        mid = 0.5 * (lo + hi);
        let g = g_unchecked(mid, params);
        if g.abs() <= tol {
            converged = true;
            break;
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let residual = g_unchecked(mid, params).abs();
    if !converged && residual > tol {
        return Err(Error::Numeric(format!(
            "bisection stalled at t={mid} with |g|={residual:e} > {tol:e}"
        )));
    }
    report.t_hat = Some(mid);
    report.residual = Some(residual);
    report.negative_beyond = negative_on_grid(params, mid);
    Ok(report)
}

fn negative_on_grid(params: &RecurrenceParams, t_hat: f64) -> bool {
    let width = 1.0 - t_hat;
    (1..=SIGN_GRID).all(|k| {
        let t = t_hat + width * k as f64 / (SIGN_GRID + 1) as f64;
        g_unchecked(t, params) < 0.0
    })
}
