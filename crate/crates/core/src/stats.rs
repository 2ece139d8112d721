//! Test statistics for the global null: the chi-square (ANOVA) statistic,
//! the max statistic, and the higher criticism applied to the column
//! correlations `X^T y`, plus the plug-in noise-scale estimator used when
//! the variance is unknown.
//!
//! Rejection is one-sided for every statistic: large values reject.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::boundaries::rho_star;
use crate::designs::DesignMatrix;
use crate::error::{Error, Result};

/// Standard normal survival function `P(N(0,1) > t)`.
///
/// Evaluated through the complementary error function, which keeps the
/// relative error at the ulp level across the whole tail and underflows
/// gracefully past `t ~ 38`.
pub fn gaussian_survival(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// Which statistic a [`TestOutcome`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// Squared norm of the projection of `y` onto the column space of `X`.
    Anova,
    /// `max_j |x_j^T y|`.
    Max,
    /// Higher criticism maximized over a data-driven threshold set.
    HcCont,
    /// Higher criticism maximized over an integer threshold grid.
    HcDisc,
}

impl StatKind {
    pub fn name(&self) -> &'static str {
        match self {
            StatKind::Anova => "anova",
            StatKind::Max => "max",
            StatKind::HcCont => "hc_cont",
            StatKind::HcDisc => "hc_disc",
        }
    }
}

/// Extra information attached to a statistic value.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeDetail {
    /// Smallest index attaining the max statistic (0-based).
    ArgmaxIndex(usize),
    /// Threshold attaining the higher-criticism max.
    ArgmaxThreshold(f64),
    /// The projection ran against a column space of deficient rank; the
    /// rank is reported when the factorization reveals it.
    RankDeficient { rank: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub kind: StatKind,
    pub value: f64,
    pub detail: Option<OutcomeDetail>,
}

// ---------------------------------------------------------------------------
// ANOVA
// ---------------------------------------------------------------------------

/// `||P y||^2` where `P` projects onto the column space of `X`, computed
/// through a least-squares solve rather than an explicit projector.
///
/// Designs whose construction guarantees orthonormal columns take the
/// `||X^T y||^2` shortcut. Otherwise a column-pivoted QR handles `p <= n`
/// and a conjugate-gradient least-squares iteration handles `p > n`; both
/// remain well defined for rank-deficient input and flag it in the detail.
pub fn anova_stat(x: &DesignMatrix, y: &[f64]) -> Result<TestOutcome> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, design has n={}",
            y.len(),
            x.n()
        )));
    }
    let (value, detail) = if x.has_orthonormal_columns() {
        let v = x.correlations(y)?;
        (v.iter().map(|t| t * t).sum(), None)
    } else if x.p() <= x.n() {
        qr_projection_sq(x, y)
    } else {
        cgls_projection_sq(x, y)
    };
    Ok(TestOutcome {
        kind: StatKind::Anova,
        value,
        detail,
    })
}

fn qr_projection_sq(x: &DesignMatrix, y: &[f64]) -> (f64, Option<OutcomeDetail>) {
    let m = x.dense().expect("non-orthonormal designs are dense");
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let k = x.n().min(x.p());
    let tol = f64::EPSILON * (x.n().max(x.p()) as f64) * r[(0, 0)].abs();
    let mut rank = 0;
    for i in 0..k {
        if r[(i, i)].abs() > tol {
            rank += 1;
        } else {
            break;
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().tr_mul(&yv);
    let value = qty.iter().take(rank).map(|t| t * t).sum();
    let detail = (rank < x.p()).then_some(OutcomeDetail::RankDeficient { rank: Some(rank) });
    (value, detail)
}

/// CGLS on `min_b ||X b - y||`; the converged residual `r` yields the
/// projection as `y - r`. Cost is `O(n p)` per iteration, and the iteration
/// count is governed by the conditioning of `X X^T`, which is mild for every
/// wide design family built here.
fn cgls_projection_sq(x: &DesignMatrix, y: &[f64]) -> (f64, Option<OutcomeDetail>) {
    let m = x.dense().expect("wide designs are dense");
    let yv = DVector::from_column_slice(y);
    let y_norm = yv.norm();
    if y_norm == 0.0 {
        return (0.0, None);
    }

    let mut resid = yv.clone();
    let mut s = m.tr_mul(&resid);
    let mut s_norm_sq = s.norm_squared();
    let mut dir = s.clone();
    let mut q = DVector::zeros(x.n());
    // Columns are unit norm, so ||X||_F = sqrt(p) exactly.
    let x_fro = (x.p() as f64).sqrt();
    let max_iter = 2 * x.n().min(x.p()) + 200;
    let mut stall = 0u32;
    let mut prev_rnorm = f64::INFINITY;

    for _ in 0..max_iter {
        if s_norm_sq == 0.0 {
            break;
        }
        q.gemv(1.0, m, &dir, 0.0);
        let q_norm_sq = q.norm_squared();
        if q_norm_sq == 0.0 {
            break;
        }
        let alpha = s_norm_sq / q_norm_sq;
        resid.axpy(-alpha, &q, 1.0);

        let rnorm = resid.norm();
        if rnorm <= 1e-14 * y_norm {
            break;
        }
        s = m.tr_mul(&resid);
        let s_norm_sq_next = s.norm_squared();
        if s_norm_sq_next.sqrt() <= 1e-13 * x_fro * rnorm {
            break;
        }
        if rnorm >= prev_rnorm * (1.0 - 1e-15) {
            stall += 1;
            if stall >= 5 {
                break;
            }
        } else {
            stall = 0;
        }
        prev_rnorm = rnorm;

        let beta = s_norm_sq_next / s_norm_sq;
        dir *= beta;
        dir += &s;
        s_norm_sq = s_norm_sq_next;
    }

    let value = (&yv - &resid).norm_squared();
    let rel_res = resid.norm() / y_norm;
    // For p > n a nonzero converged residual means the columns do not span
    // R^n, i.e. the design is rank deficient.
    let detail =
        (rel_res > 1e-6).then_some(OutcomeDetail::RankDeficient { rank: None });
    (value, detail)
}

// ---------------------------------------------------------------------------
// Max statistic
// ---------------------------------------------------------------------------

/// `max_j |x_j^T y|` with the smallest attaining index in the detail.
pub fn max_stat(x: &DesignMatrix, y: &[f64]) -> Result<TestOutcome> {
    let v = x.correlations(y)?;
    let mut best = 0.0f64;
    let mut idx = 0usize;
    for (j, val) in v.iter().enumerate() {
        let a = val.abs();
        if a > best {
            best = a;
            idx = j;
        }
    }
    Ok(TestOutcome {
        kind: StatKind::Max,
        value: best,
        detail: Some(OutcomeDetail::ArgmaxIndex(idx)),
    })
}

// ---------------------------------------------------------------------------
// Higher criticism
// ---------------------------------------------------------------------------

/// The higher-criticism objective at threshold `t`:
/// `(N(t) - 2 p F(t)) / sqrt(2 p F(t) (1 - 2 F(t)))` with `F` the normal
/// survival function and `N(t)` the exceedance count. Returns `None` where
/// the denominator is unusable: `t <= 0`, `F(t)` too close to 1/2, or a
/// variance below 1e-300.
fn h_value(exceed: usize, p: usize, t: f64) -> Option<f64> {
    if t <= 0.0 {
        return None;
    }
    let sf = gaussian_survival(t);
    if sf > 0.5 - 1e-9 {
        return None;
    }
    let mean = 2.0 * p as f64 * sf;
    let var = mean * (1.0 - 2.0 * sf);
    if var < 1e-300 {
        return None;
    }
    Some((exceed as f64 - mean) / var.sqrt())
}

/// `#{i : sorted_abs[i] > t}` for an ascending-sorted slice.
pub(crate) fn count_above(sorted_abs: &[f64], t: f64) -> usize {
    sorted_abs.len() - sorted_abs.partition_point(|&a| a <= t)
}

/// Upper end `sqrt(5 ln p)` of the discrete threshold grid.
fn hc_grid_upper(p: usize) -> f64 {
    (5.0 * (p as f64).ln()).sqrt()
}

fn best_over<I: IntoIterator<Item = f64>>(
    sorted_abs: &[f64],
    p: usize,
    candidates: I,
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for t in candidates {
        if let Some(h) = h_value(count_above(sorted_abs, t), p, t) {
            let better = match best {
                None => true,
                Some((bh, bt)) => h > bh || (h == bh && t < bt),
            };
            if better {
                best = Some((h, t));
            }
        }
    }
    best
}

/// Higher criticism over a data-driven threshold set: each `|v_i|` nudged
/// down by a relative 1e-9 (so the count at a data point is inclusive) plus
/// 512 uniform grid points on `(0, max |v_i|]`. All-zero input falls back to
/// a grid on `(0, max(1, sqrt(5 ln p))]`, where every count is zero and the
/// statistic is negative.
pub fn hc_continuous(v: &[f64]) -> Result<TestOutcome> {
    let p = v.len();
    if p == 0 {
        return Err(Error::InvalidParameter("hc_continuous needs p >= 1".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "hc_continuous requires finite statistics".into(),
        ));
    }
    let mut abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    abs.sort_unstable_by(f64::total_cmp);
    let vmax = *abs.last().expect("nonempty");

    let data_points = abs.iter().map(|a| a * (1.0 - 1e-9));
    let fine = (1..=512).map(|k| vmax * (k as f64) / 512.0);
    let mut best = best_over(&abs, p, data_points.chain(fine));

    if best.is_none() {
        let upper = hc_grid_upper(p).max(1.0);
        best = best_over(&abs, p, (1..=512).map(|k| upper * (k as f64) / 512.0));
    }
    let (value, t) = best.expect("fallback grid always contains usable thresholds");
    Ok(TestOutcome {
        kind: StatKind::HcCont,
        value,
        detail: Some(OutcomeDetail::ArgmaxThreshold(t)),
    })
}

/// Higher criticism over the integer grid `[max(1, ceil(s)), floor(sqrt(5 ln p))]`
/// (inclusive endpoints, positive integers).
pub fn hc_discretized(v: &[f64], s: f64) -> Result<TestOutcome> {
    let p = v.len();
    if p == 0 {
        return Err(Error::InvalidParameter(
            "hc_discretized needs p >= 1".into(),
        ));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!(
            "grid start must be finite and >= 0, got {s}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "hc_discretized requires finite statistics".into(),
        ));
    }
    let upper = hc_grid_upper(p);
    let t_max = upper.floor() as i64;
    let t_min = (s.ceil() as i64).max(1);
    if t_min > t_max {
        return Err(Error::EmptyGrid(format!(
            "no integer thresholds in [max(1, ceil({s})), floor({upper:.4})] for p={p}"
        )));
    }
    let mut abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    abs.sort_unstable_by(f64::total_cmp);

    let best = best_over(&abs, p, (t_min..=t_max).map(|t| t as f64));
    let (value, t) = best.expect("integer thresholds below sqrt(5 ln p) are always usable");
    Ok(TestOutcome {
        kind: StatKind::HcDisc,
        value,
        detail: Some(OutcomeDetail::ArgmaxThreshold(t)),
    })
}

/// Grid start `sqrt(2 min(1, 4 rho_star(alpha)) ln p)` for the
/// sparsity-aware discrete higher criticism; requires `alpha` in `(1/2, 1]`.
pub fn hc_grid_start(alpha: f64, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain("hc_grid_start requires p >= 2".into()));
    }
    let r_alpha = (4.0 * rho_star(alpha)?).min(1.0);
    Ok((2.0 * r_alpha * (p as f64).ln()).sqrt())
}

// ---------------------------------------------------------------------------
// Unknown variance
// ---------------------------------------------------------------------------

/// The plug-in scale estimate `||y|| (1/sqrt(n) + t_n/n)` with the slowly
/// growing slack `t_n = ln n`; slightly upward biased by construction so
/// that statistics computed on `y / sigma_hat` keep their null calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub sigma_hat: f64,
    /// Slack sequence value `ln n`.
    pub t_n: f64,
    /// Relative upward bias `t_n / sqrt(n)`.
    pub a_n: f64,
    pub n: usize,
    /// Set when `y = 0`, which yields `sigma_hat = 0`.
    pub degenerate: bool,
}

pub fn estimate_sigma(y: &[f64]) -> Result<VarianceEstimate> {
    let n = y.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "estimate_sigma requires n >= 2, got {n}"
        )));
    }
    let nf = n as f64;
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let t_n = nf.ln();
    let sigma_hat = norm * (1.0 / nf.sqrt() + t_n / nf);
    Ok(VarianceEstimate {
        sigma_hat,
        t_n,
        a_n: t_n / nf.sqrt(),
        n,
        degenerate: sigma_hat == 0.0,
    })
}
