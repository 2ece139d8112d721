//! Closed-form detection boundaries for strongly sparse alternatives, and
//! the ANOVA power-scaling functional.
//!
//! All three curves live on the sparsity exponent axis. `rho_star` is the
//! sharp fixed-effects threshold, `rho_max` the (weaker) threshold of the
//! max statistic, `rho_rand` the random-effects threshold. The curves agree
//! on `[3/4, 1]` and separate on `(1/2, 3/4)`, which is exactly the regime
//! the benchmark grids probe.

use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::error::{Error, Result};

fn check_alpha(alpha: f64, what: &str) -> Result<()> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "{what} is defined on (1/2, 1], got alpha = {alpha}"
        )));
    }
    Ok(())
}

/// Sharp fixed-effects detection threshold:
/// `alpha - 1/2` on `(1/2, 3/4)` and `(1 - sqrt(1 - alpha))^2` on `[3/4, 1]`.
/// The two branches agree at `3/4`.
pub fn rho_star(alpha: f64) -> Result<f64> {
    check_alpha(alpha, "rho_star")?;
    if alpha < 0.75 {
        Ok(alpha - 0.5)
    } else {
        let t = 1.0 - (1.0 - alpha).sqrt();
        Ok(t * t)
    }
}

/// Threshold of the max statistic: `(1 - sqrt(1 - alpha))^2` on `(1/2, 1]`.
pub fn rho_max(alpha: f64) -> Result<f64> {
    check_alpha(alpha, "rho_max")?;
    let t = 1.0 - (1.0 - alpha).sqrt();
    Ok(t * t)
}

/// Where a random-effects threshold value sits relative to its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RandEdge {
    Interior,
    /// `alpha = 1/2`: the open-interval endpoint, returned by continuity.
    LowerBoundary,
    /// `alpha = 1`: the formula diverges; `value` is `f64::INFINITY`.
    Infinite,
}

/// `rho_rand` result: the value plus an edge flag callers must branch on
/// before treating the value as finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandBoundary {
    pub value: f64,
    pub edge: RandEdge,
}

/// Random-effects detection threshold `sqrt(alpha / (1 - alpha))`.
///
/// Defined on `(1/2, 1)`; `alpha = 1/2` returns 1 with a boundary flag, and
/// `alpha = 1` returns an explicit infinity sentinel instead of an error.
pub fn rho_rand(alpha: f64) -> Result<RandBoundary> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "rho_rand is defined on [1/2, 1], got alpha = {alpha}"
        )));
    }
    if alpha == 0.5 {
        return Ok(RandBoundary {
            value: 1.0,
            edge: RandEdge::LowerBoundary,
        });
    }
    if alpha == 1.0 {
        return Ok(RandBoundary {
            value: f64::INFINITY,
            edge: RandEdge::Infinite,
        });
    }
    Ok(RandBoundary {
        value: (alpha / (1.0 - alpha)).sqrt(),
        edge: RandEdge::Interior,
    })
}

/// One row of a boundary table. `rho_rand` is `f64::INFINITY` at
/// `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub alpha: f64,
    pub rho_star: f64,
    pub rho_max: f64,
    pub rho_rand: f64,
}

/// Evaluate all three curves at one exponent in `(1/2, 1]`.
pub fn boundary_point(alpha: f64) -> Result<BoundaryPoint> {
    Ok(BoundaryPoint {
        alpha,
        rho_star: rho_star(alpha)?,
        rho_max: rho_max(alpha)?,
        rho_rand: rho_rand(alpha)?.value,
    })
}

/// The scaling `||X beta||^2 / sqrt(min(n, p))` that separates the regimes
/// where the chi-square test is powerful (large values) from powerless
/// (vanishing values). The caller compares against its own thresholds.
pub fn anova_power_scaling(x: &DesignMatrix, beta: &[f64]) -> Result<f64> {
    let xb = x.apply(beta)?;
    let energy: f64 = xb.iter().map(|v| v * v).sum();
    Ok(energy / (x.n().min(x.p()) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::DesignSpec;
    use approx::assert_relative_eq;

    #[test]
    fn rho_star_branch_values() {
        assert_relative_eq!(rho_star(0.75).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(rho_star(0.6).unwrap(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(rho_star(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(rho_star(0.5).is_err());
        assert!(rho_star(1.01).is_err());
    }

    #[test]
    fn rho_max_values() {
        assert_relative_eq!(rho_max(0.75).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(rho_max(1.0).unwrap(), 1.0, epsilon = 1e-15);
        // (1 - sqrt(0.4))^2 = 0.1350889359326483 (oracle).
        assert_relative_eq!(rho_max(0.6).unwrap(), 0.1350889359326483, epsilon = 1e-12);
    }

    #[test]
    fn rho_rand_values_and_edges() {
        let b = rho_rand(0.5).unwrap();
        assert_eq!(b.edge, RandEdge::LowerBoundary);
        assert_eq!(b.value, 1.0);

        let b = rho_rand(0.8).unwrap();
        assert_eq!(b.edge, RandEdge::Interior);
        assert_relative_eq!(b.value, 2.0, epsilon = 1e-12);

        assert_relative_eq!(rho_rand(0.9).unwrap().value, 3.0, epsilon = 1e-12);

        let b = rho_rand(1.0).unwrap();
        assert_eq!(b.edge, RandEdge::Infinite);
        assert!(b.value.is_infinite());

        assert!(rho_rand(0.49).is_err());
        assert!(rho_rand(1.2).is_err());
    }

    #[test]
    fn ordering_and_equality_regions() {
        // rho_star <= rho_max everywhere, equal exactly on [3/4, 1].
        let mut alpha: f64 = 0.501;
        while alpha <= 1.0 + 1e-12 {
            let a = alpha.min(1.0);
            let s = rho_star(a).unwrap();
            let m = rho_max(a).unwrap();
            assert!(s <= m + 1e-15, "alpha={a}: {s} > {m}");
            if a >= 0.75 {
                assert_relative_eq!(s, m, epsilon = 1e-15);
            } else {
                assert!(m - s > 1e-12, "expected strict gap at alpha={a}");
            }
            alpha += 1e-3;
        }
    }

    #[test]
    fn continuity_at_branch_point() {
        let h = 1e-6;
        let left = rho_star(0.75 - h).unwrap();
        let right = rho_star(0.75 + h).unwrap();
        assert!((left - right).abs() < 1e-5);
    }

    #[test]
    fn curves_nondecreasing() {
        let mut prev: Option<(f64, f64, f64)> = None;
        let mut alpha = 0.505;
        while alpha < 0.9999 {
            let s = rho_star(alpha).unwrap();
            let m = rho_max(alpha).unwrap();
            let r = rho_rand(alpha).unwrap().value;
            if let Some((ps, pm, pr)) = prev {
                assert!(s >= ps - 1e-15);
                assert!(m >= pm - 1e-15);
                assert!(r >= pr - 1e-15);
            }
            prev = Some((s, m, r));
            alpha += 1e-3;
        }
    }

    #[test]
    fn power_scaling_examples() {
        let x = DesignSpec::Identity { p: 100 }.build(0).unwrap();
        let zero = vec![0.0; 100];
        assert_eq!(anova_power_scaling(&x, &zero).unwrap(), 0.0);

        // S = 10 entries of amplitude 2: ||beta||^2 = 40, sqrt(min) = 10.
        let mut beta = vec![0.0; 100];
        for j in 0..10 {
            beta[j] = 2.0;
        }
        assert_relative_eq!(anova_power_scaling(&x, &beta).unwrap(), 4.0, epsilon = 1e-12);

        // Identity with S ones: S / sqrt(p).
        let mut ones = vec![0.0; 100];
        for j in 0..7 {
            ones[j] = 1.0;
        }
        assert_relative_eq!(
            anova_power_scaling(&x, &ones).unwrap(),
            7.0 / 10.0,
            epsilon = 1e-12
        );
    }
}
