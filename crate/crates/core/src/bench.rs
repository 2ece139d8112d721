//! Monte Carlo estimation of detection risk over (alpha, signal, test)
//! grids.
//!
//! Each grid cell runs `trials` independent trials. Trial `i` of cell `c`
//! draws every random object from a ChaCha stream keyed by
//! `(master_seed, c, i, purpose)`, so results are bit-identical no matter
//! how trials are scheduled; `run_cell` parallelizes trials with rayon and
//! still produces the same bytes at any thread count.
//!
//! Within a trial, the null and alternative observations use independent
//! noise streams: paired draws would bias the threshold sweep that follows.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternatives::{self, AlternativeSpec};
use crate::designs::{DesignMatrix, DesignSpec};
use crate::error::{Error, Result};
use crate::numfmt::sig10;
use crate::stats::{self, StatKind};

/// Which alternative family a grid samples from. The signal grid holds
/// rates `r` for the fixed-effects model and `tau` values for the
/// random-effects model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sfem,
    Srem,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Sfem => "sfem",
            ModelKind::Srem => "srem",
        }
    }
}

/// How the discrete higher criticism picks its grid start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SPolicy {
    /// `sqrt(2 min(1, 4 rho_star(alpha)) ln p)`; needs alpha in (1/2, 1].
    #[serde(rename = "theorem")]
    Theorem,
    /// `s = 1`: needs no knowledge of the sparsity exponent. The default.
    #[serde(rename = "adaptive-one")]
    AdaptiveOne,
    /// `s = sqrt(2 ln p)`, the max-test-like start.
    #[serde(rename = "sqrt2")]
    Sqrt2,
}

impl SPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SPolicy::Theorem => "theorem",
            SPolicy::AdaptiveOne => "adaptive-one",
            SPolicy::Sqrt2 => "sqrt2",
        }
    }
}

fn default_sigma() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_s_policy() -> SPolicy {
    SPolicy::AdaptiveOne
}

/// A full experiment grid: one design family, one alternative family, and
/// the Cartesian product of alpha values, signal values and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: DesignSpec,
    pub model: ModelKind,
    pub alpha_grid: Vec<f64>,
    pub signal_grid: Vec<f64>,
    pub trials: u32,
    #[serde(default)]
    pub master_seed: u64,
    /// Noise standard deviation. Signal levels are absolute, so with a
    /// known sigma != 1 the statistics are computed on `y / sigma` and the
    /// effective rate against unit noise is `r / sigma^2`.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// When false, statistics are computed on `y / sigma_hat` with the
    /// plug-in scale estimate instead of assuming the noise level.
    #[serde(default = "default_true")]
    pub sigma_known: bool,
    pub tests: Vec<StatKind>,
    #[serde(default = "default_s_policy")]
    pub s_policy: SPolicy,
    /// Resample the design for every trial (the default); otherwise one
    /// design per cell is built from the trial-0 stream and conditioned on.
    #[serde(default = "default_true")]
    pub fresh_design_per_trial: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        let (n, p) = self.design.dims();
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.alpha_grid.is_empty() || self.signal_grid.is_empty() || self.tests.is_empty() {
            return Err(Error::InvalidParameter(
                "alpha_grid, signal_grid and tests must be nonempty".into(),
            ));
        }
        if self.cell_count() > (1 << 24) {
            return Err(Error::InvalidParameter(
                "grid exceeds 2^24 cells; split the experiment".into(),
            ));
        }
        for (i, t) in self.tests.iter().enumerate() {
            if self.tests[..i].contains(t) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate test {}",
                    t.name()
                )));
            }
        }
        let theorem_hc = self.tests.contains(&StatKind::HcDisc)
            && self.s_policy == SPolicy::Theorem;
        for &alpha in &self.alpha_grid {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::InvalidParameter(format!(
                    "alpha {alpha} outside [0, 1]"
                )));
            }
            if theorem_hc && !(alpha > 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "alpha {alpha} outside (1/2, 1]: the theorem s-policy needs \
                     the sparse regime"
                )));
            }
        }
        for &s in &self.signal_grid {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "signal value {s} must be finite and >= 0"
                )));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !self.sigma_known && n < 2 {
            return Err(Error::InvalidParameter(
                "unknown-sigma runs need n >= 2 for the scale estimate".into(),
            ));
        }
        if self.model == ModelKind::Sfem && p < 2 {
            return Err(Error::InvalidParameter(
                "the rate parameterization needs p >= 2".into(),
            ));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.alpha_grid.len() * self.signal_grid.len() * self.tests.len()
    }

    fn cell_index(&self, alpha_idx: usize, signal_idx: usize, test_idx: usize) -> u32 {
        ((alpha_idx * self.signal_grid.len() + signal_idx) * self.tests.len() + test_idx) as u32
    }

    fn cell_label(&self, alpha_idx: usize, signal_idx: usize, test_idx: usize) -> String {
        format!(
            "{}[{}]/{}/alpha={}/signal={}/{}",
            self.design.name(),
            self.design.params(),
            self.model.name(),
            self.alpha_grid[alpha_idx],
            self.signal_grid[signal_idx],
            self.tests[test_idx].name()
        )
    }

    fn alternative(&self, alpha: f64, signal: f64) -> Result<AlternativeSpec> {
        let (_, p) = self.design.dims();
        let spec = match self.model {
            ModelKind::Sfem => AlternativeSpec::sfem_with_rate(p, alpha, signal)?,
            ModelKind::Srem => AlternativeSpec::srem(p, alpha, signal)?,
        };
        spec.with_sigma(self.sigma)
    }
}

#[derive(Clone, Copy)]
enum Purpose {
    Design = 0,
    Signal = 1,
    NullNoise = 2,
    AltNoise = 3,
}

/// One ChaCha stream per (cell, trial, purpose); the 64-bit stream id packs
/// cell (24 bits), trial (32 bits) and purpose (8 bits).
fn purpose_rng(master_seed: u64, cell: u32, trial: u32, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((cell as u64) << 40) | ((trial as u64) << 8) | purpose as u64);
    rng
}

/// Rescale a signal level for a constant-correlation design: boundaries
/// valid for orthogonal designs apply there at `signal / sqrt(1 - gamma)`.
pub fn zeta_rescale(signal: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "zeta_rescale needs gamma in [0, 1), got {gamma}"
        )));
    }
    Ok(signal / (1.0 - gamma).sqrt())
}

/// Standardize an observation before the statistic sees it. Known sigma
/// divides by it (sigma = 0 means an exact-signal run and is left alone);
/// unknown sigma divides by the plug-in estimate unless that estimate is
/// degenerate (y = 0).
fn prepare_observation(y: Vec<f64>, sigma: f64, sigma_known: bool) -> Result<Vec<f64>> {
    if sigma_known {
        if sigma > 0.0 && sigma != 1.0 {
            Ok(y.iter().map(|v| v / sigma).collect())
        } else {
            Ok(y)
        }
    } else {
        let est = stats::estimate_sigma(&y)?;
        if est.degenerate {
            Ok(y)
        } else {
            Ok(y.iter().map(|v| v / est.sigma_hat).collect())
        }
    }
}

fn statistic_value(
    test: StatKind,
    s_policy: SPolicy,
    alpha: f64,
    x: &DesignMatrix,
    y: &[f64],
) -> Result<f64> {
    let value = match test {
        StatKind::Anova => stats::anova_stat(x, y)?.value,
        StatKind::Max => stats::max_stat(x, y)?.value,
        StatKind::HcCont => stats::hc_continuous(&x.correlations(y)?)?.value,
        StatKind::HcDisc => {
            let s = match s_policy {
                SPolicy::Theorem => stats::hc_grid_start(alpha, x.p())?,
                SPolicy::AdaptiveOne => 1.0,
                SPolicy::Sqrt2 => (2.0 * (x.p() as f64).ln()).sqrt(),
            };
            stats::hc_discretized(&x.correlations(y)?, s)?.value
        }
    };
    Ok(value)
}

/// Run one grid cell and return the per-trial statistic values under the
/// null and under the alternative. Deterministic given the config; trials
/// run in parallel on the current rayon pool.
pub fn run_cell(
    config: &ExperimentConfig,
    alpha_idx: usize,
    signal_idx: usize,
    test_idx: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    let alpha = config.alpha_grid[alpha_idx];
    let signal = config.signal_grid[signal_idx];
    let test = config.tests[test_idx];
    let cell = config.cell_index(alpha_idx, signal_idx, test_idx);
    let label = config.cell_label(alpha_idx, signal_idx, test_idx);
    let alt_spec = config.alternative(alpha, signal)?;
    let sigma = config.sigma;

    let fixed_design: Option<DesignMatrix> = if config.fresh_design_per_trial {
        None
    } else {
        let seed = purpose_rng(config.master_seed, cell, 0, Purpose::Design).next_u64();
        Some(config.design.build(seed).map_err(|e| e.in_cell(&label, 0))?)
    };

    let samples: Vec<(f64, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<(f64, f64)> {
            let err = |e: Error| e.in_cell(&label, trial);

            let built;
            let x: &DesignMatrix = match &fixed_design {
                Some(x) => x,
                None => {
                    let seed =
                        purpose_rng(config.master_seed, cell, trial, Purpose::Design).next_u64();
                    built = config.design.build(seed).map_err(err)?;
                    &built
                }
            };

            let mut signal_rng = purpose_rng(config.master_seed, cell, trial, Purpose::Signal);
            let instance = alt_spec.sample_with_rng(&mut signal_rng);

            let mut null_rng = purpose_rng(config.master_seed, cell, trial, Purpose::NullNoise);
            let y_null = alternatives::noise_observation(x.n(), sigma, &mut null_rng);

            let mut alt_rng = purpose_rng(config.master_seed, cell, trial, Purpose::AltNoise);
            let y_alt =
                alternatives::synthesize_with_rng(x, &instance, sigma, &mut alt_rng).map_err(err)?;

            let y_null = prepare_observation(y_null, sigma, config.sigma_known).map_err(err)?;
            let y_alt = prepare_observation(y_alt, sigma, config.sigma_known).map_err(err)?;

            let s_null =
                statistic_value(test, config.s_policy, alpha, x, &y_null).map_err(err)?;
            let s_alt = statistic_value(test, config.s_policy, alpha, x, &y_alt).map_err(err)?;
            Ok((s_null, s_alt))
        })
        .collect::<Result<_>>()?;

    let null = samples.iter().map(|s| s.0).collect();
    let alt = samples.iter().map(|s| s.1).collect();
    Ok((null, alt))
}

/// Result of a threshold sweep over pooled samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSweep {
    /// Minimum over thresholds of (empirical type I + empirical type II).
    pub best_risk: f64,
    /// Largest threshold attaining the minimum; rejection is
    /// `statistic >= threshold`.
    pub best_threshold: f64,
}

/// Sweep rejection thresholds over +-infinity and the midpoints between
/// consecutive distinct pooled values, and return the best achievable
/// empirical risk. The sweep at +infinity has risk exactly 1, so the
/// result is always in [0, 1].
pub fn best_empirical_risk(null: &[f64], alt: &[f64]) -> Result<ThresholdSweep> {
    if null.is_empty() || alt.is_empty() {
        return Err(Error::InvalidParameter(
            "threshold sweep needs nonempty samples in both arms".into(),
        ));
    }
    if null.iter().chain(alt.iter()).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(
            "threshold sweep requires non-NaN statistics".into(),
        ));
    }
    let mut null_sorted = null.to_vec();
    null_sorted.sort_unstable_by(f64::total_cmp);
    let mut alt_sorted = alt.to_vec();
    alt_sorted.sort_unstable_by(f64::total_cmp);

    let mut pooled: Vec<f64> = null_sorted.iter().chain(alt_sorted.iter()).copied().collect();
    pooled.sort_unstable_by(f64::total_cmp);
    pooled.dedup();

    let n0 = null_sorted.len() as f64;
    let n1 = alt_sorted.len() as f64;
    let risk_at = |thr: f64| -> f64 {
        let type1 = (null_sorted.len() - null_sorted.partition_point(|&v| v < thr)) as f64 / n0;
        let type2 = alt_sorted.partition_point(|&v| v < thr) as f64 / n1;
        type1 + type2
    };

    let mut best_risk = f64::INFINITY;
    let mut best_threshold = f64::NEG_INFINITY;
    let mut consider = |thr: f64| {
        let r = risk_at(thr);
        // Scanned in ascending threshold order, so <= breaks ties toward
        // the largest threshold.
        if r <= best_risk {
            best_risk = r;
            best_threshold = thr;
        }
    };
    consider(f64::NEG_INFINITY);
    for w in pooled.windows(2) {
        consider(w[0] + (w[1] - w[0]) / 2.0);
    }
    consider(f64::INFINITY);

    Ok(ThresholdSweep {
        best_risk,
        best_threshold,
    })
}

/// Five-number summary of a statistic sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl StatSummary {
    pub fn from_samples(samples: &[f64]) -> StatSummary {
        let mut s = samples.to_vec();
        s.sort_unstable_by(f64::total_cmp);
        let q = |f: f64| -> f64 {
            let h = (s.len() - 1) as f64 * f;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        StatSummary {
            min: s[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: s[s.len() - 1],
        }
    }
}

/// One cell of benchmark output.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub test: StatKind,
    /// Grid-start policy; only meaningful for the discrete higher criticism.
    pub s_policy: Option<SPolicy>,
    pub alpha: f64,
    pub sparsity: usize,
    pub signal: f64,
    pub best_risk: f64,
    pub best_threshold: f64,
    pub n_trials: u32,
    /// Heuristic scale `sqrt(best_risk (2 - best_risk) / trials)`: the
    /// minimum over thresholds is not a binomial mean, so this is only an
    /// indicative error bar, not a confidence interval.
    pub standard_error: f64,
    pub null_summary: StatSummary,
    pub alt_summary: StatSummary,
}

/// Run the full Cartesian grid. Cells are emitted in (alpha, signal, test)
/// order; output is deterministic given the config at any rayon pool size.
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<RiskEstimate>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.cell_count());
    for (ai, &alpha) in config.alpha_grid.iter().enumerate() {
        let sparsity = alternatives::sparsity_from_alpha(config.design.dims().1, alpha)?;
        for (si, &signal) in config.signal_grid.iter().enumerate() {
            for (ti, &test) in config.tests.iter().enumerate() {
                let (null, alt) = run_cell(config, ai, si, ti)?;
                let sweep = best_empirical_risk(&null, &alt)?;
                let standard_error =
                    (sweep.best_risk * (2.0 - sweep.best_risk) / config.trials as f64).sqrt();
                out.push(RiskEstimate {
                    test,
                    s_policy: (test == StatKind::HcDisc).then_some(config.s_policy),
                    alpha,
                    sparsity,
                    signal,
                    best_risk: sweep.best_risk,
                    best_threshold: sweep.best_threshold,
                    n_trials: config.trials,
                    standard_error,
                    null_summary: StatSummary::from_samples(&null),
                    alt_summary: StatSummary::from_samples(&alt),
                });
            }
        }
    }
    Ok(out)
}

/// CSV header for [`results_to_csv`].
pub const RESULTS_CSV_HEADER: &str = "design,variant_params,model,alpha,S,signal,test,s_policy,\
                                      trials,best_risk,best_threshold,std_err,master_seed";

/// Render grid results as CSV, one row per cell, floats with 10 significant
/// digits. Byte-identical across reruns of the same config.
pub fn results_to_csv(config: &ExperimentConfig, rows: &[RiskEstimate]) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    out.push_str(&results_csv_rows(config, rows));
    out
}

/// The data rows of [`results_to_csv`] without the header, for callers that
/// concatenate several configs into one file.
pub fn results_csv_rows(config: &ExperimentConfig, rows: &[RiskEstimate]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            config.design.name(),
            config.design.params(),
            config.model.name(),
            sig10(r.alpha),
            r.sparsity,
            sig10(r.signal),
            r.test.name(),
            r.s_policy.map_or("-", |p| p.name()),
            r.n_trials,
            sig10(r.best_risk),
            sig10(r.best_threshold),
            sig10(r.standard_error),
            config.master_seed,
        ));
    }
    out
}

/// Check that, per (alpha, test) series, risk does not increase in the
/// signal beyond twice the combined error bars. Returns human-readable
/// warnings; sampling noise makes this advisory rather than fatal.
pub fn check_monotone_power(rows: &[RiskEstimate]) -> Vec<String> {
    let mut warnings = Vec::new();
    let mut series: Vec<(f64, StatKind)> = rows.iter().map(|r| (r.alpha, r.test)).collect();
    series.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.name().cmp(b.1.name())));
    series.dedup();
    for (alpha, test) in series {
        let mut pts: Vec<&RiskEstimate> = rows
            .iter()
            .filter(|r| r.alpha == alpha && r.test == test)
            .collect();
        pts.sort_by(|a, b| a.signal.total_cmp(&b.signal));
        for w in pts.windows(2) {
            let slack = 2.0 * w[0].standard_error.max(w[1].standard_error);
            if w[1].best_risk > w[0].best_risk + slack {
                warnings.push(format!(
                    "risk not monotone for {} at alpha={}: {} -> {} between signal {} and {}",
                    test.name(),
                    alpha,
                    sig10(w[0].best_risk),
                    sig10(w[1].best_risk),
                    sig10(w[0].signal),
                    sig10(w[1].signal)
                ));
            }
        }
    }
    warnings
}
