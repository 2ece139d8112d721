//! Built-in desk-scale reproduction presets.

use sparsetest::bench::{ModelKind, SPolicy};
use sparsetest::designs::DesignSpec;
use sparsetest::stats::StatKind;

use crate::config::RunConfig;

pub const PRESET_NAMES: &[&str] = &["fig1-desk", "fig2-desk"];

/// Look up a preset by name.
pub fn preset(name: &str) -> Option<RunConfig> {
    match name {
        "fig1-desk" => Some(fig1_desk()),
        "fig2-desk" => Some(fig2_desk()),
        _ => None,
    }
}

pub fn describe(name: &str) -> &'static str {
    match name {
        "fig1-desk" => {
            "identity p=10000 and gaussian n=2000 p=10000; sfem alpha=0.75 (S=10); \
             r in {0.0625, 0.125, 0.25, 0.5, 1}; anova/max/hc_disc; 200 trials"
        }
        "fig2-desk" => {
            "identity p=100000; sfem alpha=0.6 (S=100); r straddling the \
             hc/max gap {0.05, 0.1, 0.118, 0.135, 0.2}; anova/max/hc_disc; 200 trials"
        }
        _ => "",
    }
}

/// Risk-vs-rate curves at strong sparsity for the identity design and a
/// wide Gaussian design of the same width. The signal grid brackets the
/// alpha = 0.75 boundary at rho = 0.25.
fn fig1_desk() -> RunConfig {
    RunConfig {
        design: None,
        designs: vec![
            DesignSpec::Identity { p: 10_000 },
            DesignSpec::Gaussian { n: 2_000, p: 10_000 },
        ],
        model: ModelKind::Sfem,
        alpha_grid: vec![0.75],
        signal_grid: vec![0.0625, 0.125, 0.25, 0.5, 1.0],
        trials: 200,
        master_seed: 0,
        sigma: 1.0,
        sigma_known: true,
        tests: vec![StatKind::Anova, StatKind::Max, StatKind::HcDisc],
        s_policy: SPolicy::AdaptiveOne,
        fresh_design_per_trial: true,
    }
}

/// The moderately sparse regime where the max test is off the pace: at
/// alpha = 0.6 the sharp threshold sits at 0.1 and the max-test threshold
/// at 0.1351, so the rate grid straddles the gap.
fn fig2_desk() -> RunConfig {
    RunConfig {
        design: None,
        designs: vec![DesignSpec::Identity { p: 100_000 }],
        model: ModelKind::Sfem,
        alpha_grid: vec![0.6],
        signal_grid: vec![0.05, 0.1, 0.118, 0.135, 0.2],
        trials: 200,
        master_seed: 0,
        sigma: 1.0,
        sigma_known: true,
        tests: vec![StatKind::Anova, StatKind::Max, StatKind::HcDisc],
        s_policy: SPolicy::AdaptiveOne,
        fresh_design_per_trial: true,
    }
}
