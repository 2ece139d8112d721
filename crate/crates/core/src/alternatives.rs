//! Sparse alternatives: fixed-effects (`+-A` on a random support) and
//! random-effects (`N(0, tau^2)` on a random support) coefficient vectors,
//! plus observation synthesis `y = X beta + sigma z`.
//!
//! All sampling is deterministic given `(spec, seed)`; the benchmark layer
//! derives one seed per (cell, trial, purpose) so trials are reproducible
//! under any execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::error::{Error, Result};
use crate::numfmt::full17;

/// Nonzero count `S = max(1, round(p^(1-alpha)))` for a sparsity exponent
/// `alpha` in [0, 1]. Round-to-nearest keeps `S = sqrt(p)` exact for
/// perfect squares; the floor of 1 keeps the alternative nonempty.
pub fn sparsity_from_alpha(p: usize, alpha: f64) -> Result<usize> {
    if p == 0 {
        return Err(Error::Domain("p must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "sparsity exponent must lie in [0, 1], got {alpha}"
        )));
    }
    let s = (p as f64).powf(1.0 - alpha).round();
    Ok((s as usize).clamp(1, p))
}

/// Amplitude `A = sqrt(2 r ln p)` for the signal-rate parameterization.
pub fn amplitude_from_r(p: usize, r: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain(format!(
            "amplitude_from_r requires p >= 2 so that ln p > 0, got {p}"
        )));
    }
    if r < 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("rate must be finite and >= 0, got {r}")));
    }
    Ok((2.0 * r * (p as f64).ln()).sqrt())
}

/// Distribution of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SignalModel {
    /// Fixed effects: every nonzero equals `+-amplitude` with independent
    /// random signs.
    Sfem { amplitude: f64 },
    /// Random effects: nonzeros are i.i.d. centered normal with standard
    /// deviation `tau`.
    Srem { tau: f64 },
}

/// A fully parameterized alternative: dimension, sparsity and signal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    pub p: usize,
    pub alpha: f64,
    /// Cached `sparsity_from_alpha(p, alpha)`.
    pub sparsity: usize,
    pub model: SignalModel,
    /// Noise standard deviation used when synthesizing observations.
    pub sigma: f64,
}

impl AlternativeSpec {
    fn new(p: usize, alpha: f64, model: SignalModel) -> Result<Self> {
        let sparsity = sparsity_from_alpha(p, alpha)?;
        match model {
            SignalModel::Sfem { amplitude } if !(amplitude >= 0.0 && amplitude.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "amplitude must be finite and >= 0, got {amplitude}"
                )));
            }
            SignalModel::Srem { tau } if !(tau >= 0.0 && tau.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "tau must be finite and >= 0, got {tau}"
                )));
            }
            _ => {}
        }
        Ok(AlternativeSpec {
            p,
            alpha,
            sparsity,
            model,
            sigma: 1.0,
        })
    }

    /// Fixed-effects alternative with the amplitude given directly.
    pub fn sfem_with_amplitude(p: usize, alpha: f64, amplitude: f64) -> Result<Self> {
        Self::new(p, alpha, SignalModel::Sfem { amplitude })
    }

    /// Fixed-effects alternative parameterized by the rate `r`, so that the
    /// amplitude is `sqrt(2 r ln p)`.
    pub fn sfem_with_rate(p: usize, alpha: f64, r: f64) -> Result<Self> {
        let amplitude = amplitude_from_r(p, r)?;
        Self::new(p, alpha, SignalModel::Sfem { amplitude })
    }

    /// Random-effects alternative with nonzero standard deviation `tau`.
    pub fn srem(p: usize, alpha: f64, tau: f64) -> Result<Self> {
        Self::new(p, alpha, SignalModel::Srem { tau })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn model_name(&self) -> &'static str {
        match self.model {
            SignalModel::Sfem { .. } => "sfem",
            SignalModel::Srem { .. } => "srem",
        }
    }

    /// The SFEM amplitude, or the SREM `tau`.
    pub fn signal_scale(&self) -> f64 {
        match self.model {
            SignalModel::Sfem { amplitude } => amplitude,
            SignalModel::Srem { tau } => tau,
        }
    }

    /// The rate `r = A^2 / (2 ln p)` implied by an SFEM amplitude.
    pub fn rate(&self) -> Option<f64> {
        match self.model {
            SignalModel::Sfem { amplitude } if self.p >= 2 => {
                Some(amplitude * amplitude / (2.0 * (self.p as f64).ln()))
            }
            _ => None,
        }
    }

    /// Draw one coefficient vector. Deterministic given `(self, seed)`.
    pub fn sample(&self, seed: u64) -> SignalInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with_rng(&mut rng)
    }

    pub(crate) fn sample_with_rng(&self, rng: &mut ChaCha8Rng) -> SignalInstance {
        let mut support = rand::seq::index::sample(rng, self.p, self.sparsity).into_vec();
        support.sort_unstable();
        let mut beta = vec![0.0; self.p];
        match self.model {
            SignalModel::Sfem { amplitude } => {
                for &j in &support {
                    beta[j] = if rng.random::<bool>() {
                        amplitude
                    } else {
                        -amplitude
                    };
                }
            }
            SignalModel::Srem { tau } => {
                for &j in &support {
                    let z: f64 = StandardNormal.sample(rng);
                    beta[j] = tau * z;
                }
            }
        }
        SignalInstance { beta, support }
    }
}

/// One sampled coefficient vector with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalInstance {
    /// Length-p coefficients; entries off the support are exactly zero.
    pub beta: Vec<f64>,
    /// Sorted indices of the nonzero coefficients (0-based), `|support| = S`.
    pub support: Vec<usize>,
}

impl SignalInstance {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Sparse CSV export: a metadata header, then `index,value` rows for the
    /// support only. Indices are 0-based; values carry full f64 precision.
    pub fn to_csv(&self, spec: &AlternativeSpec) -> String {
        let mut out = String::new();
        let signal_field = match spec.model {
            SignalModel::Sfem { amplitude } => format!("amplitude={amplitude}"),
            SignalModel::Srem { tau } => format!("tau={tau}"),
        };
        out.push_str(&format!(
            "p={},S={},model={},alpha={},{},sigma={}\n",
            spec.p,
            spec.sparsity,
            spec.model_name(),
            spec.alpha,
            signal_field,
            spec.sigma
        ));
        out.push_str("index,value\n");
        for &j in &self.support {
            out.push_str(&format!("{},{}\n", j, full17(self.beta[j])));
        }
        out
    }

    /// Parse a payload written by [`to_csv`](Self::to_csv).
    pub fn from_csv_str(s: &str) -> Result<SignalInstance> {
        let mut lines = s.lines().enumerate();
        let (_, meta) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing metadata header".into(),
        })?;
        let mut p: Option<usize> = None;
        for field in meta.split(',') {
            if let Some(v) = field.trim().strip_prefix("p=") {
                p = Some(v.parse().map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad p: {e}"),
                })?);
            }
        }
        let p = p.ok_or(Error::Parse {
            line: 1,
            message: "metadata header lacks p=".into(),
        })?;
        match lines.next() {
            Some((_, h)) if h.trim() == "index,value" => {}
            _ => {
                return Err(Error::Parse {
                    line: 2,
                    message: "expected `index,value` header".into(),
                })
            }
        }
        let mut beta = vec![0.0; p];
        let mut support = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (i_str, v_str) = line.split_once(',').ok_or(Error::Parse {
                line: idx + 1,
                message: "expected `index,value`".into(),
            })?;
            let j: usize = i_str.trim().parse().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad index: {e}"),
            })?;
            if j >= p {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("index {j} out of range for p={p}"),
                });
            }
            let v: f64 = v_str.trim().parse().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad value: {e}"),
            })?;
            beta[j] = v;
            support.push(j);
        }
        support.sort_unstable();
        support.dedup();
        Ok(SignalInstance { beta, support })
    }
}

/// Synthesize `y = X beta + sigma z` with `z` i.i.d. standard normal.
/// `sigma = 0` returns the exact signal part. Deterministic given the seed.
pub fn synthesize_observation(
    x: &DesignMatrix,
    signal: &SignalInstance,
    sigma: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_with_rng(x, signal, sigma, &mut rng)
}

pub(crate) fn synthesize_with_rng(
    x: &DesignMatrix,
    signal: &SignalInstance,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let mut y = x.apply(&signal.beta)?;
    if sigma > 0.0 {
        for v in &mut y {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * z;
        }
    }
    Ok(y)
}

/// Pure noise observation `y = sigma z` of length `n`.
pub(crate) fn noise_observation(n: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::DesignSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity_from_alpha(10_000, 0.5).unwrap(), 100);
        assert_eq!(sparsity_from_alpha(10_000, 1.0).unwrap(), 1);
        // 10000^0.4 = 39.8107... rounds to 40 (high-precision oracle).
        assert_eq!(sparsity_from_alpha(10_000, 0.6).unwrap(), 40);
        assert_eq!(sparsity_from_alpha(1, 0.3).unwrap(), 1);
        assert!(sparsity_from_alpha(10, -0.1).is_err());
        assert!(sparsity_from_alpha(10, 1.1).is_err());
    }

    #[test]
    fn sparsity_monotone_in_alpha() {
        let p = 5000;
        let mut last = usize::MAX;
        for i in 0..=100 {
            let alpha = i as f64 / 100.0;
            let s = sparsity_from_alpha(p, alpha).unwrap();
            assert!(s <= last, "S increased at alpha={alpha}");
            last = s;
        }
    }

    #[test]
    fn amplitude_examples() {
        // sqrt(2 * 0.5 * ln 1e4) = sqrt(ln 1e4) = 3.034854258770293 (oracle).
        assert_relative_eq!(
            amplitude_from_r(10_000, 0.5).unwrap(),
            3.034854258770293,
            epsilon = 1e-12
        );
        // Constructed inverse: r = 1/(2 ln 2) makes A = 1 for p = 2.
        let r = 1.0 / (2.0 * 2f64.ln());
        assert_relative_eq!(amplitude_from_r(2, r).unwrap(), 1.0, epsilon = 1e-15);
        assert!(amplitude_from_r(1, 0.5).is_err());
    }

    #[test]
    fn amplitude_scales_with_sqrt2_when_r_doubles() {
        for r in [0.1, 0.25, 1.0, 3.0] {
            let a1 = amplitude_from_r(500, r).unwrap();
            let a2 = amplitude_from_r(500, 2.0 * r).unwrap();
            assert_relative_eq!(a2, 2f64.sqrt() * a1, max_relative = 1e-15);
        }
    }

    #[test]
    fn sfem_full_support() {
        let spec = AlternativeSpec::sfem_with_amplitude(6, 0.0, 2.5).unwrap();
        assert_eq!(spec.sparsity, 6);
        let inst = spec.sample(1);
        assert_eq!(inst.support.len(), 6);
        for v in &inst.beta {
            assert_eq!(v.abs(), 2.5);
        }
    }

    #[test]
    fn sfem_sparsity_one() {
        let spec = AlternativeSpec::sfem_with_amplitude(3, 1.0, 1.5).unwrap();
        for seed in 0..20 {
            let inst = spec.sample(seed);
            assert_eq!(inst.support.len(), 1);
            let nonzeros: Vec<_> = inst.beta.iter().filter(|v| **v != 0.0).collect();
            assert_eq!(nonzeros.len(), 1);
            assert_eq!(nonzeros[0].abs(), 1.5);
        }
    }

    #[test]
    fn sfem_support_frequencies_uniform() {
        // p=10, S=3: each index should land in the support with frequency
        // 3/10; the +-0.02 window is > 4 binomial standard deviations at
        // 10,000 draws.
        let spec = AlternativeSpec::sfem_with_amplitude(10, 0.4771212547196624, 1.0).unwrap();
        assert_eq!(spec.sparsity, 3);
        let draws = 10_000;
        let mut counts = [0usize; 10];
        for seed in 0..draws {
            for &j in &spec.sample(seed as u64).support {
                counts[j] += 1;
            }
        }
        for (j, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.3).abs() <= 0.02, "index {j} frequency {freq}");
        }
    }

    #[test]
    fn sfem_signs_symmetric() {
        let spec = AlternativeSpec::sfem_with_amplitude(20, 0.5, 1.0).unwrap();
        let mut pos = 0usize;
        let mut total = 0usize;
        for seed in 0..5_000u64 {
            let inst = spec.sample(seed);
            for &j in &inst.support {
                total += 1;
                if inst.beta[j] > 0.0 {
                    pos += 1;
                }
            }
        }
        let frac = pos as f64 / total as f64;
        // 4.5 sigma of Binomial(total, 1/2).
        let tol = 4.5 * 0.5 / (total as f64).sqrt();
        assert!((frac - 0.5).abs() <= tol, "positive fraction {frac}");
    }

    #[test]
    fn srem_scale_limit() {
        let spec = AlternativeSpec::srem(10, 0.5, 1e-8).unwrap();
        let inst = spec.sample(3);
        for &j in &inst.support {
            assert!(inst.beta[j].abs() < 1e-6);
        }
    }

    #[test]
    fn srem_full_support_small() {
        let spec = AlternativeSpec::srem(2, 0.0, 1.0).unwrap();
        let inst = spec.sample(5);
        assert_eq!(inst.support, vec![0, 1]);
        assert!(inst.beta.iter().all(|v| *v != 0.0));
    }

    #[test]
    fn srem_sample_variance_matches_tau() {
        let tau = 1.5;
        // alpha = 1 - ln 2 / ln 5 makes p^(1-alpha) = 2 exactly.
        let spec = AlternativeSpec::srem(5, 1.0 - 2f64.ln() / 5f64.ln(), tau).unwrap();
        assert_eq!(spec.sparsity, 2);
        let mut values = Vec::new();
        for seed in 0..10_000u64 {
            let inst = spec.sample(seed);
            for &j in &inst.support {
                values.push(inst.beta[j]);
            }
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Chi-square concentration: sd of the sample variance is about
        // tau^2 sqrt(2/n) ~ 0.7% here, so 5% is a wide margin.
        assert!((var - tau * tau).abs() <= 0.05 * tau * tau, "var {var}");
    }

    #[test]
    fn sample_deterministic_per_seed() {
        let spec = AlternativeSpec::srem(50, 0.6, 2.0).unwrap();
        assert_eq!(spec.sample(77), spec.sample(77));
        assert_ne!(spec.sample(77), spec.sample(78));
    }

    #[test]
    fn synthesize_null_and_noiseless() {
        let x = DesignSpec::Identity { p: 4 }.build(0).unwrap();
        let zero = SignalInstance {
            beta: vec![0.0; 4],
            support: vec![],
        };
        let y = synthesize_observation(&x, &zero, 0.0, 1).unwrap();
        assert_eq!(y, vec![0.0; 4]);

        let spec = AlternativeSpec::sfem_with_amplitude(4, 0.5, 2.0).unwrap();
        let inst = spec.sample(9);
        let y = synthesize_observation(&x, &inst, 0.0, 1).unwrap();
        assert_eq!(y, inst.beta);
    }

    #[test]
    fn synthesize_dimension_mismatch() {
        let x = DesignSpec::Identity { p: 4 }.build(0).unwrap();
        let inst = SignalInstance {
            beta: vec![0.0; 5],
            support: vec![],
        };
        assert!(synthesize_observation(&x, &inst, 1.0, 0).is_err());
    }

    #[test]
    fn synthesize_null_noise_energy() {
        // mean(||y||^2)/n over many draws concentrates at sigma^2 = 1;
        // sd of the average is sqrt(2/(n * draws)) ~ 0.45%, so 3% is wide.
        let n = 10;
        let x = DesignSpec::Identity { p: n }.build(0).unwrap();
        let zero = SignalInstance {
            beta: vec![0.0; n],
            support: vec![],
        };
        let draws = 10_000;
        let mut acc = 0.0;
        for seed in 0..draws {
            let y = synthesize_observation(&x, &zero, 1.0, seed as u64).unwrap();
            acc += y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() <= 0.03, "mean {mean}");
    }

    #[test]
    fn signal_csv_round_trip() {
        let spec = AlternativeSpec::sfem_with_rate(40, 0.75, 0.5)
            .unwrap()
            .with_sigma(2.0)
            .unwrap();
        let inst = spec.sample(13);
        let csv = inst.to_csv(&spec);
        assert!(csv.starts_with("p=40,S="));
        let back = SignalInstance::from_csv_str(&csv).unwrap();
        assert_eq!(back, inst);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_support_size_exact(p in 1usize..60, alpha in 0.0f64..1.0, seed in 0u64..500) {
            let spec = AlternativeSpec::sfem_with_amplitude(p, alpha, 1.0).unwrap();
            let inst = spec.sample(seed);
            prop_assert_eq!(inst.support.len(), spec.sparsity);
            let nonzero = inst.beta.iter().filter(|v| **v != 0.0).count();
            prop_assert!(nonzero <= spec.sparsity);
            for (j, v) in inst.beta.iter().enumerate() {
                if !inst.support.contains(&j) {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }

        #[test]
        fn prop_sfem_magnitudes_exact(p in 2usize..40, seed in 0u64..500) {
            let amplitude = 2.75;
            let spec = AlternativeSpec::sfem_with_amplitude(p, 0.5, amplitude).unwrap();
            let inst = spec.sample(seed);
            for &j in &inst.support {
                prop_assert!(inst.beta[j] == amplitude || inst.beta[j] == -amplitude);
            }
        }
    }
}
