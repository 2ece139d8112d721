//! Design-matrix families with unit-norm columns.
//!
//! Every matrix built here satisfies the same contract: `n >= 1`, `p >= 1`,
//! finite entries, and every column with Euclidean norm 1 within a relative
//! 1e-10. Construction is deterministic given `(spec, seed)`, which is what
//! makes benchmark grids replayable.
//!
//! The identity design is stored structurally rather than as an `n x n`
//! buffer so that large-`p` experiments stay cheap; everything else is a
//! dense column-major matrix.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numfmt::full17;

/// Relative tolerance on column norms; a type invariant of [`DesignMatrix`].
pub const COLUMN_NORM_TOL: f64 = 1e-10;

/// A design family plus its parameters. `build` turns a spec into a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DesignSpec {
    /// The `p x p` identity matrix.
    Identity { p: usize },
    /// Orthonormalized seeded Gaussian matrix, `p <= n` columns.
    RandomOrthonormal { n: usize, p: usize },
    /// Balanced one-way layout with `k` replicates per group: block pattern
    /// of `1/sqrt(k)` entries, `n = p k`. Columns are orthonormal.
    BalancedOneWay { p: usize, k: usize },
    /// One-way layout with the zero-sum constraint embedded: `1/sqrt(2k)`
    /// blocks plus a trailing block row of `-1/sqrt(2k)`, `n = pk + k`.
    /// All column correlations equal 1/2.
    BalancedOneWayConstrained { p: usize, k: usize },
    /// Columns `x_j = sqrt(gamma) w + sqrt(1-gamma) v_j` over an orthonormal
    /// set `w, v_1..v_p`, so every off-diagonal correlation equals `gamma`.
    /// Requires `0 < gamma < 1` and `n >= p + 1`.
    ConstantCorrelation { p: usize, gamma: f64, n: usize },
    /// I.i.d. standard normal entries with columns normalized afterwards.
    Gaussian { n: usize, p: usize },
    /// I.i.d. +-1 entries scaled by `1/sqrt(n)`.
    Rademacher { n: usize, p: usize },
    /// Identity basis concatenated with the normalized Hadamard basis,
    /// `p = 2n`. Requires `n` a power of two; cross-basis coherence is
    /// exactly `1/sqrt(n)`.
    BasisConcatenation { n: usize },
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        use DesignSpec::*;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Identity { p } if p == 0 => bad("identity requires p >= 1".into()),
            RandomOrthonormal { n, p } if n == 0 || p == 0 => {
                bad("random_orthonormal requires n, p >= 1".into())
            }
            RandomOrthonormal { n, p } if p > n => bad(format!(
                "random_orthonormal requires p <= n, got n={n}, p={p}"
            )),
            BalancedOneWay { p, k } | BalancedOneWayConstrained { p, k } if p == 0 || k == 0 => {
                bad("one-way designs require p, k >= 1".into())
            }
            ConstantCorrelation { p, gamma, n } => {
                if p == 0 {
                    return bad("constant_correlation requires p >= 1".into());
                }
                if !(gamma > 0.0 && gamma < 1.0) {
                    return bad(format!(
                        "constant_correlation requires 0 < gamma < 1, got {gamma}"
                    ));
                }
                if n < p + 1 {
                    return bad(format!(
                        "constant_correlation requires n >= p + 1, got n={n}, p={p}"
                    ));
                }
                Ok(())
            }
            Gaussian { n, p } | Rademacher { n, p } if n == 0 || p == 0 => {
                bad("random designs require n, p >= 1".into())
            }
            BasisConcatenation { n } if n == 0 || !n.is_power_of_two() => bad(format!(
                "basis_concatenation requires n a power of two, got {n}"
            )),
            _ => Ok(()),
        }
    }

    /// Row and column count of the built matrix.
    pub fn dims(&self) -> (usize, usize) {
        use DesignSpec::*;
        match *self {
            Identity { p } => (p, p),
            RandomOrthonormal { n, p } => (n, p),
            BalancedOneWay { p, k } => (p * k, p),
            BalancedOneWayConstrained { p, k } => (p * k + k, p),
            ConstantCorrelation { p, n, .. } => (n, p),
            Gaussian { n, p } => (n, p),
            Rademacher { n, p } => (n, p),
            BasisConcatenation { n } => (n, 2 * n),
        }
    }

    pub fn name(&self) -> &'static str {
        use DesignSpec::*;
        match self {
            Identity { .. } => "identity",
            RandomOrthonormal { .. } => "random_orthonormal",
            BalancedOneWay { .. } => "balanced_one_way",
            BalancedOneWayConstrained { .. } => "balanced_one_way_constrained",
            ConstantCorrelation { .. } => "constant_correlation",
            Gaussian { .. } => "gaussian",
            Rademacher { .. } => "rademacher",
            BasisConcatenation { .. } => "basis_concatenation",
        }
    }

    /// Compact `key=value` parameter string, semicolon-separated so it stays
    /// a single CSV field.
    pub fn params(&self) -> String {
        use DesignSpec::*;
        match *self {
            Identity { p } => format!("p={p}"),
            RandomOrthonormal { n, p } | Gaussian { n, p } | Rademacher { n, p } => {
                format!("n={n};p={p}")
            }
            BalancedOneWay { p, k } | BalancedOneWayConstrained { p, k } => {
                format!("p={p};k={k}")
            }
            ConstantCorrelation { p, gamma, n } => {
                format!("p={p};gamma={gamma};n={n}")
            }
            BasisConcatenation { n } => format!("n={n}"),
        }
    }

    /// True when the construction uses no randomness; the seed is then
    /// recorded but irrelevant.
    pub fn is_deterministic(&self) -> bool {
        use DesignSpec::*;
        !matches!(
            self,
            RandomOrthonormal { .. } | Gaussian { .. } | Rademacher { .. }
        )
    }

    /// True when the construction guarantees exactly orthonormal columns.
    pub fn orthonormal_columns(&self) -> bool {
        use DesignSpec::*;
        matches!(
            self,
            Identity { .. } | RandomOrthonormal { .. } | BalancedOneWay { .. }
        )
    }

    /// Build the design matrix. Deterministic given `(self, seed)`.
    pub fn build(&self, seed: u64) -> Result<DesignMatrix> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p) = self.dims();
        let storage = match *self {
            DesignSpec::Identity { p } => Storage::Identity(p),
            DesignSpec::RandomOrthonormal { n, p } => {
                let g = gaussian_matrix(n, p, &mut rng);
                Storage::Dense(g.qr().q())
            }
            DesignSpec::BalancedOneWay { p, k } => {
                let mut m = DMatrix::zeros(n, p);
                let v = 1.0 / (k as f64).sqrt();
                for j in 0..p {
                    for i in 0..k {
                        m[(j * k + i, j)] = v;
                    }
                }
                Storage::Dense(m)
            }
            DesignSpec::BalancedOneWayConstrained { p, k } => {
                let mut m = DMatrix::zeros(n, p);
                let v = 1.0 / (2.0 * k as f64).sqrt();
                for j in 0..p {
                    for i in 0..k {
                        m[(j * k + i, j)] = v;
                        m[(p * k + i, j)] = -v;
                    }
                }
                Storage::Dense(m)
            }
            DesignSpec::ConstantCorrelation { p, gamma, n } => {
                // w = e_0, v_j = e_j: the Gram matrix is gamma off the
                // diagonal regardless of which orthonormal set is used.
                let mut m = DMatrix::zeros(n, p);
                let a = gamma.sqrt();
                let b = (1.0 - gamma).sqrt();
                for j in 0..p {
                    m[(0, j)] = a;
                    m[(j + 1, j)] = b;
                }
                Storage::Dense(m)
            }
            DesignSpec::Gaussian { n, p } => {
                let mut m = gaussian_matrix(n, p, &mut rng);
                normalize_columns(&mut m)?;
                Storage::Dense(m)
            }
            DesignSpec::Rademacher { n, p } => {
                let v = 1.0 / (n as f64).sqrt();
                let m = DMatrix::from_fn(n, p, |_, _| if rng.random::<bool>() { v } else { -v });
                Storage::Dense(m)
            }
            DesignSpec::BasisConcatenation { n } => {
                let mut m = DMatrix::zeros(n, 2 * n);
                for i in 0..n {
                    m[(i, i)] = 1.0;
                }
                let h = hadamard(n);
                let scale = 1.0 / (n as f64).sqrt();
                for j in 0..n {
                    for i in 0..n {
                        m[(i, n + j)] = h[(i, j)] * scale;
                    }
                }
                Storage::Dense(m)
            }
        };
        Ok(DesignMatrix {
            n,
            p,
            storage,
            provenance: Provenance::Built {
                spec: self.clone(),
                seed,
            },
        })
    }
}

/// Free-function alias for [`DesignSpec::build`].
pub fn build_design(spec: &DesignSpec, seed: u64) -> Result<DesignMatrix> {
    spec.build(seed)
}

fn gaussian_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // Column-major fill so the draw order matches the storage order.
    DMatrix::from_iterator(n, p, (0..n * p).map(|_| StandardNormal.sample(rng)))
}

fn normalize_columns(m: &mut DMatrix<f64>) -> Result<()> {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter(
                "cannot normalize a zero column".into(),
            ));
        }
        col /= norm;
    }
    Ok(())
}

/// Sylvester Hadamard matrix of order `n` (a power of two), entries +-1.
fn hadamard(n: usize) -> DMatrix<f64> {
    debug_assert!(n.is_power_of_two());
    let mut h = DMatrix::from_element(n, n, 1.0);
    let mut size = 1;
    while size < n {
        for i in 0..size {
            for j in 0..size {
                let v = h[(i, j)];
                h[(i, j + size)] = v;
                h[(i + size, j)] = v;
                h[(i + size, j + size)] = -v;
            }
        }
        size *= 2;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// I_p, kept structural so large identity experiments never materialize
    /// an n x n buffer.
    Identity(usize),
    Dense(DMatrix<f64>),
}

/// Where a matrix came from: built from a spec, or read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Built { spec: DesignSpec, seed: u64 },
    Imported { variant: String },
}

/// An `n x p` design with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    storage: Storage,
    provenance: Provenance,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// The spec the matrix was built from, if it was built and not imported.
    pub fn spec(&self) -> Option<&DesignSpec> {
        match &self.provenance {
            Provenance::Built { spec, .. } => Some(spec),
            Provenance::Imported { .. } => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.provenance {
            Provenance::Built { seed, .. } => Some(*seed),
            Provenance::Imported { .. } => None,
        }
    }

    /// Variant label used in CSV headers and benchmark output.
    pub fn variant_label(&self) -> String {
        match &self.provenance {
            Provenance::Built { spec, .. } => format!("{}({})", spec.name(), spec.params()),
            Provenance::Imported { variant } => variant.clone(),
        }
    }

    /// True when the construction guarantees orthonormal columns. Imported
    /// matrices are never trusted to be orthonormal.
    pub fn has_orthonormal_columns(&self) -> bool {
        match &self.provenance {
            Provenance::Built { spec, .. } => spec.orthonormal_columns(),
            Provenance::Imported { .. } => false,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Identity(_) => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
            Storage::Dense(m) => m[(i, j)],
        }
    }

    /// `X^T y`: the vector of column correlations with `y`.
    pub fn correlations(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "y has length {}, design has n={}",
                y.len(),
                self.n
            )));
        }
        Ok(match &self.storage {
            Storage::Identity(_) => y.to_vec(),
            Storage::Dense(m) => {
                let yv = DVector::from_column_slice(y);
                m.tr_mul(&yv).as_slice().to_vec()
            }
        })
    }

    /// `X beta`.
    pub fn apply(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "beta has length {}, design has p={}",
                beta.len(),
                self.p
            )));
        }
        Ok(match &self.storage {
            Storage::Identity(_) => beta.to_vec(),
            Storage::Dense(m) => {
                let bv = DVector::from_column_slice(beta);
                (m * bv).as_slice().to_vec()
            }
        })
    }

    pub(crate) fn dense(&self) -> Option<&DMatrix<f64>> {
        match &self.storage {
            Storage::Identity(_) => None,
            Storage::Dense(m) => Some(m),
        }
    }

    /// Gram matrix `C = X^T X`, symmetric with unit diagonal.
    pub fn gram(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Identity(p) => DMatrix::identity(*p, *p),
            Storage::Dense(m) => {
                let mut c = m.tr_mul(m);
                // Symmetrize away the last-ulp asymmetry of the product.
                for j in 0..self.p {
                    for i in 0..j {
                        let v = 0.5 * (c[(i, j)] + c[(j, i)]);
                        c[(i, j)] = v;
                        c[(j, i)] = v;
                    }
                }
                c
            }
        }
    }

    /// Largest deviation of any column norm from 1.
    pub fn max_column_norm_error(&self) -> f64 {
        match &self.storage {
            Storage::Identity(_) => 0.0,
            Storage::Dense(m) => m
                .column_iter()
                .map(|c| (c.norm() - 1.0).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Serialize as CSV: a `n,p,variant` header, then `n` rows of `p`
    /// comma-separated values with 17 significant digits (full f64
    /// round-trip precision).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{},{}", self.n, self.p, self.variant_label())?;
        let mut row = String::new();
        for i in 0..self.n {
            row.clear();
            for j in 0..self.p {
                if j > 0 {
                    row.push(',');
                }
                row.push_str(&full17(self.entry(i, j)));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parse a matrix previously written by [`write_csv`](Self::write_csv).
    /// Column norms are re-checked on import.
    pub fn read_csv<R: BufRead>(r: R) -> Result<DesignMatrix> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let header = header?;
        let mut parts = header.splitn(3, ',');
        let parse_dim = |field: Option<&str>, what: &str| -> Result<usize> {
            field
                .ok_or(Error::Parse {
                    line: 1,
                    message: format!("missing {what}"),
                })?
                .trim()
                .parse()
                .map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad {what}: {e}"),
                })
        };
        let n = parse_dim(parts.next(), "n")?;
        let p = parse_dim(parts.next(), "p")?;
        let variant = parts.next().unwrap_or("unknown").trim().to_string();
        if n == 0 || p == 0 {
            return Err(Error::Parse {
                line: 1,
                message: format!("invalid dimensions n={n}, p={p}"),
            });
        }
        let mut m = DMatrix::zeros(n, p);
        let mut filled = 0usize;
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if filled >= n {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("more than {n} data rows"),
                });
            }
            let mut count = 0;
            for (j, field) in line.split(',').enumerate() {
                if j >= p {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("more than {p} columns"),
                    });
                }
                let v: f64 = field.trim().parse().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("bad value in column {}: {e}", j + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("non-finite value in column {}", j + 1),
                    });
                }
                m[(filled, j)] = v;
                count += 1;
            }
            if count != p {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {p} columns, found {count}"),
                });
            }
            filled += 1;
        }
        if filled != n {
            return Err(Error::Parse {
                line: filled + 2,
                message: format!("expected {n} data rows, found {filled}"),
            });
        }
        let dm = DesignMatrix {
            n,
            p,
            storage: Storage::Dense(m),
            provenance: Provenance::Imported { variant },
        };
        let err = dm.max_column_norm_error();
        if err > COLUMN_NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "imported design has a column norm off by {err:.3e}; columns must be unit norm"
            )));
        }
        Ok(dm)
    }

    pub fn from_csv_str(s: &str) -> Result<DesignMatrix> {
        Self::read_csv(s.as_bytes())
    }
}

/// Gram-matrix correlation summary against a coherence threshold `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceProfile {
    /// The threshold the profile was computed against.
    pub gamma_used: f64,
    /// `max_{j != k} |c_jk|`; 0 when p < 2.
    pub max_offdiag: f64,
    /// `max_j #{k : |c_jk| > gamma}`, counting `k = j`, so >= 1 when
    /// `gamma < 1`.
    pub delta_observed: usize,
    /// Whether all correlations stay below `1 - delta` (default
    /// `delta = 1/ln p`). Reported as true for p <= 2, where the bound is
    /// vacuous.
    pub strong_ok: bool,
    /// Per-column exceedance counts.
    pub exceedance_counts: Vec<usize>,
}

impl CoherenceProfile {
    /// Profile with the default strong-correlation slack `delta = 1/ln p`.
    pub fn from_gram(c: &DMatrix<f64>, gamma: f64) -> Result<Self> {
        Self::from_gram_with_delta(c, gamma, None)
    }

    /// `delta` overrides the strong-correlation slack; any `delta < 1` is
    /// meaningful.
    pub fn from_gram_with_delta(c: &DMatrix<f64>, gamma: f64, delta: Option<f64>) -> Result<Self> {
        let p = c.nrows();
        if c.ncols() != p || p == 0 {
            return Err(Error::InvalidParameter(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                p,
                c.ncols()
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        for j in 0..p {
            if (c[(j, j)] - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidParameter(format!(
                    "Gram diagonal entry {j} is {}, expected 1",
                    c[(j, j)]
                )));
            }
            for i in 0..j {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "Gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }

        let mut max_offdiag = 0.0f64;
        let mut counts = vec![0usize; p];
        for j in 0..p {
            let mut count = 0;
            for i in 0..p {
                let v = c[(i, j)].abs();
                if i != j && v > max_offdiag {
                    max_offdiag = v;
                }
                if v > gamma {
                    count += 1;
                }
            }
            counts[j] = count;
        }
        let delta_observed = counts.iter().copied().max().unwrap_or(1).max(1);

        // The cap 1 - delta is vacuous or ill-posed for p <= 2 (ln p <= ln 2
        // makes 1 - 1/ln p nonpositive); report true there.
        let strong_ok = if p <= 2 {
            true
        } else {
            let slack = delta.unwrap_or_else(|| 1.0 / (p as f64).ln());
            max_offdiag <= 1.0 - slack
        };

        Ok(CoherenceProfile {
            gamma_used: gamma,
            max_offdiag,
            delta_observed,
            strong_ok,
            exceedance_counts: counts,
        })
    }
}

/// Lower bound on the achievable coherence of any `n x p` unit-norm design
/// with `p >= n`: `sqrt((p - n) / (n p))`.
pub fn coherence_lower_bound(n: usize, p: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if p < n {
        return Err(Error::Domain(format!(
            "coherence lower bound requires p >= n, got n={n}, p={p}"
        )));
    }
    Ok(((p - n) as f64 / (n as f64 * p as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn build(spec: DesignSpec, seed: u64) -> DesignMatrix {
        spec.build(seed).expect("valid spec")
    }

    #[test]
    fn identity_matches() {
        let x = build(DesignSpec::Identity { p: 4 }, 0);
        assert_eq!((x.n(), x.p()), (4, 4));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(x.entry(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn one_way_block_pattern() {
        // p=3, k=2: 6x3, nonzero entries all 1/sqrt(2), one block per column.
        let x = build(DesignSpec::BalancedOneWay { p: 3, k: 2 }, 0);
        assert_eq!((x.n(), x.p()), (6, 3));
        let v = 1.0 / 2f64.sqrt();
        for i in 0..6 {
            for j in 0..3 {
                let expected = if i / 2 == j { v } else { 0.0 };
                assert_eq!(x.entry(i, j), expected);
            }
        }
        assert_relative_eq!(v, 0.7071, max_relative = 1e-4);
    }

    #[test]
    fn one_way_gram_is_identity() {
        let x = build(DesignSpec::BalancedOneWay { p: 2, k: 3 }, 0);
        let c = x.gram();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(c[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn constrained_one_way_gram_is_half() {
        let x = build(DesignSpec::BalancedOneWayConstrained { p: 3, k: 2 }, 0);
        assert_eq!((x.n(), x.p()), (8, 3));
        let c = x.gram();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.5 };
                assert_relative_eq!(c[(i, j)], expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn constant_correlation_gram() {
        let x = build(
            DesignSpec::ConstantCorrelation {
                p: 3,
                gamma: 0.5,
                n: 4,
            },
            0,
        );
        let c = x.gram();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.5 };
                assert!((c[(i, j)] - expected).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn basis_concatenation_structure() {
        let x = build(DesignSpec::BasisConcatenation { n: 8 }, 0);
        assert_eq!((x.n(), x.p()), (8, 16));
        let c = x.gram();
        // Each block is orthonormal on its own.
        for block in [0usize, 8] {
            for i in 0..8 {
                for j in 0..8 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((c[(block + i, block + j)] - expected).abs() <= 1e-10);
                }
            }
        }
        // Cross-basis coherence is exactly 1/sqrt(n).
        let coh = 1.0 / 8f64.sqrt();
        for i in 0..8 {
            for j in 8..16 {
                assert_relative_eq!(c[(i, j)].abs(), coh, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn random_orthonormal_is_orthonormal() {
        let x = build(DesignSpec::RandomOrthonormal { n: 20, p: 12 }, 7);
        let c = x.gram();
        for i in 0..12 {
            for j in 0..12 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - expected).abs() <= 1e-10, "({i},{j})");
            }
        }
    }

    #[test]
    fn column_norms_within_tolerance() {
        let specs = [
            DesignSpec::Identity { p: 5 },
            DesignSpec::RandomOrthonormal { n: 12, p: 8 },
            DesignSpec::BalancedOneWay { p: 4, k: 3 },
            DesignSpec::BalancedOneWayConstrained { p: 4, k: 3 },
            DesignSpec::ConstantCorrelation {
                p: 6,
                gamma: 0.3,
                n: 9,
            },
            DesignSpec::Gaussian { n: 30, p: 50 },
            DesignSpec::Rademacher { n: 16, p: 40 },
            DesignSpec::BasisConcatenation { n: 16 },
        ];
        for spec in specs {
            let x = spec.build(3).unwrap();
            assert!(
                x.max_column_norm_error() <= COLUMN_NORM_TOL,
                "{} column norms off by {}",
                spec.name(),
                x.max_column_norm_error()
            );
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DesignSpec::RandomOrthonormal { n: 5, p: 10 }.build(0).is_err());
        assert!(DesignSpec::BasisConcatenation { n: 12 }.build(0).is_err());
        assert!(DesignSpec::ConstantCorrelation {
            p: 5,
            gamma: 1.0,
            n: 6
        }
        .build(0)
        .is_err());
        assert!(DesignSpec::ConstantCorrelation {
            p: 5,
            gamma: 0.5,
            n: 5
        }
        .build(0)
        .is_err());
        assert!(DesignSpec::Identity { p: 0 }.build(0).is_err());
    }

    #[test]
    fn deterministic_given_spec_and_seed() {
        for spec in [
            DesignSpec::Gaussian { n: 10, p: 25 },
            DesignSpec::Rademacher { n: 10, p: 25 },
            DesignSpec::RandomOrthonormal { n: 25, p: 10 },
        ] {
            let a = spec.build(42).unwrap();
            let b = spec.build(42).unwrap();
            assert_eq!(a, b, "{} not deterministic", spec.name());
            let c = spec.build(43).unwrap();
            assert_ne!(a, c, "{} ignores the seed", spec.name());
        }
    }

    #[test]
    fn coherence_profile_identity() {
        let c = DMatrix::<f64>::identity(4, 4);
        let prof = CoherenceProfile::from_gram(&c, 0.1).unwrap();
        assert_eq!(prof.delta_observed, 1);
        assert_eq!(prof.max_offdiag, 0.0);
        assert!(prof.strong_ok);
        assert_eq!(prof.exceedance_counts, vec![1, 1, 1, 1]);
    }

    #[test]
    fn coherence_profile_constant_half() {
        let mut c = DMatrix::from_element(3, 3, 0.5);
        for j in 0..3 {
            c[(j, j)] = 1.0;
        }
        let prof = CoherenceProfile::from_gram(&c, 0.4).unwrap();
        assert_eq!(prof.delta_observed, 3);
        assert_relative_eq!(prof.max_offdiag, 0.5);
    }

    #[test]
    fn coherence_profile_single_column() {
        let c = DMatrix::<f64>::identity(1, 1);
        let prof = CoherenceProfile::from_gram(&c, 0.5).unwrap();
        assert_eq!(prof.delta_observed, 1);
        assert_eq!(prof.max_offdiag, 0.0);
        assert!(prof.strong_ok);
    }

    #[test]
    fn coherence_lower_bound_values() {
        assert_relative_eq!(
            coherence_lower_bound(5, 10).unwrap(),
            0.31622776601683794,
            epsilon = 1e-15
        );
        // p = 2n implies the bound is at least 1/sqrt(2n).
        let b = coherence_lower_bound(10, 20).unwrap();
        assert!(b >= 1.0 / 20f64.sqrt() - 1e-15);
        assert_eq!(coherence_lower_bound(7, 7).unwrap(), 0.0);
        assert!(coherence_lower_bound(10, 5).is_err());
    }

    #[test]
    fn lower_bound_consistency_for_wide_designs() {
        for spec in [
            DesignSpec::Gaussian { n: 50, p: 100 },
            DesignSpec::Rademacher { n: 32, p: 64 },
            DesignSpec::BasisConcatenation { n: 32 },
        ] {
            let x = spec.build(11).unwrap();
            let prof = CoherenceProfile::from_gram(&x.gram(), 0.0).unwrap();
            let bound = coherence_lower_bound(x.n(), x.p()).unwrap();
            assert!(
                prof.max_offdiag >= bound - 1e-9,
                "{}: {} < {}",
                spec.name(),
                prof.max_offdiag,
                bound
            );
        }
    }

    #[test]
    fn csv_round_trip_exact() {
        let x = build(DesignSpec::Gaussian { n: 7, p: 5 }, 9);
        let csv = x.to_csv_string();
        let back = DesignMatrix::from_csv_str(&csv).unwrap();
        assert_eq!((back.n(), back.p()), (7, 5));
        for i in 0..7 {
            for j in 0..5 {
                assert_eq!(back.entry(i, j).to_bits(), x.entry(i, j).to_bits());
            }
        }
        assert_eq!(back.variant_label(), "gaussian(n=7;p=5)");
        assert!(!back.has_orthonormal_columns());
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(DesignMatrix::from_csv_str("").is_err());
        assert!(DesignMatrix::from_csv_str("2,2,identity(p=2)\n1,0\n").is_err());
        let bad_norm = "1,2,custom\n0.5,0.5\n";
        assert!(DesignMatrix::from_csv_str(bad_norm).is_err());
        let bad_value = "1,1,custom\nnot-a-number\n";
        match DesignMatrix::from_csv_str(bad_value) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = DesignSpec::ConstantCorrelation {
            p: 3,
            gamma: 0.5,
            n: 4,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"variant\":\"constant_correlation\""));
        let back: DesignSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_gaussian_columns_unit_norm(n in 2usize..20, p in 1usize..20, seed in 0u64..1000) {
            let x = DesignSpec::Gaussian { n, p }.build(seed).unwrap();
            prop_assert!(x.max_column_norm_error() <= COLUMN_NORM_TOL);
        }

        #[test]
        fn prop_build_is_deterministic(seed in 0u64..1000) {
            let spec = DesignSpec::Gaussian { n: 6, p: 9 };
            let a = spec.build(seed).unwrap();
            let b = spec.build(seed).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn prop_constant_correlation_offdiag(p in 2usize..10, gamma in 0.05f64..0.95) {
            let spec = DesignSpec::ConstantCorrelation { p, gamma, n: p + 1 };
            let x = spec.build(0).unwrap();
            let c = x.gram();
            for i in 0..p {
                for j in 0..p {
                    let expected = if i == j { 1.0 } else { gamma };
                    prop_assert!((c[(i, j)] - expected).abs() <= 1e-10);
                }
            }
        }
    }
}
