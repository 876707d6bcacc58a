//! Relaxed test vectors and their least-squares weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, gauss_seidel_sweep, norm2, spmv, CsrMatrix};

/// Relative norm below which a relaxed vector counts as annihilated.
const ZERO_VECTOR_TOL: f64 = 1e-14;
/// Fresh random restarts tried before a zero vector is reported.
const MAX_RESTARTS: u64 = 3;

/// How the per-vector weights of the least-squares functional are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `<v, v> / <A v, v>`, normalized to sum to one.
    #[default]
    InverseRayleigh,
    /// `1 / k` for every vector.
    Uniform,
}

/// A set of `k` relaxed test vectors with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVectorSet {
    vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    relax_count: usize,
}

impl TestVectorSet {
    /// Wraps caller-provided vectors; weights must be positive and match in count.
    pub fn new(vectors: Vec<Vec<f64>>, weights: Vec<f64>, relax_count: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidParameter("need at least one test vector".into()));
        }
        if vectors.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                found: weights.len(),
            });
        }
        let n = vectors[0].len();
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "test vector {index} has non-finite entries"
                )));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroTestVector { index });
            }
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        Ok(Self {
            vectors,
            weights,
            relax_count,
        })
    }

    /// Same vectors with weights derived from `scheme`.
    pub fn with_scheme(a: &CsrMatrix, vectors: Vec<Vec<f64>>, relax_count: usize, scheme: WeightScheme) -> Result<Self> {
        let weights = match scheme {
            WeightScheme::InverseRayleigh => compute_weights(a, &vectors)?,
            WeightScheme::Uniform => vec![1.0 / vectors.len() as f64; vectors.len()],
        };
        Self::new(vectors, weights, relax_count)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn relax_count(&self) -> usize {
        self.relax_count
    }

    /// Multiplies every vector by `factor`; weights are unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|x| x * factor).collect())
                .collect(),
            weights: self.weights.clone(),
            relax_count: self.relax_count,
        }
    }
}

/// Generates `k` test vectors: `k - 1` uniform `(0, 1]` random starts and one
/// constant start, each relaxed with `relax_count` Gauss–Seidel sweeps on
/// `A x = 0`. Weights follow `scheme`.
pub fn generate_test_vectors(
    a: &CsrMatrix,
    k: usize,
    relax_count: usize,
    seed: u64,
    scheme: WeightScheme,
) -> Result<TestVectorSet> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k} < 2 test vectors")));
    }
    let n = a.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<f64>> = (0..k - 1).map(|_| random_start(&mut rng, n)).collect();
    starts.push(vec![1.0; n]);

    let vectors = starts
        .into_par_iter()
        .enumerate()
        .map(|(index, start)| {
            let is_random = index + 1 < k;
            let mut v = start;
            for attempt in 0..=MAX_RESTARTS {
                let start_norm = norm2(&v);
                relax_homogeneous(a, &mut v, relax_count)?;
                if norm2(&v) > ZERO_VECTOR_TOL * start_norm {
                    return Ok(v);
                }
                if !is_random || attempt == MAX_RESTARTS {
                    break;
                }
                let mut retry = ChaCha8Rng::seed_from_u64(seed);
                retry.set_stream(1 + index as u64 * (MAX_RESTARTS + 1) + attempt);
                v = random_start(&mut retry, n);
            }
            Err(Error::ZeroTestVector { index })
        })
        .collect::<Result<Vec<_>>>()?;

    TestVectorSet::with_scheme(a, vectors, relax_count, scheme)
}

fn random_start(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // gen() is in [0, 1); flip it into (0, 1]
    (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect()
}

fn relax_homogeneous(a: &CsrMatrix, v: &mut [f64], sweeps: usize) -> Result<()> {
    let zero = vec![0.0; v.len()];
    for _ in 0..sweeps {
        gauss_seidel_sweep(a, v, &zero)?;
    }
    Ok(())
}

/// Reciprocal Rayleigh quotients `<v, v> / <A v, v>`, normalized to sum to one.
pub fn compute_weights(a: &CsrMatrix, vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut weights = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        let vv = dot(v, v);
        if vv == 0.0 {
            return Err(Error::ZeroTestVector { index });
        }
        let av = spmv(a, v)?;
        let vav = dot(&av, v);
        if !(vav > 0.0) {
            return Err(Error::NonPositiveRayleigh { index });
        }
        weights.push(vv / vav);
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `sum_{i != j} (-a_ij)(e_i - e_j)^2 / sum_i a_ii e_i^2`.
///
/// Small values mean `e` is algebraically smooth.
pub fn smoothness_ratio(a: &CsrMatrix, e: &[f64]) -> Result<f64> {
    if e.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            found: e.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &ei) in e.iter().enumerate() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                den += v * ei * ei;
            } else {
                let d = ei - e[j];
                num -= v * d * d;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{assemble_matrix, ProblemSpec};
    use crate::sparse::test_util::laplacian_1d;
    use std::f64::consts::PI;

    #[test]
    fn no_relaxation_keeps_raw_starts() {
        let a = laplacian_1d(20);
        let tvs = generate_test_vectors(&a, 4, 0, 9, WeightScheme::Uniform).unwrap();
        assert_eq!(tvs.k(), 4);
        for v in &tvs.vectors()[..3] {
            assert!(v.iter().all(|&x| x > 0.0 && x <= 1.0));
        }
        assert_eq!(tvs.vectors()[3], vec![1.0; 20]);
        assert_eq!(tvs.weights(), &[0.25; 4]);
    }

    #[test]
    fn identity_annihilates_vectors() {
        let a = CsrMatrix::identity(5);
        let err = generate_test_vectors(&a, 3, 1, 1, WeightScheme::InverseRayleigh).unwrap_err();
        assert!(matches!(err, Error::ZeroTestVector { .. }));
    }

    #[test]
    fn residual_ratio_decreases_under_relaxation() {
        let a = laplacian_1d(50);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zero = vec![0.0; 50];
        for trial in 0..8 {
            let mut v = if trial == 7 { vec![1.0; 50] } else { random_start(&mut rng, 50) };
            let ratio = |v: &[f64]| norm2(&spmv(&a, v).unwrap()) / norm2(v);
            let mut last = ratio(&v);
            for _ in 0..40 {
                gauss_seidel_sweep(&a, &mut v, &zero).unwrap();
                let r = ratio(&v);
                assert!(r < last, "ratio went from {last} to {r}");
                last = r;
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = laplacian_1d(30);
        let x = generate_test_vectors(&a, 5, 10, 77, WeightScheme::InverseRayleigh).unwrap();
        let y = generate_test_vectors(&a, 5, 10, 77, WeightScheme::InverseRayleigh).unwrap();
        let z = generate_test_vectors(&a, 5, 10, 78, WeightScheme::InverseRayleigh).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn weight_examples() {
        let a = laplacian_1d(10);
        let v: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).cos() + 2.0).collect();
        assert_eq!(compute_weights(&a, &[v]).unwrap(), vec![1.0]);

        let mode = |m: f64| -> Vec<f64> {
            (1..=10).map(|i| (PI * m * i as f64 / 11.0).sin()).collect()
        };
        let lambda = |m: f64| 2.0 - 2.0 * (m * PI / 11.0).cos();
        let w = compute_weights(&a, &[mode(1.0), mode(5.0)]).unwrap();
        assert!((w[0] / w[1] - lambda(5.0) / lambda(1.0)).abs() < 1e-10);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let indefinite = CsrMatrix::from_dense(&[vec![-1.0]]).unwrap();
        assert!(matches!(
            compute_weights(&indefinite, &[vec![1.0]]),
            Err(Error::NonPositiveRayleigh { index: 0 })
        ));
    }

    #[test]
    fn weights_are_permutation_equivariant() {
        let a = laplacian_1d(30);
        let tvs = generate_test_vectors(&a, 5, 4, 3, WeightScheme::InverseRayleigh).unwrap();
        let mut rev = tvs.vectors().to_vec();
        rev.reverse();
        let mut w = compute_weights(&a, &rev).unwrap();
        w.reverse();
        for (p, q) in w.iter().zip(tvs.weights()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothness_examples() {
        let a = laplacian_1d(4);
        // constant vector: couplings cancel, boundary rows contribute nothing to the numerator
        assert_eq!(smoothness_ratio(&a, &[1.0; 4]).unwrap(), 0.0);
        // alternating: 6 ordered neighbor pairs, each (-(-1)) * 2^2 = 4; denominator 4 * 2
        let r = smoothness_ratio(&a, &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(r, 24.0 / 8.0);
        assert!(matches!(
            smoothness_ratio(&a, &[0.0; 4]),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn relaxed_vectors_are_smooth() {
        let spec = ProblemSpec::new(32, 0.0, 1.0).unwrap();
        let a = assemble_matrix(&spec).unwrap();
        let raw = generate_test_vectors(&a, 8, 0, 12, WeightScheme::Uniform).unwrap();
        let tvs = generate_test_vectors(&a, 8, 40, 12, WeightScheme::InverseRayleigh).unwrap();
        for (before, after) in raw.vectors().iter().zip(tvs.vectors()).take(7) {
            let r0 = smoothness_ratio(&a, before).unwrap();
            let r1 = smoothness_ratio(&a, after).unwrap();
            assert!(r1 < r0);
        }
        for v in tvs.vectors() {
            assert!(smoothness_ratio(&a, v).unwrap() < 0.1);
        }
    }
}
