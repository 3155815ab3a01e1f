//! Delannoy counting and potential-frequency-set enumeration.
//!
//! `V(T, K)` is the set of integer vectors `s ∈ Z^T` with `Σ|s_t| ≤ K`; its
//! cardinality is the Delannoy number `Σ_i C(K,i)·C(T,i)·2^i`. Mapping each
//! lattice point through the first-layer embedding `Ψᵀs` yields the set of
//! frequencies the architecture can express.

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::matrix::DenseMatrix;

type Matrix = DenseMatrix<f64>;

/// Default enumeration cap.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("enumeration of {needed} points exceeds the cap of {cap}")]
    CapExceeded { needed: BigUint, cap: u64 },
}

/// Exact binomial coefficient, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut out = BigUint::one();
    for i in 0..k {
        out = out * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    out
}

/// `|V(T, K)| = Σ_{i=0}^{min(K,T)} C(K,i)·C(T,i)·2^i`, exactly.
///
/// The binomials are read as `C(K,i)·C(T,i)`: the transposed orientation
/// evaluates to zero for `i < max(K,T)` and disagrees with brute-force
/// enumeration, which arbitrates the index order here.
pub fn delannoy_count(t: u64, k: u64) -> BigUint {
    let mut total = BigUint::zero();
    for i in 0..=k.min(t) {
        total += binomial(k, i) * binomial(t, i) * (BigUint::one() << i);
    }
    total
}

/// Integer vectors with L1 norm at most `radius` in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSet {
    pub dim: usize,
    pub radius: u64,
    pub points: Vec<Vec<i64>>,
}

/// Exhaustive, duplicate-free enumeration of `V(dim, radius)` in a fixed
/// lexicographic order.
pub fn enumerate_lattice(dim: usize, radius: u64, cap: u64) -> Result<LatticeSet, LatticeError> {
    let needed = delannoy_count(dim as u64, radius);
    if needed > BigUint::from(cap) {
        return Err(LatticeError::CapExceeded { needed, cap });
    }
    let mut points = Vec::with_capacity(needed.to_usize().unwrap_or(0));
    let mut current = vec![0i64; dim];
    fn recurse(
        axis: usize,
        budget: i64,
        current: &mut Vec<i64>,
        points: &mut Vec<Vec<i64>>,
    ) {
        if axis + 1 == current.len() {
            for v in -budget..=budget {
                current[axis] = v;
                points.push(current.clone());
            }
            return;
        }
        for v in -budget..=budget {
            current[axis] = v;
            recurse(axis + 1, budget - v.abs(), current, points);
        }
    }
    if dim == 0 {
        points.push(Vec::new());
    } else {
        recurse(0, radius as i64, &mut current, &mut points);
    }
    Ok(LatticeSet { dim, radius, points })
}

/// Frequencies `Ψᵀs` over all lattice points, with a bit-exact distinct
/// count (the origin collapses degenerate embeddings).
#[derive(Debug, Clone)]
pub struct FrequencySet {
    /// Embedding matrix, one frequency row `Ψ_t ∈ R^D` per lattice axis.
    pub psi_shape: (usize, usize),
    pub radius: u64,
    pub vectors: Vec<Vec<f64>>,
    pub distinct: usize,
}

/// Maps every `s ∈ V(T, K)` through the embedding: `Σ_t s_t Ψ_t`.
pub fn potential_frequencies(
    psi: &Matrix,
    radius: u64,
    cap: u64,
) -> Result<FrequencySet, LatticeError> {
    let t_dim = psi.rows();
    let d = psi.cols();
    let lattice = enumerate_lattice(t_dim, radius, cap)?;
    let mut vectors = Vec::with_capacity(lattice.points.len());
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(lattice.points.len());
    let mut distinct = 0usize;
    for s in &lattice.points {
        let mut freq = vec![0.0f64; d];
        for (t, &coeff) in s.iter().enumerate() {
            if coeff != 0 {
                let row = psi.row(t);
                for (f, &p) in freq.iter_mut().zip(row) {
                    *f += coeff as f64 * p;
                }
            }
        }
        let key: Vec<u64> = freq.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key) {
            distinct += 1;
        }
        vectors.push(freq);
    }
    Ok(FrequencySet { psi_shape: (t_dim, d), radius, vectors, distinct })
}

/// Exact ratio `|V(τT, K)| / |V(T, K)|` as a float; approaches `τ^K` for
/// large `T`.
pub fn tau_expansion_ratio(t: u64, k: u64, tau: u64) -> f64 {
    let num = BigInt::from(delannoy_count(tau * t, k));
    let den = BigInt::from(delannoy_count(t, k));
    BigRational::new(num, den).to_f64().expect("ratio fits f64")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Independent brute-force count: iterate the box [-K, K]^T and filter.
    fn brute_force_count(t: u32, k: u64) -> u64 {
        let side = 2 * k + 1;
        let total = side.pow(t);
        let mut count = 0u64;
        for mut idx in 0..total {
            let mut l1 = 0u64;
            for _ in 0..t {
                let coord = (idx % side) as i64 - k as i64;
                idx /= side;
                l1 += coord.unsigned_abs();
            }
            if l1 <= k {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn radius_zero_is_single_point() {
        for t in 0..6 {
            assert_eq!(delannoy_count(t, 0), BigUint::one());
        }
    }

    #[test]
    fn one_dimensional_case() {
        // integers with |s| ≤ 3
        assert_eq!(delannoy_count(1, 3), BigUint::from(7u32));
    }

    #[test]
    fn classic_two_by_two() {
        assert_eq!(delannoy_count(2, 2), BigUint::from(13u32));
    }

    #[test]
    fn closed_form_matches_brute_force_up_to_six() {
        for t in 0..=6u32 {
            for k in 0..=6u64 {
                assert_eq!(
                    delannoy_count(t as u64, k),
                    BigUint::from(brute_force_count(t, k)),
                    "T={t} K={k}"
                );
            }
        }
    }

    #[test]
    fn transposed_binomial_orientation_is_wrong() {
        // C(i,K)·C(i,T) sums to 1 for T=1, K=3 (only i=0 survives in the
        // range), disagreeing with the brute-force count of 7.
        let wrong: BigUint = (0..=1u64)
            .map(|i| binomial(i, 3) * binomial(i, 1) * (BigUint::one() << i))
            .sum();
        assert_ne!(wrong, delannoy_count(1, 3));
    }

    #[test]
    fn symmetry_in_t_and_k() {
        for t in 0..=8u64 {
            for k in 0..=8u64 {
                assert_eq!(delannoy_count(t, k), delannoy_count(k, t));
            }
        }
    }

    #[test]
    fn large_counts_do_not_overflow() {
        // T=200, K=40 far exceeds u64.
        let big = delannoy_count(200, 40);
        assert!(big > BigUint::from(u64::MAX));
    }

    #[test]
    fn enumeration_matches_count_and_is_duplicate_free() {
        for t in 1..=4usize {
            for k in 0..=4u64 {
                let set = enumerate_lattice(t, k, DEFAULT_ENUMERATION_CAP).unwrap();
                let expected = delannoy_count(t as u64, k).to_usize().unwrap();
                assert_eq!(set.points.len(), expected, "T={t} K={k}");
                let unique: HashSet<&Vec<i64>> = set.points.iter().collect();
                assert_eq!(unique.len(), expected);
                assert!(set.points.iter().all(|s| {
                    s.iter().map(|v| v.unsigned_abs()).sum::<u64>() <= k
                }));
            }
        }
    }

    #[test]
    fn small_enumerations() {
        let set = enumerate_lattice(1, 1, 100).unwrap();
        assert_eq!(set.points, vec![vec![-1], vec![0], vec![1]]);
        let set = enumerate_lattice(2, 1, 100).unwrap();
        assert_eq!(set.points.len(), 5);
        let set = enumerate_lattice(3, 2, 100).unwrap();
        assert_eq!(set.points.len(), 25);
    }

    #[test]
    fn cap_is_enforced() {
        match enumerate_lattice(10, 10, 100) {
            Err(LatticeError::CapExceeded { cap: 100, .. }) => {}
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn zero_embedding_collapses_to_origin() {
        let psi = Matrix::zeros(3, 2);
        let fs = potential_frequencies(&psi, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(fs.vectors.len(), 25);
        assert_eq!(fs.distinct, 1);
    }

    #[test]
    fn identity_embedding_keeps_all_points() {
        let psi = Matrix::identity(2);
        let fs = potential_frequencies(&psi, 1, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(fs.distinct, 5);
    }

    #[test]
    fn generic_embedding_is_injective() {
        let mut rng = Rng::new(31);
        let mut psi = Matrix::zeros(3, 2);
        for v in psi.data_mut() {
            *v = rng.uniform(-1.0, 1.0).unwrap();
        }
        let fs = potential_frequencies(&psi, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(fs.distinct, 25);
    }

    #[test]
    fn expansion_ratio_cases() {
        assert_eq!(tau_expansion_ratio(17, 3, 1), 1.0);
        // K=1 closed form: |V(T,1)| = 2T+1, so ratio = (2τT+1)/(2T+1).
        for t in [1u64, 5, 50] {
            for tau in [2u64, 3] {
                let expected = (2 * tau * t + 1) as f64 / (2 * t + 1) as f64;
                assert!((tau_expansion_ratio(t, 1, tau) - expected).abs() < 1e-12);
            }
        }
        // K=2 asymptotic: ratio → τ² = 9 within 10% at T=200.
        let ratio = tau_expansion_ratio(200, 2, 3);
        assert!((ratio - 9.0).abs() < 0.9, "ratio {ratio}");
    }
}
