use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Sparse vector with entries sorted by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zero(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    pub fn get(&self, column: usize) -> f64 {
        self.entries
            .binary_search_by_key(&column, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ci, wi) = self.entries[i];
            let (cj, wj) = other.entries[j];
            match ci.cmp(&cj) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += wi * wj;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(c, w) in &self.entries {
            v[c] = w;
        }
        v
    }
}

/// a·b / (‖a‖‖b‖), 0 when either norm is 0.
pub fn cosine_sparse(a: &SparseVector, b: &SparseVector) -> Result<f64, DimensionMismatch> {
    if a.dim != b.dim {
        return Err(DimensionMismatch { left: a.dim, right: b.dim });
    }
    Ok(finish_cosine(a.dot(b), a.squared_norm(), b.squared_norm()))
}

pub fn cosine_dense(a: &[f64], b: &[f64]) -> Result<f64, DimensionMismatch> {
    if a.len() != b.len() {
        return Err(DimensionMismatch { left: a.len(), right: b.len() });
    }
    let dot = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum();
    let nb = b.iter().map(|x| x * x).sum();
    Ok(finish_cosine(dot, na, nb))
}

fn finish_cosine(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a == 0.0 || sq_b == 0.0 {
        return 0.0;
    }
    (dot / (sq_a * sq_b).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_arithmetic() {
        let c = cosine_dense(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert!((c - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(cosine_dense(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_dense(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_dense(&[1.0], &[1.0, 2.0]), Err(DimensionMismatch { left: 1, right: 2 }));
    }

    #[test]
    fn sparse_matches_dense() {
        let a = SparseVector { dim: 5, entries: vec![(0, 1.0), (3, 2.0)] };
        let b = SparseVector { dim: 5, entries: vec![(1, 4.0), (3, 0.5), (4, 1.0)] };
        let sparse = cosine_sparse(&a, &b).unwrap();
        let dense = cosine_dense(&a.to_dense(), &b.to_dense()).unwrap();
        assert!((sparse - dense).abs() < 1e-15);
        assert_eq!(a.get(3), 2.0);
        assert_eq!(a.get(2), 0.0);
        assert!(cosine_sparse(&a, &SparseVector::zero(4)).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in proptest::collection::vec(-10.0f64..10.0, 8), b in proptest::collection::vec(-10.0f64..10.0, 8)) {
            let ab = cosine_dense(&a, &b).unwrap();
            let ba = cosine_dense(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab.abs() <= 1.0);
        }

        #[test]
        fn self_cosine_is_one(a in proptest::collection::vec(0.01f64..10.0, 1..12)) {
            let c = cosine_dense(&a, &a).unwrap();
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }
}
