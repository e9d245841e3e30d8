#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;

/// Nonnegative `n x n` matrix with entry density drawn per matrix and
/// weights in [0.2, 1].
pub fn nonnegative(max_n: usize, zero_diag: bool) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n, 0.1f64..0.9).prop_flat_map(move |(n, density)| {
        proptest::collection::vec((0.0f64..1.0, 0.2f64..1.0), n * n).prop_map(move |cells| {
            DMatrix::from_fn(n, n, |i, j| {
                let (coin, w) = cells[i * n + j];
                if (zero_diag && i == j) || coin >= density {
                    0.0
                } else {
                    w
                }
            })
        })
    })
}

/// Row-normalized version of [`nonnegative`]; empty rows point at the next
/// node.
pub fn stochastic(max_n: usize, zero_diag: bool) -> impl Strategy<Value = DMatrix<f64>> {
    nonnegative(max_n, zero_diag).prop_map(normalize_rows)
}

pub fn normalize_rows(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        if m.row(i).sum() == 0.0 {
            m[(i, (i + 1) % n)] = 1.0;
        }
        let s = m.row(i).sum();
        m.row_mut(i).scale_mut(1.0 / s);
    }
    m
}

pub fn repeated_square(m: &DMatrix<f64>, times: usize) -> DMatrix<f64> {
    let mut p = m.clone();
    for _ in 0..times {
        p = &p * &p;
    }
    p
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max)
}

/// Vector of `n` values in `range`, `n` taken from the matrix.
pub fn with_values(
    m: impl Strategy<Value = DMatrix<f64>>,
    lo: f64,
    hi: f64,
) -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    m.prop_flat_map(move |m| {
        let n = m.nrows();
        (Just(m), proptest::collection::vec(lo..hi, n))
    })
}
