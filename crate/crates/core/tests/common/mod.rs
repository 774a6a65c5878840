//! Test-only oracles and instance generators, independent of the solver.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive active-set enumeration for `min ½αᵀQα − dᵀα, 0 ≤ α ≤ cap`.
///
/// Every assignment of each coordinate to {lower, free, upper} is tried; the
/// free block is solved from its stationarity equations and the best feasible
/// candidate is kept.
pub fn box_qp_oracle(q: &Array2<f64>, d: &[f64], cap: f64) -> Vec<f64> {
    let l = d.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(l as u32);
    for code in 0..total {
        let mut c = code;
        let mut state = vec![0u8; l];
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut alpha = vec![0.0; l];
        let free: Vec<usize> = (0..l).filter(|&i| state[i] == 1).collect();
        for i in 0..l {
            if state[i] == 2 {
                alpha[i] = cap;
            }
        }
        if !free.is_empty() {
            let m = free.len();
            let a = DMatrix::from_fn(m, m, |r, k| q[[free[r], free[k]]]);
            let b = DVector::from_iterator(
                m,
                free.iter().map(|&i| {
                    d[i] - (0..l)
                        .filter(|j| state[*j] == 2)
                        .map(|j| q[[i, j]] * cap)
                        .sum::<f64>()
                }),
            );
            let Some(sol) = a.lu().solve(&b) else {
                continue;
            };
            for (k, &i) in free.iter().enumerate() {
                alpha[i] = sol[k];
            }
        }
        if alpha.iter().any(|&v| v < -1e-12 || v > cap + 1e-12) {
            continue;
        }
        let obj = quad_objective(q, d, &alpha);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, alpha));
        }
    }
    best.expect("the origin is always feasible").1
}

pub fn quad_objective(q: &Array2<f64>, d: &[f64], alpha: &[f64]) -> f64 {
    let l = d.len();
    let mut v = 0.0;
    for i in 0..l {
        for j in 0..l {
            v += 0.5 * alpha[i] * q[[i, j]] * alpha[j];
        }
        v -= d[i] * alpha[i];
    }
    v
}

/// `BBᵀ` with `B` of size `l × (l + 3)`, entries uniform on [−1, 1].
pub fn random_psd(rng: &mut ChaCha8Rng, l: usize) -> Array2<f64> {
    let k = l + 3;
    let b: Vec<f64> = (0..l * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    Array2::from_shape_fn((l, l), |(i, j)| {
        (0..k).map(|t| b[i * k + t] * b[j * k + t]).sum()
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &Array2<f64>) -> (f64, f64) {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let ev = dm.symmetric_eigen().eigenvalues;
    (ev.min(), ev.max())
}
