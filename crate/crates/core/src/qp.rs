#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Box-constrained convex QP `min ½αᵀQα − dᵀα  s.t. 0 ≤ α ≤ C` solved by
//! dual coordinate descent with closed-form clipped one-variable updates.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result, TsvqrError};

/// Curvature below which a coordinate's subproblem is treated as linear.
const DEGENERATE_CURVATURE: f64 = 1e-12;

/// Free-set size above which the Newton polish is skipped (its cost is cubic).
const POLISH_MAX_FREE: usize = 512;

/// Newton rounds per polish; each blocked round pins one more coordinate.
const POLISH_MAX_ROUNDS: usize = 64;

/// A QP instance borrowing its (symmetric PSD) quadratic term.
#[derive(Debug, Clone)]
pub struct BoxQp<'a> {
    q: ArrayView2<'a, f64>,
    d: Vec<f64>,
    cap: f64,
}

impl<'a> BoxQp<'a> {
    pub fn new(q: ArrayView2<'a, f64>, d: Vec<f64>, cap: f64) -> Result<Self> {
        check_dim(q.nrows(), q.ncols())?;
        check_dim(q.nrows(), d.len())?;
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(invalid(format!(
                "box bound must be positive and finite, got {cap}"
            )));
        }
        if let Some(i) = d.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("linear term has non-finite entry at {i}")));
        }
        let l = q.nrows();
        for i in 0..l {
            for j in (i + 1)..l {
                let (a, b) = (q[[i, j]], q[[j, i]]);
                if !((a - b).abs() <= 1e-12 * a.abs().max(1.0)) {
                    return Err(invalid(format!(
                        "quadratic term is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { q, d, cap })
    }

    pub fn q(&self) -> ArrayView2<'a, f64> {
        self.q
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Full gradient `Qα − d`.
    pub fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        self.q
            .rows()
            .into_iter()
            .zip(&self.d)
            .map(|(row, di)| row.iter().zip(alpha).map(|(q, a)| q * a).sum::<f64>() - di)
            .collect()
    }

    /// Max-norm of the projected gradient for the given iterate and gradient.
    pub fn projected_gradient_norm(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        alpha
            .iter()
            .zip(grad)
            .map(|(&a, &g)| projected(a, g, self.cap).abs())
            .fold(0.0, f64::max)
    }
}

/// -1 at the lower bound, 1 at the upper bound, 0 strictly inside.
#[inline]
fn box_status(a: f64, cap: f64) -> i8 {
    if a <= 0.0 {
        -1
    } else if a >= cap {
        1
    } else {
        0
    }
}

#[inline]
fn projected(alpha: f64, grad: f64, cap: f64) -> f64 {
    if alpha <= 0.0 {
        grad.min(0.0)
    } else if alpha >= cap {
        grad.max(0.0)
    } else {
        grad
    }
}

/// `½αᵀQα − dᵀα`.
pub fn objective(qp: &BoxQp<'_>, alpha: &[f64]) -> Result<f64> {
    check_dim(qp.dim(), alpha.len())?;
    let quad: f64 =
        qp.q.rows()
            .into_iter()
            .zip(alpha)
            .map(|(row, ai)| ai * row.iter().zip(alpha).map(|(q, a)| q * a).sum::<f64>())
            .sum();
    let lin: f64 = qp.d.iter().zip(alpha).map(|(d, a)| d * a).sum();
    Ok(0.5 * quad - lin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the projected-gradient max-norm is at most this value.
    pub tol: f64,
    pub max_epochs: usize,
    /// Visit coordinates in a fresh seeded random order every epoch.
    pub shuffle: bool,
    pub seed: u64,
    /// After each sweep, take an exact-line-search Newton step on the free
    /// coordinates (those strictly inside the box).
    #[serde(default = "default_polish")]
    pub polish: bool,
}

fn default_polish() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_epochs: 1000,
            shuffle: false,
            seed: 0,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub alpha: Vec<f64>,
    pub epochs_run: usize,
    pub final_pg_norm: f64,
    pub objective: f64,
    pub converged: bool,
    /// Updates where the coordinate curvature was below 1e-12 and the
    /// variable was pushed to a bound by the gradient sign.
    #[serde(default)]
    pub degenerate_updates: usize,
}

/// Progress reported to [`solve_observed`].
#[derive(Debug)]
pub enum SolverEvent<'s> {
    /// One coordinate was moved; `alpha` and `gradient` reflect the new state.
    Update {
        epoch: usize,
        coordinate: usize,
        alpha: &'s [f64],
        gradient: &'s [f64],
    },
    /// A polish step moved the free coordinates along a Newton direction.
    Polish {
        epoch: usize,
        step: f64,
        alpha: &'s [f64],
        gradient: &'s [f64],
    },
    EpochEnd {
        epoch: usize,
        alpha: &'s [f64],
        gradient: &'s [f64],
        pg_norm: f64,
    },
}

/// Solves the QP starting from `warm_start` (or the origin).
pub fn solve(
    qp: &BoxQp<'_>,
    cfg: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<SolveResult> {
    solve_observed(qp, cfg, warm_start, |_| {})
}

/// [`solve`] with a callback invoked after every coordinate move and every epoch.
pub fn solve_observed<F>(
    qp: &BoxQp<'_>,
    cfg: &SolverConfig,
    warm_start: Option<&[f64]>,
    mut observer: F,
) -> Result<SolveResult>
where
    F: FnMut(SolverEvent<'_>),
{
    cfg.validate()?;
    let l = qp.dim();
    let cap = qp.cap;
    let q = qp.q;

    let diag: Vec<f64> = (0..l).map(|i| q[[i, i]]).collect();
    if let Some(i) = diag.iter().position(|v| !(*v >= 0.0)) {
        return Err(TsvqrError::Solver {
            coordinate: i,
            value: diag[i],
        });
    }

    let mut alpha = match warm_start {
        Some(w) => {
            check_dim(l, w.len())?;
            if let Some(i) = w.iter().position(|&a| !(0.0..=cap).contains(&a)) {
                return Err(invalid(format!(
                    "warm start entry {i} = {} lies outside [0, {cap}]",
                    w[i]
                )));
            }
            w.to_vec()
        }
        None => vec![0.0; l],
    };
    let mut grad = if alpha.iter().all(|&a| a == 0.0) {
        qp.d.iter().map(|d| -d).collect()
    } else {
        qp.gradient(&alpha)
    };

    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut epochs = 0;
    let mut degenerate = 0;
    let mut pg_norm = qp.projected_gradient_norm(&alpha, &grad);

    while pg_norm > cfg.tol && epochs < cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut status_changed = false;
        for &i in &order {
            let (ai, gi, qii) = (alpha[i], grad[i], diag[i]);
            let new = if qii < DEGENERATE_CURVATURE {
                degenerate += 1;
                if gi > 0.0 {
                    0.0
                } else if gi < 0.0 {
                    cap
                } else {
                    ai
                }
            } else {
                (ai - gi / qii).clamp(0.0, cap)
            };
            let delta = new - ai;
            if delta != 0.0 {
                status_changed |= box_status(ai, cap) != box_status(new, cap);
                alpha[i] = new;
                for (g, qj) in grad.iter_mut().zip(q.row(i)) {
                    *g += delta * qj;
                }
                observer(SolverEvent::Update {
                    epoch: epochs,
                    coordinate: i,
                    alpha: &alpha,
                    gradient: &grad,
                });
            }
        }
        // polish only once the sweep leaves every bound/free status unchanged
        if cfg.polish && !status_changed && qp.projected_gradient_norm(&alpha, &grad) > cfg.tol {
            if let Some(step) = polish_free_set(&q, cap, &mut alpha, &mut grad) {
                observer(SolverEvent::Polish {
                    epoch: epochs,
                    step,
                    alpha: &alpha,
                    gradient: &grad,
                });
            }
        }
        pg_norm = qp.projected_gradient_norm(&alpha, &grad);
        observer(SolverEvent::EpochEnd {
            epoch: epochs,
            alpha: &alpha,
            gradient: &grad,
            pg_norm,
        });
        epochs += 1;
    }

    let objective = objective(qp, &alpha)?;
    Ok(SolveResult {
        converged: pg_norm <= cfg.tol,
        alpha,
        epochs_run: epochs,
        final_pg_norm: pg_norm,
        objective,
        degenerate_updates: degenerate,
    })
}

/// Newton refinement of the free coordinates `F = {i : 0 < αᵢ < C}`.
///
/// Each round solves `Q_FF p = −g_F` and takes an exact line search along `p`
/// clipped to the box; a coordinate that blocks the step is pinned to its
/// bound and the round repeats on the smaller free set. Steps are only taken
/// along descent directions and never past the one-dimensional minimizer, so
/// the objective never increases. Returns the total step length, if any.
fn polish_free_set(
    q: &ArrayView2<'_, f64>,
    cap: f64,
    alpha: &mut [f64],
    grad: &mut [f64],
) -> Option<f64> {
    let mut total = 0.0;
    for _ in 0..POLISH_MAX_ROUNDS {
        match newton_round(q, cap, alpha, grad) {
            Some((step, blocked)) => {
                total += step;
                if !blocked {
                    break;
                }
            }
            None => break,
        }
    }
    (total > 0.0).then_some(total)
}

fn newton_round(
    q: &ArrayView2<'_, f64>,
    cap: f64,
    alpha: &mut [f64],
    grad: &mut [f64],
) -> Option<(f64, bool)> {
    let free: Vec<usize> = (0..alpha.len())
        .filter(|&i| alpha[i] > 0.0 && alpha[i] < cap)
        .collect();
    let m = free.len();
    if m == 0 || m > POLISH_MAX_FREE {
        return None;
    }
    let q_ff = DMatrix::from_fn(m, m, |a, b| q[[free[a], free[b]]]);
    let rhs = DVector::from_iterator(m, free.iter().map(|&i| -grad[i]));
    let scale = q_ff.diagonal().max();
    let dir = [0.0, 1e-12, 1e-10, 1e-8].iter().find_map(|&ridge| {
        let mut shifted = q_ff.clone();
        for k in 0..m {
            shifted[(k, k)] += ridge * scale;
        }
        shifted.cholesky().map(|c| c.solve(&rhs))
    })?;

    let slope = -rhs.dot(&dir);
    let curvature = dir.dot(&(&q_ff * &dir));
    if !(slope < 0.0) || !(curvature > 0.0) {
        return None;
    }
    let mut step = -slope / curvature;
    let mut blocking = None;
    for (k, &i) in free.iter().enumerate() {
        let limit = if dir[k] > 0.0 {
            (cap - alpha[i]) / dir[k]
        } else if dir[k] < 0.0 {
            -alpha[i] / dir[k]
        } else {
            continue;
        };
        if limit < step {
            step = limit;
            blocking = Some(k);
        }
    }
    if !(step > 0.0) {
        return None;
    }

    let mut moved = vec![0.0; m];
    for (k, &i) in free.iter().enumerate() {
        let target = match blocking {
            Some(b) if b == k => {
                if dir[k] > 0.0 {
                    cap
                } else {
                    0.0
                }
            }
            _ => (alpha[i] + step * dir[k]).clamp(0.0, cap),
        };
        moved[k] = target - alpha[i];
        alpha[i] = target;
    }
    for (j, g) in grad.iter_mut().enumerate() {
        let row = q.row(j);
        *g += free
            .iter()
            .zip(&moved)
            .map(|(&i, dm)| row[i] * dm)
            .sum::<f64>();
    }
    Some((step, blocking.is_some()))
}
