//! Twin bound regressors: assembling the two duals, training, prediction and
//! the support-vector census.
//!
//! The lower regressor `f₁` and the upper regressor `f₂` are expanded over the
//! training points as
//!
//! ```text
//! f₁(x) = Σⱼ (C₁τ − αⱼ)(K(xⱼ, x) + 1)
//! f₂(x) = Σⱼ (α*ⱼ − C₂(1−τ))(K(xⱼ, x) + 1)
//! ```
//!
//! and the quantile estimate is their mean.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{check_dim, invalid, Result};
use crate::kernel::{
    build_augmented_gram_with_limit, AugmentedGram, KernelSpec, DEFAULT_GRAM_ROW_LIMIT,
};
use crate::params::Hyperparams;
use crate::qp::{solve, BoxQp, SolveResult};

/// Residual magnitude treated as zero by [`coverage_stats`].
pub const ZERO_RESIDUAL_TOL: f64 = 1e-8;

/// Relative band used to decide whether a multiplier sits at 0 or at its cap.
pub const DEFAULT_SV_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Standardize features on the training data before building the Gram matrix.
    pub standardize: bool,
    pub gram_row_limit: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            standardize: false,
            gram_row_limit: DEFAULT_GRAM_ROW_LIMIT,
        }
    }
}

/// Solver outcome for one dual, without the multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualDiagnostics {
    pub epochs_run: usize,
    pub final_pg_norm: f64,
    pub objective: f64,
    pub converged: bool,
    #[serde(default)]
    pub degenerate_updates: usize,
}

impl From<&SolveResult> for DualDiagnostics {
    fn from(r: &SolveResult) -> Self {
        Self {
            epochs_run: r.epochs_run,
            final_pg_norm: r.final_pg_norm,
            objective: r.objective,
            converged: r.converged,
            degenerate_updates: r.degenerate_updates,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub lower: DualDiagnostics,
    pub upper: DualDiagnostics,
}

impl FitDiagnostics {
    pub fn converged(&self) -> bool {
        self.lower.converged && self.upper.converged
    }
}

/// Explicit primal weights `u = [w; b]` for the linear kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCache {
    pub u_lower: Vec<f64>,
    pub u_upper: Vec<f64>,
}

impl LinearCache {
    fn eval(u: &[f64], x: ArrayView1<'_, f64>) -> f64 {
        let (w, b) = u.split_at(u.len() - 1);
        w.iter().zip(x.iter()).map(|(w, x)| w * x).sum::<f64>() + b[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub(crate) hyper: Hyperparams,
    pub(crate) alpha_lower: Vec<f64>,
    pub(crate) alpha_upper: Vec<f64>,
    /// Training inputs after standardization (if any).
    pub(crate) train_inputs: Array2<f64>,
    pub(crate) standardizer: Option<Standardizer>,
    pub(crate) linear_cache: Option<LinearCache>,
    pub(crate) diagnostics: FitDiagnostics,
    pub(crate) fit_seconds: f64,
}

/// Lower-bound dual: `d = C₁τ·H̄e − Y + ε₁e`, cap `C₁`.
pub fn assemble_lower_dual<'g>(
    gram: &'g AugmentedGram,
    y: &[f64],
    h: &Hyperparams,
) -> Result<BoxQp<'g>> {
    check_dim(gram.dim(), y.len())?;
    let scale = h.c1 * h.tau;
    let d = gram
        .row_sums()
        .iter()
        .zip(y)
        .map(|(s, yi)| scale * s - yi + h.eps1)
        .collect();
    BoxQp::new(gram.matrix().view(), d, h.c1)
}

/// Upper-bound dual: `d = C₂(1−τ)·H̄e + Y + ε₂e`, cap `C₂`.
pub fn assemble_upper_dual<'g>(
    gram: &'g AugmentedGram,
    y: &[f64],
    h: &Hyperparams,
) -> Result<BoxQp<'g>> {
    check_dim(gram.dim(), y.len())?;
    let scale = h.c2 * (1.0 - h.tau);
    let d = gram
        .row_sums()
        .iter()
        .zip(y)
        .map(|(s, yi)| scale * s + yi + h.eps2)
        .collect();
    BoxQp::new(gram.matrix().view(), d, h.c2)
}

/// Trains on raw features with cold-started duals.
pub fn fit(data: &Dataset, h: &Hyperparams) -> Result<TrainedModel> {
    fit_with(data, h, &FitOptions::default())
}

pub fn fit_with(data: &Dataset, h: &Hyperparams, opts: &FitOptions) -> Result<TrainedModel> {
    fit_warm(data, h, opts, None)
}

/// Trains, optionally warm-starting both duals from a previous model's multipliers.
pub fn fit_warm(
    data: &Dataset,
    h: &Hyperparams,
    opts: &FitOptions,
    warm: Option<&TrainedModel>,
) -> Result<TrainedModel> {
    h.validate()?;
    let start = Instant::now();
    let (prepared, standardizer) = prepare(data, opts.standardize)?;
    let gram = build_augmented_gram_with_limit(&prepared, &h.kernel, opts.gram_row_limit)?;
    let mut model = fit_on_gram(&gram, &prepared, h, warm)?;
    model.standardizer = standardizer;
    model.fit_seconds = start.elapsed().as_secs_f64();
    Ok(model)
}

/// Applies (and fits) the standardization requested in `opts`.
pub(crate) fn prepare(
    data: &Dataset,
    standardize: bool,
) -> Result<(Dataset, Option<Standardizer>)> {
    if standardize {
        let s = Standardizer::fit(data.inputs());
        Ok((data.with_inputs(s.transform(data.inputs())?), Some(s)))
    } else {
        Ok((data.clone(), None))
    }
}

/// Trains both duals over a prebuilt Gram matrix of `data` (already in model space).
///
/// The returned model carries no standardizer; callers that standardized the
/// inputs attach it themselves.
pub fn fit_on_gram(
    gram: &AugmentedGram,
    data: &Dataset,
    h: &Hyperparams,
    warm: Option<&TrainedModel>,
) -> Result<TrainedModel> {
    h.validate()?;
    check_dim(gram.dim(), data.len())?;
    let start = Instant::now();
    let y = data
        .targets()
        .as_slice()
        .expect("owned targets are contiguous");
    let lower = assemble_lower_dual(gram, y, h)?;
    let upper = assemble_upper_dual(gram, y, h)?;

    let (warm_lower, warm_upper) = match warm {
        Some(m) => {
            check_dim(data.len(), m.alpha_lower.len())?;
            (
                Some(m.alpha_lower.as_slice()),
                Some(m.alpha_upper.as_slice()),
            )
        }
        None => (None, None),
    };
    let (lo, up) = rayon::join(
        || solve(&lower, &h.solver, warm_lower),
        || solve(&upper, &h.solver, warm_upper),
    );
    let (lo, up) = (lo?, up?);

    let train_inputs = data.inputs().clone();
    let linear_cache = matches!(h.kernel, KernelSpec::Linear)
        .then(|| linear_weights(&train_inputs, h, &lo.alpha, &up.alpha));
    Ok(TrainedModel {
        hyper: *h,
        diagnostics: FitDiagnostics {
            lower: (&lo).into(),
            upper: (&up).into(),
        },
        alpha_lower: lo.alpha,
        alpha_upper: up.alpha,
        train_inputs,
        standardizer: None,
        linear_cache,
        fit_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `u₁ = Gᵀ(C₁τe − α)`, `u₂ = Gᵀ(α* − C₂(1−τ)e)` with `G = [A e]`.
fn linear_weights(a: &Array2<f64>, h: &Hyperparams, lower: &[f64], upper: &[f64]) -> LinearCache {
    let n = a.ncols();
    let mut u_lower = vec![0.0; n + 1];
    let mut u_upper = vec![0.0; n + 1];
    let (cl, cu) = (h.c1 * h.tau, h.c2 * (1.0 - h.tau));
    for ((row, al), au) in a.rows().into_iter().zip(lower).zip(upper) {
        let (wl, wu) = (cl - al, au - cu);
        for (k, v) in row.iter().enumerate() {
            u_lower[k] += wl * v;
            u_upper[k] += wu * v;
        }
        u_lower[n] += wl;
        u_upper[n] += wu;
    }
    LinearCache { u_lower, u_upper }
}

/// Indices grouped by where their multipliers sit in the box.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SupportVectorCensus {
    /// `0 < αᵢ < C₁`: on the ε₁-insensitive lower regressor.
    pub on_lower: Vec<usize>,
    /// `αᵢ = C₁`: below it.
    pub below_lower: Vec<usize>,
    /// `αᵢ = 0`: above it.
    pub above_lower: Vec<usize>,
    /// `0 < α*ᵢ < C₂`: on the ε₂-insensitive upper regressor.
    pub on_upper: Vec<usize>,
    /// `α*ᵢ = C₂`: above it.
    pub above_upper: Vec<usize>,
    /// `α*ᵢ = 0`: below it.
    pub inside: Vec<usize>,
    /// Points with a nonzero multiplier in both duals.
    pub i_sv: Vec<usize>,
}

/// Position of a multiplier relative to its box `[0, cap]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoxPosition {
    Lower,
    Free,
    Upper,
}

fn position(a: f64, cap: f64, band: f64) -> BoxPosition {
    if a <= band {
        BoxPosition::Lower
    } else if a >= cap - band {
        BoxPosition::Upper
    } else {
        BoxPosition::Free
    }
}

/// Counts of positive, negative and zero residuals `yᵢ − f(xᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl CoverageStats {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.zero
    }

    /// Fraction of points strictly below the fitted quantile curve.
    pub fn below_fraction(&self) -> f64 {
        self.negative as f64 / self.total() as f64
    }
}

impl TrainedModel {
    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn alpha_lower(&self) -> &[f64] {
        &self.alpha_lower
    }

    pub fn alpha_upper(&self) -> &[f64] {
        &self.alpha_upper
    }

    pub fn train_inputs(&self) -> &Array2<f64> {
        &self.train_inputs
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn linear_cache(&self) -> Option<&LinearCache> {
        self.linear_cache.as_ref()
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    /// Wall-clock seconds spent in training (not persisted).
    pub fn fit_seconds(&self) -> f64 {
        self.fit_seconds
    }

    pub fn n_features(&self) -> usize {
        self.train_inputs.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.nrows()
    }

    fn to_model_space(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.n_features(), x.len())?;
        match &self.standardizer {
            Some(s) => s.transform_point(x),
            None => Ok(x.to_owned()),
        }
    }

    /// `K(xⱼ, x) + 1` for every training point.
    fn augmented_kernel_row(&self, z: ArrayView1<'_, f64>) -> Vec<f64> {
        self.train_inputs
            .rows()
            .into_iter()
            .map(|xj| self.hyper.kernel.eval_unchecked(xj, z) + 1.0)
            .collect()
    }

    /// `(f₁(x), f₂(x))` through the kernel expansion over training points.
    pub fn predict_bounds_dual(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
        let z = self.to_model_space(x)?;
        let k = self.augmented_kernel_row(z.view());
        let (cl, cu) = (
            self.hyper.c1 * self.hyper.tau,
            self.hyper.c2 * (1.0 - self.hyper.tau),
        );
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for ((kj, al), au) in k.iter().zip(&self.alpha_lower).zip(&self.alpha_upper) {
            f1 += (cl - al) * kj;
            f2 += (au - cu) * kj;
        }
        Ok((f1, f2))
    }

    /// `(f₁(x), f₂(x))`, using the explicit weights when the kernel is linear.
    pub fn predict_bounds(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
        match &self.linear_cache {
            Some(cache) => {
                let z = self.to_model_space(x)?;
                Ok((
                    LinearCache::eval(&cache.u_lower, z.view()),
                    LinearCache::eval(&cache.u_upper, z.view()),
                ))
            }
            None => self.predict_bounds_dual(x),
        }
    }

    pub fn predict_lower(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.predict_bounds(x)?.0)
    }

    pub fn predict_upper(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.predict_bounds(x)?.1)
    }

    /// `f(x) = ½(f₁(x) + f₂(x))`.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let (f1, f2) = self.predict_bounds(x)?;
        Ok(0.5 * (f1 + f2))
    }

    /// The two terms of `f(x) = ½(α* − α)ᵀk + ½[C₁τ − C₂(1−τ)]eᵀk`,
    /// with `k` the augmented kernel row at `x`.
    pub fn predict_decomposed(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
        let z = self.to_model_space(x)?;
        let k = self.augmented_kernel_row(z.view());
        let spread: f64 = k
            .iter()
            .zip(&self.alpha_lower)
            .zip(&self.alpha_upper)
            .map(|((kj, al), au)| (au - al) * kj)
            .sum();
        let h = &self.hyper;
        let shift = h.c1 * h.tau - h.c2 * (1.0 - h.tau);
        Ok((0.5 * spread, 0.5 * shift * k.iter().sum::<f64>()))
    }

    /// `(f₁, f₂)` for every row of `inputs`.
    pub fn predict_bounds_batch(&self, inputs: &Array2<f64>) -> Result<Vec<(f64, f64)>> {
        check_dim(self.n_features(), inputs.ncols())?;
        inputs
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|row| self.predict_bounds(row))
            .collect()
    }

    pub fn predict_batch(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self
            .predict_bounds_batch(inputs)?
            .into_iter()
            .map(|(a, b)| 0.5 * (a + b))
            .collect())
    }

    pub fn classify_support_vectors(&self) -> SupportVectorCensus {
        self.classify_support_vectors_with(DEFAULT_SV_REL_TOL)
    }

    /// Census with multiplier band `rel_tol·C` around 0 and `C`.
    pub fn classify_support_vectors_with(&self, rel_tol: f64) -> SupportVectorCensus {
        let (c1, c2) = (self.hyper.c1, self.hyper.c2);
        let mut census = SupportVectorCensus::default();
        for (i, (&a, &b)) in self.alpha_lower.iter().zip(&self.alpha_upper).enumerate() {
            let lo = position(a, c1, rel_tol * c1);
            let up = position(b, c2, rel_tol * c2);
            match lo {
                BoxPosition::Lower => census.above_lower.push(i),
                BoxPosition::Free => census.on_lower.push(i),
                BoxPosition::Upper => census.below_lower.push(i),
            }
            match up {
                BoxPosition::Lower => census.inside.push(i),
                BoxPosition::Free => census.on_upper.push(i),
                BoxPosition::Upper => census.above_upper.push(i),
            }
            if lo != BoxPosition::Lower && up != BoxPosition::Lower {
                census.i_sv.push(i);
            }
        }
        census
    }
}

/// Residual sign counts of `yᵢ − f(xᵢ)` over `data`.
pub fn coverage_stats(model: &TrainedModel, data: &Dataset) -> Result<CoverageStats> {
    let preds = model.predict_batch(data.inputs())?;
    Ok(coverage_from_predictions(
        data.targets().as_slice().unwrap_or(&[]),
        &preds,
    ))
}

pub(crate) fn coverage_from_predictions(y: &[f64], preds: &[f64]) -> CoverageStats {
    let mut stats = CoverageStats {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for (yi, fi) in y.iter().zip(preds) {
        let r = yi - fi;
        if r.abs() <= ZERO_RESIDUAL_TOL {
            stats.zero += 1;
        } else if r > 0.0 {
            stats.positive += 1;
        } else {
            stats.negative += 1;
        }
    }
    stats
}

/// Rebuilds a model from persisted parts, checking shapes and dual feasibility.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_model(
    hyper: Hyperparams,
    alpha_lower: Vec<f64>,
    alpha_upper: Vec<f64>,
    train_inputs: Array2<f64>,
    standardizer: Option<Standardizer>,
    linear_cache: Option<LinearCache>,
    diagnostics: FitDiagnostics,
) -> Result<TrainedModel> {
    hyper.validate()?;
    let l = train_inputs.nrows();
    check_dim(l, alpha_lower.len())?;
    check_dim(l, alpha_upper.len())?;
    if let Some(s) = &standardizer {
        check_dim(train_inputs.ncols(), s.dim())?;
    }
    let feasible = |a: &[f64], cap: f64| a.iter().all(|v| (0.0..=cap).contains(v));
    if !feasible(&alpha_lower, hyper.c1) || !feasible(&alpha_upper, hyper.c2) {
        return Err(invalid("stored multipliers violate their box constraints"));
    }
    let linear_cache = match (&hyper.kernel, linear_cache) {
        (KernelSpec::Linear, Some(c)) => {
            check_dim(train_inputs.ncols() + 1, c.u_lower.len())?;
            check_dim(train_inputs.ncols() + 1, c.u_upper.len())?;
            Some(c)
        }
        (KernelSpec::Linear, None) => Some(linear_weights(
            &train_inputs,
            &hyper,
            &alpha_lower,
            &alpha_upper,
        )),
        (_, _) => None,
    };
    Ok(TrainedModel {
        hyper,
        alpha_lower,
        alpha_upper,
        train_inputs,
        standardizer,
        linear_cache,
        diagnostics,
        fit_seconds: 0.0,
    })
}
