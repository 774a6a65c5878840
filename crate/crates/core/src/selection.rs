//! Evaluation metrics, the GACV criterion and exhaustive grid search.

use std::cmp::Ordering;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, invalid, Result};
use crate::kernel::{build_augmented_gram_with_limit, KernelSpec};
use crate::loss::{check_tau, pinball};
use crate::model::{fit_on_gram, prepare, FitDiagnostics, FitOptions, TrainedModel};
use crate::params::Hyperparams;
use crate::qp::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean pinball loss.
    pub risk: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when some target is exactly zero.
    pub mape: Option<f64>,
    pub gacv: Option<f64>,
    pub sv_count: usize,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// Risk, RMSE, MAE and MAPE of `preds` against `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualMetrics {
    pub risk: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
}

pub fn residual_metrics(y: &[f64], preds: &[f64], tau: f64) -> Result<ResidualMetrics> {
    check_tau(tau)?;
    check_dim(y.len(), preds.len())?;
    if y.is_empty() {
        return Err(invalid("cannot evaluate on an empty set"));
    }
    let m = y.len() as f64;
    let mut risk = 0.0;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut mape_defined = true;
    for (yi, fi) in y.iter().zip(preds) {
        let r = yi - fi;
        risk += pinball(r, tau);
        sq += r * r;
        abs += r.abs();
        if *yi == 0.0 {
            mape_defined = false;
        } else {
            pct += r.abs() / yi.abs();
        }
    }
    Ok(ResidualMetrics {
        risk: risk / m,
        rmse: (sq / m).sqrt(),
        mae: abs / m,
        mape: mape_defined.then_some(pct / m),
    })
}

/// Test-set metrics. `gacv` is left unset; see [`gacv`].
pub fn evaluate(model: &TrainedModel, test: &Dataset, tau: f64) -> Result<EvalReport> {
    let start = Instant::now();
    let preds = model.predict_batch(test.inputs())?;
    let predict_seconds = start.elapsed().as_secs_f64();
    let y = test.targets().as_slice().expect("contiguous targets");
    let m = residual_metrics(y, &preds, tau)?;
    Ok(EvalReport {
        risk: m.risk,
        rmse: m.rmse,
        mae: m.mae,
        mape: m.mape,
        gacv: None,
        sv_count: model.classify_support_vectors().i_sv.len(),
        fit_seconds: model.fit_seconds(),
        predict_seconds,
    })
}

/// `Σ ρ_τ(rᵢ) / (l − |I_SV|)`, or `None` when the denominator vanishes.
pub fn gacv_from_residuals(residuals: &[f64], sv_count: usize, tau: f64) -> Option<f64> {
    let l = residuals.len();
    if sv_count >= l {
        return None;
    }
    let total: f64 = residuals.iter().map(|&r| pinball(r, tau)).sum();
    Some(total / (l - sv_count) as f64)
}

/// GACV on the training set the model was fit to.
pub fn gacv(model: &TrainedModel, data: &Dataset, tau: f64) -> Result<Option<f64>> {
    check_tau(tau)?;
    check_dim(model.n_train(), data.len())?;
    let preds = model.predict_batch(data.inputs())?;
    let residuals: Vec<f64> = data
        .targets()
        .iter()
        .zip(&preds)
        .map(|(y, f)| y - f)
        .collect();
    let sv = model.classify_support_vectors().i_sv.len();
    Ok(gacv_from_residuals(&residuals, sv, tau))
}

/// `2^lo, 2^(lo+1), …, 2^hi`.
pub fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    /// Search only `C₁ = C₂`.
    pub tie_c: bool,
    /// Search only `ε₁ = ε₂`.
    pub tie_eps: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c_values: powers_of_two(-8, 8),
            p_values: powers_of_two(-8, 8),
            eps_values: (1..=10).map(|k| k as f64 / 100.0).collect(),
            tau_values: vec![0.10, 0.25, 0.50, 0.75, 0.90],
            tie_c: true,
            tie_eps: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, values) in [
            ("c", &self.c_values),
            ("p", &self.p_values),
            ("eps", &self.eps_values),
        ] {
            if values.is_empty() {
                return Err(invalid(format!("{name} grid is empty")));
            }
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(invalid(format!("{name} grid entries must be positive")));
            }
        }
        if self.tau_values.is_empty() {
            return Err(invalid("tau grid is empty"));
        }
        self.tau_values.iter().try_for_each(|&t| check_tau(t))
    }

    /// Every hyperparameter combination for one quantile level, in enumeration order.
    pub fn cells(
        &self,
        tau: f64,
        kernel_family: &KernelSpec,
        solver: SolverConfig,
    ) -> Vec<Hyperparams> {
        let kernels: Vec<KernelSpec> = match kernel_family {
            KernelSpec::Linear => vec![KernelSpec::Linear],
            k => self.p_values.iter().map(|&p| k.with_param(p)).collect(),
        };
        let mut out = Vec::new();
        for kernel in kernels {
            for &c1 in &self.c_values {
                let c2s = if self.tie_c {
                    vec![c1]
                } else {
                    self.c_values.clone()
                };
                for c2 in c2s {
                    for &eps1 in &self.eps_values {
                        let eps2s = if self.tie_eps {
                            vec![eps1]
                        } else {
                            self.eps_values.clone()
                        };
                        for eps2 in eps2s {
                            out.push(Hyperparams {
                                c1,
                                c2,
                                eps1,
                                eps2,
                                tau,
                                kernel,
                                solver,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Outcome of fitting one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub hyper: Hyperparams,
    pub gacv: Option<f64>,
    /// Metrics on the training data; `None` if the fit failed.
    pub train_report: Option<EvalReport>,
    pub diagnostics: Option<FitDiagnostics>,
    pub error: Option<String>,
}

fn rank_key_cmp(a: &GridCell, b: &GridCell) -> Ordering {
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    let risk = |c: &GridCell| c.train_report.as_ref().map(|r| r.risk);
    opt(a.gacv, b.gacv)
        .then_with(|| opt(risk(a), risk(b)))
        .then_with(|| (a.hyper.c1 + a.hyper.c2).total_cmp(&(b.hyper.c1 + b.hyper.c2)))
}

/// Fits every cell for quantile level `tau` and ranks them by ascending GACV.
///
/// Undefined GACV ranks last; ties fall back to training risk, then to the
/// smaller `C₁ + C₂`, then to enumeration order. The Gram matrix is built
/// once per kernel parameter and shared by all cells using it.
pub fn grid_search(
    train: &Dataset,
    grid: &GridSpec,
    tau: f64,
    kernel_family: &KernelSpec,
    solver: SolverConfig,
    opts: &FitOptions,
) -> Result<Vec<GridCell>> {
    grid.validate()?;
    check_tau(tau)?;
    solver.validate()?;
    let (prepared, _) = prepare(train, opts.standardize)?;
    let cells = grid.cells(tau, kernel_family, solver);

    let mut results = Vec::with_capacity(cells.len());
    let mut start = 0;
    while start < cells.len() {
        let kernel = cells[start].kernel;
        let end = cells[start..]
            .iter()
            .position(|h| h.kernel != kernel)
            .map_or(cells.len(), |k| start + k);
        let gram = build_augmented_gram_with_limit(&prepared, &kernel, opts.gram_row_limit)?;
        let batch: Vec<GridCell> = cells[start..end]
            .par_iter()
            .map(|h| match fit_on_gram(&gram, &prepared, h, None) {
                Ok(model) => score_cell(&model, &prepared, h),
                Err(e) => GridCell {
                    hyper: *h,
                    gacv: None,
                    train_report: None,
                    diagnostics: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        results.extend(batch);
        start = end;
    }
    results.sort_by(rank_key_cmp);
    Ok(results)
}

fn score_cell(model: &TrainedModel, train: &Dataset, h: &Hyperparams) -> GridCell {
    let outcome = evaluate(model, train, h.tau).and_then(|mut report| {
        report.gacv = gacv(model, train, h.tau)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => GridCell {
            hyper: *h,
            gacv: report.gacv,
            train_report: Some(report),
            diagnostics: Some(*model.diagnostics()),
            error: None,
        },
        Err(e) => GridCell {
            hyper: *h,
            gacv: None,
            train_report: None,
            diagnostics: Some(*model.diagnostics()),
            error: Some(e.to_string()),
        },
    }
}

const GRID_CSV_HEADER: &str = "rank,kernel,p,c1,c2,eps1,eps2,tau,gacv,risk,rmse,mae,mape,sv_count,\
converged_lower,converged_upper,epochs_lower,epochs_upper,fit_seconds,predict_seconds,error";

/// One row per cell in ranked order. Undefined values are written as empty fields.
pub fn write_grid_csv<W: Write>(cells: &[GridCell], mut out: W) -> Result<()> {
    fn opt(v: Option<f64>) -> String {
        v.map(|v| v.to_string()).unwrap_or_default()
    }
    writeln!(out, "{GRID_CSV_HEADER}")?;
    for (rank, c) in cells.iter().enumerate() {
        let h = &c.hyper;
        let r = c.train_report.as_ref();
        let d = c.diagnostics.as_ref();
        let error = c.error.as_deref().unwrap_or("").replace(['"', ','], ";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            rank + 1,
            h.kernel.name(),
            opt(h.kernel.param()),
            h.c1,
            h.c2,
            h.eps1,
            h.eps2,
            h.tau,
            opt(c.gacv),
            opt(r.map(|r| r.risk)),
            opt(r.map(|r| r.rmse)),
            opt(r.map(|r| r.mae)),
            opt(r.and_then(|r| r.mape)),
            r.map(|r| r.sv_count.to_string()).unwrap_or_default(),
            d.map(|d| d.lower.converged.to_string()).unwrap_or_default(),
            d.map(|d| d.upper.converged.to_string()).unwrap_or_default(),
            d.map(|d| d.lower.epochs_run.to_string())
                .unwrap_or_default(),
            d.map(|d| d.upper.epochs_run.to_string())
                .unwrap_or_default(),
            opt(r.map(|r| r.fit_seconds)),
            opt(r.map(|r| r.predict_seconds)),
            error,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_zero() {
        let y = [1.0, -2.0, 3.5];
        let m = residual_metrics(&y, &y, 0.3).unwrap();
        assert_eq!((m.risk, m.rmse, m.mae, m.mape), (0.0, 0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn hand_evaluated_metrics() {
        let m = residual_metrics(&[2.0, 4.0], &[1.0, 5.0], 0.5).unwrap();
        assert!((m.risk - 0.5).abs() < 1e-15);
        assert!((m.rmse - 1.0).abs() < 1e-15);
        assert!((m.mae - 1.0).abs() < 1e-15);
        assert!((m.mape.unwrap() - 0.375).abs() < 1e-15);
        let m = residual_metrics(&[2.0, 4.0], &[1.0, 5.0], 0.9).unwrap();
        assert!((m.risk - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mape_undefined_on_zero_target() {
        let m = residual_metrics(&[0.0, 4.0], &[1.0, 5.0], 0.5).unwrap();
        assert_eq!(m.mape, None);
    }

    #[test]
    fn empty_or_mismatched_inputs() {
        assert!(residual_metrics(&[], &[], 0.5).is_err());
        assert!(residual_metrics(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(residual_metrics(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn gacv_examples() {
        assert_eq!(gacv_from_residuals(&[0.0, 0.0, 0.0], 0, 0.5), Some(0.0));
        assert_eq!(
            gacv_from_residuals(&[1.0, -1.0, 0.0, 0.0], 2, 0.5),
            Some(0.5)
        );
        assert_eq!(gacv_from_residuals(&[1.0, 2.0], 2, 0.5), None);
        // with no support vectors the denominator is l: plain mean pinball loss
        let r = [0.3, -1.2, 2.0, -0.1];
        let mean = r.iter().map(|&v| pinball(v, 0.25)).sum::<f64>() / 4.0;
        assert!((gacv_from_residuals(&r, 0, 0.25).unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn default_grid_matches_published_sets() {
        let g = GridSpec::default();
        assert_eq!(g.c_values.len(), 17);
        assert_eq!(g.c_values[0], 1.0 / 256.0);
        assert_eq!(g.c_values[16], 256.0);
        assert_eq!(g.p_values, g.c_values);
        assert_eq!(g.eps_values.len(), 10);
        assert!((g.eps_values[9] - 0.1).abs() < 1e-15);
        assert_eq!(g.tau_values, vec![0.10, 0.25, 0.50, 0.75, 0.90]);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn untying_c_squares_the_c_dimension() {
        let g = GridSpec {
            c_values: vec![1.0, 2.0, 4.0],
            p_values: vec![1.0],
            eps_values: vec![0.01],
            ..GridSpec::default()
        };
        let family = KernelSpec::Gaussian { p: 1.0 };
        assert_eq!(g.cells(0.5, &family, SolverConfig::default()).len(), 3);
        let untied = GridSpec { tie_c: false, ..g };
        assert_eq!(untied.cells(0.5, &family, SolverConfig::default()).len(), 9);
    }

    #[test]
    fn ranking_puts_undefined_last_and_breaks_ties() {
        let h = Hyperparams::symmetric(1.0, 0.01, 0.5, KernelSpec::Linear);
        let report = |risk| EvalReport {
            risk,
            rmse: 0.0,
            mae: 0.0,
            mape: None,
            gacv: None,
            sv_count: 0,
            fit_seconds: 0.0,
            predict_seconds: 0.0,
        };
        let cell = |c: f64, g: Option<f64>, risk: f64| GridCell {
            hyper: Hyperparams { c1: c, c2: c, ..h },
            gacv: g,
            train_report: Some(report(risk)),
            diagnostics: None,
            error: None,
        };
        let mut cells = [
            cell(1.0, None, 0.0),
            cell(2.0, Some(0.3), 0.2),
            cell(4.0, Some(0.3), 0.1),
            cell(8.0, Some(0.1), 0.9),
            cell(0.5, Some(0.3), 0.1),
        ];
        cells.sort_by(rank_key_cmp);
        let order: Vec<f64> = cells.iter().map(|c| c.hyper.c1).collect();
        assert_eq!(order, vec![8.0, 0.5, 4.0, 2.0, 1.0]);
    }
}
