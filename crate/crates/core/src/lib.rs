//! Twin support vector quantile regression.
//!
//! For a quantile level `τ`, two nonparallel ε-insensitive bound regressors
//! are trained by solving two box-constrained dual QPs with dual coordinate
//! descent; their mean estimates the conditional `τ`-quantile.
//!
//! ```no_run
//! use tsvqr::{fit, generate, Family, GeneratorSpec, Hyperparams, KernelSpec};
//!
//! let (train, test) = generate(&GeneratorSpec::new(Family::A1, 7)).unwrap();
//! let h = Hyperparams::symmetric(8.0, 0.01, 0.5, KernelSpec::Gaussian { p: 1.0 });
//! let model = fit(&train, &h).unwrap();
//! let f = model.predict_batch(test.inputs()).unwrap();
//! ```

pub mod data;
pub mod error;
pub mod io;
pub mod kernel;
pub mod loss;
pub mod model;
pub mod params;
pub mod qp;
pub mod selection;
pub mod synthetic;

pub use data::{Dataset, Standardizer};
pub use error::{Result, TsvqrError};
pub use kernel::{
    build_augmented_gram, build_augmented_gram_with_limit, kernel_eval, AugmentedGram, KernelSpec,
};
pub use loss::pinball_loss;
pub use model::{
    assemble_lower_dual, assemble_upper_dual, coverage_stats, fit, fit_on_gram, fit_warm, fit_with,
    CoverageStats, FitDiagnostics, FitOptions, SupportVectorCensus, TrainedModel,
};
pub use params::Hyperparams;
pub use qp::{objective, solve, solve_observed, BoxQp, SolveResult, SolverConfig, SolverEvent};
pub use selection::{evaluate, gacv, grid_search, EvalReport, GridCell, GridSpec};
pub use synthetic::{
    generate, generate_sinc, reference_setting, sinc_quantile_oracle, Family, GeneratorSpec,
};
