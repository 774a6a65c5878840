use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::KernelSpec;
use crate::loss::check_tau;
use crate::qp::SolverConfig;

/// Penalties `C₁, C₂`, insensitive widths `ε₁, ε₂`, quantile level `τ`, kernel and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub c1: f64,
    pub c2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub tau: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Hyperparams {
    /// Tied penalties and widths: `C₁ = C₂ = c`, `ε₁ = ε₂ = eps`.
    pub fn symmetric(c: f64, eps: f64, tau: f64, kernel: KernelSpec) -> Self {
        Self {
            c1: c,
            c2: c,
            eps1: eps,
            eps2: eps,
            tau,
            kernel,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        check_tau(self.tau)?;
        self.kernel.validate()?;
        self.solver.validate()
    }
}
