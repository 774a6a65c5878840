use crate::error::{invalid, Result};

/// Pinball (check) loss `ρ_τ(r)`: `τr` for `r > 0`, `−(1−τ)r` otherwise.
pub fn pinball_loss(r: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(pinball(r, tau))
}

#[inline]
pub(crate) fn pinball(r: f64, tau: f64) -> f64 {
    if r > 0.0 {
        tau * r
    } else {
        -(1.0 - tau) * r
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "quantile level must lie in (0, 1), got {tau}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        for tau in [0.1, 0.5, 0.9] {
            assert_eq!(pinball_loss(0.0, tau).unwrap(), 0.0);
        }
        assert_eq!(pinball_loss(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(pinball_loss(-4.0, 0.25).unwrap(), 3.0);
    }

    #[test]
    fn tau_out_of_range() {
        assert!(pinball_loss(1.0, 0.0).is_err());
        assert!(pinball_loss(1.0, 1.0).is_err());
        assert!(pinball_loss(1.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn convex(a in -1e3f64..1e3, b in -1e3f64..1e3, lam in 0.0f64..=1.0, tau in 0.01f64..0.99) {
            let lhs = pinball(lam * a + (1.0 - lam) * b, tau);
            let rhs = lam * pinball(a, tau) + (1.0 - lam) * pinball(b, tau);
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn asymmetry_identity(r in -1e6f64..1e6, tau in 0.01f64..0.99) {
            let sum = pinball(r, tau) + pinball(-r, tau);
            prop_assert!((sum - r.abs()).abs() <= 1e-12 * (1.0 + r.abs()));
            prop_assert!(pinball(r, tau) >= 0.0);
        }
    }
}
