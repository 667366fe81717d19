//! System parameters: particle counts and collision rates. The inverse
//! temperature is fixed at `beta = 2 pi` throughout the crate.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// System particle count `M >= 1`.
    pub m: usize,
    /// Reservoir particle count `N >= 1`.
    pub n: usize,
    /// Rate of system-system Kac collisions (per particle).
    pub lambda_s: f64,
    /// Rate of reservoir-reservoir Kac collisions (per particle).
    pub lambda_r: f64,
    /// Rate of system-reservoir (or system-thermostat) interactions.
    pub mu: f64,
}

impl SystemParams {
    pub fn new(m: usize, n: usize, lambda_s: f64, lambda_r: f64, mu: f64) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(Error::InvalidParameter(format!(
                "particle counts must be >= 1, got M={m}, N={n}"
            )));
        }
        if lambda_s < 0.0 || lambda_r < 0.0 || mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rates must be nonnegative, got lambda_s={lambda_s}, lambda_r={lambda_r}, mu={mu}"
            )));
        }
        Ok(SystemParams {
            m,
            n,
            lambda_s,
            lambda_r,
            mu,
        })
    }

    /// Total gain rate of the system-system collisions. Empty-sum semantics:
    /// a single particle has no collision partner, so the term vanishes for
    /// `M = 1` (the `lambda_S/(M-1)` prefactor never materializes).
    pub fn gain_s(&self) -> f64 {
        if self.m >= 2 {
            self.lambda_s * self.m as f64 / 2.0
        } else {
            0.0
        }
    }

    /// Total gain rate of the reservoir-reservoir collisions.
    pub fn gain_r(&self) -> f64 {
        if self.n >= 2 {
            self.lambda_r * self.n as f64 / 2.0
        } else {
            0.0
        }
    }

    /// Total gain rate of the interaction (or thermostat) term.
    pub fn gain_i(&self) -> f64 {
        self.mu * self.m as f64
    }

    /// `Lambda`, the uniformization constant: the largest eigenvalue of
    /// `Q_S + Q_R + Q_T` (eigenvector `1`), and the total jump rate of the
    /// event-driven simulation.
    pub fn lambda_total(&self) -> f64 {
        self.gain_s() + self.gain_r() + self.gain_i()
    }

    pub fn ncoord(&self) -> usize {
        self.m + self.n
    }
}

/// Which generator piece a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorTag {
    /// System-system collision gain `Q_S`.
    QS,
    /// Reservoir-reservoir collision gain `Q_R`.
    QR,
    /// System-reservoir interaction gain `Q_I`.
    QI,
    /// Thermostat gain `Q_T`.
    QT,
    /// Full finite-reservoir gain `Q_S + Q_R + Q_I` (generator is `. - Lambda`).
    FullFr,
    /// Full thermostated gain `Q_S + Q_R + Q_T` (generator is `. - Lambda`).
    FullT,
}

impl GeneratorTag {
    /// Eigenvalue on the constant function `1`.
    pub fn gain_on_constant(&self, p: &SystemParams) -> f64 {
        match self {
            GeneratorTag::QS => p.gain_s(),
            GeneratorTag::QR => p.gain_r(),
            GeneratorTag::QI | GeneratorTag::QT => p.gain_i(),
            GeneratorTag::FullFr | GeneratorTag::FullT => p.lambda_total(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_total_arithmetic() {
        let p = SystemParams::new(2, 3, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.lambda_total(), 4.5);
        let p = SystemParams::new(1, 1, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(p.lambda_total(), 1.0);
        let p = SystemParams::new(4, 7, 3.0, 0.0, 0.0).unwrap();
        assert_eq!(p.lambda_total(), 3.0 * 4.0 / 2.0);
    }

    #[test]
    fn degenerate_counts_use_empty_sums() {
        // lambda_s > 0 with M = 1 contributes nothing
        let p = SystemParams::new(1, 2, 5.0, 1.0, 1.0).unwrap();
        assert_eq!(p.gain_s(), 0.0);
        assert_eq!(p.lambda_total(), 1.0 + 1.0);
        let p = SystemParams::new(2, 1, 1.0, 5.0, 1.0).unwrap();
        assert_eq!(p.gain_r(), 0.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SystemParams::new(0, 1, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1, 1, -1.0, 1.0, 1.0).is_err());
    }
}
