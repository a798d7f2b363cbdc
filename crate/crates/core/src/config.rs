//! Physical and protocol parameters shared by every engine.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest HARQ round cap accepted; the alternating sums grow roughly as `K⁴·2^K`.
pub const MAX_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InterferenceMode {
    /// Interferer positions fixed over all rounds and shared by both users.
    #[default]
    Correlated,
    /// Positions and fading redrawn every round, independently at each user.
    IndependentPerRound,
    /// No interferers.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig<T> {
    /// Interferer intensity (m⁻²).
    pub lambda: T,
    /// Path-loss exponent, `ℓ(d) = d^(−α)`.
    pub alpha: T,
    /// Transmit SNR `P/σ²`, linear. `+∞` means noiseless.
    pub p_over_sigma2: T,
    pub d1: T,
    pub d2: T,
    /// Distance between the two users.
    pub d_inter: T,
    /// Power share of `s1` in NOMA, resource share of user 1 in OMA.
    pub beta2: T,
    pub r1: T,
    pub r2: T,
    pub k_max: usize,
    pub cooperative: bool,
    pub interference_mode: InterferenceMode,
}

/// OMA reads `beta2` as the orthogonal resource split and ignores `cooperative`.
pub type OmaConfig<T> = NetworkConfig<T>;

impl<T: Real> Default for NetworkConfig<T> {
    fn default() -> Self {
        NetworkConfig {
            lambda: T::lit(5e-5),
            alpha: T::lit(3.0),
            p_over_sigma2: db_to_linear(T::lit(30.0)),
            d1: T::lit(5.0),
            d2: T::lit(10.0),
            d_inter: T::lit(10.0),
            beta2: T::lit(0.3),
            r1: T::lit(2.0),
            r2: T::lit(0.5),
            k_max: 4,
            cooperative: true,
            interference_mode: InterferenceMode::Correlated,
        }
    }
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn linear_to_db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}

impl<T: Real> NetworkConfig<T> {
    pub fn with_snr_db(mut self, db: T) -> Self {
        self.p_over_sigma2 = db_to_linear(db);
        self
    }

    pub fn with_rounds(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn snr_db(&self) -> T {
        linear_to_db(self.p_over_sigma2)
    }

    /// `σ²/P`; zero when noiseless.
    pub fn noise_scale(&self) -> T {
        self.p_over_sigma2.recip()
    }

    pub fn path_loss(&self, d: T) -> T {
        d.powf(-self.alpha)
    }

    /// Intensity seen by the interference functional.
    pub fn effective_lambda(&self) -> T {
        match self.interference_mode {
            InterferenceMode::None => T::zero(),
            _ => self.lambda,
        }
    }

    /// `1 − 2^R₂β² > 0`: user 1 can strip `s2` before decoding `s1`.
    pub fn noma_feasible(&self) -> bool {
        T::one() - self.r2.exp2() * self.beta2 > T::zero()
    }

    /// Checks the invariants common to NOMA and OMA.
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: T, field: &'static str| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and >= 0, got {}", v)))
            }
        };
        finite_nonneg(self.lambda, "lambda")?;
        finite_nonneg(self.r1, "r1")?;
        finite_nonneg(self.r2, "r2")?;
        finite_nonneg(self.d_inter, "d_inter")?;
        if !(self.alpha > T::lit(2.0)) || !self.alpha.is_finite() {
            return Err(Error::config("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        if !(self.p_over_sigma2 > T::zero()) {
            return Err(Error::config(
                "p_over_sigma2",
                format!("must be positive, got {}", self.p_over_sigma2),
            ));
        }
        if !(self.d1 > T::zero() && self.d1.is_finite()) {
            return Err(Error::config("d1", format!("must be positive, got {}", self.d1)));
        }
        if !(self.d2 > self.d1 && self.d2.is_finite()) {
            return Err(Error::config(
                "d2",
                format!("user 2 must be farther than user 1 ({} <= {})", self.d2, self.d1),
            ));
        }
        if !(self.beta2 >= T::zero() && self.beta2 <= T::one()) {
            return Err(Error::config("beta2", format!("must lie in [0, 1], got {}", self.beta2)));
        }
        if self.k_max == 0 || self.k_max > MAX_ROUNDS {
            return Err(Error::config(
                "k_max",
                format!("must lie in 1..={}, got {}", MAX_ROUNDS, self.k_max),
            ));
        }
        Ok(())
    }

    /// NOMA additionally needs `β² < 1`; `β² ≥ 2^(−R₂)` is reported as infeasible, not rejected.
    pub fn validate_noma(&self) -> Result<()> {
        self.validate()?;
        if self.beta2 >= T::one() && self.r2 > T::zero() {
            return Err(Error::config("beta2", "NOMA needs beta2 < 1 when r2 > 0"));
        }
        Ok(())
    }

    /// OMA allows a zero share only for a user whose rate is zero.
    pub fn validate_oma(&self) -> Result<()> {
        self.validate()?;
        if self.beta2 == T::zero() && self.r1 > T::zero() {
            return Err(Error::config("beta2", "zero share for user 1 needs r1 = 0"));
        }
        if self.beta2 == T::one() && self.r2 > T::zero() {
            return Err(Error::config("beta2", "full share for user 1 needs r2 = 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = NetworkConfig::<f64>::default();
        cfg.validate_noma().unwrap();
        cfg.validate_oma().unwrap();
        assert!(cfg.noma_feasible());
        assert!((cfg.snr_db() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_fields() {
        let base = NetworkConfig::<f64>::default();
        let cases = [
            (NetworkConfig { alpha: 2.0, ..base }, "alpha"),
            (NetworkConfig { d2: 5.0, ..base }, "d2"),
            (NetworkConfig { k_max: 0, ..base }, "k_max"),
            (NetworkConfig { k_max: 9, ..base }, "k_max"),
            (NetworkConfig { lambda: -1.0, ..base }, "lambda"),
            (NetworkConfig { beta2: 1.5, ..base }, "beta2"),
        ];
        for (cfg, field) in cases {
            match cfg.validate() {
                Err(Error::InvalidConfig { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn oma_boundary_shares() {
        let base = NetworkConfig::<f64>::default();
        assert!(NetworkConfig { beta2: 1.0, r2: 0.0, ..base }.validate_oma().is_ok());
        assert!(NetworkConfig { beta2: 1.0, ..base }.validate_oma().is_err());
        assert!(NetworkConfig { beta2: 0.0, ..base }.validate_oma().is_err());
    }
}
