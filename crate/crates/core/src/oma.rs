//! HARQ-assisted OMA baseline: user 1 gets the share `β²` of the resource and
//! user 2 the rest. No SIC and no relaying; after one user acknowledges, the
//! other gets the whole resource.

use crate::analytic::{threshold, Analyzer, OutageSet, PhiMode, PsiArgs, RoundOutage, ThroughputReport};
use crate::config::OmaConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::beta_fn;
use crate::sums::{alternating_sum, CompensatedSum};

/// OMA decoding thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmaThresholds<T> {
    /// User 1 on its share `β²`.
    pub user1_shared: T,
    /// User 1 on the whole resource.
    pub user1_alone: T,
    /// User 2 on its share `1 − β²`.
    pub user2_shared: T,
    pub user2_alone: T,
}

/// `(2^(R/share) − 1)/gain`, with a zero share meaning `+∞` unless `R = 0`.
fn shared_threshold<T: Real>(rate: T, share: T, gain: T) -> T {
    if rate == T::zero() {
        T::zero()
    } else if share <= T::zero() {
        T::infinity()
    } else {
        threshold((rate / share).exp2() - T::one(), gain)
    }
}

impl<T: Real> OmaThresholds<T> {
    pub fn new(cfg: &OmaConfig<T>) -> Self {
        let l1 = cfg.path_loss(cfg.d1);
        let l2 = cfg.path_loss(cfg.d2);
        OmaThresholds {
            user1_shared: shared_threshold(cfg.r1, cfg.beta2, l1),
            user1_alone: threshold(cfg.r1.exp2() - T::one(), l1),
            user2_shared: shared_threshold(cfg.r2, T::one() - cfg.beta2, l2),
            user2_alone: threshold(cfg.r2.exp2() - T::one(), l2),
        }
    }

    fn feasible(&self) -> bool {
        self.user1_shared.is_finite() && self.user2_shared.is_finite()
    }
}

/// Outage terms and throughput of the OMA scheme; shares `Ψ` and its cache with [`Analyzer`].
#[derive(Debug, Clone)]
pub struct OmaAnalyzer<T> {
    inner: Analyzer<T>,
}

impl<T: Real> OmaAnalyzer<T> {
    pub fn new(cfg: OmaConfig<T>) -> Result<Self> {
        cfg.validate_oma()?;
        Ok(OmaAnalyzer {
            inner: Analyzer::new(cfg)?,
        })
    }

    pub fn from_analyzer(inner: Analyzer<T>) -> Self {
        OmaAnalyzer { inner }
    }

    pub fn with_phi_mode(self, mode: PhiMode) -> Self {
        OmaAnalyzer {
            inner: self.inner.with_phi_mode(mode),
        }
    }

    pub fn config(&self) -> &OmaConfig<T> {
        self.inner.config()
    }

    pub fn analyzer(&self) -> &Analyzer<T> {
        &self.inner
    }

    pub fn thresholds(&self) -> OmaThresholds<T> {
        OmaThresholds::new(self.inner.config())
    }

    fn k(&self) -> u32 {
        self.inner.config().k_max as u32
    }

    fn psi(&self, u: &[T], tau: &[u32], u_hat: &[T], tau_hat: &[u32]) -> Result<T> {
        self.inner.psi(&PsiArgs {
            u: u.to_vec(),
            tau: tau.to_vec(),
            u_hat: u_hat.to_vec(),
            tau_hat: tau_hat.to_vec(),
        })
    }

    fn round(&self, r: usize) -> Result<u32> {
        if r == 0 || r > self.inner.config().k_max {
            return Err(Error::domain(format!("round {} outside 1..={}", r, self.k())));
        }
        Ok(r as u32)
    }

    /// P[user 1 never decodes; user 2 decodes at round `k`].
    pub fn oma_term_fail1_succ2(&self, k: usize) -> Result<T> {
        let k = self.round(k)?;
        let th = self.thresholds();
        alternating_sum(&[k, self.k() - k, k - 1], |t| {
            self.psi(
                &[th.user1_shared, th.user1_alone],
                &[t[0], t[1]],
                &[th.user2_shared],
                &[t[2] + 1],
            )
        })
    }

    /// P[user 1 decodes at round `l`; user 2 never decodes].
    pub fn oma_term_succ1_fail2(&self, l: usize) -> Result<T> {
        let l = self.round(l)?;
        let th = self.thresholds();
        alternating_sum(&[l - 1, l, self.k() - l], |t| {
            self.psi(
                &[th.user1_shared],
                &[t[0] + 1],
                &[th.user2_shared, th.user2_alone],
                &[t[1], t[2]],
            )
        })
    }

    /// P[neither user decodes in any round].
    pub fn oma_term_both_fail(&self) -> Result<T> {
        let th = self.thresholds();
        alternating_sum(&[self.k(), self.k()], |t| {
            self.psi(&[th.user1_shared], &[t[0]], &[th.user2_shared], &[t[1]])
        })
    }

    /// Outages for the configured cap only.
    pub fn final_outage(&self) -> Result<RoundOutage<T>> {
        let joint = self.oma_term_both_fail()?;
        let mut o1 = CompensatedSum::default();
        let mut o2 = CompensatedSum::default();
        for r in 1..=self.inner.config().k_max {
            o1.add(self.oma_term_fail1_succ2(r)?);
            o2.add(self.oma_term_succ1_fail2(r)?);
        }
        o1.add(joint);
        o2.add(joint);
        let unit = |p: T| p.max(T::zero()).min(T::one());
        Ok(RoundOutage {
            o1: unit(o1.value()),
            o2: unit(o2.value()),
            joint: unit(joint),
        })
    }

    pub fn oma_outages(&self) -> Result<OutageSet<T>> {
        let per_round = (1..=self.inner.config().k_max)
            .map(|k| OmaAnalyzer::from_analyzer(self.inner.with_horizon(k)?).final_outage())
            .collect::<Result<Vec<_>>>()?;
        Ok(OutageSet {
            per_round,
            feasible: self.thresholds().feasible(),
        })
    }

    pub fn oma_ltat(&self) -> Result<ThroughputReport<T>> {
        let cfg = self.inner.config();
        Ok(self.oma_outages()?.throughput(cfg.r1, cfg.r2))
    }
}

/// Single-round OMA in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmaSingleRound<T> {
    pub ltat: T,
    pub outage1: T,
    pub outage2: T,
}

/// Success probability `ϑ(x)` of one user on a single round at spectral efficiency `x`,
/// with `gain = ℓ(d)`: `exp(−(σ²/P)U − πλU^(2/α)B(1−2/α, 1+2/α))`, `U = (2^x − 1)/gain`.
pub fn single_round_success<T: Real>(cfg: &OmaConfig<T>, x: T, gain: T) -> Result<T> {
    let u = threshold(x.exp2() - T::one(), gain);
    if u == T::zero() {
        return Ok(T::one());
    }
    if u.is_infinite() {
        return Ok(T::zero());
    }
    let two_over_alpha = T::lit(2.0) / cfg.alpha;
    let noise = cfg.noise_scale() * u;
    let lambda = cfg.effective_lambda();
    let interference = if lambda == T::zero() {
        T::zero()
    } else {
        T::PI()
            * lambda
            * u.powf(two_over_alpha)
            * beta_fn(T::one() - two_over_alpha, T::one() + two_over_alpha)?
    };
    Ok((-noise - interference).exp())
}

/// `η = β²·φ₁(R₁/β²) + (1−β²)·φ₂(R₂/(1−β²))` with `φ_i(x) = x·ϑ_i(x)`.
pub fn oma_k1_closed_form<T: Real>(cfg: &OmaConfig<T>) -> Result<OmaSingleRound<T>> {
    cfg.validate_oma()?;
    if cfg.k_max != 1 {
        return Err(Error::domain(format!(
            "closed form holds for a single round, got K = {}",
            cfg.k_max
        )));
    }
    let user = |rate: T, share: T, d: T| -> Result<(T, T)> {
        if rate == T::zero() {
            return Ok((T::zero(), T::zero()));
        }
        if share <= T::zero() {
            return Ok((T::zero(), T::one()));
        }
        let x = rate / share;
        let success = single_round_success(cfg, x, cfg.path_loss(d))?;
        Ok((share * x * success, T::one() - success))
    };
    let (eta1, outage1) = user(cfg.r1, cfg.beta2, cfg.d1)?;
    let (eta2, outage2) = user(cfg.r2, T::one() - cfg.beta2, cfg.d2)?;
    Ok(OmaSingleRound {
        ltat: eta1 + eta2,
        outage1,
        outage2,
    })
}

pub fn oma_outages<T: Real>(cfg: &OmaConfig<T>, mode: PhiMode) -> Result<OutageSet<T>> {
    OmaAnalyzer::new(*cfg)?.with_phi_mode(mode).oma_outages()
}

pub fn oma_ltat<T: Real>(cfg: &OmaConfig<T>, mode: PhiMode) -> Result<ThroughputReport<T>> {
    OmaAnalyzer::new(*cfg)?.with_phi_mode(mode).oma_ltat()
}
