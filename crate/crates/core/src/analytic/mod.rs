//! Closed-form outage probabilities and long-term average throughput of
//! cooperative HARQ-assisted NOMA under interference from a Poisson field.
//!
//! User 1 (near) decodes `s2` and removes it before decoding `s1`. Once user 2
//! acknowledges, the source sends `s1` alone at full power; once user 1
//! acknowledges, it relays `s2` so user 2 sees the gain `ℓ(D) + ℓ(d₂)`.

mod phi;

use std::sync::Arc;

pub use phi::{PhiCache, PhiMode};
pub(crate) use phi::{canonical_side, closed_form, merge_sides, plane_integral, PhiKey, Side};

use crate::config::{InterferenceMode, NetworkConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sums::{alternating_sum, CompensatedSum};

/// Arguments `(U, τ; Û, τ̂)` of `Ψ`: thresholds and round counts at user 1 and user 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiArgs<T> {
    pub u: Vec<T>,
    pub tau: Vec<u32>,
    pub u_hat: Vec<T>,
    pub tau_hat: Vec<u32>,
}

impl<T: Real> PsiArgs<T> {
    pub fn new(u: Vec<T>, tau: Vec<u32>, u_hat: Vec<T>, tau_hat: Vec<u32>) -> Result<Self> {
        let args = PsiArgs {
            u,
            tau,
            u_hat,
            tau_hat,
        };
        args.validate()?;
        Ok(args)
    }

    /// Thresholds at user 1 only.
    pub fn near(u: Vec<T>, tau: Vec<u32>) -> Result<Self> {
        Self::new(u, tau, Vec::new(), Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.tau.len() || self.u_hat.len() != self.tau_hat.len() {
            return Err(Error::domain("Ψ thresholds and weights must have equal lengths"));
        }
        if self.u.iter().chain(self.u_hat.iter()).any(|u| !(*u >= T::zero())) {
            return Err(Error::domain("Ψ thresholds must be non-negative"));
        }
        Ok(())
    }

    fn entries(&self) -> impl Iterator<Item = (T, u32)> + '_ {
        self.u
            .iter()
            .copied()
            .zip(self.tau.iter().copied())
            .chain(self.u_hat.iter().copied().zip(self.tau_hat.iter().copied()))
    }

    /// Some threshold with positive weight is infinite: the success event is impossible.
    fn unreachable(&self) -> bool {
        self.entries().any(|(u, t)| t > 0 && u.is_infinite())
    }
}

/// Decoding thresholds `(2^R − 1)/gain`; `+∞` marks an impossible decode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    /// `s2` at user 1 in Phase I.
    pub s2_at_1: T,
    /// `s1` at user 1 in Phase I, after SIC.
    pub s1_at_1: T,
    /// `s1` at user 1 once the source sends it alone.
    pub s1_at_1_alone: T,
    /// `s2` at user 2 in Phase I.
    pub s2_at_2: T,
    /// `s2` at user 2 once user 1 relays (or the source sends `s2` alone without relaying).
    pub s2_at_2_relayed: T,
    pub feasible: bool,
}

/// `num/den` with `0/x = 0` and `x/0 = +∞` for `x > 0`.
pub(crate) fn threshold<T: Real>(num: T, den: T) -> T {
    if num == T::zero() {
        T::zero()
    } else if den <= T::zero() {
        T::infinity()
    } else {
        num / den
    }
}

impl<T: Real> Thresholds<T> {
    pub fn noma(cfg: &NetworkConfig<T>) -> Self {
        let l1 = cfg.path_loss(cfg.d1);
        let l2 = cfg.path_loss(cfg.d2);
        let g1 = cfg.r1.exp2() - T::one();
        let g2 = cfg.r2.exp2() - T::one();
        let f2 = T::one() - cfg.r2.exp2() * cfg.beta2;
        let relay = if cfg.cooperative {
            cfg.path_loss(cfg.d_inter)
        } else {
            T::zero()
        };
        Thresholds {
            s2_at_1: threshold(g2, f2 * l1),
            s1_at_1: threshold(g1, cfg.beta2 * l1),
            s1_at_1_alone: threshold(g1, l1),
            s2_at_2: threshold(g2, f2 * l2),
            s2_at_2_relayed: threshold(g2, relay + l2),
            feasible: f2 > T::zero(),
        }
    }
}

/// Outage after each round cap `κ = 1..K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutage<T> {
    pub o1: T,
    pub o2: T,
    pub joint: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageSet<T> {
    /// Entry `κ − 1` holds the outages of a `κ`-round protocol.
    pub per_round: Vec<RoundOutage<T>>,
    pub feasible: bool,
}

impl<T: Real> OutageSet<T> {
    pub fn last(&self) -> RoundOutage<T> {
        *self.per_round.last().expect("at least one round")
    }

    /// `E(T) = 1 + Σ_{κ<K} P(not both delivered after κ rounds)`.
    pub fn expected_rounds(&self) -> T {
        let k = self.per_round.len();
        self.per_round[..k - 1]
            .iter()
            .map(|o| o.o1 + o.o2 - o.joint)
            .chain(std::iter::once(T::one()))
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// Renewal-reward throughput for rates `(r1, r2)`.
    pub fn throughput(&self, r1: T, r2: T) -> ThroughputReport<T> {
        let last = self.last();
        let reward_o1 = r1 * (T::one() - last.o1);
        let reward_o2 = r2 * (T::one() - last.o2);
        let expected_rounds = self.expected_rounds();
        ThroughputReport {
            ltat: (reward_o1 + reward_o2) / expected_rounds,
            expected_rounds,
            reward_o1,
            reward_o2,
            feasible: self.feasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport<T> {
    /// Long-term average throughput (bps/Hz).
    pub ltat: T,
    pub expected_rounds: T,
    pub reward_o1: T,
    pub reward_o2: T,
    pub feasible: bool,
}

fn clamp_unit<T: Real>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

fn positive_part<T: Real>(x: T) -> T {
    x.max(T::zero())
}

/// Evaluates `Ψ`, the term probabilities and their assemblies for one configuration.
#[derive(Debug, Clone)]
pub struct Analyzer<T> {
    cfg: NetworkConfig<T>,
    phi_mode: PhiMode,
    cache: Arc<PhiCache<T>>,
}

impl<T: Real> Analyzer<T> {
    pub fn new(cfg: NetworkConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Analyzer {
            cfg,
            phi_mode: PhiMode::default(),
            cache: Arc::new(PhiCache::new()),
        })
    }

    pub fn with_phi_mode(mut self, mode: PhiMode) -> Self {
        self.phi_mode = mode;
        self
    }

    pub fn with_cache(mut self, cache: Arc<PhiCache<T>>) -> Self {
        self.cache = cache;
        self
    }

    pub fn config(&self) -> &NetworkConfig<T> {
        &self.cfg
    }

    pub fn phi_mode(&self) -> PhiMode {
        self.phi_mode
    }

    pub fn cache(&self) -> &Arc<PhiCache<T>> {
        &self.cache
    }

    /// Same parameters and cache with the round cap set to `k`.
    pub fn with_horizon(&self, k: usize) -> Result<Self> {
        let mut cfg = self.cfg;
        cfg.k_max = k;
        cfg.validate()?;
        Ok(Analyzer {
            cfg,
            phi_mode: self.phi_mode,
            cache: Arc::clone(&self.cache),
        })
    }

    pub fn thresholds(&self) -> Thresholds<T> {
        Thresholds::noma(&self.cfg)
    }

    /// `φ` of the plane integral, always two-dimensional.
    pub fn varphi_exact(&self, args: &PsiArgs<T>) -> Result<T> {
        args.validate()?;
        let near = side_of(&args.u, &args.tau)?;
        let far = side_of(&args.u_hat, &args.tau_hat)?;
        let key = PhiKey::new(true, self.cfg.alpha, self.cfg.d_inter, &near, &far);
        self.cache.get_or_compute(key, || {
            plane_integral(&near, &far, self.cfg.alpha, self.cfg.d_inter)
        })
    }

    /// `φ` with both users collapsed onto one point.
    pub fn varphi_approx(&self, args: &PsiArgs<T>) -> Result<T> {
        args.validate()?;
        let merged = merge_sides(
            &side_of(&args.u, &args.tau)?,
            &side_of(&args.u_hat, &args.tau_hat)?,
        );
        self.approx_merged(&merged)
    }

    fn approx_merged(&self, merged: &Side<T>) -> Result<T> {
        let key = PhiKey::new(false, self.cfg.alpha, T::zero(), merged, &Vec::new());
        self.cache
            .get_or_compute(key, || closed_form(merged, self.cfg.alpha))
    }

    fn varphi(&self, args: &PsiArgs<T>) -> Result<T> {
        match self.cfg.interference_mode {
            InterferenceMode::None => Ok(T::zero()),
            InterferenceMode::IndependentPerRound => {
                // Every (round, user) pair sees its own field: φ splits into single-threshold terms.
                let mut acc = CompensatedSum::default();
                for (u, t) in args.entries() {
                    if t > 0 && u > T::zero() {
                        let single = self.approx_merged(&vec![(u, 1)])?;
                        acc.add(T::lit(f64::from(t)) * single);
                    }
                }
                Ok(acc.value())
            }
            InterferenceMode::Correlated => match self.phi_mode {
                PhiMode::Exact => self.varphi_exact(args),
                PhiMode::Approx => self.varphi_approx(args),
            },
        }
    }

    /// `Ψ = exp(−(σ²/P)(U·τ + Û·τ̂) − λφ)`.
    pub fn psi(&self, args: &PsiArgs<T>) -> Result<T> {
        args.validate()?;
        if args.unreachable() {
            return Ok(T::zero());
        }
        let noise = self.cfg.noise_scale();
        let mut load = CompensatedSum::default();
        for (u, t) in args.entries() {
            if t > 0 {
                load.add(u * T::lit(f64::from(t)));
            }
        }
        let noise_term = if noise == T::zero() {
            T::zero()
        } else {
            noise * load.value()
        };
        let lambda = self.cfg.effective_lambda();
        let interference = if lambda == T::zero() {
            T::zero()
        } else {
            lambda * self.varphi(args)?
        };
        Ok((-noise_term - interference).exp())
    }

    fn psi_of(&self, u: &[T], tau: &[u32], u_hat: &[T], tau_hat: &[u32]) -> Result<T> {
        self.psi(&PsiArgs {
            u: u.to_vec(),
            tau: tau.to_vec(),
            u_hat: u_hat.to_vec(),
            tau_hat: tau_hat.to_vec(),
        })
    }

    fn k(&self) -> u32 {
        self.cfg.k_max as u32
    }

    fn check_round(&self, name: &str, r: usize) -> Result<u32> {
        if r == 0 || r > self.cfg.k_max {
            return Err(Error::domain(format!(
                "{} = {} outside 1..={}",
                name, r, self.cfg.k_max
            )));
        }
        Ok(r as u32)
    }

    /// P[user 1 decodes `s2` at round `l` but never `s1`; user 2 decodes `s2` at round `k`].
    pub fn term_sic_and_peer_decode(&self, l: usize, k: usize) -> Result<T> {
        let (l, k) = (self.check_round("l", l)?, self.check_round("k", k)?);
        if l > k {
            return Err(Error::domain(format!("need l <= k, got l = {l}, k = {k}")));
        }
        let th = self.thresholds();
        let u = [th.s2_at_1, th.s1_at_1, th.s1_at_1_alone];
        let uh = [th.s2_at_2];
        let s = alternating_sum(&[l - 1, k - l, self.k() - k, k - 1], |t| {
            Ok(self.psi_of(&u, &[t[0] + 1, t[1], t[2]], &uh, &[t[3] + 1])?
                - self.psi_of(&u, &[t[0], t[1] + 1, t[2]], &uh, &[t[3] + 1])?)
        })?;
        Ok(positive_part(s))
    }

    /// P[user 1 decodes neither signal through round `k` nor `s1` afterwards; user 2 decodes at `k`].
    pub fn term_no_sic_peer_decode(&self, k: usize) -> Result<T> {
        let k = self.check_round("k", k)?;
        let th = self.thresholds();
        let u = [th.s1_at_1_alone, th.s2_at_1];
        let uh = [th.s2_at_2];
        alternating_sum(&[self.k() - k, k, k - 1], |t| {
            self.psi_of(&u, &[t[0], t[1]], &uh, &[t[2] + 1])
        })
    }

    /// P[user 1 decodes `s2` at round `l` but never `s1`; user 2 never decodes].
    pub fn term_sic_peer_fails(&self, l: usize) -> Result<T> {
        let l = self.check_round("l", l)?;
        let th = self.thresholds();
        let u = [th.s2_at_1, th.s1_at_1];
        let uh = [th.s2_at_2];
        let s = alternating_sum(&[l - 1, self.k() - l, self.k()], |t| {
            Ok(self.psi_of(&u, &[t[0] + 1, t[1]], &uh, &[t[2]])?
                - self.psi_of(&u, &[t[0], t[1] + 1], &uh, &[t[2]])?)
        })?;
        Ok(positive_part(s))
    }

    /// P[neither user decodes `s2` in any round].
    pub fn term_all_fail(&self) -> Result<T> {
        let th = self.thresholds();
        alternating_sum(&[self.k(), self.k()], |t| {
            self.psi_of(&[th.s2_at_1], &[t[0]], &[th.s2_at_2], &[t[1]])
        })
    }

    /// P[user 1 decodes both signals at round `l`; user 2 never decodes].
    pub fn term_both_at_o1_same_round(&self, l: usize) -> Result<T> {
        let l = self.check_round("l", l)?;
        let th = self.thresholds();
        let u = [th.s2_at_1, th.s2_at_1.max(th.s1_at_1)];
        let uh = [th.s2_at_2, th.s2_at_2_relayed];
        alternating_sum(&[l - 1, l, self.k() - l], |t| {
            self.psi_of(&u, &[t[0], 1], &uh, &[t[1], t[2]])
        })
    }

    /// P[user 1 decodes `s2` at round `l` and `s1` at a later round `k`; user 2 never decodes].
    pub fn term_both_at_o1_diff_round(&self, k: usize, l: usize) -> Result<T> {
        let (k, l) = (self.check_round("k", k)?, self.check_round("l", l)?);
        if k <= l {
            return Err(Error::domain(format!("need k > l, got k = {k}, l = {l}")));
        }
        let th = self.thresholds();
        let u = [th.s2_at_1, th.s1_at_1];
        let uh = [th.s2_at_2, th.s2_at_2_relayed];
        let s = alternating_sum(&[l - 1, k - l - 1, k, self.k() - k], |t| {
            Ok(
                self.psi_of(&u, &[t[0] + 1, t[1] + 1], &uh, &[t[2], t[3]])?
                    - self.psi_of(&u, &[t[0], t[1] + 2], &uh, &[t[2], t[3]])?,
            )
        })?;
        Ok(positive_part(s))
    }

    fn joint_terms(&self) -> Result<T> {
        let mut acc = CompensatedSum::default();
        for l in 1..=self.cfg.k_max {
            acc.add(self.term_sic_peer_fails(l)?);
        }
        acc.add(self.term_all_fail()?);
        Ok(acc.value())
    }

    /// `O_{K,o1}`.
    pub fn outage_user1(&self) -> Result<T> {
        let kk = self.cfg.k_max;
        let mut acc = CompensatedSum::default();
        for k in 1..=kk {
            for l in 1..=k {
                acc.add(self.term_sic_and_peer_decode(l, k)?);
            }
            acc.add(self.term_no_sic_peer_decode(k)?);
        }
        acc.add(self.joint_terms()?);
        Ok(clamp_unit(acc.value()))
    }

    /// `O_{K,o2}`.
    pub fn outage_user2(&self) -> Result<T> {
        let kk = self.cfg.k_max;
        let mut acc = CompensatedSum::default();
        for l in 1..=kk {
            acc.add(self.term_both_at_o1_same_round(l)?);
            for k in l + 1..=kk {
                acc.add(self.term_both_at_o1_diff_round(k, l)?);
            }
        }
        acc.add(self.joint_terms()?);
        Ok(clamp_unit(acc.value()))
    }

    /// `O_{K,o1,o2}`: neither user has its message after `K` rounds.
    pub fn outage_joint(&self) -> Result<T> {
        Ok(clamp_unit(self.joint_terms()?))
    }

    /// `O_{K,o1}`, `O_{K,o2}` and `O_{K,o1,o2}` for the configured cap only.
    pub fn final_outage(&self) -> Result<RoundOutage<T>> {
        Ok(RoundOutage {
            o1: self.outage_user1()?,
            o2: self.outage_user2()?,
            joint: self.outage_joint()?,
        })
    }

    /// Outages for every cap `κ = 1..K`, each evaluated as a `κ`-round protocol.
    pub fn outages(&self) -> Result<OutageSet<T>> {
        let per_round = (1..=self.cfg.k_max)
            .map(|k| self.with_horizon(k)?.final_outage())
            .collect::<Result<Vec<_>>>()?;
        Ok(OutageSet {
            per_round,
            feasible: self.cfg.noma_feasible(),
        })
    }

    pub fn ltat(&self) -> Result<ThroughputReport<T>> {
        Ok(self.outages()?.throughput(self.cfg.r1, self.cfg.r2))
    }
}

fn side_of<T: Real>(u: &[T], tau: &[u32]) -> Result<Side<T>> {
    if u.iter().zip(tau).any(|(u, t)| *t > 0 && !u.is_finite()) {
        return Err(Error::domain("φ needs finite thresholds"));
    }
    Ok(canonical_side(u, tau))
}

pub fn psi<T: Real>(args: &PsiArgs<T>, cfg: &NetworkConfig<T>, mode: PhiMode) -> Result<T> {
    Analyzer::new(*cfg)?.with_phi_mode(mode).psi(args)
}

pub fn varphi_exact<T: Real>(args: &PsiArgs<T>, cfg: &NetworkConfig<T>) -> Result<T> {
    Analyzer::new(*cfg)?.varphi_exact(args)
}

pub fn varphi_approx<T: Real>(args: &PsiArgs<T>, cfg: &NetworkConfig<T>) -> Result<T> {
    Analyzer::new(*cfg)?.varphi_approx(args)
}

pub fn ltat<T: Real>(cfg: &NetworkConfig<T>, mode: PhiMode) -> Result<ThroughputReport<T>> {
    Analyzer::new(*cfg)?.with_phi_mode(mode).ltat()
}
