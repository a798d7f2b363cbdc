//! Monte Carlo simulation of the two-phase protocol over sampled interferer fields.
//!
//! Every random draw comes from a ChaCha8 substream keyed by `(trial, round, link)`,
//! so the correlated and independent interference modes share fading draws and
//! results do not depend on the number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::config::{InterferenceMode, NetworkConfig, MAX_ROUNDS};
use crate::error::Result;

type Config = NetworkConfig<f64>;

const CHUNK: u64 = 2048;

/// Which multiple-access scheme the simulated source uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Protocol {
    #[default]
    Noma,
    Oma,
}

/// Interferer positions inside a disc centred on the midpoint of the two users.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfererField {
    pub positions: Vec<[f64; 2]>,
    pub r_trunc: f64,
}

/// User 1 sits at the origin and user 2 at `(D, 0)`.
pub fn user_positions(cfg: &Config) -> [[f64; 2]; 2] {
    [[0.0, 0.0], [cfg.d_inter, 0.0]]
}

/// Radius at which the standard deviation of the interference from beyond it,
/// `√(2πλ/(α−1))·r^(1−α)`, equals `1e−5·ℓ(d₂)`; no smaller than ten times the link geometry.
/// The mean of that far interference is added back by [`tail_mean`].
pub fn default_truncation_radius(cfg: &Config) -> f64 {
    let geometry = 10.0 * (cfg.d2 + cfg.d_inter);
    if cfg.lambda == 0.0 {
        return geometry;
    }
    let spread = (2.0 * std::f64::consts::PI * cfg.lambda / (cfg.alpha - 1.0)).sqrt();
    let target = 1e-5 * cfg.path_loss(cfg.d2);
    (spread / target).powf(1.0 / (cfg.alpha - 1.0)).max(geometry)
}

/// Mean interference from interferers beyond `r`, `2πλ·r^(2−α)/(α−2)`.
pub fn tail_mean(cfg: &Config, r: f64) -> f64 {
    2.0 * std::f64::consts::PI * cfg.lambda * r.powf(2.0 - cfg.alpha) / (cfg.alpha - 2.0)
}

/// `d²^(−α/2)` with fast paths for the common exponents.
#[inline]
fn gain_from_sq(d2: f64, alpha: f64) -> f64 {
    if alpha == 3.0 {
        1.0 / (d2 * d2.sqrt())
    } else if alpha == 4.0 {
        1.0 / (d2 * d2)
    } else {
        d2.powf(-0.5 * alpha)
    }
}

/// Poisson count, then uniform placement in the disc of radius `r_trunc`.
pub fn sample_field<R: Rng + ?Sized>(cfg: &Config, r_trunc: f64, rng: &mut R) -> InterfererField {
    let mean = cfg.lambda * std::f64::consts::PI * r_trunc * r_trunc;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let cx = 0.5 * cfg.d_inter;
    let positions = (0..count)
        .map(|_| {
            let r = r_trunc * rng.gen::<f64>().sqrt();
            let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            [cx + r * theta.cos(), r * theta.sin()]
        })
        .collect();
    InterfererField { positions, r_trunc }
}

impl InterfererField {
    /// Path gains from every interferer to `at`.
    pub fn gains(&self, at: [f64; 2], alpha: f64) -> Vec<f64> {
        self.positions
            .iter()
            .map(|p| {
                let d2 = (p[0] - at[0]).powi(2) + (p[1] - at[1]).powi(2);
                gain_from_sq(d2, alpha)
            })
            .collect()
    }

    /// One round of aggregate interference at `at`, with fresh Rayleigh fading.
    pub fn interference<R: Rng + ?Sized>(&self, at: [f64; 2], alpha: f64, rng: &mut R) -> f64 {
        faded_sum(&self.gains(at, alpha), rng)
    }
}

fn faded_sum<R: Rng + ?Sized>(gains: &[f64], rng: &mut R) -> f64 {
    gains
        .iter()
        .map(|g| {
            let fade: f64 = Exp1.sample(rng);
            g * fade
        })
        .sum::<f64>()
}

/// Decoding rounds (1-based) of one renewal cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    /// Round at which user 1 decoded `s2` (NOMA only).
    pub o1_decoded_s2_round: Option<u8>,
    pub o1_decoded_s1_round: Option<u8>,
    pub o2_decoded_round: Option<u8>,
    /// Rounds used before both users acknowledged, or `K`.
    pub renewal_length: u8,
}

impl TrialOutcome {
    fn fails1(&self, kappa: usize) -> bool {
        self.o1_decoded_s1_round.map_or(true, |r| usize::from(r) > kappa)
    }

    fn fails2(&self, kappa: usize) -> bool {
        self.o2_decoded_round.map_or(true, |r| usize::from(r) > kappa)
    }
}

/// Sample mean with `std_error = sample std / √trials`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl McEstimate {
    /// Mean of `hits` indicator values out of `trials`.
    pub fn from_count(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        let std_error = if trials > 1 {
            (p * (1.0 - p) / (n - 1.0)).max(0.0).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: p,
            std_error,
            trials,
        }
    }

    /// `|mean − reference|` in standard errors, with the error floored at the
    /// Bernoulli spread of the reference so that `p̂ ∈ {0, 1}` is not judged infinitely precise.
    pub fn z_score_bernoulli(&self, reference: f64) -> f64 {
        let floor = (reference * (1.0 - reference) / self.trials as f64).max(0.0).sqrt();
        let se = self.std_error.max(floor);
        let diff = (self.mean - reference).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }

    /// `|mean − reference|` in standard errors.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.mean - reference).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRound {
    pub o1: McEstimate,
    pub o2: McEstimate,
    pub joint: McEstimate,
}

/// Per-κ outage estimates; entry `κ − 1` is the outage after `κ` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct McOutageSet {
    pub per_round: Vec<McRound>,
    /// Mean renewal-cycle length.
    pub expected_rounds: McEstimate,
}

impl McOutageSet {
    pub fn last(&self) -> McRound {
        *self.per_round.last().expect("at least one round")
    }
}

/// Integer tallies; sums of integers are exact, so the reduction order is irrelevant.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    fail1: [u64; MAX_ROUNDS],
    fail2: [u64; MAX_ROUNDS],
    fail_both: [u64; MAX_ROUNDS],
    ok1: u64,
    ok2: u64,
    ok_both: u64,
    len: u64,
    len_sq: u64,
    ok1_len: u64,
    ok2_len: u64,
}

impl Tally {
    fn record(&mut self, o: &TrialOutcome, k_max: usize) {
        self.trials += 1;
        for kappa in 1..=k_max {
            let (f1, f2) = (o.fails1(kappa), o.fails2(kappa));
            self.fail1[kappa - 1] += u64::from(f1);
            self.fail2[kappa - 1] += u64::from(f2);
            self.fail_both[kappa - 1] += u64::from(f1 && f2);
        }
        let (s1, s2) = (!o.fails1(k_max), !o.fails2(k_max));
        let len = u64::from(o.renewal_length);
        self.ok1 += u64::from(s1);
        self.ok2 += u64::from(s2);
        self.ok_both += u64::from(s1 && s2);
        self.len += len;
        self.len_sq += len * len;
        self.ok1_len += u64::from(s1) * len;
        self.ok2_len += u64::from(s2) * len;
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        for i in 0..MAX_ROUNDS {
            self.fail1[i] += other.fail1[i];
            self.fail2[i] += other.fail2[i];
            self.fail_both[i] += other.fail_both[i];
        }
        self.ok1 += other.ok1;
        self.ok2 += other.ok2;
        self.ok_both += other.ok_both;
        self.len += other.len;
        self.len_sq += other.len_sq;
        self.ok1_len += other.ok1_len;
        self.ok2_len += other.ok2_len;
        self
    }
}

/// Substream indices within one trial.
#[derive(Clone, Copy)]
enum Link {
    SharedField = 0,
    InterfererFading1 = 1,
    InterfererFading2 = 2,
    Direct1 = 3,
    Direct2 = 4,
    Relayed2 = 5,
    OwnField1 = 6,
    OwnField2 = 7,
}

/// Monte Carlo engine for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: Config,
    protocol: Protocol,
    r_trunc: f64,
    tail: f64,
}

struct Scratch {
    gains: [Vec<f64>; 2],
}

impl Simulator {
    pub fn new(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let r_trunc = default_truncation_radius(&cfg);
        Ok(Simulator {
            r_trunc,
            tail: Self::tail_for(&cfg, r_trunc),
            cfg,
            protocol: Protocol::Noma,
        })
    }

    fn tail_for(cfg: &Config, r: f64) -> f64 {
        match cfg.interference_mode {
            InterferenceMode::None => 0.0,
            _ => tail_mean(cfg, r),
        }
    }

    pub fn with_protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn with_truncation_radius(mut self, r: f64) -> Self {
        self.r_trunc = r;
        self.tail = Self::tail_for(&self.cfg, r);
        self
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn truncation_radius(&self) -> f64 {
        self.r_trunc
    }

    fn stream(seed: u64, trial: u64, round: usize, link: Link) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        rng.set_word_pos(((round as u128) * 16 + link as u128) << 36);
        rng
    }

    fn load_gains(&self, field: &InterfererField, user: usize, scratch: &mut Vec<f64>) {
        let at = user_positions(&self.cfg)[user];
        scratch.clear();
        scratch.extend(field.positions.iter().map(|p| {
            let d2 = (p[0] - at[0]).powi(2) + (p[1] - at[1]).powi(2);
            gain_from_sq(d2, self.cfg.alpha)
        }));
    }

    /// Interference at both users in `round`, including the mean from beyond the disc.
    fn interference(&self, seed: u64, trial: u64, round: usize, s: &mut Scratch) -> [f64; 2] {
        let [a, b] = self.sampled_interference(seed, trial, round, s);
        [a + self.tail, b + self.tail]
    }

    fn sampled_interference(&self, seed: u64, trial: u64, round: usize, s: &mut Scratch) -> [f64; 2] {
        match self.cfg.interference_mode {
            InterferenceMode::None => [0.0, 0.0],
            _ if self.cfg.lambda == 0.0 => [0.0, 0.0],
            InterferenceMode::Correlated => [
                faded_sum(
                    &s.gains[0],
                    &mut Self::stream(seed, trial, round, Link::InterfererFading1),
                ),
                faded_sum(
                    &s.gains[1],
                    &mut Self::stream(seed, trial, round, Link::InterfererFading2),
                ),
            ],
            InterferenceMode::IndependentPerRound => {
                let mut out = [0.0; 2];
                for (user, (field_link, fading_link)) in [
                    (Link::OwnField1, Link::InterfererFading1),
                    (Link::OwnField2, Link::InterfererFading2),
                ]
                .into_iter()
                .enumerate()
                {
                    let mut rng = Self::stream(seed, trial, round, field_link);
                    let field = sample_field(&self.cfg, self.r_trunc, &mut rng);
                    self.load_gains(&field, user, &mut s.gains[user]);
                    out[user] = faded_sum(
                        &s.gains[user],
                        &mut Self::stream(seed, trial, round, fading_link),
                    );
                }
                out
            }
        }
    }

    fn prepare(&self, seed: u64, trial: u64, s: &mut Scratch) {
        if self.cfg.interference_mode == InterferenceMode::Correlated && self.cfg.lambda > 0.0 {
            let field = self.field(seed, trial);
            self.load_gains(&field, 0, &mut s.gains[0]);
            self.load_gains(&field, 1, &mut s.gains[1]);
        }
    }

    /// The interferer field of `trial` in the correlated mode.
    pub fn field(&self, seed: u64, trial: u64) -> InterfererField {
        let mut rng = Self::stream(seed, trial, 0, Link::SharedField);
        sample_field(&self.cfg, self.r_trunc, &mut rng)
    }

    fn exp1(seed: u64, trial: u64, round: usize, link: Link) -> f64 {
        Exp1.sample(&mut Self::stream(seed, trial, round, link))
    }

    fn run(&self, seed: u64, trial: u64, s: &mut Scratch, trace: Option<&mut Vec<[f64; 2]>>) -> TrialOutcome {
        self.prepare(seed, trial, s);
        let cfg = &self.cfg;
        let noise = cfg.noise_scale();
        let l1 = cfg.path_loss(cfg.d1);
        let l2 = cfg.path_loss(cfg.d2);
        let relay_gain = if cfg.cooperative { cfg.path_loss(cfg.d_inter) } else { 0.0 };
        let theta1 = cfg.r1.exp2() - 1.0;
        let theta2 = cfg.r2.exp2() - 1.0;
        let b = cfg.beta2;
        let mut out = TrialOutcome {
            renewal_length: cfg.k_max as u8,
            ..TrialOutcome::default()
        };
        let mut trace = trace;

        for round in 1..=cfg.k_max {
            let tag = Some(round as u8);
            let done = out.o1_decoded_s1_round.is_some() && out.o2_decoded_round.is_some();
            if done && trace.is_none() {
                break;
            }
            let [i1, i2] = self.interference(seed, trial, round, s);
            if let Some(t) = trace.as_deref_mut() {
                t.push([i1, i2]);
            }
            if done {
                continue;
            }
            let (n1, n2) = (i1 + noise, i2 + noise);
            let h1 = Self::exp1(seed, trial, round, Link::Direct1) * l1;
            let h2 = Self::exp1(seed, trial, round, Link::Direct2) * l2;
            // Acknowledgements from earlier rounds only.
            let acked1 = out.o1_decoded_s1_round.is_some();
            let acked2 = out.o2_decoded_round.is_some();

            match self.protocol {
                Protocol::Noma => {
                    if !acked1 {
                        if acked2 {
                            if h1 >= theta1 * n1 {
                                out.o1_decoded_s1_round = tag;
                            }
                        } else {
                            if out.o1_decoded_s2_round.is_none()
                                && (1.0 - b) * h1 >= theta2 * (b * h1 + n1)
                            {
                                out.o1_decoded_s2_round = tag;
                            }
                            if out.o1_decoded_s2_round.is_some() && b * h1 >= theta1 * n1 {
                                out.o1_decoded_s1_round = tag;
                            }
                        }
                    }
                    if !acked2 {
                        let ok = if acked1 {
                            let h_eq = Self::exp1(seed, trial, round, Link::Relayed2);
                            h_eq * (relay_gain + l2) >= theta2 * n2
                        } else {
                            (1.0 - b) * h2 >= theta2 * (b * h2 + n2)
                        };
                        if ok {
                            out.o2_decoded_round = tag;
                        }
                    }
                }
                Protocol::Oma => {
                    if !acked1 && shared_decode(cfg.r1, if acked2 { 1.0 } else { b }, h1 / n1) {
                        out.o1_decoded_s1_round = tag;
                    }
                    if !acked2 && shared_decode(cfg.r2, if acked1 { 1.0 } else { 1.0 - b }, h2 / n2) {
                        out.o2_decoded_round = tag;
                    }
                }
            }
            if out.o1_decoded_s1_round.is_some() && out.o2_decoded_round.is_some() {
                out.renewal_length = round as u8;
            }
        }
        out
    }

    fn scratch() -> Scratch {
        Scratch {
            gains: [Vec::new(), Vec::new()],
        }
    }

    /// Simulates renewal cycle `trial` of the run seeded by `seed`.
    pub fn run_trial(&self, seed: u64, trial: u64) -> TrialOutcome {
        self.run(seed, trial, &mut Self::scratch(), None)
    }

    /// Interference at both users in every round, with no early stop.
    pub fn interference_trace(&self, seed: u64, trial: u64) -> Vec<[f64; 2]> {
        let mut trace = Vec::with_capacity(self.cfg.k_max);
        self.run(seed, trial, &mut Self::scratch(), Some(&mut trace));
        trace
    }

    fn tally(&self, trials: u64, seed: u64) -> Tally {
        let chunks = trials.div_ceil(CHUNK);
        let k = self.cfg.k_max;
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut s = Self::scratch();
                let mut t = Tally::default();
                for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    t.record(&self.run(seed, trial, &mut s, None), k);
                }
                t
            })
            .reduce(Tally::default, Tally::merge)
    }

    pub fn estimate_outages(&self, trials: u64, seed: u64) -> McOutageSet {
        Self::outages_from(&self.tally(trials.max(1), seed), self.cfg.k_max)
    }

    fn outages_from(t: &Tally, k: usize) -> McOutageSet {
        let per_round = (0..k)
            .map(|i| McRound {
                o1: McEstimate::from_count(t.fail1[i], t.trials),
                o2: McEstimate::from_count(t.fail2[i], t.trials),
                joint: McEstimate::from_count(t.fail_both[i], t.trials),
            })
            .collect();
        let n = t.trials as f64;
        let mean = t.len as f64 / n;
        let std_error = if t.trials > 1 {
            ((t.len_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0).sqrt() / n.sqrt()
        } else {
            0.0
        };
        McOutageSet {
            per_round,
            expected_rounds: McEstimate {
                mean,
                std_error,
                trials: t.trials,
            },
        }
    }

    /// Renewal-reward ratio `Σ rewards / Σ cycle lengths`, with a delta-method error.
    pub fn estimate_ltat(&self, trials: u64, seed: u64) -> McEstimate {
        Self::ltat_from(&self.tally(trials.max(1), seed), self.cfg.r1, self.cfg.r2)
    }

    /// Outages and throughput from one set of trials.
    pub fn estimate(&self, trials: u64, seed: u64) -> (McOutageSet, McEstimate) {
        let t = self.tally(trials.max(1), seed);
        (
            Self::outages_from(&t, self.cfg.k_max),
            Self::ltat_from(&t, self.cfg.r1, self.cfg.r2),
        )
    }

    fn ltat_from(t: &Tally, r1: f64, r2: f64) -> McEstimate {
        let n = t.trials as f64;
        let reward = r1 * t.ok1 as f64 + r2 * t.ok2 as f64;
        let len = t.len as f64;
        let eta = reward / len;
        let std_error = if t.trials > 1 {
            // Var(R − ηL) from exact integer moments.
            let reward_sq = r1 * r1 * t.ok1 as f64
                + r2 * r2 * t.ok2 as f64
                + 2.0 * r1 * r2 * t.ok_both as f64;
            let reward_len = r1 * t.ok1_len as f64 + r2 * t.ok2_len as f64;
            let second =
                reward_sq - 2.0 * eta * reward_len + eta * eta * t.len_sq as f64;
            let mean_len = len / n;
            ((second / (n - 1.0)).max(0.0) / n).sqrt() / mean_len
        } else {
            0.0
        };
        McEstimate {
            mean: eta,
            std_error,
            trials: t.trials,
        }
    }
}

/// `share·log₂(1 + snr) ≥ rate`, written as `snr ≥ 2^(rate/share) − 1`.
fn shared_decode(rate: f64, share: f64, snr: f64) -> bool {
    if rate == 0.0 {
        return true;
    }
    if share <= 0.0 {
        return false;
    }
    snr >= (rate / share).exp2() - 1.0
}

pub fn estimate_outages(cfg: &Config, trials: u64, seed: u64) -> Result<McOutageSet> {
    Ok(Simulator::new(*cfg)?.estimate_outages(trials, seed))
}

pub fn estimate_ltat(cfg: &Config, trials: u64, seed: u64) -> Result<McEstimate> {
    Ok(Simulator::new(*cfg)?.estimate_ltat(trials, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_without_interferers_decodes_at_once() {
        let cfg = Config {
            lambda: 0.0,
            p_over_sigma2: f64::INFINITY,
            ..Config::default()
        };
        let sim = Simulator::new(cfg).unwrap();
        for trial in 0..50 {
            let o = sim.run_trial(1, trial);
            assert_eq!(o.renewal_length, 1);
            assert_eq!(o.o1_decoded_s1_round, Some(1));
            assert_eq!(o.o2_decoded_round, Some(1));
        }
        let eta = sim.estimate_ltat(100, 3);
        assert_eq!(eta.mean, 2.5);
    }

    #[test]
    fn zero_power_on_s1_blocks_phase_one() {
        let cfg = Config {
            beta2: 0.0,
            ..Config::default()
        };
        let sim = Simulator::new(cfg).unwrap();
        for trial in 0..500 {
            let o = sim.run_trial(9, trial);
            if let Some(r1) = o.o1_decoded_s1_round {
                let r2 = o.o2_decoded_round.expect("user 2 acknowledged first");
                assert!(r1 > r2);
            }
        }
    }

    #[test]
    fn trial_is_reproducible() {
        let sim = Simulator::new(Config::default()).unwrap();
        assert_eq!(sim.run_trial(5, 17), sim.run_trial(5, 17));
        assert_eq!(sim.field(5, 17), sim.field(5, 17));
        assert_ne!(sim.field(5, 17), sim.field(5, 18));
    }
}
