//! OMA baseline: single-round closed form, degenerate splits and simulated events.

use approx::assert_relative_eq;
use noma_harq::oma::{oma_k1_closed_form, single_round_success};
use noma_harq::sim::{McEstimate, Protocol, Simulator, TrialOutcome};
use noma_harq::{OmaAnalyzer, OmaConfig, PhiMode};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

const Z_MAX: f64 = 3.0;
const TRIALS: u64 = 400_000;

fn base(db: f64, k: usize) -> OmaConfig<f64> {
    OmaConfig::default().with_snr_db(db).with_rounds(k)
}

/// Rayleigh link in a Poisson field: `exp(−U/snr − πλΓ(1+δ)Γ(1−δ)U^δ)`, `δ = 2/α`.
fn success_oracle(cfg: &OmaConfig<f64>, x: f64, d: f64) -> f64 {
    let u = (x.exp2() - 1.0) * d.powf(cfg.alpha);
    let delta = 2.0 / cfg.alpha;
    let field = std::f64::consts::PI * cfg.lambda * gamma(1.0 + delta) * gamma(1.0 - delta);
    (-u / cfg.p_over_sigma2 - field * u.powf(delta)).exp()
}

#[test]
fn single_round_success_matches_gamma_form() {
    for db in [10.0, 30.0, 50.0] {
        let cfg = base(db, 1);
        for x in [0.5, 2.0, 5.0] {
            let got = single_round_success(&cfg, x, cfg.path_loss(cfg.d2)).unwrap();
            assert_relative_eq!(got, success_oracle(&cfg, x, cfg.d2), max_relative = 1e-12);
        }
    }
}

#[test]
fn single_round_closed_form_equals_general_expression() {
    for db in [0.0, 20.0, 40.0, 60.0] {
        for beta2 in [0.1, 0.3, 0.7] {
            let cfg = OmaConfig { beta2, ..base(db, 1) };
            let closed = oma_k1_closed_form(&cfg).unwrap();
            let general = OmaAnalyzer::new(cfg).unwrap().oma_ltat().unwrap();
            assert!(
                (closed.ltat - general.ltat).abs() <= 1e-10 * closed.ltat + 1e-14,
                "{db} dB, β² = {beta2}: {} vs {}",
                closed.ltat,
                general.ltat
            );
            let outage = OmaAnalyzer::new(cfg).unwrap().final_outage().unwrap();
            assert_relative_eq!(outage.o1, closed.outage1, max_relative = 1e-10, epsilon = 1e-14);
            assert_relative_eq!(outage.o2, closed.outage2, max_relative = 1e-10, epsilon = 1e-14);
        }
    }
}

#[test]
fn whole_resource_to_user_one_is_a_single_user_link() {
    let cfg = OmaConfig {
        beta2: 1.0,
        r2: 0.0,
        ..base(30.0, 1)
    };
    let closed = oma_k1_closed_form(&cfg).unwrap();
    let phi1 = cfg.r1 * success_oracle(&cfg, cfg.r1, cfg.d1);
    assert_relative_eq!(closed.ltat, phi1, max_relative = 1e-12);
    assert_eq!(closed.outage2, 0.0);
}

#[test]
fn closed_form_needs_one_round() {
    assert!(oma_k1_closed_form(&base(30.0, 2)).is_err());
}

#[test]
fn invalid_splits_are_rejected() {
    assert!(OmaAnalyzer::new(OmaConfig { beta2: 1.0, ..base(30.0, 2) }).is_err());
    assert!(OmaAnalyzer::new(OmaConfig { beta2: 0.0, ..base(30.0, 2) }).is_err());
    assert!(oma_k1_closed_form(&OmaConfig { beta2: 0.0, ..base(30.0, 1) }).is_err());
}

#[test]
fn zero_rates_never_fail() {
    let cfg = OmaConfig {
        r1: 0.0,
        r2: 0.0,
        ..base(30.0, 3)
    };
    let a = OmaAnalyzer::new(cfg).unwrap();
    assert_eq!(a.oma_term_both_fail().unwrap(), 0.0);
    let o = a.final_outage().unwrap();
    assert_eq!((o.o1, o.o2, o.joint), (0.0, 0.0, 0.0));
    assert_eq!(a.oma_ltat().unwrap().ltat, 0.0);
}

#[test]
fn noiseless_without_interferers_delivers_both_rates() {
    let cfg = OmaConfig {
        lambda: 0.0,
        p_over_sigma2: f64::INFINITY,
        ..base(30.0, 2)
    };
    let a = OmaAnalyzer::new(cfg).unwrap();
    let o = a.final_outage().unwrap();
    assert!(o.o1.abs() < 1e-12 && o.o2.abs() < 1e-12);
    assert_relative_eq!(a.oma_ltat().unwrap().ltat, cfg.r1 + cfg.r2, max_relative = 1e-12);
}

#[test]
fn round_arguments_are_checked() {
    let a = OmaAnalyzer::new(base(30.0, 2)).unwrap();
    assert!(a.oma_term_fail1_succ2(0).is_err());
    assert!(a.oma_term_succ1_fail2(3).is_err());
}

fn frequency(runs: &[TrialOutcome], event: impl Fn(&TrialOutcome) -> bool) -> McEstimate {
    McEstimate::from_count(runs.iter().filter(|o| event(o)).count() as u64, runs.len() as u64)
}

fn check(name: &str, mc: McEstimate, analytic: f64) {
    let z = mc.z_score_bernoulli(analytic);
    assert!(
        z <= Z_MAX,
        "{name}: analytic {analytic:.6e}, simulated {:.6e} ± {:.1e} (z = {z:.2})",
        mc.mean,
        mc.std_error
    );
}

#[test]
fn terms_and_throughput_match_simulation() {
    let cfg = base(30.0, 2);
    let a = OmaAnalyzer::new(cfg).unwrap().with_phi_mode(PhiMode::Exact);
    let sim = Simulator::new(cfg).unwrap().with_protocol(Protocol::Oma);
    let runs: Vec<TrialOutcome> = (0..TRIALS).into_par_iter().map(|t| sim.run_trial(21, t)).collect();
    for k in 1..=2u8 {
        check(
            &format!("user 1 fails, user 2 decodes at {k}"),
            frequency(&runs, |o| o.o1_decoded_s1_round.is_none() && o.o2_decoded_round == Some(k)),
            a.oma_term_fail1_succ2(k.into()).unwrap(),
        );
        check(
            &format!("user 1 decodes at {k}, user 2 fails"),
            frequency(&runs, |o| o.o1_decoded_s1_round == Some(k) && o.o2_decoded_round.is_none()),
            a.oma_term_succ1_fail2(k.into()).unwrap(),
        );
    }
    check(
        "both fail",
        frequency(&runs, |o| o.o1_decoded_s1_round.is_none() && o.o2_decoded_round.is_none()),
        a.oma_term_both_fail().unwrap(),
    );

    let (outages, ltat) = sim.estimate(TRIALS, 22);
    let exact = a.oma_outages().unwrap();
    for (mc, an) in outages.per_round.iter().zip(&exact.per_round) {
        check("outage 1", mc.o1, an.o1);
        check("outage 2", mc.o2, an.o2);
        check("joint outage", mc.joint, an.joint);
    }
    let eta = a.oma_ltat().unwrap().ltat;
    let z = ltat.z_score(eta);
    assert!(z <= Z_MAX, "ltat {eta} vs {} ± {} (z = {z:.2})", ltat.mean, ltat.std_error);
}
