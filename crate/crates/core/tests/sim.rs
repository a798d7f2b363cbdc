//! Point-process sampling, interference statistics and engine reproducibility.

use noma_harq::sim::{default_truncation_radius, sample_field, tail_mean, Simulator};
use noma_harq::{Analyzer64, Config, InterferenceMode, PhiMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::gamma;

const Z_MAX: f64 = 3.0;
/// Chi-square tail probability below which uniformity is rejected.
const CHI2_P_MIN: f64 = 1e-3;

#[test]
fn interferer_count_is_poisson() {
    let cfg = Config::default();
    let r = 3000.0;
    let mean = cfg.lambda * std::f64::consts::PI * r * r;
    let fields = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let counts: Vec<f64> = (0..fields)
        .map(|_| sample_field(&cfg, r, &mut rng).positions.len() as f64)
        .collect();
    let n = fields as f64;
    let m = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (n - 1.0);
    let z = (m - mean).abs() / (mean / n).sqrt();
    assert!(z <= Z_MAX, "mean count {m} vs {mean} (z = {z:.2})");
    // Var(s²) ≈ 2σ⁴/(n−1) for a near-Gaussian count.
    let z_var = (var - mean).abs() / (2.0 * mean * mean / (n - 1.0)).sqrt();
    assert!(z_var <= Z_MAX, "count variance {var} vs {mean} (z = {z_var:.2})");
}

fn chi_square_p(bins: &[u64]) -> f64 {
    let total: u64 = bins.iter().sum();
    let expect = total as f64 / bins.len() as f64;
    let stat: f64 = bins.iter().map(|&b| (b as f64 - expect).powi(2) / expect).sum();
    let dist = ChiSquared::new((bins.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn interferers_are_uniform_in_the_disc() {
    let cfg = Config::default();
    let r = 500.0;
    let centre = [0.5 * cfg.d_inter, 0.0];
    let mut radial = [0u64; 20];
    let mut angular = [0u64; 20];
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..2000 {
        for p in sample_field(&cfg, r, &mut rng).positions {
            let (dx, dy) = (p[0] - centre[0], p[1] - centre[1]);
            let area_fraction = (dx * dx + dy * dy) / (r * r);
            assert!(area_fraction <= 1.0);
            radial[((area_fraction * 20.0) as usize).min(19)] += 1;
            let turn = dy.atan2(dx) / std::f64::consts::TAU + 0.5;
            angular[((turn * 20.0) as usize).min(19)] += 1;
        }
    }
    let (pr, pa) = (chi_square_p(&radial), chi_square_p(&angular));
    assert!(pr > CHI2_P_MIN, "radial p = {pr}");
    assert!(pa > CHI2_P_MIN, "angular p = {pa}");
}

#[test]
fn interference_has_the_poisson_laplace_transform() {
    // E[exp(−sI)] = exp(−πλΓ(1+δ)Γ(1−δ)s^δ) with δ = 2/α; s is chosen to make it e^(−1).
    let cfg = Config::default();
    let delta = 2.0 / cfg.alpha;
    let c = std::f64::consts::PI * cfg.lambda * gamma(1.0 + delta) * gamma(1.0 - delta);
    let s = c.recip().powf(1.0 / delta);
    let expect = (-1.0f64).exp();
    let r = default_truncation_radius(&cfg);
    let tail = tail_mean(&cfg, r);
    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            let field = sample_field(&cfg, r, &mut rng);
            (-s * (field.interference([0.0, 0.0], cfg.alpha, &mut rng) + tail)).exp()
        })
        .collect();
    let n = trials as f64;
    let m = samples.iter().sum::<f64>() / n;
    let se = (samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let z = (m - expect).abs() / se;
    assert!(z <= Z_MAX, "Laplace transform {m} vs {expect} (z = {z:.2})");
}

/// `P[I₁ > t, I₂ > t]` against `P[I₁ > t]·P[I₂ > t]` for interference at user 1 in rounds 1 and 2.
fn round_dependence(mode: InterferenceMode, seed: u64) -> (f64, f64, f64) {
    let cfg = Config {
        interference_mode: mode,
        k_max: 2,
        ..Config::default()
    };
    let sim = Simulator::new(cfg).unwrap();
    let trials = 40_000u64;
    let traces: Vec<[f64; 2]> = (0..trials)
        .map(|t| {
            let tr = sim.interference_trace(seed, t);
            [tr[0][0], tr[1][0]]
        })
        .collect();
    let mut first: Vec<f64> = traces.iter().map(|t| t[0]).collect();
    first.sort_by(f64::total_cmp);
    let median = first[first.len() / 2];
    let n = trials as f64;
    let p1 = traces.iter().filter(|t| t[0] > median).count() as f64 / n;
    let p2 = traces.iter().filter(|t| t[1] > median).count() as f64 / n;
    let both = traces.iter().filter(|t| t[0] > median && t[1] > median).count() as f64 / n;
    let se = (both * (1.0 - both) / n).sqrt();
    (both, p1 * p2, se)
}

#[test]
fn fixed_positions_correlate_interference_across_rounds() {
    let (both, product, se) = round_dependence(InterferenceMode::Correlated, 34);
    assert!(both - product > 10.0 * se, "{both} vs {product} ± {se}");
    let (both, product, se) = round_dependence(InterferenceMode::IndependentPerRound, 35);
    assert!((both - product).abs() <= Z_MAX * se, "{both} vs {product} ± {se}");
}

#[test]
fn users_see_one_field_in_correlated_mode() {
    let cfg = Config::default();
    let sim = Simulator::new(cfg).unwrap();
    let trace = sim.interference_trace(36, 0);
    assert_eq!(trace.len(), cfg.k_max);
    let none = Simulator::new(Config {
        interference_mode: InterferenceMode::None,
        ..cfg
    })
    .unwrap();
    assert!(none.interference_trace(36, 0).iter().all(|r| *r == [0.0, 0.0]));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sim = Simulator::new(Config::default().with_snr_db(30.0)).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sim.estimate(20_000, 37))
    };
    let (o1, e1) = run(1);
    let (o3, e3) = run(3);
    assert_eq!(o1, o3);
    assert_eq!(e1.mean.to_bits(), e3.mean.to_bits());
    assert_eq!(e1.std_error.to_bits(), e3.std_error.to_bits());
}

#[test]
fn doubling_the_truncation_radius_changes_nothing_measurable() {
    let cfg = Config::default().with_snr_db(40.0).with_rounds(2);
    let sim = Simulator::new(cfg).unwrap();
    let r = sim.truncation_radius();
    let wide = sim.clone().with_truncation_radius(2.0 * r);
    let trials = 100_000;
    let (a, _) = sim.estimate(trials, 38);
    let (b, _) = wide.estimate(trials, 39);
    for (x, y) in a.per_round.iter().zip(&b.per_round) {
        for (p, q) in [(x.o1, y.o1), (x.o2, y.o2), (x.joint, y.joint)] {
            let se = (p.std_error.powi(2) + q.std_error.powi(2)).sqrt().max(1e-12);
            let z = (p.mean - q.mean).abs() / se;
            assert!(z <= Z_MAX, "{} vs {} (z = {z:.2})", p.mean, q.mean);
        }
    }
}

#[test]
fn independent_rounds_match_their_analysis() {
    let cfg = Config {
        interference_mode: InterferenceMode::IndependentPerRound,
        ..Config::default().with_snr_db(30.0).with_rounds(2)
    };
    let exact = Analyzer64::new(cfg).unwrap().with_phi_mode(PhiMode::Exact).outages().unwrap();
    let (mc, _) = Simulator::new(cfg).unwrap().estimate(200_000, 40);
    for (m, a) in mc.per_round.iter().zip(&exact.per_round) {
        for (name, est, reference) in [("o1", m.o1, a.o1), ("o2", m.o2, a.o2), ("joint", m.joint, a.joint)] {
            let z = est.z_score_bernoulli(reference);
            assert!(z <= Z_MAX, "{name}: {reference} vs {} (z = {z:.2})", est.mean);
        }
    }
}

#[test]
fn trivial_configurations_have_certain_outcomes() {
    let noiseless = Config {
        lambda: 0.0,
        p_over_sigma2: f64::INFINITY,
        ..Config::default()
    };
    let (o, eta) = Simulator::new(noiseless).unwrap().estimate(1000, 41);
    assert_eq!(o.last().o1.mean, 0.0);
    assert_eq!(eta.mean, noiseless.r1 + noiseless.r2);
    assert_eq!(o.expected_rounds.mean, 1.0);

    let silent = Config {
        p_over_sigma2: 1e-12,
        ..Config::default()
    };
    let (o, eta) = Simulator::new(silent).unwrap().estimate(1000, 42);
    assert_eq!(o.last().joint.mean, 1.0);
    assert_eq!(eta.mean, 0.0);
}
