//! Constrained rate, power-split and intensity searches.

use noma_harq::optimize::{
    maximize_ase, maximize_ltat_joint, maximize_ltat_rates, remark1_closed_form, OutageConstraints, Scheme,
    SearchSettings,
};
use noma_harq::{Config, OmaAnalyzer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn settings(grid: usize) -> SearchSettings {
    SearchSettings {
        refinements: 1,
        ..SearchSettings::default().with_grid(grid)
    }
}

fn cfg(db: f64, k: usize) -> Config {
    Config::default().with_snr_db(db).with_rounds(k)
}

#[test]
fn loosening_the_constraint_never_hurts() {
    let s = settings(12);
    for scheme in [Scheme::Noma, Scheme::Oma] {
        let base = cfg(40.0, 2);
        let tight = maximize_ltat_rates(&base, scheme, &OutageConstraints::uniform(0.01).unwrap(), &s).unwrap();
        let loose = maximize_ltat_rates(&base, scheme, &OutageConstraints::uniform(1.0).unwrap(), &s).unwrap();
        assert!(loose.objective >= tight.objective, "{scheme:?}: {} < {}", loose.objective, tight.objective);
        assert!(loose.feasible);
    }
}

#[test]
fn reported_optimum_satisfies_the_constraints() {
    let s = settings(12);
    let eps = OutageConstraints::new(0.05, 0.02).unwrap();
    for scheme in [Scheme::Noma, Scheme::Oma] {
        let r = maximize_ltat_rates(&cfg(40.0, 2), scheme, &eps, &s).unwrap();
        assert!(r.feasible);
        assert!(r.outage1 <= eps.eps1 + 1e-9 && r.outage2 <= eps.eps2 + 1e-9);
        assert!(r.objective > 0.0 && r.objective <= r.argmax.r1 + r.argmax.r2);
    }
}

#[test]
fn hopeless_link_is_infeasible() {
    let r = maximize_ltat_rates(&cfg(0.0, 2), Scheme::Noma, &OutageConstraints::uniform(0.01).unwrap(), &settings(8))
        .unwrap();
    assert!(!r.feasible);
    assert_eq!(r.objective, 0.0);
}

#[test]
fn single_intensity_area_efficiency_is_scaled_throughput() {
    let lambda = 2e-4;
    let base = Config { lambda, ..cfg(40.0, 2) };
    let eps = OutageConstraints::uniform(0.1).unwrap();
    let s = SearchSettings {
        lambda_min: lambda,
        lambda_max: lambda,
        lambda_points: 1,
        ..settings(10)
    };
    let area = maximize_ase(&base, Scheme::Noma, &eps, &s).unwrap();
    let rates = maximize_ltat_rates(&base, Scheme::Noma, &eps, &s).unwrap();
    assert!((area.objective - lambda * rates.objective).abs() <= 1e-12 * area.objective);
    assert_eq!(area.argmax, rates.argmax);
}

#[test]
fn area_efficiency_grows_with_the_outage_budget() {
    let s = SearchSettings {
        lambda_points: 8,
        ..settings(8)
    };
    let base = cfg(40.0, 2);
    let mut last = 0.0;
    for eps in [0.01, 0.05, 0.2] {
        let r = maximize_ase(&base, Scheme::Noma, &OutageConstraints::uniform(eps).unwrap(), &s).unwrap();
        assert!(r.objective >= last, "ε = {eps}: {} < {last}", r.objective);
        last = r.objective;
    }
}

#[test]
fn single_round_oma_gives_everything_to_one_user() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..5 {
        let base = Config {
            lambda: 10f64.powf(rng.gen_range(-6.0..-4.0)),
            d1: rng.gen_range(2.0..8.0),
            d2: rng.gen_range(9.0..20.0),
            ..cfg(rng.gen_range(20.0..60.0), 1)
        };
        let eps = 0.05;
        let closed = remark1_closed_form(&base, eps).unwrap();
        assert_eq!((closed.argmax.beta2, closed.argmax.r2), (1.0, 0.0));
        assert!(closed.outage1 <= eps + 1e-9);
        // The closed form reaches the general OMA throughput at its own argmax.
        let at_argmax = OmaAnalyzer::new(Config {
            r1: closed.argmax.r1,
            r2: 0.0,
            beta2: 1.0,
            ..base
        })
        .unwrap()
        .oma_ltat()
        .unwrap();
        assert!((at_argmax.ltat - closed.objective).abs() <= 1e-10 * closed.objective);
    }
}

#[test]
fn grid_search_agrees_with_single_round_closed_form() {
    let base = cfg(40.0, 1);
    let eps = 0.05;
    let s = SearchSettings {
        refinements: 2,
        ..SearchSettings::default().with_grid(16)
    };
    let closed = remark1_closed_form(&base, eps).unwrap();
    let grid = maximize_ltat_joint(&base, Scheme::Oma, &OutageConstraints::uniform(eps).unwrap(), &s).unwrap();
    // Finest rate step; η rises by at most one unit per unit of rate.
    let step = s.r_max / (s.grid - 1) as f64 / s.shrink.powi(2);
    assert!(grid.objective <= closed.objective + 1e-9);
    assert!(closed.objective - grid.objective <= step, "{} vs {}", grid.objective, closed.objective);
    assert_eq!((grid.argmax.beta2, grid.argmax.r2), (1.0, 0.0));
}
