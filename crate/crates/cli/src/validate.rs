//! Quick self-checks: exact identities, the coincident-users oracle for the closed
//! form of `φ`, and a small simulation cross-check.

use std::time::Instant;

use noma_harq::sim::Simulator;
use noma_harq::specfun::{lauricella_fd, LauricellaArgs};
use noma_harq::{Analyzer64, Config, InterferenceMode, PhiMode, PsiArgs};

pub const IDENTITY_TOL: f64 = 1e-12;
pub const ORACLE_REL_TOL: f64 = 1e-5;
pub const MC_Z_MAX: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<28} measured {:.3e} tolerance {:.1e} ({:.2} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.seconds
        )
    }
}

fn timed(name: &'static str, tolerance: f64, f: impl FnOnce() -> anyhow::Result<f64>) -> anyhow::Result<Check> {
    let start = Instant::now();
    let measured = f()?;
    Ok(Check {
        name,
        measured,
        tolerance,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn identities(base: &Config) -> anyhow::Result<f64> {
    let a = Analyzer64::new(*base)?;
    let mut worst: f64 = 0.0;

    let zero_weights = PsiArgs::new(vec![0.3, 2.0], vec![0, 0], vec![1.5], vec![0])?;
    worst = worst.max((a.psi(&zero_weights)? - 1.0).abs());

    let zero_thresholds = PsiArgs::new(vec![0.0, 0.0], vec![1, 3], vec![0.0], vec![2])?;
    worst = worst.max(a.varphi_approx(&zero_thresholds)?.abs());
    worst = worst.max(a.varphi_exact(&zero_thresholds)?.abs());

    for x in [vec![0.0, 0.0], vec![0.4, 0.9]] {
        let b = if x[0] == 0.0 { vec![1.5, 2.0] } else { vec![0.0, 0.0] };
        let f: f64 = lauricella_fd(&LauricellaArgs::new(1.0 / 3.0, b, 4.0, x)?)?;
        worst = worst.max((f - 1.0).abs());
    }

    let clean = Config {
        interference_mode: InterferenceMode::None,
        p_over_sigma2: 1e30,
        ..*base
    };
    let t = Analyzer64::new(clean)?.ltat()?;
    worst = worst.max((t.ltat - (clean.r1 + clean.r2)).abs());
    Ok(worst)
}

/// With coincident users both forms of `φ` are the same integral.
fn coincident_oracle(base: &Config) -> anyhow::Result<f64> {
    let cfg = Config { d_inter: 0.0, ..*base };
    let a = Analyzer64::new(cfg)?;
    let cases = [
        (vec![0.7], vec![1], vec![], vec![]),
        (vec![0.2, 1.3], vec![2, 1], vec![0.5], vec![1]),
        (vec![3.0], vec![3], vec![0.05, 9.0], vec![1, 2]),
        (vec![], vec![], vec![0.4, 0.8, 1.6], vec![1, 1, 2]),
    ];
    let mut worst: f64 = 0.0;
    for (u, tau, uh, th) in cases {
        let args = PsiArgs::new(u, tau, uh, th)?;
        let exact = a.varphi_exact(&args)?;
        let approx = a.varphi_approx(&args)?;
        worst = worst.max(((exact - approx) / exact).abs());
    }
    Ok(worst)
}

fn simulation(base: &Config, trials: u64, seed: u64) -> anyhow::Result<f64> {
    let a = Analyzer64::new(*base)?.with_phi_mode(PhiMode::Exact);
    let exact = a.outages()?;
    let (mc, ltat) = Simulator::new(*base)?.estimate(trials, seed);
    let mut worst: f64 = 0.0;
    for (e, m) in exact.per_round.iter().zip(&mc.per_round) {
        worst = worst
            .max(m.o1.z_score_bernoulli(e.o1))
            .max(m.o2.z_score_bernoulli(e.o2))
            .max(m.joint.z_score_bernoulli(e.joint));
    }
    let reference = exact.throughput(base.r1, base.r2).ltat;
    if ltat.std_error > 0.0 || ltat.mean != reference {
        worst = worst.max(ltat.z_score(reference));
    }
    Ok(worst)
}

/// Runs every check against `base`; the simulation uses `trials` and `seed`.
pub fn run_checks(base: &Config, trials: u64, seed: u64) -> anyhow::Result<Vec<Check>> {
    Ok(vec![
        timed("trivial identities", IDENTITY_TOL, || identities(base))?,
        timed("coincident-users oracle", ORACLE_REL_TOL, || coincident_oracle(base))?,
        timed("simulation cross-check (z)", MC_Z_MAX, || simulation(base, trials, seed))?,
    ])
}
