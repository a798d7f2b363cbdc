//! Derivative-free maximization of throughput and area spectral efficiency under
//! outage constraints. A coarse grid is followed by rounds of local refinement,
//! each on a box four times narrower around the incumbent.

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;

use crate::analytic::{Analyzer, PhiCache, PhiMode, RoundOutage};
use crate::config::{InterferenceMode, NetworkConfig};
use crate::error::{Error, Result};
use crate::oma::{single_round_success, OmaAnalyzer};

type Config = NetworkConfig<f64>;

/// Absolute slack on outage constraints.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Objectives closer than this are ties.
pub const TIE_TOL: f64 = 1e-12;
/// Largest fraction of `2^(−R₂)` the NOMA power-split axis reaches.
pub const BETA2_FRACTION_MAX: f64 = 1.0 - 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Noma,
    Oma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageConstraints {
    pub eps1: f64,
    pub eps2: f64,
}

impl OutageConstraints {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        for (field, e) in [("eps1", eps1), ("eps2", eps2)] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::config(field, format!("must lie in (0, 1], got {e}")));
            }
        }
        Ok(OutageConstraints { eps1, eps2 })
    }

    pub fn uniform(eps: f64) -> Result<Self> {
        Self::new(eps, eps)
    }

    pub fn satisfied(&self, o1: f64, o2: f64) -> bool {
        o1 <= self.eps1 + CONSTRAINT_TOL && o2 <= self.eps2 + CONSTRAINT_TOL
    }
}

/// Grid and refinement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    /// Upper end of both rate axes (bps/Hz).
    pub r_max: f64,
    /// Points per axis of the coarse grid.
    pub grid: usize,
    /// Points per axis of each refinement grid.
    pub refine_grid: usize,
    pub refinements: usize,
    pub shrink: f64,
    /// Log-spaced intensity axis for area spectral efficiency.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub phi_mode: PhiMode,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            r_max: 8.0,
            grid: 64,
            refine_grid: 64,
            refinements: 2,
            shrink: 4.0,
            lambda_min: 1e-7,
            lambda_max: 1e-2,
            lambda_points: 40,
            phi_mode: PhiMode::Approx,
        }
    }
}

impl SearchSettings {
    /// The same search on `grid` points per axis everywhere.
    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self.refine_grid = grid;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptPoint {
    pub r1: f64,
    pub r2: f64,
    pub beta2: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptResult {
    /// Throughput (bps/Hz) or, for intensity searches, area spectral efficiency (bps/Hz/m²).
    pub objective: f64,
    pub argmax: OptPoint,
    pub feasible: bool,
    pub evaluations: usize,
    /// Outages at the argmax, re-evaluated after the search.
    pub outage1: f64,
    pub outage2: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    objective: f64,
    point: OptPoint,
}

impl Candidate {
    /// Higher objective wins; ties go to smaller `R₁ + R₂`, then smaller `β²`, then smaller `λ`.
    fn beats(&self, other: &Candidate) -> bool {
        if self.objective > other.objective + TIE_TOL {
            return true;
        }
        if self.objective < other.objective - TIE_TOL {
            return false;
        }
        let key = |c: &Candidate| (c.point.r1 + c.point.r2, c.point.beta2, c.point.lambda);
        let (a, b) = (key(self), key(other));
        match a.0.partial_cmp(&b.0) {
            Some(Ordering::Less) => true,
            Some(Ordering::Greater) => false,
            _ => (a.1, a.2) < (b.1, b.2),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn points(&self, n: usize) -> Vec<f64> {
        if n <= 1 || self.hi <= self.lo {
            return vec![self.lo];
        }
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn around(&self, centre: f64, bounds: &Axis, shrink: f64) -> Axis {
        let half = 0.5 * (self.hi - self.lo) / shrink;
        Axis {
            lo: (centre - half).max(bounds.lo),
            hi: (centre + half).min(bounds.hi),
        }
    }
}

fn cartesian(axes: &[Axis], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let pts = axis.points(n);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                pts.iter().map(move |&p| {
                    let mut v = prefix.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    out
}

struct SearchOutcome {
    best: Option<(Candidate, Vec<f64>)>,
    evaluations: usize,
}

/// Grid plus refinement over `axes`. `eval` maps a coordinate vector to a feasible
/// candidate or `None`; evaluation runs in parallel, the reduction in grid order.
fn grid_search<F>(axes: &[Axis], s: &SearchSettings, eval: F) -> Result<SearchOutcome>
where
    F: Fn(&[f64]) -> Result<(Option<Candidate>, usize)> + Sync,
{
    let mut evaluations = 0;
    let mut best: Option<(Candidate, Vec<f64>)> = None;
    let mut boxes = axes.to_vec();
    for stage in 0..=s.refinements {
        let n = if stage == 0 { s.grid } else { s.refine_grid };
        let points = cartesian(&boxes, n);
        let results: Vec<Result<(Option<Candidate>, usize)>> =
            points.par_iter().map(|p| eval(p)).collect();
        for (p, r) in points.into_iter().zip(results) {
            let (cand, used) = r?;
            evaluations += used;
            if let Some(c) = cand {
                if best.as_ref().map_or(true, |(b, _)| c.beats(b)) {
                    best = Some((c, p));
                }
            }
        }
        let Some((_, centre)) = &best else {
            break;
        };
        boxes = boxes
            .iter()
            .zip(axes.iter())
            .zip(centre.iter())
            .map(|((b, full), &c)| b.around(c, full, s.shrink))
            .collect();
    }
    Ok(SearchOutcome { best, evaluations })
}

/// Outage at the cap and, if the constraints hold, the throughput.
fn evaluate(
    cfg: &Config,
    scheme: Scheme,
    mode: PhiMode,
    cache: Option<Arc<PhiCache<f64>>>,
    constraints: &OutageConstraints,
) -> Result<(RoundOutage<f64>, Option<f64>)> {
    // Interference only adds outage, so failing without it settles the point.
    if cfg.interference_mode != InterferenceMode::None {
        let quiet = Config {
            interference_mode: InterferenceMode::None,
            ..*cfg
        };
        let (last, _) = evaluate(&quiet, scheme, mode, None, constraints)?;
        if !constraints.satisfied(last.o1, last.o2) {
            return Ok((last, None));
        }
    }
    let mut analyzer = Analyzer::new(*cfg)?.with_phi_mode(mode);
    if let Some(cache) = cache {
        analyzer = analyzer.with_cache(cache);
    }
    match scheme {
        Scheme::Noma => {
            let last = analyzer.final_outage()?;
            if !cfg.noma_feasible() || !constraints.satisfied(last.o1, last.o2) {
                return Ok((last, None));
            }
            Ok((last, Some(analyzer.ltat()?.ltat)))
        }
        Scheme::Oma => {
            let oma = OmaAnalyzer::from_analyzer(analyzer);
            let last = oma.final_outage()?;
            if !constraints.satisfied(last.o1, last.o2) {
                return Ok((last, None));
            }
            Ok((last, Some(oma.oma_ltat()?.ltat)))
        }
    }
}

fn with_point(base: &Config, p: &OptPoint) -> Config {
    Config {
        r1: p.r1,
        r2: p.r2,
        beta2: p.beta2,
        lambda: p.lambda,
        ..*base
    }
}

fn rate_candidate(
    base: &Config,
    scheme: Scheme,
    s: &SearchSettings,
    constraints: &OutageConstraints,
    point: OptPoint,
) -> Result<(Option<Candidate>, usize)> {
    let cfg = with_point(base, &point);
    let (_, ltat) = evaluate(&cfg, scheme, s.phi_mode, None, constraints)?;
    Ok((
        ltat.filter(|eta| *eta > 0.0).map(|objective| Candidate {
            objective,
            point,
        }),
        1,
    ))
}

fn finish(
    base: &Config,
    scheme: Scheme,
    s: &SearchSettings,
    constraints: &OutageConstraints,
    outcome: SearchOutcome,
    area: bool,
) -> Result<OptResult> {
    let Some((best, _)) = outcome.best else {
        return Ok(OptResult {
            objective: 0.0,
            argmax: OptPoint {
                r1: 0.0,
                r2: 0.0,
                beta2: base.beta2,
                lambda: base.lambda,
            },
            feasible: false,
            evaluations: outcome.evaluations,
            outage1: 1.0,
            outage2: 1.0,
        });
    };
    // Independent re-evaluation with a fresh cache.
    let cfg = with_point(base, &best.point);
    let (last, ltat) = evaluate(&cfg, scheme, s.phi_mode, None, constraints)?;
    let feasible = ltat.is_some_and(|eta| eta > 0.0);
    let objective = ltat.map_or(best.objective, |eta| {
        if area {
            best.point.lambda * eta
        } else {
            eta
        }
    });
    Ok(OptResult {
        objective,
        argmax: best.point,
        feasible,
        evaluations: outcome.evaluations,
        outage1: last.o1,
        outage2: last.o2,
    })
}

/// Upper end of the `R₂` axis: the search box, cut at `2^(−R₂) = β²` for NOMA.
fn r2_cap(scheme: Scheme, beta2: f64, r_max: f64) -> f64 {
    match scheme {
        Scheme::Noma if beta2 > 0.0 => (-beta2.log2()).min(r_max),
        _ => r_max,
    }
}

/// Maximizes throughput over `(R₁, R₂)` at the configured power split.
pub fn maximize_ltat_rates(
    base: &Config,
    scheme: Scheme,
    constraints: &OutageConstraints,
    s: &SearchSettings,
) -> Result<OptResult> {
    base.validate()?;
    let axes = [
        Axis { lo: 0.0, hi: s.r_max },
        Axis {
            lo: 0.0,
            hi: r2_cap(scheme, base.beta2, s.r_max),
        },
    ];
    let outcome = grid_search(&axes, s, |p| {
        let point = OptPoint {
            r1: p[0],
            r2: p[1],
            beta2: base.beta2,
            lambda: base.lambda,
        };
        rate_candidate(base, scheme, s, constraints, point)
    })?;
    finish(base, scheme, s, constraints, outcome, false)
}

/// Maximizes throughput over `(R₁, R₂, β²)`. For NOMA the split is searched as a
/// fraction of `2^(−R₂)`, capped at [`BETA2_FRACTION_MAX`].
pub fn maximize_ltat_joint(
    base: &Config,
    scheme: Scheme,
    constraints: &OutageConstraints,
    s: &SearchSettings,
) -> Result<OptResult> {
    base.validate()?;
    let third = match scheme {
        Scheme::Noma => BETA2_FRACTION_MAX,
        Scheme::Oma => 1.0,
    };
    let axes = [
        Axis { lo: 0.0, hi: s.r_max },
        Axis { lo: 0.0, hi: s.r_max },
        Axis { lo: 0.0, hi: third },
    ];
    let outcome = grid_search(&axes, s, |p| {
        let beta2 = match scheme {
            Scheme::Noma => p[2] * (-p[1]).exp2(),
            Scheme::Oma => p[2],
        };
        let point = OptPoint {
            r1: p[0],
            r2: p[1],
            beta2,
            lambda: base.lambda,
        };
        rate_candidate(base, scheme, s, constraints, point)
    })?;
    finish(base, scheme, s, constraints, outcome, false)
}

fn lambda_grid(s: &SearchSettings) -> Vec<f64> {
    let n = s.lambda_points.max(1);
    if n == 1 {
        return vec![s.lambda_min];
    }
    let (lo, hi) = (s.lambda_min.ln(), s.lambda_max.ln());
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Maximizes `Δ = λ·η` over `(R₁, R₂)` and the intensity. At every rate point the
/// whole intensity grid is scanned with one `φ` table, since `φ` does not depend on `λ`.
pub fn maximize_ase(
    base: &Config,
    scheme: Scheme,
    constraints: &OutageConstraints,
    s: &SearchSettings,
) -> Result<OptResult> {
    base.validate()?;
    let lambdas = lambda_grid(s);
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::config("lambda_min", "intensity grid must be positive"));
    }
    let axes = [
        Axis { lo: 0.0, hi: s.r_max },
        Axis {
            lo: 0.0,
            hi: r2_cap(scheme, base.beta2, s.r_max),
        },
    ];
    let outcome = grid_search(&axes, s, |p| {
        let cache = Arc::new(PhiCache::new());
        let mut best: Option<Candidate> = None;
        for &lambda in &lambdas {
            let point = OptPoint {
                r1: p[0],
                r2: p[1],
                beta2: base.beta2,
                lambda,
            };
            let cfg = with_point(base, &point);
            let (_, ltat) =
                evaluate(&cfg, scheme, s.phi_mode, Some(Arc::clone(&cache)), constraints)?;
            if let Some(eta) = ltat.filter(|eta| *eta > 0.0) {
                let c = Candidate {
                    objective: lambda * eta,
                    point,
                };
                if best.as_ref().map_or(true, |b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
        Ok((best, lambdas.len()))
    })?;
    finish(base, scheme, s, constraints, outcome, true)
}

/// Largest `z` with `ϑ(z) ≥ 1 − ε`, by bisection on the decreasing `ϑ`.
fn max_efficiency(cfg: &Config, gain: f64, eps: f64) -> Result<f64> {
    let target = 1.0 - eps;
    let ok = |z: f64| -> Result<bool> { Ok(single_round_success(cfg, z, gain)? >= target) };
    let mut hi = 1.0;
    while ok(hi)? {
        hi *= 2.0;
        if hi > 1e3 {
            return Ok(hi);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Maximizes `z·ϑ(z)` over `[0, z_max]`: dense scan, then golden section around the best cell.
fn max_single_user(cfg: &Config, gain: f64, z_max: f64) -> Result<(f64, f64)> {
    let f = |z: f64| -> Result<f64> { Ok(z * single_round_success(cfg, z, gain)?) };
    const SCAN: usize = 2000;
    let mut best = (0.0, 0.0);
    for i in 1..=SCAN {
        let z = z_max * i as f64 / SCAN as f64;
        let v = f(z)?;
        if v > best.1 {
            best = (z, v);
        }
    }
    let step = z_max / SCAN as f64;
    let (mut a, mut b) = ((best.0 - step).max(0.0), (best.0 + step).min(z_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..100 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    for (z, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (z, v);
        }
    }
    Ok(best)
}

/// Single-round OMA with `ε₁ = ε₂ = ε`: each user's spectral efficiency is optimized
/// separately, and since throughput is linear in `β²` the whole resource goes to the
/// user with the larger optimum.
pub fn remark1_closed_form(cfg: &Config, eps: f64) -> Result<OptResult> {
    cfg.validate()?;
    if cfg.k_max != 1 {
        return Err(Error::domain(format!(
            "closed form holds for a single round, got K = {}",
            cfg.k_max
        )));
    }
    let constraints = OutageConstraints::uniform(eps)?;
    let g1 = cfg.path_loss(cfg.d1);
    let g2 = cfg.path_loss(cfg.d2);
    let z1_max = max_efficiency(cfg, g1, constraints.eps1)?;
    let z2_max = max_efficiency(cfg, g2, constraints.eps2)?;
    let (z1, phi1) = max_single_user(cfg, g1, z1_max)?;
    let (z2, phi2) = max_single_user(cfg, g2, z2_max)?;
    let (beta2, r1, r2, objective) = if phi1 >= phi2 {
        (1.0, z1, 0.0, phi1)
    } else {
        (0.0, 0.0, z2, phi2)
    };
    let outage1 = if r1 > 0.0 {
        1.0 - single_round_success(cfg, r1, g1)?
    } else {
        0.0
    };
    let outage2 = if r2 > 0.0 {
        1.0 - single_round_success(cfg, r2, g2)?
    } else {
        0.0
    };
    Ok(OptResult {
        objective,
        argmax: OptPoint {
            r1,
            r2,
            beta2,
            lambda: cfg.lambda,
        },
        feasible: constraints.satisfied(outage1, outage2),
        evaluations: 0,
        outage1,
        outage2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_points_and_refinement() {
        let a = Axis { lo: 0.0, hi: 8.0 };
        assert_eq!(a.points(5), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let r = a.around(7.5, &a, 4.0);
        assert_eq!((r.lo, r.hi), (6.5, 8.0));
    }

    #[test]
    fn ties_prefer_smaller_rates() {
        let mk = |objective, r1, r2, beta2| Candidate {
            objective,
            point: OptPoint {
                r1,
                r2,
                beta2,
                lambda: 1.0,
            },
        };
        assert!(mk(1.0, 1.0, 1.0, 0.5).beats(&mk(1.0, 2.0, 1.0, 0.1)));
        assert!(mk(1.0, 1.0, 1.0, 0.1).beats(&mk(1.0, 1.0, 1.0, 0.5)));
        assert!(mk(1.1, 5.0, 1.0, 0.5).beats(&mk(1.0, 1.0, 1.0, 0.1)));
    }

    #[test]
    fn constraints_reject_out_of_range() {
        assert!(OutageConstraints::uniform(0.0).is_err());
        assert!(OutageConstraints::uniform(1.5).is_err());
        assert!(OutageConstraints::uniform(1.0).is_ok());
    }
}
