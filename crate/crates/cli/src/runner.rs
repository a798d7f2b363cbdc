//! Evaluates every sweep point of an experiment and collects records in sweep order.

use std::time::Instant;

use anyhow::Context;
use noma_harq::optimize::{
    maximize_ase, maximize_ltat_joint, maximize_ltat_rates, remark1_closed_form, OptResult, Scheme,
};
use noma_harq::sim::{McEstimate, Protocol, Simulator};
use noma_harq::{Analyzer64, OmaAnalyzer, Outages, PhiMode};
use rayon::prelude::*;
use toml::Value;

use crate::output::Record;
use crate::spec::{render_value, Engine, ExperimentSpec, Point, Task};

#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub points: usize,
    pub records: usize,
    pub seconds: f64,
    /// Largest analytic-vs-simulation z-score and the point/metric where it occurred.
    pub max_z: Option<(f64, String)>,
}

pub struct RunOutput {
    pub records: Vec<Record>,
    pub summary: Summary,
}

struct PointResult {
    records: Vec<Record>,
    max_z: Option<(f64, String)>,
}

/// Metric values on one analytic engine.
fn analytic_metrics(p: &Point, mode: PhiMode) -> anyhow::Result<Outages> {
    let outages = match p.scheme {
        Scheme::Noma => Analyzer64::new(p.cfg)?.with_phi_mode(mode).outages()?,
        Scheme::Oma => OmaAnalyzer::new(p.cfg)?.with_phi_mode(mode).oma_outages()?,
    };
    Ok(outages)
}

fn analytic_value(o: &Outages, p: &Point, metric: &str) -> f64 {
    let last = o.last();
    match metric {
        "ltat" => o.throughput(p.cfg.r1, p.cfg.r2).ltat,
        "outage_o1" => last.o1,
        "outage_o2" => last.o2,
        "outage_joint" => last.joint,
        "expected_rounds" => o.expected_rounds(),
        _ => unreachable!("metrics are checked when the spec is parsed"),
    }
}

struct McMetrics {
    outages: noma_harq::sim::McOutageSet,
    ltat: McEstimate,
}

impl McMetrics {
    fn get(&self, metric: &str) -> McEstimate {
        let last = self.outages.last();
        match metric {
            "ltat" => self.ltat,
            "outage_o1" => last.o1,
            "outage_o2" => last.o2,
            "outage_joint" => last.joint,
            "expected_rounds" => self.outages.expected_rounds,
            _ => unreachable!("metrics are checked when the spec is parsed"),
        }
    }
}

fn optimize(task: Task, p: &Point, spec: &ExperimentSpec) -> anyhow::Result<OptResult> {
    let constraints = p.constraints()?;
    let settings = spec.optimize.settings(p.phi_mode);
    let r = match task {
        Task::OptimizeRates => maximize_ltat_rates(&p.cfg, p.scheme, &constraints, &settings)?,
        Task::OptimizeJoint => maximize_ltat_joint(&p.cfg, p.scheme, &constraints, &settings)?,
        Task::OptimizeAse => maximize_ase(&p.cfg, p.scheme, &constraints, &settings)?,
        Task::Remark1 => remark1_closed_form(&p.cfg, p.eps1)?,
        Task::Evaluate => unreachable!(),
    };
    Ok(r)
}

fn optimum_value(r: &OptResult, metric: &str) -> f64 {
    match metric {
        "objective" => r.objective,
        "feasible" => f64::from(u8::from(r.feasible)),
        "r1" => r.argmax.r1,
        "r2" => r.argmax.r2,
        "beta2" => r.argmax.beta2,
        "lambda" => r.argmax.lambda,
        "outage_o1" => r.outage1,
        "outage_o2" => r.outage2,
        _ => unreachable!("metrics are checked when the spec is parsed"),
    }
}

fn run_point(spec: &ExperimentSpec, metrics: &[String], labels: &[Value], p: &Point) -> anyhow::Result<PointResult> {
    let param_names = spec.param_names();
    let param_values = labels.iter().map(render_value).collect::<Vec<_>>().join(";");
    let record = |engine: &str, metric: &str, value: f64, mc: Option<&McEstimate>| Record {
        experiment: spec.name.clone(),
        engine: engine.to_string(),
        metric: metric.to_string(),
        param_names: param_names.clone(),
        param_values: param_values.clone(),
        value,
        std_error: mc.map(|e| e.std_error),
        trials: mc.map(|e| e.trials),
        seed: mc.map(|_| spec.seed),
    };

    let mut records = Vec::new();
    let mut max_z: Option<(f64, String)> = None;

    if spec.task != Task::Evaluate {
        let mode = match spec.engine {
            Engine::AnalyticExact => PhiMode::Exact,
            _ => p.phi_mode,
        };
        let point = Point { phi_mode: mode, ..*p };
        let label = match mode {
            PhiMode::Exact => Engine::AnalyticExact.label(),
            PhiMode::Approx => Engine::AnalyticApprox.label(),
        };
        let r = optimize(spec.task, &point, spec)?;
        for m in metrics {
            records.push(record(label, m, optimum_value(&r, m), None));
        }
        return Ok(PointResult { records, max_z });
    }

    let analytic_mode = match spec.engine {
        Engine::AnalyticExact => Some(PhiMode::Exact),
        Engine::AnalyticApprox => Some(PhiMode::Approx),
        Engine::Both => Some(p.phi_mode),
        Engine::MonteCarlo => None,
    };
    let analytic = analytic_mode
        .map(|mode| analytic_metrics(p, mode).map(|o| (mode, o)))
        .transpose()?;
    if let Some((mode, o)) = &analytic {
        let label = match mode {
            PhiMode::Exact => Engine::AnalyticExact.label(),
            PhiMode::Approx => Engine::AnalyticApprox.label(),
        };
        for m in metrics {
            records.push(record(label, m, analytic_value(o, p, m), None));
        }
    }

    if spec.engine.uses_monte_carlo() {
        let protocol = match p.scheme {
            Scheme::Noma => Protocol::Noma,
            Scheme::Oma => Protocol::Oma,
        };
        let sim = Simulator::new(p.cfg)?.with_protocol(protocol);
        let (outages, ltat) = sim.estimate(spec.trials, spec.seed);
        let mc = McMetrics { outages, ltat };
        for m in metrics {
            let e = mc.get(m);
            records.push(record(Engine::MonteCarlo.label(), m, e.mean, Some(&e)));
            if let Some((_, o)) = &analytic {
                let reference = analytic_value(o, p, m);
                let z = if m.starts_with("outage") {
                    e.z_score_bernoulli(reference)
                } else {
                    e.z_score(reference)
                };
                if max_z.as_ref().map_or(true, |(best, _)| z > *best) {
                    let at = spec.describe(labels);
                    max_z = Some((z, if at.is_empty() { m.clone() } else { format!("{m} at {at}") }));
                }
            }
        }
    }
    Ok(PointResult { records, max_z })
}

pub fn run(spec: &ExperimentSpec) -> anyhow::Result<RunOutput> {
    let start = Instant::now();
    let points = spec.points()?;
    let metrics = spec.metrics();
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|(labels, p)| {
            run_point(spec, &metrics, labels, p)
                .with_context(|| format!("evaluating {}", describe_point(spec, labels)))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut records = Vec::new();
    let mut max_z: Option<(f64, String)> = None;
    for r in results {
        records.extend(r.records);
        if let Some((z, at)) = r.max_z {
            if max_z.as_ref().map_or(true, |(best, _)| z > *best) {
                max_z = Some((z, at));
            }
        }
    }
    let summary = Summary {
        points: points.len(),
        records: records.len(),
        seconds: start.elapsed().as_secs_f64(),
        max_z,
    };
    Ok(RunOutput { records, summary })
}

fn describe_point(spec: &ExperimentSpec, labels: &[Value]) -> String {
    let d = spec.describe(labels);
    if d.is_empty() {
        "the base configuration".into()
    } else {
        d
    }
}
