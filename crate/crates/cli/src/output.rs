//! Result records and their CSV / JSON serialization.

use std::io::Write;

use serde::Serialize;

use crate::spec::format_number;

pub const HEADER: [&str; 9] = [
    "experiment",
    "engine",
    "metric",
    "param_names",
    "param_values",
    "value",
    "std_error",
    "trials",
    "seed",
];

/// One `(sweep point, engine, metric)` result. Statistical fields are `None` for
/// analytic engines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: String,
    pub engine: String,
    pub metric: String,
    pub param_names: String,
    pub param_values: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

impl Record {
    fn fields(&self) -> [String; 9] {
        [
            self.experiment.clone(),
            self.engine.clone(),
            self.metric.clone(),
            self.param_names.clone(),
            self.param_values.clone(),
            format_number(self.value),
            self.std_error.map(format_number).unwrap_or_default(),
            self.trials.map(|t| t.to_string()).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, records: &[Record]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, records: &[Record]) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out)?;
    Ok(())
}
