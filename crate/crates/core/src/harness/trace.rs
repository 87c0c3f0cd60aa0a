use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub regret: f64,
    pub cum_regret: f64,
    pub cum_comm_scalars: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncRecord {
    pub t: usize,
    pub scalars: u64,
    pub dictionary_size: Option<usize>,
}

/// Per-step regret and communication plus the synchronization events of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTrace {
    pub algorithm: String,
    pub steps: Vec<StepRecord>,
    pub syncs: Vec<SyncRecord>,
    /// Information gain `1/2 log det(I + K/lambda)` of the chosen arms.
    pub gamma_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "t,regret,cum_regret,cum_comm_scalars";

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl MetricsTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_regret)
    }

    pub fn cumulative_scalars(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.cum_comm_scalars)
    }

    pub fn sync_count(&self) -> usize {
        self.syncs.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.steps.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                s.t,
                fmt_f64(s.regret),
                fmt_f64(s.cum_regret),
                s.cum_comm_scalars
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"algorithm\": \"{}\",", self.algorithm);
        let _ = writeln!(out, "  \"gamma_hat\": {},", fmt_f64(self.gamma_hat));
        let _ = writeln!(out, "  \"sync_count\": {},", self.syncs.len());
        out.push_str("  \"steps\": [");
        for (i, s) in self.steps.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                out,
                "    {{\"t\": {}, \"regret\": {}, \"cum_regret\": {}, \"cum_comm_scalars\": {}}}",
                s.t,
                fmt_f64(s.regret),
                fmt_f64(s.cum_regret),
                s.cum_comm_scalars
            );
        }
        out.push_str(if self.steps.is_empty() { "],\n" } else { "\n  ],\n" });
        out.push_str("  \"syncs\": [");
        for (i, s) in self.syncs.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let dict = s.dictionary_size.map_or("null".to_string(), |v| v.to_string());
            let _ = write!(
                out,
                "    {{\"t\": {}, \"scalars\": {}, \"dictionary_size\": {}}}",
                s.t, s.scalars, dict
            );
        }
        out.push_str(if self.syncs.is_empty() { "]\n" } else { "\n  ]\n" });
        out.push_str("}\n");
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Parses the step columns back from [`Self::to_csv`] output.
    pub fn steps_from_csv(text: &str) -> Result<Vec<StepRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Schema(format!("trace header must be `{CSV_HEADER}`")));
        }
        let mut steps = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i as u64 + 2;
            let parse_err = |m: &str| Error::Parse {
                line: lineno,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(parse_err("expected 4 fields"));
            }
            steps.push(StepRecord {
                t: f[0].parse().map_err(|_| parse_err("bad t"))?,
                regret: f[1].parse().map_err(|_| parse_err("bad regret"))?,
                cum_regret: f[2].parse().map_err(|_| parse_err("bad cum_regret"))?,
                cum_comm_scalars: f[3].parse().map_err(|_| parse_err("bad cum_comm_scalars"))?,
            });
        }
        Ok(steps)
    }
}

pub fn emit(trace: &MetricsTrace, format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(trace.render(format).as_bytes())?;
    Ok(())
}
