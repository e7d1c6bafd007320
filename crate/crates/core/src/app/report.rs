//! Rendering of experiment reports.

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Human,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "human" => Ok(Format::Human),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Parse {
                location: "format".into(),
                message: format!("unknown format {other:?}"),
            }),
        }
    }
}

/// Human text, versioned JSON, or CSV with one row per trial.
pub fn emit_report(report: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports always serialize") + "\n",
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for outcome in &report.outcomes {
                writer.serialize(outcome).expect("writing to memory");
            }
            String::from_utf8(writer.into_inner().expect("writing to memory")).expect("csv output is UTF-8")
        }
        Format::Human => {
            let c = &report.config;
            let mut out = format!(
                "experiment {:?} ({}), n = {}, m = {}, seed = {}\n",
                c.target, c.kind, c.n, c.m, c.seed
            );
            if let Some(bound) = c.bound() {
                out.push_str(&format!("bound: {bound}\n"));
            }
            out.push_str(&format!(
                "successes: {} of {} ({})\nquantity: min {}, median {}\n",
                report.successes, report.trials, report.success_fraction, report.min_quantity, report.median_quantity
            ));
            for o in report.outcomes.iter().filter(|o| !o.success) {
                out.push_str(&format!("  trial {} failed, quantity {}\n", o.trial, o.quantity));
            }
            out
        }
    }
}

/// Inverse of the JSON format.
pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::experiment::{run_experiment, ExperimentConfig, Target};
    use crate::model::Kind;

    fn report() -> ExperimentReport {
        run_experiment(&ExperimentConfig {
            n: 3,
            m: 10,
            trials: 3,
            seed: 5,
            kind: Kind::Goods,
            target: Target::PropAllocation,
        })
        .unwrap()
    }

    #[test]
    fn csv_has_header_and_rows() {
        let text = emit_report(&report(), Format::Csv);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "trial,success,quantity,note");
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let text = emit_report(&r, Format::Json);
        assert!(text.contains("\"schema_version\": 1"));
        assert_eq!(parse_report(&text).unwrap(), r);
    }

    #[test]
    fn human_mentions_counts() {
        let r = report();
        assert!(emit_report(&r, Format::Human).contains(&format!("successes: {} of 3", r.successes)));
    }
}
