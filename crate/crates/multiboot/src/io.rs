//! File formats: long-format prediction/label tables (CSV or JSONL),
//! flat key-value scenario files, and JSON/CSV report emission.
//!
//! Canonical CSV headers are `example_id,pretrain_seed,finetune_run,value`
//! for predictions and `example_id,label[,group_id]` for labels. Identifiers
//! containing commas are rejected rather than quoted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::inference::{ComparisonReport, Histogram};
use crate::model::{LabelRow, PredictionRow, PredictionSet};
use crate::simulate::SyntheticScenario;

/// Malformed-input error with a file/line diagnostic. Distinct from
/// [`crate::Error`] so callers can map data bugs and statistical errors to
/// different exit codes.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> InputError {
    InputError::Malformed {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    )
}

fn check_id(path: &Path, line: usize, field: &str, value: &str) -> Result<(), InputError> {
    if value.contains(',') {
        return Err(malformed(
            path,
            line,
            format!("{field} `{value}` contains a comma; commas in identifiers are not supported"),
        ));
    }
    if value.is_empty() {
        return Err(malformed(path, line, format!("empty {field}")));
    }
    Ok(())
}

fn parse_value(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64, InputError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| malformed(path, line, format!("{field} `{raw}` is not a number")))
}

#[derive(Deserialize)]
struct PredictionRecord {
    example_id: String,
    pretrain_seed: String,
    finetune_run: String,
    value: f64,
}

#[derive(Deserialize)]
struct LabelRecord {
    example_id: String,
    label: f64,
    #[serde(default)]
    group_id: Option<String>,
}

/// Reads long-format prediction rows from CSV (or JSONL, by extension).
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, InputError> {
    let text = read_to_string(path)?;
    if is_jsonl(path) {
        return read_predictions_jsonl(path, &text);
    }
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "example_id,pretrain_seed,finetune_run,value" => {}
        Some((_, header)) => {
            return Err(malformed(
                path,
                1,
                format!("expected header `example_id,pretrain_seed,finetune_run,value`, got `{header}`"),
            ))
        }
        None => return Err(malformed(path, 1, "empty file")),
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 4 {
            return Err(malformed(
                path,
                line,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        check_id(path, line, "example_id", fields[0])?;
        check_id(path, line, "pretrain_seed", fields[1])?;
        check_id(path, line, "finetune_run", fields[2])?;
        rows.push(PredictionRow {
            example_id: fields[0].to_string(),
            pretrain_seed: fields[1].to_string(),
            finetune_run: fields[2].to_string(),
            value: parse_value(path, line, "value", fields[3])?,
        });
    }
    Ok(rows)
}

fn read_predictions_jsonl(path: &Path, text: &str) -> Result<Vec<PredictionRow>, InputError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(raw)
            .map_err(|e| malformed(path, idx + 1, e.to_string()))?;
        rows.push(PredictionRow {
            example_id: rec.example_id,
            pretrain_seed: rec.pretrain_seed,
            finetune_run: rec.finetune_run,
            value: rec.value,
        });
    }
    Ok(rows)
}

/// Reads label rows from CSV (or JSONL, by extension).
pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>, InputError> {
    let text = read_to_string(path)?;
    if is_jsonl(path) {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let rec: LabelRecord = serde_json::from_str(raw)
                .map_err(|e| malformed(path, idx + 1, e.to_string()))?;
            rows.push(LabelRow {
                example_id: rec.example_id,
                label: rec.label,
                group_id: rec.group_id,
            });
        }
        return Ok(rows);
    }
    let mut lines = text.lines().enumerate();
    let with_groups = match lines.next() {
        Some((_, h)) if h.trim() == "example_id,label" => false,
        Some((_, h)) if h.trim() == "example_id,label,group_id" => true,
        Some((_, h)) => {
            return Err(malformed(
                path,
                1,
                format!("expected header `example_id,label[,group_id]`, got `{h}`"),
            ))
        }
        None => return Err(malformed(path, 1, "empty file")),
    };
    let want = if with_groups { 3 } else { 2 };
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != want {
            return Err(malformed(
                path,
                line,
                format!("expected {want} fields, got {}", fields.len()),
            ));
        }
        check_id(path, line, "example_id", fields[0])?;
        let group_id = if with_groups {
            check_id(path, line, "group_id", fields[2])?;
            Some(fields[2].to_string())
        } else {
            None
        };
        rows.push(LabelRow {
            example_id: fields[0].to_string(),
            label: parse_value(path, line, "label", fields[1])?,
            group_id,
        });
    }
    Ok(rows)
}

/// Writes a prediction set back to the canonical pair of CSV files.
pub fn write_canonical_csv(
    preds: &PredictionSet,
    predictions_path: &Path,
    labels_path: &Path,
) -> std::io::Result<()> {
    let mut p = String::from("example_id,pretrain_seed,finetune_run,value\n");
    for (i, e) in preds.example_ids().iter().enumerate() {
        for (j, run) in preds.runs().iter().enumerate() {
            writeln!(
                p,
                "{e},{},{},{}",
                run.pretrain_seed,
                run.finetune_run,
                preds.value(i, j)
            )
            .unwrap();
        }
    }
    fs::write(predictions_path, p)?;

    let mut l = String::new();
    match preds.group_ids() {
        Some(groups) => {
            l.push_str("example_id,label,group_id\n");
            for ((e, lab), g) in preds
                .example_ids()
                .iter()
                .zip(preds.labels())
                .zip(groups)
            {
                writeln!(l, "{e},{lab},{g}").unwrap();
            }
        }
        None => {
            l.push_str("example_id,label\n");
            for (e, lab) in preds.example_ids().iter().zip(preds.labels()) {
                writeln!(l, "{e},{lab}").unwrap();
            }
        }
    }
    fs::write(labels_path, l)
}

/// Parses a flat `key = value` scenario file. `#` starts a comment.
/// Unknown keys are rejected with their line number.
pub fn read_scenario(path: &Path) -> Result<ScenarioFile, InputError> {
    let text = read_to_string(path)?;
    let mut sc = SyntheticScenario::default();
    let mut file = ScenarioFile {
        scenario: sc.clone(),
        n_replications: 300,
        mode: ScenarioMode::Coverage,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.split('#').next().unwrap().trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| malformed(path, line, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f = || parse_value(path, line, key, value);
        let parse_u = || -> Result<usize, InputError> {
            value
                .parse::<usize>()
                .map_err(|_| malformed(path, line, format!("{key} `{value}` is not an integer")))
        };
        match key {
            "true_theta" => sc.true_theta = parse_f()?,
            "true_delta" => sc.true_delta = parse_f()?,
            "seed_effect_sd" => sc.seed_effect_sd = parse_f()?,
            "example_effect_sd" => sc.example_effect_sd = parse_f()?,
            "noise_sd" => sc.noise_sd = parse_f()?,
            "arm_correlation" => sc.arm_correlation = parse_f()?,
            "n_x" => sc.n_x = parse_u()?,
            "n_s" => sc.n_s = parse_u()?,
            "n_finetune" => sc.n_finetune = parse_u()?,
            "n_replications" => file.n_replications = parse_u()?,
            "mode" => {
                file.mode = match value {
                    "coverage" => ScenarioMode::Coverage,
                    "oracle" => ScenarioMode::Oracle,
                    other => {
                        return Err(malformed(
                            path,
                            line,
                            format!("mode `{other}` is not one of coverage, oracle"),
                        ))
                    }
                }
            }
            other => return Err(malformed(path, line, format!("unknown key `{other}`"))),
        }
    }
    file.scenario = sc;
    Ok(file)
}

/// Scenario file contents: the generative parameters plus harness settings.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub scenario: SyntheticScenario,
    pub n_replications: usize,
    pub mode: ScenarioMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    /// Coverage/variance-ratio study against the scenario's ground truth.
    Coverage,
    /// Exhaustive-enumeration check of the engine's bootstrap moments.
    Oracle,
}

/// Serializes a report as deterministic, pretty-printed JSON.
pub fn report_json(report: &ComparisonReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One-row CSV summary of a report.
pub fn report_csv_summary(report: &ComparisonReport) -> String {
    fn opt(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut s = String::from(
        "design,axis,nboot,point_estimate,ci_lower,ci_upper,p_value,theta_base,theta_intervention,delta\n",
    );
    let design = serde_json::to_value(report.design.design)
        .unwrap()
        .as_str()
        .unwrap()
        .to_string();
    let axis = serde_json::to_value(report.design.axis)
        .unwrap()
        .as_str()
        .unwrap()
        .to_string();
    writeln!(
        s,
        "{design},{axis},{},{},{},{},{},{},{},{}",
        report.nboot,
        report.point_estimate,
        report.ci_lower,
        report.ci_upper,
        opt(report.p_value),
        opt(report.theta_base),
        opt(report.theta_intervention),
        opt(report.delta),
    )
    .unwrap();
    s
}

/// Histogram as `bin_left,bin_right,count` CSV for external plotting.
pub fn histogram_csv(hist: &Histogram) -> String {
    let mut s = String::from("bin_left,bin_right,count\n");
    for (i, count) in hist.counts.iter().enumerate() {
        writeln!(s, "{},{},{count}", hist.bin_edges[i], hist.bin_edges[i + 1]).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_prediction_set;
    use tempfile::tempdir;

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("preds.csv");
        let l = dir.path().join("labels.csv");
        let rows = vec![
            PredictionRow {
                example_id: "e1".into(),
                pretrain_seed: "s0".into(),
                finetune_run: "r0".into(),
                value: 0.125,
            },
            PredictionRow {
                example_id: "e0".into(),
                pretrain_seed: "s0".into(),
                finetune_run: "r0".into(),
                value: -3.5,
            },
        ];
        let labels = vec![
            LabelRow {
                example_id: "e0".into(),
                label: 1.0,
                group_id: Some("g".into()),
            },
            LabelRow {
                example_id: "e1".into(),
                label: 0.0,
                group_id: Some("g".into()),
            },
        ];
        let original = build_prediction_set(&rows, &labels).unwrap();
        write_canonical_csv(&original, &p, &l).unwrap();
        let reread = build_prediction_set(
            &read_predictions(&p).unwrap(),
            &read_labels(&l).unwrap(),
        )
        .unwrap();
        assert_eq!(original.example_ids(), reread.example_ids());
        assert_eq!(original.labels(), reread.labels());
        assert_eq!(original.runs(), reread.runs());
        for i in 0..original.n_x() {
            for j in 0..original.n_runs() {
                assert_eq!(original.value(i, j), reread.value(i, j));
            }
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("preds.csv");
        std::fs::write(
            &p,
            "example_id,pretrain_seed,finetune_run,value\ne0,s0,r0,1.0\ne1,s0,0.5\n",
        )
        .unwrap();
        let err = read_predictions(&p).unwrap_err();
        match err {
            InputError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_predictions_accepted() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("preds.jsonl");
        std::fs::write(
            &p,
            "{\"example_id\":\"e0\",\"pretrain_seed\":\"s0\",\"finetune_run\":\"r0\",\"value\":0.5}\n",
        )
        .unwrap();
        let rows = read_predictions(&p).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value, 0.5);
    }

    #[test]
    fn scenario_parsing() {
        let dir = tempdir().unwrap();
        let s = dir.path().join("scenario.txt");
        std::fs::write(
            &s,
            "# coverage scenario\ntrue_theta = 0.7\nseed_effect_sd = 0.05\nn_x = 500\nn_s = 10\nn_replications = 300\nmode = coverage\n",
        )
        .unwrap();
        let file = read_scenario(&s).unwrap();
        assert_eq!(file.scenario.true_theta, 0.7);
        assert_eq!(file.scenario.n_x, 500);
        assert_eq!(file.n_replications, 300);
        assert_eq!(file.mode, ScenarioMode::Coverage);
    }

    #[test]
    fn scenario_unknown_key_rejected() {
        let dir = tempdir().unwrap();
        let s = dir.path().join("scenario.txt");
        std::fs::write(&s, "frobnication = 3\n").unwrap();
        assert!(matches!(
            read_scenario(&s),
            Err(InputError::Malformed { line: 1, .. })
        ));
    }
}
