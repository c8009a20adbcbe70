//! Collects JSONL records into per-configuration CSV tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Result, RfimError};

/// A line that could not be parsed as a record.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptLine {
    pub file: PathBuf,
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    /// Output directory for each config hash found.
    pub groups: BTreeMap<String, PathBuf>,
    pub records: usize,
    pub corrupt: Vec<CorruptLine>,
}

const TABLES: [(&str, &str, &[&str]); 5] = [
    (
        "check",
        "checks.csv",
        &[
            "check", "status", "d", "n", "beta", "h", "ensemble", "mode", "kind", "lhs", "rhs",
            "slack", "se", "pass", "seed", "n_list", "note",
        ],
    ),
    (
        "concentration_row",
        "concentration.csv",
        &[
            "n", "mean_r12", "var_r12", "var_se", "beta", "h", "d", "se_r12", "dev_q", "dev_se",
            "q_hat", "gibbs_var",
        ],
    ),
    (
        "gg_row",
        "gg_residuals.csv",
        &["n", "beta", "h", "d", "gg1", "gg1_se", "gg2", "gg2_se"],
    ),
    (
        "observable",
        "observables.csv",
        &[
            "d", "n", "beta", "h", "seed", "realization_id", "engine", "F", "psi", "r12",
            "r12_sq", "r12_r13", "r23_r14", "gibbs_var", "hn", "hn_var", "hn_r12", "sum_r_sq",
            "min_r",
        ],
    ),
    (
        "aggregate",
        "aggregates.csv",
        &[
            "d", "n", "beta", "h", "seed", "ensemble", "engine", "mean_r12", "se_r12", "var_r12",
            "var_se", "mean_gibbs_var", "se_gibbs_var", "mean_hn", "se_hn", "mean_psi", "se_psi",
        ],
    ),
];

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell_text).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

fn jsonl_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every `*.jsonl` file in `dir` and writes one CSV per record type to
/// `dir/report/<config_hash>/`.
pub fn report(dir: &Path) -> Result<ReportOutcome> {
    let mut by_hash: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut corrupt = Vec::new();
    let mut records = 0;
    for file in jsonl_files(dir)? {
        for (i, line) in BufReader::new(File::open(&file)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Value>(&line)
                .map_err(|e| e.to_string())
                .and_then(|v| match (v["type"].as_str(), v["config_hash"].as_str()) {
                    (Some(_), Some(hash)) => Ok((hash.to_string(), v)),
                    _ => Err("missing type or config_hash".to_string()),
                });
            match parsed {
                Ok((hash, v)) => {
                    records += 1;
                    by_hash.entry(hash).or_default().push(v);
                }
                Err(error) => corrupt.push(CorruptLine {
                    file: file.clone(),
                    line: i + 1,
                    error,
                }),
            }
        }
    }
    if records == 0 {
        return Err(RfimError::NoRecords(dir.display().to_string()));
    }
    let mut groups = BTreeMap::new();
    for (hash, values) in &by_hash {
        let out = dir.join("report").join(hash);
        std::fs::create_dir_all(&out)?;
        for (kind, name, columns) in TABLES {
            let mut w = csv::Writer::from_path(out.join(name)).map_err(csv_error)?;
            w.write_record(columns).map_err(csv_error)?;
            for v in values.iter().filter(|v| v["type"] == kind) {
                w.write_record(columns.iter().map(|c| cell_text(&v[*c])))
                    .map_err(csv_error)?;
            }
            w.flush()?;
        }
        groups.insert(hash.clone(), out);
    }
    Ok(ReportOutcome {
        groups,
        records,
        corrupt,
    })
}

fn csv_error(e: csv::Error) -> RfimError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => RfimError::Io(io),
        other => RfimError::invalid(format!("csv: {other:?}")),
    }
}
