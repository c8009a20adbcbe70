//! Experiment orchestration: parameter sweeps, check scheduling, JSONL
//! persistence with resume, and report generation.
//!
//! A run is a fixed, ordered list of cells. Each cell is one check or one
//! observable sweep at one parameter point; its realizations are computed in
//! parallel and its records are appended in realization order, followed by a
//! `cell_done` marker. Output therefore does not depend on the worker count,
//! and resuming after an interruption keeps every completed cell and redoes
//! only the first incomplete one.

mod config;
mod report;

pub use config::{CheckName, ExperimentConfig};
pub use report::{report, CorruptLine, ReportOutcome};

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Result, RfimError};
use crate::gibbs::ModelParams;
use crate::mcmc::McmcSettings;
use crate::observables::{OverlapFn, RealizationObservables};
use crate::verify::{
    self, jackknife, observe, Accumulator, CheckConfig, LemmaReport, Mode, Status,
};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Which cells a run includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// Observable sweeps and checks.
    Run,
    /// Checks only.
    Verify,
    /// Observable sweeps only.
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub config_hash: String,
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: String,
    pub passed: usize,
    pub failed: usize,
    pub warned: usize,
    pub errors: usize,
    pub cells_total: usize,
    pub cells_skipped: usize,
}

impl RunOutcome {
    /// 0 iff every check that is not a warning passed and no cell errored.
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 && self.errors == 0 {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Task {
    Config,
    Sweep,
    Check(CheckName),
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    key: String,
    task: Task,
    n: usize,
    beta: f64,
    h: f64,
}

fn plan(cfg: &ExperimentConfig, kind: RunKind) -> Vec<Cell> {
    let mut cells = vec![Cell {
        key: "config".into(),
        task: Task::Config,
        n: 0,
        beta: 0.0,
        h: 0.0,
    }];
    let cell = |task: Task, n: usize, beta: f64, h: f64| {
        let name = match task {
            Task::Config => "config",
            Task::Sweep => "sweep",
            Task::Check(c) => c.as_str(),
        };
        Cell {
            key: format!("{name};d={};n={n};beta={beta};h={h}", cfg.d),
            task,
            n,
            beta,
            h,
        }
    };
    if kind != RunKind::Verify {
        for &n in &cfg.n_list {
            for &beta in &cfg.beta_list {
                for &h in &cfg.h_list {
                    cells.push(cell(Task::Sweep, n, beta, h));
                }
            }
        }
    }
    if kind != RunKind::Sweep {
        let last_n = *cfg.n_list.last().expect("validated");
        for &check in &cfg.checks {
            let task = Task::Check(check);
            match check {
                CheckName::Hermite => cells.push(cell(task, 2, cfg.beta_list[0], cfg.h_list[0])),
                CheckName::ConvexityP => {
                    for &n in &cfg.n_list {
                        for &beta in &cfg.beta_list {
                            cells.push(cell(task, n, beta, cfg.h_list[0]));
                        }
                    }
                }
                c if c.spans_sizes() => {
                    for &beta in &cfg.beta_list {
                        for &h in &cfg.h_list {
                            cells.push(cell(task, last_n, beta, h));
                        }
                    }
                }
                _ => {
                    for &n in &cfg.n_list {
                        for &beta in &cfg.beta_list {
                            for &h in &cfg.h_list {
                                cells.push(cell(task, n, beta, h));
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

fn check_config(cfg: &ExperimentConfig, cell: &Cell, check: Option<CheckName>) -> Result<CheckConfig> {
    let params = ModelParams::new(cell.beta, cell.h)?;
    let mut cc = CheckConfig::ensemble(cfg.d, cell.n, params, cfg.ensemble_size, cfg.seed);
    cc.engine = cfg.engine;
    cc.mcmc = McmcSettings {
        ladder: cfg.mcmc_ladder.clone(),
        ..McmcSettings::new(cfg.mcmc_sweeps, cfg.mcmc_burn_in, cfg.seed)
    };
    if cfg.quadrature && check.is_some_and(CheckName::supports_quadrature) {
        cc.mode = Mode::Quadrature;
        cc.ensemble = 0;
    }
    Ok(cc)
}

fn tagged(kind: &str, hash: &str, cell: &str, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("type".into(), kind.into());
    map.insert("config_hash".into(), hash.into());
    map.insert("cell".into(), cell.into());
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

fn observable_fields(o: &RealizationObservables) -> Value {
    let m = &o.overlap;
    json!({
        "F": o.log_partition,
        "psi": o.psi,
        "r12": m.r12,
        "r12_sq": m.r12_sq,
        "r12_r13": m.r12_r13,
        "r23_r14": m.r23_r14,
        "gibbs_var": m.gibbs_var,
        "hn": o.hn,
        "hn_var": o.hn_var,
        "hn_r12": o.hn_r12,
        "sum_r_sq": o.sum_r_sq,
        "min_r": o.min_r,
    })
}

fn sweep_records(cfg: &ExperimentConfig, cell: &Cell, hash: &str) -> Result<Vec<Value>> {
    let cc = check_config(cfg, cell, None)?;
    let l = cc.lattice()?;
    let engine = cc.engine.resolve(&l)?;
    let obs = verify::over_realizations(&cc, &l, |g| observe(&cc, &l, g))?;
    let mut out = Vec::with_capacity(obs.len() + 1);
    for (rid, o) in obs.iter().enumerate() {
        let mut body = json!({
            "d": cfg.d, "n": cell.n, "beta": cell.beta, "h": cell.h,
            "seed": cfg.seed, "realization_id": rid, "engine": engine,
        });
        if let (Value::Object(b), Value::Object(f)) = (&mut body, observable_fields(o)) {
            b.extend(f);
        }
        out.push(tagged("observable", hash, &cell.key, body));
    }
    let acc = |f: fn(&RealizationObservables) -> f64| -> Accumulator { obs.iter().map(f).collect() };
    let rows: Vec<Vec<f64>> = obs.iter().map(|o| vec![o.overlap.r12, o.overlap.r12_sq]).collect();
    let (var_r12, var_se) = jackknife(&rows, |m| m[1] - m[0] * m[0]);
    let r12 = acc(|o| o.overlap.r12);
    let gv = acc(|o| o.overlap.gibbs_var);
    let hn = acc(|o| o.hn);
    let psi = acc(|o| o.psi);
    out.push(tagged(
        "aggregate",
        hash,
        &cell.key,
        json!({
            "d": cfg.d, "n": cell.n, "beta": cell.beta, "h": cell.h,
            "seed": cfg.seed, "ensemble": obs.len(), "engine": engine,
            "mean_r12": r12.mean(), "se_r12": r12.std_error(),
            "var_r12": var_r12, "var_se": var_se,
            "mean_gibbs_var": gv.mean(), "se_gibbs_var": gv.std_error(),
            "mean_hn": hn.mean(), "se_hn": hn.std_error(),
            "mean_psi": psi.mean(), "se_psi": psi.std_error(),
        }),
    ));
    Ok(out)
}

fn report_record(hash: &str, cell: &str, r: &LemmaReport) -> Value {
    tagged("check", hash, cell, serde_json::to_value(r).expect("report serializes"))
}

fn check_records(cfg: &ExperimentConfig, cell: &Cell, check: CheckName, hash: &str) -> Result<Vec<Value>> {
    let cc = check_config(cfg, cell, Some(check))?;
    let wrap = |reports: Vec<LemmaReport>| reports.iter().map(|r| report_record(hash, &cell.key, r)).collect();
    Ok(match check {
        CheckName::Fkg => wrap(vec![verify::check_fkg(&cc)?]),
        CheckName::VarBound => wrap(vec![verify::check_var_bound(&cc)?]),
        CheckName::OverlapVarBound => wrap(vec![verify::check_overlap_var_bound(&cc)?]),
        CheckName::RxySum => wrap(vec![verify::check_rxy_sum(&cc)?]),
        CheckName::HnIdentity => wrap(vec![verify::check_hn_identity(&cc)?]),
        CheckName::GgIbp => wrap(vec![
            verify::check_gg_exact_ibp(&cc, OverlapFn::R12)?,
            verify::check_gg_exact_ibp(&cc, OverlapFn::R23)?,
        ]),
        CheckName::ConvexityRealization => {
            wrap(vec![verify::check_convexity_per_realization(&cc, cfg.fd_delta)?])
        }
        CheckName::BlockBound => wrap(verify::check_block_bound(&cc, cfg.block_m)?),
        CheckName::Hermite => wrap(vec![verify::check_hermite(&cc)?]),
        CheckName::FourthDeriv => wrap(vec![verify::check_fourth_deriv_bound(&cc)?]),
        CheckName::ConvexityP => wrap(verify::check_convexity_p(&cc, &cfg.h_list)?),
        CheckName::HnConcentration => wrap(verify::check_hn_concentration(&cc, &cfg.n_list)?),
        CheckName::GgTrend => {
            let out = verify::check_gg_residual_trend(&cc, &cfg.n_list)?;
            let mut records: Vec<Value> = wrap(out.reports);
            for row in &out.table {
                let mut body = serde_json::to_value(row)?;
                if let Value::Object(b) = &mut body {
                    b.insert("beta".into(), cell.beta.into());
                    b.insert("h".into(), cell.h.into());
                    b.insert("d".into(), cfg.d.into());
                }
                records.push(tagged("gg_row", hash, &cell.key, body));
            }
            records
        }
        CheckName::Concentration => {
            let out = verify::concentration_experiment(&cc, &cfg.n_list)?;
            let mut records: Vec<Value> = wrap(vec![out.report]);
            for row in &out.table {
                let mut body = serde_json::to_value(row)?;
                if let Value::Object(b) = &mut body {
                    b.insert("beta".into(), cell.beta.into());
                    b.insert("h".into(), cell.h.into());
                    b.insert("d".into(), cfg.d.into());
                    b.insert("q_hat".into(), out.q_hat.into());
                }
                records.push(tagged("concentration_row", hash, &cell.key, body));
            }
            records
        }
    })
}

fn execute(cfg: &ExperimentConfig, cell: &Cell, hash: &str) -> Vec<Value> {
    let result = match cell.task {
        Task::Config => Ok(vec![tagged(
            "config",
            hash,
            &cell.key,
            json!({ "config": cfg }),
        )]),
        Task::Sweep => sweep_records(cfg, cell, hash),
        Task::Check(check) => check_records(cfg, cell, check, hash),
    };
    // Failures such as capacity limits are recorded against the cell.
    result.unwrap_or_else(|e| {
        vec![tagged("error", hash, &cell.key, json!({ "message": e.to_string() }))]
    })
}

/// Keeps the longest prefix of `path` that ends with a `cell_done` marker and
/// returns the keys of the completed cells.
fn recover(path: &Path, hash: &str) -> Result<Vec<String>> {
    let Ok(file) = File::open(path) else {
        return Ok(Vec::new());
    };
    let mut reader = BufReader::new(file);
    let mut done = Vec::new();
    let (mut offset, mut keep) = (0u64, 0u64);
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 || !line.ends_with('\n') {
            break;
        }
        offset += read as u64;
        let Ok(v) = serde_json::from_str::<Value>(&line) else {
            break;
        };
        if v["config_hash"] != hash {
            return Err(RfimError::invalid(format!(
                "{} holds records of config {}, not {hash}; use another --out",
                path.display(),
                v["config_hash"]
            )));
        }
        if v["type"] == "cell_done" {
            done.push(v["cell"].as_str().unwrap_or_default().to_string());
            keep = offset;
        }
    }
    OpenOptions::new().write(true).open(path)?.set_len(keep)?;
    Ok(done)
}

fn summarize(path: &Path) -> Result<(String, [usize; 4])> {
    let mut lines = Vec::new();
    let mut counts = [0usize; 4];
    for line in BufReader::new(File::open(path)?).lines() {
        let v: Value = serde_json::from_str(&line?)?;
        match v["type"].as_str() {
            Some("check") => {
                let r: LemmaReport = serde_json::from_value(v.clone())?;
                let idx = match r.status {
                    Status::Pass => 0,
                    Status::Fail => 1,
                    Status::Warn => 2,
                };
                counts[idx] += 1;
                lines.push(format!(
                    "{:<4} {:<26} d={} n={} beta={} h={} lhs={:.6e} rhs={:.6e} slack={:.3e} mode={}",
                    serde_json::to_value(r.status)?.as_str().unwrap_or("?"),
                    r.check,
                    r.d,
                    r.n,
                    r.beta,
                    r.h,
                    r.lhs,
                    r.rhs,
                    r.slack,
                    serde_json::to_value(r.mode)?.as_str().unwrap_or("?"),
                ));
            }
            Some("error") => {
                counts[3] += 1;
                lines.push(format!(
                    "ERR  {} {}",
                    v["cell"].as_str().unwrap_or("?"),
                    v["message"].as_str().unwrap_or("?")
                ));
            }
            _ => {}
        }
    }
    lines.push(format!(
        "{} passed, {} failed, {} warnings, {} errors",
        counts[0], counts[1], counts[2], counts[3]
    ));
    Ok((lines.join("\n") + "\n", counts))
}

/// Runs the cells selected by `kind`, appending to `<out>/records.jsonl`.
pub fn run(cfg: &ExperimentConfig, kind: RunKind, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out_dir)?;
    let hash = cfg.hash();
    let records_path = out_dir.join(RECORDS_FILE);
    let done = if opts.resume {
        recover(&records_path, &hash)?
    } else {
        File::create(&records_path)?;
        Vec::new()
    };
    let cells = plan(&cfg, kind);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| RfimError::invalid(format!("worker pool: {e}")))?;
    let mut writer = BufWriter::new(OpenOptions::new().append(true).open(&records_path)?);
    let mut skipped = 0;
    for cell in &cells {
        if done.contains(&cell.key) {
            skipped += 1;
            continue;
        }
        let records = pool.install(|| execute(&cfg, cell, &hash));
        for r in records {
            serde_json::to_writer(&mut writer, &r)?;
            writer.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut writer, &tagged("cell_done", &hash, &cell.key, json!({})))?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    drop(writer);
    let (summary, counts) = summarize(&records_path)?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    std::fs::write(&summary_path, &summary)?;
    Ok(RunOutcome {
        config_hash: hash,
        records_path,
        summary_path,
        summary,
        passed: counts[0],
        failed: counts[1],
        warned: counts[2],
        errors: counts[3],
        cells_total: cells.len(),
        cells_skipped: skipped,
    })
}
