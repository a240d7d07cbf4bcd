//! Implementations behind the `hvo` subcommands. Each returns the text the
//! binary prints on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hvo_core::grpo::train::TrainFailure;
use hvo_core::report::{evaluation_group, HV_SCORE_UNIT};
use hvo_core::reward::{default_weights, hvo_scalarize_with};
use hvo_core::{
    compose_rewards, group_advantages, hypervolume_indicator, train, EvalReport, ReferencePoint,
    RewardModel, ScalarizationMode, ScoreMatrix, ScoreVector,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    self, format_rewards_csv, format_significant, parse_numeric_csv, parse_score_csv, read_source,
};

pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const FINAL_POLICY: &str = "final_policy.json";
pub const REPORT: &str = "report.json";
pub const RESOLVED_CONFIG: &str = "config.json";

/// Scalar rewards and advantages for a score matrix CSV.
pub fn cmd_reward(
    input: &Path,
    config: Option<&Path>,
    mode: Option<ScalarizationMode>,
) -> CliResult<String> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let text = read_source(input)?;
    let parsed = parse_score_csv(&text, &input.display().to_string())?;
    let mut reward_cfg = cfg.reward.resolve(parsed.scores.dims(), mode)?;
    let lengths = match parsed.lengths {
        Some(l) => l,
        None => {
            // Without length columns only the bare scalarizer applies.
            reward_cfg.conciseness_enabled = false;
            Vec::new()
        }
    };
    let rewards = compose_rewards(&parsed.scores, &lengths, &reward_cfg)?;
    let advantages = group_advantages(&rewards)?;
    Ok(format_rewards_csv(&rewards, &advantages))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefSpec {
    Explicit(Vec<f64>),
    /// Per-dimension minimum of the points minus `delta`.
    NadirDelta(f64),
}

impl RefSpec {
    pub fn parse(text: &str, delta: f64) -> CliResult<Self> {
        if text == "nadir-delta" {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(CliError::Input(format!("invalid --delta {delta}")));
            }
            return Ok(RefSpec::NadirDelta(delta));
        }
        text.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Input(format!("invalid reference coordinate '{v}'")))
            })
            .collect::<CliResult<Vec<f64>>>()
            .map(RefSpec::Explicit)
    }
}

/// Hypervolume of a point CSV, printed with 12 significant digits.
pub fn cmd_hv(input: &Path, reference: &RefSpec) -> CliResult<String> {
    let text = read_source(input)?;
    let table = parse_numeric_csv(&text, &input.display().to_string())?;
    let reference = match reference {
        RefSpec::Explicit(r) => r.clone(),
        RefSpec::NadirDelta(delta) => ReferencePoint::nadir_offset(&table.rows, *delta)?
            .values()
            .to_vec(),
    };
    let hv = hypervolume_indicator(&table.rows, &reference)?;
    Ok(format!("{}\n", format_significant(hv, 12)))
}

/// Outcome of one seed of `hvo train`.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub report: EvalReport,
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed_{seed}"))
}

/// A finished seed with its evaluation points and completion lengths.
type SeedOutcome = (SeedRun, Vec<ScoreVector>, Vec<usize>);

/// Trains one run per configured seed under `out`, then writes a pooled
/// `report.json` at the root.
pub fn cmd_train(config: &Path, out: &Path) -> CliResult<String> {
    let cfg = ExperimentConfig::load(config)?;
    run_experiment(&cfg, out)
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> CliResult<String> {
    cfg.validate()?;
    let (task, model) = cfg.task.build()?;
    let reward_cfg = cfg.reward.resolve(model.dimension_count(), None)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    io::write_json(&out.join(RESOLVED_CONFIG), cfg)?;

    let results: Vec<CliResult<SeedOutcome>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let dir = seed_dir(out, seed);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let train_cfg = hvo_core::TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            let run = match train(&task, &model, &reward_cfg, &train_cfg) {
                Ok(run) => run,
                Err(TrainFailure { source, logs }) => {
                    io::write_file(&dir.join(TRAIN_LOG), &io::to_jsonl(&logs))?;
                    return Err(CliError::from(source));
                }
            };
            io::write_file(&dir.join(TRAIN_LOG), &io::to_jsonl(&run.logs))?;
            io::write_json(&dir.join(FINAL_POLICY), &run.policy)?;
            let (scores, lengths) = evaluation_group(
                &run.policy,
                &task,
                &model,
                cfg.eval_group_size,
                cfg.train.max_output_length,
                seed,
            )?;
            let report = EvalReport::from_scores(
                model.dimension_names().to_vec(),
                &scores,
                &lengths,
                reward_cfg.hvo_delta,
            )?;
            io::write_json(&dir.join(REPORT), &report)?;
            Ok((SeedRun { seed, dir, report }, scores, lengths))
        })
        .collect();

    let mut runs = Vec::new();
    let mut pooled_scores = Vec::new();
    let mut pooled_lengths = Vec::new();
    for r in results {
        let (run, scores, lengths) = r?;
        pooled_scores.extend(scores);
        pooled_lengths.extend(lengths);
        runs.push(run);
    }
    let pooled = EvalReport::from_scores(
        model.dimension_names().to_vec(),
        &pooled_scores,
        &pooled_lengths,
        reward_cfg.hvo_delta,
    )?;
    io::write_json(&out.join(REPORT), &pooled)?;

    let mut summary = String::new();
    for run in &runs {
        let r = &run.report;
        let _ = writeln!(
            summary,
            "seed {}: overall {:.3} std {} hv {:.3}e-3 length {:.2} -> {}",
            run.seed,
            r.overall,
            r.std.map_or("-".into(), |s| format!("{s:.3}")),
            r.hv_score,
            r.mean_completion_length,
            run.dir.display()
        );
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "md" | "markdown" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(CliError::Input(format!("unknown format '{other}'"))),
        }
    }
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub means: Vec<f64>,
    /// Hypervolume of the run's box within the compared group, in `1e-3` units.
    pub hv_score: f64,
    pub overall: f64,
    pub std: Option<f64>,
    pub mean_length: f64,
}

pub fn load_report(dir: &Path) -> CliResult<EvalReport> {
    let path = dir.join(REPORT);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.display().to_string(),
        line: e.line() as u64,
        reason: e.to_string(),
    })
}

/// Rows sorted by run name. HV scores use the group formed by all compared
/// runs: each run's mean vector gets the volume of its box measured from
/// the per-dimension minimum minus `delta`, edges capped at `epsilon`.
pub fn compare_rows(
    reports: &[(String, EvalReport)],
    delta: f64,
    epsilon: f64,
) -> CliResult<Vec<CompareRow>> {
    let dims = reports
        .first()
        .map_or(0, |(_, r)| r.per_dimension_means.len());
    for (name, r) in reports {
        if r.per_dimension_means.len() != dims {
            return Err(CliError::Input(format!(
                "{name}: {} dimensions, expected {dims}",
                r.per_dimension_means.len()
            )));
        }
    }
    let matrix = ScoreMatrix::from_rows(
        reports
            .iter()
            .map(|(_, r)| r.per_dimension_means.clone())
            .collect(),
    )?;
    let hv = hvo_scalarize_with(
        &matrix,
        &default_weights(ScalarizationMode::Hvo, dims),
        delta,
        epsilon,
    )?;
    let mut rows: Vec<CompareRow> = reports
        .iter()
        .zip(hv)
        .map(|((name, r), hv)| CompareRow {
            run: name.clone(),
            means: r.per_dimension_means.clone(),
            hv_score: hv / HV_SCORE_UNIT,
            overall: r.overall,
            std: r.std,
            mean_length: r.mean_completion_length,
        })
        .collect();
    rows.sort_by(|a, b| a.run.cmp(&b.run));
    Ok(rows)
}

fn run_name(dir: &Path) -> String {
    let s = dir.display().to_string();
    let trimmed = s.trim_end_matches('/');
    if trimmed.is_empty() {
        s
    } else {
        trimmed.to_string()
    }
}

pub fn cmd_compare(
    dirs: &[PathBuf],
    format: TableFormat,
    delta: f64,
    epsilon: f64,
) -> CliResult<String> {
    if dirs.len() < 2 {
        return Err(CliError::Input(
            "compare needs at least 2 run directories".into(),
        ));
    }
    let reports = dirs
        .iter()
        .map(|d| Ok((run_name(d), load_report(d)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let names = reports[0].1.dimension_names.clone();
    let rows = compare_rows(&reports, delta, epsilon)?;
    Ok(match format {
        TableFormat::Markdown => render_markdown(&names, &rows, delta, epsilon),
        TableFormat::Csv => render_csv(&names, &rows, delta, epsilon),
    })
}

/// Column headers and, per column, whether larger values are better.
fn scored_columns(names: &[String]) -> Vec<(String, bool)> {
    let mut cols: Vec<(String, bool)> = names.iter().map(|n| (n.clone(), true)).collect();
    cols.push(("hv_score".into(), true));
    cols.push(("overall".into(), true));
    cols.push(("std".into(), false));
    cols
}

fn scored_values(row: &CompareRow) -> Vec<Option<f64>> {
    let mut v: Vec<Option<f64>> = row.means.iter().copied().map(Some).collect();
    v.push(Some(row.hv_score));
    v.push(Some(row.overall));
    v.push(row.std);
    v
}

/// `best[i][c]` is true when row `i` holds the best value of column `c`.
fn best_marks(
    rows: &[CompareRow],
    columns: &[(String, bool)],
    decimals: Option<usize>,
) -> Vec<Vec<bool>> {
    let values: Vec<Vec<Option<f64>>> = rows
        .iter()
        .map(|r| {
            scored_values(r)
                .into_iter()
                .map(|v| v.map(|x| decimals.map_or(x, |d| format!("{x:.d$}").parse().unwrap_or(x))))
                .collect()
        })
        .collect();
    let mut marks = vec![vec![false; columns.len()]; rows.len()];
    for (c, (_, higher)) in columns.iter().enumerate() {
        let column = values.iter().filter_map(|v| v[c]);
        let best = if *higher {
            column.fold(f64::NEG_INFINITY, f64::max)
        } else {
            column.fold(f64::INFINITY, f64::min)
        };
        for (i, v) in values.iter().enumerate() {
            marks[i][c] = v[c] == Some(best);
        }
    }
    marks
}

fn group_line(rows: &[CompareRow], delta: f64, epsilon: f64) -> String {
    let group: Vec<&str> = rows.iter().map(|r| r.run.as_str()).collect();
    format!(
        "HV group: {} (reference: per-dimension minimum - {delta}, edge cap {epsilon}; HV in units of 1e-3)",
        group.join(", ")
    )
}

fn render_markdown(names: &[String], rows: &[CompareRow], delta: f64, epsilon: f64) -> String {
    let columns = scored_columns(names);
    let marks = best_marks(rows, &columns, Some(3));
    let mut out = format!("{}\n\n", group_line(rows, delta, epsilon));
    let mut header = vec!["Run".to_string()];
    header.extend(names.iter().cloned());
    header.extend([
        "HV score".into(),
        "Overall".into(),
        "STD".into(),
        "Length".into(),
    ]);
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for (row, mark) in rows.iter().zip(&marks) {
        let mut cells = vec![row.run.clone()];
        for (v, m) in scored_values(row).into_iter().zip(mark) {
            cells.push(match v {
                Some(x) if *m => format!("**{x:.3}**"),
                Some(x) => format!("{x:.3}"),
                None => "-".into(),
            });
        }
        cells.push(format!("{:.2}", row.mean_length));
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

fn render_csv(names: &[String], rows: &[CompareRow], delta: f64, epsilon: f64) -> String {
    let columns = scored_columns(names);
    let marks = best_marks(rows, &columns, None);
    let mut out = format!("# {}\n", group_line(rows, delta, epsilon));
    let mut header = vec!["run".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    header.extend(["mean_length".into(), "best".into()]);
    let _ = writeln!(out, "{}", header.join(","));
    for (row, mark) in rows.iter().zip(&marks) {
        let mut cells = vec![row.run.clone()];
        cells.extend(
            scored_values(row)
                .into_iter()
                .map(|v| v.map_or(String::new(), |x| x.to_string())),
        );
        cells.push(row.mean_length.to_string());
        let best: Vec<&str> = columns
            .iter()
            .zip(mark)
            .filter(|(_, m)| **m)
            .map(|((n, _), _)| n.as_str())
            .collect();
        cells.push(best.join(";"));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
