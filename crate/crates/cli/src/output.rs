//! CSV and JSON writers with byte-stable formatting.

use std::fmt::Write as _;
use std::path::Path;

use heavytail_opt::harness::{ExperimentResult, TrialResult};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: &str = "trial,iter,oracle_calls,f_gap,dist_sq";

/// 17 significant digits; `inf`/`-inf`/`nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trajectories_csv(trials: &[TrialResult]) -> String {
    let mut s = String::with_capacity(64 * trials.iter().map(|t| t.trajectory.len() + 1).sum::<usize>());
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for t in trials {
        let id = t.summary.trial_id;
        if t.trajectory.is_empty() {
            // diverged SSTM trial: a single terminal row
            let _ = writeln!(s, "{id},0,{},inf,inf", t.summary.total_oracle_calls);
            continue;
        }
        for p in &t.trajectory {
            let _ = writeln!(
                s,
                "{id},{},{},{},{}",
                p.iter,
                p.oracle_calls,
                fmt_opt(p.f_gap),
                fmt_opt(p.dist_sq)
            );
        }
    }
    s
}

/// Pretty JSON with non-finite numbers written as `null`.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    summary: &'a heavytail_opt::harness::ExperimentSummary,
    trials: Vec<&'a heavytail_opt::harness::TrialSummary>,
}

/// Write `trajectories.csv`, `summary.json` and `params.json` into `dir`.
pub fn write_run(dir: &Path, result: &ExperimentResult) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("trajectories.csv"), &trajectories_csv(&result.trials))?;
    let summary = SummaryFile {
        summary: &result.summary,
        trials: result.trials.iter().map(|t| &t.summary).collect(),
    };
    write_file(&dir.join("summary.json"), &to_json(&summary))?;
    write_file(&dir.join("params.json"), &to_json(&result.params))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_opt(None), "");
        // 17 significant digits round-trip
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn non_finite_json_is_null() {
        assert_eq!(to_json(&[f64::INFINITY, 1.0]).replace(char::is_whitespace, ""), "[null,1.0]");
    }
}
