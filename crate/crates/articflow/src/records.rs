//! Trial and report serialization: JSON lines, CSV and a fixed-width table.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use articflow_core::eval::{BlockSummary, SuiteReport, TrialRecord};

use crate::cloud_io::csv_field;
use crate::error::{Error, Result};

pub const TRIAL_CSV_HEADER: &str = "index,object_id,category,joint_id,estimator,mode,repetition,seed,e_goal,success,steps,termination";

/// Floats use shortest round-trip formatting so equal runs give equal bytes.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRIAL_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            csv_field(&r.object_id),
            csv_field(&r.category),
            csv_field(&r.joint_id),
            csv_field(&r.estimator),
            csv_field(&r.mode),
            r.repetition,
            r.seed,
            r.e_goal,
            r.success,
            r.steps,
            r.termination.as_str()
        );
    }
    out
}

pub fn record_json(record: &TrialRecord) -> Result<String> {
    serde_json::to_string(record).map_err(|e| Error::Format(format!("cannot encode trial record: {e}")))
}

pub fn records_jsonl(records: &[TrialRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&record_json(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn report_json(report: &SuiteReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Format(format!("cannot encode report: {e}")))
}

/// Mean normalized distance (lower is better) and success rate, one row per
/// estimator and observation mode, one column per category plus the mean
/// over all trials.
pub fn report_table(report: &SuiteReport) -> String {
    let categories: Vec<String> = report
        .blocks
        .iter()
        .flat_map(|b| b.categories.iter().map(|c| c.category.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = String::new();
    out.push_str("Mean normalized distance to goal (lower is better)\n");
    table(&mut out, report, &categories, |b, c| match c {
        Some(c) => b.categories.iter().find(|x| x.category == c).map(|x| x.mean_e_goal),
        None => Some(b.mean_e_goal),
    });
    out.push_str("\nSuccess rate (higher is better)\n");
    table(&mut out, report, &categories, |b, c| match c {
        Some(c) => b.categories.iter().find(|x| x.category == c).map(|x| x.success_rate),
        None => Some(b.success_rate),
    });
    out
}

fn table(out: &mut String, report: &SuiteReport, categories: &[String], cell: impl Fn(&BlockSummary, Option<&str>) -> Option<f64>) {
    let mut header = vec!["method".to_string(), "mode".to_string()];
    header.extend(categories.iter().cloned());
    header.push("AVG".to_string());
    let mut rows = vec![header];
    for b in &report.blocks {
        let mut row = vec![b.estimator.clone(), b.mode.clone()];
        for c in categories.iter().map(|c| Some(c.as_str())).chain([None]) {
            row.push(cell(b, c).map_or_else(|| "-".to_string(), |v| format!("{v:.3}")));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len()).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
    for (ri, row) in rows.iter().enumerate() {
        let mut line = String::new();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i < 2 {
                let _ = write!(line, "{v:<w$}", w = widths[i]);
            } else {
                let _ = write!(line, "{v:>w$}", w = widths[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if ri == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use articflow_core::policy::Termination;

    fn rec(index: usize, object_id: &str) -> TrialRecord {
        TrialRecord {
            index,
            object_id: object_id.to_string(),
            category: "door".to_string(),
            joint_id: "door_hinge".to_string(),
            estimator: "oracle".to_string(),
            mode: "full".to_string(),
            repetition: 0,
            seed: 42,
            e_goal: 0.1,
            success: true,
            steps: 7,
            termination: Termination::Success,
        }
    }

    #[test]
    fn csv_rows() {
        let csv = trials_csv(&[rec(0, "door_00"), rec(1, "odd,id")]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], TRIAL_CSV_HEADER);
        assert_eq!(lines[1], "0,door_00,door,door_hinge,oracle,full,0,42,0.1,true,7,success");
        assert!(lines[2].starts_with("1,\"odd,id\","));
    }

    #[test]
    fn json_line_round_trips() {
        let r = rec(3, "x");
        let line = record_json(&r).unwrap();
        assert!(!line.contains('\n'));
        let back: TrialRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }
}
