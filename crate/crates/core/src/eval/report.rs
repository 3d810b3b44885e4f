use std::path::Path;

use serde::{Deserialize, Serialize};

use super::auc::PerThemeReport;
use super::contribution::ContributionReport;
use crate::error::Result;

pub const TABLE1: &str = "table1.csv";
pub const PER_THEME: &str = "per_theme.csv";
pub const CONTRIBUTION: &str = "contribution.csv";

/// One row of the system comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub auc: f64,
    /// AUC minus the baseline-1 AUC, in AUC units.
    pub delta_vs_baseline1: Option<f64>,
}

/// Builds table rows from `(system, auc)` pairs, computing deltas against
/// the row named `baseline1` when present.
pub fn system_table(aucs: &[(String, f64)]) -> Vec<SystemRow> {
    let reference = aucs.iter().find(|(s, _)| s == "baseline1").map(|r| r.1);
    aucs.iter()
        .map(|(system, auc)| SystemRow {
            system: system.clone(),
            auc: *auc,
            delta_vs_baseline1: reference.map(|r| auc - r),
        })
        .collect()
}

pub fn write_table1(path: &Path, rows: &[SystemRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["system", "auc", "delta_vs_baseline1"])?;
    for r in rows {
        w.write_record([
            r.system.clone(),
            format!("{:.6}", r.auc),
            r.delta_vs_baseline1
                .map_or(String::new(), |d| format!("{d:.6}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_per_theme(path: &Path, report: &PerThemeReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theme_id", "auc", "n_pairs", "baseline1_auc"])?;
    let reference = report
        .baseline1_auc
        .map_or(String::new(), |a| format!("{a:.6}"));
    for t in &report.themes {
        w.write_record([
            t.theme.to_string(),
            t.auc.map_or(String::new(), |a| format!("{a:.6}")),
            t.n_pairs.to_string(),
            reference.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_contribution(path: &Path, report: &ContributionReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group", "raw_mass", "proportion", "composition"])?;
    for g in &report.groups {
        w.write_record([
            g.group.as_str().to_string(),
            format!("{:.9e}", g.raw_mass),
            format!("{:.6}", g.proportion),
            report.composition.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
