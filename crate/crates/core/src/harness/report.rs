use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::MetricsReport;
use crate::Result;

pub const SUMMARY_HEADER: &str =
    "method,axis_name,axis_value,ser,ser_ci_lo,ser_ci_hi,sum_rate,net_sum_rate,trials";
pub const RATES_HEADER: &str =
    "method,axis_name,axis_value,scenario,activity_draw,ue_index,rate_ach,rate_up";
pub const CDF_HEADER: &str = "method,axis_name,axis_value,rate_ach,probability";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Write `summary.csv`, `rates.csv`, `cdf.csv` and `metadata.json` into `dir`
/// (created if missing). Returns the written paths. The CSV files depend only
/// on the plan and the simulated results.
pub fn emit_report(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let axis = report.plan.experiment.axis.as_str();

    let mut w = create(dir, "summary.csv")?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for p in &report.points {
        writeln!(
            w,
            "{},{axis},{},{},{},{},{},{},{}",
            p.method, p.axis_value, p.ser, p.ser_ci.0, p.ser_ci.1, p.sum_rate, p.net_sum_rate, p.trials
        )?;
    }
    w.flush()?;

    let mut w = create(dir, "rates.csv")?;
    writeln!(w, "{RATES_HEADER}")?;
    for p in &report.points {
        for r in &p.rate_samples {
            writeln!(
                w,
                "{},{axis},{},{},{},{},{},{}",
                p.method, p.axis_value, r.scenario, r.activity_draw, r.ue_index, r.rate_ach, r.rate_up
            )?;
        }
    }
    w.flush()?;

    let mut w = create(dir, "cdf.csv")?;
    writeln!(w, "{CDF_HEADER}")?;
    for p in &report.points {
        for (x, prob) in &p.cdf {
            writeln!(w, "{},{axis},{},{x},{prob}", p.method, p.axis_value)?;
        }
    }
    w.flush()?;

    let meta = serde_json::json!({
        "metadata": report.metadata,
        "plan": report.plan,
    });
    let mut w = create(dir, "metadata.json")?;
    serde_json::to_writer_pretty(&mut w, &meta).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;

    Ok(["summary.csv", "rates.csv", "cdf.csv", "metadata.json"]
        .iter()
        .map(|n| dir.join(n))
        .collect())
}
