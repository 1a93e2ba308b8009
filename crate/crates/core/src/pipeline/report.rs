use std::io::Write;

use crate::causal::{AteRow, EstimateReport, SensitivityReport};
use crate::error::Result;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn ate_fields(r: &AteRow) -> Vec<String> {
    vec![
        r.method.to_string(),
        r.group.to_string(),
        r.horizon.to_string(),
        opt(r.ate_mean),
        opt(r.ate_sd),
        opt(r.ci_lo),
        opt(r.ci_hi),
        r.n_treated.to_string(),
        r.n_control.to_string(),
        r.n_trimmed.to_string(),
    ]
}

const ATE_HEADER: [&str; 10] = [
    "method",
    "group",
    "horizon_N",
    "ate_mean",
    "ate_sd",
    "ci_lo",
    "ci_hi",
    "n_treated",
    "n_control",
    "n_trimmed",
];

/// One row per (method, group, horizon); missing values are `NA`.
pub fn write_ate_csv<W: Write>(report: &EstimateReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ATE_HEADER)?;
    for r in &report.ate {
        w.write_record(ate_fields(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_balance_csv<W: Write>(report: &EstimateReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "group", "dim", "asmd_before", "asmd_after"])?;
    for b in &report.balance {
        w.write_record([
            b.method.to_string(),
            b.group.to_string(),
            b.dim.to_string(),
            b.asmd_before.to_string(),
            b.asmd_after.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Series for effect-over-time plots, x in months since legalization.
pub fn write_plot_csv<W: Write>(report: &EstimateReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["months_since_legalization", "method", "group", "ate_mean", "ci_lo", "ci_hi"])?;
    let mut rows: Vec<&AteRow> = report.ate.iter().collect();
    rows.sort_by(|a, b| (a.method, a.group, a.horizon).cmp(&(b.method, b.group, b.horizon)));
    for r in rows {
        w.write_record([
            r.horizon.to_string(),
            r.method.to_string(),
            r.group.to_string(),
            opt(r.ate_mean),
            opt(r.ci_lo),
            opt(r.ci_hi),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_sensitivity_csv<W: Write>(report: &SensitivityReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["retweets"];
    header.extend(ATE_HEADER);
    header.push("insufficient_population");
    w.write_record(&header)?;
    for run in &report.runs {
        let tag = if run.include_retweets { "included" } else { "excluded" };
        for r in &run.report.ate {
            let mut fields = vec![tag.to_string()];
            fields.extend(ate_fields(r));
            fields.push(r.insufficient_population.to_string());
            w.write_record(&fields)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
