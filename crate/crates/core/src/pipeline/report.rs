//! Markdown summary of whatever evaluation artifacts exist in a run directory.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use super::commands::{AblationRow, AblationTable};
use super::Layout;
use crate::artifact::read_json_body;
use crate::error::{Error, Result};
use crate::metrics::{MetricEntry, MetricsReport, SENTENCE_METRICS};
use crate::selection::{CurveRow, RejectionRow};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportInputs {
    /// Keyed by run name, e.g. `prm` or `prm_no_technique`.
    pub metrics: BTreeMap<String, MetricsReport>,
    pub ablation: Option<Vec<AblationRow>>,
    /// CSV file name and its rows.
    pub rejection: Option<(String, Vec<RejectionRow>)>,
    pub bon: Option<(String, Vec<CurveRow>)>,
}

fn render_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Render(format!("{}: {e}", path.display()))
}

fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| render_err(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if lines.next() != Some(header) {
        return Err(render_err(path, format!("expected header `{header}`")));
    }
    let width = header.split(',').count();
    lines
        .map(|l| {
            let cells: Vec<String> = l.split(',').map(str::to_string).collect();
            if cells.len() != width {
                return Err(render_err(path, format!("row `{l}` has {} cells, expected {width}", cells.len())));
            }
            Ok(cells)
        })
        .collect()
}

fn num<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.parse().map_err(|_| render_err(path, format!("`{s}` is not a number")))
}

pub fn parse_rejection_csv(path: &Path) -> Result<Vec<RejectionRow>> {
    csv_rows(path, "method,pct,metric,value")?
        .into_iter()
        .map(|c| {
            Ok(RejectionRow {
                method: c[0].clone(),
                pct: num(path, &c[1])?,
                metric: c[2].clone(),
                value: num(path, &c[3])?,
                retained: 0,
            })
        })
        .collect()
}

pub fn parse_bon_csv(path: &Path) -> Result<Vec<CurveRow>> {
    csv_rows(path, "strategy,n,metric,value")?
        .into_iter()
        .map(|c| {
            Ok(CurveRow {
                strategy: c[0].clone(),
                n: num(path, &c[1])?,
                metric: c[2].clone(),
                value: num(path, &c[3])?,
            })
        })
        .collect()
}

fn as_render(path: &Path, e: Error) -> Error {
    match e {
        Error::Schema { message, .. } | Error::Malformed { message, .. } => render_err(path, message),
        other => other,
    }
}

/// Reads the metrics, ablation, rejection and Best-of-N artifacts present
/// under the run directory.
pub fn collect_report_inputs(layout: &Layout) -> Result<ReportInputs> {
    let out = layout.out();
    let mut inputs = ReportInputs::default();
    let entries = std::fs::read_dir(out).map_err(|_| Error::MissingArtifact(out.to_path_buf()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
        .collect();
    names.sort();
    for name in &names {
        if let Some(run) = name.strip_prefix("metrics_").and_then(|n| n.strip_suffix(".json")) {
            let path = out.join(name);
            let (_, report): (_, MetricsReport) = read_json_body(&path).map_err(|e| as_render(&path, e))?;
            inputs.metrics.insert(run.to_string(), report);
        }
    }
    let ablation = layout.ablation_json();
    if ablation.exists() {
        let (_, table): (_, AblationTable) = read_json_body(&ablation).map_err(|e| as_render(&ablation, e))?;
        inputs.ablation = Some(table.rows);
    }
    let file_name = |p: &Path| p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
    let rejection = layout.rejection();
    if rejection.exists() {
        inputs.rejection = Some((file_name(&rejection), parse_rejection_csv(&rejection)?));
    }
    let bon = layout.bon();
    if bon.exists() {
        inputs.bon = Some((file_name(&bon), parse_bon_csv(&bon)?));
    }
    if inputs == ReportInputs::default() {
        return Err(Error::MissingArtifact(out.join("metrics_*.json")));
    }
    Ok(inputs)
}

fn cell(e: Option<&MetricEntry>) -> String {
    e.map_or("n/a".to_string(), |e| format!("{:.3} ({:.3}, {:.3})", e.point, e.lo, e.hi))
}

fn table_header(out: &mut String, cols: &[String]) {
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
}

fn first_seen<T: Clone + PartialEq>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// One table per metric: rows are `series`, columns are grid points.
fn curve_tables(out: &mut String, rows: &[(String, String, String, f64)], series: &str) {
    let metrics = first_seen(rows.iter().map(|r| r.2.clone()));
    let names = first_seen(rows.iter().map(|r| r.0.clone()));
    let grid = first_seen(rows.iter().map(|r| r.1.clone()));
    for metric in metrics {
        let _ = writeln!(out, "### {metric}\n");
        let mut cols = vec![series.to_string()];
        cols.extend(grid.iter().cloned());
        table_header(out, &cols);
        for name in &names {
            let mut line = vec![name.clone()];
            for g in &grid {
                let v = rows.iter().find(|r| &r.0 == name && &r.1 == g && r.2 == metric);
                line.push(v.map_or("n/a".to_string(), |r| format!("{:.5}", r.3)));
            }
            let _ = writeln!(out, "| {} |", line.join(" | "));
        }
        out.push('\n');
    }
}

/// Renders the summary deterministically from `inputs`.
pub fn emit_report(inputs: &ReportInputs) -> Result<String> {
    let mut out = String::from("# Verification summary\n\n");
    if !inputs.metrics.is_empty() {
        out.push_str("## Sentence-level metrics\n\nPoint estimate with the bootstrap interval in parentheses.\n\n");
        let mut cols = vec!["Run".to_string(), "n".to_string()];
        cols.extend(SENTENCE_METRICS.iter().map(|m| m.to_string()));
        table_header(&mut out, &cols);
        for (run, report) in &inputs.metrics {
            let n = report.get("accuracy").map_or(0, |e| e.n);
            let mut line = vec![run.clone(), n.to_string()];
            line.extend(SENTENCE_METRICS.iter().map(|m| cell(report.get(*m))));
            let _ = writeln!(out, "| {} |", line.join(" | "));
        }
        out.push('\n');
        let strata: Vec<(&String, &str, &MetricEntry)> = inputs
            .metrics
            .iter()
            .flat_map(|(run, r)| {
                r.iter()
                    .filter_map(move |(k, e)| k.strip_prefix("keyword_f1_micro:").map(|kw| (run, kw, e)))
            })
            .collect();
        if !strata.is_empty() {
            out.push_str("### Keyword strata (F1-micro)\n\n");
            table_header(&mut out, &["Run".into(), "Keyword".into(), "n".into(), "F1-micro".into()]);
            for (run, kw, e) in strata {
                let _ = writeln!(out, "| {run} | {kw} | {} | {} |", e.n, cell(Some(e)));
            }
            out.push('\n');
        }
    }
    if let Some(rows) = &inputs.ablation {
        out.push_str("## Context ablation\n\n");
        let mut cols = vec!["Model".to_string(), "Variant".to_string()];
        cols.extend(SENTENCE_METRICS.iter().map(|m| m.to_string()));
        table_header(&mut out, &cols);
        for r in rows {
            let mut line = vec![r.model.clone(), r.variant.clone()];
            line.extend(SENTENCE_METRICS.iter().map(|m| cell(r.metrics.get(*m))));
            let _ = writeln!(out, "| {} |", line.join(" | "));
        }
        out.push('\n');
    }
    if let Some((file, rows)) = &inputs.rejection {
        let _ = writeln!(out, "## Rejection curves\n\nFull table: `{file}`. Columns are the rejected percentage.\n");
        let flat: Vec<(String, String, String, f64)> = rows
            .iter()
            .map(|r| (r.method.clone(), format!("{}%", r.pct), r.metric.clone(), r.value))
            .collect();
        curve_tables(&mut out, &flat, "Method");
    }
    if let Some((file, rows)) = &inputs.bon {
        let _ = writeln!(out, "## Best-of-N curves\n\nFull table: `{file}`. Columns are the candidate budget N.\n");
        let flat: Vec<(String, String, String, f64)> = rows
            .iter()
            .map(|r| (r.strategy.clone(), format!("N={}", r.n), r.metric.clone(), r.value))
            .collect();
        curve_tables(&mut out, &flat, "Strategy");
    }
    if out.ends_with("\n\n") {
        out.pop();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(p: f64) -> MetricEntry {
        MetricEntry {
            point: p,
            lo: p - 0.1,
            hi: p + 0.1,
            n: 10,
            seed: 0,
        }
    }

    #[test]
    fn metrics_only_has_no_curve_sections() {
        let mut inputs = ReportInputs::default();
        inputs
            .metrics
            .insert("prm".into(), SENTENCE_METRICS.iter().map(|m| (m.to_string(), entry(0.5))).collect());
        let md = emit_report(&inputs).unwrap();
        assert!(md.contains("## Sentence-level metrics"));
        assert!(md.contains("0.500 (0.400, 0.600)"));
        assert!(!md.contains("## Rejection"));
        assert!(!md.contains("## Best-of-N"));
    }

    #[test]
    fn curve_sections_present() {
        let inputs = ReportInputs {
            rejection: Some((
                "rejection.csv".into(),
                vec![RejectionRow {
                    method: "avg_prob".into(),
                    pct: 10.0,
                    metric: "finding_f1".into(),
                    value: 0.34417,
                    retained: 0,
                }],
            )),
            bon: Some((
                "bon.csv".into(),
                vec![CurveRow {
                    strategy: "weighted_avg_prob".into(),
                    n: 4,
                    metric: "finding_f1".into(),
                    value: 0.5,
                }],
            )),
            ..Default::default()
        };
        let md = emit_report(&inputs).unwrap();
        assert!(md.contains("## Rejection curves") && md.contains("| avg_prob | 0.34417 |"));
        assert!(md.contains("## Best-of-N curves") && md.contains("N=4"));
        assert_eq!(md, emit_report(&inputs).unwrap());
    }
}
