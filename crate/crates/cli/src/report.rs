use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ganlip_core::metrics::MetricsSummary;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything one evaluation produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub split: String,
    /// Summaries of the finite per-frame scores, keyed by metric name.
    pub metrics: BTreeMap<String, MetricsSummary>,
    /// Per-frame scores that were +∞ (identical frames under PSNR).
    pub n_infinite: BTreeMap<String, usize>,
    pub fid: Option<f64>,
    pub embedder: String,
    /// Enough to rerun the evaluation: model, data source, configuration.
    pub config: serde_json::Value,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Better {
    Lower,
    Higher,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    pub better: Better,
    pub values: Vec<Option<f64>>,
    /// Column of the best value; only set when there is something to compare.
    pub best: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub models: Vec<String>,
    pub rows: Vec<TableRow>,
}

const STATS: [&str; 4] = ["mean", "median", "max", "min"];

fn stat(s: &MetricsSummary, name: &str) -> f64 {
    match name {
        "mean" => s.mean,
        "median" => s.median,
        "max" => s.max,
        _ => s.min,
    }
}

fn best_of(values: &[Option<f64>], better: Better) -> Option<usize> {
    let present: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|x| !x.is_nan()).map(|x| (i, x)))
        .collect();
    if present.len() < 2 {
        return None;
    }
    let pick = |a: &(usize, f64), b: &(usize, f64)| match better {
        Better::Lower => a.1.total_cmp(&b.1),
        Better::Higher => b.1.total_cmp(&a.1),
    };
    present.iter().min_by(|a, b| pick(a, b)).map(|(i, _)| *i)
}

/// Side-by-side table: FID (lower is better), then the four summary
/// statistics of every metric (higher is better).
pub fn build_table(reports: &[RunReport]) -> Result<ComparisonTable, CliError> {
    let first = reports
        .first()
        .ok_or_else(|| CliError::usage("report needs at least one run report"))?;
    let keys: Vec<&String> = first.metrics.keys().collect();
    for r in &reports[1..] {
        if r.metrics.keys().collect::<Vec<_>>() != keys || r.fid.is_some() != first.fid.is_some() {
            return Err(CliError::usage(format!(
                "incompatible metric sets: {} vs {}",
                first.model, r.model
            )));
        }
    }
    let mut rows = Vec::new();
    if first.fid.is_some() {
        let values: Vec<Option<f64>> = reports.iter().map(|r| r.fid).collect();
        rows.push(TableRow {
            label: "FID".into(),
            better: Better::Lower,
            best: best_of(&values, Better::Lower),
            values,
        });
    }
    for key in keys {
        for s in STATS {
            let values: Vec<Option<f64>> = reports
                .iter()
                .map(|r| Some(stat(&r.metrics[key], s)))
                .collect();
            rows.push(TableRow {
                label: format!("{key} {s}"),
                better: Better::Higher,
                best: best_of(&values, Better::Higher),
                values,
            });
        }
    }
    Ok(ComparisonTable {
        models: reports.iter().map(|r| r.model.clone()).collect(),
        rows,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

/// Fixed-width text; the best value of a row carries a trailing `*`.
pub fn render_text(t: &ComparisonTable) -> String {
    let label_w = t
        .rows
        .iter()
        .map(|r| r.label.len())
        .chain([6])
        .max()
        .unwrap_or(6);
    let col_w = t
        .models
        .iter()
        .map(|m| m.len())
        .chain([11])
        .max()
        .unwrap_or(11);
    let mut out = format!("{:label_w$}", "metric");
    for m in &t.models {
        let _ = write!(out, "  {m:>col_w$}");
    }
    out.push('\n');
    for r in &t.rows {
        let _ = write!(out, "{:label_w$}", r.label);
        for (i, v) in r.values.iter().enumerate() {
            let mark = if r.best == Some(i) { "*" } else { " " };
            let _ = write!(out, "  {:>w$}{mark}", cell(*v), w = col_w - 1);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(t: &ComparisonTable, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["metric".to_string(), "better".to_string()];
    header.extend(t.models.iter().cloned());
    header.push("best".into());
    w.write_record(&header)?;
    for r in &t.rows {
        let mut rec = vec![
            r.label.clone(),
            match r.better {
                Better::Lower => "lower".into(),
                Better::Higher => "higher".into(),
            },
        ];
        rec.extend(
            r.values
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        rec.push(r.best.map(|i| t.models[i].clone()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Box geometry with outliers omitted: quartiles, median and Tukey fences
/// exactly as summarized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxplotEntry {
    pub model: String,
    pub metric: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub n_outliers_omitted: usize,
}

pub fn boxplot_data(reports: &[RunReport]) -> Vec<BoxplotEntry> {
    reports
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(move |(k, s)| BoxplotEntry {
                model: r.model.clone(),
                metric: k.clone(),
                q1: s.q1,
                median: s.median,
                q3: s.q3,
                lower_fence: s.lower_fence,
                upper_fence: s.upper_fence,
                n_outliers_omitted: s.n_outliers,
            })
        })
        .collect()
}

pub struct ReportOutput {
    pub table: ComparisonTable,
    pub text: String,
    pub files: Vec<PathBuf>,
}

/// Writes `comparison.txt`, `comparison.csv` and `boxplot.json` to `out`.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<ReportOutput, CliError> {
    let reports = inputs
        .iter()
        .map(|p| RunReport::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let table = build_table(&reports)?;
    std::fs::create_dir_all(out)?;
    let text = render_text(&table);
    let files = vec![
        out.join("comparison.txt"),
        out.join("comparison.csv"),
        out.join("boxplot.json"),
    ];
    std::fs::write(&files[0], &text)?;
    write_csv(&table, &files[1])?;
    std::fs::write(
        &files[2],
        serde_json::to_string_pretty(&boxplot_data(&reports))? + "\n",
    )?;
    Ok(ReportOutput { table, text, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ganlip_core::metrics::summarize;

    fn report(model: &str, fid: Option<f64>, ssim: &[f64]) -> RunReport {
        let mut metrics = BTreeMap::new();
        metrics.insert("ssim".to_string(), summarize(ssim).unwrap());
        RunReport {
            model: model.into(),
            split: "test".into(),
            metrics,
            n_infinite: BTreeMap::new(),
            fid,
            embedder: "toy".into(),
            config: serde_json::Value::Null,
            wall_time_secs: 0.0,
        }
    }

    #[test]
    fn lower_fid_wins() {
        let t = build_table(&[
            report("a", Some(15.11), &[0.9, 0.8]),
            report("b", Some(14.49), &[0.7, 0.95]),
        ])
        .unwrap();
        assert_eq!(t.rows[0].label, "FID");
        assert_eq!(t.rows[0].best, Some(1));
        let mean = t.rows.iter().find(|r| r.label == "ssim mean").unwrap();
        assert_eq!(mean.best, Some(0));
        let max = t.rows.iter().find(|r| r.label == "ssim max").unwrap();
        assert_eq!(max.best, Some(1));
    }

    #[test]
    fn single_report_unmarked() {
        let t = build_table(&[report("a", Some(3.0), &[0.5, 0.6])]).unwrap();
        assert!(t.rows.iter().all(|r| r.best.is_none()));
        assert!(!render_text(&t).contains('*'));
    }

    #[test]
    fn incompatible_sets_rejected() {
        let err = build_table(&[
            report("a", Some(1.0), &[0.5, 0.6]),
            report("b", None, &[0.5, 0.6]),
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(build_table(&[]).is_err());
    }

    #[test]
    fn boxplot_uses_summary_fences() {
        let r = report(
            "a",
            None,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 100.0],
        );
        let b = boxplot_data(std::slice::from_ref(&r));
        let s = &r.metrics["ssim"];
        assert_eq!(
            (b[0].lower_fence, b[0].upper_fence),
            (s.lower_fence, s.upper_fence)
        );
        assert_eq!(b[0].n_outliers_omitted, 1);
    }
}
