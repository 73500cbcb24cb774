use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Method;
use super::{Mode, ResultRecord};
use crate::error::Result;

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub pivots: Vec<PathBuf>,
    pub log: PathBuf,
    pub timings: PathBuf,
}

/// `pivot_rho40.csv` for a noise ratio of 0.4.
pub fn pivot_file_name(noise_ratio: f64) -> String {
    format!("pivot_rho{:02}.csv", (noise_ratio * 100.0).round() as i64)
}

/// `mean±stdev` to four decimals, using the sample standard deviation; a
/// single value prints without the spread.
pub fn format_cell(values: &[f64]) -> String {
    match values.len() {
        0 => "n/a".into(),
        1 => format!("{:.4}", values[0]),
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            format!("{mean:.4}±{:.4}", var.sqrt())
        }
    }
}

fn results_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "mode",
        "noise_ratio",
        "fraction",
        "seed",
        "accuracy",
        "epochs_run",
        "dataset_hash",
        "status",
    ])?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            r.mode.name().to_string(),
            r.noise_ratio.to_string(),
            r.fraction.to_string(),
            r.seed.to_string(),
            r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            r.epochs_run.to_string(),
            r.dataset_hash.clone(),
            r.status.clone(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

fn timings_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "mode", "noise_ratio", "fraction", "seed", "wall_seconds"])?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            r.mode.name().to_string(),
            r.noise_ratio.to_string(),
            r.fraction.to_string(),
            r.seed.to_string(),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// Pivot tables keyed by noise ratio: rows are fractions (largest first),
/// columns are method/mode pairs, cells summarize accuracy over seeds.
pub fn pivot_tables(records: &[ResultRecord]) -> Result<Vec<(f64, String)>> {
    let mut ratios: Vec<f64> = records.iter().map(|r| r.noise_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let mut columns: Vec<(Method, Mode)> = records.iter().map(|r| (r.method, r.mode)).collect();
    columns.sort();
    columns.dedup();

    let mut out = Vec::new();
    for ratio in ratios {
        let at_ratio: Vec<&ResultRecord> = records.iter().filter(|r| r.noise_ratio == ratio).collect();
        let mut fractions: Vec<f64> = at_ratio.iter().map(|r| r.fraction).collect();
        fractions.sort_by(|a, b| b.total_cmp(a));
        fractions.dedup();
        let mut cells: BTreeMap<(u64, Method, Mode), Vec<f64>> = BTreeMap::new();
        for r in &at_ratio {
            if let Some(a) = r.accuracy {
                cells.entry((r.fraction.to_bits(), r.method, r.mode)).or_default().push(a);
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["fraction".to_string()];
        header.extend(columns.iter().map(|(m, mode)| format!("{}/{}", m.name(), mode.name())));
        w.write_record(&header)?;
        for &f in &fractions {
            let mut row = vec![f.to_string()];
            for &(m, mode) in &columns {
                row.push(format_cell(cells.get(&(f.to_bits(), m, mode)).map_or(&[][..], |v| v)));
            }
            w.write_record(&row)?;
        }
        let text = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
        out.push((ratio, text));
    }
    Ok(out)
}

/// Writes `results.csv`, one pivot table per noise ratio, `run.log` and
/// `timings.csv` into `dir`. Everything except `timings.csv` is a pure
/// function of the records and log.
pub fn emit_report(records: &[ResultRecord], log: &str, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let results = dir.join("results.csv");
    std::fs::write(&results, results_csv(records)?)?;
    let mut pivots = Vec::new();
    for (ratio, text) in pivot_tables(records)? {
        let p = dir.join(pivot_file_name(ratio));
        std::fs::write(&p, text)?;
        pivots.push(p);
    }
    let log_path = dir.join("run.log");
    let mut full_log = String::new();
    let failed = records.iter().filter(|r| r.failed()).count();
    let _ = writeln!(full_log, "records {} failed {failed}", records.len());
    full_log.push_str(log);
    std::fs::write(&log_path, full_log)?;
    let timings = dir.join("timings.csv");
    std::fs::write(&timings, timings_csv(records)?)?;
    Ok(ReportFiles { results, pivots, log: log_path, timings })
}
