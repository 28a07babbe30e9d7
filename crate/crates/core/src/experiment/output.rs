use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::sweep::{ExperimentRecord, SummaryRow};
use crate::error::{Error, Result};

pub const RECORDS_HEADER: &str = "target,algorithm,n_train,n_test,d,k,M,rep,seed,l2_sum,mse,empty_predictions";
pub const SUMMARY_HEADER: &str = "target,algorithm,M,mean_mse,std_mse,reps";

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.target, r.algorithm, r.n_train, r.n_test, r.d, r.k, r.m, r.rep, r.seed, r.l2_sum, r.mse, r.empty_predictions
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in rows {
        writeln!(out, "{},{},{},{},{},{}", s.target, s.algorithm, s.m, s.mean_mse, s.std_mse, s.reps)?;
    }
    Ok(())
}

fn field<T: std::str::FromStr>(fields: &[&str], i: usize, line: usize) -> Result<T> {
    fields
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("records.csv line {line}: bad field {i}")))
}

/// Parses a `records.csv` produced by [`write_records_csv`].
pub fn read_records_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORDS_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected records header {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 12 {
                return Err(Error::Parse(format!("records.csv line {}: {} fields", i + 2, f.len())));
            }
            Ok(ExperimentRecord {
                target: f[0].to_string(),
                algorithm: f[1].to_string(),
                n_train: field(&f, 2, i + 2)?,
                n_test: field(&f, 3, i + 2)?,
                d: field(&f, 4, i + 2)?,
                k: field(&f, 5, i + 2)?,
                m: field(&f, 6, i + 2)?,
                rep: field(&f, 7, i + 2)?,
                seed: field(&f, 8, i + 2)?,
                l2_sum: field(&f, 9, i + 2)?,
                mse: field(&f, 10, i + 2)?,
                empty_predictions: field(&f, 11, i + 2)?,
            })
        })
        .collect()
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `records.csv`, `summary.csv` and, per target, the plot tables
/// `plot_<target>_mean_mse.csv` and `plot_<target>_std_mse.csv` with columns
/// `M,centered_value,directional_value`. Returns the written paths.
pub fn emit_outputs(records: &[ExperimentRecord], summaries: &[SummaryRow], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("records.csv");
    write_file(&path, |w| write_records_csv(records, w))?;
    written.push(path);

    let path = dir.join("summary.csv");
    write_file(&path, |w| write_summary_csv(summaries, w))?;
    written.push(path);

    let mut targets: Vec<&str> = Vec::new();
    for s in summaries {
        if !targets.contains(&s.target.as_str()) {
            targets.push(&s.target);
        }
    }
    type Metric = fn(&SummaryRow) -> f64;
    let metrics: [(&str, Metric); 2] = [("mean_mse", |s| s.mean_mse), ("std_mse", |s| s.std_mse)];
    for target in targets {
        let rows: Vec<&SummaryRow> = summaries.iter().filter(|s| s.target == target).collect();
        let mut ms: Vec<usize> = rows.iter().map(|s| s.m).collect();
        ms.sort_unstable();
        ms.dedup();
        for (metric, value) in metrics {
            let path = dir.join(format!("plot_{target}_{metric}.csv"));
            write_file(&path, |w| {
                writeln!(w, "M,centered_value,directional_value")?;
                for &m in &ms {
                    let cell = |alg: &str| {
                        rows.iter()
                            .find(|s| s.m == m && s.algorithm == alg)
                            .map(|s| value(s).to_string())
                            .unwrap_or_default()
                    };
                    writeln!(w, "{m},{},{}", cell("centered-kerf"), cell("directional-kerf"))?;
                }
                Ok(())
            })?;
            written.push(path);
        }
    }
    Ok(written)
}
