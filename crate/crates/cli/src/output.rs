//! CSV, series and manifest emission.

use std::path::{Path, PathBuf};

use coopmud::harness::SweepTable;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const CSV_HEADER: [&str; 9] = [
    "sweep_value",
    "variant",
    "detector",
    "ber",
    "errors",
    "bits",
    "ci_low",
    "ci_high",
    "censored",
];

/// Twelve significant digits in scientific notation.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

/// File name of a series label.
pub fn csv_name(label: &str) -> String {
    let stem: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{stem}.csv")
}

/// One CSV per series label, in first-appearance order.
pub fn render_csvs(table: &SweepTable) -> CliResult<Vec<(String, Vec<u8>)>> {
    let mut labels: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !labels.contains(&r.variant.as_str()) {
            labels.push(&r.variant);
        }
    }
    let mut out = Vec::new();
    for label in labels {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Run(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(err)?;
        for r in table.rows.iter().filter(|r| r.variant == label) {
            w.write_record([
                fmt12(r.sweep_value),
                r.variant.clone(),
                r.detector.to_string(),
                fmt12(r.ber),
                r.errors.to_string(),
                r.bits.to_string(),
                fmt12(r.ci_low),
                fmt12(r.ci_high),
                r.censored.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Run(format!("csv: {e}")))?;
        out.push((csv_name(label), bytes));
    }
    Ok(out)
}

/// Plot-ready series: one entry per (label, detector).
pub fn series_json(figure: &str, table: &SweepTable) -> Value {
    let series: Vec<Value> = table
        .labels()
        .into_iter()
        .map(|(label, det)| {
            let rows: Vec<_> = table.series(&label, det).collect();
            json!({
                "label": label,
                "detector": det.to_string(),
                "tx_power_db": rows.first().map(|r| r.tx_power_db),
                "x": rows.iter().map(|r| r.sweep_value).collect::<Vec<_>>(),
                "ber": rows.iter().map(|r| r.ber).collect::<Vec<_>>(),
                "ci_low": rows.iter().map(|r| r.ci_low).collect::<Vec<_>>(),
                "ci_high": rows.iter().map(|r| r.ci_high).collect::<Vec<_>>(),
                "censored": rows.iter().map(|r| r.censored).collect::<Vec<_>>(),
                "errors": rows.iter().map(|r| r.errors).collect::<Vec<_>>(),
                "bits": rows.iter().map(|r| r.bits).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "figure": figure,
        "parameter": table.parameter.name(),
        "series": series,
        "placements": table.placements,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of `blob <len>\0<content>`, as git hashes blobs.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex(&h.finalize())
}

/// Hash over the sorted `(name, blob hash)` list of the data files.
pub fn content_hash(files: &[(String, Vec<u8>)]) -> String {
    let mut entries: Vec<(String, String)> = files
        .iter()
        .map(|(n, c)| (n.clone(), blob_hash(c)))
        .collect();
    entries.sort();
    let mut h = Sha256::new();
    for (n, b) in entries {
        h.update(format!("{n}\0{b}\n").as_bytes());
    }
    hex(&h.finalize())
}

/// Writes `files` into `root/name` through a temporary sibling directory so
/// that a failed run leaves nothing behind. An existing `root/name` is
/// replaced.
pub fn commit_dir(root: &Path, name: &str, files: &[(String, Vec<u8>)]) -> CliResult<PathBuf> {
    std::fs::create_dir_all(root)?;
    let tmp = root.join(format!(".{name}.partial-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp)?;
    }
    let write = || -> std::io::Result<()> {
        std::fs::create_dir(&tmp)?;
        for (n, c) in files {
            std::fs::write(tmp.join(n), c)?;
        }
        Ok(())
    };
    if let Err(e) = write() {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e.into());
    }
    let dest = root.join(name);
    if dest.exists() {
        std::fs::remove_dir_all(&dest)?;
    }
    std::fs::rename(&tmp, &dest)?;
    Ok(dest)
}
