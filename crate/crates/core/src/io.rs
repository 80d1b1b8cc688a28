//! Result files: JSON documents, CSV tables and the run manifest.
//!
//! JSON is pretty-printed with a trailing newline. CSV has a header row and
//! RFC 4180 quoting. Floats use shortest round-trip notation in both.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{DecayReport, ExperimentResult, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub root_seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Writes rows as CSV with a header taken from the row type's fields.
pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), rows)
}

/// One row per matrix size of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub j: usize,
    pub replicas: usize,
    pub mean_entry: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub limit_variance: f64,
    pub z_var: Option<f64>,
    pub covariance: Option<f64>,
    pub covariance_se: Option<f64>,
    pub k3: Option<f64>,
    pub k3_se: Option<f64>,
    pub k4: Option<f64>,
    pub k4_se: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub ks_stat: Option<f64>,
    pub ks_verdict: Option<Verdict>,
    pub lag1_autocorrelation: f64,
    pub raw_hash: String,
}

pub fn summary_rows(result: &ExperimentResult) -> Vec<SummaryRow> {
    result
        .records
        .iter()
        .map(|r| {
            let k = |i: usize| r.cumulants.k.get(i);
            SummaryRow {
                n: r.n,
                j: r.j,
                replicas: r.replicas,
                mean_entry: r.mean_entry,
                variance: r.variance.value,
                variance_se: r.variance.se,
                limit_variance: result.prediction.v_w,
                z_var: r.comparison.z_var,
                covariance: r.covariance.map(|c| c.value),
                covariance_se: r.covariance.map(|c| c.se),
                k3: k(2).map(|e| e.value),
                k3_se: k(2).map(|e| e.se),
                k4: k(3).map(|e| e.value),
                k4_se: k(3).map(|e| e.se),
                excess_kurtosis: r.cumulants.excess_kurtosis.map(|e| e.value),
                ks_stat: r.gaussian_test.map(|g| g.ks_stat),
                ks_verdict: r.gaussian_test.map(|g| g.verdict),
                lag1_autocorrelation: r.lag1_autocorrelation,
                raw_hash: r.raw_hash.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub n: usize,
    pub replica: usize,
    pub j: usize,
    pub y_value: f64,
}

/// Per-replica values, uncentred.
pub fn raw_rows(result: &ExperimentResult) -> Vec<RawRow> {
    result
        .records
        .iter()
        .flat_map(|r| {
            r.samples.iter().enumerate().map(move |(i, &y)| RawRow { n: r.n, replica: i, j: r.j, y_value: y })
        })
        .collect()
}

/// Human-readable table over prior JSON outputs.
pub fn render_report(results: &[ExperimentResult], decays: &[DecayReport]) -> String {
    let mut s = String::new();
    for res in results {
        s.push_str(&format!("experiment {} (seed {})\n", res.config_hash, res.root_seed));
        s.push_str(&format!("  limit variance {:.6}\n", res.prediction.v_w));
        s.push_str(&format!(
            "  {:>6} {:>6} {:>12} {:>10} {:>8} {:>10} {:>6}\n",
            "n", "j", "variance", "se", "z", "ks", "cf ok"
        ));
        for r in &res.records {
            let z = r.comparison.z_var.map_or("-".to_string(), |z| format!("{z:.2}"));
            let ks = r.gaussian_test.map_or("-".to_string(), |g| format!("{:?}", g.verdict).to_lowercase());
            s.push_str(&format!(
                "  {:>6} {:>6} {:>12.6} {:>10.6} {:>8} {:>10} {:>6}\n",
                r.n, r.j, r.variance.value, r.variance.se, z, ks, r.comparison.cf_consistent
            ));
        }
    }
    for d in decays {
        s.push_str(&format!("decay {}\n", d.config_hash));
        s.push_str(&format!("  {:>10} {:>6} {:>10}\n", "statistic", "t", "slope"));
        for sl in &d.slopes {
            s.push_str(&format!("  {:>10} {:>6} {:>10.4}\n", sl.statistic, sl.t, sl.slope));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        name: String,
        x: f64,
        y: Option<f64>,
    }

    #[test]
    fn csv_is_quoted_and_round_trips_floats() {
        let rows = [
            Row { name: "a,b".into(), x: 0.1 + 0.2, y: None },
            Row { name: "say \"hi\"".into(), x: 1e-300, y: Some(2.0) },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "name,x,y");
        assert_eq!(lines[1], "\"a,b\",0.30000000000000004,");
        assert_eq!(lines[2], "\"say \"\"hi\"\"\",1e-300,2.0");
        let x: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(x, 0.1 + 0.2);
    }
}
