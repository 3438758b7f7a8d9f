//! Machine-readable experiment reports. The JSON file holds everything; each
//! series also gets its own CSV. Output is a pure function of the report, so
//! equal reports give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::ExperimentConfig;

/// JSON has no non-finite numbers; they are written as `null` and read back
/// as NaN.
mod lenient {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod rows {
        use super::*;

        pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            let wrapped: Vec<Vec<Option<f64>>> = rows
                .iter()
                .map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect())
                .collect();
            wrapped.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            let rows = Vec::<Vec<Option<f64>>>::deserialize(d)?;
            Ok(rows
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// One pass/fail acceptance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Statement under test.
    pub anchor: String,
    #[serde(with = "lenient")]
    pub measured: f64,
    #[serde(with = "lenient")]
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub note: String,
}

impl Check {
    pub fn at_most(name: &str, anchor: &str, measured: f64, threshold: f64) -> Self {
        Self::new(name, anchor, measured, threshold, Comparison::AtMost)
    }

    pub fn at_least(name: &str, anchor: &str, measured: f64, threshold: f64) -> Self {
        Self::new(name, anchor, measured, threshold, Comparison::AtLeast)
    }

    /// A boolean property; `measured` is 1 when it holds.
    pub fn holds(name: &str, anchor: &str, ok: bool) -> Self {
        Self::new(
            name,
            anchor,
            if ok { 1.0 } else { 0.0 },
            1.0,
            Comparison::AtLeast,
        )
    }

    fn new(
        name: &str,
        anchor: &str,
        measured: f64,
        threshold: f64,
        comparison: Comparison,
    ) -> Self {
        let passed = match comparison {
            Comparison::AtMost => measured <= threshold,
            Comparison::AtLeast => measured >= threshold,
        };
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            measured,
            threshold,
            comparison,
            passed,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{status} {}: {:.6e} {op} {:.6e}",
            self.name, self.measured, self.threshold
        );
        if !self.note.is_empty() {
            s.push_str(&format!(" ({})", self.note));
        }
        s
    }
}

/// Tabular measurements; every row has one value per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub anchor: String,
    pub columns: Vec<String>,
    #[serde(with = "lenient::rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, anchor: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "series {} row width",
            self.name
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Header line plus one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| {
                    if v.is_finite() {
                        format!("{v}")
                    } else {
                        String::new()
                    }
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            suite: config.experiment.name().to_string(),
            seed: config.seed,
            config: config.clone(),
            checks: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn add_series(&mut self, series: Series) {
        self.series.push(series);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("suite {} (seed {})\n", self.suite, self.seed);
        for c in &self.checks {
            out.push_str("  ");
            out.push_str(&c.line());
            out.push('\n');
        }
        out
    }
}

/// Writes `<suite>.json` and `<suite>_<series>.csv` files into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut written = Vec::new();
    let json_path = dir.join(format!("{}.json", report.suite));
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    written.push(json_path);
    for s in &report.series {
        let path = dir.join(format!("{}_{}.csv", report.suite, s.name));
        fs::write(&path, s.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Suite;

    fn sample() -> Report {
        let mut r = Report::new(&ExperimentConfig::defaults(Suite::Weights));
        r.check(Check::at_most(
            "small",
            "A_p of a constant is 1",
            1e-12,
            1e-9,
        ));
        r.check(Check::at_least("finite", "growth", f64::NAN, 0.0).with_note("overflow"));
        let mut s = Series::new("fit", "growth law", &["size", "value"]);
        s.push(vec![0.25, 1.5]);
        s.push(vec![1.0, f64::NAN]);
        r.add_series(s);
        r
    }

    #[test]
    fn schema_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        let files = emit_report(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let back = read_report(&files[0]).unwrap();
        assert_eq!(back.checks[0], r.checks[0]);
        assert!(back.checks[1].measured.is_nan());
        assert_eq!(back.series[0].rows[0], vec![0.25, 1.5]);
        assert!(back.series[0].rows[1][1].is_nan());
        assert_eq!(back.config, r.config);
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let r = sample();
        let csv = r.series[0].to_csv();
        assert_eq!(csv.lines().count(), 1 + r.series[0].rows.len());
        assert_eq!(csv.lines().next().unwrap(), "size,value");
        assert_eq!(csv.lines().nth(2).unwrap(), "1,");
    }

    #[test]
    fn emitted_files_are_deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = emit_report(&sample(), a.path()).unwrap();
        let fb = emit_report(&sample(), b.path()).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn failing_check_fails_the_report() {
        let r = sample();
        assert!(r.checks[0].passed);
        assert!(!r.passed());
        assert!(r.summary().contains("PASS small"));
    }
}
