use std::fmt::Write as _;

use serde::Serialize;

use crate::error::FieldError;

/// One named check. `status` is "pass" iff `defect <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: String,
    pub defect: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, defect: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        // non-finite defects are reported as the largest finite value
        let defect = if defect.is_finite() { defect } else { f64::MAX };
        CheckResult {
            name: name.to_string(),
            status: if defect <= tolerance { "pass" } else { "fail" }.to_string(),
            defect,
            tolerance,
            detail: detail.into(),
        }
    }

    /// A check whose computation itself failed.
    pub fn errored(name: &str, tolerance: f64, err: &FieldError) -> Self {
        CheckResult::new(name, f64::MAX, tolerance, err.to_string())
    }

    pub fn from_result(name: &str, tolerance: f64, r: crate::Result<f64>, detail: &str) -> Self {
        match r {
            Ok(d) => CheckResult::new(name, d, tolerance, detail),
            Err(e) => CheckResult::errored(name, tolerance, &e),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub model: String,
    pub checks: Vec<CheckResult>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are finite")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.command, self.model);
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let _ = write!(s, "  {:<w$}  {}  defect {:.3e}  tol {:.1e}", c.name, c.status, c.defect, c.tolerance);
            if !c.detail.is_empty() {
                let _ = write!(s, "  ({})", c.detail);
            }
            s.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        let _ = writeln!(
            s,
            "{} of {} checks passed in {:.3} s",
            self.checks.len() - failed,
            self.checks.len(),
            self.wall_time_s
        );
        s
    }
}

/// Column-oriented table written as CSV with a header row and LF endings.
/// Missing cells (residuals at boundary nodes) are left empty.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                if let Some(v) = v {
                    let _ = write!(s, "{v}");
                }
            }
            s.push('\n');
        }
        s
    }

    /// Largest absolute value over the columns whose name starts with `prefix`.
    pub fn max_abs(&self, prefix: &str) -> f64 {
        let cols: Vec<usize> =
            self.header.iter().enumerate().filter(|(_, h)| h.starts_with(prefix)).map(|(i, _)| i).collect();
        self.rows
            .iter()
            .flat_map(|r| cols.iter().filter_map(move |&c| r[c]))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
