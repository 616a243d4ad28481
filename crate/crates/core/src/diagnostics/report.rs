use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    /// Present for Monte Carlo based checks.
    pub standard_error: Option<f64>,
    pub pass: bool,
    pub metadata: BTreeMap<String, Value>,
}

impl CheckReport {
    /// Passes iff `statistic <= threshold`.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            standard_error: None,
            pass: statistic <= threshold,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_standard_error(mut self, se: f64) -> Self {
        self.standard_error = Some(se);
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.metadata
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }
}

/// A suite of checks, serialized as a JSON array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckReport>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, check: CheckReport) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = CheckReport>) {
        self.checks.extend(checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Fixed-width summary, one line per check.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}  {:>10}  result", "check", "statistic", "threshold", "std.err");
        for c in &self.checks {
            let se = c.standard_error.map_or_else(|| "-".to_string(), |s| format!("{s:.3e}"));
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.4e}  {:>12.4e}  {:>10}  {}",
                c.name,
                c.statistic,
                c.threshold,
                se,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

/// `|d| / se`, with `0/0 = 0` for exactly matching deterministic sides.
pub(crate) fn standardized(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff.abs() / se
    } else {
        f64::INFINITY
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn table_and_json() {
        let mut r = DiagnosticsReport::default();
        r.push(CheckReport::at_most("a", 0.5, 1.0).with_meta("seed", 3));
        r.push(CheckReport::at_most("b", 2.0, 1.0).with_standard_error(0.1));
        assert!(!r.all_pass());
        let t = r.table();
        assert!(t.contains("PASS") && t.contains("FAIL"));
        let back: DiagnosticsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(standardized(0.0, 0.0), 0.0);
        assert!(standardized(1.0, 0.0).is_infinite());
    }
}
