//! Machine-readable reports: a list of named checks plus free-form results.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `|value| <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, tolerance, pass: value.abs() <= tolerance }
    }

    /// Passes when `value >= -tolerance`.
    pub fn at_least_minus(name: &str, value: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, tolerance, pass: value >= -tolerance }
    }

    /// Passes when `value > 0`.
    pub fn positive(name: &str, value: f64) -> Check {
        Check { name: name.into(), value, tolerance: 0.0, pass: value > 0.0 }
    }

    /// Passes when `|value - target| <= tolerance`.
    pub fn near(name: &str, value: f64, target: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, tolerance, pass: (value - target).abs() <= tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub result: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, checks: Vec<Check>, result: serde_json::Value) -> Report {
        let pass = checks.iter().all(|c| c.pass);
        Report { command: command.into(), pass, checks, result }
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}\n", self.command, if self.pass { "ok" } else { "FAILED" });
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {} = {:.6e} (tolerance {:.1e})\n",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            ));
        }
        s
    }
}
