use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    /// Boolean check recorded as 1 (true) or 0 (false).
    Holds,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `None` when the quantity is not a finite number, e.g. after an error.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub name: String,
    pub command: String,
    pub version: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Solver and reconstruction statistics, keyed by stage.
    pub statistics: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunReport>,
}

impl RunReport {
    pub fn new(name: &str, command: &str) -> Self {
        RunReport {
            name: name.into(),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            pass: true,
            ..Default::default()
        }
    }

    fn push(&mut self, name: String, value: f64, tolerance: f64, comparison: Comparison, detail: Option<String>) {
        let finite = value.is_finite();
        let pass = finite
            && match comparison {
                Comparison::AtMost => value <= tolerance,
                Comparison::AtLeast => value >= tolerance,
                Comparison::Holds => value == 1.0,
            };
        self.checks.push(Check { name, value: finite.then_some(value), tolerance, comparison, pass, detail });
        self.pass &= pass;
    }

    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.push(name.into(), value, tolerance, Comparison::AtMost, None);
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.push(name.into(), value, tolerance, Comparison::AtLeast, None);
    }

    pub fn holds(&mut self, name: impl Into<String>, ok: bool) {
        self.push(name.into(), if ok { 1.0 } else { 0.0 }, 1.0, Comparison::Holds, None);
    }

    /// A failed stage, with the error message kept as the diagnostic.
    pub fn failure(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.push(name.into(), f64::NAN, 1.0, Comparison::Holds, Some(detail.into()));
    }

    pub fn stat(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.statistics.insert(key.into(), v);
    }

    /// Apply tolerance replacements keyed by check name and re-derive passes.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, f64>) {
        if overrides.is_empty() {
            return;
        }
        let checks = std::mem::take(&mut self.checks);
        self.pass = true;
        for c in checks {
            let tol = overrides.get(&c.name).copied().unwrap_or(c.tolerance);
            self.push(c.name, c.value.unwrap_or(f64::NAN), tol, c.comparison, c.detail);
        }
        for r in &self.runs {
            self.pass &= r.pass;
        }
    }

    pub fn add_run(&mut self, run: RunReport) {
        self.pass &= run.pass;
        self.runs.push(run);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        self.write_summary(&mut out, 0);
        out
    }

    fn write_summary(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        out.push_str(&format!("{pad}{} {} ({})\n", if self.pass { "PASS" } else { "FAIL" }, self.name, self.command));
        for c in &self.checks {
            let v = c.value.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
            let rel = match c.comparison {
                Comparison::AtMost => format!("<= {:e}", c.tolerance),
                Comparison::AtLeast => format!(">= {}", c.tolerance),
                Comparison::Holds => "holds".into(),
            };
            out.push_str(&format!("{pad}  [{}] {} = {v} ({rel})", if c.pass { "ok" } else { "xx" }, c.name));
            if let Some(d) = &c.detail {
                out.push_str(&format!(" — {d}"));
            }
            out.push('\n');
        }
        for r in &self.runs {
            r.write_summary(out, depth + 1);
        }
    }
}
