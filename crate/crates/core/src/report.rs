use std::fmt::Write as _;

use crate::algebra::Series;

/// One identity that was checked, with its nonzero residuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub identity: String,
    pub residuals: Vec<(String, Series)>,
    /// Violations that are not series (shape or invertibility failures).
    pub failures: Vec<String>,
}

impl Check {
    pub fn new(identity: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            residuals: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Records `value` under `label` when it is nonzero.
    pub fn residual(&mut self, label: impl Into<String>, value: Series) {
        if !value.is_zero() {
            self.residuals.push((label.into(), value));
        }
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.failures.push(message.into());
    }

    pub fn passed(&self) -> bool {
        self.residuals.is_empty() && self.failures.is_empty()
    }
}

/// Plain-text report with a `key=value` trailer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub facts: Vec<(String, String)>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn fact(&mut self, key: impl Into<String>, value: impl ToString) {
        self.facts.push((key.into(), value.to_string()));
    }

    pub fn merge(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.facts.extend(other.facts);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn nonzero_residuals(&self) -> usize {
        self.checks.iter().map(|c| c.residuals.len()).sum()
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    /// Short description of the first failing identity.
    pub fn first_violation(&self) -> Option<String> {
        let c = self.checks.iter().find(|c| !c.passed())?;
        let detail = c
            .failures
            .first()
            .cloned()
            .or_else(|| c.residuals.first().map(|(l, r)| format!("{l}: {r}")))
            .unwrap_or_default();
        Some(format!("{} fails: {detail}", c.identity))
    }

    pub fn find(&self, identity: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.identity == identity)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let passing = self.checks.iter().filter(|c| c.passed()).count();
        for c in self.checks.iter().filter(|c| !c.passed()) {
            let _ = writeln!(out, "FAIL {}", c.identity);
            for f in &c.failures {
                let _ = writeln!(out, "  {f}");
            }
            for (label, r) in &c.residuals {
                let _ = writeln!(out, "  {label}: {r}");
            }
        }
        let _ = writeln!(out, "{passing} of {} identities hold", self.checks.len());
        let _ = writeln!(out, "{} nonzero residuals", self.nonzero_residuals());
        for c in self.checks.iter().filter(|c| c.passed()) {
            let _ = writeln!(out, "ok {}", c.identity);
        }
        let _ = writeln!(out, "--");
        for (k, v) in &self.facts {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "checks={}", self.checks.len());
        let _ = writeln!(out, "violations={}", self.violations());
        let _ = writeln!(out, "nonzero_residuals={}", self.nonzero_residuals());
        let _ = writeln!(out, "status={}", if self.passed() { "pass" } else { "fail" });
        out
    }
}
