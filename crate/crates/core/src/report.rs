//! Check reports: one record per verified clause.

use serde::{Serialize, Serializer};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub check: String,
    pub pass: bool,
    #[serde(serialize_with = "finite_or_string")]
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

fn finite_or_string<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&x.to_string())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(transparent)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `residual <= bound` under `label`.
    pub fn bound(&mut self, label: impl Into<String>, residual: f64, bound: f64) -> bool {
        let pass = residual.is_finite() && residual <= bound;
        self.checks.push(Check {
            check: label.into(),
            pass,
            residual,
            witness: None,
        });
        pass
    }

    pub fn bound_with(
        &mut self,
        label: impl Into<String>,
        residual: f64,
        bound: f64,
        witness: serde_json::Value,
    ) -> bool {
        let pass = self.bound(label, residual, bound);
        self.checks.last_mut().expect("just pushed").witness = Some(witness);
        pass
    }

    /// Records a slack that must stay above `-bound` (eigenvalue floors).
    pub fn floor(&mut self, label: impl Into<String>, slack: f64, bound: f64) -> bool {
        let pass = slack.is_finite() && slack >= -bound;
        self.checks.push(Check {
            check: label.into(),
            pass,
            residual: slack,
            witness: None,
        });
        pass
    }

    pub fn flag(&mut self, label: impl Into<String>, pass: bool, witness: Option<serde_json::Value>) {
        self.checks.push(Check {
            check: label.into(),
            pass,
            residual: if pass { 0.0 } else { 1.0 },
            witness,
        });
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.check = format!("{prefix}{}", c.check);
            self.checks.push(c);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn get(&self, label: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.check == label)
    }

    /// Largest residual among checks whose label starts with `prefix`.
    pub fn max_residual(&self, prefix: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.check.starts_with(prefix))
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    /// Stable order for serialization.
    pub fn sorted(mut self) -> Self {
        self.checks.sort_by(|a, b| a.check.cmp(&b.check));
        self
    }

    pub fn summary(&self) -> String {
        let f: Vec<String> = self.failures().iter().map(|c| c.check.clone()).collect();
        if f.is_empty() {
            format!("{} checks passed", self.checks.len())
        } else {
            format!("{} of {} checks failed: {}", f.len(), self.checks.len(), f.join(", "))
        }
    }
}
