use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// `null` when the check has no scalar residual or it is not finite.
    pub residual: Option<f64>,
    pub details: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, residual: Option<f64>, details: impl Into<String>) -> Self {
        Check { name: name.into(), pass, residual: residual.filter(|r| r.is_finite()), details: details.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub input_digest: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub observations: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str, input: &[u8], seed: u64) -> Self {
        Report {
            command: command.into(),
            input_digest: digest(input),
            seed,
            checks: Vec::new(),
            passed: true,
            observations: Map::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.pass;
        self.checks.push(check);
    }

    pub fn observe(&mut self, key: &str, value: impl Into<Value>) {
        self.observations.insert(key.into(), value.into());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON number, or `null` for non-finite values.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}
