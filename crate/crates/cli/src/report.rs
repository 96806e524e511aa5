//! JSON encoding helpers.

use serde_json::{json, Value};

use puzzlekit::{Angle, Complex64, Error, Label, Portrait};

pub const SCHEMA: &str = "puzzlekit-report/1";

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Finite floats rounded for output; non-finite ones become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::Null
    }
}

pub fn complex_json(z: Complex64) -> Value {
    json!([num(z.re), num(z.im)])
}

pub fn angle_json(t: &Angle) -> Value {
    json!(t.to_string())
}

pub fn label_json(l: &Label) -> Value {
    json!({
        "depth": l.depth,
        "arcs": l.arcs.iter().map(|a| json!([angle_json(&a.start), angle_json(&a.end())])).collect::<Vec<_>>(),
    })
}

pub fn portrait_json(p: &Portrait) -> Value {
    json!({
        "degree": p.degree,
        "q": p.q(),
        "angles": p.angles.iter().map(angle_json).collect::<Vec<_>>(),
        "rotation": format!("{}/{}", p.rotation.0, p.rotation.1),
    })
}

/// A non-fatal event, tagged with the operation and budget behind it.
#[derive(Clone, Debug)]
pub struct Warning {
    pub kind: String,
    pub operation: String,
    pub budget: Value,
    pub message: String,
}

impl Warning {
    pub fn new(kind: &str, operation: &str, budget: Value, message: String) -> Self {
        Warning {
            kind: kind.into(),
            operation: operation.into(),
            budget,
            message,
        }
    }

    pub fn from_error(e: &Error, operation: &str, budget: Value) -> Self {
        let budget = match e {
            Error::BudgetExhausted { budget, .. } => json!(budget),
            _ => budget,
        };
        Warning::new(e.kind(), operation, budget, e.to_string())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "kind": self.kind,
            "operation": self.operation,
            "budget": self.budget,
            "message": self.message,
        })
    }
}
