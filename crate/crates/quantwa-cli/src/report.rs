//! Machine-readable report documents.

use std::collections::BTreeMap;
use std::path::Path;

use quantwa::format::ModelDocument;
use quantwa::{rational, ApproxReport, Bound, ExtendedValue, Parameters, Rational};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Debug)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Answer {
    Finite { value: String, decimal: f64 },
    Infinite,
}

impl From<&ExtendedValue> for Answer {
    fn from(v: &ExtendedValue) -> Self {
        match v {
            ExtendedValue::Finite(x) => Answer::Finite { value: rational::format(x), decimal: rational::to_f64(x) },
            ExtendedValue::Infinite => Answer::Infinite,
        }
    }
}

#[derive(Serialize, Debug)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundDoc {
    Exact,
    /// The answer is within `epsilon` of the true value.
    Absolute {
        epsilon: String,
    },
    /// The true value lies in `[lower, upper]`.
    Window {
        lower: String,
        upper: String,
    },
    /// The answer lies in `[D(λ−ε)−ε, D(λ+ε)+ε]`.
    Skorokhod {
        epsilon: String,
    },
}

impl From<&Bound> for BoundDoc {
    fn from(b: &Bound) -> Self {
        match b {
            Bound::Exact => BoundDoc::Exact,
            Bound::Absolute(e) => BoundDoc::Absolute { epsilon: rational::format(e) },
            Bound::Window { lower, upper } => {
                BoundDoc::Window { lower: rational::format(lower), upper: rational::format(upper) }
            }
            Bound::Skorokhod(e) => BoundDoc::Skorokhod { epsilon: rational::format(e) },
        }
    }
}

#[derive(Serialize, Debug)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Serialize, Debug)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub question: String,
    pub model: String,
    pub value_function: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundDoc>,
    /// Sampled statistics, in place of an answer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Value>,
    pub parameters: BTreeMap<&'static str, Value>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
    pub timing: Timing,
}

impl ReportDocument {
    pub fn new(question: impl Into<String>, path: &Path, doc: &ModelDocument) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            question: question.into(),
            model: path.display().to_string(),
            value_function: doc.automaton.value_fn().name(),
            answer: None,
            bound: None,
            estimate: None,
            parameters: BTreeMap::new(),
            warnings: Vec::new(),
            details: Value::Null,
            timing: Timing { seconds: 0.0 },
        }
    }

    pub fn exact(mut self, value: &ExtendedValue) -> Self {
        self.answer = Some(value.into());
        self.bound = Some(BoundDoc::Exact);
        self
    }

    pub fn approx(mut self, r: &ApproxReport) -> Self {
        self.answer = Some((&r.value).into());
        self.bound = Some((&r.bound).into());
        self.warnings.extend(r.warnings.iter().cloned());
        self.add_parameters(&r.params);
        self
    }

    pub fn param(&mut self, key: &'static str, value: impl Into<Value>) {
        self.parameters.insert(key, value.into());
    }

    pub fn add_parameters(&mut self, p: &Parameters) {
        let mut put = |k: &'static str, v: &Option<Rational>| {
            if let Some(x) = v {
                self.parameters.insert(k, Value::String(rational::format(x)));
            }
        };
        put("epsilon", &p.epsilon);
        put("lambda", &p.lambda);
        put("tail", &p.tail);
        put("epsilon0", &p.epsilon0);
        if let Some(k) = p.k {
            self.param("k", k);
        }
        if let Some(n) = p.cutoff {
            self.param("cutoff", n);
        }
        if let Some(s) = p.seed {
            self.param("seed", s);
        }
    }
}

pub fn rat(x: &Rational) -> Value {
    Value::String(rational::format(x))
}

pub fn value(v: &ExtendedValue) -> Value {
    Value::String(v.to_string())
}

#[cfg(test)]
mod tests {
    use quantwa::rational::ratio;
    use serde_json::json;

    use super::*;

    #[test]
    fn answers_and_bounds_serialize_with_kind_tags() {
        let a = Answer::from(&ExtendedValue::Finite(ratio(-1, 3)));
        assert_eq!(serde_json::to_value(a).unwrap()["value"], "-1/3");
        assert_eq!(serde_json::to_value(Answer::Infinite).unwrap(), json!({ "kind": "infinite" }));
        assert_eq!(serde_json::to_value(BoundDoc::from(&Bound::Exact)).unwrap(), json!({ "kind": "exact" }));
        let w = Bound::Window { lower: ratio(1, 4), upper: ratio(1, 2) };
        assert_eq!(
            serde_json::to_value(BoundDoc::from(&w)).unwrap(),
            json!({ "kind": "window", "lower": "1/4", "upper": "1/2" })
        );
    }

    #[test]
    fn absent_parameters_are_omitted() {
        let doc = quantwa::format::parse_model(
            "wqa 1\nalphabet a\nautomaton\nvalue sup\nstates q\ninitial q\naccepting\ntrans q a q 1 1\n\
             chain\nstates s\ninitial s\nterminal\nedge s a s 1 1\nend\n",
        )
        .unwrap();
        let mut r = ReportDocument::new("x", Path::new("m.wqa"), &doc);
        r.add_parameters(&Parameters { epsilon: Some(ratio(1, 8)), ..Default::default() });
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["parameters"], json!({ "epsilon": "1/8" }));
        assert_eq!(v["value_function"], "sup");
        assert!(v.get("answer").is_none() && v.get("details").is_none());
    }
}
