//! Model documents: one JSON object per method.
//!
//! ```json
//! { "method": "A.m", "initial": 0, "finals": [5],
//!   "states": [ { "id": 0, "accesses": [{"class": "A", "field": "x", "type": "int"}],
//!                 "transitions": [{"target": 3, "weight": 1.0000000000000000e0}] } ] }
//! ```
//!
//! Weights are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use super::{MarkovChain, MarkovError, MarkovState, StateId};
use crate::ir::{MethodId, OOAccess};

/// Stochasticity tolerance applied when loading a document.
pub const LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    method: String,
    initial: StateId,
    finals: Vec<StateId>,
    states: Vec<StateDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    id: StateId,
    accesses: Vec<OOAccess>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    target: StateId,
    #[serde(serialize_with = "full_precision")]
    weight: f64,
}

fn full_precision<S: Serializer>(w: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !w.is_finite() {
        return Err(serde::ser::Error::custom(format!("non-finite weight {w}")));
    }
    let raw = RawValue::from_string(format!("{w:.16e}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

pub fn model_to_json(chain: &MarkovChain) -> String {
    let doc = ModelDoc {
        method: chain.method.to_string(),
        initial: chain.initial,
        finals: chain.finals.clone(),
        states: chain
            .states
            .values()
            .map(|s| StateDoc {
                id: s.id,
                accesses: s.accesses.clone(),
                transitions: s
                    .outgoing
                    .iter()
                    .map(|(&target, &weight)| TransitionDoc { target, weight })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model documents always serialize");
    text.push('\n');
    text
}

pub fn model_from_json(text: &str) -> Result<MarkovChain, MarkovError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => MarkovError::Schema(e.to_string()),
        _ => MarkovError::Json(e.to_string()),
    })?;
    let method: MethodId = doc.method.parse().map_err(MarkovError::Schema)?;
    let mut states = BTreeMap::new();
    for s in doc.states {
        let mut outgoing = BTreeMap::new();
        for t in s.transitions {
            if outgoing.insert(t.target, t.weight).is_some() {
                return Err(MarkovError::Schema(format!("duplicate transition {}->{}", s.id, t.target)));
            }
        }
        let state = MarkovState {
            id: s.id,
            accesses: s.accesses,
            outgoing,
            is_initial: s.id == doc.initial,
            is_final: doc.finals.contains(&s.id),
        };
        if states.insert(s.id, state).is_some() {
            return Err(MarkovError::Schema(format!("duplicate state id {}", s.id)));
        }
    }
    let chain = MarkovChain { method, states, initial: doc.initial, finals: doc.finals };
    chain.check(LOAD_TOLERANCE)?;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
  "method": "A.m",
  "initial": 0,
  "finals": [2],
  "states": [
    {"id": 0, "accesses": [], "transitions": [{"target": 1, "weight": 1.0}]},
    {"id": 1, "accesses": [{"class": "A", "field": "x", "type": "int"}],
     "transitions": [{"target": 1, "weight": 0.9}, {"target": 2, "weight": 0.1}]},
    {"id": 2, "accesses": [], "transitions": []}
  ]
}"#;

    #[test]
    fn loads_and_round_trips() {
        let chain = model_from_json(DOC).unwrap();
        assert_eq!(chain.weight(1, 1), 0.9);
        let text = model_to_json(&chain);
        assert!(text.contains("9.0000000000000002e-1"), "{text}");
        assert_eq!(model_from_json(&text).unwrap(), chain);
    }

    #[test]
    fn missing_initial_is_a_schema_error() {
        let doc = DOC.replace("\"initial\": 0,", "");
        assert!(matches!(model_from_json(&doc), Err(MarkovError::Schema(m)) if m.contains("initial")));
    }

    #[test]
    fn non_stochastic_state_is_rejected() {
        let doc = DOC.replace("\"weight\": 1.0", "\"weight\": 0.5");
        assert!(matches!(model_from_json(&doc), Err(MarkovError::NotStochastic { state: 0, .. })));
    }

    #[test]
    fn malformed_document() {
        assert!(matches!(model_from_json("{\"method\": "), Err(MarkovError::Json(_))));
        let doc = DOC.replace("\"target\": 2", "\"target\": 7");
        assert!(matches!(model_from_json(&doc), Err(MarkovError::Schema(_))));
    }
}
