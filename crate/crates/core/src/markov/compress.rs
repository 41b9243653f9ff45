use std::collections::BTreeMap;

use super::{MarkovChain, MarkovError, StateId};

/// Transitions lighter than this after rewiring are dropped and the
/// remaining weights of that state renormalized.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// How the weight of a removed self-loop is handed to the remaining
/// outgoing edges of a bypassed state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SelfLoopPolicy {
    /// Each of the `k` remaining edges gains `w / k`.
    #[default]
    Equal,
    /// Each remaining edge `b` becomes `b / (1 - w)`.
    Proportional,
}

impl std::str::FromStr for SelfLoopPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "equal" => Ok(SelfLoopPolicy::Equal),
            "proportional" => Ok(SelfLoopPolicy::Proportional),
            _ => Err(format!("unknown self-loop policy `{s}` (equal|proportional)")),
        }
    }
}

impl std::fmt::Display for SelfLoopPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelfLoopPolicy::Equal => "equal",
            SelfLoopPolicy::Proportional => "proportional",
        })
    }
}

/// Result of compressing a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Compression {
    pub chain: MarkovChain,
    /// Empty states kept because their only outgoing edge is a self-loop.
    pub stuck: Vec<StateId>,
}

impl MarkovChain {
    /// Removes the empty state `id`, rewiring each predecessor to the
    /// state's successors with multiplied probabilities.
    pub fn bypass(&mut self, id: StateId, policy: SelfLoopPolicy) -> Result<(), MarkovError> {
        let state = self.states.get(&id).ok_or(MarkovError::UnknownState(id))?;
        if !state.is_empty() {
            return Err(MarkovError::NotBypassable { state: id, reason: "state has accesses" });
        }
        if state.is_initial || state.is_final {
            return Err(MarkovError::NotBypassable { state: id, reason: "initial and final states are kept" });
        }
        let mut outgoing = state.outgoing.clone();
        if let Some(w) = outgoing.remove(&id) {
            let k = outgoing.len();
            if k == 0 {
                return Err(MarkovError::NotBypassable { state: id, reason: "only outgoing edge is a self-loop" });
            }
            match policy {
                SelfLoopPolicy::Equal => {
                    let share = w / k as f64;
                    outgoing.values_mut().for_each(|b| *b += share);
                }
                SelfLoopPolicy::Proportional => {
                    let rest = 1.0 - w;
                    if rest <= 0.0 {
                        return Err(MarkovError::NotBypassable { state: id, reason: "self-loop carries all mass" });
                    }
                    outgoing.values_mut().for_each(|b| *b /= rest);
                }
            }
        }

        let preds: Vec<StateId> = self
            .states
            .iter()
            .filter(|(p, s)| **p != id && s.outgoing.contains_key(&id))
            .map(|(p, _)| *p)
            .collect();
        for p in preds {
            let pred = self.states.get_mut(&p).expect("predecessor exists");
            let a = pred.outgoing.remove(&id).expect("edge into bypassed state");
            for (&t, &b) in &outgoing {
                *pred.outgoing.entry(t).or_insert(0.0) += a * b;
            }
            prune(&mut pred.outgoing);
        }
        self.states.remove(&id);
        Ok(())
    }
}

fn prune(outgoing: &mut BTreeMap<StateId, f64>) {
    let before = outgoing.len();
    outgoing.retain(|_, w| *w >= PRUNE_THRESHOLD);
    if outgoing.len() != before {
        let sum: f64 = outgoing.values().sum();
        if sum > 0.0 {
            outgoing.values_mut().for_each(|w| *w /= sum);
        }
    }
}

/// Bypasses every empty non-initial, non-final state in ascending id order.
/// States that cannot be bypassed (self-loop only) are kept and reported.
pub fn compress(chain: &MarkovChain, policy: SelfLoopPolicy) -> Compression {
    let mut work = chain.clone();
    let mut stuck = Vec::new();
    loop {
        let next = work
            .states
            .keys()
            .copied()
            .find(|&id| work.is_bypass_candidate(id) && !stuck.contains(&id));
        let Some(id) = next else { break };
        if work.bypass(id, policy).is_err() {
            stuck.push(id);
        }
    }
    Compression { chain: work, stuck }
}
