//! Compressed Markov-chain models of field-access behaviour.
//!
//! One state is created per basic block, holding that block's field accesses
//! in instruction order. Transitions carry the branch probabilities from the
//! weighted CFG. Compression then bypasses every empty state except the
//! initial and final ones, folding its probability mass into its neighbours.

mod compress;
mod json;
mod walk;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::cfg::{self, BlockKind, Cfg, EdgeWeights, ProfileData, StaticWeightPolicy};
use crate::ir::{MethodDef, MethodId, OOAccess, Program};

pub use compress::{compress, Compression, SelfLoopPolicy, PRUNE_THRESHOLD};
pub use json::{model_from_json, model_to_json};
pub use walk::{estimate_first_passage, WalkEstimate};

pub type StateId = usize;

/// Tolerance for per-state stochasticity of in-memory chains.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("state {0} does not exist")]
    UnknownState(StateId),
    #[error("state {state} cannot be bypassed: {reason}")]
    NotBypassable { state: StateId, reason: &'static str },
    #[error("malformed model document: {0}")]
    Json(String),
    #[error("model schema violation: {0}")]
    Schema(String),
    #[error("state {state} outgoing weights sum to {sum}, not 1")]
    NotStochastic { state: StateId, sum: f64 },
    #[error(transparent)]
    Cfg(#[from] cfg::CfgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovState {
    pub id: StateId,
    pub accesses: Vec<OOAccess>,
    /// Target state to transition probability.
    pub outgoing: BTreeMap<StateId, f64>,
    pub is_initial: bool,
    pub is_final: bool,
}

impl MarkovState {
    pub fn is_empty(&self) -> bool {
        self.accesses.is_empty()
    }

    pub fn outgoing_sum(&self) -> f64 {
        self.outgoing.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub method: MethodId,
    pub states: BTreeMap<StateId, MarkovState>,
    pub initial: StateId,
    pub finals: Vec<StateId>,
}

impl MarkovChain {
    pub fn state(&self, id: StateId) -> Option<&MarkovState> {
        self.states.get(&id)
    }

    pub fn weight(&self, from: StateId, to: StateId) -> f64 {
        self.states
            .get(&from)
            .and_then(|s| s.outgoing.get(&to))
            .copied()
            .unwrap_or(0.0)
    }

    /// Total number of accesses across all states.
    pub fn num_accesses(&self) -> usize {
        self.states.values().map(|s| s.accesses.len()).sum()
    }

    /// Empty, neither initial nor final.
    pub fn is_bypass_candidate(&self, id: StateId) -> bool {
        self.states
            .get(&id)
            .is_some_and(|s| s.is_empty() && !s.is_initial && !s.is_final)
    }

    /// States with no path from the initial state.
    pub fn unreachable_states(&self) -> Vec<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(s) = queue.pop_front() {
            if let Some(st) = self.states.get(&s) {
                for &t in st.outgoing.keys() {
                    if seen.insert(t) {
                        queue.push_back(t);
                    }
                }
            }
        }
        self.states.keys().filter(|id| !seen.contains(id)).copied().collect()
    }

    /// Checks every structural invariant; `tolerance` bounds the deviation
    /// of each non-empty outgoing distribution from 1.
    pub fn check(&self, tolerance: f64) -> Result<(), MarkovError> {
        if !self.states.contains_key(&self.initial) {
            return Err(MarkovError::Schema(format!("initial state {} missing", self.initial)));
        }
        if self.finals.is_empty() {
            return Err(MarkovError::Schema("no final state".into()));
        }
        for f in &self.finals {
            if !self.states.contains_key(f) {
                return Err(MarkovError::Schema(format!("final state {f} missing")));
            }
        }
        for (id, s) in &self.states {
            if s.id != *id {
                return Err(MarkovError::Schema(format!("state keyed {id} has id {}", s.id)));
            }
            if s.is_initial != (*id == self.initial) || s.is_final != self.finals.contains(id) {
                return Err(MarkovError::Schema(format!("state {id} has inconsistent initial/final flags")));
            }
            for a in &s.accesses {
                if a.class_name.is_empty() || a.field_name.is_empty() || a.value_type.is_empty() {
                    return Err(MarkovError::Schema(format!("state {id} has an access with an empty attribute")));
                }
            }
            for (t, w) in &s.outgoing {
                if !self.states.contains_key(t) {
                    return Err(MarkovError::Schema(format!("transition {id}->{t} targets a missing state")));
                }
                if !(w.is_finite() && *w > 0.0) {
                    return Err(MarkovError::Schema(format!("transition {id}->{t} has weight {w}")));
                }
            }
            if !s.outgoing.is_empty() {
                let sum = s.outgoing_sum();
                if (sum - 1.0).abs() > tolerance {
                    return Err(MarkovError::NotStochastic { state: *id, sum });
                }
            }
        }
        if let Some(&dead) = self.unreachable_states().first() {
            return Err(MarkovError::Schema(format!("state {dead} unreachable from initial state")));
        }
        Ok(())
    }
}

/// One state per CFG block carrying its accesses; transitions mirror the CFG
/// edges with the given weights. No compression is applied.
pub fn build_chain(program: &Program, cfg: &Cfg, weights: &EdgeWeights) -> MarkovChain {
    let method = program.method(&cfg.method);
    let mut states = BTreeMap::new();
    for b in &cfg.blocks {
        let accesses = match (method, b.kind) {
            (Some(m), BlockKind::Ordinary) => m.instructions[b.range.clone()]
                .iter()
                .filter_map(|i| program.oo_access(i))
                .collect(),
            _ => Vec::new(),
        };
        let outgoing = cfg
            .successors(b.id)
            .filter_map(|e| weights.get(&(e.src, e.dst)).map(|&w| (e.dst, w)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        states.insert(
            b.id,
            MarkovState {
                id: b.id,
                accesses,
                outgoing,
                is_initial: b.kind == BlockKind::Entry,
                is_final: b.kind == BlockKind::Exit,
            },
        );
    }
    MarkovChain {
        method: cfg.method.clone(),
        states,
        initial: cfg.entry(),
        finals: vec![cfg.exit()],
    }
}

/// Options for turning a method into a compressed model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelOptions {
    pub policy: StaticWeightPolicy,
    pub selfloop: SelfLoopPolicy,
}

/// CFG, weights, chain construction and compression in one step.
pub fn build_model(
    program: &Program,
    method: &MethodDef,
    profile: Option<&ProfileData>,
    opts: ModelOptions,
) -> Result<Compression, MarkovError> {
    let mut graph = cfg::build_cfg(method);
    if let Some(p) = profile {
        graph.attach_profile(p)?;
    }
    let weights = cfg::edge_weights(&graph, profile, opts.policy)?;
    let chain = build_chain(program, &graph, &weights);
    Ok(compress(&chain, opts.selfloop))
}
