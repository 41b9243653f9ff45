use std::collections::{BTreeSet, HashMap};

use crate::interp::TraceEvent;
use crate::markov::MarkovChain;

/// Maximum number of simultaneously active configurations.
pub const DEFAULT_CONFIG_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOptions {
    pub config_cap: usize,
    /// Require a final configuration among those produced by the last
    /// matched access (or the start configuration), without any trailing
    /// transitions.
    pub strict_termination: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { config_cap: DEFAULT_CONFIG_CAP, strict_termination: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvocationResult {
    pub matched: usize,
    pub skipped: usize,
    pub terminated: bool,
    /// The configuration set overflowed at some step.
    pub capped: bool,
}

/// `(dense state index, offset into its access list)`
type Config = (usize, usize);

/// A model compiled for repeated matching: dense state indices in state-id
/// order and interned `(class, field)` symbols.
#[derive(Debug, Clone)]
pub struct Matcher {
    /// class -> field -> symbol
    symbols: HashMap<String, HashMap<String, u32>>,
    accesses: Vec<Vec<u32>>,
    succ: Vec<Vec<usize>>,
    is_final: Vec<bool>,
    initial: usize,
}

impl Matcher {
    pub fn new(chain: &MarkovChain) -> Self {
        let dense: HashMap<usize, usize> = chain.states.keys().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut symbols: HashMap<String, HashMap<String, u32>> = HashMap::new();
        let mut next = 0u32;
        let mut accesses = Vec::with_capacity(chain.states.len());
        let mut succ = Vec::with_capacity(chain.states.len());
        let mut is_final = Vec::with_capacity(chain.states.len());
        for s in chain.states.values() {
            accesses.push(
                s.accesses
                    .iter()
                    .map(|a| {
                        let fields = symbols.entry(a.class_name.clone()).or_default();
                        *fields.entry(a.field_name.clone()).or_insert_with(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect(),
            );
            succ.push(s.outgoing.iter().filter(|(_, w)| **w > 0.0).map(|(t, _)| dense[t]).collect());
            is_final.push(s.is_final);
        }
        Matcher { symbols, accesses, succ, is_final, initial: dense[&chain.initial] }
    }

    fn closure(&self, set: &mut BTreeSet<Config>) {
        let mut work: Vec<Config> = set.iter().copied().collect();
        while let Some((s, off)) = work.pop() {
            if off == self.accesses[s].len() {
                for &t in &self.succ[s] {
                    if set.insert((t, 0)) {
                        work.push((t, 0));
                    }
                }
            }
        }
    }

    fn cap(set: &mut BTreeSet<Config>, limit: usize) -> bool {
        let mut capped = false;
        while set.len() > limit.max(1) {
            set.pop_first();
            capped = true;
        }
        capped
    }

    fn accepts(&self, set: &BTreeSet<Config>) -> bool {
        set.iter().any(|&(s, off)| self.is_final[s] && off == self.accesses[s].len())
    }

    fn symbol(&self, e: &TraceEvent) -> Option<u32> {
        match e {
            TraceEvent::Access { class_name, field_name, .. } => {
                self.symbols.get(class_name.as_str())?.get(field_name.as_str()).copied()
            }
            _ => None,
        }
    }

    /// Simulates the model over `accesses`. Non-access events are ignored.
    pub fn run<'a, I>(&self, accesses: I, opts: &MatchOptions) -> InvocationResult
    where
        I: IntoIterator<Item = &'a TraceEvent>,
    {
        let mut result = InvocationResult::default();
        let mut last_raw: BTreeSet<Config> = BTreeSet::from([(self.initial, 0)]);
        let mut active = last_raw.clone();
        self.closure(&mut active);
        result.capped |= Self::cap(&mut active, opts.config_cap);

        for e in accesses {
            if !matches!(e, TraceEvent::Access { .. }) {
                continue;
            }
            let candidates: BTreeSet<Config> = match self.symbol(e) {
                Some(sym) => active
                    .iter()
                    .filter(|&&(s, off)| self.accesses[s].get(off) == Some(&sym))
                    .map(|&(s, off)| (s, off + 1))
                    .collect(),
                None => BTreeSet::new(),
            };
            if candidates.is_empty() {
                result.skipped += 1;
                continue;
            }
            result.matched += 1;
            last_raw = candidates.clone();
            active = candidates;
            self.closure(&mut active);
            result.capped |= Self::cap(&mut active, opts.config_cap);
        }

        result.terminated = if opts.strict_termination {
            self.accepts(&last_raw)
        } else {
            self.closure(&mut active);
            self.accepts(&active)
        };
        result
    }
}

/// One-shot matching of an access sequence against `chain`.
pub fn match_invocation<'a, I>(chain: &MarkovChain, accesses: I, opts: &MatchOptions) -> InvocationResult
where
    I: IntoIterator<Item = &'a TraceEvent>,
{
    Matcher::new(chain).run(accesses, opts)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::ir::{AccessKind, MethodId, OOAccess};
    use crate::markov::MarkovState;

    fn acc(class: &str, f: &str) -> OOAccess {
        OOAccess { class_name: class.into(), field_name: f.into(), value_type: "int".into() }
    }

    fn ev(class: &str, f: &str) -> TraceEvent {
        TraceEvent::Access {
            kind: AccessKind::GetField,
            class_name: class.into(),
            field_name: f.into(),
            value_type: "int".into(),
            method: MethodId::new("A", "m"),
            index: 0,
        }
    }

    /// 0 -> 1 [A.x, A.y] -> 2
    fn straight() -> MarkovChain {
        let mut states = BTreeMap::new();
        states.insert(0, MarkovState { id: 0, accesses: vec![], outgoing: BTreeMap::from([(1, 1.0)]), is_initial: true, is_final: false });
        states.insert(1, MarkovState { id: 1, accesses: vec![acc("A", "x"), acc("A", "y")], outgoing: BTreeMap::from([(2, 1.0)]), is_initial: false, is_final: false });
        states.insert(2, MarkovState { id: 2, accesses: vec![], outgoing: BTreeMap::new(), is_initial: false, is_final: true });
        MarkovChain { method: MethodId::new("A", "m"), states, initial: 0, finals: vec![2] }
    }

    fn run(chain: &MarkovChain, events: &[TraceEvent]) -> InvocationResult {
        match_invocation(chain, events, &MatchOptions::default())
    }

    #[test]
    fn exact_sequence_terminates() {
        let r = run(&straight(), &[ev("A", "x"), ev("A", "y")]);
        assert_eq!((r.matched, r.skipped, r.terminated), (2, 0, true));
    }

    #[test]
    fn gaps_are_skipped() {
        let r = run(&straight(), &[ev("A", "x"), ev("B", "q"), ev("A", "y")]);
        assert_eq!((r.matched, r.skipped, r.terminated), (2, 1, true));
    }

    #[test]
    fn out_of_order_access_does_not_terminate() {
        let r = run(&straight(), &[ev("A", "y")]);
        assert_eq!((r.matched, r.skipped, r.terminated), (0, 1, false));
    }

    #[test]
    fn strict_termination_needs_a_final_configuration_without_trailing_moves() {
        let strict = MatchOptions { strict_termination: true, ..MatchOptions::default() };
        let r = match_invocation(&straight(), &[ev("A", "x"), ev("A", "y")], &strict);
        assert!(!r.terminated);
        // a model whose final state carries the last access satisfies strict mode
        let mut ch = straight();
        ch.states.get_mut(&1).unwrap().outgoing.clear();
        ch.states.get_mut(&1).unwrap().is_final = true;
        ch.states.get_mut(&2).unwrap().is_final = false;
        ch.states.remove(&2);
        ch.finals = vec![1];
        let r = match_invocation(&ch, &[ev("A", "x"), ev("A", "y")], &strict);
        assert!(r.terminated);
    }

    #[test]
    fn config_cap_flags_overflow() {
        let opts = MatchOptions { config_cap: 1, ..MatchOptions::default() };
        let r = match_invocation(&straight(), &[ev("A", "x")], &opts);
        assert!(r.capped);
        assert_eq!(r.matched + r.skipped, 1);
    }
}
