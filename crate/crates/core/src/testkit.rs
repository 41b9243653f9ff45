//! Random inputs shared by tests, the acceptance suite and benchmarks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::ir::{MethodId, OOAccess};
use crate::markov::{MarkovChain, MarkovState, StateId};

/// A random chain over states `0..n` (`n >= 2`). State 0 is initial and
/// state `n - 1` final. Every state reaches the final state, every state is
/// reachable from the initial one, and there are no self-loops. Roughly half
/// of the inner states are empty.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> MarkovChain {
    let n = n.max(2);
    let fields = ["a", "b", "c", "d"];
    let mut states = BTreeMap::new();
    for id in 0..n {
        let inner = id != 0 && id != n - 1;
        let accesses = if inner && rng.random_bool(0.5) {
            (0..rng.random_range(1..=2))
                .map(|_| OOAccess {
                    class_name: "K".into(),
                    field_name: fields[rng.random_range(0..fields.len())].into(),
                    value_type: "int".into(),
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut targets: Vec<StateId> = Vec::new();
        if id + 1 < n {
            targets.push(id + 1);
            for _ in 0..rng.random_range(0..=2) {
                let t = rng.random_range(1..n);
                if t != id && !targets.contains(&t) {
                    targets.push(t);
                }
            }
        }
        let raw: Vec<f64> = targets.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let outgoing = targets.into_iter().zip(raw).map(|(t, w)| (t, w / total)).collect();
        states.insert(
            id,
            MarkovState { id, accesses, outgoing, is_initial: id == 0, is_final: id == n - 1 },
        );
    }
    MarkovChain { method: MethodId::new("K", "random"), states, initial: 0, finals: vec![n - 1] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::STOCHASTIC_TOLERANCE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_chains_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let n = rng.random_range(2..=10);
            let ch = random_chain(&mut rng, n);
            ch.check(STOCHASTIC_TOLERANCE).unwrap();
            assert!(ch.states.values().all(|s| !s.outgoing.contains_key(&s.id)));
        }
    }
}
