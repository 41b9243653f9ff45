//! Independent reference implementations shared by the integration tests.
//! None of them reuse library code paths they are meant to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::Rng;

use oopredict::markov::{MarkovChain, StateId};

/// First-passage probabilities between retained states of `chain`, from the
/// fundamental matrix of the absorbing chain in which every retained state
/// absorbs: `B = (I - Q)^-1 R`. Returns `(s, t) -> P(first retained state
/// after leaving s is t)`.
pub fn absorbing_oracle(chain: &MarkovChain, retained: &BTreeSet<StateId>) -> BTreeMap<(StateId, StateId), f64> {
    let transient: Vec<StateId> = chain.states.keys().copied().filter(|s| !retained.contains(s)).collect();
    let targets: Vec<StateId> = retained.iter().copied().collect();
    let ti: BTreeMap<StateId, usize> = transient.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let ri: BTreeMap<StateId, usize> = targets.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let (nt, nr) = (transient.len(), targets.len());

    let mut q = DMatrix::<f64>::zeros(nt, nt);
    let mut r = DMatrix::<f64>::zeros(nt, nr);
    for (i, s) in transient.iter().enumerate() {
        for (t, w) in &chain.states[s].outgoing {
            match (ti.get(t), ri.get(t)) {
                (Some(&j), _) => q[(i, j)] += w,
                (_, Some(&j)) => r[(i, j)] += w,
                _ => unreachable!(),
            }
        }
    }
    let b = if nt == 0 {
        DMatrix::<f64>::zeros(0, nr)
    } else {
        let n = (DMatrix::<f64>::identity(nt, nt) - q).try_inverse().expect("transient block is invertible");
        n * r
    };

    let mut out = BTreeMap::new();
    for s in &targets {
        let mut row = vec![0.0; nr];
        for (t, w) in &chain.states[s].outgoing {
            if let Some(&j) = ri.get(t) {
                row[j] += w;
            } else {
                let m = ti[t];
                for j in 0..nr {
                    row[j] += w * b[(m, j)];
                }
            }
        }
        for (j, p) in row.into_iter().enumerate() {
            if p > 0.0 {
                out.insert((*s, targets[j]), p);
            }
        }
    }
    out
}

/// Spearman's rho by counting: rank = #smaller + (#equal + 1) / 2, then the
/// textbook Pearson formula. `None` when either side is constant.
pub fn brute_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Pair weight by explicit enumeration of every window start: a pair of
/// positions `(i, j)` counts once if some window of `w` consecutive
/// positions contains both.
pub fn brute_window_weight(seq: &[&str], a: &str, b: &str, w: usize) -> f64 {
    let mut counted = BTreeSet::new();
    let starts = seq.len().saturating_sub(w) + 1;
    for s in 0..starts.max(1) {
        let end = (s + w).min(seq.len());
        for i in s..end {
            for j in i + 1..end {
                let hit = (seq[i] == a && seq[j] == b) || (seq[i] == b && seq[j] == a);
                if hit {
                    counted.insert((i, j));
                }
            }
        }
    }
    counted.len() as f64
}

/// Removes every edge that does not go to a higher id and renormalizes, so
/// the chain becomes acyclic. Requires an `i -> i + 1` edge on every
/// non-final state, as `random_chain` provides.
pub fn make_acyclic(chain: &mut MarkovChain) {
    for (id, s) in chain.states.iter_mut() {
        s.outgoing.retain(|t, _| t > id);
        let total: f64 = s.outgoing.values().sum();
        for w in s.outgoing.values_mut() {
            *w /= total;
        }
    }
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..6) as f64).collect()
}
