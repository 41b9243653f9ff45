//! Monte-Carlo first-passage estimates on an uncompressed chain. Used as an
//! independent check on compression: starting at a retained state, walk the
//! original chain until the next retained state is hit.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MarkovChain, StateId};
use crate::par::{self, Mode};
use crate::seed::sub_seed;

const CHUNKS: usize = 64;
const MAX_STEPS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkEstimate {
    /// Fraction of walks whose first retained state was the key.
    pub hits: BTreeMap<StateId, f64>,
    /// Fraction of walks that hit a dead end or the step limit.
    pub lost: f64,
}

struct Sampler {
    index: BTreeMap<StateId, usize>,
    targets: Vec<Vec<StateId>>,
    cumulative: Vec<Vec<f64>>,
}

impl Sampler {
    fn new(chain: &MarkovChain) -> Self {
        let mut index = BTreeMap::new();
        let mut targets = Vec::new();
        let mut cumulative = Vec::new();
        for (i, (id, s)) in chain.states.iter().enumerate() {
            index.insert(*id, i);
            let mut acc = 0.0;
            targets.push(s.outgoing.keys().copied().collect());
            cumulative.push(
                s.outgoing
                    .values()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect(),
            );
        }
        Sampler { index, targets, cumulative }
    }

    fn step(&self, from: StateId, rng: &mut ChaCha8Rng) -> Option<StateId> {
        let i = self.index[&from];
        let cum = &self.cumulative[i];
        let total = *cum.last()?;
        let u = rng.random::<f64>() * total;
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        Some(self.targets[i][k])
    }
}

/// Estimates, for walks leaving `source`, the distribution of the first
/// state in `retained` that is reached. Deterministic for a fixed seed in
/// both execution modes.
pub fn estimate_first_passage(
    chain: &MarkovChain,
    source: StateId,
    retained: &BTreeSet<StateId>,
    walks: usize,
    seed: u64,
    mode: Mode,
) -> WalkEstimate {
    let sampler = Sampler::new(chain);
    let per_chunk = walks.div_ceil(CHUNKS);
    let tallies = par::map_range(mode, CHUNKS, |c| {
        let start = c * per_chunk;
        let n = per_chunk.min(walks.saturating_sub(start));
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "walk", &c.to_string()));
        let mut hits: BTreeMap<StateId, usize> = BTreeMap::new();
        let mut lost = 0usize;
        for _ in 0..n {
            let mut at = source;
            let mut landed = None;
            for _ in 0..MAX_STEPS {
                match sampler.step(at, &mut rng) {
                    None => break,
                    Some(next) if retained.contains(&next) => {
                        landed = Some(next);
                        break;
                    }
                    Some(next) => at = next,
                }
            }
            match landed {
                Some(s) => *hits.entry(s).or_insert(0) += 1,
                None => lost += 1,
            }
        }
        (hits, lost)
    });
    let mut hits: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut lost = 0;
    for (h, l) in tallies {
        for (s, n) in h {
            *hits.entry(s).or_insert(0) += n;
        }
        lost += l;
    }
    let total = walks.max(1) as f64;
    WalkEstimate {
        hits: hits.into_iter().map(|(s, n)| (s, n as f64 / total)).collect(),
        lost: lost as f64 / total,
    }
}
