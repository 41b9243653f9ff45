//! Control-flow graphs over basic blocks, and branch weights.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::ops::Range;

use thiserror::Error;

use crate::ir::{MethodDef, MethodId};

pub type BlockId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfgError {
    #[error("profile line {line}: {msg}")]
    ProfileFormat { line: usize, msg: String },
    #[error("profile refers to nonexistent edge {src}->{dst} in {method}")]
    UnknownEdge { method: MethodId, src: BlockId, dst: BlockId },
    #[error("back-edge probability must lie in (0, 1), got {0}")]
    Policy(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Entry,
    Exit,
    Ordinary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: BlockId,
    /// Half-open range into the method's instructions. Empty for the
    /// synthetic entry and exit blocks.
    pub range: Range<usize>,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfgEdge {
    pub src: BlockId,
    pub dst: BlockId,
    pub direction: Direction,
    /// Observed taken-count, when a profile was attached.
    pub frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    pub method: MethodId,
    /// Indexed by block id: entry is 0, exit is last.
    pub blocks: Vec<BasicBlock>,
    /// Sorted by `(src, dst)`; at most one edge per pair.
    pub edges: Vec<CfgEdge>,
}

impl Cfg {
    pub fn entry(&self) -> BlockId {
        0
    }

    pub fn exit(&self) -> BlockId {
        self.blocks.len() - 1
    }

    pub fn successors(&self, block: BlockId) -> impl Iterator<Item = &CfgEdge> {
        let start = self.edges.partition_point(|e| e.src < block);
        self.edges[start..].iter().take_while(move |e| e.src == block)
    }

    /// Copies observed counts from `profile` onto the matching edges.
    pub fn attach_profile(&mut self, profile: &ProfileData) -> Result<(), CfgError> {
        let counts = profile.counts_for(self)?;
        for e in &mut self.edges {
            e.frequency = counts.get(&(e.src, e.dst)).map(|&c| c as f64);
        }
        Ok(())
    }
}

fn direction(src: BlockId, dst: BlockId) -> Direction {
    if dst <= src {
        Direction::Backward
    } else {
        Direction::Forward
    }
}

/// Leader-based basic block construction. Leaders are the first
/// instruction, every labelled instruction, and every instruction following
/// a branch or return.
pub fn build_cfg(m: &MethodDef) -> Cfg {
    let n = m.instructions.len();
    let mut leaders: BTreeSet<usize> = m.labelled_indices();
    if n > 0 {
        leaders.insert(0);
    }
    for (i, instr) in m.instructions.iter().enumerate() {
        if instr.is_terminator() && i + 1 < n {
            leaders.insert(i + 1);
        }
    }
    let starts: Vec<usize> = leaders.into_iter().collect();

    let mut blocks = vec![BasicBlock { id: 0, range: 0..0, kind: BlockKind::Entry }];
    let mut block_of = vec![0; n];
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(n);
        let id = k + 1;
        block_of[start..end].fill(id);
        blocks.push(BasicBlock { id, range: start..end, kind: BlockKind::Ordinary });
    }
    let exit = blocks.len();
    blocks.push(BasicBlock { id: exit, range: n..n, kind: BlockKind::Exit });

    let mut pairs: BTreeSet<(BlockId, BlockId)> = BTreeSet::new();
    pairs.insert((0, if n == 0 { exit } else { 1 }));
    for b in &blocks[1..exit] {
        let last = b.range.end - 1;
        for succ in m.instruction_successors(last) {
            pairs.insert((b.id, succ.map_or(exit, |i| block_of[i])));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(src, dst)| CfgEdge { src, dst, direction: direction(src, dst), frequency: None })
        .collect();
    Cfg { method: m.id(), blocks, edges }
}

/// Static branch probabilities used when no profile covers a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticWeightPolicy {
    pub back_edge_probability: f64,
}

impl Default for StaticWeightPolicy {
    fn default() -> Self {
        StaticWeightPolicy { back_edge_probability: 0.9 }
    }
}

impl StaticWeightPolicy {
    pub fn new(back_edge_probability: f64) -> Result<Self, CfgError> {
        if back_edge_probability > 0.0 && back_edge_probability < 1.0 {
            Ok(StaticWeightPolicy { back_edge_probability })
        } else {
            Err(CfgError::Policy(back_edge_probability))
        }
    }
}

/// Edge taken-counts keyed by `(method, src block, dst block)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileData {
    pub counts: BTreeMap<(MethodId, BlockId, BlockId), u64>,
}

impl ProfileData {
    /// Parses `method<TAB>src<TAB>dst<TAB>count` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, CfgError> {
        let mut counts = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CfgError::ProfileFormat { line: line_no, msg };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, found {}", cols.len())));
            }
            let method: MethodId = cols[0].parse().map_err(err)?;
            let src = cols[1].parse().map_err(|_| err(format!("bad block id `{}`", cols[1])))?;
            let dst = cols[2].parse().map_err(|_| err(format!("bad block id `{}`", cols[2])))?;
            let count: u64 = cols[3].parse().map_err(|_| err(format!("bad count `{}`", cols[3])))?;
            *counts.entry((method, src, dst)).or_insert(0) += count;
        }
        Ok(ProfileData { counts })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ((m, s, d), c) in &self.counts {
            writeln!(out, "{m}\t{s}\t{d}\t{c}").unwrap();
        }
        out
    }

    /// Counts for `cfg`'s method, checked against its edge set.
    fn counts_for(&self, cfg: &Cfg) -> Result<BTreeMap<(BlockId, BlockId), u64>, CfgError> {
        let mut out = BTreeMap::new();
        for ((m, s, d), &c) in &self.counts {
            if *m != cfg.method {
                continue;
            }
            if !cfg.edges.iter().any(|e| e.src == *s && e.dst == *d) {
                return Err(CfgError::UnknownEdge { method: m.clone(), src: *s, dst: *d });
            }
            out.insert((*s, *d), c);
        }
        Ok(out)
    }
}

/// Per-edge transition probabilities, keyed by `(src, dst)`.
pub type EdgeWeights = BTreeMap<(BlockId, BlockId), f64>;

/// Turns the CFG into per-block probability distributions over successors.
///
/// A block whose outgoing edges are all counted by the profile, with a
/// positive total, uses normalized counts. Any other block falls back to the
/// static policy: backward edges share `back_edge_probability` and forward
/// edges share the rest, or all successors split evenly when only one
/// direction is present.
pub fn edge_weights(
    cfg: &Cfg,
    profile: Option<&ProfileData>,
    policy: StaticWeightPolicy,
) -> Result<EdgeWeights, CfgError> {
    if !(policy.back_edge_probability > 0.0 && policy.back_edge_probability < 1.0) {
        return Err(CfgError::Policy(policy.back_edge_probability));
    }
    let counts = match profile {
        Some(p) => p.counts_for(cfg)?,
        None => BTreeMap::new(),
    };
    let mut weights = EdgeWeights::new();
    for b in &cfg.blocks {
        let out: Vec<&CfgEdge> = cfg.successors(b.id).collect();
        if out.is_empty() {
            continue;
        }
        let observed: Option<Vec<u64>> = out.iter().map(|e| counts.get(&(e.src, e.dst)).copied()).collect();
        if let Some(obs) = observed {
            let total: u64 = obs.iter().sum();
            if total > 0 {
                for (e, c) in out.iter().zip(obs) {
                    weights.insert((e.src, e.dst), c as f64 / total as f64);
                }
                continue;
            }
        }
        let backs = out.iter().filter(|e| e.direction == Direction::Backward).count();
        let fwds = out.len() - backs;
        for e in &out {
            let w = if backs == 0 || fwds == 0 {
                1.0 / out.len() as f64
            } else if e.direction == Direction::Backward {
                policy.back_edge_probability / backs as f64
            } else {
                (1.0 - policy.back_edge_probability) / fwds as f64
            };
            weights.insert((e.src, e.dst), w);
        }
    }
    Ok(weights)
}
