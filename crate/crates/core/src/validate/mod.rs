//! Replays recorded traces against models.
//!
//! Each dynamic invocation of a method is cut out of the trace (including the
//! accesses of any callees it made) and fed to the method's model, which is
//! simulated as a non-deterministic automaton. Accesses that no active
//! configuration expects are counted as skipped gaps and do not stop the
//! simulation.

mod matcher;
mod report;

use std::collections::BTreeMap;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::interp::{CallSite, Trace, TraceEvent};
use crate::ir::MethodId;
use crate::markov::MarkovChain;
use crate::par::{self, Mode};
use crate::seed::sub_seed;

pub use matcher::{match_invocation, InvocationResult, MatchOptions, Matcher, DEFAULT_CONFIG_CAP};
pub use report::{read_validation_csv, write_detail_csv, write_validation_csv, ValidationRow, VALIDATION_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidateError {
    #[error("unbalanced trace at event {index}: {msg}")]
    Unbalanced { index: usize, msg: String },
    #[error("model for {model} used to validate invocations of {method}")]
    MethodMismatch { model: MethodId, method: MethodId },
    #[error("validation report: {0}")]
    Report(String),
}

/// One dynamic invocation: the call site it came from and the span of trace
/// events strictly between its ENTER and EXIT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub call_site: Option<CallSite>,
    pub span: Range<usize>,
}

impl Invocation {
    /// The invocation's access events in order, callee accesses included.
    pub fn accesses<'t>(&self, trace: &'t Trace) -> impl Iterator<Item = &'t TraceEvent> + 't {
        trace.events[self.span.clone()]
            .iter()
            .filter(|e| matches!(e, TraceEvent::Access { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub method: MethodId,
    /// Completed invocations in trace order.
    pub invocations: Vec<Invocation>,
    /// Invocations cut off by trace truncation.
    pub discarded: usize,
}

impl Segmentation {
    fn empty(method: MethodId) -> Self {
        Segmentation { method, invocations: Vec::new(), discarded: 0 }
    }

    /// Invocation indices grouped by call site.
    pub fn by_site(&self) -> BTreeMap<Option<CallSite>, Vec<usize>> {
        let mut out: BTreeMap<Option<CallSite>, Vec<usize>> = BTreeMap::new();
        for (i, inv) in self.invocations.iter().enumerate() {
            out.entry(inv.call_site.clone()).or_default().push(i);
        }
        out
    }
}

/// Splits a trace into invocations for every method that appears in it.
pub fn segment_all(trace: &Trace) -> Result<BTreeMap<MethodId, Segmentation>, ValidateError> {
    let mut out: BTreeMap<MethodId, Segmentation> = BTreeMap::new();
    let mut open: Vec<(&MethodId, &Option<CallSite>, usize)> = Vec::new();
    for (i, e) in trace.events.iter().enumerate() {
        match e {
            TraceEvent::Enter { method, call_site } => open.push((method, call_site, i)),
            TraceEvent::Exit { method } => {
                let Some((top, site, start)) = open.pop() else {
                    return Err(ValidateError::Unbalanced { index: i, msg: format!("EXIT of {method} with no open call") });
                };
                if top != method {
                    return Err(ValidateError::Unbalanced {
                        index: i,
                        msg: format!("EXIT of {method} while {top} is executing"),
                    });
                }
                out.entry(method.clone())
                    .or_insert_with(|| Segmentation::empty(method.clone()))
                    .invocations
                    .push(Invocation { call_site: site.clone(), span: start + 1..i });
            }
            TraceEvent::Access { method, .. } => match open.last() {
                Some((top, _, _)) if *top == method => {}
                Some((top, _, _)) => {
                    return Err(ValidateError::Unbalanced {
                        index: i,
                        msg: format!("access attributed to {method} while {top} is executing"),
                    })
                }
                None => {
                    return Err(ValidateError::Unbalanced { index: i, msg: "access outside any call".into() })
                }
            },
        }
    }
    if !open.is_empty() && !trace.truncated {
        let (m, _, start) = open.last().unwrap();
        return Err(ValidateError::Unbalanced { index: *start, msg: format!("call of {m} never returns") });
    }
    for (m, _, _) in open {
        out.entry(m.clone()).or_insert_with(|| Segmentation::empty(m.clone())).discarded += 1;
    }
    Ok(out)
}

/// Invocations of a single method.
pub fn segment_invocations(trace: &Trace, method: &MethodId) -> Result<Segmentation, ValidateError> {
    Ok(segment_all(trace)?
        .remove(method)
        .unwrap_or_else(|| Segmentation::empty(method.clone())))
}

/// All of `sites` when there are at most `cap`, otherwise a uniform sample of
/// exactly `cap` of them in their original order.
pub fn sample_call_sites<T: Clone>(sites: &[T], cap: usize, seed: u64) -> Vec<T> {
    let cap = cap.max(1);
    if sites.len() <= cap {
        return sites.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, sites.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| sites[i].clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Call sites evaluated per method.
    pub callsite_cap: usize,
    /// Invocations evaluated per sampled call site.
    pub per_site_cap: usize,
    pub matching: MatchOptions,
    pub mode: Mode,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: 0,
            callsite_cap: 100,
            per_site_cap: 1000,
            matching: MatchOptions::default(),
            mode: Mode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodValidation {
    pub method: MethodId,
    pub calls_evaluated: usize,
    pub terminated: usize,
    pub matched: usize,
    pub skipped: usize,
    /// Absent when no invocation was evaluated.
    pub termination_rate: Option<f64>,
    /// Pooled over all evaluated accesses; absent when there were none.
    pub oo_match_rate: Option<f64>,
    /// Mean of per-invocation match rates, over invocations with accesses.
    pub mean_invocation_match_rate: Option<f64>,
    pub method_size: usize,
    pub num_accesses: usize,
    pub capped_invocations: usize,
    pub discarded: usize,
    /// Every evaluated invocation satisfied matched + skipped = presented.
    pub conservation_ok: bool,
}

/// Runs the model over sampled invocations and aggregates the rates.
pub fn validate_method(
    chain: &MarkovChain,
    seg: &Segmentation,
    trace: &Trace,
    method_size: usize,
    cfg: &ValidationConfig,
) -> Result<MethodValidation, ValidateError> {
    if chain.method != seg.method {
        return Err(ValidateError::MethodMismatch { model: chain.method.clone(), method: seg.method.clone() });
    }
    let groups = seg.by_site();
    let sites: Vec<&Option<CallSite>> = groups.keys().collect();
    let sampled = sample_call_sites(&sites, cfg.callsite_cap, sub_seed(cfg.seed, "sample", &seg.method.to_string()));
    let chosen: Vec<usize> = sampled
        .iter()
        .flat_map(|site| groups[*site].iter().take(cfg.per_site_cap).copied())
        .collect();

    let matcher = Matcher::new(chain);
    let results = par::map(cfg.mode, &chosen, |&i| {
        let inv = &seg.invocations[i];
        let presented = inv.accesses(trace).count();
        let r = matcher.run(inv.accesses(trace), &cfg.matching);
        (r, presented)
    });

    let mut v = MethodValidation {
        method: seg.method.clone(),
        calls_evaluated: results.len(),
        terminated: 0,
        matched: 0,
        skipped: 0,
        termination_rate: None,
        oo_match_rate: None,
        mean_invocation_match_rate: None,
        method_size,
        num_accesses: chain.num_accesses(),
        capped_invocations: 0,
        discarded: seg.discarded,
        conservation_ok: true,
    };
    let mut ratio_sum = 0.0;
    let mut ratio_n = 0usize;
    for (r, presented) in &results {
        v.terminated += r.terminated as usize;
        v.matched += r.matched;
        v.skipped += r.skipped;
        v.capped_invocations += r.capped as usize;
        v.conservation_ok &= r.matched + r.skipped == *presented;
        if *presented > 0 {
            ratio_sum += r.matched as f64 / *presented as f64;
            ratio_n += 1;
        }
    }
    if v.calls_evaluated > 0 {
        v.termination_rate = Some(v.terminated as f64 / v.calls_evaluated as f64);
    }
    if v.matched + v.skipped > 0 {
        v.oo_match_rate = Some(v.matched as f64 / (v.matched + v.skipped) as f64);
    }
    if ratio_n > 0 {
        v.mean_invocation_match_rate = Some(ratio_sum / ratio_n as f64);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::AccessKind;

    fn enter(m: &str, site: Option<(&str, usize)>) -> TraceEvent {
        TraceEvent::Enter {
            method: m.parse().unwrap(),
            call_site: site.map(|(c, i)| CallSite { caller: c.parse().unwrap(), index: i }),
        }
    }
    fn exit(m: &str) -> TraceEvent {
        TraceEvent::Exit { method: m.parse().unwrap() }
    }
    fn get(m: &str, f: &str) -> TraceEvent {
        TraceEvent::Access {
            kind: AccessKind::GetField,
            class_name: "A".into(),
            field_name: f.into(),
            value_type: "int".into(),
            method: m.parse().unwrap(),
            index: 0,
        }
    }

    fn trace(events: Vec<TraceEvent>, truncated: bool) -> Trace {
        Trace { events, truncated }
    }

    #[test]
    fn two_top_level_calls() {
        let t = trace(
            vec![
                enter("A.main", None),
                enter("A.m", Some(("A.main", 1))),
                get("A.m", "x"),
                exit("A.m"),
                enter("A.m", Some(("A.main", 3))),
                exit("A.m"),
                exit("A.main"),
            ],
            false,
        );
        let seg = segment_invocations(&t, &"A.m".parse().unwrap()).unwrap();
        assert_eq!(seg.invocations.len(), 2);
        assert_eq!(seg.by_site().len(), 2);
        assert_eq!(seg.invocations[0].accesses(&t).count(), 1);
    }

    #[test]
    fn callee_accesses_are_included() {
        let t = trace(
            vec![
                enter("A.m", None),
                get("A.m", "x"),
                enter("A.h", Some(("A.m", 2))),
                get("A.h", "y"),
                get("A.h", "z"),
                exit("A.h"),
                exit("A.m"),
            ],
            false,
        );
        let seg = segment_invocations(&t, &"A.m".parse().unwrap()).unwrap();
        let fields: Vec<&str> = seg.invocations[0]
            .accesses(&t)
            .map(|e| match e {
                TraceEvent::Access { field_name, .. } => field_name.as_str(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(fields, vec!["x", "y", "z"]);
    }

    #[test]
    fn truncated_invocation_is_discarded() {
        let t = trace(
            vec![
                enter("A.main", None),
                enter("A.m", Some(("A.main", 1))),
                exit("A.m"),
                enter("A.m", Some(("A.main", 1))),
                get("A.m", "x"),
            ],
            true,
        );
        let all = segment_all(&t).unwrap();
        assert_eq!(all[&"A.m".parse().unwrap()].invocations.len(), 1);
        assert_eq!(all[&"A.m".parse().unwrap()].discarded, 1);
        assert_eq!(all[&"A.main".parse().unwrap()].discarded, 1);
        // without the truncation flag the same trace is rejected
        assert!(segment_all(&trace(t.events.clone(), false)).is_err());
    }

    #[test]
    fn unbalanced_traces_are_rejected() {
        assert!(segment_all(&trace(vec![exit("A.m")], false)).is_err());
        assert!(segment_all(&trace(vec![enter("A.m", None), exit("A.n")], false)).is_err());
        assert!(segment_all(&trace(vec![get("A.m", "x")], false)).is_err());
    }

    #[test]
    fn sampling() {
        let sites: Vec<u32> = (0..150).collect();
        let s = sample_call_sites(&sites, 100, 5);
        assert_eq!(s.len(), 100);
        let mut d = s.clone();
        d.dedup();
        assert_eq!(d.len(), 100);
        assert_eq!(s, sample_call_sites(&sites, 100, 5));
        assert_eq!(sample_call_sites(&sites[..10], 100, 5), sites[..10].to_vec());
    }
}
