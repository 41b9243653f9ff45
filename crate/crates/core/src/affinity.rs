//! Per-class field affinity graphs, built either from models or from
//! traces, and the similarity measures used to compare them.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::interp::{Trace, TraceEvent};
use crate::ir::ClassDef;
use crate::markov::{MarkovChain, StateId};
use crate::par::{self, Mode};

pub const DEFAULT_WINDOW: usize = 8;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffinityError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("vector dimensions differ: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("graphs for class `{0}` have different field lists")]
    FieldMismatch(String),
    #[error("window must be at least 2, got {0}")]
    Window(usize),
    #[error("affinity graph: {0}")]
    Format(String),
}

/// How model transitions at distance one and two contribute to a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AffinityWeighting {
    /// Path probability.
    #[default]
    Probability,
    /// Every path counts 1.
    Uniform,
}

impl std::str::FromStr for AffinityWeighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "probability" => Ok(AffinityWeighting::Probability),
            "uniform" => Ok(AffinityWeighting::Uniform),
            _ => Err(format!("unknown affinity weighting `{s}` (probability|uniform)")),
        }
    }
}

impl std::fmt::Display for AffinityWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AffinityWeighting::Probability => "probability",
            AffinityWeighting::Uniform => "uniform",
        })
    }
}

/// Symmetric, non-negative weights over the unordered pairs of a class's
/// fields. Weights are kept in upper-triangle row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    pub class_name: String,
    pub fields: Vec<String>,
    weights: Vec<f64>,
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl AffinityGraph {
    pub fn new(class: &ClassDef) -> Self {
        let fields: Vec<String> = class.fields.iter().map(|f| f.name.clone()).collect();
        AffinityGraph { class_name: class.name.clone(), weights: vec![0.0; pair_count(fields.len())], fields }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let n = self.fields.len();
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn add(&mut self, i: usize, j: usize, w: f64) {
        if i != j {
            let k = self.slot(i, j);
            self.weights[k] += w;
        }
    }

    /// Weight of the pair `(a, b)`; zero for unknown or identical fields.
    pub fn weight(&self, a: &str, b: &str) -> f64 {
        let pos = |n: &str| self.fields.iter().position(|f| f == n);
        match (pos(a), pos(b)) {
            (Some(i), Some(j)) if i != j => self.weights[self.slot(i, j)],
            _ => 0.0,
        }
    }

    /// `(a, b, w)` for every pair in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        let n = self.fields.len();
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.weights.iter())
            .map(|((i, j), w)| (self.fields[i].as_str(), self.fields[j].as_str(), *w))
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == 0.0)
    }
}

/// Pair weights in upper-triangle row-major order of the field list.
pub fn vectorize(g: &AffinityGraph) -> Vec<f64> {
    g.weights.clone()
}

fn field_index(class: &ClassDef) -> HashMap<&str, usize> {
    class.fields.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect()
}

/// Affinity of `class` predicted by a set of compressed chains.
///
/// Accesses in the same state pair up with weight 1. Accesses in states one
/// or two transitions apart pair up with the weight of the connecting
/// paths, summed over intermediate states.
pub fn model_affinity(
    chains: &[MarkovChain],
    classes: &[ClassDef],
    class_name: &str,
    weighting: AffinityWeighting,
) -> Result<AffinityGraph, AffinityError> {
    let class = classes
        .iter()
        .find(|c| c.name == class_name)
        .ok_or_else(|| AffinityError::UnknownClass(class_name.to_string()))?;
    let index = field_index(class);
    let mut g = AffinityGraph::new(class);
    let edge = |w: f64| match weighting {
        AffinityWeighting::Probability => w,
        AffinityWeighting::Uniform => 1.0,
    };

    for chain in chains {
        let fields_of: BTreeMap<StateId, Vec<usize>> = chain
            .states
            .iter()
            .map(|(id, s)| {
                let f = s
                    .accesses
                    .iter()
                    .filter(|a| a.class_name == class_name)
                    .filter_map(|a| index.get(a.field_name.as_str()).copied())
                    .collect();
                (*id, f)
            })
            .collect();
        for (id, state) in &chain.states {
            let here = &fields_of[id];
            if here.is_empty() {
                continue;
            }
            for (k, &a) in here.iter().enumerate() {
                for &b in &here[k + 1..] {
                    g.add(a, b, 1.0);
                }
            }
            let mut reach: BTreeMap<StateId, f64> = BTreeMap::new();
            for (&m, &w1) in state.outgoing.iter().filter(|(_, w)| **w > 0.0) {
                *reach.entry(m).or_default() += edge(w1);
                for (&t, &w2) in chain.states[&m].outgoing.iter().filter(|(_, w)| **w > 0.0) {
                    *reach.entry(t).or_default() += edge(w1) * edge(w2);
                }
            }
            for (t, w) in reach {
                for &a in here {
                    for &b in &fields_of[&t] {
                        g.add(a, b, w);
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Model graphs for several classes, one independent job per class.
pub fn model_affinity_all(
    chains: &[MarkovChain],
    classes: &[ClassDef],
    names: &[String],
    weighting: AffinityWeighting,
    mode: Mode,
) -> Result<BTreeMap<String, AffinityGraph>, AffinityError> {
    let graphs = par::try_map(mode, names, |n| model_affinity(chains, classes, n, weighting))?;
    Ok(graphs.into_iter().map(|g| (g.class_name.clone(), g)).collect())
}

/// Observed affinity for each class in `relevant`.
///
/// Access events are numbered in trace order; two accesses fewer than
/// `window` positions apart form a co-occurring pair and add 1 to their
/// fields' weight when both touch distinct fields of the same relevant
/// class. Growing the window can only add pairs.
pub fn trace_affinity(
    t: &Trace,
    relevant: &[ClassDef],
    window: usize,
) -> Result<BTreeMap<String, AffinityGraph>, AffinityError> {
    if window < 2 {
        return Err(AffinityError::Window(window));
    }
    let indices: Vec<HashMap<&str, usize>> = relevant.iter().map(field_index).collect();
    let class_pos: HashMap<&str, usize> = relevant.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
    let mut graphs: Vec<AffinityGraph> = relevant.iter().map(AffinityGraph::new).collect();

    // (class slot, field index) of each access, None for irrelevant ones
    let keys: Vec<Option<(usize, usize)>> = t
        .events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Access { class_name, field_name, .. } => Some(
                class_pos
                    .get(class_name.as_str())
                    .and_then(|&c| indices[c].get(field_name.as_str()).map(|&f| (c, f))),
            ),
            _ => None,
        })
        .collect();
    for (j, key) in keys.iter().enumerate() {
        let Some((c, b)) = *key else { continue };
        for prev in &keys[j.saturating_sub(window - 1)..j] {
            if let Some((pc, a)) = *prev {
                if pc == c {
                    graphs[c].add(a, b, 1.0);
                }
            }
        }
    }
    Ok(graphs.into_iter().map(|g| (g.class_name.clone(), g)).collect())
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<Option<f64>, AffinityError> {
    if u.len() != v.len() {
        return Err(AffinityError::Dimension(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(None);
    }
    if u == v {
        return Ok(Some(1.0));
    }
    Ok(Some((dot / (nu * nv)).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided, from the t approximation with n - 2 degrees of freedom.
    pub p_value: f64,
}

/// 1-based ranks, ties sharing the average of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman's rank correlation. `None` for fewer than three points or a
/// constant input.
pub fn spearman(u: &[f64], v: &[f64]) -> Result<Option<Spearman>, AffinityError> {
    if u.len() != v.len() {
        return Err(AffinityError::Dimension(u.len(), v.len()));
    }
    let n = u.len();
    if n < 3 {
        return Ok(None);
    }
    let (ru, rv) = (average_ranks(u), average_ranks(v));
    let mean = (n as f64 + 1.0) / 2.0;
    let du: Vec<f64> = ru.iter().map(|r| r - mean).collect();
    let dv: Vec<f64> = rv.iter().map(|r| r - mean).collect();
    let suu: f64 = du.iter().map(|d| d * d).sum();
    let svv: f64 = dv.iter().map(|d| d * d).sum();
    if suu == 0.0 || svv == 0.0 {
        return Ok(None);
    }
    let rho = if du == dv {
        1.0
    } else if du.iter().zip(&dv).all(|(a, b)| *a == -*b) {
        -1.0
    } else {
        let suv: f64 = du.iter().zip(&dv).map(|(a, b)| a * b).sum();
        (suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0)
    };
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("n >= 3 gives positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Some(Spearman { rho, p_value }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub class_name: String,
    pub cosine: Option<f64>,
    pub spearman: Option<Spearman>,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Classes that appear on only one side.
    pub uncompared: Vec<String>,
    pub cosine_histogram: Vec<HistBin>,
    /// Significant rows only.
    pub spearman_histogram: Vec<HistBin>,
}

fn histogram(values: impl Iterator<Item = f64>, low: f64, bins: usize) -> Vec<HistBin> {
    let mut hist: Vec<HistBin> = (0..bins)
        .map(|i| HistBin { low: low + i as f64 / 10.0, high: low + (i + 1) as f64 / 10.0, count: 0 })
        .collect();
    for v in values {
        let k = ((v - low) * 10.0).floor().clamp(0.0, (bins - 1) as f64) as usize;
        hist[k].count += 1;
    }
    hist
}

/// Compares graphs of the classes present on both sides.
pub fn compare_affinity(
    model: &BTreeMap<String, AffinityGraph>,
    trace: &BTreeMap<String, AffinityGraph>,
) -> Result<Comparison, AffinityError> {
    let mut rows = Vec::new();
    let mut uncompared = Vec::new();
    for (class, m) in model {
        let Some(t) = trace.get(class) else {
            uncompared.push(class.clone());
            continue;
        };
        if m.fields != t.fields {
            return Err(AffinityError::FieldMismatch(class.clone()));
        }
        let (u, v) = (vectorize(m), vectorize(t));
        let sp = spearman(&u, &v)?;
        rows.push(ComparisonRow {
            class_name: class.clone(),
            cosine: cosine(&u, &v)?,
            significant: sp.is_some_and(|s| s.p_value <= SIGNIFICANCE_LEVEL),
            spearman: sp,
        });
    }
    uncompared.extend(trace.keys().filter(|c| !model.contains_key(*c)).cloned());
    uncompared.sort();
    let cosine_histogram = histogram(rows.iter().filter_map(|r| r.cosine), 0.0, 10);
    let spearman_histogram =
        histogram(rows.iter().filter(|r| r.significant).filter_map(|r| r.spearman.map(|s| s.rho)), -1.0, 20);
    Ok(Comparison { rows, uncompared, cosine_histogram, spearman_histogram })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    class: String,
    fields: Vec<String>,
    weights: Vec<PairDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    a: String,
    b: String,
    w: f64,
}

pub fn graph_to_json(g: &AffinityGraph) -> String {
    let doc = GraphDoc {
        class: g.class_name.clone(),
        fields: g.fields.clone(),
        weights: g.pairs().map(|(a, b, w)| PairDoc { a: a.into(), b: b.into(), w }).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("graph documents always serialize");
    s.push('\n');
    s
}

pub fn graph_from_json(text: &str) -> Result<AffinityGraph, AffinityError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| AffinityError::Format(e.to_string()))?;
    let pos: HashMap<&str, usize> = doc.fields.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    if pos.len() != doc.fields.len() {
        return Err(AffinityError::Format("duplicate field".into()));
    }
    let mut g = AffinityGraph { class_name: doc.class.clone(), weights: vec![0.0; pair_count(doc.fields.len())], fields: doc.fields.clone() };
    let mut seen = vec![false; g.weights.len()];
    for p in &doc.weights {
        let (Some(&i), Some(&j)) = (pos.get(p.a.as_str()), pos.get(p.b.as_str())) else {
            return Err(AffinityError::Format(format!("pair ({}, {}) names an unknown field", p.a, p.b)));
        };
        if i == j || !p.w.is_finite() || p.w < 0.0 {
            return Err(AffinityError::Format(format!("invalid pair ({}, {}, {})", p.a, p.b, p.w)));
        }
        let k = g.slot(i, j);
        if std::mem::replace(&mut seen[k], true) {
            return Err(AffinityError::Format(format!("pair ({}, {}) listed twice", p.a, p.b)));
        }
        g.weights[k] = p.w;
    }
    Ok(g)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// `class,cosine,spearman,p_value,significant`
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], comment: Option<&str>, mut w: W) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "class,cosine,spearman,p_value,significant")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.class_name,
            opt(r.cosine),
            opt(r.spearman.map(|s| s.rho)),
            opt(r.spearman.map(|s| s.p_value)),
            r.significant
        )?;
    }
    w.flush()
}

/// `bin_low,bin_high,count`
pub fn write_histogram_csv<W: Write>(bins: &[HistBin], comment: Option<&str>, mut w: W) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "bin_low,bin_high,count")?;
    for b in bins {
        writeln!(w, "{:.1},{:.1},{}", b.low, b.high, b.count)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{AccessKind, FieldDecl, MethodId, OOAccess};
    use crate::markov::MarkovState;

    fn class(name: &str, fields: &[&str]) -> ClassDef {
        ClassDef {
            name: name.into(),
            fields: fields.iter().map(|f| FieldDecl { name: f.to_string(), declared_type: "int".into() }).collect(),
        }
    }

    fn acc(c: &str, f: &str) -> OOAccess {
        OOAccess { class_name: c.into(), field_name: f.into(), value_type: "int".into() }
    }

    type StateSpec = (Vec<OOAccess>, Vec<(StateId, f64)>);

    fn chain(states: Vec<StateSpec>) -> MarkovChain {
        let last = states.len() - 1;
        let states = states
            .into_iter()
            .enumerate()
            .map(|(i, (a, out))| {
                (
                    i,
                    MarkovState {
                        id: i,
                        accesses: a,
                        outgoing: out.into_iter().collect(),
                        is_initial: i == 0,
                        is_final: i == last,
                    },
                )
            })
            .collect();
        MarkovChain { method: MethodId::new("A", "m"), states, initial: 0, finals: vec![last] }
    }

    fn ev(c: &str, f: &str) -> TraceEvent {
        TraceEvent::Access {
            kind: AccessKind::GetField,
            class_name: c.into(),
            field_name: f.into(),
            value_type: "int".into(),
            method: MethodId::new("A", "m"),
            index: 0,
        }
    }

    #[test]
    fn same_state_pair_weighs_one() {
        let ch = chain(vec![(vec![], vec![(1, 1.0)]), (vec![acc("A", "x"), acc("A", "y")], vec![(2, 1.0)]), (vec![], vec![])]);
        let g = model_affinity(&[ch], &[class("A", &["x", "y"])], "A", AffinityWeighting::Probability).unwrap();
        assert_eq!(g.weight("x", "y"), 1.0);
    }

    #[test]
    fn two_step_paths_multiply() {
        // S1 -> S2 (0.5) -> S3 (0.4)
        let ch = chain(vec![
            (vec![acc("A", "x")], vec![(1, 0.5), (3, 0.5)]),
            (vec![], vec![(2, 0.4), (3, 0.6)]),
            (vec![acc("A", "y")], vec![(3, 1.0)]),
            (vec![], vec![]),
        ]);
        let classes = [class("A", &["x", "y"])];
        let g = model_affinity(std::slice::from_ref(&ch), &classes, "A", AffinityWeighting::Probability).unwrap();
        assert!((g.weight("x", "y") - 0.2).abs() < 1e-15);
        let u = model_affinity(&[ch], &classes, "A", AffinityWeighting::Uniform).unwrap();
        assert_eq!(u.weight("x", "y"), 1.0);
    }

    #[test]
    fn distance_three_is_zero() {
        let ch = chain(vec![
            (vec![acc("A", "x")], vec![(1, 1.0)]),
            (vec![acc("B", "q")], vec![(2, 1.0)]),
            (vec![acc("B", "q")], vec![(3, 1.0)]),
            (vec![acc("A", "y")], vec![(4, 1.0)]),
            (vec![], vec![]),
        ]);
        let g = model_affinity(&[ch], &[class("A", &["x", "y"]), class("B", &["q"])], "A", AffinityWeighting::Probability).unwrap();
        assert_eq!(g.weight("x", "y"), 0.0);
        assert!(matches!(model_affinity(&[], &[], "Z", AffinityWeighting::Uniform), Err(AffinityError::UnknownClass(_))));
    }

    #[test]
    fn window_of_two() {
        let t = Trace { events: vec![ev("A", "x"), ev("A", "y"), ev("A", "x")], truncated: false };
        let g = trace_affinity(&t, &[class("A", &["x", "y"])], 2).unwrap();
        assert_eq!(g["A"].weight("x", "y"), 2.0);
        assert!(trace_affinity(&t, &[], 1).is_err());
    }

    #[test]
    fn irrelevant_classes_are_ignored() {
        let t = Trace { events: vec![ev("B", "x"), ev("B", "y")], truncated: false };
        let g = trace_affinity(&t, &[class("A", &["x", "y"])], 8).unwrap();
        assert!(!g.contains_key("B"));
        assert!(g["A"].is_zero());
    }

    #[test]
    fn vector_layout() {
        let mut g = AffinityGraph::new(&class("A", &["a", "b", "c"]));
        g.add(0, 1, 1.0);
        g.add(2, 0, 2.0);
        g.add(1, 2, 3.0);
        assert_eq!(vectorize(&g), vec![1.0, 2.0, 3.0]);
        assert!(vectorize(&AffinityGraph::new(&class("E", &[]))).is_empty());
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), Some(0.0));
        let c = cosine(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap().unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert_eq!(cosine(&[0.0], &[1.0]).unwrap(), None);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_cases() {
        let inc = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&inc, &[2.0, 5.0, 9.0, 10.0]).unwrap().unwrap().rho, 1.0);
        assert_eq!(spearman(&inc, &[4.0, 3.0, 1.0, 0.0]).unwrap().unwrap().rho, -1.0);
        assert_eq!(spearman(&inc, &[1.0; 4]).unwrap(), None);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), None);
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        let s = spearman(&[1.0, 2.0, 2.0, 4.0], &[2.0, 1.0, 3.0, 4.0]).unwrap().unwrap();
        assert!((s.rho - 0.6324555320336759).abs() < 1e-12, "{}", s.rho);
        assert!(s.p_value > 0.0 && s.p_value < 1.0);
    }

    #[test]
    fn comparison_and_histograms() {
        let mut g = AffinityGraph::new(&class("A", &["a", "b", "c"]));
        g.add(0, 1, 1.0);
        g.add(0, 2, 2.0);
        let only_model = AffinityGraph::new(&class("M", &["p", "q"]));
        let model = BTreeMap::from([("A".to_string(), g.clone()), ("M".to_string(), only_model)]);
        let trace = BTreeMap::from([("A".to_string(), g)]);
        let cmp = compare_affinity(&model, &trace).unwrap();
        assert_eq!(cmp.rows.len(), 1);
        assert_eq!(cmp.rows[0].cosine, Some(1.0));
        assert_eq!(cmp.uncompared, vec!["M".to_string()]);
        assert_eq!(cmp.cosine_histogram.len(), 10);
        assert_eq!(cmp.cosine_histogram[9].count, 1);
        assert_eq!(cmp.spearman_histogram.len(), 20);
        // identical rankings: rho = 1 with p = 0, counted in the top bin
        assert!(cmp.rows[0].significant);
        assert_eq!(cmp.spearman_histogram[19].count, 1);
    }

    #[test]
    fn json_round_trip() {
        let mut g = AffinityGraph::new(&class("A", &["a", "b", "c"]));
        g.add(0, 1, 0.1 + 0.2);
        g.add(1, 2, 7.0);
        let back = graph_from_json(&graph_to_json(&g)).unwrap();
        assert_eq!(back, g);
        assert!(graph_from_json(r#"{"class":"A","fields":["a"],"weights":[{"a":"a","b":"z","w":1}]}"#).is_err());
        assert!(graph_from_json(r#"{"class":"A","fields":["a","b"],"weights":[{"a":"a","b":"b","w":-1}]}"#).is_err());
    }
}
