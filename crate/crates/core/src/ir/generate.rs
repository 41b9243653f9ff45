//! Random program generator used to build evaluation corpora.
//!
//! Generated programs are structured (diamonds, counted loops, calls into
//! leaf methods only), so every program terminates within a small number of
//! steps and never dereferences null.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClassDef, FieldDecl, Instruction, MethodDef, MethodId, Program, Reg, INT_TYPE};

/// Which control-flow constructs worker methods may contain. The entry method
/// always drives the workers from a counted loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub branches: bool,
    pub loops: bool,
    pub calls: bool,
    /// Upper bound on loop trip counts (inclusive).
    pub max_trip: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            branches: true,
            loops: true,
            calls: true,
            max_trip: 5,
        }
    }
}

impl GenConfig {
    /// Workers are branch-free and call-free.
    pub fn straight_line() -> Self {
        GenConfig {
            branches: false,
            loops: false,
            calls: false,
            max_trip: 1,
        }
    }
}

pub fn generate_random_program(seed: u64, size_hint: usize) -> Program {
    generate_with(seed, size_hint, &GenConfig::default())
}

// Worker register layout.
const R_INT_PARAM: Reg = Reg(0);
const R_SELF: Reg = Reg(1);
const R_ONE: Reg = Reg(2);
const R_ACC: Reg = Reg(3);
const R_BOUND: Reg = Reg(4);
const R_REF: Reg = Reg(5);
const R_OBJ_A: Reg = Reg(6);
const R_OBJ_B: Reg = Reg(7);
const R_COUNTERS: [(Reg, Reg); 2] = [(Reg(8), Reg(9)), (Reg(10), Reg(11))];
const R_RESULT: Reg = Reg(12);
const WORKER_REGS: usize = 13;

struct Emitter<'a> {
    rng: &'a mut ChaCha8Rng,
    cfg: &'a GenConfig,
    classes: &'a [ClassDef],
    /// (register, class index) pairs holding non-null objects.
    objects: Vec<(Reg, usize)>,
    leaves: &'a [(MethodId, usize)],
    code: Vec<Instruction>,
    labels: BTreeMap<String, usize>,
    next_label: usize,
    gets: usize,
}

impl Emitter<'_> {
    fn push(&mut self, i: Instruction) {
        self.code.push(i);
    }

    fn fresh_label(&mut self, stem: &str) -> String {
        self.next_label += 1;
        format!("L{stem}{}", self.next_label)
    }

    fn bind(&mut self, label: String) {
        let at = self.code.len();
        self.labels.insert(label, at);
    }

    fn int_source(&mut self, loop_depth: usize) -> Reg {
        let mut pool = vec![R_INT_PARAM, R_ACC];
        if loop_depth > 0 {
            pool.push(R_COUNTERS[loop_depth - 1].0);
        }
        *pool.choose(self.rng).unwrap()
    }

    fn access(&mut self, loop_depth: usize) {
        let (obj, ci) = *self.objects.choose(self.rng).unwrap();
        let class = &self.classes[ci];
        let field = class.fields.choose(self.rng).unwrap().clone();
        let cname = class.name.clone();
        if self.rng.random_bool(0.7) {
            let dst = if field.is_scalar() { R_ACC } else { R_REF };
            self.gets += 1;
            self.push(Instruction::GetField { dst, obj, class: cname, field: field.name });
        } else if field.is_scalar() {
            let src = if self.rng.random_bool(0.5) { R_ACC } else { self.int_source(loop_depth) };
            self.push(Instruction::PutField { obj, class: cname, field: field.name, src });
        } else {
            self.push(Instruction::New { dst: R_REF, class: field.declared_type.clone() });
            self.push(Instruction::PutField { obj, class: cname, field: field.name, src: R_REF });
        }
    }

    fn statements(&mut self, budget: usize, nest: usize, loop_depth: usize) {
        for _ in 0..budget.max(1) {
            let roll = self.rng.random_range(0..100);
            if roll < 55 || nest >= 2 {
                if roll % 7 == 0 {
                    self.push(Instruction::Add { dst: R_ACC, a: R_ACC, b: R_ONE });
                } else {
                    self.access(loop_depth);
                }
            } else if roll < 72 && self.cfg.branches {
                self.diamond(nest, loop_depth);
            } else if roll < 84 && self.cfg.loops && loop_depth < R_COUNTERS.len() {
                self.counted_loop(nest, loop_depth);
            } else if roll < 96 && self.cfg.calls && !self.leaves.is_empty() {
                self.call(loop_depth);
            } else {
                self.access(loop_depth);
            }
        }
    }

    fn diamond(&mut self, nest: usize, loop_depth: usize) {
        let lhs = self.int_source(loop_depth);
        let pivot = self.rng.random_range(0..=self.cfg.max_trip.max(1));
        let then_label = self.fresh_label("then");
        let join_label = self.fresh_label("join");
        self.push(Instruction::Const { dst: R_BOUND, value: pivot });
        self.push(Instruction::IfLt { a: lhs, b: R_BOUND, label: then_label.clone() });
        if self.rng.random_bool(0.7) {
            let n = self.rng.random_range(1..=3);
            self.statements(n, nest + 1, loop_depth);
            self.push(Instruction::Goto { label: join_label.clone() });
        } else {
            self.push(Instruction::Goto { label: join_label.clone() });
        }
        self.bind(then_label);
        let n = self.rng.random_range(1..=3);
        self.statements(n, nest + 1, loop_depth);
        self.bind(join_label);
        self.push(Instruction::Add { dst: R_ACC, a: R_ACC, b: R_ONE });
    }

    fn counted_loop(&mut self, nest: usize, loop_depth: usize) {
        let (counter, limit) = R_COUNTERS[loop_depth];
        let trips = self.rng.random_range(1..=self.cfg.max_trip.max(1));
        let head = self.fresh_label("loop");
        self.push(Instruction::Const { dst: counter, value: 0 });
        self.push(Instruction::Const { dst: limit, value: trips });
        self.bind(head.clone());
        let n = self.rng.random_range(1..=3);
        self.statements(n, nest + 1, loop_depth + 1);
        self.push(Instruction::Add { dst: counter, a: counter, b: R_ONE });
        self.push(Instruction::IfLt { a: counter, b: limit, label: head });
    }

    fn call(&mut self, loop_depth: usize) {
        let (callee, owner) = self.leaves.choose(self.rng).unwrap().clone();
        let arg = self.int_source(loop_depth);
        self.push(Instruction::New { dst: R_REF, class: self.classes[owner].name.clone() });
        self.push(Instruction::Call { method: callee, args: vec![arg, R_REF], dst: Some(R_RESULT) });
    }
}

/// Deterministic for a fixed `(seed, size_hint, cfg)`.
pub fn generate_with(seed: u64, size_hint: usize, cfg: &GenConfig) -> Program {
    let size_hint = size_hint.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_classes = 2 + rng.random_range(0..=size_hint.min(3));
    let names: Vec<String> = (0..n_classes).map(|i| format!("C{i}")).collect();
    let mut classes: Vec<ClassDef> = names
        .iter()
        .map(|name| {
            let n_fields = rng.random_range(2..=5);
            let fields = (0..n_fields)
                .map(|k| {
                    let declared_type = if k == 0 || rng.random_bool(0.6) {
                        INT_TYPE.to_string()
                    } else {
                        names.choose(&mut rng).unwrap().clone()
                    };
                    FieldDecl { name: format!("f{k}"), declared_type }
                })
                .collect();
            ClassDef { name: name.clone(), fields }
        })
        .collect();

    let n_workers = size_hint.min(8);
    let n_inner = if cfg.calls { n_workers / 2 } else { 0 };
    let owner_of = |j: usize| j % n_classes;
    let worker_id = |j: usize| MethodId::new(names[owner_of(j)].clone(), format!("m{j}"));
    let leaves: Vec<(MethodId, usize)> = (n_inner..n_workers).map(|j| (worker_id(j), owner_of(j))).collect();

    let mut methods = Vec::with_capacity(n_workers + 1);
    for j in 0..n_workers {
        let owner = owner_of(j);
        let a = rng.random_range(0..n_classes);
        let b = rng.random_range(0..n_classes);
        let budget = rng.random_range(3..=3 + size_hint.min(10));
        let callable: &[(MethodId, usize)] = if j < n_inner { &leaves } else { &[] };
        let mut em = Emitter {
            rng: &mut rng,
            cfg,
            classes: &classes,
            objects: vec![(R_SELF, owner), (R_OBJ_A, a), (R_OBJ_B, b)],
            leaves: callable,
            code: Vec::new(),
            labels: BTreeMap::new(),
            next_label: 0,
            gets: 0,
        };
        em.push(Instruction::Const { dst: R_ONE, value: 1 });
        em.push(Instruction::Const { dst: R_ACC, value: 0 });
        em.push(Instruction::New { dst: R_OBJ_A, class: classes[a].name.clone() });
        em.push(Instruction::New { dst: R_OBJ_B, class: classes[b].name.clone() });
        em.statements(budget, 0, 0);
        if em.gets == 0 {
            let field = classes[owner].fields[0].name.clone();
            em.push(Instruction::GetField {
                dst: R_ACC,
                obj: R_SELF,
                class: classes[owner].name.clone(),
                field,
            });
        }
        em.push(Instruction::Return { value: Some(R_ACC) });
        let id = worker_id(j);
        methods.push(MethodDef {
            owner: id.owner,
            name: id.name,
            param_count: 2,
            register_count: WORKER_REGS,
            instructions: em.code,
            labels: em.labels,
        });
    }

    // Driver: a counted loop calling every worker at least once, plus a few
    // extra call sites.
    let mut plan: Vec<usize> = (0..n_workers).collect();
    for _ in 0..rng.random_range(0..=n_workers) {
        plan.push(rng.random_range(0..n_workers));
    }
    let trips = rng.random_range(3..=6);
    let (counter, limit, one, obj) = (Reg(0), Reg(1), Reg(2), Reg(3));
    let mut code = vec![
        Instruction::Const { dst: one, value: 1 },
        Instruction::Const { dst: counter, value: 0 },
        Instruction::Const { dst: limit, value: trips },
    ];
    let mut labels = BTreeMap::new();
    labels.insert("Ldrive".to_string(), code.len());
    for j in plan {
        code.push(Instruction::New { dst: obj, class: names[owner_of(j)].clone() });
        code.push(Instruction::Call { method: worker_id(j), args: vec![counter, obj], dst: None });
    }
    code.push(Instruction::Add { dst: counter, a: counter, b: one });
    code.push(Instruction::IfLt { a: counter, b: limit, label: "Ldrive".into() });
    code.push(Instruction::Return { value: None });

    classes.push(ClassDef { name: "Main".into(), fields: Vec::new() });
    methods.push(MethodDef {
        owner: "Main".into(),
        name: "main".into(),
        param_count: 0,
        register_count: 4,
        instructions: code,
        labels,
    });

    let program = Program {
        classes,
        methods,
        entry: MethodId::new("Main", "main"),
    };
    debug_assert!(program.validate().is_ok(), "{:?}", program.validate());
    program
}

#[cfg(test)]
mod tests {
    use super::super::{parse_program, serialize_program};
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        assert_eq!(generate_random_program(1, 1), generate_random_program(1, 1));
    }

    #[test]
    fn seeds_do_not_collide() {
        let texts: std::collections::HashSet<String> =
            (0..100).map(|s| serialize_program(&generate_random_program(s, 4))).collect();
        assert_eq!(texts.len(), 100);
    }

    #[test]
    fn generated_programs_are_valid_and_round_trip() {
        for seed in 0..100 {
            for cfg in [GenConfig::default(), GenConfig::straight_line()] {
                let p = generate_with(seed, 1 + (seed as usize % 7), &cfg);
                p.validate().unwrap();
                assert!(p
                    .methods
                    .iter()
                    .flat_map(|m| &m.instructions)
                    .any(|i| matches!(i, Instruction::GetField { .. })));
                let text = serialize_program(&p);
                assert_eq!(parse_program(&text).unwrap(), p, "seed {seed}");
            }
        }
    }

    #[test]
    fn straight_line_workers_have_no_control_flow() {
        let p = generate_with(3, 6, &GenConfig::straight_line());
        for m in p.methods.iter().filter(|m| m.name != "main") {
            assert!(m.labels.is_empty());
            assert!(m.instructions.iter().all(|i| !matches!(
                i,
                Instruction::IfLt { .. } | Instruction::Goto { .. } | Instruction::Call { .. }
            )));
        }
    }
}
