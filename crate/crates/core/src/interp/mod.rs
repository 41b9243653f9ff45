//! Instrumented interpreter for the mini-IR.
//!
//! Every executed `getfield`/`putfield` is recorded with its class, field and
//! declared field type, and every call boundary is recorded together with the
//! call site it came from.

mod trace_io;

use std::fmt;

use thiserror::Error;

use crate::ir::{AccessKind, Instruction, MethodId, Program, Reg};

pub use trace_io::{read_trace, read_trace_file, write_trace, write_trace_file, TraceError};

/// Where a call came from: the caller and the index of its `call`
/// instruction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallSite {
    pub caller: MethodId,
    pub index: usize,
}

impl fmt::Display for CallSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.caller, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Access {
        kind: AccessKind,
        class_name: String,
        field_name: String,
        value_type: String,
        method: MethodId,
        index: usize,
    },
    /// `call_site` is `None` for the program entry.
    Enter { method: MethodId, call_site: Option<CallSite> },
    Exit { method: MethodId },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    /// Set when execution stopped at an event or step limit.
    pub truncated: bool,
}

impl Trace {
    pub fn access_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, TraceEvent::Access { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_events: usize,
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_events: 10_000_000, max_steps: 100_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    NullDereference,
    UninitializedRegister(Reg),
    TypeMismatch(String),
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::NullDereference => f.write_str("null dereference"),
            FaultKind::UninitializedRegister(r) => write!(f, "read of uninitialized register {r}"),
            FaultKind::TypeMismatch(m) => write!(f, "type mismatch: {m}"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("runtime fault in {method} at instruction {index}: {kind}")]
pub struct RuntimeFault {
    pub method: MethodId,
    pub index: usize,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    Int(i64),
    Ref(Option<usize>),
}

struct Object {
    class: usize,
    fields: Vec<Value>,
}

struct Frame {
    method: usize,
    pc: usize,
    regs: Vec<Option<Value>>,
    ret_dst: Option<Reg>,
}

/// Field slot and declared type resolved ahead of execution.
struct Resolved {
    class: usize,
    slot: usize,
    /// `None` for scalar fields.
    ref_class: Option<usize>,
}

struct Machine<'p> {
    program: &'p Program,
    limits: Limits,
    method_ids: Vec<MethodId>,
    /// Per method, per instruction: resolved field for accesses, class index
    /// for `new`, callee index for calls, jump target for branches.
    fields: Vec<Vec<Option<Resolved>>>,
    aux: Vec<Vec<usize>>,
    heap: Vec<Object>,
    trace: Trace,
    steps: u64,
}

enum Halt {
    Limit,
    Fault(RuntimeFault),
}

impl<'p> Machine<'p> {
    fn new(program: &'p Program, limits: Limits) -> Self {
        let class_index = |name: &str| program.classes.iter().position(|c| c.name == name);
        let method_ids: Vec<MethodId> = program.methods.iter().map(|m| m.id()).collect();
        let mut fields = Vec::new();
        let mut aux = Vec::new();
        for m in &program.methods {
            let mut f = Vec::new();
            let mut a = Vec::new();
            for instr in &m.instructions {
                let resolved = instr.field_access().map(|(_, class, field)| {
                    let ci = class_index(class).expect("validated class");
                    let slot = program.classes[ci].fields.iter().position(|d| d.name == field).expect("validated field");
                    let decl = &program.classes[ci].fields[slot];
                    let ref_class = if decl.is_scalar() { None } else { class_index(&decl.declared_type) };
                    Resolved { class: ci, slot, ref_class }
                });
                f.push(resolved);
                a.push(match instr {
                    Instruction::New { class, .. } => class_index(class).expect("validated class"),
                    Instruction::Call { method, .. } => {
                        method_ids.iter().position(|id| id == method).expect("validated callee")
                    }
                    Instruction::IfLt { label, .. } | Instruction::Goto { label } => {
                        m.label_index(label).expect("validated label")
                    }
                    _ => 0,
                });
            }
            fields.push(f);
            aux.push(a);
        }
        Machine { program, limits, method_ids, fields, aux, heap: Vec::new(), trace: Trace::default(), steps: 0 }
    }

    fn emit(&mut self, e: TraceEvent) -> Result<(), Halt> {
        if self.trace.events.len() >= self.limits.max_events {
            self.trace.truncated = true;
            return Err(Halt::Limit);
        }
        self.trace.events.push(e);
        Ok(())
    }

    fn fault(&self, frame: &Frame, kind: FaultKind) -> Halt {
        Halt::Fault(RuntimeFault { method: self.method_ids[frame.method].clone(), index: frame.pc, kind })
    }

    fn read(&self, frame: &Frame, r: Reg) -> Result<Value, Halt> {
        frame.regs[r.index()].ok_or_else(|| self.fault(frame, FaultKind::UninitializedRegister(r)))
    }

    fn int(&self, frame: &Frame, r: Reg) -> Result<i64, Halt> {
        match self.read(frame, r)? {
            Value::Int(v) => Ok(v),
            Value::Ref(_) => Err(self.fault(frame, FaultKind::TypeMismatch(format!("{r} holds a reference, expected int")))),
        }
    }

    /// Heap index of the object in `r`, checked against the access's class.
    fn object(&self, frame: &Frame, r: Reg, class: usize) -> Result<usize, Halt> {
        match self.read(frame, r)? {
            Value::Ref(Some(o)) if self.heap[o].class == class => Ok(o),
            Value::Ref(Some(o)) => Err(self.fault(
                frame,
                FaultKind::TypeMismatch(format!(
                    "{r} holds a {}, expected {}",
                    self.program.classes[self.heap[o].class].name, self.program.classes[class].name
                )),
            )),
            Value::Ref(None) => Err(self.fault(frame, FaultKind::NullDereference)),
            Value::Int(_) => Err(self.fault(frame, FaultKind::TypeMismatch(format!("{r} holds an int, expected an object")))),
        }
    }

    fn access_event(&self, frame: &Frame, kind: AccessKind, class: &str, field: &str, res: &Resolved) -> TraceEvent {
        TraceEvent::Access {
            kind,
            class_name: class.to_string(),
            field_name: field.to_string(),
            value_type: self.program.classes[res.class].fields[res.slot].declared_type.clone(),
            method: self.method_ids[frame.method].clone(),
            index: frame.pc,
        }
    }

    fn run(&mut self) -> Result<(), Halt> {
        let entry = self.method_ids.iter().position(|id| *id == self.program.entry).expect("validated entry");
        self.emit(TraceEvent::Enter { method: self.method_ids[entry].clone(), call_site: None })?;
        let mut stack = vec![Frame {
            method: entry,
            pc: 0,
            regs: vec![None; self.program.methods[entry].register_count],
            ret_dst: None,
        }];

        let program = self.program;
        while let Some(frame) = stack.last_mut() {
            let method = &program.methods[frame.method];
            if frame.pc >= method.instructions.len() {
                let done = stack.pop().expect("non-empty stack");
                self.emit(TraceEvent::Exit { method: self.method_ids[done.method].clone() })?;
                if let Some(caller) = stack.last_mut() {
                    if let Some(dst) = done.ret_dst {
                        caller.regs[dst.index()] = Some(Value::Int(0));
                    }
                    caller.pc += 1;
                }
                continue;
            }
            if self.steps >= self.limits.max_steps {
                self.trace.truncated = true;
                return Err(Halt::Limit);
            }
            self.steps += 1;

            let frame = stack.last_mut().expect("non-empty stack");
            let instr = &method.instructions[frame.pc];
            let aux = self.aux[frame.method][frame.pc];
            match instr {
                Instruction::Const { dst, value } => {
                    frame.regs[dst.index()] = Some(Value::Int(*value));
                    frame.pc += 1;
                }
                Instruction::New { dst, .. } => {
                    let fields = self.program.classes[aux]
                        .fields
                        .iter()
                        .map(|f| if f.is_scalar() { Value::Int(0) } else { Value::Ref(None) })
                        .collect();
                    self.heap.push(Object { class: aux, fields });
                    frame.regs[dst.index()] = Some(Value::Ref(Some(self.heap.len() - 1)));
                    frame.pc += 1;
                }
                Instruction::GetField { dst, obj, class, field } => {
                    let res = self.fields[frame.method][frame.pc].as_ref().expect("resolved access");
                    let o = self.object(frame, *obj, res.class)?;
                    let ev = self.access_event(frame, AccessKind::GetField, class, field, res);
                    let value = self.heap[o].fields[res.slot];
                    self.emit(ev)?;
                    let frame = stack.last_mut().expect("non-empty stack");
                    frame.regs[dst.index()] = Some(value);
                    frame.pc += 1;
                }
                Instruction::PutField { obj, class, field, src } => {
                    let res = self.fields[frame.method][frame.pc].as_ref().expect("resolved access");
                    let o = self.object(frame, *obj, res.class)?;
                    let value = self.read(frame, *src)?;
                    let ok = match (value, res.ref_class) {
                        (Value::Int(_), None) | (Value::Ref(None), Some(_)) => true,
                        (Value::Ref(Some(v)), Some(c)) => self.heap[v].class == c,
                        _ => false,
                    };
                    if !ok {
                        return Err(self.fault(
                            frame,
                            FaultKind::TypeMismatch(format!("value in {src} does not fit {class}.{field}")),
                        ));
                    }
                    let slot = res.slot;
                    let ev = self.access_event(frame, AccessKind::PutField, class, field, res);
                    self.emit(ev)?;
                    self.heap[o].fields[slot] = value;
                    stack.last_mut().expect("non-empty stack").pc += 1;
                }
                Instruction::Add { dst, a, b } | Instruction::Sub { dst, a, b } => {
                    let (x, y) = (self.int(frame, *a)?, self.int(frame, *b)?);
                    let v = if matches!(instr, Instruction::Add { .. }) { x.wrapping_add(y) } else { x.wrapping_sub(y) };
                    frame.regs[dst.index()] = Some(Value::Int(v));
                    frame.pc += 1;
                }
                Instruction::IfLt { a, b, .. } => {
                    let (x, y) = (self.int(frame, *a)?, self.int(frame, *b)?);
                    frame.pc = if x < y { aux } else { frame.pc + 1 };
                }
                Instruction::Goto { .. } => frame.pc = aux,
                Instruction::Call { args, dst, .. } => {
                    let callee = &self.program.methods[aux];
                    let mut regs = vec![None; callee.register_count];
                    for (slot, r) in args.iter().enumerate() {
                        regs[slot] = Some(self.read(frame, *r)?);
                    }
                    let site = CallSite { caller: self.method_ids[frame.method].clone(), index: frame.pc };
                    self.emit(TraceEvent::Enter { method: self.method_ids[aux].clone(), call_site: Some(site) })?;
                    stack.push(Frame { method: aux, pc: 0, regs, ret_dst: *dst });
                }
                Instruction::Return { value } => {
                    let ret = match value {
                        Some(r) => self.read(frame, *r)?,
                        None => Value::Int(0),
                    };
                    let done = stack.pop().expect("non-empty stack");
                    self.emit(TraceEvent::Exit { method: self.method_ids[done.method].clone() })?;
                    if let Some(caller) = stack.last_mut() {
                        if let Some(dst) = done.ret_dst {
                            caller.regs[dst.index()] = Some(ret);
                        }
                        caller.pc += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs `program` from its entry method and records the access trace.
/// Hitting either limit stops execution cleanly with `truncated` set.
pub fn execute(program: &Program, limits: Limits) -> Result<Trace, RuntimeFault> {
    let mut m = Machine::new(program, limits);
    match m.run() {
        Ok(()) | Err(Halt::Limit) => Ok(m.trace),
        Err(Halt::Fault(f)) => Err(f),
    }
}
