//! The mini-IR: a small register-based object-oriented language.
//!
//! Programs declare classes with typed fields and methods owned by those
//! classes. Field accesses (`getfield` / `putfield`) carry their statically
//! resolved owning class, so the declared type of the accessed field is known
//! without any dataflow analysis. The textual format is described in
//! `docs/mir-grammar.md`.

mod generate;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_random_program, generate_with, GenConfig};
pub use parse::parse_program;
pub use print::serialize_program;

/// Marker type name for scalar fields.
pub const INT_TYPE: &str = "int";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unresolved reference `{name}`{}", at_line(*.line))]
    Unresolved { name: String, line: Option<usize> },
    #[error("duplicate definition of `{name}`{}", at_line(*.line))]
    Duplicate { name: String, line: Option<usize> },
    #[error("invalid program: {0}")]
    Invalid(String),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

/// Method identifier: owning class plus method name, written `Owner.name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct MethodId {
    pub owner: String,
    pub name: String,
}

impl MethodId {
    pub fn new(owner: impl Into<String>, name: impl Into<String>) -> Self {
        MethodId {
            owner: owner.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.owner, self.name)
    }
}

impl FromStr for MethodId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((owner, name))
                if is_ident(owner) && is_ident(name) =>
            {
                Ok(MethodId::new(owner, name))
            }
            _ => Err(format!("malformed method id `{s}`")),
        }
    }
}

impl From<MethodId> for String {
    fn from(m: MethodId) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for MethodId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Register index within a method frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(pub u32);

impl Reg {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    /// A class name, or [`INT_TYPE`].
    pub declared_type: String,
}

impl FieldDecl {
    pub fn is_scalar(&self) -> bool {
        self.declared_type == INT_TYPE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub fields: Vec<FieldDecl>,
}

impl ClassDef {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Const { dst: Reg, value: i64 },
    New { dst: Reg, class: String },
    GetField { dst: Reg, obj: Reg, class: String, field: String },
    PutField { obj: Reg, class: String, field: String, src: Reg },
    Add { dst: Reg, a: Reg, b: Reg },
    Sub { dst: Reg, a: Reg, b: Reg },
    IfLt { a: Reg, b: Reg, label: String },
    Goto { label: String },
    Call { method: MethodId, args: Vec<Reg>, dst: Option<Reg> },
    Return { value: Option<Reg> },
}

impl Instruction {
    /// Branch target label, if this instruction can transfer control to one.
    pub fn target(&self) -> Option<&str> {
        match self {
            Instruction::IfLt { label, .. } | Instruction::Goto { label } => Some(label),
            _ => None,
        }
    }

    /// True for instructions that end a basic block.
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Instruction::IfLt { .. } | Instruction::Goto { .. } | Instruction::Return { .. }
        )
    }

    /// True if execution can continue at the next instruction.
    pub fn falls_through(&self) -> bool {
        !matches!(self, Instruction::Goto { .. } | Instruction::Return { .. })
    }

    /// The field access this instruction performs, if any.
    pub fn field_access(&self) -> Option<(AccessKind, &str, &str)> {
        match self {
            Instruction::GetField { class, field, .. } => Some((AccessKind::GetField, class, field)),
            Instruction::PutField { class, field, .. } => Some((AccessKind::PutField, class, field)),
            _ => None,
        }
    }

    fn registers(&self) -> Vec<Reg> {
        use Instruction::*;
        match self {
            Const { dst, .. } | New { dst, .. } => vec![*dst],
            GetField { dst, obj, .. } => vec![*dst, *obj],
            PutField { obj, src, .. } => vec![*obj, *src],
            Add { dst, a, b } | Sub { dst, a, b } => vec![*dst, *a, *b],
            IfLt { a, b, .. } => vec![*a, *b],
            Goto { .. } => vec![],
            Call { args, dst, .. } => args.iter().copied().chain(*dst).collect(),
            Return { value } => value.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    #[serde(rename = "getfield")]
    GetField,
    #[serde(rename = "putfield")]
    PutField,
}

impl AccessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessKind::GetField => "getfield",
            AccessKind::PutField => "putfield",
        }
    }
}

impl FromStr for AccessKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "getfield" => Ok(AccessKind::GetField),
            "putfield" => Ok(AccessKind::PutField),
            _ => Err(format!("unknown access kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub owner: String,
    pub name: String,
    pub param_count: usize,
    pub register_count: usize,
    pub instructions: Vec<Instruction>,
    pub labels: BTreeMap<String, usize>,
}

impl MethodDef {
    pub fn id(&self) -> MethodId {
        MethodId::new(self.owner.clone(), self.name.clone())
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    /// Instruction indices that carry at least one label.
    pub fn labelled_indices(&self) -> BTreeSet<usize> {
        self.labels.values().copied().collect()
    }

    /// Successor instruction indices of instruction `idx`. `None` stands
    /// for leaving the method.
    pub fn instruction_successors(&self, idx: usize) -> Vec<Option<usize>> {
        let instr = &self.instructions[idx];
        let next = if idx + 1 < self.instructions.len() {
            Some(idx + 1)
        } else {
            None
        };
        let mut out = Vec::with_capacity(2);
        if let Instruction::Return { .. } = instr {
            out.push(None);
            return out;
        }
        if instr.falls_through() {
            out.push(next);
        }
        if let Some(label) = instr.target() {
            out.push(self.label_index(label));
        }
        out
    }

    /// Number of OO access instructions in the body.
    pub fn access_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.field_access().is_some())
            .count()
    }
}

/// A single object-oriented field access as recorded in models.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OOAccess {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "field")]
    pub field_name: String,
    #[serde(rename = "type")]
    pub value_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub classes: Vec<ClassDef>,
    pub methods: Vec<MethodDef>,
    pub entry: MethodId,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn method(&self, id: &MethodId) -> Option<&MethodDef> {
        self.methods
            .iter()
            .find(|m| m.owner == id.owner && m.name == id.name)
    }

    pub fn field(&self, class: &str, field: &str) -> Option<&FieldDecl> {
        self.class(class)?.field(field)
    }

    /// Resolves an access instruction to the recorded access triple.
    pub fn oo_access(&self, instr: &Instruction) -> Option<OOAccess> {
        let (_, class, field) = instr.field_access()?;
        let decl = self.field(class, field)?;
        Some(OOAccess {
            class_name: class.to_string(),
            field_name: field.to_string(),
            value_type: decl.declared_type.clone(),
        })
    }

    /// Checks every structural invariant of a well-formed program.
    pub fn validate(&self) -> Result<(), IrError> {
        let mut class_names = HashSet::new();
        for class in &self.classes {
            if !class_names.insert(class.name.as_str()) {
                return Err(IrError::Duplicate {
                    name: class.name.clone(),
                    line: None,
                });
            }
            if class.name == INT_TYPE {
                return Err(IrError::Invalid("`int` is reserved".into()));
            }
            let mut fields = HashSet::new();
            for f in &class.fields {
                if !fields.insert(f.name.as_str()) {
                    return Err(IrError::Duplicate {
                        name: format!("{}.{}", class.name, f.name),
                        line: None,
                    });
                }
            }
        }
        for class in &self.classes {
            for f in &class.fields {
                if !f.is_scalar() && !class_names.contains(f.declared_type.as_str()) {
                    return Err(IrError::Unresolved {
                        name: f.declared_type.clone(),
                        line: None,
                    });
                }
            }
        }

        let mut arity: HashMap<MethodId, usize> = HashMap::new();
        for m in &self.methods {
            if !class_names.contains(m.owner.as_str()) {
                return Err(IrError::Unresolved {
                    name: m.owner.clone(),
                    line: None,
                });
            }
            if arity.insert(m.id(), m.param_count).is_some() {
                return Err(IrError::Duplicate {
                    name: m.id().to_string(),
                    line: None,
                });
            }
        }
        match arity.get(&self.entry) {
            None => {
                return Err(IrError::Unresolved {
                    name: self.entry.to_string(),
                    line: None,
                })
            }
            Some(&n) if n != 0 => {
                return Err(IrError::Invalid(format!(
                    "entry method {} must take no parameters",
                    self.entry
                )))
            }
            _ => {}
        }

        for m in &self.methods {
            self.validate_method(m, &arity)?;
        }
        Ok(())
    }

    fn validate_method(&self, m: &MethodDef, arity: &HashMap<MethodId, usize>) -> Result<(), IrError> {
        let id = m.id();
        if m.register_count == 0 {
            return Err(IrError::Invalid(format!("{id}: register count must be positive")));
        }
        if m.param_count > m.register_count {
            return Err(IrError::Invalid(format!(
                "{id}: {} parameters do not fit in {} registers",
                m.param_count, m.register_count
            )));
        }
        for (label, &idx) in &m.labels {
            if idx >= m.instructions.len() {
                return Err(IrError::Invalid(format!(
                    "{id}: label {label} does not precede an instruction"
                )));
            }
        }
        for (idx, instr) in m.instructions.iter().enumerate() {
            for r in instr.registers() {
                if r.index() >= m.register_count {
                    return Err(IrError::Invalid(format!(
                        "{id}@{idx}: register {r} out of range (regs {})",
                        m.register_count
                    )));
                }
            }
            if let Some(label) = instr.target() {
                if !m.labels.contains_key(label) {
                    return Err(IrError::Unresolved {
                        name: format!("{id}:{label}"),
                        line: None,
                    });
                }
            }
            match instr {
                Instruction::GetField { class, field, .. }
                | Instruction::PutField { class, field, .. } => {
                    if self.field(class, field).is_none() {
                        return Err(IrError::Unresolved {
                            name: format!("{class}.{field}"),
                            line: None,
                        });
                    }
                }
                Instruction::New { class, .. } => {
                    if self.class(class).is_none() {
                        return Err(IrError::Unresolved {
                            name: class.clone(),
                            line: None,
                        });
                    }
                }
                Instruction::Call { method, args, .. } => match arity.get(method) {
                    None => {
                        return Err(IrError::Unresolved {
                            name: method.to_string(),
                            line: None,
                        })
                    }
                    Some(&n) if n != args.len() => {
                        return Err(IrError::Invalid(format!(
                            "{id}@{idx}: {method} takes {n} arguments, {} given",
                            args.len()
                        )))
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        check_reachability(m)
    }
}

/// Every instruction must be reachable from the method start and must be able
/// to reach a method exit.
fn check_reachability(m: &MethodDef) -> Result<(), IrError> {
    let n = m.instructions.len();
    if n == 0 {
        return Ok(());
    }
    let succs: Vec<Vec<Option<usize>>> = (0..n).map(|i| m.instruction_successors(i)).collect();

    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for s in succs[i].iter().flatten() {
            if !seen[*s] {
                seen[*s] = true;
                stack.push(*s);
            }
        }
    }
    if let Some(dead) = seen.iter().position(|s| !s) {
        return Err(IrError::Invalid(format!(
            "{}@{dead}: unreachable instruction",
            m.id()
        )));
    }

    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut exits = Vec::new();
    for (i, ss) in succs.iter().enumerate() {
        for s in ss {
            match s {
                Some(s) => preds[*s].push(i),
                None => exits.push(i),
            }
        }
    }
    let mut live = vec![false; n];
    for &e in &exits {
        live[e] = true;
    }
    let mut stack = exits;
    while let Some(i) = stack.pop() {
        for &p in &preds[i] {
            if !live[p] {
                live[p] = true;
                stack.push(p);
            }
        }
    }
    if let Some(stuck) = live.iter().position(|l| !l) {
        return Err(IrError::Invalid(format!(
            "{}@{stuck}: instruction cannot reach a method exit",
            m.id()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_id_round_trips_through_text() {
        let id: MethodId = "Node.visit".parse().unwrap();
        assert_eq!(id, MethodId::new("Node", "visit"));
        assert_eq!(id.to_string(), "Node.visit");
        assert!("Node".parse::<MethodId>().is_err());
        assert!("Node.".parse::<MethodId>().is_err());
    }

    #[test]
    fn infinite_loop_is_rejected() {
        let src = "class A { }\nentry A.main\nmethod A.main params 0 regs 1 {\nLtop:\n  goto Ltop\n}\n";
        let err = parse_program(src).unwrap_err();
        assert!(matches!(err, IrError::Invalid(ref m) if m.contains("exit")), "{err}");
    }

    #[test]
    fn unreachable_code_is_rejected() {
        let src = "class A { }\nentry A.main\nmethod A.main params 0 regs 1 {\n  return\n  const r0, 1\n}\n";
        let err = parse_program(src).unwrap_err();
        assert!(matches!(err, IrError::Invalid(ref m) if m.contains("unreachable")), "{err}");
    }

    #[test]
    fn entry_with_params_is_rejected() {
        let src = "class A { }\nentry A.main\nmethod A.main params 1 regs 1 { }\n";
        assert!(matches!(parse_program(src), Err(IrError::Invalid(_))));
    }

    #[test]
    fn call_arity_is_checked() {
        let src = "class A { }\nentry A.main\nmethod A.main params 0 regs 2 {\n  call A.f(r0, r1)\n}\nmethod A.f params 1 regs 1 { }\n";
        assert!(matches!(parse_program(src), Err(IrError::Invalid(_))));
    }
}
