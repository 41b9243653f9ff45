use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Instruction, MethodDef, Program};

/// Canonical text form. `parse_program(&serialize_program(p)) == Ok(p)` for
/// every valid program.
pub fn serialize_program(p: &Program) -> String {
    let mut out = String::new();
    for class in &p.classes {
        let fields: Vec<String> = class
            .fields
            .iter()
            .map(|f| format!("{}: {}", f.name, f.declared_type))
            .collect();
        if fields.is_empty() {
            writeln!(out, "class {} {{ }}", class.name).unwrap();
        } else {
            writeln!(out, "class {} {{ {} }}", class.name, fields.join(", ")).unwrap();
        }
    }
    writeln!(out, "entry {}", p.entry).unwrap();
    for m in &p.methods {
        out.push('\n');
        write_method(&mut out, m);
    }
    out
}

fn write_method(out: &mut String, m: &MethodDef) {
    write!(
        out,
        "method {}.{} params {} regs {} {{",
        m.owner, m.name, m.param_count, m.register_count
    )
    .unwrap();
    if m.instructions.is_empty() {
        out.push_str(" }\n");
        return;
    }
    out.push('\n');
    let mut by_index: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (label, &idx) in &m.labels {
        by_index.entry(idx).or_default().push(label);
    }
    for (idx, instr) in m.instructions.iter().enumerate() {
        for label in by_index.get(&idx).into_iter().flatten() {
            writeln!(out, "{label}:").unwrap();
        }
        writeln!(out, "  {}", format_instruction(instr)).unwrap();
    }
    out.push_str("}\n");
}

pub(crate) fn format_instruction(instr: &Instruction) -> String {
    use Instruction::*;
    match instr {
        Const { dst, value } => format!("const {dst}, {value}"),
        New { dst, class } => format!("new {dst}, {class}"),
        GetField { dst, obj, class, field } => format!("getfield {dst}, {obj}, {class}.{field}"),
        PutField { obj, class, field, src } => format!("putfield {obj}, {class}.{field}, {src}"),
        Add { dst, a, b } => format!("add {dst}, {a}, {b}"),
        Sub { dst, a, b } => format!("sub {dst}, {a}, {b}"),
        IfLt { a, b, label } => format!("if_lt {a}, {b}, {label}"),
        Goto { label } => format!("goto {label}"),
        Call { method, args, dst } => {
            let args: Vec<String> = args.iter().map(|r| r.to_string()).collect();
            match dst {
                Some(d) => format!("call {method}({}) -> {d}", args.join(", ")),
                None => format!("call {method}({})", args.join(", ")),
            }
        }
        Return { value: Some(r) } => format!("return {r}"),
        Return { value: None } => "return".to_string(),
    }
}
