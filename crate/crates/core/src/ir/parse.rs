use std::collections::BTreeMap;

use super::{ClassDef, FieldDecl, Instruction, IrError, MethodDef, MethodId, Program, Reg};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

const PUNCT: [&str; 8] = ["->", "{", "}", ",", ":", ".", "(", ")"];

fn lex(line_no: usize, text: &str) -> Result<Vec<(Tok, usize)>, IrError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        if c == b'#' {
            break;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), col));
            continue;
        }
        if c.is_ascii_digit() || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let value = text[start..i].parse::<i64>().map_err(|_| IrError::Syntax {
                line: line_no,
                col,
                msg: format!("integer literal `{}` out of range", &text[start..i]),
            })?;
            out.push((Tok::Int(value), col));
            continue;
        }
        match PUNCT.iter().find(|p| text[i..].starts_with(**p)) {
            Some(p) => {
                out.push((Tok::Punct(p), col));
                i += p.len();
            }
            None => {
                return Err(IrError::Syntax {
                    line: line_no,
                    col,
                    msg: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                })
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [(Tok, usize)], line: usize, text: &str) -> Self {
        Cursor {
            toks,
            pos: 0,
            line,
            eol_col: text.trim_end().len() + 1,
        }
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol_col, |t| t.1)
    }

    fn err(&self, msg: impl Into<String>) -> IrError {
        IrError::Syntax {
            line: self.line,
            col: self.col(),
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_end(&self) -> Result<(), IrError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected {} at end of line", t.describe()))),
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn punct(&mut self, p: &str) -> Result<(), IrError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.found(&format!("`{p}`")))
        }
    }

    fn found(&self, wanted: &str) -> IrError {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {}", t.describe())),
            None => self.err(format!("expected {wanted}, found end of line")),
        }
    }

    fn ident(&mut self) -> Result<String, IrError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.found("identifier")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), IrError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.found(&format!("`{kw}`"))),
        }
    }

    fn int(&mut self) -> Result<i64, IrError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.found("integer")),
        }
    }

    fn count(&mut self) -> Result<usize, IrError> {
        let col = self.col();
        let v = self.int()?;
        usize::try_from(v).map_err(|_| IrError::Syntax {
            line: self.line,
            col,
            msg: format!("expected a non-negative count, found {v}"),
        })
    }

    fn reg(&mut self) -> Result<Reg, IrError> {
        if let Some(Tok::Ident(s)) = self.peek() {
            if let Some(n) = s.strip_prefix('r').and_then(|d| d.parse::<u32>().ok()) {
                self.pos += 1;
                return Ok(Reg(n));
            }
        }
        Err(self.found("register"))
    }

    /// `Class.member`
    fn qualified(&mut self) -> Result<(String, String), IrError> {
        let a = self.ident()?;
        self.punct(".")?;
        let b = self.ident()?;
        Ok((a, b))
    }

    fn label(&mut self) -> Result<String, IrError> {
        match self.peek() {
            Some(Tok::Ident(s)) if is_label(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.found("label")),
        }
    }
}

fn is_label(s: &str) -> bool {
    s.starts_with('L')
}

struct OpenMethod {
    def: MethodDef,
    pending_labels: Vec<(String, usize)>,
}

/// Parses the textual mini-IR and validates the resulting program.
pub fn parse_program(source: &str) -> Result<Program, IrError> {
    let mut classes: Vec<ClassDef> = Vec::new();
    let mut methods: Vec<MethodDef> = Vec::new();
    let mut entry: Option<MethodId> = None;
    let mut open: Option<OpenMethod> = None;

    for (i, text) in source.lines().enumerate() {
        let line = i + 1;
        let toks = lex(line, text)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(&toks, line, text);

        if let Some(mut m) = open.take() {
            if cur.eat_punct("}") {
                cur.expect_end()?;
                methods.push(close_method(m, line)?);
                continue;
            }
            if let Some(Tok::Ident(s)) = cur.peek() {
                if is_label(s) && matches!(toks.get(1), Some((Tok::Punct(":"), _))) {
                    let label = s.clone();
                    if m.def.labels.contains_key(&label)
                        || m.pending_labels.iter().any(|(l, _)| *l == label)
                    {
                        return Err(IrError::Duplicate { name: label, line: Some(line) });
                    }
                    cur.pos += 2;
                    m.pending_labels.push((label, line));
                }
            }
            if !cur.at_end() {
                let instr = parse_instruction(&mut cur)?;
                cur.expect_end()?;
                let idx = m.def.instructions.len();
                for (label, _) in m.pending_labels.drain(..) {
                    m.def.labels.insert(label, idx);
                }
                m.def.instructions.push(instr);
            }
            open = Some(m);
            continue;
        }

        let kw = cur.ident()?;
        match kw.as_str() {
            "class" => {
                let class = parse_class(&mut cur)?;
                if classes.iter().any(|c| c.name == class.name) {
                    return Err(IrError::Duplicate { name: class.name, line: Some(line) });
                }
                classes.push(class);
            }
            "entry" => {
                let (owner, name) = cur.qualified()?;
                cur.expect_end()?;
                if entry.is_some() {
                    return Err(IrError::Duplicate { name: "entry".into(), line: Some(line) });
                }
                entry = Some(MethodId::new(owner, name));
            }
            "method" => {
                let (owner, name) = cur.qualified()?;
                cur.keyword("params")?;
                let param_count = cur.count()?;
                cur.keyword("regs")?;
                let register_count = cur.count()?;
                cur.punct("{")?;
                let def = MethodDef {
                    owner,
                    name,
                    param_count,
                    register_count,
                    instructions: Vec::new(),
                    labels: BTreeMap::new(),
                };
                if methods.iter().any(|m| m.owner == def.owner && m.name == def.name) {
                    return Err(IrError::Duplicate { name: def.id().to_string(), line: Some(line) });
                }
                let m = OpenMethod { def, pending_labels: Vec::new() };
                if cur.eat_punct("}") {
                    cur.expect_end()?;
                    methods.push(close_method(m, line)?);
                } else {
                    cur.expect_end()?;
                    open = Some(m);
                }
            }
            other => {
                cur.pos -= 1;
                return Err(cur.err(format!("expected `class`, `entry` or `method`, found `{other}`")));
            }
        }
    }

    if let Some(m) = open {
        return Err(IrError::Syntax {
            line: source.lines().count() + 1,
            col: 1,
            msg: format!("unterminated method {}", m.def.id()),
        });
    }
    let entry = entry.ok_or_else(|| IrError::Invalid("missing `entry` declaration".into()))?;
    let program = Program { classes, methods, entry };
    program.validate()?;
    Ok(program)
}

fn close_method(m: OpenMethod, line: usize) -> Result<MethodDef, IrError> {
    if let Some((label, at)) = m.pending_labels.first() {
        return Err(IrError::Syntax {
            line: *at,
            col: 1,
            msg: format!("label {label} is not followed by an instruction before line {line}"),
        });
    }
    Ok(m.def)
}

fn parse_class(cur: &mut Cursor<'_>) -> Result<ClassDef, IrError> {
    let name = cur.ident()?;
    cur.punct("{")?;
    let mut fields: Vec<FieldDecl> = Vec::new();
    if !cur.eat_punct("}") {
        loop {
            let fname = cur.ident()?;
            cur.punct(":")?;
            let ty = cur.ident()?;
            if fields.iter().any(|f| f.name == fname) {
                return Err(IrError::Duplicate {
                    name: format!("{name}.{fname}"),
                    line: Some(cur.line),
                });
            }
            fields.push(FieldDecl { name: fname, declared_type: ty });
            if cur.eat_punct("}") {
                break;
            }
            cur.punct(",")?;
        }
    }
    cur.expect_end()?;
    Ok(ClassDef { name, fields })
}

fn parse_instruction(cur: &mut Cursor<'_>) -> Result<Instruction, IrError> {
    let op_col = cur.col();
    let op = cur.ident()?;
    let instr = match op.as_str() {
        "const" => {
            let dst = cur.reg()?;
            cur.punct(",")?;
            Instruction::Const { dst, value: cur.int()? }
        }
        "new" => {
            let dst = cur.reg()?;
            cur.punct(",")?;
            Instruction::New { dst, class: cur.ident()? }
        }
        "getfield" => {
            let dst = cur.reg()?;
            cur.punct(",")?;
            let obj = cur.reg()?;
            cur.punct(",")?;
            let (class, field) = cur.qualified()?;
            Instruction::GetField { dst, obj, class, field }
        }
        "putfield" => {
            let obj = cur.reg()?;
            cur.punct(",")?;
            let (class, field) = cur.qualified()?;
            cur.punct(",")?;
            let src = cur.reg()?;
            Instruction::PutField { obj, class, field, src }
        }
        "add" | "sub" => {
            let dst = cur.reg()?;
            cur.punct(",")?;
            let a = cur.reg()?;
            cur.punct(",")?;
            let b = cur.reg()?;
            if op == "add" {
                Instruction::Add { dst, a, b }
            } else {
                Instruction::Sub { dst, a, b }
            }
        }
        "if_lt" => {
            let a = cur.reg()?;
            cur.punct(",")?;
            let b = cur.reg()?;
            cur.punct(",")?;
            Instruction::IfLt { a, b, label: cur.label()? }
        }
        "goto" => Instruction::Goto { label: cur.label()? },
        "call" => {
            let (owner, name) = cur.qualified()?;
            cur.punct("(")?;
            let mut args = Vec::new();
            if !cur.eat_punct(")") {
                loop {
                    args.push(cur.reg()?);
                    if cur.eat_punct(")") {
                        break;
                    }
                    cur.punct(",")?;
                }
            }
            let dst = if cur.eat_punct("->") { Some(cur.reg()?) } else { None };
            Instruction::Call { method: MethodId::new(owner, name), args, dst }
        }
        "return" => {
            let value = if cur.at_end() { None } else { Some(cur.reg()?) };
            Instruction::Return { value }
        }
        other => {
            return Err(IrError::Syntax {
                line: cur.line,
                col: op_col,
                msg: format!("unknown instruction `{other}`"),
            })
        }
    };
    Ok(instr)
}
