//! Line-oriented trace files. Fields are tab-separated; the sample below
//! shows tabs as spaces.
//!
//! ```text
//! E    A.main    -    -
//! A    putfield    A    x    int    A.main    2
//! X    A.main
//! #truncated
//! ```

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{CallSite, Trace, TraceEvent};
use crate::ir::MethodId;

const TRUNCATED: &str = "#truncated";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_trace<W: Write>(t: &Trace, mut sink: W) -> io::Result<()> {
    for e in &t.events {
        match e {
            TraceEvent::Access { kind, class_name, field_name, value_type, method, index } => writeln!(
                sink,
                "A\t{}\t{class_name}\t{field_name}\t{value_type}\t{method}\t{index}",
                kind.as_str()
            )?,
            TraceEvent::Enter { method, call_site: Some(site) } => {
                writeln!(sink, "E\t{method}\t{}\t{}", site.caller, site.index)?
            }
            TraceEvent::Enter { method, call_site: None } => writeln!(sink, "E\t{method}\t-\t-")?,
            TraceEvent::Exit { method } => writeln!(sink, "X\t{method}")?,
        }
    }
    if t.truncated {
        writeln!(sink, "{TRUNCATED}")?;
    }
    sink.flush()
}

pub fn write_trace_file(t: &Trace, path: &Path) -> io::Result<()> {
    write_trace(t, BufWriter::new(File::create(path)?))
}

pub fn read_trace<R: BufRead>(source: R) -> Result<Trace, TraceError> {
    let mut trace = Trace::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let bad = |msg: String| TraceError::Malformed { line: line_no, msg };
        if trace.truncated {
            return Err(bad(format!("content after `{TRUNCATED}`")));
        }
        if line.is_empty() {
            continue;
        }
        if line == TRUNCATED {
            trace.truncated = true;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let expect = |n: usize| {
            if cols.len() == n {
                Ok(())
            } else {
                Err(bad(format!(
                    "`{}` record needs {} fields, found {}",
                    cols[0],
                    n - 1,
                    cols.len() - 1
                )))
            }
        };
        let method = |s: &str| s.parse::<MethodId>().map_err(bad);
        let index = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad instruction index `{s}`")));
        let event = match cols[0] {
            "A" => {
                expect(7)?;
                TraceEvent::Access {
                    kind: cols[1].parse().map_err(bad)?,
                    class_name: nonempty(cols[2], line_no)?,
                    field_name: nonempty(cols[3], line_no)?,
                    value_type: nonempty(cols[4], line_no)?,
                    method: method(cols[5])?,
                    index: index(cols[6])?,
                }
            }
            "E" => {
                expect(4)?;
                let call_site = match (cols[2], cols[3]) {
                    ("-", "-") => None,
                    (caller, idx) => Some(CallSite { caller: method(caller)?, index: index(idx)? }),
                };
                TraceEvent::Enter { method: method(cols[1])?, call_site }
            }
            "X" => {
                expect(2)?;
                TraceEvent::Exit { method: method(cols[1])? }
            }
            other => return Err(bad(format!("unknown record tag `{other}`"))),
        };
        trace.events.push(event);
    }
    Ok(trace)
}

fn nonempty(s: &str, line: usize) -> Result<String, TraceError> {
    if s.is_empty() {
        Err(TraceError::Malformed { line, msg: "empty name".into() })
    } else {
        Ok(s.to_string())
    }
}

pub fn read_trace_file(path: &Path) -> Result<Trace, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}
