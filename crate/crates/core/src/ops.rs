//! Textual operation scripts: one op per line, shared by fuzz repros and
//! the CLI batch command. Lines starting with '#' are comments.

use std::fmt;

/// One dynamic-graph operation over text k-mers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    AddNode(String),
    DelNode(String),
    AddEdge(String, String),
    DelEdge(String, String),
    Query(String),
    HasEdge(String, String),
    Succ(String),
    Pred(String),
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::AddNode(v) => write!(f, "addnode {v}"),
            Op::DelNode(v) => write!(f, "delnode {v}"),
            Op::AddEdge(u, v) => write!(f, "addedge {u} {v}"),
            Op::DelEdge(u, v) => write!(f, "deledge {u} {v}"),
            Op::Query(v) => write!(f, "query {v}"),
            Op::HasEdge(u, v) => write!(f, "hasedge {u} {v}"),
            Op::Succ(v) => write!(f, "succ {v}"),
            Op::Pred(v) => write!(f, "pred {v}"),
        }
    }
}

impl Op {
    /// Parse one line; Ok(None) for blanks and comments.
    pub fn parse_line(line: &str) -> Result<Option<Op>, String> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let mut parts = line.split_whitespace();
        let verb = parts.next().expect("non-empty line");
        let mut arg = |name: &str| {
            parts
                .next()
                .map(str::to_owned)
                .ok_or_else(|| format!("{verb}: missing {name} operand"))
        };
        let op = match verb {
            "addnode" => Op::AddNode(arg("k-mer")?),
            "delnode" => Op::DelNode(arg("k-mer")?),
            "addedge" => Op::AddEdge(arg("source")?, arg("target")?),
            "deledge" => Op::DelEdge(arg("source")?, arg("target")?),
            "query" => Op::Query(arg("k-mer")?),
            "hasedge" => Op::HasEdge(arg("source")?, arg("target")?),
            "succ" => Op::Succ(arg("k-mer")?),
            "pred" => Op::Pred(arg("k-mer")?),
            other => return Err(format!("unknown op {other:?}")),
        };
        if let Some(extra) = parts.next() {
            return Err(format!("{verb}: unexpected operand {extra:?}"));
        }
        Ok(Some(op))
    }

    /// Parse a whole script, reporting the first bad line.
    pub fn parse_script(text: &str) -> Result<Vec<Op>, String> {
        let mut ops = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            match Op::parse_line(line) {
                Ok(Some(op)) => ops.push(op),
                Ok(None) => {}
                Err(e) => return Err(format!("line {}: {e}", lineno + 1)),
            }
        }
        Ok(ops)
    }

    pub fn format_script(ops: &[Op]) -> String {
        let mut out = String::new();
        for op in ops {
            out.push_str(&op.to_string());
            out.push('\n');
        }
        out
    }
}
