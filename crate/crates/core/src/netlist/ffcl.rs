//! The line-based `.ffcl` interchange format.
//!
//! ```text
//! # comment
//! input a b
//! output y
//! gate y AND a b
//! ```

use std::fmt::Write;

use super::{is_valid_name, GateOp, Loc, Netlist, NetlistError, RawGate, RawNetlist};

pub fn parse_ffcl(text: &str) -> Result<Netlist, NetlistError> {
    parse_raw(text)?.build()
}

pub(crate) fn parse_raw(text: &str) -> Result<RawNetlist, NetlistError> {
    let mut raw = RawNetlist::default();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let body = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let tokens = tokenize(body, line_no);
        let Some(&(kw, kw_loc)) = tokens.first() else {
            continue;
        };
        let rest = &tokens[1..];
        for (i, &(tok, loc)) in rest.iter().enumerate() {
            // the operation token of a gate line is not a net name
            if !(kw == "gate" && i == 1) {
                check_name(tok, loc)?;
            }
        }
        match kw {
            "input" | "output" => {
                if rest.is_empty() {
                    return Err(NetlistError::Syntax {
                        msg: format!("`{kw}` needs at least one net name"),
                        loc: kw_loc,
                    });
                }
                let list = if kw == "input" {
                    &mut raw.inputs
                } else {
                    &mut raw.outputs
                };
                list.extend(rest.iter().map(|&(t, l)| (t.to_string(), l)));
            }
            "gate" => {
                if rest.len() < 2 {
                    return Err(NetlistError::Syntax {
                        msg: "expected `gate <out> <OP> <fanin> [<fanin>]`".into(),
                        loc: kw_loc,
                    });
                }
                let (out, out_loc) = rest[0];
                let (op_tok, op_loc) = rest[1];
                let op: GateOp = op_tok.parse().map_err(|_| NetlistError::Syntax {
                    msg: format!("unknown gate operation `{op_tok}`"),
                    loc: op_loc,
                })?;
                let fanins: Vec<String> = rest[2..].iter().map(|(t, _)| t.to_string()).collect();
                if fanins.is_empty() || fanins.len() > 2 || fanins.len() != op.arity() {
                    return Err(NetlistError::ArityMismatch {
                        name: out.to_string(),
                        op,
                        expected: op.arity(),
                        found: fanins.len(),
                        loc: out_loc,
                    });
                }
                raw.gates.push(RawGate {
                    output: out.to_string(),
                    op,
                    fanins,
                    loc: out_loc,
                });
            }
            other => {
                return Err(NetlistError::Syntax {
                    msg: format!("unknown statement `{other}`"),
                    loc: kw_loc,
                })
            }
        }
    }
    Ok(raw)
}

fn tokenize(line: &str, line_no: usize) -> Vec<(&str, Loc)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((&line[s..i], Loc::new(line_no, s + 1)));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((&line[s..], Loc::new(line_no, s + 1)));
    }
    out
}

fn check_name(tok: &str, loc: Loc) -> Result<(), NetlistError> {
    if is_valid_name(tok) {
        Ok(())
    } else {
        Err(NetlistError::Syntax {
            msg: format!("invalid net name `{tok}`"),
            loc,
        })
    }
}

/// Canonical document: one `input` line, one `output` line, then one line per
/// gate in node-id order.
pub fn emit_ffcl(netlist: &Netlist) -> String {
    let mut s = String::new();
    if netlist.num_inputs() > 0 {
        s.push_str("input");
        for id in netlist.inputs() {
            s.push(' ');
            s.push_str(netlist.name(id));
        }
        s.push('\n');
    }
    if !netlist.outputs().is_empty() {
        s.push_str("output");
        for &id in netlist.outputs() {
            s.push(' ');
            s.push_str(netlist.name(id));
        }
        s.push('\n');
    }
    for id in netlist.gates() {
        let node = netlist.node(id);
        write!(s, "gate {} {}", node.name, node.op().unwrap()).unwrap();
        for &f in node.fanins() {
            s.push(' ');
            s.push_str(netlist.name(f));
        }
        s.push('\n');
    }
    s
}
