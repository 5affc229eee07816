//! Strict structural Verilog front-end.
//!
//! Accepts a single module built only from gate primitives
//! (`and or xor xnor nand nor not buf`) with scalar ports, in either ANSI
//! (`module m(input a, output y);`) or classic (`module m(a, y); input a;`)
//! header style. Everything else is rejected as an unsupported construct.

use super::{GateOp, Loc, Netlist, NetlistError, RawGate, RawNetlist};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tok<'a> {
    Ident(&'a str),
    Punct(char),
}

struct Lexer<'a> {
    toks: Vec<(Tok<'a>, Loc)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok<'_>, Loc)>, NetlistError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let loc = Loc::new(line, i - line_start + 1);
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(NetlistError::Syntax {
                            msg: "unterminated block comment".into(),
                            loc,
                        });
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                        line_start = i + 1;
                    }
                    i += 1;
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'\\' || c == b'$' => {
                let start = i;
                i += 1;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
                {
                    i += 1;
                }
                out.push((Tok::Ident(&text[start..i]), loc));
            }
            b'(' | b')' | b',' | b';' => {
                out.push((Tok::Punct(c as char), loc));
                i += 1;
            }
            b'[' | b'=' | b'#' | b'`' | b'@' | b'.' | b'{' | b'\'' => {
                return Err(NetlistError::UnsupportedConstruct {
                    construct: (c as char).to_string(),
                    loc,
                })
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(NetlistError::Syntax {
                    msg: format!("unexpected character `{ch}`"),
                    loc,
                });
            }
        }
    }
    Ok(out)
}

const UNSUPPORTED: &[&str] = &[
    "always",
    "assign",
    "parameter",
    "localparam",
    "reg",
    "initial",
    "generate",
    "function",
    "task",
    "integer",
    "logic",
    "supply0",
    "supply1",
    "tri",
    "defparam",
    "specify",
];

impl<'a> Lexer<'a> {
    fn end_loc(&self) -> Loc {
        self.toks.last().map(|t| t.1).unwrap_or_default()
    }

    fn peek(&self) -> Option<(Tok<'a>, Loc)> {
        self.toks.get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok<'a>, Loc), NetlistError> {
        let t = self.peek().ok_or_else(|| NetlistError::Syntax {
            msg: "unexpected end of input".into(),
            loc: self.end_loc(),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn ident(&mut self) -> Result<(&'a str, Loc), NetlistError> {
        match self.next()? {
            (Tok::Ident(s), loc) => {
                if UNSUPPORTED.contains(&s) {
                    return Err(NetlistError::UnsupportedConstruct {
                        construct: s.into(),
                        loc,
                    });
                }
                if !super::is_valid_name(s) {
                    return Err(NetlistError::Syntax {
                        msg: format!("unsupported identifier `{s}`"),
                        loc,
                    });
                }
                Ok((s, loc))
            }
            (Tok::Punct(c), loc) => Err(NetlistError::Syntax {
                msg: format!("expected identifier, found `{c}`"),
                loc,
            }),
        }
    }

    fn punct(&mut self, want: char) -> Result<(), NetlistError> {
        match self.next()? {
            (Tok::Punct(c), _) if c == want => Ok(()),
            (tok, loc) => Err(NetlistError::Syntax {
                msg: format!("expected `{want}`, found {}", describe(tok)),
                loc,
            }),
        }
    }

    fn eat(&mut self, want: char) -> bool {
        if matches!(self.peek(), Some((Tok::Punct(c), _)) if c == want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

fn describe(tok: Tok<'_>) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Punct(c) => format!("`{c}`"),
    }
}

fn primitive(name: &str) -> Option<GateOp> {
    Some(match name {
        "and" => GateOp::And,
        "or" => GateOp::Or,
        "xor" => GateOp::Xor,
        "xnor" => GateOp::Xnor,
        "nand" => GateOp::Nand,
        "nor" => GateOp::Nor,
        "not" => GateOp::Not,
        "buf" => GateOp::Buf,
        _ => return None,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Input,
    Output,
}

pub fn parse_structural_verilog(text: &str) -> Result<Netlist, NetlistError> {
    let mut lx = Lexer {
        toks: lex(text)?,
        pos: 0,
    };
    let (kw, loc) = lx.ident()?;
    if kw != "module" {
        return Err(NetlistError::Syntax {
            msg: format!("expected `module`, found `{kw}`"),
            loc,
        });
    }
    lx.ident()?;

    let mut raw = RawNetlist::default();
    // Ports listed in a classic header, resolved by later declarations.
    let mut header_ports: Vec<(String, Loc)> = Vec::new();
    let mut ansi = false;

    if lx.eat('(') && !lx.eat(')') {
        let mut dir: Option<Dir> = None;
        loop {
            let (name, loc) = lx.ident()?;
            match name {
                "input" => {
                    dir = Some(Dir::Input);
                    ansi = true;
                    skip_net_kind(&mut lx);
                    continue;
                }
                "output" => {
                    dir = Some(Dir::Output);
                    ansi = true;
                    skip_net_kind(&mut lx);
                    continue;
                }
                "inout" => {
                    return Err(NetlistError::UnsupportedConstruct {
                        construct: "inout".into(),
                        loc,
                    })
                }
                _ => {}
            }
            match dir {
                Some(Dir::Input) => raw.inputs.push((name.to_string(), loc)),
                Some(Dir::Output) => raw.outputs.push((name.to_string(), loc)),
                None => header_ports.push((name.to_string(), loc)),
            }
            if lx.eat(')') {
                break;
            }
            lx.punct(',')?;
        }
    }
    lx.punct(';')?;

    loop {
        let (word, loc) = lx.ident()?;
        match word {
            "endmodule" => break,
            "module" => {
                return Err(NetlistError::UnsupportedConstruct {
                    construct: "nested module".into(),
                    loc,
                })
            }
            "input" | "output" | "wire" => {
                if word != "wire" && ansi {
                    return Err(NetlistError::Syntax {
                        msg: "port redeclared in body of an ANSI-style module".into(),
                        loc,
                    });
                }
                if word != "wire" {
                    skip_net_kind(&mut lx);
                }
                loop {
                    let (name, nloc) = lx.ident()?;
                    match word {
                        "input" => raw.inputs.push((name.to_string(), nloc)),
                        "output" => raw.outputs.push((name.to_string(), nloc)),
                        _ => {}
                    }
                    if lx.eat(';') {
                        break;
                    }
                    lx.punct(',')?;
                }
            }
            other => {
                let Some(op) = primitive(other) else {
                    return Err(NetlistError::UnsupportedConstruct {
                        construct: other.to_string(),
                        loc,
                    });
                };
                if !lx.eat('(') {
                    lx.ident()?;
                    lx.punct('(')?;
                }
                let mut terms = Vec::new();
                loop {
                    terms.push(lx.ident()?);
                    if lx.eat(')') {
                        break;
                    }
                    lx.punct(',')?;
                }
                lx.punct(';')?;
                let (out, out_loc) = terms[0];
                let fanins: Vec<String> = terms[1..].iter().map(|t| t.0.to_string()).collect();
                if fanins.len() != op.arity() {
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
        }
    }
    if let Some((tok, loc)) = lx.peek() {
        return Err(NetlistError::UnsupportedConstruct {
            construct: format!("trailing {}", describe(tok)),
            loc,
        });
    }

    for (name, loc) in &header_ports {
        let declared = raw
            .inputs
            .iter()
            .chain(&raw.outputs)
            .any(|(n, _)| n == name);
        if !declared {
            return Err(NetlistError::Syntax {
                msg: format!("port `{name}` has no direction declaration"),
                loc: *loc,
            });
        }
    }
    raw.build()
}

fn skip_net_kind(lx: &mut Lexer<'_>) {
    if matches!(lx.peek(), Some((Tok::Ident("wire"), _))) {
        lx.pos += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_ffcl, NodeId};

    #[test]
    fn single_not() {
        let n = parse_structural_verilog("module m(input a, output y); not U1(y, a); endmodule")
            .unwrap();
        assert_eq!(n.num_gates(), 1);
        assert_eq!(n.node(NodeId(1)).op(), Some(GateOp::Not));
    }

    #[test]
    fn single_and_with_shared_direction() {
        let n = parse_structural_verilog("module m(input a,b, output y); and U1(y,a,b); endmodule")
            .unwrap();
        assert_eq!(n.num_inputs(), 2);
        assert_eq!(n.node(NodeId(2)).fanins(), &[NodeId(0), NodeId(1)]);
    }

    #[test]
    fn matches_ffcl_parser() {
        let ffcl = "input a b c d\noutput g3\ngate g1 AND a b\ngate g2 OR c d\ngate g3 XOR g1 g2\n";
        let v = "// hand translated\nmodule top(a, b, c, d, g3);\n  input a, b, c, d;\n  output g3;\n  wire g1, g2;\n  and U1(g1, a, b);\n  or U2(g2, c, d);\n  /* root */ xor (g3, g1, g2);\nendmodule\n";
        assert_eq!(
            parse_structural_verilog(v).unwrap(),
            parse_ffcl(ffcl).unwrap()
        );
    }

    #[test]
    fn rejects_behavioral_code() {
        for src in [
            "module m(input a, output y); assign y = a; endmodule",
            "module m(input a, output y); always @(a) y = a; endmodule",
            "module m(input [3:0] a, output y); endmodule",
            "module m(input a, output y); parameter W = 1; endmodule",
            "module m(input a, output y); sub u(.x(a)); endmodule",
        ] {
            let err = parse_structural_verilog(src).unwrap_err();
            assert!(
                matches!(err, NetlistError::UnsupportedConstruct { .. }),
                "{src}: {err:?}"
            );
        }
    }

    #[test]
    fn netlist_errors_propagate() {
        let err = parse_structural_verilog("module m(input a, output y); and U(y, a); endmodule")
            .unwrap_err();
        assert!(matches!(err, NetlistError::ArityMismatch { .. }));
        let err =
            parse_structural_verilog("module m(input a, output y); and U(y, a, y); endmodule")
                .unwrap_err();
        assert!(matches!(err, NetlistError::CycleDetected { .. }));
    }
}
