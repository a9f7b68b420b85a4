//! OpenQASM 2.0 subset: one `qreg`, `u3`/`u`, `cx`, `barrier` (ignored),
//! `include` (ignored) and `//` comments. Angles may be float literals or
//! arithmetic over `pi`.

use std::fmt::Write as _;

use super::{Circuit, Gate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let column = i + 1;
            let at = |tok| Token {
                tok,
                line: lno + 1,
                column,
            };
            if ch.is_whitespace() {
                i += 1;
            } else if ch == '/' && chars.get(i + 1) == Some(&'/') {
                break;
            } else if ch.is_ascii_alphabetic() || ch == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(at(Tok::Ident(chars[start..i].iter().collect())));
            } else if ch.is_ascii_digit() || ch == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line: lno + 1,
                    column,
                    message: format!("bad number `{s}`"),
                })?;
                out.push(at(Tok::Num(v)));
            } else if ch == '"' {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(Error::Parse {
                        line: lno + 1,
                        column,
                        message: "unterminated string".into(),
                    });
                }
                out.push(at(Tok::Str(chars[start..i].iter().collect())));
                i += 1;
            } else if "[](),;*/+-".contains(ch) {
                out.push(at(Tok::Sym(ch)));
                i += 1;
            } else {
                return Err(Error::Parse {
                    line: lno + 1,
                    column,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.column)).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.here();
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<Token> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.error("unexpected end of input"),
        }
    }

    fn eat_sym(&mut self, s: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(c), .. }) if *c == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: char) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn integer(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Token { tok: Tok::Num(v), .. }) if v.fract() == 0.0 && *v >= 0.0 => {
                let v = *v as usize;
                self.pos += 1;
                Ok(v)
            }
            _ => self.error("expected non-negative integer"),
        }
    }

    fn expr(&mut self) -> Result<f64> {
        let mut acc = self.term()?;
        loop {
            if self.eat_sym('+') {
                acc += self.term()?;
            } else if self.eat_sym('-') {
                acc -= self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<f64> {
        let mut acc = self.factor()?;
        loop {
            if self.eat_sym('*') {
                acc *= self.factor()?;
            } else if self.eat_sym('/') {
                acc /= self.factor()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<f64> {
        if self.eat_sym('-') {
            return Ok(-self.factor()?);
        }
        if self.eat_sym('+') {
            return self.factor();
        }
        if self.eat_sym('(') {
            let v = self.expr()?;
            self.expect_sym(')')?;
            return Ok(v);
        }
        let at = self.here();
        match self.next()?.tok {
            Tok::Num(v) => Ok(v),
            Tok::Ident(s) if s == "pi" => Ok(std::f64::consts::PI),
            other => Err(Error::Parse {
                line: at.0,
                column: at.1,
                message: format!("expected angle expression, found {other:?}"),
            }),
        }
    }

    /// `name[index]`, checked against the declared register.
    fn qubit_ref(&mut self, reg: &(String, usize)) -> Result<usize> {
        let at = self.here();
        let name = self.ident()?;
        if name != reg.0 {
            return Err(Error::Parse {
                line: at.0,
                column: at.1,
                message: format!("unknown register `{name}`"),
            });
        }
        self.expect_sym('[')?;
        let at = self.here();
        let idx = self.integer()?;
        self.expect_sym(']')?;
        if idx >= reg.1 {
            return Err(Error::Parse {
                line: at.0,
                column: at.1,
                message: format!("qubit index {idx} outside register of size {}", reg.1),
            });
        }
        Ok(idx)
    }
}

pub fn parse_qasm(text: &str) -> Result<Circuit> {
    let toks = lex(text)?;
    let end = (text.lines().count().max(1), 1);
    let mut p = Parser { toks, pos: 0, end };
    let mut reg: Option<(String, usize)> = None;
    let mut circuit: Option<Circuit> = None;

    while p.peek().is_some() {
        let at = p.here();
        let name = p.ident()?;
        match name.as_str() {
            "OPENQASM" => {
                p.next()?;
                p.expect_sym(';')?;
            }
            "include" => {
                match p.next()?.tok {
                    Tok::Str(_) => {}
                    _ => return p.error("expected include path"),
                }
                p.expect_sym(';')?;
            }
            "qreg" => {
                if reg.is_some() {
                    return Err(Error::Parse {
                        line: at.0,
                        column: at.1,
                        message: "only one qreg is supported".into(),
                    });
                }
                let rname = p.ident()?;
                p.expect_sym('[')?;
                let size = p.integer()?;
                p.expect_sym(']')?;
                p.expect_sym(';')?;
                if size == 0 {
                    return Err(Error::Parse {
                        line: at.0,
                        column: at.1,
                        message: "empty register".into(),
                    });
                }
                circuit = Some(Circuit::new(size));
                reg = Some((rname, size));
            }
            "barrier" => {
                while !p.eat_sym(';') {
                    p.next()?;
                }
            }
            "u3" | "u" | "U" | "cx" | "CX" => {
                let (Some(r), Some(circ)) = (reg.as_ref(), circuit.as_mut()) else {
                    return Err(Error::Parse {
                        line: at.0,
                        column: at.1,
                        message: "gate before qreg declaration".into(),
                    });
                };
                if name.eq_ignore_ascii_case("cx") {
                    let a = p.qubit_ref(r)?;
                    p.expect_sym(',')?;
                    let b = p.qubit_ref(r)?;
                    p.expect_sym(';')?;
                    circ.push_gate(Gate::Cnot {
                        control: a,
                        target: b,
                    })
                    .map_err(|e| Error::Parse {
                        line: at.0,
                        column: at.1,
                        message: e.to_string(),
                    })?;
                } else {
                    p.expect_sym('(')?;
                    let t = p.expr()?;
                    p.expect_sym(',')?;
                    let ph = p.expr()?;
                    p.expect_sym(',')?;
                    let la = p.expr()?;
                    p.expect_sym(')')?;
                    let q = p.qubit_ref(r)?;
                    p.expect_sym(';')?;
                    circ.push_u3(q, [t, ph, la])?;
                }
            }
            other => {
                return Err(Error::Parse {
                    line: at.0,
                    column: at.1,
                    message: format!("unsupported gate or statement `{other}`"),
                })
            }
        }
    }
    circuit.ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "no qreg declared".into(),
    })
}

/// Serialize with shortest round-trip float formatting.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", c.n_qubits());
    for p in c.gates() {
        match p.gate {
            Gate::U3 { qubit } => {
                let [a, b, d] = c.u3_angles(p);
                let _ = writeln!(out, "u3({a:?},{b:?},{d:?}) q[{qubit}];");
            }
            Gate::Cnot { control, target } => {
                let _ = writeln!(out, "cx q[{control}],q[{target}];");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, ComplexMatrix};
    use proptest::prelude::*;

    #[test]
    fn minimal_program() {
        let c = parse_qasm("qreg q[2]; cx q[0],q[1];").unwrap();
        assert_eq!(c.n_qubits(), 2);
        assert_eq!(c.cnot_count(), 1);
        assert_eq!(c.gates().len(), 1);
    }

    #[test]
    fn u3_pauli_x() {
        let c = parse_qasm("qreg q[2];\nu3(3.141592653589793,0,3.141592653589793) q[0];").unwrap();
        let x = crate::linalg::tests::pauli_x();
        let expected = kron(&x, &ComplexMatrix::identity(2));
        assert!(c.evaluate().matrix().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn pi_expressions() {
        let src = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\n// note\nu(pi/2, -pi/4, 2*pi) q[0];\nbarrier q;\nu3(1e-3,(pi+1)/2,-.5) q[0];";
        let c = parse_qasm(src).unwrap();
        let pi = std::f64::consts::PI;
        assert_eq!(c.params()[..3], [pi / 2.0, -pi / 4.0, 2.0 * pi]);
        assert_eq!(c.params()[3..], [1e-3, (pi + 1.0) / 2.0, -0.5]);
    }

    #[test]
    fn errors() {
        let e = parse_qasm("qreg q[2];\ncx q[0],q[0];").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_qasm("qreg q[2];\n  h q[0];").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 3, .. }), "{e}");
        assert!(parse_qasm("qreg q[2]; cx q[0],q[2];").is_err());
        assert!(parse_qasm("cx q[0],q[1];").is_err());
        assert!(parse_qasm("qreg q[2]; cx r[0],q[1];").is_err());
        assert!(parse_qasm("qreg q[2]; u3(1,2) q[0];").is_err());
        assert!(parse_qasm("qreg q[2]; qreg r[2];").is_err());
        assert!(parse_qasm("qreg q[1]; u3(1,2,3) q[0]").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..4, seed in any::<u64>(), cnots in 0usize..6) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = crate::circuit::tests::random_circuit(n, cnots, &mut rng);
            let back = parse_qasm(&emit_qasm(&c)).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
