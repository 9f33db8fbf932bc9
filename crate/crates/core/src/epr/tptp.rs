use std::fmt::Write as _;

use super::{kind_of, Atom, Const, EprProblem, Family, FoClause, FoLit, Predicate, Term};

fn write_atom(out: &mut String, a: &Atom) {
    out.push_str(&a.pred);
    if !a.args.is_empty() {
        out.push('(');
        for (k, t) in a.args.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{t}");
        }
        out.push(')');
    }
}

fn write_clause(out: &mut String, c: &FoClause) {
    let _ = write!(out, "cnf({}, axiom, ", c.name);
    match c.lits.len() {
        0 => out.push_str("$false"),
        n => {
            if n > 1 {
                out.push('(');
            }
            for (k, l) in c.lits.iter().enumerate() {
                if k > 0 {
                    out.push_str(" | ");
                }
                if !l.positive {
                    out.push('~');
                }
                write_atom(out, &l.atom);
            }
            if n > 1 {
                out.push(')');
            }
        }
    }
    out.push_str(").\n");
}

/// TPTP cnf-form text. Header comments carry the spec name, sizes and the
/// predicate signature; families without clauses are left out.
pub fn write_tptp(p: &EprProblem) -> String {
    let mut out = String::new();
    let (x, i, c) = p.sizes;
    let _ = writeln!(out, "% spec: {}", p.name);
    let _ = writeln!(out, "% sizes: x={x} i={i} c={c}");
    out.push_str("% predicates:");
    for q in &p.predicates {
        let _ = write!(out, " {}/{}", q.name, q.arity);
    }
    out.push('\n');
    for family in [Family::Axiom, Family::Init, Family::Safe, Family::Trans] {
        let mut first = true;
        for cl in p.family(family) {
            if first {
                let _ = writeln!(out, "\n% {}", family_title(family));
                first = false;
            }
            write_clause(&mut out, cl);
        }
    }
    out
}

fn family_title(f: Family) -> &'static str {
    match f {
        Family::Axiom => "value axioms",
        Family::Init => "initial state is in the region",
        Family::Safe => "region is safe",
        Family::Trans => "region is closed under the controlled transition",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TptpError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing header: {0}")]
    Header(&'static str),
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, TptpError> {
        Err(TptpError::Syntax {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() {
            match self.s[self.pos] {
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'%' => {
                    while self.pos < self.s.len() && self.s[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> Result<(), TptpError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn ident(&mut self) -> Result<String, TptpError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    fn term(&mut self) -> Result<Term, TptpError> {
        let id = self.ident()?;
        if id.as_bytes()[0].is_ascii_uppercase() {
            return Ok(Term::Var(id));
        }
        match id.as_str() {
            "top" => Ok(Term::Const(Const::Top)),
            "bot" => Ok(Term::Const(Const::Bot)),
            _ => self.err(format!("unknown constant {id}")),
        }
    }

    fn literal(&mut self) -> Result<FoLit, TptpError> {
        let positive = if self.peek() == Some(b'~') {
            self.pos += 1;
            false
        } else {
            true
        };
        let pred = self.ident()?;
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.err("expected ',' or ')'"),
                }
            }
        }
        Ok(FoLit {
            positive,
            atom: Atom { pred, args },
        })
    }

    fn disjunction(&mut self) -> Result<Vec<FoLit>, TptpError> {
        if self.peek() == Some(b'$') {
            self.pos += 1;
            let id = self.ident()?;
            return if id == "false" { Ok(Vec::new()) } else { self.err("expected $false") };
        }
        let mut lits = vec![self.literal()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            lits.push(self.literal()?);
        }
        Ok(lits)
    }

    fn statement(&mut self) -> Result<FoClause, TptpError> {
        let kw = self.ident()?;
        if kw != "cnf" {
            return self.err(format!("unsupported statement {kw}"));
        }
        self.eat(b'(')?;
        let name = self.ident()?;
        self.eat(b',')?;
        let _role = self.ident()?;
        self.eat(b',')?;
        let lits = if self.peek() == Some(b'(') {
            self.pos += 1;
            let l = self.disjunction()?;
            self.eat(b')')?;
            l
        } else {
            self.disjunction()?
        };
        self.eat(b')')?;
        self.eat(b'.')?;
        let family = match name.split('_').next() {
            Some("p") => Family::Axiom,
            Some("init") => Family::Init,
            Some("safe") => Family::Safe,
            Some("trans") => Family::Trans,
            _ => return self.err(format!("clause {name} belongs to no family")),
        };
        Ok(FoClause { name, family, lits })
    }
}

/// Reads the subset of TPTP written by [`write_tptp`].
pub fn parse_tptp(text: &str) -> Result<EprProblem, TptpError> {
    let header = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix('%').map(str::trim).and_then(|l| l.strip_prefix(key)))
            .map(str::trim)
    };
    let name = header("spec:").ok_or(TptpError::Header("spec"))?.to_string();
    let sizes_line = header("sizes:").ok_or(TptpError::Header("sizes"))?;
    let mut sizes = [0usize; 3];
    for (k, key) in ["x=", "i=", "c="].iter().enumerate() {
        sizes[k] = sizes_line
            .split_whitespace()
            .find_map(|f| f.strip_prefix(key))
            .and_then(|v| v.parse().ok())
            .ok_or(TptpError::Header("sizes"))?;
    }
    let mut predicates = Vec::new();
    for decl in header("predicates:").ok_or(TptpError::Header("predicates"))?.split_whitespace() {
        let (n, a) = decl.rsplit_once('/').ok_or(TptpError::Header("predicates"))?;
        predicates.push(Predicate {
            name: n.to_string(),
            arity: a.parse().map_err(|_| TptpError::Header("predicates"))?,
            kind: kind_of(n),
        });
    }
    let mut cur = Cursor {
        s: text.as_bytes(),
        pos: 0,
        line: 1,
    };
    let mut clauses = Vec::new();
    while cur.peek().is_some() {
        let c = cur.statement()?;
        for l in &c.lits {
            match predicates.iter().find(|p| p.name == l.atom.pred) {
                Some(p) if p.arity == l.atom.args.len() => {}
                Some(_) => return cur.err(format!("{} used with wrong arity", l.atom.pred)),
                None => return cur.err(format!("undeclared predicate {}", l.atom.pred)),
            }
        }
        clauses.push(c);
    }
    Ok(EprProblem {
        name,
        sizes: (sizes[0], sizes[1], sizes[2]),
        predicates,
        clauses,
    })
}
