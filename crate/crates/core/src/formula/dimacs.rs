use std::fmt::Write as _;

use super::{Cnf, Lit, Var, VarGroup, VarManager};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DimacsError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCount { declared: usize, found: usize },
    #[error("unterminated clause at end of input")]
    Unterminated,
}

/// A DIMACS CNF file with optional variable-group annotations and free-form
/// comments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DimacsFile {
    pub num_vars: u32,
    pub cnf: Cnf,
    pub groups: Vec<(Var, VarGroup)>,
    pub comments: Vec<String>,
}

impl DimacsFile {
    pub fn new(cnf: Cnf) -> DimacsFile {
        DimacsFile {
            num_vars: cnf.max_var(),
            cnf,
            ..Default::default()
        }
    }

    /// Annotates every variable of the formula with its group from `vm`.
    pub fn with_groups(mut self, vm: &VarManager) -> DimacsFile {
        self.groups = self
            .cnf
            .vars()
            .into_iter()
            .filter_map(|v| vm.group(v).map(|g| (v, g)))
            .collect();
        self
    }

    pub fn comment(mut self, text: impl Into<String>) -> DimacsFile {
        self.comments.push(text.into());
        self
    }
}

pub fn write_dimacs(file: &DimacsFile) -> String {
    let mut out = String::new();
    for c in &file.comments {
        let _ = writeln!(out, "c {c}");
    }
    for (v, g) in &file.groups {
        let _ = writeln!(out, "c group {} {}", v.0, g.name());
    }
    let num_vars = file.num_vars.max(file.cnf.max_var());
    let _ = writeln!(out, "p cnf {} {}", num_vars, file.cnf.len());
    for c in file.cnf.clauses() {
        for l in c.lits() {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}

pub fn parse_dimacs(text: &str) -> Result<DimacsFile, DimacsError> {
    let mut file = DimacsFile::default();
    let mut declared = None;
    let mut pending: Vec<Lit> = Vec::new();
    let mut found = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let syntax = |msg: String| DimacsError::Syntax { line, msg };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed == "%" {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('c') {
            if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                return Err(syntax(format!("unexpected token '{trimmed}'")));
            }
            let rest = rest.trim();
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.len() == 3 && words[0] == "group" {
                let id: u32 = words[1]
                    .parse()
                    .map_err(|_| syntax(format!("bad variable id '{}'", words[1])))?;
                let g = VarGroup::from_name(words[2])
                    .ok_or_else(|| syntax(format!("unknown group '{}'", words[2])))?;
                file.groups.push((Var(id), g));
            } else {
                file.comments.push(rest.to_string());
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('p') {
            if declared.is_some() {
                return Err(syntax("duplicate header".into()));
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.len() != 3 || words[0] != "cnf" {
                return Err(syntax(format!("malformed header '{trimmed}'")));
            }
            let nv = words[1].parse().map_err(|_| syntax("bad variable count".into()))?;
            let nc: usize = words[2].parse().map_err(|_| syntax("bad clause count".into()))?;
            file.num_vars = nv;
            declared = Some(nc);
            continue;
        }
        if declared.is_none() {
            return Err(DimacsError::MissingHeader);
        }
        for tok in trimmed.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| syntax(format!("bad literal '{tok}'")))?;
            if x == 0 {
                file.cnf.add(pending.drain(..));
                found += 1;
            } else {
                if x.unsigned_abs() > file.num_vars as u64 {
                    return Err(syntax(format!("literal {x} exceeds declared variable count")));
                }
                pending.push(Lit::from_dimacs(x));
            }
        }
    }
    let declared = declared.ok_or(DimacsError::MissingHeader)?;
    if !pending.is_empty() {
        return Err(DimacsError::Unterminated);
    }
    if found != declared {
        return Err(DimacsError::ClauseCount { declared, found });
    }
    Ok(file)
}
