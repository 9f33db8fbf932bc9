//! Line-oriented adapter for solvers running in a separate process.
//!
//! Requests: `a <lits> 0` adds a clause, `s <lits> 0` solves under the given
//! assumptions. Each `s` is answered by `SAT <model lits> 0` or
//! `UNSAT <core lits> 0`. Literals use DIMACS numbering.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::{Cdcl, SatBackend, SatError};
use crate::formula::{Lit, Var};

pub struct ExternalSolver {
    child: Child,
    input: BufWriter<ChildStdin>,
    output: BufReader<ChildStdout>,
    model: Vec<bool>,
    core: Vec<Lit>,
}

fn io_err(e: std::io::Error) -> SatError {
    SatError::External(e.to_string())
}

fn format_lits(tag: &str, lits: &[Lit]) -> String {
    let mut line = String::from(tag);
    for l in lits {
        line.push(' ');
        line.push_str(&l.to_dimacs().to_string());
    }
    line.push_str(" 0\n");
    line
}

fn parse_lits(words: &[&str]) -> Result<Vec<Lit>, String> {
    let mut out = Vec::new();
    for w in words {
        let x: i64 = w.parse().map_err(|_| format!("bad literal '{w}'"))?;
        if x == 0 {
            return Ok(out);
        }
        out.push(Lit::from_dimacs(x));
    }
    Err("missing terminating 0".into())
}

impl ExternalSolver {
    /// Starts `command` (split on whitespace) with piped stdio.
    pub fn spawn(command: &str) -> Result<ExternalSolver, SatError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| SatError::External("empty solver command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| SatError::External(format!("cannot start '{command}': {e}")))?;
        let input = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let output = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalSolver {
            child,
            input,
            output,
            model: Vec::new(),
            core: Vec::new(),
        })
    }
}

impl Drop for ExternalSolver {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl SatBackend for ExternalSolver {
    fn add_clause(&mut self, lits: &[Lit]) -> Result<(), SatError> {
        self.input
            .write_all(format_lits("a", lits).as_bytes())
            .map_err(io_err)
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<bool, SatError> {
        self.input
            .write_all(format_lits("s", assumptions).as_bytes())
            .map_err(io_err)?;
        self.input.flush().map_err(io_err)?;
        let mut line = String::new();
        if self.output.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(SatError::External("solver closed its output".into()));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| SatError::External(format!("{msg} in response '{}'", line.trim()));
        match words.first() {
            Some(&"SAT") => {
                let lits = parse_lits(&words[1..]).map_err(bad)?;
                self.model.clear();
                for l in lits {
                    let v = l.var().index();
                    if self.model.len() <= v {
                        self.model.resize(v + 1, false);
                    }
                    self.model[v] = l.sign();
                }
                Ok(true)
            }
            Some(&"UNSAT") => {
                self.core = parse_lits(&words[1..]).map_err(bad)?;
                Ok(false)
            }
            _ => Err(bad("unknown status".into())),
        }
    }

    fn value(&self, v: Var) -> bool {
        self.model.get(v.index()).copied().unwrap_or(false)
    }

    fn core(&self) -> Vec<Lit> {
        self.core.clone()
    }

    fn conflicts(&self) -> u64 {
        0
    }
}

/// Serves the adapter protocol with the bundled solver until end of input.
pub fn serve(input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let mut solver = Cdcl::default();
    let mut max_var = 0;
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&tag, rest)) = words.split_first() else {
            continue;
        };
        let invalid = |msg: String| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {msg}", k + 1))
        };
        let lits = parse_lits(rest).map_err(invalid)?;
        max_var = lits.iter().map(|l| l.var().0).fold(max_var, u32::max);
        match tag {
            "a" => {
                solver.add_clause(&lits).map_err(|e| invalid(e.to_string()))?;
            }
            "s" => {
                if solver.solve(&lits).map_err(|e| invalid(e.to_string()))? {
                    let model: Vec<Lit> =
                        (1..=max_var).map(|v| Var(v).lit(solver.value(Var(v)))).collect();
                    output.write_all(format_lits("SAT", &model).as_bytes())?;
                } else {
                    output.write_all(format_lits("UNSAT", &solver.core()).as_bytes())?;
                }
                output.flush()?;
            }
            other => return Err(invalid(format!("unknown request '{other}'"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serve_answers_requests() {
        let input = "a 1 2 0\na -1 0\ns 0\ns -2 0\n";
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec!["SAT -1 2 0", "UNSAT -2 0"]);
    }

    #[test]
    fn serve_rejects_garbage() {
        let mut out = Vec::new();
        assert!(serve("x 1 0\n".as_bytes(), &mut out).is_err());
    }
}
