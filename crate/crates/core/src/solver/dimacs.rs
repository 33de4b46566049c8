//! DIMACS CNF text format.
//!
//! The variable map and eliminated constants travel in comment lines
//! (`c var <index> <name>`, `c const <name> <0|1>`) that other solvers
//! ignore, so a formula survives a round trip unchanged.

use std::fmt::Write as _;

use super::cnf::{CnfFormula, Lit};
use crate::causal::Variable;
use crate::error::{Error, Result};

pub fn emit_dimacs(f: &CnfFormula) -> String {
    let mut out = String::new();
    for (i, v) in f.varmap.iter() {
        let _ = writeln!(out, "c var {i} {v}");
    }
    for (v, &b) in &f.constants {
        let _ = writeln!(out, "c const {v} {}", u8::from(b));
    }
    let _ = write!(out, "p cnf {} {}", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        out.push('\n');
        for l in c {
            let _ = write!(out, "{l} ");
        }
        out.push('0');
    }
    out.push('\n');
    out
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let bad = |m: String| Error::Data(format!("DIMACS: {m}"));
    let mut f = CnfFormula::default();
    let mut header: Option<(u32, usize)> = None;
    let mut current: Vec<Lit> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            match words.as_slice() {
                ["var", i, name] => {
                    let i = i.parse().map_err(|_| bad(format!("line {}: bad index", n + 1)))?;
                    f.varmap.insert(name.parse::<Variable>()?, i);
                }
                ["const", name, b] => {
                    f.constants.insert(name.parse::<Variable>()?, *b == "1");
                }
                _ => {}
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let words: Vec<&str> = rest.split_whitespace().collect();
            match words.as_slice() {
                ["cnf", v, c] => {
                    let v = v.parse().map_err(|_| bad("bad variable count".into()))?;
                    let c = c.parse().map_err(|_| bad("bad clause count".into()))?;
                    header = Some((v, c));
                }
                _ => return Err(bad(format!("bad problem line {line:?}"))),
            }
            continue;
        }
        let (num_vars, _) = header.ok_or_else(|| bad("clause before problem line".into()))?;
        for tok in line.split_whitespace() {
            let l: Lit = tok.parse().map_err(|_| bad(format!("line {}: bad literal {tok:?}", n + 1)))?;
            if l == 0 {
                f.clauses.push(std::mem::take(&mut current));
            } else if l.unsigned_abs() > num_vars {
                return Err(bad(format!("literal {l} exceeds {num_vars} variables")));
            } else {
                current.push(l);
            }
        }
    }
    let (num_vars, num_clauses) = header.ok_or_else(|| bad("missing problem line".into()))?;
    if !current.is_empty() {
        return Err(bad("unterminated final clause".into()));
    }
    if f.clauses.len() != num_clauses {
        return Err(bad(format!("header promises {num_clauses} clauses, found {}", f.clauses.len())));
    }
    f.num_vars = num_vars;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::NeuronId;

    #[test]
    fn empty_and_unit() {
        assert_eq!(emit_dimacs(&CnfFormula::default()), "p cnf 0 0\n");
        let f = CnfFormula { num_vars: 1, clauses: vec![vec![1]], ..Default::default() };
        assert_eq!(emit_dimacs(&f), "p cnf 1 1\n1 0\n");
    }

    #[test]
    fn roundtrip_with_map() {
        let mut f = CnfFormula { num_vars: 4, clauses: vec![vec![1, -2], vec![3, 4, -1], vec![-4]], ..Default::default() };
        f.varmap.insert(Variable::new(NeuronId::input(7), 1), 1);
        f.varmap.insert(Variable::new(NeuronId::hidden(2), 0), 3);
        f.constants.insert(Variable::new(NeuronId::output(0), 0), false);
        assert_eq!(parse_dimacs(&emit_dimacs(&f)).unwrap(), f);
    }

    #[test]
    fn foreign_layout_parses() {
        let f = parse_dimacs("c hello\np cnf 3 2\n1 -3\n 0 2\n3 0\n").unwrap();
        assert_eq!(f.clauses, vec![vec![1, -3], vec![2, 3]]);
        assert!(parse_dimacs("p cnf 1 1\n2 0\n").is_err());
        assert!(parse_dimacs("p cnf 1 2\n1 0\n").is_err());
        assert!(parse_dimacs("1 0\n").is_err());
    }
}
