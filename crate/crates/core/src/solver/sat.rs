//! SAT engines behind one interface.

use std::time::Duration;

use super::cnf::{CnfFormula, Lit};
use super::dimacs::emit_dimacs;
use super::process::run_to_completion;
use crate::error::SolverError;

/// Result of one satisfiability call. `model[i - 1]` is variable `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Vec<bool>),
    Unsat,
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat(_))
    }
}

/// An incremental SAT solver: clauses accumulate, assumptions are per call.
pub trait SatSolver {
    fn add_clause(&mut self, clause: &[Lit]);
    fn solve(&mut self, assumptions: &[Lit]) -> Result<SatOutcome, SolverError>;

    fn add_formula(&mut self, f: &CnfFormula) {
        self.reserve(f.num_vars);
        for c in &f.clauses {
            self.add_clause(c);
        }
    }

    /// Declares that variables `1..=n` exist, so models cover them.
    fn reserve(&mut self, n: u32);
}

/// Which SAT engine the clausal backend drives.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum SatEngine {
    #[default]
    Embedded,
    /// A DIMACS-speaking command (reads the formula on stdin, answers in
    /// the competition output format).
    External(String),
}

impl SatEngine {
    pub fn instantiate(&self, timeout: Duration) -> Box<dyn SatSolver> {
        match self {
            SatEngine::Embedded => Box::new(Embedded::new()),
            SatEngine::External(cmd) => Box::new(ExternalDimacs::new(cmd, timeout)),
        }
    }
}

/// The in-process CDCL engine.
pub struct Embedded {
    solver: varisat::Solver<'static>,
    num_vars: u32,
}

impl Embedded {
    pub fn new() -> Self {
        Self { solver: varisat::Solver::new(), num_vars: 0 }
    }
}

impl Default for Embedded {
    fn default() -> Self {
        Self::new()
    }
}

fn to_varisat(l: Lit) -> varisat::Lit {
    varisat::Lit::from_dimacs(l as isize)
}

impl SatSolver for Embedded {
    fn add_clause(&mut self, clause: &[Lit]) {
        use varisat::ExtendFormula;
        for &l in clause {
            self.num_vars = self.num_vars.max(l.unsigned_abs());
        }
        let c: Vec<varisat::Lit> = clause.iter().map(|&l| to_varisat(l)).collect();
        self.solver.add_clause(&c);
    }

    fn reserve(&mut self, n: u32) {
        self.num_vars = self.num_vars.max(n);
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<SatOutcome, SolverError> {
        for &l in assumptions {
            self.num_vars = self.num_vars.max(l.unsigned_abs());
        }
        let a: Vec<varisat::Lit> = assumptions.iter().map(|&l| to_varisat(l)).collect();
        self.solver.assume(&a);
        let sat = self.solver.solve().map_err(|e| SolverError::Engine(e.to_string()))?;
        if !sat {
            return Ok(SatOutcome::Unsat);
        }
        // variables the engine never saw are unconstrained; report them false
        let mut model = vec![false; self.num_vars as usize];
        for l in self.solver.model().unwrap_or_default() {
            let i = l.var().to_dimacs() as usize;
            if i <= model.len() {
                model[i - 1] = l.is_positive();
            }
        }
        Ok(SatOutcome::Sat(model))
    }
}

/// A non-incremental external solver: every call ships the whole formula
/// with the assumptions as unit clauses.
pub struct ExternalDimacs {
    command: String,
    timeout: Duration,
    formula: CnfFormula,
}

impl ExternalDimacs {
    pub fn new(command: &str, timeout: Duration) -> Self {
        Self { command: command.to_string(), timeout, formula: CnfFormula::default() }
    }
}

/// Reads `s SATISFIABLE` / `s UNSATISFIABLE` and the `v` lines.
pub fn parse_competition_output(out: &str, num_vars: u32) -> Result<SatOutcome, SolverError> {
    let mut status = None;
    let mut model = vec![false; num_vars as usize];
    for line in out.lines().map(str::trim) {
        if let Some(s) = line.strip_prefix("s ") {
            status = Some(match s.trim() {
                "SATISFIABLE" => true,
                "UNSATISFIABLE" => false,
                other => return Err(SolverError::Unparseable(other.to_string())),
            });
        } else if let Some(vals) = line.strip_prefix("v ") {
            for tok in vals.split_whitespace() {
                let l: i64 = tok.parse().map_err(|_| SolverError::Unparseable(line.to_string()))?;
                let i = l.unsigned_abs() as usize;
                if l != 0 && i <= model.len() {
                    model[i - 1] = l > 0;
                }
            }
        }
    }
    match status {
        Some(true) => Ok(SatOutcome::Sat(model)),
        Some(false) => Ok(SatOutcome::Unsat),
        None => Err(SolverError::Unparseable(out.lines().next().unwrap_or("").to_string())),
    }
}

impl SatSolver for ExternalDimacs {
    fn add_clause(&mut self, clause: &[Lit]) {
        for &l in clause {
            self.formula.num_vars = self.formula.num_vars.max(l.unsigned_abs());
        }
        self.formula.clauses.push(clause.to_vec());
    }

    fn reserve(&mut self, n: u32) {
        self.formula.num_vars = self.formula.num_vars.max(n);
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<SatOutcome, SolverError> {
        let mut f = CnfFormula { num_vars: self.formula.num_vars, ..Default::default() };
        f.clauses = self.formula.clauses.clone();
        for &l in assumptions {
            f.num_vars = f.num_vars.max(l.unsigned_abs());
            f.clauses.push(vec![l]);
        }
        let (out, status) = run_to_completion(&self.command, &emit_dimacs(&f), self.timeout)?;
        match parse_competition_output(&out, f.num_vars) {
            Ok(v) => Ok(v),
            // SAT solvers conventionally exit 10/20, so the status alone
            // does not tell a crash from an answer
            Err(_) if !status.success() && status.code().is_none_or(|c| c != 10 && c != 20) => {
                Err(SolverError::Crashed(format!("{}: {status}", self.command)))
            }
            Err(e) => Err(e),
        }
    }
}
