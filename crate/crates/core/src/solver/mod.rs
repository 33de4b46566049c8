//! Entailment checking over causal models.
//!
//! Two independent lowerings answer the same question, "do the equations
//! and these input literals force the conclusion": a clausal one solved by
//! a SAT engine, and an arithmetic one handed to an external SMT solver.

pub mod cnf;
pub mod dimacs;
pub mod process;
pub mod sat;
pub mod smt;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::causal::{BoolExpr, CausalModel, Interpretation, Literal, Variable};
use crate::error::{Error, Result};

pub use cnf::{encode_cnf, CnfEncoder, CnfFormula, Gate, Lit, VarMap};
pub use dimacs::{emit_dimacs, parse_dimacs};
pub use sat::{SatEngine, SatOutcome, SatSolver};
pub use smt::{emit_smtlib, run_external_solver, SmtScript, SolverVerdict, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Cnf,
    Smt,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Cnf => "cnf",
            Backend::Smt => "smt",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnf" | "cnf-sat" => Ok(Backend::Cnf),
            "smt" | "smt-lia" => Ok(Backend::Smt),
            other => Err(Error::InvalidArgument(format!("unknown backend {other:?} (expected cnf or smt)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub sat: SatEngine,
    pub smt_command: String,
    /// Per-call limit for external processes.
    pub timeout: Duration,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { sat: SatEngine::Embedded, smt_command: smt::solver_command(), timeout: Duration::from_secs(120) }
    }
}

enum Engine {
    Cnf {
        solver: Box<dyn SatSolver>,
        varmap: VarMap,
        known: HashMap<Variable, bool>,
        /// The conclusion folded to a constant under the background.
        concluded: Option<bool>,
    },
    Smt(smt::SmtSession),
}

/// Repeated entailment queries against one model, conclusion and
/// background, encoded once.
pub struct EntailmentSession {
    engine: Engine,
    scope: BTreeSet<Variable>,
    last: Option<(Vec<Literal>, bool)>,
    queries: usize,
    solver_calls: usize,
}

impl EntailmentSession {
    /// `background` literals hold in every query (the fixed history).
    pub fn new(
        model: &CausalModel,
        conclusion: &BoolExpr,
        background: &[Literal],
        backend: Backend,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let scope = model.cone_of_influence(conclusion.vars());
        let engine = match backend {
            Backend::Cnf => {
                let fixed: Interpretation = background.iter().map(|l| (l.var, l.positive)).collect();
                let known = cnf::propagate(model, &fixed);
                let in_scope = |v: Variable| scope.contains(&v);
                let mut enc = cnf::encode_with_known(model, &known, Some(&in_scope));
                let concluded = match enc.gate(&conclusion.substitute(&|v| known.get(&v).copied())) {
                    Gate::Const(b) => Some(b),
                    Gate::Lit(g) => {
                        enc.add_clause(vec![-g]);
                        None
                    }
                };
                let f = enc.finish();
                let mut solver = opts.sat.instantiate(opts.timeout);
                solver.add_formula(&f);
                Engine::Cnf { solver, varmap: f.varmap, known, concluded }
            }
            Backend::Smt => Engine::Smt(smt::SmtSession::open(
                model,
                &scope,
                background,
                conclusion,
                &opts.smt_command,
                opts.timeout,
            )?),
        };
        Ok(Self { engine, scope, last: None, queries: 0, solver_calls: 0 })
    }

    /// Whether equations ∧ background ∧ `assumptions` force the conclusion.
    pub fn entails(&mut self, assumptions: &[Literal]) -> Result<bool> {
        self.queries += 1;
        // literals outside the cone cannot influence the conclusion
        let mut key: Vec<Literal> = assumptions.iter().copied().filter(|l| self.scope.contains(&l.var)).collect();
        key.sort();
        if let Some((last, verdict)) = &self.last {
            if *last == key {
                return Ok(*verdict);
            }
        }
        let verdict = match &mut self.engine {
            Engine::Cnf { solver, varmap, known, concluded } => {
                if *concluded == Some(true) {
                    true
                } else {
                    let mut lits = Vec::with_capacity(key.len());
                    let mut contradicts = false;
                    for l in &key {
                        match known.get(&l.var) {
                            Some(&b) => contradicts |= b != l.positive,
                            None => {
                                if let Some(i) = varmap.index(l.var) {
                                    lits.push(if l.positive { i as Lit } else { -(i as Lit) });
                                }
                            }
                        }
                    }
                    if contradicts {
                        true
                    } else {
                        self.solver_calls += 1;
                        !solver.solve(&lits)?.is_sat()
                    }
                }
            }
            Engine::Smt(session) => {
                self.solver_calls += 1;
                session.check(&key)? == Status::Unsat
            }
        };
        self.last = Some((key, verdict));
        Ok(verdict)
    }

    /// Entailment questions asked so far.
    pub fn queries(&self) -> usize {
        self.queries
    }

    /// Questions that actually reached a solver.
    pub fn solver_calls(&self) -> usize {
        self.solver_calls
    }

    /// Variables the conclusion depends on.
    pub fn scope(&self) -> &BTreeSet<Variable> {
        &self.scope
    }
}

/// Whether `(∧ equations) ∧ assumptions ∧ ¬conclusion` is unsatisfiable.
pub fn check_entailment(
    model: &CausalModel,
    assumptions: &[Literal],
    conclusion: &BoolExpr,
    backend: Backend,
) -> Result<bool> {
    check_entailment_with(model, assumptions, conclusion, backend, &SolverOptions::default())
}

pub fn check_entailment_with(
    model: &CausalModel,
    assumptions: &[Literal],
    conclusion: &BoolExpr,
    backend: Backend,
    opts: &SolverOptions,
) -> Result<bool> {
    EntailmentSession::new(model, conclusion, &[], backend, opts)?.entails(assumptions)
}

/// Some interpretation satisfying every equation and `fixed`, if one exists.
pub fn find_model(model: &CausalModel, fixed: &Interpretation, engine: &SatEngine) -> Result<Option<Interpretation>> {
    let f = encode_cnf(model, fixed);
    let mut solver = engine.instantiate(SolverOptions::default().timeout);
    solver.add_formula(&f);
    Ok(match solver.solve(&[])? {
        SatOutcome::Sat(assignment) => Some(f.project(&assignment)),
        SatOutcome::Unsat => None,
    })
}
