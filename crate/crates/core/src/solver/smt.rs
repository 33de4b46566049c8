//! SMT-LIB2 over linear integer arithmetic.
//!
//! Every variable is an `Int` restricted to `{0, 1}`; a variable is read as
//! true when it equals 1. Equations are written from each neuron's threshold
//! data, so the arithmetic keeps the sums and the carried potential
//! verbatim instead of going through the Boolean form.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use super::process::LineProcess;
use crate::causal::{BoolExpr, CausalModel, Equation, Interpretation, Literal, Variable};
use crate::error::SolverError;

// the legacy arithmetic core is about three times faster on these
// pseudo-Boolean sums than z3's default
pub const DEFAULT_COMMAND: &str = "z3 -in smt.arith.solver=2";
pub const COMMAND_ENV: &str = "BSNN_SMT_SOLVER";

/// The external SMT command: `$BSNN_SMT_SOLVER`, else z3 reading stdin.
pub fn solver_command() -> String {
    std::env::var(COMMAND_ENV).unwrap_or_else(|_| DEFAULT_COMMAND.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtScript {
    pub text: String,
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverVerdict {
    pub status: Status,
    pub model: Option<Interpretation>,
    pub stats: SolveStats,
}

fn int(n: i64) -> String {
    if n < 0 {
        format!("(- {})", -n)
    } else {
        n.to_string()
    }
}

/// `(op a b ...)`, with the unit for no operands and the operand itself for one.
fn nary(op: &str, unit: &str, args: Vec<String>) -> String {
    match args.len() {
        0 => unit.to_string(),
        1 => args.into_iter().next().unwrap(),
        _ => format!("({op} {})", args.join(" ")),
    }
}

fn is_one(v: Variable) -> String {
    format!("(= {v} 1)")
}

/// `tr(ω)`: the arithmetic reading of a Boolean expression.
pub fn tr(e: &BoolExpr) -> String {
    match e {
        BoolExpr::True => "true".into(),
        BoolExpr::False => "false".into(),
        BoolExpr::Var(v) => is_one(*v),
        BoolExpr::Not(a) => format!("(not {})", tr(a)),
        BoolExpr::And(es) => nary("and", "true", es.iter().map(tr).collect()),
        BoolExpr::Or(es) => nary("or", "false", es.iter().map(tr).collect()),
        BoolExpr::Implies(a, b) => format!("(=> {} {})", tr(a), tr(b)),
        BoolExpr::Iff(a, b) => format!("(= {} {})", tr(a), tr(b)),
        BoolExpr::AtLeast { pos, neg, bound } => {
            format!("(>= {} {})", linear_sum(pos, neg, 0), int(*bound))
        }
    }
}

fn tr_literal(l: Literal) -> String {
    if l.positive {
        is_one(l.var)
    } else {
        format!("(not {})", is_one(l.var))
    }
}

fn linear_sum(pos: &[Variable], neg: &[Variable], constant: i64) -> String {
    let mut terms: Vec<String> = pos.iter().map(|v| v.to_string()).collect();
    terms.extend(neg.iter().map(|v| format!("(- {v})")));
    if constant != 0 {
        terms.push(int(constant));
    }
    nary("+", "0", terms)
}

/// `E^smt(p)` for one equation.
pub fn smt_equation(eq: &Equation) -> String {
    let p = eq.target;
    match &eq.mechanism {
        None if eq.omega == BoolExpr::False => format!("(= {p} 0)"),
        None => format!("(= {} {})", is_one(p), tr(&eq.omega)),
        Some(m) => {
            let prev = m.previous;
            let fresh = linear_sum(&m.excitatory, &m.inhibitory, m.carried_potential);
            let reset = linear_sum(&m.excitatory, &m.inhibitory, 0);
            format!(
                "(= {} (and (=> (= {prev} 0) (>= {fresh} {tau})) (=> (= {prev} 1) (>= {reset} {tau}))))",
                is_one(p),
                tau = int(m.threshold)
            )
        }
    }
}

/// Declarations, domain constraints and equations for the given variables.
fn preamble(model: &CausalModel, keep: &dyn Fn(Variable) -> bool) -> String {
    let mut out = String::from("(set-logic QF_LIA)\n");
    let vars: Vec<Variable> = model.variables().filter(|&v| keep(v)).collect();
    for v in &vars {
        let _ = writeln!(out, "(declare-const {v} Int)");
    }
    for v in &vars {
        let _ = writeln!(out, "(assert (or (= {v} 1) (= {v} 0)))");
    }
    for eq in model.equations.iter().filter(|e| keep(e.target)) {
        let _ = writeln!(out, "(assert {})", smt_equation(eq));
    }
    out
}

/// A complete script whose `unsat` answer means that the assumptions
/// entail the conclusion under the model's equations.
pub fn emit_smtlib(model: &CausalModel, assumptions: &[Literal], conclusion: &BoolExpr) -> SmtScript {
    let mut text = preamble(model, &|_| true);
    for &l in assumptions {
        let _ = writeln!(text, "(assert {})", tr_literal(l));
    }
    let _ = writeln!(text, "(assert (not {}))", tr(conclusion));
    text.push_str("(check-sat)\n");
    SmtScript { text }
}

fn parse_status(line: &str) -> Result<Status, SolverError> {
    match line {
        "sat" => Ok(Status::Sat),
        "unsat" => Ok(Status::Unsat),
        other => Err(SolverError::Unparseable(other.to_string())),
    }
}

/// Parses a `get-value` reply such as `((p_i0_1 1) (p_h0_1 0))`.
fn parse_values(reply: &str) -> Result<Interpretation, SolverError> {
    let mut interp = Interpretation::new();
    let flat = reply.replace(['(', ')'], " ");
    let toks: Vec<&str> = flat.split_whitespace().collect();
    for pair in toks.chunks(2) {
        match pair {
            [name, value] => {
                let v: Variable = name.parse().map_err(|_| SolverError::Unparseable(reply.to_string()))?;
                interp.set(v, *value == "1");
            }
            _ => return Err(SolverError::Unparseable(reply.to_string())),
        }
    }
    Ok(interp)
}

/// Runs a script through a fresh solver process. On `sat`, the values of
/// `values_of` are fetched with `get-value`.
pub fn run_external_solver(
    script: &SmtScript,
    command: &str,
    timeout: Duration,
    values_of: &[Variable],
) -> Result<SolverVerdict, SolverError> {
    let start = Instant::now();
    let mut proc = LineProcess::spawn(command)?;
    proc.send(&script.text)?;
    let line = proc.read_line(timeout)?;
    let status = parse_status(&line)?;
    let model = if status == Status::Sat && !values_of.is_empty() {
        let names: Vec<String> = values_of.iter().map(|v| v.to_string()).collect();
        proc.send(&format!("(get-value ({}))\n", names.join(" ")))?;
        Some(parse_values(&proc.read_sexpr(timeout)?)?)
    } else {
        None
    };
    let _ = proc.send("(exit)\n");
    Ok(SolverVerdict { status, model, stats: SolveStats { wall_time: start.elapsed() } })
}

/// `$BSNN_SMT_TRANSCRIPT` names a file that receives everything sent to
/// interactive sessions, for replaying a run by hand.
fn transcript_file() -> Option<std::fs::File> {
    let path = std::env::var_os("BSNN_SMT_TRANSCRIPT")?;
    std::fs::OpenOptions::new().create(true).append(true).open(path).ok()
}

/// An interactive solver session holding the equations of one cone.
///
/// Each 0/1 variable that appears in an assumption gets a Boolean proxy
/// `b_<name>` tied to `(= <name> 1)`, and queries go through
/// `check-sat-assuming` over proxies rather than `push`/`pop`, which
/// z3 answers far more slowly.
pub struct SmtSession {
    proc: LineProcess,
    transcript: Option<std::fs::File>,
    timeout: Duration,
    declared: BTreeSet<Variable>,
    proxied: BTreeSet<Variable>,
}

impl SmtSession {
    /// Declares `scope`, asserts its equations, the background literals and
    /// the negated conclusion.
    pub fn open(
        model: &CausalModel,
        scope: &BTreeSet<Variable>,
        background: &[Literal],
        conclusion: &BoolExpr,
        command: &str,
        timeout: Duration,
    ) -> Result<Self, SolverError> {
        let mut text = preamble(model, &|v| scope.contains(&v));
        for &l in background.iter().filter(|l| scope.contains(&l.var)) {
            let _ = writeln!(text, "(assert {})", tr_literal(l));
        }
        let _ = writeln!(text, "(assert (not {}))", tr(conclusion));
        let mut session = Self {
            proc: LineProcess::spawn(command)?,
            transcript: transcript_file(),
            timeout,
            declared: scope.clone(),
            proxied: BTreeSet::new(),
        };
        session.send(&text)?;
        Ok(session)
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        if let Some(f) = &mut self.transcript {
            use std::io::Write;
            f.write_all(text.as_bytes())?;
        }
        self.proc.send(text)
    }

    /// Whether the asserted core plus `assumptions` is satisfiable.
    /// Assumptions outside the declared scope are ignored.
    pub fn check(&mut self, assumptions: &[Literal]) -> Result<Status, SolverError> {
        let mut text = String::new();
        let mut proxies = Vec::new();
        for &l in assumptions.iter().filter(|l| self.declared.contains(&l.var)) {
            if self.proxied.insert(l.var) {
                let _ = writeln!(text, "(declare-const b_{} Bool)", l.var);
                let _ = writeln!(text, "(assert (= b_{} (= {} 1)))", l.var, l.var);
            }
            proxies.push(if l.positive { format!("b_{}", l.var) } else { format!("(not b_{})", l.var) });
        }
        let _ = writeln!(text, "(check-sat-assuming ({}))", proxies.join(" "));
        self.send(&text)?;
        let line = self.proc.read_line(self.timeout)?;
        if line.starts_with("(error") {
            return Err(SolverError::Unparseable(line));
        }
        parse_status(&line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::ThresholdMechanism;
    use crate::snn::NeuronId;

    fn var(n: NeuronId, t: usize) -> Variable {
        Variable::new(n, t)
    }

    #[test]
    fn t0_equation_is_zero() {
        let p = var(NeuronId::hidden(0), 0);
        let eq = Equation { target: p, omega: BoolExpr::False, mechanism: None };
        assert_eq!(smt_equation(&eq), "(= p_h0_0 0)");
    }

    #[test]
    fn binary_equation_shape() {
        let h = NeuronId::hidden(0);
        let m = ThresholdMechanism {
            previous: var(h, 0),
            excitatory: vec![var(NeuronId::input(0), 1), var(NeuronId::input(1), 1)],
            inhibitory: vec![],
            threshold: 2,
            carried_potential: 1,
        };
        let eq = Equation { target: var(h, 1), omega: m.omega(), mechanism: Some(m) };
        assert_eq!(
            smt_equation(&eq),
            "(= (= p_h0_1 1) (and (=> (= p_h0_0 0) (>= (+ p_i0_1 p_i1_1 1) 2)) (=> (= p_h0_0 1) (>= (+ p_i0_1 p_i1_1) 2))))"
        );
    }

    #[test]
    fn ternary_equation_shape() {
        let o = NeuronId::output(0);
        let m = ThresholdMechanism {
            previous: var(o, 2),
            excitatory: vec![var(NeuronId::hidden(0), 3)],
            inhibitory: vec![var(NeuronId::hidden(1), 3)],
            threshold: 1,
            carried_potential: -2,
        };
        let eq = Equation { target: var(o, 3), omega: m.omega(), mechanism: Some(m) };
        assert_eq!(
            smt_equation(&eq),
            "(= (= p_o0_3 1) (and (=> (= p_o0_2 0) (>= (+ p_h0_3 (- p_h1_3) (- 2)) 1)) (=> (= p_o0_2 1) (>= (+ p_h0_3 (- p_h1_3)) 1))))"
        );
    }

    #[test]
    fn translation_arities() {
        assert_eq!(tr(&BoolExpr::And(vec![])), "true");
        let v = var(NeuronId::input(0), 1);
        assert_eq!(tr(&BoolExpr::Or(vec![BoolExpr::var(v)])), "(= p_i0_1 1)");
        assert_eq!(tr_literal(Literal::new(v, false)), "(not (= p_i0_1 1))");
        assert_eq!(linear_sum(&[], &[], 0), "0");
    }

    #[test]
    fn value_reply_parses() {
        let i = parse_values("((p_i0_1 1)\n (p_h2_0 0))").unwrap();
        assert_eq!(i.get(var(NeuronId::input(0), 1)), Some(true));
        assert_eq!(i.get(var(NeuronId::hidden(2), 0)), Some(false));
    }
}
