//! Abductive explanations of a network's output.
//!
//! An explanation of the output at time `t` is a subset-minimal set of
//! input literals at time `t`, all true in the actual input, that forces
//! the observed output pattern at `t` under the causal model. Inputs at
//! other times are held at their actual values throughout.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causal::{build_bcm, conjunction, BoolExpr, CausalModel, Literal, Variable};
use crate::error::{Error, Result};
use crate::snn::{simulate, DynamicsTrace, InputSequence, Network, NeuronId};
use crate::solver::{Backend, EntailmentSession, SolverOptions};

/// A conjunction of literals, each variable at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Term(Vec<Literal>);

impl Term {
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        let vars: BTreeSet<Variable> = literals.iter().map(|l| l.var).collect();
        if vars.len() != literals.len() {
            return Err(Error::InvalidArgument("a term mentions some variable twice".into()));
        }
        Ok(Self(literals))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, l: Literal) -> bool {
        self.0.contains(&l)
    }

    /// Whether every literal of `self` is in `other`.
    pub fn is_subset_of(&self, other: &Term) -> bool {
        self.0.iter().all(|&l| other.contains(l))
    }

    pub fn to_expr(&self) -> BoolExpr {
        conjunction(&self.0)
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|l| l.positive).count()
    }
}

/// The observed output pattern at one time step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanandum {
    pub time: usize,
    /// Output neurons firing at `time`.
    pub positive: Vec<usize>,
    /// Output neurons silent at `time`.
    pub negative: Vec<usize>,
}

impl Explanandum {
    pub fn literals(&self) -> Vec<Literal> {
        let mut lits: Vec<Literal> = self
            .positive
            .iter()
            .map(|&o| Literal::new(Variable::new(NeuronId::output(o), self.time), true))
            .chain(self.negative.iter().map(|&o| Literal::new(Variable::new(NeuronId::output(o), self.time), false)))
            .collect();
        lits.sort_by_key(|l| l.var);
        lits
    }

    pub fn to_expr(&self) -> BoolExpr {
        conjunction(&self.literals())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificates {
    /// The actual input satisfies the term.
    pub i: bool,
    /// The term entails the explanandum.
    pub ii: bool,
    /// No proper subterm does.
    pub iii: bool,
}

impl Certificates {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii
    }
}

/// Order in which the deletion pass visits the initial literals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "seed")]
pub enum LiteralOrder {
    /// Input index order (row-major pixels).
    Raster,
    /// A reproducible shuffle.
    Seeded(u64),
}

impl LiteralOrder {
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        if let LiteralOrder::Seeded(seed) = *self {
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        idx
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            LiteralOrder::Raster => None,
            LiteralOrder::Seeded(s) => Some(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub term: Term,
    pub explanandum: Explanandum,
    pub backend: Backend,
    pub certificates: Certificates,
    pub order: LiteralOrder,
    /// Entailment checks made by the deletion pass.
    pub solver_calls: usize,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug)]
pub struct AxpOptions {
    pub backend: Backend,
    pub order: LiteralOrder,
    pub solver: SolverOptions,
    /// Re-check the result with a fresh session before returning it.
    pub certify: bool,
}

impl AxpOptions {
    pub fn new(backend: Backend, order: LiteralOrder) -> Self {
        Self { backend, order, solver: SolverOptions::default(), certify: true }
    }
}

fn check_time(input: &InputSequence, t: usize) -> Result<()> {
    if t > input.t_end() {
        return Err(Error::InvalidArgument(format!("time {t} outside 0..={}", input.t_end())));
    }
    Ok(())
}

/// One literal per input neuron at time `t`, with its actual polarity.
pub fn initial_term(input: &InputSequence, t: usize) -> Result<Term> {
    check_time(input, t)?;
    Ok(Term(input_literals(input, t)))
}

fn input_literals(input: &InputSequence, t: usize) -> Vec<Literal> {
    (0..input.input_count())
        .map(|i| Literal::new(Variable::new(NeuronId::input(i), t), input.fires(t, i)))
        .collect()
}

/// Actual values of the inputs at every time other than `t`.
pub fn background(input: &InputSequence, t: usize) -> Vec<Literal> {
    (0..=input.t_end()).filter(|&s| s != t).flat_map(|s| input_literals(input, s)).collect()
}

pub fn explanandum_of(trace: &DynamicsTrace, t: usize) -> Result<Explanandum> {
    if t > trace.t_end() {
        return Err(Error::InvalidArgument(format!("time {t} outside 0..={}", trace.t_end())));
    }
    let (positive, negative) = (0..trace.output_count()).partition(|&o| trace.firing(t, NeuronId::output(o)));
    Ok(Explanandum { time: t, positive, negative })
}

struct Query {
    model: CausalModel,
    explanandum: Explanandum,
    background: Vec<Literal>,
}

fn prepare(net: &Network, input: &InputSequence, t: usize) -> Result<Query> {
    check_time(input, t)?;
    let trace = simulate(net, input)?;
    Ok(Query {
        model: build_bcm(net, &trace)?,
        explanandum: explanandum_of(&trace, t)?,
        background: background(input, t),
    })
}

/// Deletion pass: visit the literals of the complete input term in the
/// given order and drop each one whose removal keeps the explanandum
/// entailed.
pub fn compute_axp(net: &Network, input: &InputSequence, t: usize, opts: &AxpOptions) -> Result<Explanation> {
    let start = Instant::now();
    let q = prepare(net, input, t)?;
    let init = initial_term(input, t)?;
    let mut session =
        EntailmentSession::new(&q.model, &q.explanandum.to_expr(), &q.background, opts.backend, &opts.solver)?;
    let mut kept = vec![true; init.len()];
    let lits = init.literals();
    for k in opts.order.permutation(init.len()) {
        kept[k] = false;
        let rest: Vec<Literal> = lits.iter().zip(&kept).filter(|(_, &keep)| keep).map(|(&l, _)| l).collect();
        if !session.entails(&rest)? {
            kept[k] = true;
        }
    }
    let solver_calls = session.queries();
    drop(session);
    let term = Term(lits.iter().zip(&kept).filter(|(_, &keep)| keep).map(|(&l, _)| l).collect());
    let certificates = if opts.certify {
        verify_term(&q, &term, input, opts.backend, &opts.solver)?
    } else {
        Certificates { i: true, ii: true, iii: true }
    };
    Ok(Explanation {
        term,
        explanandum: q.explanandum,
        backend: opts.backend,
        certificates,
        order: opts.order,
        solver_calls,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Terms up to this size also get every proper subset checked.
pub const EXHAUSTIVE_SUBSET_LIMIT: usize = 12;

fn verify_term(
    q: &Query,
    term: &Term,
    input: &InputSequence,
    backend: Backend,
    opts: &SolverOptions,
) -> Result<Certificates> {
    let t = q.explanandum.time;
    let i = term
        .literals()
        .iter()
        .all(|l| l.var.is_exogenous() && l.var.time == t && l.var.neuron.index < input.input_count() && input.fires(t, l.var.neuron.index) == l.positive);
    let mut session = EntailmentSession::new(&q.model, &q.explanandum.to_expr(), &q.background, backend, opts)?;
    let ii = session.entails(term.literals())?;
    // entailment only weakens as literals are removed, so if no single
    // deletion preserves it, no smaller subterm does
    let mut iii = true;
    for k in 0..term.len() {
        let rest: Vec<Literal> =
            term.literals().iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &l)| l).collect();
        if session.entails(&rest)? {
            iii = false;
            break;
        }
    }
    if iii && term.len() <= EXHAUSTIVE_SUBSET_LIMIT {
        let n = term.len();
        for mask in 0u32..(1 << n) - 1 {
            let sub: Vec<Literal> = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| term.literals()[j]).collect();
            if session.entails(&sub)? {
                iii = false;
                break;
            }
        }
    }
    Ok(Certificates { i, ii, iii })
}

/// Re-checks the three defining conditions of an explanation.
pub fn verify_axp(expl: &Explanation, net: &Network, input: &InputSequence) -> Result<Certificates> {
    verify_axp_with(expl, net, input, &SolverOptions::default())
}

pub fn verify_axp_with(
    expl: &Explanation,
    net: &Network,
    input: &InputSequence,
    opts: &SolverOptions,
) -> Result<Certificates> {
    let q = prepare(net, input, expl.explanandum.time)?;
    if q.explanandum != expl.explanandum {
        return Ok(Certificates { i: false, ii: false, iii: false });
    }
    verify_term(&q, &expl.term, input, expl.backend, opts)
}

/// Input features in the term whose column into the hidden layer is all zero.
pub fn audit_connectivity(term: &Term, net: &Network) -> Vec<usize> {
    let connected = net.connected_inputs();
    let mut bad: Vec<usize> = term
        .literals()
        .iter()
        .filter(|l| l.var.is_exogenous())
        .map(|l| l.var.neuron.index)
        .filter(|&i| !connected.get(i).copied().unwrap_or(false))
        .collect();
    bad.sort_unstable();
    bad.dedup();
    bad
}

/// JSON form of one explanation literal; `(x, y)` = (column, row).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralRecord {
    pub x: usize,
    pub y: usize,
    pub time: usize,
    pub polarity: bool,
}

/// JSON export of an explanation together with the input it explains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub t: usize,
    pub literals: Vec<LiteralRecord>,
    pub certificates: Certificates,
    pub backend: Backend,
    pub order_seed: Option<u64>,
    pub solver_calls: usize,
    pub wall_time_ms: u64,
    pub explanandum: Explanandum,
    pub width: usize,
    pub height: usize,
    /// Input spike bitmaps, one string per time step `1..=t_end`.
    pub input: Vec<String>,
}

impl ExplanationRecord {
    pub fn new(expl: &Explanation, input: &InputSequence, width: usize) -> Result<Self> {
        if width == 0 || !input.input_count().is_multiple_of(width) {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs do not form rows of width {width}",
                input.input_count()
            )));
        }
        let literals = expl
            .term
            .literals()
            .iter()
            .map(|l| LiteralRecord {
                x: l.var.neuron.index % width,
                y: l.var.neuron.index / width,
                time: l.var.time,
                polarity: l.positive,
            })
            .collect();
        Ok(Self {
            t: expl.explanandum.time,
            literals,
            certificates: expl.certificates,
            backend: expl.backend,
            order_seed: expl.order.seed(),
            solver_calls: expl.solver_calls,
            wall_time_ms: expl.wall_time_ms,
            explanandum: expl.explanandum.clone(),
            width,
            height: input.input_count() / width,
            input: (1..=input.t_end()).map(|t| crate::snn::bitmap(&input.row(t))).collect(),
        })
    }

    pub fn input_sequence(&self) -> Result<InputSequence> {
        let rows: Result<Vec<Vec<bool>>> = self.input.iter().map(|r| crate::snn::parse_bitmap(r)).collect();
        let rows = rows?;
        let n = self.width * self.height;
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Data(format!("input bitmaps must have {n} bits")));
        }
        Ok(InputSequence::new(n, rows))
    }

    /// The term, rebuilt from the literal records.
    pub fn term(&self) -> Result<Term> {
        Term::new(
            self.literals
                .iter()
                .map(|r| Literal::new(Variable::new(NeuronId::input(r.y * self.width + r.x), r.time), r.polarity))
                .collect(),
        )
    }

    pub fn explanation(&self) -> Result<Explanation> {
        Ok(Explanation {
            term: self.term()?,
            explanandum: self.explanandum.clone(),
            backend: self.backend,
            certificates: self.certificates,
            order: self.order_seed.map_or(LiteralOrder::Raster, LiteralOrder::Seeded),
            solver_calls: self.solver_calls,
            wall_time_ms: self.wall_time_ms,
        })
    }
}
