//! Binary causal models of a concrete network run.
//!
//! Every neuron `X` and time `t` gets a Boolean variable `p_{X,t}`. Input
//! variables are exogenous; every other variable has one structural
//! equation `p ↔ ω_p` whose right-hand side compares the weighted input
//! spikes against the threshold, offset by the potential the neuron
//! carried over from `t - 1` in this particular run.

mod expr;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::{DynamicsTrace, Layer, Network, NeuronId, WeightScale};

pub use expr::{BoolExpr, Interpretation};

/// `p_{X,t}`: whether neuron `X` fires at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variable {
    pub neuron: NeuronId,
    pub time: usize,
}

impl Variable {
    pub const fn new(neuron: NeuronId, time: usize) -> Self {
        Self { neuron, time }
    }

    pub fn is_exogenous(&self) -> bool {
        self.neuron.is_input()
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p_{}_{}", self.neuron, self.time)
    }
}

impl FromStr for Variable {
    type Err = Error;

    /// Parses the [`fmt::Display`] form, e.g. `p_h3_1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("not a variable name: {s:?}"));
        let rest = s.strip_prefix("p_").ok_or_else(bad)?;
        let (neuron, time) = rest.rsplit_once('_').ok_or_else(bad)?;
        let mut chars = neuron.chars();
        let layer = match chars.next() {
            Some('i') => Layer::Input,
            Some('h') => Layer::Hidden,
            Some('o') => Layer::Output,
            _ => return Err(bad()),
        };
        let index = chars.as_str().parse().map_err(|_| bad())?;
        let time = time.parse().map_err(|_| bad())?;
        Ok(Self::new(NeuronId { layer, index }, time))
    }
}

/// A variable or its negation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: Variable,
    pub positive: bool,
}

impl Literal {
    pub const fn new(var: Variable, positive: bool) -> Self {
        Self { var, positive }
    }

    pub fn negated(self) -> Self {
        Self { positive: !self.positive, ..self }
    }

    pub fn expr(self) -> BoolExpr {
        BoolExpr::lit(self.var, self.positive)
    }

    pub fn holds(self, interp: &Interpretation) -> Option<bool> {
        interp.get(self.var).map(|b| b == self.positive)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.var)
        } else {
            write!(f, "¬{}", self.var)
        }
    }
}

/// The conjunction of a list of literals.
pub fn conjunction(lits: &[Literal]) -> BoolExpr {
    BoolExpr::and(lits.iter().map(|l| l.expr()).collect())
}

/// Run-specific constants of one non-input neuron at one time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceConstant {
    pub neuron: NeuronId,
    pub time: usize,
    /// `A(X, t-1)`
    pub carried_potential: i64,
    /// `F_X(t-1)`
    pub fired_previously: bool,
}

/// The threshold data an equation was built from, kept so that the
/// arithmetic encodings can be emitted without reverse-engineering `ω`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdMechanism {
    pub previous: Variable,
    pub excitatory: Vec<Variable>,
    pub inhibitory: Vec<Variable>,
    pub threshold: i64,
    pub carried_potential: i64,
}

impl ThresholdMechanism {
    /// `ω` with degenerate thresholds folded to constants.
    pub fn omega(&self) -> BoolExpr {
        let prev = BoolExpr::var(self.previous);
        let fresh = BoolExpr::at_least(
            self.excitatory.clone(),
            self.inhibitory.clone(),
            self.threshold - self.carried_potential,
        );
        let reset = BoolExpr::at_least(self.excitatory.clone(), self.inhibitory.clone(), self.threshold);
        BoolExpr::and(vec![
            BoolExpr::implies(BoolExpr::not(prev.clone()), fresh),
            BoolExpr::implies(prev, reset),
        ])
    }
}

/// `p ↔ ω_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equation {
    pub target: Variable,
    pub omega: BoolExpr,
    /// Absent for the `t = 0` equations, which are `p ↔ ⊥`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<ThresholdMechanism>,
}

impl Equation {
    pub fn holds(&self, interp: &Interpretation) -> Result<bool> {
        let lhs = interp.get(self.target).ok_or(Error::UnboundVariable(self.target))?;
        Ok(lhs == self.omega.eval(interp)?)
    }

    /// Variables the equation is built from: the neuron's own history and
    /// every predecessor, even those a folded threshold no longer mentions.
    pub fn dependencies(&self) -> Vec<Variable> {
        match &self.mechanism {
            Some(m) => std::iter::once(m.previous).chain(m.excitatory.iter().copied()).chain(m.inhibitory.iter().copied()).collect(),
            None => self.omega.vars(),
        }
    }

    pub fn as_expr(&self) -> BoolExpr {
        BoolExpr::iff(BoolExpr::var(self.target), self.omega.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_count: usize,
    pub hidden_count: usize,
    pub output_count: usize,
    pub t_end: usize,
}

/// The binary causal model of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalModel {
    pub shape: ModelShape,
    pub weight_scale: WeightScale,
    pub exogenous: Vec<Variable>,
    pub endogenous: Vec<Variable>,
    /// Equations in the same order as `endogenous`.
    pub equations: Vec<Equation>,
    pub slice_constants: Vec<SliceConstant>,
    #[serde(skip)]
    index: HashMap<Variable, usize>,
}

/// Carried potentials `A(X, t)` recomputed from a trace's firing bits.
fn carried_potentials(net: &Network, trace: &DynamicsTrace, neuron: NeuronId) -> Vec<i64> {
    let incoming = net.incoming(neuron);
    let mut a = vec![0i64; trace.t_end() + 1];
    for t in 1..=trace.t_end() {
        let carried = if trace.firing(t - 1, neuron) { 0 } else { a[t - 1] };
        let stimulus: i64 = incoming
            .iter()
            .filter(|&&(x, _)| trace.firing(t, x))
            .map(|&(_, w)| i64::from(w))
            .sum();
        a[t] = carried + stimulus;
    }
    a
}

fn check_dims(net: &Network, trace: &DynamicsTrace) -> Result<()> {
    if trace.input.input_count() != net.input_count
        || trace.hidden_count() != net.hidden_count
        || trace.output_count() != net.output_count
    {
        return Err(Error::DimensionMismatch(format!(
            "trace is {}-{}-{}, network is {}-{}-{}",
            trace.input.input_count(),
            trace.hidden_count(),
            trace.output_count(),
            net.input_count,
            net.hidden_count,
            net.output_count
        )));
    }
    if trace.input.t_end() != trace.t_end() {
        return Err(Error::DimensionMismatch("trace input and firing lengths differ".into()));
    }
    Ok(())
}

/// Compiles a network and one of its runs into a causal model.
pub fn build_bcm(net: &Network, trace: &DynamicsTrace) -> Result<CausalModel> {
    net.validate()?;
    check_dims(net, trace)?;
    let t_end = trace.t_end();
    let exogenous = (0..=t_end)
        .flat_map(|t| (0..net.input_count).map(move |i| Variable::new(NeuronId::input(i), t)))
        .collect();

    let neurons: Vec<NeuronId> = net.non_input_neurons().collect();
    let potentials: Vec<Vec<i64>> = neurons.iter().map(|&x| carried_potentials(net, trace, x)).collect();
    let edges: Vec<(Vec<NeuronId>, Vec<NeuronId>)> =
        neurons.iter().map(|&x| (net.excitatory(x), net.inhibitory(x))).collect();

    let mut endogenous = Vec::with_capacity(neurons.len() * (t_end + 1));
    let mut equations = Vec::with_capacity(endogenous.capacity());
    let mut slice_constants = Vec::with_capacity(neurons.len() * t_end);
    for t in 0..=t_end {
        for (k, &x) in neurons.iter().enumerate() {
            let target = Variable::new(x, t);
            endogenous.push(target);
            if t == 0 {
                equations.push(Equation { target, omega: BoolExpr::False, mechanism: None });
                continue;
            }
            let carried = potentials[k][t - 1];
            let fired = trace.firing(t - 1, x);
            slice_constants.push(SliceConstant {
                neuron: x,
                time: t,
                carried_potential: carried,
                fired_previously: fired,
            });
            let at_t = |ns: &[NeuronId]| ns.iter().map(|&n| Variable::new(n, t)).collect();
            let mechanism = ThresholdMechanism {
                previous: Variable::new(x, t - 1),
                excitatory: at_t(&edges[k].0),
                inhibitory: at_t(&edges[k].1),
                threshold: i64::from(net.threshold(x)),
                carried_potential: carried,
            };
            equations.push(Equation { target, omega: mechanism.omega(), mechanism: Some(mechanism) });
        }
    }
    let shape = ModelShape {
        input_count: net.input_count,
        hidden_count: net.hidden_count,
        output_count: net.output_count,
        t_end,
    };
    Ok(CausalModel::assemble(shape, net.weight_scale, exogenous, endogenous, equations, slice_constants))
}

/// `I(p_{X,t}) = F_X(t)` over every variable of the run.
pub fn trace_interpretation(trace: &DynamicsTrace) -> Interpretation {
    let mut interp = Interpretation::new();
    for t in 0..=trace.t_end() {
        for i in 0..trace.input.input_count() {
            let x = NeuronId::input(i);
            interp.set(Variable::new(x, t), trace.firing(t, x));
        }
        for h in 0..trace.hidden_count() {
            let x = NeuronId::hidden(h);
            interp.set(Variable::new(x, t), trace.firing(t, x));
        }
        for o in 0..trace.output_count() {
            let x = NeuronId::output(o);
            interp.set(Variable::new(x, t), trace.firing(t, x));
        }
    }
    interp
}

/// Whether the trace's firing bits satisfy every equation of its own model.
pub fn check_compatibility(net: &Network, trace: &DynamicsTrace) -> Result<bool> {
    let model = build_bcm(net, trace)?;
    model.satisfied_by(&trace_interpretation(trace))
}

/// Variables whose equation the trace's firing bits violate, in model order.
pub fn incompatible_variables(net: &Network, trace: &DynamicsTrace) -> Result<Vec<Variable>> {
    let model = build_bcm(net, trace)?;
    let interp = trace_interpretation(trace);
    let mut bad = Vec::new();
    for eq in &model.equations {
        if !eq.holds(&interp)? {
            bad.push(eq.target);
        }
    }
    Ok(bad)
}

impl CausalModel {
    fn assemble(
        shape: ModelShape,
        weight_scale: WeightScale,
        exogenous: Vec<Variable>,
        endogenous: Vec<Variable>,
        equations: Vec<Equation>,
        slice_constants: Vec<SliceConstant>,
    ) -> Self {
        let mut m = Self { shape, weight_scale, exogenous, endogenous, equations, slice_constants, index: HashMap::new() };
        m.reindex();
        m
    }

    fn reindex(&mut self) {
        self.index = self.equations.iter().enumerate().map(|(k, e)| (e.target, k)).collect();
    }

    pub fn equation(&self, v: Variable) -> Option<&Equation> {
        self.index.get(&v).map(|&k| &self.equations[k])
    }

    pub fn slice_constant(&self, neuron: NeuronId, time: usize) -> Option<&SliceConstant> {
        self.slice_constants.iter().find(|c| c.neuron == neuron && c.time == time)
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.exogenous.iter().chain(&self.endogenous).copied()
    }

    /// Input variables at time `t`.
    pub fn exogenous_at(&self, t: usize) -> Vec<Variable> {
        self.exogenous.iter().copied().filter(|v| v.time == t).collect()
    }

    /// Output-layer variables at time `t`.
    pub fn outputs_at(&self, t: usize) -> Vec<Variable> {
        (0..self.shape.output_count).map(|o| Variable::new(NeuronId::output(o), t)).collect()
    }

    pub fn satisfied_by(&self, interp: &Interpretation) -> Result<bool> {
        for eq in &self.equations {
            if !eq.holds(interp)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The unique model of the equations for the given exogenous values,
    /// found by evaluating equations in time order.
    pub fn solve_forward(&self, exogenous: &Interpretation) -> Result<Interpretation> {
        let mut interp = exogenous.clone();
        // endogenous is ordered by time, hidden before output
        for eq in &self.equations {
            let value = eq.omega.eval(&interp)?;
            interp.set(eq.target, value);
        }
        Ok(interp)
    }

    /// Edges `(q, p)` for every variable `q` occurring in `ω_p`.
    pub fn causal_graph(&self) -> Vec<(Variable, Variable)> {
        let mut edges: Vec<_> = self
            .equations
            .iter()
            .flat_map(|eq| eq.omega.vars().into_iter().map(move |q| (q, eq.target)))
            .collect();
        edges.sort();
        edges
    }

    /// Every variable the given ones structurally depend on, themselves
    /// included.
    pub fn cone_of_influence(&self, roots: impl IntoIterator<Item = Variable>) -> BTreeSet<Variable> {
        let mut cone = BTreeSet::new();
        let mut stack: Vec<Variable> = roots.into_iter().collect();
        while let Some(v) = stack.pop() {
            if !cone.insert(v) {
                continue;
            }
            if let Some(eq) = self.equation(v) {
                stack.extend(eq.dependencies().into_iter().filter(|q| !cone.contains(q)));
            }
        }
        cone
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: Self = serde_json::from_str(text)?;
        m.validate()?;
        m.reindex();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Structural invariants: one equation per endogenous variable, none
    /// self-referential, and exogenous variables exactly the inputs.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if self.equations.len() != self.endogenous.len() {
            return bad("equation count differs from endogenous variable count".into());
        }
        for (eq, &v) in self.equations.iter().zip(&self.endogenous) {
            if eq.target != v {
                return bad(format!("equation for {} listed under {v}", eq.target));
            }
            if v.is_exogenous() {
                return bad(format!("{v} is an input but has an equation"));
            }
            if eq.omega.mentions(v) {
                return bad(format!("equation for {v} mentions itself"));
            }
            if v.time == 0 && eq.omega != BoolExpr::False {
                return bad(format!("{v} at t = 0 is not forced silent"));
            }
        }
        if let Some(v) = self.exogenous.iter().find(|v| !v.is_exogenous()) {
            return bad(format!("{v} is listed as exogenous"));
        }
        Ok(())
    }
}
