//! Clausal lowering of causal models.
//!
//! Equations are clausified gate by gate, reusing the equation's own
//! variable as the root gate. Threshold atoms become totalizer trees that
//! are shared between the two atoms of an equation (same inputs, different
//! bounds) and truncated at the largest bound requested.

use std::collections::{BTreeMap, HashMap};

use crate::causal::{BoolExpr, CausalModel, Equation, Interpretation, Variable};

/// DIMACS literal: `v` or `-v` for a 1-based variable index `v`.
pub type Lit = i32;

/// Bijection between model variables and the solver indices they occupy.
/// Indices without a model variable are auxiliaries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarMap {
    to_index: HashMap<Variable, u32>,
    from_index: BTreeMap<u32, Variable>,
}

impl VarMap {
    pub fn index(&self, v: Variable) -> Option<u32> {
        self.to_index.get(&v).copied()
    }

    pub fn variable(&self, index: u32) -> Option<Variable> {
        self.from_index.get(&index).copied()
    }

    pub fn insert(&mut self, v: Variable, index: u32) {
        self.to_index.insert(v, index);
        self.from_index.insert(index, v);
    }

    pub fn len(&self) -> usize {
        self.to_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_index.is_empty()
    }

    /// `(index, variable)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, Variable)> + '_ {
        self.from_index.iter().map(|(&i, &v)| (i, v))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
    pub varmap: VarMap,
    /// Model variables eliminated by constant propagation, with their value.
    pub constants: BTreeMap<Variable, bool>,
}

impl CnfFormula {
    pub fn is_well_formed(&self) -> bool {
        self.clauses
            .iter()
            .all(|c| !c.is_empty() && c.iter().all(|&l| l != 0 && l.unsigned_abs() <= self.num_vars))
            && self.varmap.iter().all(|(i, _)| i >= 1 && i <= self.num_vars)
    }

    /// Model-variable values of a solver assignment (`assignment[i - 1]` for
    /// index `i`), eliminated constants included.
    pub fn project(&self, assignment: &[bool]) -> Interpretation {
        let mut interp: Interpretation = self.constants.iter().map(|(&v, &b)| (v, b)).collect();
        for (i, v) in self.varmap.iter() {
            interp.set(v, assignment[i as usize - 1]);
        }
        interp
    }

    /// Whether an assignment satisfies every clause.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }
}

/// A clausified subformula: either folded to a constant or a literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Const(bool),
    Lit(Lit),
}

#[derive(Debug, Default)]
pub struct CnfEncoder {
    f: CnfFormula,
    /// Totalizer outputs per input-literal list: `outs[j - 1]` ⟺ at least `j` true.
    totalizers: HashMap<Vec<Lit>, Vec<Lit>>,
    unsat: bool,
}

impl CnfEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> Lit {
        self.f.num_vars += 1;
        self.f.num_vars as Lit
    }

    /// Solver literal of a model variable, allocated on first use.
    pub fn var_lit(&mut self, v: Variable) -> Lit {
        if let Some(i) = self.f.varmap.index(v) {
            return i as Lit;
        }
        let l = self.fresh();
        self.f.varmap.insert(v, l as u32);
        l
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        if clause.is_empty() {
            self.unsat = true;
        } else {
            self.f.clauses.push(clause);
        }
    }

    /// Whether an empty clause was derived.
    pub fn is_trivially_unsat(&self) -> bool {
        self.unsat
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.f
    }

    /// Records a model variable as eliminated at a fixed value.
    pub fn set_constant(&mut self, v: Variable, value: bool) {
        self.f.constants.insert(v, value);
    }

    /// The finished formula; a derived empty clause becomes the
    /// contradictory pair `x, ¬x` on a fresh variable.
    pub fn finish(mut self) -> CnfFormula {
        if self.unsat {
            let x = self.fresh();
            self.f.clauses.push(vec![x]);
            self.f.clauses.push(vec![-x]);
        }
        self.f
    }

    /// Adds the clauses of `p ↔ ω` for an equation.
    pub fn add_equation(&mut self, eq: &Equation) {
        let root = self.var_lit(eq.target);
        self.define(root, &eq.omega);
    }

    /// Asserts a formula.
    pub fn assert_expr(&mut self, e: &BoolExpr) {
        match self.gate(e) {
            Gate::Const(true) => {}
            Gate::Const(false) => self.add_clause(Vec::new()),
            Gate::Lit(l) => self.add_clause(vec![l]),
        }
    }

    /// A literal equivalent to `e`, introducing auxiliaries as needed.
    pub fn gate(&mut self, e: &BoolExpr) -> Gate {
        match e {
            BoolExpr::True => Gate::Const(true),
            BoolExpr::False => Gate::Const(false),
            BoolExpr::Var(v) => Gate::Lit(self.var_lit(*v)),
            BoolExpr::Not(inner) => match self.gate(inner) {
                Gate::Const(b) => Gate::Const(!b),
                Gate::Lit(l) => Gate::Lit(-l),
            },
            BoolExpr::AtLeast { pos, neg, bound } => self.at_least(pos, neg, *bound),
            _ => {
                let aux = self.fresh();
                self.define(aux, e);
                Gate::Lit(aux)
            }
        }
    }

    fn gate_lits(&mut self, es: &[BoolExpr]) -> Vec<Gate> {
        es.iter().map(|e| self.gate(e)).collect()
    }

    /// Clauses for `root ↔ e`.
    fn define(&mut self, root: Lit, e: &BoolExpr) {
        self.prepare_totalizers(e);
        match e {
            BoolExpr::Not(inner) => self.define(-root, inner),
            BoolExpr::Or(es) => {
                let gs = self.gate_lits(es);
                self.define_or(root, &gs);
            }
            BoolExpr::And(es) => {
                // root ↔ ∧ es  is  ¬root ↔ ∨ ¬es
                let gs: Vec<Gate> = self.gate_lits(es).into_iter().map(negate).collect();
                self.define_or(-root, &gs);
            }
            BoolExpr::Implies(a, b) => {
                let ga = negate(self.gate(a));
                let gb = self.gate(b);
                self.define_or(root, &[ga, gb]);
            }
            BoolExpr::Iff(a, b) => {
                let (ga, gb) = (self.gate(a), self.gate(b));
                match (ga, gb) {
                    (Gate::Lit(x), Gate::Lit(y)) => {
                        self.add_clause(vec![-root, -x, y]);
                        self.add_clause(vec![-root, x, -y]);
                        self.add_clause(vec![root, x, y]);
                        self.add_clause(vec![root, -x, -y]);
                    }
                    (Gate::Const(c), g) | (g, Gate::Const(c)) => {
                        let g = if c { g } else { negate(g) };
                        self.equate(root, g);
                    }
                }
            }
            _ => {
                let g = self.gate(e);
                self.equate(root, g);
            }
        }
    }

    fn equate(&mut self, root: Lit, g: Gate) {
        match g {
            Gate::Const(true) => self.add_clause(vec![root]),
            Gate::Const(false) => self.add_clause(vec![-root]),
            Gate::Lit(l) if l == root => {}
            Gate::Lit(l) => {
                self.add_clause(vec![-root, l]);
                self.add_clause(vec![root, -l]);
            }
        }
    }

    /// `root ↔ ∨ gs`.
    fn define_or(&mut self, root: Lit, gs: &[Gate]) {
        if gs.contains(&Gate::Const(true)) {
            self.add_clause(vec![root]);
            return;
        }
        let lits: Vec<Lit> = gs
            .iter()
            .filter_map(|g| match *g {
                Gate::Lit(l) => Some(l),
                Gate::Const(_) => None,
            })
            .collect();
        let mut long = vec![-root];
        long.extend(&lits);
        self.add_clause(long);
        for &l in &lits {
            self.add_clause(vec![-l, root]);
        }
    }

    /// Builds every totalizer `e` needs at its largest bound, so that the
    /// two atoms of one equation share a tree.
    fn prepare_totalizers(&mut self, e: &BoolExpr) {
        let mut need: Vec<(Vec<Variable>, Vec<Variable>, i64)> = Vec::new();
        collect_atoms(e, &mut need);
        let mut max: HashMap<Vec<Lit>, usize> = HashMap::new();
        for (pos, neg, bound) in need {
            let (lits, k) = self.cardinality(&pos, &neg, bound);
            if k >= 1 && k <= lits.len() as i64 {
                let e = max.entry(lits).or_insert(0);
                *e = (*e).max(k as usize);
            }
        }
        for (lits, k) in max {
            self.totalizer(&lits, k);
        }
    }

    /// `sum(pos) - sum(neg) >= bound` as "at least k of lits".
    fn cardinality(&mut self, pos: &[Variable], neg: &[Variable], bound: i64) -> (Vec<Lit>, i64) {
        let mut lits: Vec<Lit> = pos.iter().map(|&v| self.var_lit(v)).collect();
        lits.extend(neg.iter().map(|&v| -self.var_lit(v)));
        (lits, bound + neg.len() as i64)
    }

    fn at_least(&mut self, pos: &[Variable], neg: &[Variable], bound: i64) -> Gate {
        let (lits, k) = self.cardinality(pos, neg, bound);
        if k <= 0 {
            return Gate::Const(true);
        }
        if k > lits.len() as i64 {
            return Gate::Const(false);
        }
        let outs = self.totalizer(&lits, k as usize);
        Gate::Lit(outs[k as usize - 1])
    }

    /// Totalizer outputs over `lits` covering at least bounds `1..=k`.
    pub fn totalizer(&mut self, lits: &[Lit], k: usize) -> Vec<Lit> {
        if let Some(outs) = self.totalizers.get(lits) {
            if outs.len() >= k.min(lits.len()) {
                return outs.clone();
            }
        }
        let outs = self.build_totalizer(lits, k);
        self.totalizers.insert(lits.to_vec(), outs.clone());
        outs
    }

    fn build_totalizer(&mut self, lits: &[Lit], k: usize) -> Vec<Lit> {
        if lits.len() == 1 {
            return vec![lits[0]];
        }
        let (left, right) = lits.split_at(lits.len() / 2);
        let a = self.build_totalizer(left, k);
        let b = self.build_totalizer(right, k);
        let width = k.min(lits.len());
        let outs: Vec<Lit> = (0..width).map(|_| self.fresh()).collect();
        // a[i-1] ⟺ at least i of the left inputs (a_0 is true)
        for i in 0..=a.len() {
            for j in 0..=b.len() {
                if i + j >= 1 {
                    let mut c = Vec::with_capacity(3);
                    if i > 0 {
                        c.push(-a[i - 1]);
                    }
                    if j > 0 {
                        c.push(-b[j - 1]);
                    }
                    c.push(outs[(i + j).min(width) - 1]);
                    self.add_clause(c);
                }
                if i + j < width {
                    let mut c = Vec::with_capacity(3);
                    if i < a.len() {
                        c.push(a[i]);
                    } else if a.len() < left.len() {
                        continue;
                    }
                    if j < b.len() {
                        c.push(b[j]);
                    } else if b.len() < right.len() {
                        continue;
                    }
                    c.push(-outs[i + j]);
                    self.add_clause(c);
                }
            }
        }
        outs
    }
}

fn negate(g: Gate) -> Gate {
    match g {
        Gate::Const(b) => Gate::Const(!b),
        Gate::Lit(l) => Gate::Lit(-l),
    }
}

fn collect_atoms(e: &BoolExpr, out: &mut Vec<(Vec<Variable>, Vec<Variable>, i64)>) {
    match e {
        BoolExpr::True | BoolExpr::False | BoolExpr::Var(_) => {}
        BoolExpr::Not(a) => collect_atoms(a, out),
        BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| collect_atoms(e, out)),
        BoolExpr::Implies(a, b) | BoolExpr::Iff(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
        BoolExpr::AtLeast { pos, neg, bound } => out.push((pos.clone(), neg.clone(), *bound)),
    }
}

/// Values forced by `fixed` through the equations, found by evaluating
/// them in time order with constant folding. Fixed endogenous values are
/// kept as given.
pub fn propagate(model: &CausalModel, fixed: &Interpretation) -> HashMap<Variable, bool> {
    let mut known: HashMap<Variable, bool> = fixed.iter().collect();
    for eq in &model.equations {
        if known.contains_key(&eq.target) {
            continue;
        }
        match eq.omega.substitute(&|v| known.get(&v).copied()) {
            BoolExpr::True => known.insert(eq.target, true),
            BoolExpr::False => known.insert(eq.target, false),
            _ => None,
        };
    }
    known
}

/// Encodes the equations of every endogenous variable in `scope` (all of
/// them when `None`) together with `fixed`, eliminating every variable
/// whose value `fixed` forces.
pub fn encode_equations(
    model: &CausalModel,
    fixed: &Interpretation,
    scope: Option<&dyn Fn(Variable) -> bool>,
) -> CnfEncoder {
    encode_with_known(model, &propagate(model, fixed), scope)
}

/// [`encode_equations`] with the forced values already computed.
pub fn encode_with_known(
    model: &CausalModel,
    known: &HashMap<Variable, bool>,
    scope: Option<&dyn Fn(Variable) -> bool>,
) -> CnfEncoder {
    let lookup = |v: Variable| known.get(&v).copied();
    let mut enc = CnfEncoder::new();
    for (&v, &b) in known {
        if scope.is_none_or(|s| s(v)) {
            enc.set_constant(v, b);
        }
    }
    for eq in &model.equations {
        if !scope.is_none_or(|s| s(eq.target)) {
            continue;
        }
        let omega = eq.omega.substitute(&lookup);
        match known.get(&eq.target) {
            // forced by propagation, or fixed and possibly contradicting
            Some(&value) => {
                let e = if value { omega } else { BoolExpr::not(omega) };
                enc.assert_expr(&e);
            }
            None => enc.add_equation(&Equation { target: eq.target, omega, mechanism: None }),
        }
    }
    enc
}

/// CNF equisatisfiable with `(∧ equations) ∧ fixed`.
pub fn encode_cnf(model: &CausalModel, fixed: &Interpretation) -> CnfFormula {
    encode_equations(model, fixed, None).finish()
}
