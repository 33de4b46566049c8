//! Boolean expressions over causal-model variables.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Variable;
use crate::error::{Error, Result};

/// A propositional formula, extended with a linear threshold atom so that
/// neuron equations stay polynomial in the fan-in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolExpr {
    True,
    False,
    Var(Variable),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
    Implies(Box<BoolExpr>, Box<BoolExpr>),
    Iff(Box<BoolExpr>, Box<BoolExpr>),
    /// `sum(pos) - sum(neg) >= bound`, counting true variables.
    AtLeast { pos: Vec<Variable>, neg: Vec<Variable>, bound: i64 },
}

impl BoolExpr {
    pub fn var(v: Variable) -> Self {
        BoolExpr::Var(v)
    }

    pub fn lit(v: Variable, positive: bool) -> Self {
        if positive {
            BoolExpr::Var(v)
        } else {
            BoolExpr::Not(Box::new(BoolExpr::Var(v)))
        }
    }

    pub fn not(e: BoolExpr) -> Self {
        match e {
            BoolExpr::True => BoolExpr::False,
            BoolExpr::False => BoolExpr::True,
            BoolExpr::Not(inner) => *inner,
            e => BoolExpr::Not(Box::new(e)),
        }
    }

    /// Conjunction with constant folding.
    pub fn and(args: Vec<BoolExpr>) -> Self {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            match a {
                BoolExpr::True => {}
                BoolExpr::False => return BoolExpr::False,
                a => out.push(a),
            }
        }
        match out.len() {
            0 => BoolExpr::True,
            1 => out.pop().unwrap(),
            _ => BoolExpr::And(out),
        }
    }

    /// Disjunction with constant folding.
    pub fn or(args: Vec<BoolExpr>) -> Self {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            match a {
                BoolExpr::False => {}
                BoolExpr::True => return BoolExpr::True,
                a => out.push(a),
            }
        }
        match out.len() {
            0 => BoolExpr::False,
            1 => out.pop().unwrap(),
            _ => BoolExpr::Or(out),
        }
    }

    /// Implication with constant folding.
    pub fn implies(lhs: BoolExpr, rhs: BoolExpr) -> Self {
        match (lhs, rhs) {
            (_, BoolExpr::True) | (BoolExpr::False, _) => BoolExpr::True,
            (BoolExpr::True, r) => r,
            (l, BoolExpr::False) => BoolExpr::not(l),
            (l, r) => BoolExpr::Implies(Box::new(l), Box::new(r)),
        }
    }

    pub fn iff(lhs: BoolExpr, rhs: BoolExpr) -> Self {
        BoolExpr::Iff(Box::new(lhs), Box::new(rhs))
    }

    /// Threshold atom with the degenerate bounds folded to constants.
    pub fn at_least(pos: Vec<Variable>, neg: Vec<Variable>, bound: i64) -> Self {
        // as a cardinality constraint over pos and the negations of neg
        let card_bound = bound + neg.len() as i64;
        if card_bound <= 0 {
            BoolExpr::True
        } else if card_bound > (pos.len() + neg.len()) as i64 {
            BoolExpr::False
        } else {
            BoolExpr::AtLeast { pos, neg, bound }
        }
    }

    /// Every variable mentioned, in order of first occurrence.
    pub fn vars(&self) -> Vec<Variable> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.visit_vars(&mut |v| {
            if seen.insert(v) {
                out.push(v);
            }
        });
        out
    }

    pub fn mentions(&self, v: Variable) -> bool {
        let mut found = false;
        self.visit_vars(&mut |w| found |= w == v);
        found
    }

    fn visit_vars(&self, f: &mut impl FnMut(Variable)) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Var(v) => f(*v),
            BoolExpr::Not(e) => e.visit_vars(f),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.visit_vars(f)),
            BoolExpr::Implies(a, b) | BoolExpr::Iff(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            BoolExpr::AtLeast { pos, neg, .. } => pos.iter().chain(neg).copied().for_each(f),
        }
    }

    /// Evaluates under a valuation; fails on the first unbound variable.
    pub fn eval_with(&self, value: &impl Fn(Variable) -> Option<bool>) -> Result<bool> {
        Ok(match self {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Var(v) => value(*v).ok_or(Error::UnboundVariable(*v))?,
            BoolExpr::Not(e) => !e.eval_with(value)?,
            BoolExpr::And(es) => {
                let mut all = true;
                for e in es {
                    all &= e.eval_with(value)?;
                }
                all
            }
            BoolExpr::Or(es) => {
                let mut any = false;
                for e in es {
                    any |= e.eval_with(value)?;
                }
                any
            }
            BoolExpr::Implies(a, b) => !a.eval_with(value)? | b.eval_with(value)?,
            BoolExpr::Iff(a, b) => a.eval_with(value)? == b.eval_with(value)?,
            BoolExpr::AtLeast { pos, neg, bound } => {
                let count = |vs: &[Variable]| -> Result<i64> {
                    let mut n = 0;
                    for &v in vs {
                        n += i64::from(value(v).ok_or(Error::UnboundVariable(v))?);
                    }
                    Ok(n)
                };
                count(pos)? - count(neg)? >= *bound
            }
        })
    }

    /// Replaces the variables `known` resolves by constants and folds.
    pub fn substitute(&self, known: &impl Fn(Variable) -> Option<bool>) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::True,
            BoolExpr::False => BoolExpr::False,
            BoolExpr::Var(v) => match known(*v) {
                Some(true) => BoolExpr::True,
                Some(false) => BoolExpr::False,
                None => BoolExpr::Var(*v),
            },
            BoolExpr::Not(e) => BoolExpr::not(e.substitute(known)),
            BoolExpr::And(es) => BoolExpr::and(es.iter().map(|e| e.substitute(known)).collect()),
            BoolExpr::Or(es) => BoolExpr::or(es.iter().map(|e| e.substitute(known)).collect()),
            BoolExpr::Implies(a, b) => BoolExpr::implies(a.substitute(known), b.substitute(known)),
            BoolExpr::Iff(a, b) => match (a.substitute(known), b.substitute(known)) {
                (BoolExpr::True, e) | (e, BoolExpr::True) => e,
                (BoolExpr::False, e) | (e, BoolExpr::False) => BoolExpr::not(e),
                (a, b) => BoolExpr::iff(a, b),
            },
            BoolExpr::AtLeast { pos, neg, bound } => {
                let mut bound = *bound;
                let mut keep = |vs: &[Variable], sign: i64| -> Vec<Variable> {
                    vs.iter()
                        .copied()
                        .filter(|&v| match known(v) {
                            Some(true) => {
                                bound -= sign;
                                false
                            }
                            Some(false) => false,
                            None => true,
                        })
                        .collect()
                };
                let pos = keep(pos, 1);
                let neg = keep(neg, -1);
                BoolExpr::at_least(pos, neg, bound)
            }
        }
    }

    pub fn eval(&self, interp: &Interpretation) -> Result<bool> {
        self.eval_with(&|v| interp.get(v))
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, es: &[BoolExpr], op: &str| -> fmt::Result {
            write!(f, "(")?;
            for (k, e) in es.iter().enumerate() {
                if k > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, ")")
        };
        match self {
            BoolExpr::True => write!(f, "⊤"),
            BoolExpr::False => write!(f, "⊥"),
            BoolExpr::Var(v) => write!(f, "{v}"),
            BoolExpr::Not(e) => write!(f, "¬{e}"),
            BoolExpr::And(es) => join(f, es, "∧"),
            BoolExpr::Or(es) => join(f, es, "∨"),
            BoolExpr::Implies(a, b) => write!(f, "({a} → {b})"),
            BoolExpr::Iff(a, b) => write!(f, "({a} ↔ {b})"),
            BoolExpr::AtLeast { pos, neg, bound } => {
                write!(f, "[")?;
                for (k, v) in pos.iter().enumerate() {
                    write!(f, "{}{v}", if k > 0 { " + " } else { "" })?;
                }
                if pos.is_empty() {
                    write!(f, "0")?;
                }
                for v in neg {
                    write!(f, " - {v}")?;
                }
                write!(f, " ≥ {bound}]")
            }
        }
    }
}

/// A (possibly partial) valuation of model variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interpretation(HashMap<Variable, bool>);

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: Variable) -> Option<bool> {
        self.0.get(&v).copied()
    }

    pub fn set(&mut self, v: Variable, value: bool) {
        self.0.insert(v, value);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variable, bool)> + '_ {
        self.0.iter().map(|(&v, &b)| (v, b))
    }
}

impl FromIterator<(Variable, bool)> for Interpretation {
    fn from_iter<I: IntoIterator<Item = (Variable, bool)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
