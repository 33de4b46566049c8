//! Oracles and property checks shared by the integration tests and the
//! acceptance run.
//!
//! The `brute_*` and `subset_*` oracles never touch the solvers or the
//! causal-model builder. They simulate the network directly or enumerate
//! subsets literally.

#![allow(dead_code)]

use bsnn_core::axp::{
    audit_connectivity, background, compute_axp, explanandum_of, initial_term, AxpOptions, Explanandum, LiteralOrder,
    Term,
};
use bsnn_core::causal::{
    build_bcm, trace_interpretation, BoolExpr, CausalModel, Equation, Interpretation, Literal, ThresholdMechanism,
    Variable,
};
use bsnn_core::solver::cnf::encode_equations;
use bsnn_core::solver::sat::Embedded;
use bsnn_core::solver::{Backend, CnfEncoder, EntailmentSession, Gate, Lit, SatOutcome, SatSolver, SolverOptions};
use bsnn_core::snn::{simulate, InputSequence, Network, NeuronId, Thresholds, WeightScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network with at most the given layer sizes (each at least 1).
pub fn random_network(rng: &mut ChaCha8Rng, scale: WeightScale, inputs: usize, hidden: usize, outputs: usize) -> Network {
    let ni = rng.gen_range(1..=inputs);
    let nh = rng.gen_range(1..=hidden);
    let no = rng.gen_range(1..=outputs);
    let weight = |rng: &mut ChaCha8Rng| -> i8 {
        match scale {
            WeightScale::Binary => i8::from(rng.gen_bool(0.6)),
            WeightScale::Ternary => rng.gen_range(-1..=1),
        }
    };
    let hw = (0..nh).map(|_| (0..ni).map(|_| weight(rng)).collect()).collect();
    let ow = (0..no).map(|_| (0..nh).map(|_| weight(rng)).collect()).collect();
    let thresholds = Thresholds {
        hidden: (0..nh).map(|_| rng.gen_range(1..=3)).collect(),
        output: (0..no).map(|_| rng.gen_range(1..=2)).collect(),
    };
    Network::new(scale, hw, ow, thresholds).expect("generated networks are valid")
}

pub fn random_input(rng: &mut ChaCha8Rng, inputs: usize, t_end: usize) -> InputSequence {
    InputSequence::new(inputs, (0..t_end).map(|_| (0..inputs).map(|_| rng.gen_bool(0.5)).collect()).collect())
}

/// Every input sequence of the given shape.
pub fn all_inputs(inputs: usize, t_end: usize) -> impl Iterator<Item = InputSequence> {
    let bits = inputs * t_end;
    (0u64..1 << bits).map(move |m| {
        InputSequence::new(
            inputs,
            (0..t_end).map(|t| (0..inputs).map(|i| m >> (t * inputs + i) & 1 == 1).collect()).collect(),
        )
    })
}

/// Output firing pattern at `t`, read straight off the simulator.
pub fn output_pattern(net: &Network, input: &InputSequence, t: usize) -> Vec<bool> {
    let trace = simulate(net, input).unwrap();
    (0..net.output_count).map(|o| trace.firing(t, NeuronId::output(o))).collect()
}

pub fn pattern_of(e: &Explanandum, outputs: usize) -> Vec<bool> {
    (0..outputs).map(|o| e.positive.contains(&o)).collect()
}

/// Whether every input completion at time `t` that agrees with `lits`
/// (inputs at other times kept as in `actual`) reproduces `pattern`.
pub fn brute_entails(net: &Network, actual: &InputSequence, t: usize, lits: &[Literal], pattern: &[bool]) -> bool {
    let n = net.input_count;
    if t == 0 {
        return output_pattern(net, actual, 0) == pattern;
    }
    for m in 0u64..1 << n {
        let mut x = actual.clone();
        for i in 0..n {
            x.set(t, i, m >> i & 1 == 1);
        }
        let agrees = lits.iter().all(|l| {
            assert!(l.var.is_exogenous() && l.var.time == t, "oracle handles slice-t input terms only");
            x.fires(t, l.var.neuron.index) == l.positive
        });
        if agrees && output_pattern(net, &x, t) != pattern {
            return false;
        }
    }
    true
}

/// (i), (ii) and minimality over every proper subset.
pub fn brute_is_axp(net: &Network, actual: &InputSequence, t: usize, term: &Term, pattern: &[bool]) -> Result<(), String> {
    let lits = term.literals();
    for l in lits {
        if l.var.time != t || actual.fires(t, l.var.neuron.index) != l.positive {
            return Err(format!("{l} is not true in the instance"));
        }
    }
    if !brute_entails(net, actual, t, lits, pattern) {
        return Err("term does not entail the output pattern".into());
    }
    let k = lits.len();
    for mask in 0u64..(1 << k) - 1 {
        let sub: Vec<Literal> = (0..k).filter(|&j| mask >> j & 1 == 1).map(|j| lits[j]).collect();
        if brute_entails(net, actual, t, &sub, pattern) {
            return Err(format!("proper subset {mask:b} also entails"));
        }
    }
    Ok(())
}

pub fn input_var(i: usize, t: usize) -> Variable {
    Variable::new(NeuronId::input(i), t)
}

pub fn hidden_var(i: usize, t: usize) -> Variable {
    Variable::new(NeuronId::hidden(i), t)
}

/// One conjunct of a subset disjunction: the listed positive-weight inputs
/// fire and the listed negative-weight inputs stay silent.
#[derive(Clone, Copy, Debug)]
pub struct SubsetTerm {
    pub fire: u32,
    pub silent: u32,
}

/// Literal expansion of "carried + Σ excitatory − Σ inhibitory ≥ tau":
/// one conjunct per (Ω⁺ ⊆ R⁺, Ω⁻ ⊆ R⁻) with carried + |Ω⁺| − |Ω⁻| ≥ tau,
/// requiring Ω⁺ to fire and R⁻ \ Ω⁻ to stay silent. Excitatory inputs are
/// bits `0..pos`, inhibitory ones bits `pos..pos + neg`.
pub fn subset_disjunction(pos: usize, neg: usize, carried: i64, tau: i64) -> Vec<SubsetTerm> {
    let mut terms = Vec::new();
    let neg_all = ((1u32 << neg) - 1) << pos;
    for op in 0u32..1 << pos {
        for on in 0u32..1 << neg {
            if carried + i64::from(op.count_ones()) - i64::from(on.count_ones()) >= tau {
                terms.push(SubsetTerm { fire: op, silent: neg_all & !(on << pos) });
            }
        }
    }
    terms
}

pub fn eval_disjunction(terms: &[SubsetTerm], firing: u32) -> bool {
    terms.iter().any(|c| firing & c.fire == c.fire && firing & c.silent == 0)
}

/// `p_t ↔ ((¬p_{t-1} → carried form) ∧ (p_{t-1} → uncarried form))`,
/// evaluated on the subset expansions.
pub fn subset_equation(pos: usize, neg: usize, carried: i64, tau: i64) -> impl Fn(bool, u32) -> bool {
    let fresh = subset_disjunction(pos, neg, carried, tau);
    let reset = subset_disjunction(pos, neg, 0, tau);
    move |prev, firing| {
        if prev {
            eval_disjunction(&reset, firing)
        } else {
            eval_disjunction(&fresh, firing)
        }
    }
}

pub fn scale_for(k: usize) -> WeightScale {
    if k.is_multiple_of(2) {
        WeightScale::Binary
    } else {
        WeightScale::Ternary
    }
}

#[derive(Debug, Default)]
pub struct Tally {
    pub cases: usize,
    pub failures: Vec<String>,
}

impl Tally {
    pub fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        } else if self.failures.len() == 20 {
            self.failures.push("…".into());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Trace ⊨ equations, and no other interpretation with the same inputs
/// satisfies them: checked by enumerating the `t > 0` endogenous values
/// and separately by SAT with the trace blocked.
pub fn trace_is_unique_solution(archs: usize, seed: u64) -> Tally {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    for k in 0..archs {
        let net = random_network(&mut rng, scale_for(k), 4, 3, 2);
        let t_end = rng.gen_range(1..=2);
        for input in all_inputs(net.input_count, t_end) {
            tally.cases += 1;
            let trace = simulate(&net, &input).unwrap();
            let model = build_bcm(&net, &trace).unwrap();
            let actual = trace_interpretation(&trace);
            if !model.satisfied_by(&actual).unwrap() {
                tally.fail(format!("arch {k}: trace violates its own equations"));
                continue;
            }
            let endo: Vec<Variable> = model.endogenous.iter().copied().filter(|v| v.time > 0).collect();
            if endo.len() <= 10 {
                let mut interp = actual.clone();
                let mut satisfying = 0;
                for m in 0u32..1 << endo.len() {
                    for (j, &v) in endo.iter().enumerate() {
                        interp.set(v, m >> j & 1 == 1);
                    }
                    if model.satisfied_by(&interp).unwrap() {
                        satisfying += 1;
                        if endo.iter().any(|&v| interp.get(v) != actual.get(v)) {
                            tally.fail(format!("arch {k}: a non-trace interpretation satisfies the equations"));
                        }
                    }
                }
                if satisfying != 1 {
                    tally.fail(format!("arch {k}: {satisfying} satisfying interpretations"));
                }
            }
            if let Err(e) = sat_unique(&model, &actual) {
                tally.fail(format!("arch {k}: {e}"));
            }
        }
    }
    tally
}

fn sat_unique(model: &CausalModel, actual: &Interpretation) -> Result<(), String> {
    let f = encode_equations(model, &Interpretation::new(), None).finish();
    let mut s = Embedded::new();
    s.add_formula(&f);
    let lit = |v: Variable, b: bool| f.varmap.index(v).map(|i| if b { i as Lit } else { -(i as Lit) });
    let assumptions: Vec<Lit> = model.exogenous.iter().filter_map(|&v| lit(v, actual.get(v).unwrap())).collect();
    match s.solve(&assumptions).unwrap() {
        SatOutcome::Unsat => return Err("equations unsatisfiable for the trace's inputs".into()),
        SatOutcome::Sat(a) => {
            let got = f.project(&a);
            if model.endogenous.iter().any(|&v| got.get(v) != actual.get(v)) {
                return Err("SAT model differs from the trace".into());
            }
        }
    }
    let block: Vec<Lit> = model.endogenous.iter().filter_map(|&v| lit(v, !actual.get(v).unwrap())).collect();
    if block.is_empty() {
        return Ok(());
    }
    s.add_clause(&block);
    match s.solve(&assumptions).unwrap() {
        SatOutcome::Unsat => Ok(()),
        SatOutcome::Sat(_) => Err("a second model exists".into()),
    }
}

/// Stored threshold equations against the literal subset expansion, for
/// every split of fan-in `n ≤ max_fan_in` into excitatory and inhibitory
/// inputs and every threshold and carried potential in range.
pub fn threshold_vs_subsets(max_fan_in: usize) -> Tally {
    let mut tally = Tally::default();
    let prev = hidden_var(0, 0);
    for n in 0..=max_fan_in {
        for neg in 0..=n {
            let pos = n - neg;
            let excitatory: Vec<Variable> = (0..pos).map(|i| input_var(i, 1)).collect();
            let inhibitory: Vec<Variable> = (pos..n).map(|i| input_var(i, 1)).collect();
            for tau in 1..=pos as i64 + 1 {
                for carried in -(neg as i64) - 1..=tau {
                    let mech = ThresholdMechanism {
                        previous: prev,
                        excitatory: excitatory.clone(),
                        inhibitory: inhibitory.clone(),
                        threshold: tau,
                        carried_potential: carried,
                    };
                    let eq = Equation { target: hidden_var(0, 1), omega: mech.omega(), mechanism: Some(mech) };
                    let oracle = subset_equation(pos, neg, carried, tau);
                    let mut interp = Interpretation::new();
                    for p in [false, true] {
                        interp.set(prev, p);
                        for firing in 0u32..1 << n {
                            tally.cases += 1;
                            for i in 0..n {
                                interp.set(input_var(i, 1), firing >> i & 1 == 1);
                            }
                            if eq.omega.eval(&interp).unwrap() != oracle(p, firing) {
                                tally.fail(format!(
                                    "pos {pos} neg {neg} tau {tau} A {carried} prev {p} firing {firing:b}"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    tally
}

/// Satisfying input sets of the clausified "Σpos − Σneg ≥ c" against direct
/// counting, for both polarities of the gate.
pub fn cardinality_cnf(max_n: usize) -> Tally {
    let mut tally = Tally::default();
    for n in 1..=max_n {
        for neg in 0..=n {
            let pos = n - neg;
            for bound in -(neg as i64) - 1..=pos as i64 + 1 {
                let mut enc = CnfEncoder::new();
                let lits: Vec<Lit> = (0..n).map(|i| enc.var_lit(input_var(i, 1))).collect();
                let e = BoolExpr::AtLeast {
                    pos: (0..pos).map(|i| input_var(i, 1)).collect(),
                    neg: (pos..n).map(|i| input_var(i, 1)).collect(),
                    bound,
                };
                let gate = enc.gate(&e);
                let f = enc.finish();
                let mut s = Embedded::new();
                s.add_formula(&f);
                for m in 0u32..1 << n {
                    tally.cases += 1;
                    let count = (0..pos).filter(|&i| m >> i & 1 == 1).count() as i64
                        - (pos..n).filter(|&i| m >> i & 1 == 1).count() as i64;
                    let expected = count >= bound;
                    let mut a: Vec<Lit> = (0..n).map(|i| if m >> i & 1 == 1 { lits[i] } else { -lits[i] }).collect();
                    let ok = match gate {
                        Gate::Const(b) => b == expected && s.solve(&a).unwrap().is_sat(),
                        Gate::Lit(g) => {
                            a.push(g);
                            let when_true = s.solve(&a).unwrap().is_sat();
                            *a.last_mut().unwrap() = -g;
                            let when_false = s.solve(&a).unwrap().is_sat();
                            when_true == expected && when_false == !expected
                        }
                    };
                    if !ok {
                        tally.fail(format!("pos {pos} neg {neg} bound {bound} inputs {m:b}"));
                    }
                }
            }
        }
    }
    tally
}

/// Random micro instances explained and checked against `brute_is_axp`.
/// Returns the tally and the number of explanations whose connectivity
/// audit was non-empty.
pub fn micro_axps(nets: usize, seed: u64, backend: Backend) -> (Tally, usize) {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    let mut audit_failures = 0;
    for k in 0..nets {
        let net = random_network(&mut rng, scale_for(k), 6, 3, 2);
        let t_end = rng.gen_range(1..=2);
        let input = random_input(&mut rng, net.input_count, t_end);
        let t = rng.gen_range(0..=t_end);
        let order = if k % 3 == 0 { LiteralOrder::Raster } else { LiteralOrder::Seeded(k as u64) };
        tally.cases += 1;
        let expl = match compute_axp(&net, &input, t, &AxpOptions::new(backend, order)) {
            Ok(e) => e,
            Err(e) => {
                tally.fail(format!("net {k}: {e}"));
                continue;
            }
        };
        let pattern = output_pattern(&net, &input, t);
        if pattern_of(&expl.explanandum, net.output_count) != pattern {
            tally.fail(format!("net {k}: explanandum differs from the simulated outputs"));
        }
        if let Err(e) = brute_is_axp(&net, &input, t, &expl.term, &pattern) {
            tally.fail(format!("net {k} t {t}: {e}"));
        }
        if !expl.certificates.all() {
            tally.fail(format!("net {k}: certificates {:?}", expl.certificates));
        }
        if !audit_connectivity(&expl.term, &net).is_empty() {
            audit_failures += 1;
        }
    }
    (tally, audit_failures)
}

/// Random sub-terms of the initial term, asked of both backends and of
/// the brute-force oracle.
pub fn backend_queries(queries: usize, seed: u64, smt: &SolverOptions) -> Tally {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    let mut k = 0;
    while tally.cases < queries {
        let net = random_network(&mut rng, scale_for(k), 6, 3, 2);
        k += 1;
        let t_end = rng.gen_range(1..=2);
        let input = random_input(&mut rng, net.input_count, t_end);
        let t = rng.gen_range(1..=t_end);
        let trace = simulate(&net, &input).unwrap();
        let model = build_bcm(&net, &trace).unwrap();
        let explanandum = explanandum_of(&trace, t).unwrap();
        let background = background(&input, t);
        let conclusion = explanandum.to_expr();
        let mut cnf = EntailmentSession::new(&model, &conclusion, &background, Backend::Cnf, smt).unwrap();
        let mut lia = match EntailmentSession::new(&model, &conclusion, &background, Backend::Smt, smt) {
            Ok(s) => s,
            Err(e) => {
                tally.fail(format!("cannot start the SMT solver: {e}"));
                return tally;
            }
        };
        let init = initial_term(&input, t).unwrap();
        let pattern = pattern_of(&explanandum, net.output_count);
        for _ in 0..10 {
            let sub: Vec<Literal> = init.literals().iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            tally.cases += 1;
            let a = cnf.entails(&sub).unwrap();
            let b = match lia.entails(&sub) {
                Ok(b) => b,
                Err(e) => {
                    tally.fail(format!("SMT query failed: {e}"));
                    return tally;
                }
            };
            let oracle = brute_entails(&net, &input, t, &sub, &pattern);
            if a != b || a != oracle {
                tally.fail(format!("net {k}: cnf {a}, smt {b}, oracle {oracle}"));
            }
        }
    }
    tally
}

/// Whether the SMT command can be started at all.
pub fn smt_available() -> bool {
    let cmd = bsnn_core::solver::smt::solver_command();
    let prog = cmd.split_whitespace().next().unwrap_or("");
    std::process::Command::new(prog)
        .arg("-version")
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .is_ok()
}
