//! Desk-scale acceptance run. One PASS/FAIL line per criterion; exits
//! non-zero if any criterion fails. Criteria 4 to 8 need MNIST (see
//! `MnistDir::locate`) and, for the SMT half of 4, a z3-compatible solver.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bsnn_core::axp::{audit_connectivity, compute_axp, AxpOptions, LiteralOrder};
use bsnn_core::mnist::{Dataset, MnistDir};
use bsnn_core::shap::{default_delta, exact_shapley, relevance_audit, sampled_shapley, NetworkValue};
use bsnn_core::snn::{classify, simulate, InputSequence, Network, SpikeEncoding};
use bsnn_core::solver::{Backend, SolverOptions};
use bsnn_core::train::{evaluate, train, EncodingKind, TrainConfig};
use common::Tally;

const DIGITS: [u8; 3] = [1, 5, 9];
const ACCURACY_FLOOR: f64 = 0.85;
const TRAIN_BUDGET: Duration = Duration::from_secs(15 * 60);
const UNIQUENESS_BUDGET: Duration = Duration::from_secs(2 * 60);
const MICRO_AXP_BUDGET: Duration = Duration::from_secs(5 * 60);
const EXPLAIN_BUDGET: Duration = Duration::from_secs(10 * 60);
const LENGTH_BAND: (f64, f64) = (107.0, 428.0);
const MNIST_RUN: usize = 100;
const LENGTH_INSTANCES: usize = 20;
const AGREEMENT_INSTANCES: usize = 50;
const AGREEMENT_QUERIES: usize = 1000;
const SHAP_INSTANCES: usize = 5;
const SHAP_SEEDS: u64 = 3;

struct Outcome {
    results: Vec<bool>,
}

impl Outcome {
    fn report(&mut self, n: usize, pass: bool, detail: String) {
        println!("{} criterion {n}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push(pass);
    }
}

fn tally_detail(t: &Tally) -> String {
    if t.ok() {
        format!("{} cases, 0 failures", t.cases)
    } else {
        format!("{} cases, {} failures, first: {}", t.cases, t.failures.len(), t.failures[0])
    }
}

struct Mnist {
    test: Dataset,
    thresholded: Option<(Network, SpikeEncoding)>,
}

fn train_one(kind: EncodingKind, hidden: usize, t_end: usize, train_set: &Dataset, val: &Dataset, test: &Dataset) -> Result<(Network, SpikeEncoding, f64, Duration), String> {
    let cfg = TrainConfig::preset(kind, hidden, t_end);
    let start = Instant::now();
    let out = train(&cfg, train_set, val).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let enc = cfg.spike_encoding();
    let acc = evaluate(&out.network, test, &enc, 7).map_err(|e| e.to_string())?;
    Ok((out.network, enc, acc, elapsed))
}

fn criterion6(out: &mut Outcome) -> Option<Mnist> {
    let Some(dir) = MnistDir::locate() else {
        out.report(6, false, "MNIST not found; run scripts/fetch-mnist.sh or set BSNN_MNIST_DIR".into());
        return None;
    };
    let loaded = dir.train().and_then(|tr| Ok((tr, dir.test()?)));
    let (train_all, test) = match loaded {
        Ok(p) => p,
        Err(e) => {
            out.report(6, false, format!("cannot load MNIST: {e}"));
            return None;
        }
    };
    let (train_set, val) = train_all.filter_digits(&DIGITS).split_tail(0.1);
    let test = test.filter_digits(&DIGITS);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut thresholded = None;
    for (kind, hidden, t_end, name) in [(EncodingKind::Thresholded, 16, 1, "k=16 thresholded t_end=1"), (EncodingKind::Poisson, 8, 8, "k=8 Poisson t_end=8")] {
        match train_one(kind, hidden, t_end, &train_set, &val, &test) {
            Ok((net, enc, acc, elapsed)) => {
                pass &= acc >= ACCURACY_FLOOR && elapsed <= TRAIN_BUDGET;
                parts.push(format!("{name} test accuracy {:.2}% in {:.0}s", acc * 100.0, elapsed.as_secs_f64()));
                if kind == EncodingKind::Thresholded {
                    thresholded = Some((net, enc));
                }
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name} failed: {e}"));
            }
        }
    }
    out.report(6, pass, format!("{} (floor {:.0}%, budget {}s each)", parts.join("; "), ACCURACY_FLOOR * 100.0, TRAIN_BUDGET.as_secs()));
    Some(Mnist { test, thresholded })
}

fn encode_all(enc: &SpikeEncoding, test: &Dataset, n: usize) -> Vec<InputSequence> {
    (0..n.min(test.len())).map(|k| enc.encode(&test.images[k], 0, k as u64).unwrap()).collect()
}

fn main() -> ExitCode {
    let mut out = Outcome { results: Vec::new() };
    let mut audit_nonempty = 0;
    let mut audited = 0;

    let start = Instant::now();
    let t = common::trace_is_unique_solution(400, 1);
    let elapsed = start.elapsed();
    out.report(1, t.ok() && elapsed < UNIQUENESS_BUDGET, format!("400 architectures, {} in {:.1}s", tally_detail(&t), elapsed.as_secs_f64()));

    let a = common::threshold_vs_subsets(10);
    let b = common::cardinality_cnf(10);
    out.report(2, a.ok() && b.ok(), format!("subset form: {}; cardinality CNF: {}", tally_detail(&a), tally_detail(&b)));

    let start = Instant::now();
    let (t, bad) = common::micro_axps(150, 3, Backend::Cnf);
    let elapsed = start.elapsed();
    audit_nonempty += bad;
    audited += t.cases;
    out.report(3, t.ok() && elapsed < MICRO_AXP_BUDGET, format!("150 micro networks, {} in {:.2}s", tally_detail(&t), elapsed.as_secs_f64()));

    let mut zero = Tally::default();
    for (k, backend) in [(0, Backend::Cnf), (1, Backend::Smt)] {
        if backend == Backend::Smt && !common::smt_available() {
            continue;
        }
        let mut rng = common::rng(90 + k);
        for j in 0..40 {
            let net = common::random_network(&mut rng, common::scale_for(j), 6, 3, 2);
            let input = common::random_input(&mut rng, net.input_count, 2);
            zero.cases += 1;
            match compute_axp(&net, &input, 0, &AxpOptions::new(backend, LiteralOrder::Seeded(j as u64))) {
                Ok(e) if e.term.is_empty() && e.certificates.all() => {}
                Ok(e) => zero.fail(format!("{backend:?} net {j}: {} literals, certificates {:?}", e.term.len(), e.certificates)),
                Err(e) => zero.fail(format!("{backend:?} net {j}: {e}")),
            }
        }
    }

    let mnist = criterion6(&mut out);
    let model = mnist.as_ref().and_then(|m| m.thresholded.as_ref().map(|(n, e)| (n, e, &m.test)));

    // 7 and the MNIST half of 5 share one CNF run
    let mut cnf_terms = Vec::new();
    match model {
        Some((net, enc, test)) => {
            let inputs = encode_all(enc, test, MNIST_RUN);
            for (k, input) in inputs.iter().enumerate() {
                zero.cases += 1;
                match compute_axp(net, input, 0, &AxpOptions::new(Backend::Cnf, LiteralOrder::Raster)) {
                    Ok(e) if e.term.is_empty() && e.certificates.all() => {}
                    Ok(e) => zero.fail(format!("MNIST {k}: {} literals at t=0", e.term.len())),
                    Err(e) => zero.fail(format!("MNIST {k}: {e}")),
                }
            }
            let mut lengths = Vec::new();
            let mut slowest = Duration::ZERO;
            let mut errors = Vec::new();
            for (k, input) in inputs.iter().enumerate() {
                let start = Instant::now();
                match compute_axp(net, input, 1, &AxpOptions::new(Backend::Cnf, LiteralOrder::Seeded(k as u64))) {
                    Ok(e) => {
                        slowest = slowest.max(start.elapsed());
                        lengths.push(e.term.len());
                        audited += 1;
                        if !audit_connectivity(&e.term, net).is_empty() || !e.certificates.all() {
                            audit_nonempty += 1;
                        }
                        cnf_terms.push(e.term);
                    }
                    Err(e) => errors.push(format!("{k}: {e}")),
                }
            }
            let head = &lengths[..LENGTH_INSTANCES.min(lengths.len())];
            let mean = head.iter().sum::<usize>() as f64 / head.len().max(1) as f64;
            let all_mean = lengths.iter().sum::<usize>() as f64 / lengths.len().max(1) as f64;
            let pass = errors.is_empty() && head.len() == LENGTH_INSTANCES && mean >= LENGTH_BAND.0 && mean <= LENGTH_BAND.1 && slowest <= EXPLAIN_BUDGET;
            out.report(
                7,
                pass,
                format!(
                    "mean length {mean:.1} over the first {} instances (band [{}, {}]; {all_mean:.1} over {}), slowest explanation {:.2}s, {} errors",
                    head.len(),
                    LENGTH_BAND.0,
                    LENGTH_BAND.1,
                    lengths.len(),
                    slowest.as_secs_f64(),
                    errors.len()
                ),
            );
        }
        None => out.report(7, false, "no trained k=16 thresholded network".into()),
    }

    if common::smt_available() {
        let q = common::backend_queries(AGREEMENT_QUERIES, 17, &SolverOptions::default());
        let (micro, bad) = common::micro_axps(30, 23, Backend::Smt);
        audit_nonempty += bad;
        audited += micro.cases;
        let mut same = Tally::default();
        if let Some((net, enc, test)) = model {
            let inputs = encode_all(enc, test, AGREEMENT_INSTANCES);
            for (k, input) in inputs.iter().enumerate() {
                same.cases += 1;
                match compute_axp(net, input, 1, &AxpOptions::new(Backend::Smt, LiteralOrder::Seeded(k as u64))) {
                    Ok(e) => {
                        audited += 1;
                        if !audit_connectivity(&e.term, net).is_empty() {
                            audit_nonempty += 1;
                        }
                        if cnf_terms.get(k) != Some(&e.term) {
                            same.fail(format!("instance {k}: SMT term of {} literals differs from CNF", e.term.len()));
                        }
                    }
                    Err(e) => same.fail(format!("instance {k}: {e}")),
                }
            }
        } else {
            same.fail("no trained network for the MNIST-scale comparison".into());
        }
        let pass = q.ok() && micro.ok() && same.ok() && same.cases >= AGREEMENT_INSTANCES;
        out.report(4, pass, format!("queries: {}; micro SMT AXps: {}; MNIST AXps: {}", tally_detail(&q), tally_detail(&micro), tally_detail(&same)));
    } else {
        out.report(4, false, "SMT solver not available (set BSNN_SMT_SOLVER)".into());
    }

    let mnist_ok = model.is_some() && cnf_terms.len() == MNIST_RUN.min(mnist.as_ref().map_or(0, |m| m.test.len()));
    out.report(
        5,
        audit_nonempty == 0 && mnist_ok,
        format!("{audit_nonempty} of {audited} explanations with a non-empty connectivity audit or failed certificate{}", if mnist_ok { "" } else { "; MNIST run missing" }),
    );

    criterion8(&mut out, model);

    out.report(9, zero.ok(), format!("t=0 explanations: {}", tally_detail(&zero)));

    if out.results.iter().all(|&r| r) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn criterion8(out: &mut Outcome, model: Option<(&Network, &SpikeEncoding, &Dataset)>) {
    let mut null = Tally::default();
    let mut rng = common::rng(44);
    let mut disconnected = 0;
    for k in 0..60 {
        let net = common::random_network(&mut rng, common::scale_for(k), 12, 3, 2);
        let input = common::random_input(&mut rng, net.input_count, 2);
        let class = classify(&simulate(&net, &input).unwrap());
        let v = NetworkValue::new(&net, &input, class).unwrap();
        null.cases += 1;
        match exact_shapley(&v) {
            Ok(phi) => {
                for (i, &c) in net.connected_inputs().iter().enumerate() {
                    if !c {
                        disconnected += 1;
                        if phi[i] != 0.0 {
                            null.fail(format!("net {k}: disconnected feature {i} scored {}", phi[i]));
                        }
                    }
                }
            }
            Err(e) => null.fail(format!("net {k}: {e}")),
        }
    }
    let Some((net, enc, test)) = model else {
        out.report(8, false, "no trained k=16 thresholded network".into());
        return;
    };
    let mut pct = [Vec::new(), Vec::new()];
    let mut errors = Vec::new();
    let mut k = 0;
    let mut used = 0;
    while used < SHAP_INSTANCES && k < test.len() {
        let input = enc.encode(&test.images[k], 0, k as u64).unwrap();
        let trace = simulate(net, &input).unwrap();
        let class = classify(&trace);
        k += 1;
        // a silent target output leaves nothing to attribute
        if trace.output_counts()[class] == 0 {
            continue;
        }
        used += 1;
        let v = NetworkValue::new(net, &input, class).unwrap();
        for (slot, size) in [10_000usize, 100_000].into_iter().enumerate() {
            for seed in 0..SHAP_SEEDS {
                match sampled_shapley(&v, size, seed).and_then(|a| relevance_audit(&a, default_delta(&a.scores), net)) {
                    Ok(r) => pct[slot].push(r.wrongly_relevant_pct),
                    Err(e) => errors.push(e.to_string()),
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let (small, large) = (mean(&pct[0]), mean(&pct[1]));
    let pass = null.ok() && disconnected > 0 && errors.is_empty() && used == SHAP_INSTANCES && small > 0.0 && large < small;
    out.report(
        8,
        pass,
        format!(
            "wrongly relevant {small:.2}% at 10^4 vs {large:.2}% at 10^5 ({used} instances x {SHAP_SEEDS} seeds, {} errors); exact Shapley on {} nets: {} disconnected features, {}",
            errors.len(),
            null.cases,
            disconnected,
            if null.ok() { "all exactly 0".to_string() } else { tally_detail(&null) }
        ),
    );
}
