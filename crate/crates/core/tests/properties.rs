//! Smaller runs of the acceptance properties, for everyday `cargo test`.

mod common;

use bsnn_core::solver::{Backend, SolverOptions};

fn assert_clean(name: &str, t: &common::Tally) {
    assert!(t.cases > 0, "{name}: no cases");
    assert!(t.ok(), "{name}: {} of {} cases failed: {:#?}", t.failures.len(), t.cases, t.failures);
}

#[test]
fn simulator_traces_are_the_unique_models() {
    assert_clean("trace uniqueness", &common::trace_is_unique_solution(30, 11));
}

#[test]
fn threshold_equations_match_subset_form() {
    assert_clean("subset form", &common::threshold_vs_subsets(7));
}

#[test]
fn cardinality_cnf_matches_counting() {
    assert_clean("cardinality", &common::cardinality_cnf(6));
}

#[test]
fn micro_axps_are_prime_implicants() {
    let (t, audit) = common::micro_axps(40, 5, Backend::Cnf);
    assert_clean("micro axp", &t);
    assert_eq!(audit, 0);
}

#[test]
fn smt_backend_agrees_with_cnf() {
    if !common::smt_available() {
        eprintln!("skipping: SMT solver not available");
        return;
    }
    assert_clean("backend agreement", &common::backend_queries(100, 3, &SolverOptions::default()));
    let (t, _) = common::micro_axps(10, 8, Backend::Smt);
    assert_clean("micro axp over smt", &t);
}
