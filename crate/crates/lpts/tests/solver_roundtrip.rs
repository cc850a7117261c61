//! End-to-end solver tests: trivial scripts, the partition and stochastic
//! encodings on small sample sets, and agreement with the enumeration
//! backend.

use lpts::learning::{self, Backend, Witness};
use lpts::samples::SampleSet;
use lpts::simulation::simulates;
use lpts::smt::{self, ConstraintScript, SolverConfig, Status};
use lpts::text::parse_lpts;
use lpts::Lpts;

fn solver() -> SolverConfig {
    SolverConfig::resolve().expect("a solver must be available for these tests")
}

fn tree(text: &str) -> Lpts {
    parse_lpts(text).unwrap()
}

fn branching() -> Lpts {
    tree(
        "lpts p\nalphabet a b\nstates z x y w\nstart z\n\
         trans z a { x: 1/2, y: 1/2 }\ntrans x b { w: 1 }\n",
    )
}

fn b_root() -> Lpts {
    tree("lpts n\nalphabet b\nstates n0 n1\nstart n0\ntrans n0 b { n1: 1 }\n")
}

fn raw(text: &str) -> ConstraintScript {
    ConstraintScript {
        text: text.to_string(),
        symbol_table: Default::default(),
    }
}

#[test]
fn trivial_sat_and_unsat() {
    let cfg = solver();
    let v = smt::solve(&raw("(assert (= (+ (/ 1 2) (/ 1 2)) 1))\n(check-sat)\n"), &cfg).unwrap();
    assert_eq!(v.status, Status::Sat);
    let v = smt::solve(
        &raw("(declare-const x Real)\n(assert (> x x))\n(check-sat)\n"),
        &cfg,
    )
    .unwrap();
    assert_eq!(v.status, Status::Unsat);
}

#[test]
fn partition_encoding_k1_unsat_k2_sat() {
    let cfg = solver();
    let s = SampleSet::new(vec![branching()], vec![b_root()]).unwrap();

    let v = smt::solve(&smt::encode_partition(&s, 1), &cfg).unwrap();
    assert_eq!(v.status, Status::Unsat);

    let v = smt::solve(&smt::encode_partition(&s, 2), &cfg).unwrap();
    assert_eq!(v.status, Status::Sat);
    let p = smt::decode_partition(&v, &s, 2).unwrap();
    let q = learning::quotient(&s, &p);
    assert!(learning::is_consistent(&s, &q));
}

#[test]
fn backends_agree_on_minimal_k() {
    let cfg = solver();
    let s = SampleSet::new(vec![branching()], vec![b_root()]).unwrap();
    let by_enum = learning::learn_min_partition(&s, &Backend::Enumerate, 4).unwrap();
    let by_solver = learning::learn_min_partition(&s, &Backend::Solver(cfg), 4).unwrap();
    assert_eq!(by_enum.size, 2);
    assert_eq!(by_enum.size, by_solver.size);
}

#[test]
fn stochastic_encoding_no_negatives_is_one_group() {
    let cfg = solver();
    let s = SampleSet::new(vec![branching()], vec![]).unwrap();
    let r = learning::learn_min_stochastic(&s, &cfg, 3).unwrap();
    assert_eq!(r.size, 1);
    let Witness::Stochastic(sp) = &r.witness else {
        panic!("stochastic witness expected");
    };
    let q = learning::stochastic_quotient(&s, sp).unwrap();
    assert!(s.positives().iter().all(|p| simulates(p, &q).holds));
}

#[test]
fn stochastic_minimum_never_exceeds_classical() {
    let cfg = solver();
    let s = SampleSet::new(vec![branching()], vec![b_root()]).unwrap();
    let classical = learning::learn_min_partition(&s, &Backend::Enumerate, 4).unwrap();
    let stochastic = learning::learn_min_stochastic(&s, &cfg, 4).unwrap();
    assert!(stochastic.size <= classical.size);
    assert!(learning::is_consistent(&s, &stochastic.quotient));
}
