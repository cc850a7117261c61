//! Property tests for consistent-model learning: quotient well-formedness,
//! the size bounds of the two partition constructions, minimality at desk
//! scale, and witness-file round trips.

mod common;

use std::collections::BTreeMap;

use rand::prelude::*;

use lpts::generate::{self, GenConfig};
use lpts::learning::{
    self, Backend, Partition, StochasticPartition,
};
use lpts::model::{Distribution, StateId, Transition};
use lpts::samples::SampleSet;
use lpts::simulation::simulates;
use lpts::text::parse_lpts;
use lpts::Lpts;

/// Unrolls `l` into a stochastic tree of bounded depth: each node carries a
/// model state and copies a random subset of its transitions with fresh
/// children. Simulated by `l` by construction.
fn unroll(rng: &mut impl Rng, l: &Lpts, max_depth: usize) -> Lpts {
    let mut states = vec!["t0".to_string()];
    let mut model_of = vec![l.start()];
    let mut transitions = Vec::new();
    let mut frontier = vec![(StateId(0), 0usize)];
    while let Some((node, depth)) = frontier.pop() {
        if depth >= max_depth {
            continue;
        }
        for tr in l.transitions_from(model_of[node.0]) {
            if rng.gen_bool(0.3) {
                continue;
            }
            let mut entries = BTreeMap::new();
            for (target, p) in tr.target.iter() {
                let child = StateId(states.len());
                states.push(format!("t{}", child.0));
                model_of.push(target);
                entries.insert(child, p.clone());
                frontier.push((child, depth + 1));
            }
            transitions.push(Transition {
                source: node,
                action: tr.action.clone(),
                target: Distribution::new(entries).unwrap(),
            });
        }
    }
    Lpts::new(
        "unrolled",
        states,
        StateId(0),
        l.alphabet().clone(),
        transitions,
    )
    .unwrap()
}

fn random_partition(rng: &mut impl Rng, samples: &SampleSet, k: usize) -> Partition {
    loop {
        let root_class = 0;
        let class_of: Vec<usize> = (0..samples.n_pos_states())
            .map(|g| {
                if samples.is_root(g) {
                    root_class
                } else {
                    rng.gen_range(0..k)
                }
            })
            .collect();
        if let Ok(p) = Partition::new(samples, class_of) {
            return p;
        }
    }
}

#[test]
fn quotients_are_well_formed_and_simulate_positives() {
    let cfg = GenConfig {
        max_states: 4,
        ..GenConfig::default()
    };
    let mut rng = generate::rng_from_seed(101);
    for _ in 0..120 {
        let model = generate::random_lpts(&mut rng, &cfg);
        let trees: Vec<Lpts> = (0..rng.gen_range(1..=2))
            .map(|_| unroll(&mut rng, &model, 2))
            .collect();
        let samples = SampleSet::new(trees, vec![]).unwrap();
        let k = rng.gen_range(1..=3);
        let p = random_partition(&mut rng, &samples, k);
        // Distribution construction inside the quotient already asserts
        // each lifted row sums to one; simulation of every positive is the
        // substantive claim.
        let q = learning::quotient(&samples, &p);
        for pos in samples.positives() {
            assert!(simulates(pos, &q).holds, "positive not below its quotient");
        }
    }
}

#[test]
fn stochastic_quotients_simulate_positives() {
    let cfg = GenConfig {
        max_states: 3,
        ..GenConfig::default()
    };
    let mut rng = generate::rng_from_seed(103);
    for _ in 0..80 {
        let model = generate::random_lpts(&mut rng, &cfg);
        let trees: Vec<Lpts> = (0..rng.gen_range(1..=2))
            .map(|_| unroll(&mut rng, &model, 2))
            .collect();
        let samples = SampleSet::new(trees, vec![]).unwrap();
        let p = random_partition(&mut rng, &samples, 2);
        let sp = StochasticPartition::from_partition(&samples, &p);
        let q = learning::stochastic_quotient(&samples, &sp).unwrap();
        for pos in samples.positives() {
            assert!(simulates(pos, &q).holds);
        }
    }
}

#[test]
fn simulation_image_construction_respects_exponential_bound() {
    let cfg = GenConfig {
        max_states: 4,
        ..GenConfig::default()
    };
    let mut rng = generate::rng_from_seed(107);
    for _ in 0..60 {
        let model = generate::random_lpts(&mut rng, &cfg);
        let trees: Vec<Lpts> = (0..2).map(|_| unroll(&mut rng, &model, 2)).collect();
        let samples = SampleSet::new(trees, vec![]).unwrap();
        let p = learning::partition_from_simulation(&samples, &model).unwrap();
        assert!(p.n_classes() <= 1 << model.n_states());
        let q = learning::quotient(&samples, &p);
        assert!(learning::is_consistent(&samples, &q));
    }
}

#[test]
fn simulation_image_construction_linear_for_dirac_models() {
    // when every distribution is Dirac the image construction needs no
    // more classes than the model has states
    let cfg = GenConfig {
        max_states: 4,
        max_support: 1,
        ..GenConfig::default()
    };
    let mut rng = generate::rng_from_seed(109);
    for _ in 0..60 {
        let model = generate::random_lpts(&mut rng, &cfg);
        let trees: Vec<Lpts> = (0..2).map(|_| unroll(&mut rng, &model, 2)).collect();
        let samples = SampleSet::new(trees, vec![]).unwrap();
        let p = learning::partition_from_simulation(&samples, &model).unwrap();
        assert!(
            p.n_classes() <= model.n_states(),
            "{} classes for {} states",
            p.n_classes(),
            model.n_states()
        );
    }
}

#[test]
fn redistribution_construction_respects_linear_bound() {
    let cfg = GenConfig {
        max_states: 4,
        ..GenConfig::default()
    };
    let mut rng = generate::rng_from_seed(113);
    for _ in 0..60 {
        let model = generate::random_lpts(&mut rng, &cfg);
        let trees: Vec<Lpts> = (0..2).map(|_| unroll(&mut rng, &model, 2)).collect();
        let samples = SampleSet::new(trees, vec![]).unwrap();
        let sp = learning::stochastic_partition_from_simulation(&samples, &model).unwrap();
        assert!(sp.n_nonempty_groups() <= model.n_states());
        let q = learning::stochastic_quotient(&samples, &sp).unwrap();
        for pos in samples.positives() {
            assert!(simulates(pos, &q).holds);
        }
    }
}

#[test]
fn enumeration_finds_known_minimum() {
    let pos = parse_lpts(
        "lpts p\nalphabet a b\nstates z x y w\nstart z\n\
         trans z a { x: 1/2, y: 1/2 }\ntrans x b { w: 1 }\n",
    )
    .unwrap();
    let neg = parse_lpts("lpts n\nalphabet b\nstates n0 n1\nstart n0\ntrans n0 b { n1: 1 }\n")
        .unwrap();
    let samples = SampleSet::new(vec![pos], vec![neg]).unwrap();
    let r = learning::learn_min_partition(&samples, &Backend::Enumerate, 4).unwrap();
    assert_eq!(r.size, 2);
    assert!(learning::is_consistent(&samples, &r.quotient));
    // k = 1 must genuinely be infeasible
    assert!(r.search_trace.iter().any(|t| t.k == 1 && !t.sat));
}

#[test]
fn inconsistent_sample_sets_are_rejected() {
    let pos = parse_lpts("lpts p\nalphabet a\nstates p0 p1\nstart p0\ntrans p0 a { p1: 1 }\n")
        .unwrap();
    let neg = pos.rename_states(|s| s.replace('p', "n"));
    let samples = SampleSet::new(vec![pos], vec![neg]).unwrap();
    assert!(matches!(
        learning::learn_min_partition(&samples, &Backend::Enumerate, 4),
        Err(learning::LearnError::Inconsistent)
    ));
}

#[test]
fn witness_files_round_trip() {
    let pos = parse_lpts(
        "lpts p\nalphabet a b\nstates z x y w\nstart z\n\
         trans z a { x: 1/2, y: 1/2 }\ntrans x b { w: 1 }\n",
    )
    .unwrap();
    let neg = parse_lpts("lpts n\nalphabet b\nstates n0 n1\nstart n0\ntrans n0 b { n1: 1 }\n")
        .unwrap();
    let samples = SampleSet::new(vec![pos], vec![neg]).unwrap();

    let r = learning::learn_min_partition(&samples, &Backend::Enumerate, 4).unwrap();
    let lpts::learning::Witness::Partition(p) = &r.witness else {
        panic!("classical witness expected");
    };
    let text = learning::serialize_partition(&samples, p);
    let back = learning::parse_partition(&text, &samples).unwrap();
    assert_eq!(learning::serialize_partition(&samples, &back), text);

    let sp = StochasticPartition::from_partition(&samples, p);
    let stext = learning::serialize_stochastic(&samples, &sp);
    let sback = learning::parse_stochastic(&stext, &samples).unwrap();
    assert_eq!(learning::serialize_stochastic(&samples, &sback), stext);
}
