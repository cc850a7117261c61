//! Shared helpers for the integration suites: fixture loading, random
//! instance construction, and slow-but-obviously-correct oracles that the
//! fast implementations are checked against.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::prelude::*;

use lpts::generate::{self, GenConfig};
use lpts::model::{Distribution, StateId};
use lpts::text::parse_lpts;
use lpts::{Lpts, Rational, Relation};

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn fixture(name: &str) -> Lpts {
    let path = fixture_path(&format!("models/{name}.lpts"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_lpts(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn all_model_fixtures() -> Vec<Lpts> {
    let dir = fixture_path("models");
    let mut names: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "lpts"))
        .collect();
    names.sort();
    names
        .iter()
        .map(|p| parse_lpts(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect()
}

/// The subset formulation of distribution comparison: mu1 related to mu2
/// under R iff mu1(S) <= mu2(R(S)) for every subset S of mu1's support.
/// Exponential, but independent of the maxflow path.
pub fn subset_oracle(mu1: &Distribution, mu2: &Distribution, r: &Relation) -> bool {
    let support: Vec<StateId> = mu1.support().collect();
    for mask in 0u32..(1 << support.len()) {
        let s: Vec<StateId> = support
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, st)| *st)
            .collect();
        let image = r.image_of_set(s.iter().copied());
        if mu1.mass(s) > mu2.mass(image) {
            return false;
        }
    }
    true
}

/// Is `rel` a simulation between `l1` and `l2`? Decided entirely through
/// the subset oracle, not the maxflow check.
pub fn is_simulation_oracle(l1: &Lpts, l2: &Lpts, rel: &Relation) -> bool {
    rel.pairs().all(|(s1, s2)| {
        l1.transitions_from(s1).all(|t| {
            l2.transitions_on(s2, &t.action)
                .any(|t2| subset_oracle(&t.target, &t2.target, rel))
        })
    })
}

/// The coarsest simulation as the union of all simulations, found by
/// shrinking the full relation to its greatest fixed point with the subset
/// oracle. Independent of the engine's scan/removal strategy.
pub fn coarsest_oracle(l1: &Lpts, l2: &Lpts) -> Relation {
    let mut pairs: BTreeSet<(StateId, StateId)> = l1
        .state_ids()
        .flat_map(|s1| l2.state_ids().map(move |s2| (s1, s2)))
        .collect();
    loop {
        let rel = Relation::new(pairs.clone());
        let bad: Vec<_> = pairs
            .iter()
            .copied()
            .filter(|(s1, s2)| {
                !l1.transitions_from(*s1).all(|t| {
                    l2.transitions_on(*s2, &t.action)
                        .any(|t2| subset_oracle(&t.target, &t2.target, &rel))
                })
            })
            .collect();
        if bad.is_empty() {
            return rel;
        }
        for p in bad {
            pairs.remove(&p);
        }
    }
}

/// A random relation between two state ranges, each pair included with
/// probability `density`.
pub fn random_relation(
    rng: &mut impl Rng,
    n_left: usize,
    n_right: usize,
    density: f64,
) -> Relation {
    let pairs = (0..n_left)
        .flat_map(|i| (0..n_right).map(move |j| (StateId(i), StateId(j))))
        .filter(|_| rng.gen_bool(density))
        .collect();
    Relation::new(pairs)
}

pub fn random_dist(rng: &mut impl Rng, n_states: usize, max_support: usize) -> Distribution {
    let ids: Vec<StateId> = (0..n_states).map(StateId).collect();
    let cfg = GenConfig {
        max_states: n_states,
        max_support,
        ..GenConfig::default()
    };
    generate::random_distribution(rng, &ids, &cfg)
}

pub fn rat(n: i64, d: i64) -> Rational {
    lpts::rational::rat(n, d)
}
