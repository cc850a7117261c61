//! Seeded random model generators for tests and experiments. All
//! generators take an explicit RNG; with a fixed seed the outputs are
//! reproducible bit for bit.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::model::{Distribution, Lpts, StateId, Transition};
use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_states: usize,
    pub actions: Vec<String>,
    /// cap on outgoing transitions per state
    pub max_out: usize,
    pub max_support: usize,
    /// random probabilities use integer weights up to this value
    pub max_weight: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_states: 4,
            actions: vec!["a".into(), "b".into()],
            max_out: 2,
            max_support: 2,
            max_weight: 4,
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random distribution over a non-empty subset of `states`: integer
/// weights normalized by their sum, so probabilities are exact and sum to 1.
pub fn random_distribution(
    rng: &mut impl Rng,
    states: &[StateId],
    cfg: &GenConfig,
) -> Distribution {
    let size = rng.gen_range(1..=cfg.max_support.min(states.len()));
    let mut chosen: Vec<StateId> = states.to_vec();
    chosen.shuffle(rng);
    chosen.truncate(size);
    let weights: Vec<u32> = (0..size).map(|_| rng.gen_range(1..=cfg.max_weight)).collect();
    let total: u32 = weights.iter().sum();
    let entries: BTreeMap<StateId, Rational> = chosen
        .into_iter()
        .zip(weights)
        .map(|(s, w)| (s, Rational::new(w.into(), total.into())))
        .collect();
    // duplicate-free by construction; weights for a state that was chosen
    // twice cannot happen since `chosen` is a truncated permutation
    Distribution::new(entries).expect("weights sum to the normalizer")
}

/// A random LPTS with up to `max_states` states. May be non-reactive.
pub fn random_lpts(rng: &mut impl Rng, cfg: &GenConfig) -> Lpts {
    let n = rng.gen_range(1..=cfg.max_states);
    let states: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let ids: Vec<StateId> = (0..n).map(StateId).collect();
    let mut transitions = Vec::new();
    for s in &ids {
        for _ in 0..rng.gen_range(0..=cfg.max_out) {
            let action = cfg.actions.choose(rng).expect("non-empty alphabet").clone();
            transitions.push(Transition {
                source: *s,
                action,
                target: random_distribution(rng, &ids, cfg),
            });
        }
    }
    Lpts::new(
        "random",
        states,
        StateId(0),
        cfg.actions.iter().cloned().collect(),
        transitions,
    )
    .expect("generated model is valid")
}

/// A random reactive LPTS: at most one transition per (state, action).
pub fn random_reactive(rng: &mut impl Rng, cfg: &GenConfig) -> Lpts {
    let n = rng.gen_range(1..=cfg.max_states);
    let states: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let ids: Vec<StateId> = (0..n).map(StateId).collect();
    let mut transitions = Vec::new();
    for s in &ids {
        for action in &cfg.actions {
            if rng.gen_bool(0.5) {
                transitions.push(Transition {
                    source: *s,
                    action: action.clone(),
                    target: random_distribution(rng, &ids, cfg),
                });
            }
        }
    }
    Lpts::new(
        "random",
        states,
        StateId(0),
        cfg.actions.iter().cloned().collect(),
        transitions,
    )
    .expect("generated model is valid")
}

/// A random stochastic tree of bounded depth. Children are always fresh
/// states, so the tree property holds by construction.
pub fn random_tree(rng: &mut impl Rng, cfg: &GenConfig, max_depth: usize) -> Lpts {
    let mut states = vec!["t0".to_string()];
    let mut transitions = Vec::new();
    let mut frontier = vec![(StateId(0), 0usize)];
    while let Some((s, depth)) = frontier.pop() {
        if depth >= max_depth || states.len() >= cfg.max_states.max(2) {
            continue;
        }
        for _ in 0..rng.gen_range(0..=cfg.max_out) {
            let action = cfg.actions.choose(rng).expect("non-empty alphabet").clone();
            let size = rng.gen_range(1..=cfg.max_support);
            let children: Vec<StateId> = (0..size)
                .map(|_| {
                    let id = StateId(states.len());
                    states.push(format!("t{}", id.0));
                    id
                })
                .collect();
            let weights: Vec<u32> = (0..size).map(|_| rng.gen_range(1..=cfg.max_weight)).collect();
            let total: u32 = weights.iter().sum();
            let entries: BTreeMap<StateId, Rational> = children
                .iter()
                .zip(&weights)
                .map(|(c, w)| (*c, Rational::new((*w).into(), total.into())))
                .collect();
            transitions.push(Transition {
                source: s,
                action,
                target: Distribution::new(entries).expect("normalized weights"),
            });
            for c in children {
                frontier.push((c, depth + 1));
            }
        }
    }
    Lpts::new(
        "tree",
        states,
        StateId(0),
        cfg.actions.iter().cloned().collect(),
        transitions,
    )
    .expect("generated tree is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::classify;
    use crate::text::serialize_lpts;

    #[test]
    fn seeded_generation_is_reproducible() {
        let cfg = GenConfig::default();
        let a = random_lpts(&mut rng_from_seed(7), &cfg);
        let b = random_lpts(&mut rng_from_seed(7), &cfg);
        assert_eq!(serialize_lpts(&a), serialize_lpts(&b));
    }

    #[test]
    fn trees_classify_as_trees() {
        let cfg = GenConfig::default();
        for seed in 0..50 {
            let t = random_tree(&mut rng_from_seed(seed), &cfg, 3);
            assert!(classify(&t).is_tree, "seed {seed}");
        }
    }

    #[test]
    fn reactive_models_classify_as_reactive() {
        let cfg = GenConfig::default();
        for seed in 0..50 {
            let m = random_reactive(&mut rng_from_seed(seed), &cfg);
            assert!(classify(&m).is_reactive, "seed {seed}");
        }
    }
}
