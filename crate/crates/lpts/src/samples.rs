//! Sample sets for learning: finite sets of positive and negative stochastic
//! trees, a flat global indexing of the positive sample states, and the
//! merged system obtained by identifying all positive roots.

use std::collections::BTreeMap;

use crate::model::{classify, Distribution, Lpts, ModelError, StateId, Transition};
use crate::rational::Rational;
use crate::simulation::simulates;

/// A positive-sample state addressed globally: samples are laid out one
/// after another, so `global = offset(sample) + local`.
pub type GlobalId = usize;

/// The unique incoming edge of a non-root tree state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentEdge {
    pub parent: GlobalId,
    pub action: String,
    /// mu_p(s): the probability this state carries in its parent's
    /// distribution.
    pub prob: Rational,
}

/// Positive and negative stochastic trees. State names are qualified by
/// sample index (`p0.`, `n1.`, ...) so namespaces of distinct samples are
/// disjoint even when the inputs reuse names.
#[derive(Debug, Clone)]
pub struct SampleSet {
    positives: Vec<Lpts>,
    negatives: Vec<Lpts>,
    /// offsets[i] = number of states in positives[..i]
    offsets: Vec<usize>,
    n_pos_states: usize,
    parents: Vec<Option<ParentEdge>>,
}

impl SampleSet {
    pub fn new(positives: Vec<Lpts>, negatives: Vec<Lpts>) -> Result<Self, ModelError> {
        for t in positives.iter().chain(negatives.iter()) {
            if !classify(t).is_tree {
                return Err(ModelError::NotATree);
            }
        }
        let positives: Vec<Lpts> = positives
            .iter()
            .enumerate()
            .map(|(i, t)| t.rename_states(|n| format!("p{i}.{n}")))
            .collect();
        let negatives: Vec<Lpts> = negatives
            .iter()
            .enumerate()
            .map(|(i, t)| t.rename_states(|n| format!("n{i}.{n}")))
            .collect();

        let mut offsets = Vec::with_capacity(positives.len());
        let mut n_pos_states = 0;
        for t in &positives {
            offsets.push(n_pos_states);
            n_pos_states += t.n_states();
        }

        let mut parents: Vec<Option<ParentEdge>> = vec![None; n_pos_states];
        for (i, t) in positives.iter().enumerate() {
            for tr in t.transitions() {
                for (child, p) in tr.target.iter() {
                    parents[offsets[i] + child.0] = Some(ParentEdge {
                        parent: offsets[i] + tr.source.0,
                        action: tr.action.clone(),
                        prob: p.clone(),
                    });
                }
            }
        }

        Ok(SampleSet {
            positives,
            negatives,
            offsets,
            n_pos_states,
            parents,
        })
    }

    pub fn positives(&self) -> &[Lpts] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Lpts] {
        &self.negatives
    }

    /// |S_P|: total number of positive sample states.
    pub fn n_pos_states(&self) -> usize {
        self.n_pos_states
    }

    pub fn global(&self, sample: usize, state: StateId) -> GlobalId {
        self.offsets[sample] + state.0
    }

    /// Inverse of [`global`](Self::global).
    pub fn local(&self, g: GlobalId) -> (usize, StateId) {
        let sample = match self.offsets.binary_search(&g) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (sample, StateId(g - self.offsets[sample]))
    }

    pub fn global_name(&self, g: GlobalId) -> &str {
        let (i, s) = self.local(g);
        self.positives[i].state_name(s)
    }

    /// Global ids of the positive roots.
    pub fn roots(&self) -> Vec<GlobalId> {
        self.positives
            .iter()
            .enumerate()
            .map(|(i, t)| self.global(i, t.start()))
            .collect()
    }

    pub fn is_root(&self, g: GlobalId) -> bool {
        let (i, s) = self.local(g);
        self.positives[i].start() == s
    }

    /// The unique incoming edge of a non-root positive state; `None` for
    /// roots.
    pub fn parent(&self, g: GlobalId) -> Option<&ParentEdge> {
        self.parents[g].as_ref()
    }

    /// All positive-sample transitions with globally indexed endpoints, in
    /// deterministic order.
    pub fn pos_transitions(&self) -> Vec<(GlobalId, String, Vec<(GlobalId, Rational)>)> {
        let mut out = Vec::new();
        for (i, t) in self.positives.iter().enumerate() {
            for tr in t.transitions() {
                let target: Vec<(GlobalId, Rational)> = tr
                    .target
                    .iter()
                    .map(|(s, p)| (self.global(i, s), p.clone()))
                    .collect();
                out.push((self.global(i, tr.source), tr.action.clone(), target));
            }
        }
        out
    }

    /// Union of all sample alphabets.
    pub fn alphabet(&self) -> std::collections::BTreeSet<String> {
        self.positives
            .iter()
            .chain(self.negatives.iter())
            .flat_map(|t| t.alphabet().iter().cloned())
            .collect()
    }

    /// L_P: all positive trees with their start states identified. States
    /// are the merged root plus every non-root state of every positive
    /// sample.
    pub fn merged(&self) -> Lpts {
        let mut names = vec!["root".to_string()];
        // global id -> merged id; roots all map to 0
        let mut remap: Vec<StateId> = vec![StateId(0); self.n_pos_states];
        for g in 0..self.n_pos_states {
            if !self.is_root(g) {
                remap[g] = StateId(names.len());
                names.push(self.global_name(g).to_string());
            }
        }
        let mut transitions = Vec::new();
        for (src, action, target) in self.pos_transitions() {
            let entries: BTreeMap<StateId, Rational> =
                target.into_iter().map(|(g, p)| (remap[g], p)).collect();
            transitions.push(Transition {
                source: remap[src],
                action,
                target: Distribution::new(entries).expect("tree distribution"),
            });
        }
        let alphabet = self
            .positives
            .iter()
            .flat_map(|t| t.alphabet().iter().cloned())
            .collect();
        Lpts::new("merged", names, StateId(0), alphabet, transitions).expect("valid merged system")
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencyCheck {
    pub exists: bool,
    pub merged: Lpts,
}

/// A consistent LPTS exists iff no negative sample is simulated by the
/// merged positive system L_P.
pub fn consistency_exists(samples: &SampleSet) -> ConsistencyCheck {
    let merged = samples.merged();
    let exists = !samples
        .negatives()
        .iter()
        .any(|n| simulates(n, &merged).holds);
    ConsistencyCheck { exists, merged }
}
