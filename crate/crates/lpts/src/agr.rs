//! Assume-guarantee verification of `l1 || l2` against a specification `p`
//! with the asymmetric rule: learn an assumption A such that `l1 || A` meets
//! the specification and `l2` refines A. Counterexamples against the
//! composition are projected onto the assumption through the per-transition
//! provenance kept by the composition.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use thiserror::Error;

use crate::active::{rebuild_hypothesis, Mode, SampleStore};
use crate::learning::LearnError;
use crate::model::{compose, ComposedLpts, Lpts, Provenance, StateId};
use crate::rational::Rational;
use crate::simulation::{
    expand_cex, simulates, verify_execution_mapping, CexNode, CexTree, ExecutionMapping,
};
use crate::smt::SolverConfig;

#[derive(Debug, Error)]
pub enum AgrError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("counterexample projection failed: {0}")]
    Projection(String),
    #[error("round budget ({0}) exhausted")]
    BoundExceeded(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgrVerdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, Default)]
pub struct AgrStats {
    pub rounds: usize,
    pub premise1_checks: usize,
    pub premise2_checks: usize,
    /// |S_A| after each rebuild.
    pub assumption_sizes: Vec<usize>,
}

impl AgrStats {
    pub fn max_assumption_states(&self) -> usize {
        self.assumption_sizes.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone)]
pub struct AgrOutcome {
    pub verdict: AgrVerdict,
    /// Present iff the verdict is `Holds`: an assumption satisfying both
    /// premises.
    pub assumption: Option<Lpts>,
    /// Present iff the verdict is `Violated`: a tree below `l1 || l2` and
    /// not below `p`.
    pub real_cex: Option<CexTree>,
    pub stats: AgrStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spuriousness {
    Real,
    Spurious,
}

/// A projected negative counterexample is real iff `l2` itself exhibits the
/// assumption behavior it demands.
pub fn spuriousness(n: &CexTree, l2: &Lpts) -> Spuriousness {
    if simulates(&n.tree, l2).holds {
        Spuriousness::Real
    } else {
        Spuriousness::Spurious
    }
}

/// Finds the composed transition (and its provenance index) matched by a
/// counterexample transition under the execution mapping: same action, and
/// the mapping is injective and probability-preserving on the support.
fn matched_transition<'a>(
    composed: &'a ComposedLpts,
    mapping: &ExecutionMapping,
    tree_tr: &'a crate::model::Transition,
) -> Option<(usize, &'a crate::model::Transition)> {
    let src = mapping.target(tree_tr.source);
    composed
        .lpts()
        .transitions_on(src, &tree_tr.action)
        .find(|mt| {
            let mut seen = BTreeSet::new();
            tree_tr.target.iter().all(|(c, p)| {
                seen.insert(mapping.target(c)) && mt.target.prob(mapping.target(c)) == *p
            })
        })
        .map(|mt| {
            let idx = composed
                .transition_index(mt)
                .expect("transition taken from the composition");
            (idx, mt)
        })
}

fn project_node(
    tree: &Lpts,
    mapping: &ExecutionMapping,
    composed: &ComposedLpts,
    c: StateId,
) -> Result<Rc<CexNode>, AgrError> {
    let a_state = composed.pair(mapping.target(c)).1;
    let mut transitions: Vec<(String, Vec<(Rational, Rc<CexNode>)>)> = Vec::new();
    for tr in tree.transitions_from(c) {
        let (idx, _) = matched_transition(composed, mapping, tr).ok_or_else(|| {
            AgrError::Projection(format!(
                "no composed transition matches {} --{}-> ...",
                tree.state_name(tr.source),
                tr.action
            ))
        })?;
        match composed.provenance(idx) {
            Provenance::LeftOnly { .. } => {
                // the assumption idles: contract the step, pulling each
                // child's projected behavior up into this node
                for (child, _) in tr.target.iter() {
                    let node = project_node(tree, mapping, composed, child)?;
                    transitions.extend(node.transitions.iter().cloned());
                }
            }
            prov => {
                let factor = prov.right_factor().expect("assumption moved");
                // children sharing an assumption state collapse into the one
                // node carrying that state's factor probability
                let mut by_a_state: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
                for (child, _) in tr.target.iter() {
                    let t = composed.pair(mapping.target(child)).1;
                    by_a_state.entry(t).or_default().push(child);
                }
                let mut entries = Vec::new();
                for (t, p) in factor.iter() {
                    let mut merged: Vec<(String, Vec<(Rational, Rc<CexNode>)>)> = Vec::new();
                    for child in by_a_state.get(&t).into_iter().flatten() {
                        let node = project_node(tree, mapping, composed, *child)?;
                        merged.extend(node.transitions.iter().cloned());
                    }
                    entries.push((
                        p.clone(),
                        Rc::new(CexNode {
                            model_state: t,
                            transitions: merged,
                        }),
                    ));
                }
                transitions.push((tr.action.clone(), entries));
            }
        }
    }
    Ok(Rc::new(CexNode {
        model_state: a_state,
        transitions,
    }))
}

/// Projects a counterexample against `l1 || A` onto the assumption A:
/// steps where A idles are contracted, steps where A moves carry its factor
/// distribution, and counterexample children sharing an A-state merge. The
/// result comes with an execution mapping into A and is machine-verified by
/// the caller, not trusted.
pub fn project_onto_a(
    cex: &CexTree,
    mapping: &ExecutionMapping,
    composed: &ComposedLpts,
) -> Result<(CexTree, ExecutionMapping), AgrError> {
    if !verify_execution_mapping(cex, mapping, composed.lpts()) {
        return Err(AgrError::Projection(
            "execution mapping does not verify against the composition".into(),
        ));
    }
    let root = project_node(&cex.tree, mapping, composed, cex.tree.start())?;
    Ok(expand_cex(&root, "projected"))
}

/// Runs the asymmetric assume-guarantee rule: each round checks premise 2
/// (`l2` below A) and then premise 1 (`l1 || A` below `p`), feeding
/// counterexamples to the assumption learner. Premise-1 counterexamples are
/// projected onto A and screened for spuriousness against `l2`.
pub fn check_asym(
    l1: &Lpts,
    l2: &Lpts,
    p: &Lpts,
    mode: Mode,
    cfg: &SolverConfig,
    max_rounds: usize,
    max_k: usize,
) -> Result<AgrOutcome, AgrError> {
    let alpha_a: BTreeSet<String> = l2
        .alphabet()
        .iter()
        .chain(p.alphabet().intersection(l1.alphabet()))
        .cloned()
        .collect();
    let mut store = SampleStore::new();
    let mut assumption = Lpts::trivial("assumption", "a0");
    assumption.widen_alphabet(alpha_a.iter().cloned());
    let mut stats = AgrStats::default();
    stats.assumption_sizes.push(assumption.n_states());

    let mut last_k = 1;
    let rebuild = |store: &SampleStore,
                       stats: &mut AgrStats,
                       last_k: &mut usize|
     -> Result<Lpts, AgrError> {
        let (mut a, k) = rebuild_hypothesis(store, mode, cfg, *last_k, max_k)?;
        *last_k = k;
        a.set_name("assumption");
        a.widen_alphabet(alpha_a.iter().cloned());
        stats.assumption_sizes.push(a.n_states());
        Ok(a)
    };

    for _ in 0..max_rounds {
        stats.rounds += 1;

        stats.premise2_checks += 1;
        let p2 = simulates(l2, &assumption);
        if !p2.holds {
            let (tree, _) = p2.cex.expect("failed premise carries a counterexample");
            store.add_pos(&tree.tree);
            assumption = rebuild(&store, &mut stats, &mut last_k)?;
            continue;
        }

        stats.premise1_checks += 1;
        let composed = compose(l1, &assumption);
        let p1 = simulates(composed.lpts(), p);
        if p1.holds {
            // both premises verified against the current assumption
            debug_assert!(simulates(l2, &assumption).holds);
            return Ok(AgrOutcome {
                verdict: AgrVerdict::Holds,
                assumption: Some(assumption),
                real_cex: None,
                stats,
            });
        }
        let (cex, mapping) = p1.cex.expect("failed premise carries a counterexample");
        let (projected, proj_map) = project_onto_a(&cex, &mapping, &composed)?;
        if !verify_execution_mapping(&projected, &proj_map, &assumption) {
            return Err(AgrError::Projection(
                "projected counterexample does not map into the assumption".into(),
            ));
        }
        if spuriousness(&projected, l2) == Spuriousness::Spurious {
            store.add_neg(&projected.tree);
            assumption = rebuild(&store, &mut stats, &mut last_k)?;
            continue;
        }
        // the projection is real behavior of l2; confirm the reported tree
        // against the monolithic system before returning it
        let full = compose(l1, l2);
        let real_cex = if simulates(&cex.tree, full.lpts()).holds && !simulates(&cex.tree, p).holds
        {
            cex
        } else {
            let mono = simulates(full.lpts(), p);
            match mono.cex {
                Some((tree, _)) => tree,
                None => {
                    // the composition meets the specification after all:
                    // the projection misled us, keep learning
                    store.add_neg(&projected.tree);
                    assumption = rebuild(&store, &mut stats, &mut last_k)?;
                    continue;
                }
            }
        };
        return Ok(AgrOutcome {
            verdict: AgrVerdict::Violated,
            assumption: None,
            real_cex: Some(real_cex),
            stats,
        });
    }
    Err(AgrError::BoundExceeded(max_rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_lpts;

    fn model(text: &str) -> Lpts {
        parse_lpts(text).unwrap()
    }

    #[test]
    fn projection_contracts_left_only_steps() {
        // l1 acts alone on `x`; the assumption never moves
        let l1 = model("lpts l1\nalphabet x\nstates s0 s1\nstart s0\ntrans s0 x { s1: 1 }\n");
        let a = Lpts::trivial("a", "a0");
        let composed = compose(&l1, &a);
        // a counterexample that walks the x step
        let cex = CexTree::new(model(
            "lpts c\nalphabet x\nstates n0 n1\nstart n0\ntrans n0 x { n1: 1 }\n",
        ))
        .unwrap();
        let mapping =
            ExecutionMapping::new([(StateId(0), StateId(0)), (StateId(1), StateId(1))].into());
        let (projected, m) = project_onto_a(&cex, &mapping, &composed).unwrap();
        assert_eq!(projected.tree.n_states(), 1);
        assert!(projected.tree.transitions().is_empty());
        assert!(verify_execution_mapping(&projected, &m, &a));
    }

    #[test]
    fn projection_carries_the_assumption_factor() {
        let l1 = model("lpts l1\nalphabet x\nstates s0 s1\nstart s0\ntrans s0 x { s1: 1 }\n");
        let a = model(
            "lpts a\nalphabet x\nstates a0 a1 a2\nstart a0\ntrans a0 x { a1: 1/3, a2: 2/3 }\n",
        );
        let composed = compose(&l1, &a);
        let cex = CexTree::new(model(
            "lpts c\nalphabet x\nstates n0 n1 n2\nstart n0\ntrans n0 x { n1: 1/3, n2: 2/3 }\n",
        ))
        .unwrap();
        // (s0,a0) = 0; supports line up with the product states
        let pair_of = |l: StateId, r: StateId| {
            composed
                .lpts()
                .state_ids()
                .find(|s| composed.pair(*s) == (l, r))
                .unwrap()
        };
        let mapping = ExecutionMapping::new(
            [
                (StateId(0), pair_of(StateId(0), StateId(0))),
                (StateId(1), pair_of(StateId(1), StateId(1))),
                (StateId(2), pair_of(StateId(1), StateId(2))),
            ]
            .into(),
        );
        let (projected, m) = project_onto_a(&cex, &mapping, &composed).unwrap();
        assert!(verify_execution_mapping(&projected, &m, &a));
        let tr = projected.tree.transitions();
        assert_eq!(tr.len(), 1);
        let probs: Vec<Rational> = tr[0].target.iter().map(|(_, p)| p.clone()).collect();
        assert_eq!(
            probs,
            vec![crate::rational::rat(1, 3), crate::rational::rat(2, 3)]
        );
    }

    #[test]
    fn spuriousness_trivial_tree_is_real() {
        let n = CexTree::new(Lpts::trivial("n", "n0")).unwrap();
        let l2 = model("lpts l2\nalphabet y\nstates t0 t1\nstart t0\ntrans t0 y { t1: 1 }\n");
        assert_eq!(spuriousness(&n, &l2), Spuriousness::Real);
        // a tree demanding an action l2 lacks is spurious
        let n = CexTree::new(model(
            "lpts n\nalphabet z\nstates n0 n1\nstart n0\ntrans n0 z { n1: 1 }\n",
        ))
        .unwrap();
        assert_eq!(spuriousness(&n, &l2), Spuriousness::Spurious);
    }
}
