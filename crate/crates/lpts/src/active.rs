//! Active learning: the conjecture/response loop over simulation-equivalence
//! queries, the friendly teacher answering from a hidden target, and the
//! adversarial-teacher demonstration that moves the target inside the
//! one-parameter family U_lambda forever.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num::{One, Zero};

use crate::learning::{self, Backend, LearnError};
use crate::model::{Distribution, Lpts, StateId, Transition};
use crate::rational::Rational;
use crate::samples::SampleSet;
use crate::simulation::{simulates, CexTree, ExecutionMapping};
use crate::smt::SolverConfig;
use crate::text::serialize_lpts;

#[derive(Debug, Clone)]
pub enum TeacherResponse {
    Equivalent,
    /// A tree simulated by the target but not the hypothesis; mapping into
    /// the target.
    Positive(CexTree, ExecutionMapping),
    /// A tree simulated by the hypothesis but not the target; mapping into
    /// the hypothesis.
    Negative(CexTree, ExecutionMapping),
}

impl TeacherResponse {
    pub fn kind(&self) -> &'static str {
        match self {
            TeacherResponse::Equivalent => "equivalent",
            TeacherResponse::Positive(..) => "positive",
            TeacherResponse::Negative(..) => "negative",
        }
    }
}

pub trait Teacher {
    fn query(&mut self, hypothesis: &Lpts) -> TeacherResponse;
}

/// Answers equivalence queries from a hidden target, checking the
/// hypothesis-below-target direction first.
pub fn friendly_teacher(target: &Lpts, hypothesis: &Lpts) -> TeacherResponse {
    let down = simulates(hypothesis, target);
    if !down.holds {
        let (tree, mapping) = down.cex.expect("failed check carries a counterexample");
        return TeacherResponse::Negative(tree, mapping);
    }
    let up = simulates(target, hypothesis);
    if !up.holds {
        let (tree, mapping) = up.cex.expect("failed check carries a counterexample");
        return TeacherResponse::Positive(tree, mapping);
    }
    TeacherResponse::Equivalent
}

pub struct FriendlyTeacher {
    pub target: Lpts,
}

impl Teacher for FriendlyTeacher {
    fn query(&mut self, hypothesis: &Lpts) -> TeacherResponse {
        friendly_teacher(&self.target, hypothesis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Partition,
    Stochastic,
}

#[derive(Debug, Clone)]
pub struct Bounds {
    pub max_rounds: usize,
    pub max_k: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_rounds: 200,
            max_k: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Round {
    pub hypothesis: Lpts,
    pub response: TeacherResponse,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Converged(Lpts),
    BoundExceeded,
}

#[derive(Debug, Clone)]
pub struct LearningTranscript {
    pub rounds: Vec<Round>,
    pub outcome: Outcome,
}

impl LearningTranscript {
    pub fn max_hypothesis_states(&self) -> usize {
        self.rounds
            .iter()
            .map(|r| r.hypothesis.n_states())
            .max()
            .unwrap_or(0)
    }
}

/// Accumulates returned counterexamples, deduplicated structurally.
pub(crate) struct SampleStore {
    pub(crate) pos: Vec<Lpts>,
    pub(crate) neg: Vec<Lpts>,
    seen_pos: BTreeSet<String>,
    seen_neg: BTreeSet<String>,
}

impl SampleStore {
    pub(crate) fn new() -> Self {
        SampleStore {
            pos: Vec::new(),
            neg: Vec::new(),
            seen_pos: BTreeSet::new(),
            seen_neg: BTreeSet::new(),
        }
    }

    pub(crate) fn add_pos(&mut self, tree: &Lpts) {
        if self.seen_pos.insert(serialize_lpts(tree)) {
            self.pos.push(tree.clone());
        }
    }

    pub(crate) fn add_neg(&mut self, tree: &Lpts) {
        if self.seen_neg.insert(serialize_lpts(tree)) {
            self.neg.push(tree.clone());
        }
    }

    fn sample_set(&self) -> Result<SampleSet, LearnError> {
        SampleSet::new(self.pos.clone(), self.neg.clone())
            .map_err(|e| LearnError::InvalidPartition(e.to_string()))
    }
}

/// Rebuilds the least-size consistent hypothesis. `min_k` is a resume
/// point for the size search: the store only grows, so the minimum found in
/// one round is a valid lower bound for the next.
pub(crate) fn rebuild_hypothesis(
    store: &SampleStore,
    mode: Mode,
    cfg: &SolverConfig,
    min_k: usize,
    max_k: usize,
) -> Result<(Lpts, usize), LearnError> {
    if store.pos.is_empty() {
        // Algorithm start state: a single state with no transitions is
        // consistent with any negative-free, positive-free sample set
        return Ok((Lpts::trivial("hypothesis", "h0"), 1));
    }
    let samples = store.sample_set()?;
    if store.neg.is_empty() {
        // With no negatives the single-class quotient is always consistent
        // and trivially minimal; no search needed. Its one-group stochastic
        // reading coincides with the classical one, so this covers both
        // modes.
        let p = learning::Partition::new(&samples, vec![0; samples.n_pos_states()])?;
        let mut h = learning::quotient(&samples, &p);
        h.set_name("hypothesis");
        return Ok((h, 1));
    }
    let result = match mode {
        Mode::Partition => learning::learn_min_partition_from(
            &samples,
            &Backend::Solver(cfg.clone()),
            min_k,
            max_k,
        )?,
        Mode::Stochastic => learning::learn_min_stochastic_from(&samples, cfg, min_k, max_k)?,
    };
    let mut h = result.quotient;
    h.set_name("hypothesis");
    Ok((h, result.size))
}

/// The conjecture loop: start from the single-state no-transition
/// hypothesis; each round query the teacher, fold the counterexample into
/// the samples, and rebuild the hypothesis as the quotient of a least-size
/// consistent (stochastic) partition. Partition mode terminates against a
/// friendly teacher; stochastic mode may exhaust its bounds.
pub fn learn(
    teacher: &mut dyn Teacher,
    mode: Mode,
    cfg: &SolverConfig,
    bounds: &Bounds,
) -> Result<LearningTranscript, LearnError> {
    let mut store = SampleStore::new();
    let mut hypothesis = Lpts::trivial("hypothesis", "h0");
    let mut last_k = 1;
    let mut rounds = Vec::new();
    for _ in 0..bounds.max_rounds {
        let t0 = Instant::now();
        let response = teacher.query(&hypothesis);
        match &response {
            TeacherResponse::Equivalent => {
                rounds.push(Round {
                    hypothesis: hypothesis.clone(),
                    response,
                    elapsed: t0.elapsed(),
                });
                return Ok(LearningTranscript {
                    rounds,
                    outcome: Outcome::Converged(hypothesis),
                });
            }
            TeacherResponse::Positive(tree, _) => store.add_pos(&tree.tree),
            TeacherResponse::Negative(tree, _) => store.add_neg(&tree.tree),
        }
        let next = match rebuild_hypothesis(&store, mode, cfg, last_k, bounds.max_k) {
            Ok((h, k)) => {
                last_k = k;
                h
            }
            Err(LearnError::MaxKExceeded { .. }) => {
                rounds.push(Round {
                    hypothesis: hypothesis.clone(),
                    response,
                    elapsed: t0.elapsed(),
                });
                return Ok(LearningTranscript {
                    rounds,
                    outcome: Outcome::BoundExceeded,
                });
            }
            Err(e) => return Err(e),
        };
        rounds.push(Round {
            hypothesis: hypothesis.clone(),
            response,
            elapsed: t0.elapsed(),
        });
        hypothesis = next;
    }
    Ok(LearningTranscript {
        rounds,
        outcome: Outcome::BoundExceeded,
    })
}

/// U_lambda: u0 -a-> {u1: lambda, u2: 1-lambda}, u1 -b-> u1 (self-loop),
/// u2 deadlocked.
pub fn u_lambda(lambda: &Rational) -> Lpts {
    assert!(
        *lambda > Rational::zero() && *lambda < Rational::one(),
        "lambda must lie strictly inside (0,1)"
    );
    let u0 = StateId(0);
    let u1 = StateId(1);
    let u2 = StateId(2);
    let mut entries = std::collections::BTreeMap::new();
    entries.insert(u1, lambda.clone());
    entries.insert(u2, Rational::one() - lambda);
    Lpts::new(
        "u_lambda",
        vec!["u0".into(), "u1".into(), "u2".into()],
        u0,
        ["a".to_string(), "b".to_string()].into(),
        vec![
            Transition {
                source: u0,
                action: "a".into(),
                target: Distribution::new(entries).expect("valid split"),
            },
            Transition {
                source: u1,
                action: "b".into(),
                target: Distribution::dirac(u1),
            },
        ],
    )
    .expect("valid family member")
}

/// The b-mass of a distribution: the probability it assigns to states with
/// an outgoing b-transition.
fn b_mass(tree: &Lpts, mu: &Distribution) -> Rational {
    mu.iter()
        .filter(|(s, _)| tree.transitions_on(*s, "b").next().is_some())
        .map(|(_, p)| p.clone())
        .sum()
}

/// The midpoint bump: lambda+ is the least b-mass above lambda among the
/// a-labeled distributions of the negative trees (1 if none), and the new
/// lambda is (lambda+ + lambda)/2. Returns (lambda+, new lambda).
pub fn next_lambda(lambda: &Rational, negatives: &[Lpts]) -> (Rational, Rational) {
    let mut lambda_plus = Rational::one();
    for tree in negatives {
        for tr in tree.transitions() {
            if tr.action == "a" {
                let p = b_mass(tree, &tr.target);
                if p > *lambda && p < lambda_plus {
                    lambda_plus = p;
                }
            }
        }
    }
    let two = Rational::from_integer(2.into());
    let new = (&lambda_plus + lambda) / two;
    (lambda_plus, new)
}

#[derive(Debug, Clone)]
pub struct AdversarialRound {
    pub lambda: Rational,
    pub hypothesis: Lpts,
    pub response_kind: &'static str,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct AdversarialTranscript {
    pub rounds: Vec<AdversarialRound>,
    /// lambda after each bump, starting with the initial value.
    pub lambda_history: Vec<Rational>,
    pub final_lambda: Rational,
    /// The learner never converges; true when the round budget ran out
    /// without an `equivalent` answer reaching the learner.
    pub exhausted: bool,
}

/// The adversarial teacher over the U_lambda family: answer negative while
/// the hypothesis overshoots U_lambda, positive while it undershoots, and
/// on equivalence silently move lambda up by the midpoint rule and answer
/// positive against the new member. After every round the current family
/// member is verified consistent with everything returned so far.
pub fn adversarial_demo(
    initial_lambda: &Rational,
    rounds: usize,
    mode: Mode,
    cfg: &SolverConfig,
    max_k: usize,
) -> Result<AdversarialTranscript, LearnError> {
    assert!(rounds >= 1);
    let mut lambda = initial_lambda.clone();
    let mut lambda_history = vec![lambda.clone()];
    let mut store = SampleStore::new();
    let mut hypothesis = Lpts::trivial("hypothesis", "h0");
    let mut last_k = 1;
    let mut transcript = Vec::new();

    for _ in 0..rounds {
        let t0 = Instant::now();
        let mut target = u_lambda(&lambda);
        let down = simulates(&hypothesis, &target);
        let response = if !down.holds {
            let (tree, mapping) = down.cex.unwrap();
            TeacherResponse::Negative(tree, mapping)
        } else {
            let up = simulates(&target, &hypothesis);
            if !up.holds {
                let (tree, mapping) = up.cex.unwrap();
                TeacherResponse::Positive(tree, mapping)
            } else {
                // the learner caught the target: move it
                let (_, new) = next_lambda(&lambda, &store.neg);
                assert!(new > lambda && new < Rational::one());
                lambda = new;
                lambda_history.push(lambda.clone());
                target = u_lambda(&lambda);
                let up = simulates(&target, &hypothesis);
                let (tree, mapping) = up
                    .cex
                    .expect("a larger lambda is never simulated by the old hypothesis");
                TeacherResponse::Positive(tree, mapping)
            }
        };
        match &response {
            TeacherResponse::Positive(tree, _) => store.add_pos(&tree.tree),
            TeacherResponse::Negative(tree, _) => store.add_neg(&tree.tree),
            TeacherResponse::Equivalent => unreachable!("the adversary never concedes"),
        }
        // the inductive invariant: the current family member is consistent
        // with every counterexample handed out so far
        for p in &store.pos {
            if !simulates(p, &target).holds {
                return Err(LearnError::InvalidPartition(
                    "adversary invariant broken: positive tree not below the current target"
                        .into(),
                ));
            }
        }
        for n in &store.neg {
            if simulates(n, &target).holds {
                return Err(LearnError::InvalidPartition(
                    "adversary invariant broken: negative tree below the current target".into(),
                ));
            }
        }
        let (next, k) = rebuild_hypothesis(&store, mode, cfg, last_k, max_k)?;
        last_k = k;
        transcript.push(AdversarialRound {
            lambda: lambda.clone(),
            hypothesis: hypothesis.clone(),
            response_kind: response.kind(),
            elapsed: t0.elapsed(),
        });
        hypothesis = next;
    }

    Ok(AdversarialTranscript {
        rounds: transcript,
        final_lambda: lambda.clone(),
        lambda_history,
        exhausted: true,
    })
}
