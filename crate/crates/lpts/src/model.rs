//! The LPTS data model: states, distributions, transition relations,
//! classification predicates and parallel composition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num::{One, Zero};
use thiserror::Error;

use crate::rational::{format_rational, Rational};

/// Index of a state within its owning [`Lpts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("distribution sums to {sum}, expected 1")]
    BadDistributionSum { sum: String },
    #[error("probability {0} outside (0,1]")]
    BadProbability(String),
    #[error("duplicate state name `{0}`")]
    DuplicateState(String),
    #[error("start state `{0}` not declared")]
    BadStart(String),
    #[error("empty state set")]
    NoStates,
    #[error("state id {0:?} out of range")]
    BadStateId(StateId),
    #[error("input is not a stochastic tree")]
    NotATree,
}

/// A discrete probability distribution over states. Only strictly positive
/// entries are stored; the stored values sum exactly to 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Distribution {
    entries: BTreeMap<StateId, Rational>,
}

impl Distribution {
    pub fn new(entries: BTreeMap<StateId, Rational>) -> Result<Self, ModelError> {
        let mut sum = Rational::zero();
        for p in entries.values() {
            if *p <= Rational::zero() || *p > Rational::one() {
                return Err(ModelError::BadProbability(format_rational(p)));
            }
            sum += p;
        }
        if !sum.is_one() {
            return Err(ModelError::BadDistributionSum {
                sum: format_rational(&sum),
            });
        }
        Ok(Distribution { entries })
    }

    pub fn dirac(s: StateId) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(s, Rational::one());
        Distribution { entries }
    }

    pub fn is_dirac(&self) -> bool {
        self.entries.len() == 1
    }

    /// Probability of `s`; zero when outside the support.
    pub fn prob(&self, s: StateId) -> Rational {
        self.entries.get(&s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &Rational)> {
        self.entries.iter().map(|(s, p)| (*s, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// mu(X) for a set of states.
    pub fn mass<I: IntoIterator<Item = StateId>>(&self, states: I) -> Rational {
        let mut sum = Rational::zero();
        for s in states {
            sum += self.prob(s);
        }
        sum
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub source: StateId,
    pub action: String,
    pub target: Distribution,
}

/// A finite labeled probabilistic transition system `<S, s0, alpha, tau>`.
///
/// States are interned: a state is addressed by its [`StateId`] (its index in
/// declaration order) and carries a display name. Transitions are kept as a
/// sorted set, so structurally equal systems compare equal regardless of the
/// order transitions were supplied in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lpts {
    name: String,
    states: Vec<String>,
    start: StateId,
    alphabet: BTreeSet<String>,
    transitions: Vec<Transition>,
}

impl Lpts {
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        start: StateId,
        alphabet: BTreeSet<String>,
        mut transitions: Vec<Transition>,
    ) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::NoStates);
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.clone()) {
                return Err(ModelError::DuplicateState(s.clone()));
            }
        }
        if start.0 >= states.len() {
            return Err(ModelError::BadStateId(start));
        }
        for t in &transitions {
            if t.source.0 >= states.len() {
                return Err(ModelError::BadStateId(t.source));
            }
            if !alphabet.contains(&t.action) {
                return Err(ModelError::UnknownAction(t.action.clone()));
            }
            for s in t.target.support() {
                if s.0 >= states.len() {
                    return Err(ModelError::BadStateId(s));
                }
            }
        }
        transitions.sort();
        transitions.dedup();
        Ok(Lpts {
            name: name.into(),
            states,
            start,
            alphabet,
            transitions,
        })
    }

    /// The trivial single-state system with no transitions.
    pub fn trivial(name: impl Into<String>, state: impl Into<String>) -> Self {
        Lpts {
            name: name.into(),
            states: vec![state.into()],
            start: StateId(0),
            alphabet: BTreeSet::new(),
            transitions: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|n| n == name).map(StateId)
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    /// Extends the alphabet; does not touch transitions.
    pub fn widen_alphabet<I: IntoIterator<Item = String>>(&mut self, actions: I) {
        self.alphabet.extend(actions);
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transitions_from(&self, s: StateId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.source == s)
    }

    pub fn transitions_on<'a>(
        &'a self,
        s: StateId,
        action: &'a str,
    ) -> impl Iterator<Item = &'a Transition> {
        self.transitions
            .iter()
            .filter(move |t| t.source == s && t.action == action)
    }

    /// Renames every state through `f`, keeping structure.
    pub fn rename_states(&self, f: impl Fn(&str) -> String) -> Lpts {
        let mut out = self.clone();
        out.states = self.states.iter().map(|n| f(n)).collect();
        out
    }
}

/// Derived structural classification of an LPTS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub is_tree: bool,
    pub is_reactive: bool,
}

/// Checks the stochastic-tree and reactive predicates.
///
/// A tree has its start state in no distribution's support and every other
/// state in the support of exactly one distribution. A reactive LPTS has at
/// most one transition per (state, action).
pub fn classify(l: &Lpts) -> Classification {
    let mut support_count = vec![0usize; l.n_states()];
    for t in l.transitions() {
        for s in t.target.support() {
            support_count[s.0] += 1;
        }
    }
    let is_tree = support_count[l.start().0] == 0
        && l.state_ids()
            .filter(|s| *s != l.start())
            .all(|s| support_count[s.0] == 1);

    let mut keys = BTreeSet::new();
    let is_reactive = l
        .transitions()
        .iter()
        .all(|t| keys.insert((t.source, t.action.clone())));

    Classification {
        is_tree,
        is_reactive,
    }
}

/// Which clause of the composition rule produced a composed transition, with
/// the factor distribution(s) over the original component states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    BothMove { left: Distribution, right: Distribution },
    LeftOnly { left: Distribution },
    RightOnly { right: Distribution },
}

impl Provenance {
    /// The contribution of the right component: its factor distribution for
    /// clauses where it moves, or `None` when it idles.
    pub fn right_factor(&self) -> Option<&Distribution> {
        match self {
            Provenance::BothMove { right, .. } | Provenance::RightOnly { right } => Some(right),
            Provenance::LeftOnly { .. } => None,
        }
    }
}

/// Parallel composition restricted to the pair states reachable from the pair
/// of start states. Per-transition provenance is retained so counterexamples
/// against the composition can later be projected onto one component.
#[derive(Debug, Clone)]
pub struct ComposedLpts {
    lpts: Lpts,
    /// For each composed state id, the (left, right) component states.
    pairs: Vec<(StateId, StateId)>,
    /// Parallel to `lpts.transitions()`.
    provenance: Vec<Provenance>,
}

impl ComposedLpts {
    pub fn lpts(&self) -> &Lpts {
        &self.lpts
    }

    pub fn pair(&self, s: StateId) -> (StateId, StateId) {
        self.pairs[s.0]
    }

    pub fn provenance(&self, transition_index: usize) -> &Provenance {
        &self.provenance[transition_index]
    }

    /// Index into `lpts.transitions()` of the given transition.
    pub fn transition_index(&self, t: &Transition) -> Option<usize> {
        self.lpts.transitions.binary_search(t).ok()
    }
}

/// `l1 || l2` over the union alphabet: synchronize on shared actions with a
/// product distribution, interleave on the rest.
pub fn compose(l1: &Lpts, l2: &Lpts) -> ComposedLpts {
    let mut pairs: Vec<(StateId, StateId)> = vec![(l1.start(), l2.start())];
    let mut index: BTreeMap<(StateId, StateId), StateId> = BTreeMap::new();
    index.insert((l1.start(), l2.start()), StateId(0));

    let mut queue: VecDeque<StateId> = VecDeque::new();
    queue.push_back(StateId(0));
    let mut raw: Vec<(Transition, Provenance)> = Vec::new();

    let intern = |pairs: &mut Vec<(StateId, StateId)>,
                      index: &mut BTreeMap<(StateId, StateId), StateId>,
                      queue: &mut VecDeque<StateId>,
                      p: (StateId, StateId)|
     -> StateId {
        *index.entry(p).or_insert_with(|| {
            let id = StateId(pairs.len());
            pairs.push(p);
            queue.push_back(id);
            id
        })
    };

    while let Some(ps) = queue.pop_front() {
        let (s1, s2) = pairs[ps.0];
        // clause 1: shared action, both move
        for t1 in l1.transitions_from(s1) {
            if l2.alphabet().contains(&t1.action) {
                for t2 in l2.transitions_on(s2, &t1.action) {
                    let mut entries = BTreeMap::new();
                    for (u1, p1) in t1.target.iter() {
                        for (u2, p2) in t2.target.iter() {
                            let id = intern(&mut pairs, &mut index, &mut queue, (u1, u2));
                            entries.insert(id, p1 * p2);
                        }
                    }
                    raw.push((
                        Transition {
                            source: ps,
                            action: t1.action.clone(),
                            target: Distribution::new(entries).expect("product distribution"),
                        },
                        Provenance::BothMove {
                            left: t1.target.clone(),
                            right: t2.target.clone(),
                        },
                    ));
                }
            } else {
                // clause 2: action outside the right alphabet, right idles
                let mut entries = BTreeMap::new();
                for (u1, p1) in t1.target.iter() {
                    let id = intern(&mut pairs, &mut index, &mut queue, (u1, s2));
                    entries.insert(id, p1.clone());
                }
                raw.push((
                    Transition {
                        source: ps,
                        action: t1.action.clone(),
                        target: Distribution::new(entries).expect("idle-right distribution"),
                    },
                    Provenance::LeftOnly {
                        left: t1.target.clone(),
                    },
                ));
            }
        }
        // clause 3: action outside the left alphabet, left idles
        for t2 in l2.transitions_from(s2) {
            if !l1.alphabet().contains(&t2.action) {
                let mut entries = BTreeMap::new();
                for (u2, p2) in t2.target.iter() {
                    let id = intern(&mut pairs, &mut index, &mut queue, (s1, u2));
                    entries.insert(id, p2.clone());
                }
                raw.push((
                    Transition {
                        source: ps,
                        action: t2.action.clone(),
                        target: Distribution::new(entries).expect("idle-left distribution"),
                    },
                    Provenance::RightOnly {
                        right: t2.target.clone(),
                    },
                ));
            }
        }
    }

    raw.sort_by(|a, b| a.0.cmp(&b.0));
    raw.dedup_by(|a, b| a.0 == b.0);
    let (transitions, provenance): (Vec<_>, Vec<_>) = raw.into_iter().unzip();

    let states: Vec<String> = pairs
        .iter()
        .map(|(a, b)| format!("{}&{}", l1.state_name(*a), l2.state_name(*b)))
        .collect();
    let alphabet: BTreeSet<String> = l1.alphabet().union(l2.alphabet()).cloned().collect();

    let lpts = Lpts {
        name: format!("{}||{}", l1.name(), l2.name()),
        states,
        start: StateId(0),
        alphabet,
        transitions,
    };
    ComposedLpts {
        lpts,
        pairs,
        provenance,
    }
}
