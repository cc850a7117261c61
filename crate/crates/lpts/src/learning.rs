//! Learning least-size consistent LPTSes from tree samples: classical
//! partitions with class-sum quotients, stochastic partitions with
//! conditional-probability quotients, the constructive groupings induced by
//! an existing simulation, and the incremental minimum-size searches.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num::{One, Zero};
use thiserror::Error;

use crate::model::{Distribution, Lpts, StateId, Transition};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::samples::{consistency_exists, GlobalId, SampleSet};
use crate::simulation::{coarsest_simulation, dist_leq, simulates, DistCompare};
use crate::smt::{self, SmtError, SolverConfig};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no consistent LPTS exists for these samples")]
    Inconsistent,
    #[error("a positive sample is not simulated by the reference system")]
    PositiveNotSimulated,
    #[error("no consistent witness up to size {tried}")]
    MaxKExceeded { tried: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid stochastic partition: {0}")]
    InvalidStochasticPartition(String),
    #[error(transparent)]
    Solver(#[from] SmtError),
}

/// A partition of the positive sample states with all roots in one class.
/// Stored as a class index per global state, normalized so class numbers
/// appear in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    class_of: Vec<usize>,
    n_classes: usize,
}

impl Partition {
    pub fn new(samples: &SampleSet, class_of: Vec<usize>) -> Result<Self, LearnError> {
        if class_of.len() != samples.n_pos_states() {
            return Err(LearnError::InvalidPartition(format!(
                "{} assignments for {} states",
                class_of.len(),
                samples.n_pos_states()
            )));
        }
        let roots = samples.roots();
        let root_class = class_of[roots[0]];
        if roots.iter().any(|r| class_of[*r] != root_class) {
            return Err(LearnError::InvalidPartition(
                "positive roots are split across classes".into(),
            ));
        }
        // normalize to first-occurrence numbering; also guarantees classes
        // 0..n_classes are all non-empty
        let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
        let class_of: Vec<usize> = class_of
            .iter()
            .map(|c| {
                let next = renumber.len();
                *renumber.entry(*c).or_insert(next)
            })
            .collect();
        let n_classes = renumber.len();
        Ok(Partition {
            class_of,
            n_classes,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_of(&self, g: GlobalId) -> usize {
        self.class_of[g]
    }

    /// The class holding every positive root.
    pub fn start_class(&self, samples: &SampleSet) -> usize {
        self.class_of[samples.roots()[0]]
    }

    pub fn classes(&self) -> Vec<BTreeSet<GlobalId>> {
        let mut out = vec![BTreeSet::new(); self.n_classes];
        for (g, c) in self.class_of.iter().enumerate() {
            out[*c].insert(g);
        }
        out
    }
}

/// The quotient LPTS of a partition: one state per class, start at the root
/// class, each sample transition lifted by summing target probabilities over
/// classes.
pub fn quotient(samples: &SampleSet, p: &Partition) -> Lpts {
    let states: Vec<String> = (0..p.n_classes()).map(|i| format!("c{i}")).collect();
    let mut transitions = Vec::new();
    for (src, action, target) in samples.pos_transitions() {
        let mut entries: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (g, prob) in target {
            *entries
                .entry(StateId(p.class_of(g)))
                .or_insert_with(Rational::zero) += prob;
        }
        transitions.push(Transition {
            source: StateId(p.class_of(src)),
            action,
            target: Distribution::new(entries).expect("lifted distribution sums to 1"),
        });
    }
    Lpts::new(
        "quotient",
        states,
        StateId(p.start_class(samples)),
        samples.alphabet(),
        transitions,
    )
    .expect("valid quotient")
}

/// Consistency: every positive sample is simulated by `q` and no negative
/// sample is.
pub fn is_consistent(samples: &SampleSet, q: &Lpts) -> bool {
    samples.positives().iter().all(|p| simulates(p, q).holds)
        && !samples.negatives().iter().any(|n| simulates(n, q).holds)
}

/// Groups sample states by their image under the coarsest simulation into
/// `l`, with every root's image forced to the start state of `l`. The
/// resulting quotient is simulated by `l`; the class count is bounded by
/// 2^{|S_l|}. When every distribution of `l` is Dirac a single coherent
/// representative per sample state exists instead of a whole image, giving
/// at most |S_l| classes.
pub fn partition_from_simulation(samples: &SampleSet, l: &Lpts) -> Result<Partition, LearnError> {
    if l.transitions().iter().all(|t| t.target.is_dirac()) {
        return partition_from_simulation_dirac(samples, l);
    }
    let mut class_of = vec![0usize; samples.n_pos_states()];
    let mut key_index: BTreeMap<BTreeSet<StateId>, usize> = BTreeMap::new();
    let root_key: BTreeSet<StateId> = [l.start()].into();
    key_index.insert(root_key.clone(), 0);
    for (i, pos) in samples.positives().iter().enumerate() {
        let rel = coarsest_simulation(pos, l);
        if !rel.contains(pos.start(), l.start()) {
            return Err(LearnError::PositiveNotSimulated);
        }
        for s in pos.state_ids() {
            let key = if s == pos.start() {
                root_key.clone()
            } else {
                rel.image(s)
            };
            let next = key_index.len();
            class_of[samples.global(i, s)] = *key_index.entry(key).or_insert(next);
        }
    }
    Partition::new(samples, class_of)
}

/// Dirac-model case: pick one simulating model state per sample state,
/// top-down so that a child's representative is always a successor of its
/// parent's. Classes are representatives, so at most |S_l| of them; the
/// quotient stays simulated by `l` because the choices are coherent.
fn partition_from_simulation_dirac(
    samples: &SampleSet,
    l: &Lpts,
) -> Result<Partition, LearnError> {
    let mut class_of = vec![0usize; samples.n_pos_states()];
    let mut rep_index: BTreeMap<StateId, usize> = BTreeMap::new();
    rep_index.insert(l.start(), 0);
    for (i, pos) in samples.positives().iter().enumerate() {
        let rel = coarsest_simulation(pos, l);
        if !rel.contains(pos.start(), l.start()) {
            return Err(LearnError::PositiveNotSimulated);
        }
        let mut rep = vec![None::<StateId>; pos.n_states()];
        rep[pos.start().0] = Some(l.start());
        let mut queue = vec![pos.start()];
        while let Some(s) = queue.pop() {
            let t = rep[s.0].expect("parents are assigned before their children");
            for tr in pos.transitions_from(s) {
                // any matching Dirac transition of t works; take the first
                // in canonical order for determinism
                let u = l
                    .transitions_on(t, &tr.action)
                    .filter_map(|mt| mt.target.support().next())
                    .find(|u| {
                        tr.target.support().all(|c| rel.contains(c, *u))
                    })
                    .expect("t simulates s, so a matching transition exists");
                for child in tr.target.support() {
                    rep[child.0] = Some(u);
                    queue.push(child);
                }
            }
        }
        for s in pos.state_ids() {
            let t = rep[s.0].expect("trees are connected, every state gets a representative");
            let next = rep_index.len();
            class_of[samples.global(i, s)] = *rep_index.entry(t).or_insert(next);
        }
    }
    Partition::new(samples, class_of)
}

/// A stochastic partition: for each sample state a partial family of
/// distributions over group indices, conditioned on the group of the parent.
/// Roots are placed in the start group with probability 1 under every
/// condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticPartition {
    k: usize,
    start_group: usize,
    /// grouping[s][g] = [s](g), a distribution over group indices; absent
    /// keys mean "[s](g) undefined".
    grouping: Vec<BTreeMap<usize, BTreeMap<usize, Rational>>>,
}

impl StochasticPartition {
    pub fn new(
        samples: &SampleSet,
        k: usize,
        start_group: usize,
        grouping: Vec<BTreeMap<usize, BTreeMap<usize, Rational>>>,
    ) -> Result<Self, LearnError> {
        let sp = StochasticPartition {
            k,
            start_group,
            grouping,
        };
        sp.validate(samples)?;
        Ok(sp)
    }

    fn invalid(msg: impl Into<String>) -> LearnError {
        LearnError::InvalidStochasticPartition(msg.into())
    }

    fn validate(&self, samples: &SampleSet) -> Result<(), LearnError> {
        if self.grouping.len() != samples.n_pos_states() {
            return Err(Self::invalid("grouping size mismatch"));
        }
        if self.start_group >= self.k {
            return Err(Self::invalid("start group out of range"));
        }
        for (s, rows) in self.grouping.iter().enumerate() {
            for (g, row) in rows {
                if *g >= self.k {
                    return Err(Self::invalid(format!("condition group {g} out of range")));
                }
                let mut sum = Rational::zero();
                for (j, q) in row {
                    if *j >= self.k {
                        return Err(Self::invalid(format!("target group {j} out of range")));
                    }
                    if *q <= Rational::zero() || *q > Rational::one() {
                        return Err(Self::invalid(format!(
                            "probability {} outside (0,1]",
                            format_rational(q)
                        )));
                    }
                    sum += q;
                }
                if !sum.is_one() {
                    return Err(Self::invalid(format!(
                        "row for state {s} given group {g} sums to {}",
                        format_rational(&sum)
                    )));
                }
            }
        }
        for s in 0..samples.n_pos_states() {
            if samples.is_root(s) {
                // roots: Dirac on the start group under every condition
                if self.grouping[s].len() != self.k {
                    return Err(Self::invalid("root grouping must be total"));
                }
                for row in self.grouping[s].values() {
                    if row.len() != 1 || !row.contains_key(&self.start_group) {
                        return Err(Self::invalid("root grouping must be Dirac on the start group"));
                    }
                }
            } else {
                // defined exactly where the parent has positive mass
                let parent = samples.parent(s).expect("non-root has a parent").parent;
                let parent_groups = self.membership_of(parent);
                let domain: BTreeSet<usize> = self.grouping[s].keys().copied().collect();
                if domain != parent_groups {
                    return Err(Self::invalid(format!(
                        "state {s} grouping domain {:?} differs from parent membership {:?}",
                        domain, parent_groups
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn start_group(&self) -> usize {
        self.start_group
    }

    /// [s](g), if defined.
    pub fn row(&self, s: GlobalId, g: usize) -> Option<&BTreeMap<usize, Rational>> {
        self.grouping[s].get(&g)
    }

    /// The groups `s` belongs to: those it enters with positive probability
    /// under some condition.
    pub fn membership_of(&self, s: GlobalId) -> BTreeSet<usize> {
        self.grouping[s]
            .values()
            .flat_map(|row| row.keys().copied())
            .collect()
    }

    /// Group extents (index -> member states); may contain empty groups.
    pub fn groups(&self) -> Vec<BTreeSet<GlobalId>> {
        let mut out = vec![BTreeSet::new(); self.k];
        for s in 0..self.grouping.len() {
            for g in self.membership_of(s) {
                out[g].insert(s);
            }
        }
        out
    }

    pub fn n_nonempty_groups(&self) -> usize {
        self.groups().iter().filter(|g| !g.is_empty()).count()
    }

    /// The degenerate stochastic partition equivalent to a classical
    /// partition: every grouping distribution is Dirac on the state's class.
    pub fn from_partition(samples: &SampleSet, p: &Partition) -> Self {
        let k = p.n_classes();
        let start_group = p.start_class(samples);
        let mut grouping = vec![BTreeMap::new(); samples.n_pos_states()];
        for s in 0..samples.n_pos_states() {
            let dirac: BTreeMap<usize, Rational> = [(p.class_of(s), Rational::one())].into();
            if samples.is_root(s) {
                for g in 0..k {
                    grouping[s].insert(g, dirac.clone());
                }
            } else {
                let parent = samples.parent(s).unwrap().parent;
                grouping[s].insert(p.class_of(parent), dirac);
            }
        }
        StochasticPartition {
            k,
            start_group,
            grouping,
        }
    }
}

/// The quotient of a stochastic partition: one state per non-empty group;
/// each sample transition s ->a mu, taken from each group g containing s,
/// is lifted to g ->a lift(mu, g) where each child's mass is redistributed
/// by its grouping distribution conditioned on g.
pub fn stochastic_quotient(samples: &SampleSet, sp: &StochasticPartition) -> Result<Lpts, LearnError> {
    let groups = sp.groups();
    // empty groups carry no states and are unreachable; drop them
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for (g, members) in groups.iter().enumerate() {
        if !members.is_empty() {
            let next = remap.len();
            remap.insert(g, next);
        }
    }
    let states: Vec<String> = remap.keys().map(|g| format!("g{g}")).collect();
    let start = *remap
        .get(&sp.start_group())
        .ok_or_else(|| StochasticPartition::invalid("start group is empty"))?;

    let mut transitions = Vec::new();
    for (src, action, target) in samples.pos_transitions() {
        for g in sp.membership_of(src) {
            let mut entries: BTreeMap<StateId, Rational> = BTreeMap::new();
            for (child, prob) in &target {
                let row = sp.row(*child, g).ok_or_else(|| {
                    StochasticPartition::invalid(format!(
                        "state {child} has no grouping under group {g}"
                    ))
                })?;
                for (j, q) in row {
                    *entries
                        .entry(StateId(remap[j]))
                        .or_insert_with(Rational::zero) += q * prob;
                }
            }
            let dist = Distribution::new(entries)
                .map_err(|e| StochasticPartition::invalid(format!("lifted distribution: {e}")))?;
            transitions.push(Transition {
                source: StateId(remap[&g]),
                action: action.clone(),
                target: dist,
            });
        }
    }
    Lpts::new("quotient", states, StateId(start), samples.alphabet(), transitions)
        .map_err(|e| StochasticPartition::invalid(e.to_string()))
}

/// Builds a stochastic partition with one group per state of `l` from an
/// existing simulation of every positive sample by `l`: a child `s'` with
/// parent in the group of `t` is redistributed among the groups of the
/// right-hand states `t'` in proportion w(s',t')/mu(s'), where w is the
/// weight function of the (deterministically chosen) matching transition.
pub fn stochastic_partition_from_simulation(
    samples: &SampleSet,
    l: &Lpts,
) -> Result<StochasticPartition, LearnError> {
    let k = l.n_states();
    let start_group = l.start().0;
    let mut grouping: Vec<BTreeMap<usize, BTreeMap<usize, Rational>>> =
        vec![BTreeMap::new(); samples.n_pos_states()];

    for (i, pos) in samples.positives().iter().enumerate() {
        let rel = coarsest_simulation(pos, l);
        if !rel.contains(pos.start(), l.start()) {
            return Err(LearnError::PositiveNotSimulated);
        }
        let root = samples.global(i, pos.start());
        for g in 0..k {
            grouping[root].insert(g, [(start_group, Rational::one())].into());
        }
        // membership develops top-down; transitions are sorted, so states
        // are reached only after their unique parents (trees), and a BFS
        // over depths processes parents before children
        let mut pending: Vec<StateId> = vec![pos.start()];
        let mut visited: BTreeSet<StateId> = [pos.start()].into();
        while let Some(s) = pending.pop() {
            let gs = samples.global(i, s);
            let member: BTreeSet<usize> = grouping[gs]
                .values()
                .flat_map(|row| row.keys().copied())
                .collect();
            for tr in pos.transitions_from(s) {
                for g in &member {
                    let t = StateId(*g);
                    // first matching right transition in canonical order
                    let w = l
                        .transitions_on(t, &tr.action)
                        .find_map(|t2| match dist_leq(&tr.target, &t2.target, &rel) {
                            DistCompare::Related(w) => Some(w),
                            DistCompare::NotRelated(_) => None,
                        })
                        .expect("membership implies a matching transition");
                    for (child, p) in tr.target.iter() {
                        let gc = samples.global(i, child);
                        let mut row: BTreeMap<usize, Rational> = BTreeMap::new();
                        for ((_, t2), wv) in w.iter().filter(|((s1, _), _)| *s1 == child) {
                            row.insert(t2.0, wv / p);
                        }
                        grouping[gc].insert(*g, row);
                    }
                }
                for (child, _) in tr.target.iter() {
                    if visited.insert(child) {
                        pending.push(child);
                    }
                }
            }
        }
    }

    StochasticPartition::new(samples, k, start_group, grouping)
}

#[derive(Debug, Clone)]
pub enum Backend {
    Enumerate,
    Solver(SolverConfig),
}

#[derive(Debug, Clone)]
pub enum Witness {
    Partition(Partition),
    Stochastic(StochasticPartition),
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub k: usize,
    pub sat: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    pub quotient: Lpts,
    pub witness: Witness,
    pub size: usize,
    pub search_trace: Vec<TraceEntry>,
}

/// All class assignments for the positive states with at most `k` classes,
/// roots pinned to class 0, in restricted-growth order.
fn enumerate_assignments(samples: &SampleSet, k: usize) -> Vec<Vec<usize>> {
    let n = samples.n_pos_states();
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(
        samples: &SampleSet,
        k: usize,
        i: usize,
        max_used: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == current.len() {
            out.push(current.clone());
            return;
        }
        if samples.is_root(i) {
            current[i] = 0;
            rec(samples, k, i + 1, max_used, current, out);
            return;
        }
        let cap = (max_used + 1).min(k - 1);
        for c in 0..=cap {
            current[i] = c;
            rec(samples, k, i + 1, max_used.max(c), current, out);
        }
    }
    rec(samples, k, 0, 0, &mut current, &mut out);
    out
}

fn find_consistent_partition(samples: &SampleSet, k: usize) -> Option<Partition> {
    let candidates = enumerate_assignments(samples, k);
    let check = |assignment: &Vec<usize>| -> Option<Partition> {
        let p = Partition::new(samples, assignment.clone()).ok()?;
        if p.n_classes() > k {
            return None;
        }
        let q = quotient(samples, &p);
        is_consistent(samples, &q).then_some(p)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        candidates.par_iter().find_map_first(check)
    }
    #[cfg(not(feature = "parallel"))]
    {
        candidates.iter().find_map(check)
    }
}

/// Least class count admitting a consistent partition, searched by
/// incrementing k from 1. Both backends agree on the minimal k; the
/// enumerate backend is exhaustive and suited to small sample sets only.
pub fn learn_min_partition(
    samples: &SampleSet,
    backend: &Backend,
    max_k: usize,
) -> Result<LearnResult, LearnError> {
    learn_min_partition_from(samples, backend, 1, max_k)
}

/// As [`learn_min_partition`], but the search starts at `min_k`. Sound as a
/// resume point when `min_k` is a known lower bound — e.g. the minimum found
/// for a subset of the current samples, since adding samples never shrinks
/// the minimum.
pub fn learn_min_partition_from(
    samples: &SampleSet,
    backend: &Backend,
    min_k: usize,
    max_k: usize,
) -> Result<LearnResult, LearnError> {
    if !consistency_exists(samples).exists {
        return Err(LearnError::Inconsistent);
    }
    let mut trace = Vec::new();
    for k in min_k.max(1)..=max_k {
        let t0 = Instant::now();
        let witness: Option<Partition> = match backend {
            Backend::Enumerate => find_consistent_partition(samples, k),
            Backend::Solver(cfg) => {
                let script = smt::encode_partition(samples, k);
                let verdict = smt::solve(&script, cfg)?;
                match verdict.status {
                    smt::Status::Sat => Some(smt::decode_partition(&verdict, samples, k)?),
                    smt::Status::Unsat => None,
                    other => {
                        return Err(SmtError::Unexpected(format!(
                            "solver returned {other:?} for partition size {k}"
                        ))
                        .into())
                    }
                }
            }
        };
        trace.push(TraceEntry {
            k,
            sat: witness.is_some(),
            elapsed: t0.elapsed(),
        });
        if let Some(p) = witness {
            let q = quotient(samples, &p);
            // decoded witnesses are revalidated through the independent
            // quotient/consistency path
            if !is_consistent(samples, &q) {
                return Err(SmtError::Unexpected(
                    "decoded partition is not consistent".into(),
                )
                .into());
            }
            return Ok(LearnResult {
                quotient: q,
                size: p.n_classes(),
                witness: Witness::Partition(p),
                search_trace: trace,
            });
        }
    }
    Err(LearnError::MaxKExceeded { tried: max_k })
}

/// Least group count admitting a consistent stochastic partition. The
/// grouping probabilities are continuous unknowns, so only the solver
/// backend applies.
pub fn learn_min_stochastic(
    samples: &SampleSet,
    cfg: &SolverConfig,
    max_k: usize,
) -> Result<LearnResult, LearnError> {
    learn_min_stochastic_from(samples, cfg, 1, max_k)
}

/// As [`learn_min_stochastic`], but the search starts at `min_k` (see
/// [`learn_min_partition_from`] for when this is sound).
pub fn learn_min_stochastic_from(
    samples: &SampleSet,
    cfg: &SolverConfig,
    min_k: usize,
    max_k: usize,
) -> Result<LearnResult, LearnError> {
    if !consistency_exists(samples).exists {
        return Err(LearnError::Inconsistent);
    }
    let mut trace = Vec::new();
    for k in min_k.max(1)..=max_k {
        let t0 = Instant::now();
        let script = smt::encode_stochastic(samples, k);
        let verdict = smt::solve(&script, cfg)?;
        let witness = match verdict.status {
            smt::Status::Sat => Some(smt::decode_stochastic(&verdict, samples, k)?),
            smt::Status::Unsat => None,
            other => {
                return Err(SmtError::Unexpected(format!(
                    "solver returned {other:?} for stochastic size {k}"
                ))
                .into())
            }
        };
        trace.push(TraceEntry {
            k,
            sat: witness.is_some(),
            elapsed: t0.elapsed(),
        });
        if let Some(sp) = witness {
            let q = stochastic_quotient(samples, &sp)?;
            if !is_consistent(samples, &q) {
                return Err(SmtError::Unexpected(
                    "decoded stochastic partition is not consistent".into(),
                )
                .into());
            }
            return Ok(LearnResult {
                quotient: q,
                size: sp.n_nonempty_groups(),
                witness: Witness::Stochastic(sp),
                search_trace: trace,
            });
        }
    }
    Err(LearnError::MaxKExceeded { tried: max_k })
}

/// Witness file, classical form: one `class` line per class, states by
/// qualified name.
pub fn serialize_partition(samples: &SampleSet, p: &Partition) -> String {
    let mut out = String::from("partition\n");
    out.push_str(&format!("start-class {}\n", p.start_class(samples)));
    for (i, class) in p.classes().iter().enumerate() {
        let names: Vec<&str> = class.iter().map(|g| samples.global_name(*g)).collect();
        out.push_str(&format!("class {i}: {}\n", names.join(" ")));
    }
    out
}

fn name_index(samples: &SampleSet) -> BTreeMap<String, GlobalId> {
    (0..samples.n_pos_states())
        .map(|g| (samples.global_name(g).to_string(), g))
        .collect()
}

pub fn parse_partition(text: &str, samples: &SampleSet) -> Result<Partition, LearnError> {
    let index = name_index(samples);
    let mut class_of = vec![usize::MAX; samples.n_pos_states()];
    let mut n_classes = 0usize;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line == "partition" || line.starts_with("start-class") {
            continue;
        }
        let rest = line
            .strip_prefix("class ")
            .ok_or_else(|| LearnError::InvalidPartition(format!("bad line `{line}`")))?;
        let (idx, names) = rest
            .split_once(':')
            .ok_or_else(|| LearnError::InvalidPartition(format!("bad line `{line}`")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| LearnError::InvalidPartition(format!("bad class index `{idx}`")))?;
        n_classes = n_classes.max(idx + 1);
        for name in names.split_whitespace() {
            let g = *index
                .get(name)
                .ok_or_else(|| LearnError::InvalidPartition(format!("unknown state `{name}`")))?;
            class_of[g] = idx;
        }
    }
    if class_of.contains(&usize::MAX) {
        return Err(LearnError::InvalidPartition("not a cover".into()));
    }
    Partition::new(samples, class_of)
}

/// Witness file, stochastic form: a `row` line per defined conditional
/// distribution.
pub fn serialize_stochastic(samples: &SampleSet, sp: &StochasticPartition) -> String {
    let mut out = String::from("stochastic-partition\n");
    out.push_str(&format!("groups {}\n", sp.k()));
    out.push_str(&format!("start-group {}\n", sp.start_group()));
    for s in 0..samples.n_pos_states() {
        for g in 0..sp.k() {
            if let Some(row) = sp.row(s, g) {
                let items: Vec<String> = row
                    .iter()
                    .map(|(j, q)| format!("{j}: {}", format_rational(q)))
                    .collect();
                out.push_str(&format!(
                    "row {} {g}: {}\n",
                    samples.global_name(s),
                    items.join(", ")
                ));
            }
        }
    }
    out
}

pub fn parse_stochastic(
    text: &str,
    samples: &SampleSet,
) -> Result<StochasticPartition, LearnError> {
    let bad = |msg: String| LearnError::InvalidStochasticPartition(msg);
    let index = name_index(samples);
    let mut k = None;
    let mut start_group = None;
    let mut grouping: Vec<BTreeMap<usize, BTreeMap<usize, Rational>>> =
        vec![BTreeMap::new(); samples.n_pos_states()];
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line == "stochastic-partition" {
            continue;
        }
        if let Some(v) = line.strip_prefix("groups ") {
            k = Some(v.trim().parse().map_err(|_| bad(format!("bad k `{v}`")))?);
        } else if let Some(v) = line.strip_prefix("start-group ") {
            start_group = Some(v.trim().parse().map_err(|_| bad(format!("bad start `{v}`")))?);
        } else if let Some(rest) = line.strip_prefix("row ") {
            let (head, items) = rest
                .split_once(':')
                .ok_or_else(|| bad(format!("bad line `{line}`")))?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let [name, g] = parts[..] else {
                return Err(bad(format!("bad row head `{head}`")));
            };
            let s = *index
                .get(name)
                .ok_or_else(|| bad(format!("unknown state `{name}`")))?;
            let g: usize = g.parse().map_err(|_| bad(format!("bad group `{g}`")))?;
            let mut row = BTreeMap::new();
            for item in items.split(',') {
                let (j, q) = item
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad row item `{item}`")))?;
                let j: usize = j
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad group `{j}`")))?;
                let q =
                    parse_rational(q).ok_or_else(|| bad(format!("bad probability `{q}`")))?;
                row.insert(j, q);
            }
            grouping[s].insert(g, row);
        } else {
            return Err(bad(format!("bad line `{line}`")));
        }
    }
    StochasticPartition::new(
        samples,
        k.ok_or_else(|| bad("missing groups line".into()))?,
        start_group.ok_or_else(|| bad("missing start-group line".into()))?,
        grouping,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::text::parse_lpts;

    fn tree(text: &str) -> Lpts {
        parse_lpts(text).unwrap()
    }

    fn branching() -> Lpts {
        tree(
            "lpts p\nalphabet a b\nstates z x y w\nstart z\n\
             trans z a { x: 1/2, y: 1/2 }\ntrans x b { w: 1 }\n",
        )
    }

    #[test]
    fn singleton_partition_is_isomorphic_quotient() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let p = Partition::new(&s, vec![0, 1, 2, 3]).unwrap();
        let q = quotient(&s, &p);
        assert_eq!(q.n_states(), 4);
        assert!(crate::simulation::equivalent(&q, &branching()).equal);
    }

    #[test]
    fn all_in_one_quotient_has_self_loops() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let p = Partition::new(&s, vec![0, 0, 0, 0]).unwrap();
        let q = quotient(&s, &p);
        assert_eq!(q.n_states(), 1);
        // one Dirac self-loop per sample action
        assert_eq!(q.transitions().len(), 2);
        assert!(q.transitions().iter().all(|t| t.target.is_dirac()));
    }

    #[test]
    fn two_class_lift_sums_masses() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        // {z}, {x, y, w}
        let p = Partition::new(&s, vec![0, 1, 1, 1]).unwrap();
        let q = quotient(&s, &p);
        let t = q.transitions_from(StateId(0)).next().unwrap();
        assert_eq!(t.target.prob(StateId(1)), rat(1, 1));
    }

    #[test]
    fn roots_must_share_a_class() {
        let chain = tree("lpts c\nalphabet a\nstates z0 z1\nstart z0\ntrans z0 a { z1: 1 }\n");
        let s = SampleSet::new(vec![chain.clone(), chain], vec![]).unwrap();
        assert!(Partition::new(&s, vec![0, 1, 2, 3]).is_err());
        assert!(Partition::new(&s, vec![0, 1, 0, 3]).is_ok());
    }

    #[test]
    fn partition_from_simulation_quotient_below_model() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let merged = s.merged();
        let p = partition_from_simulation(&s, &merged).unwrap();
        let q = quotient(&s, &p);
        assert!(simulates(&q, &merged).holds);
        // single-state self-loop cover collapses everything into one class
        let cover = tree(
            "lpts u\nalphabet a b\nstates v\nstart v\n\
             trans v a { v: 1 }\ntrans v b { v: 1 }\n",
        );
        let p1 = partition_from_simulation(&s, &cover).unwrap();
        assert_eq!(p1.n_classes(), 1);
    }

    #[test]
    fn degenerate_stochastic_equals_classical() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let p = Partition::new(&s, vec![0, 1, 1, 0]).unwrap();
        let sp = StochasticPartition::from_partition(&s, &p);
        sp.validate(&s).unwrap();
        let q1 = quotient(&s, &p);
        let q2 = stochastic_quotient(&s, &sp).unwrap();
        // identical up to state naming: same shape, same transitions
        assert_eq!(q1.n_states(), q2.n_states());
        let renamed = q2.rename_states(|n| n.replace('g', "c"));
        assert_eq!(q1.transitions(), renamed.transitions());
        assert_eq!(q1.start(), renamed.start());
    }

    #[test]
    fn stochastic_partition_from_simulation_post_check() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let merged = s.merged();
        let sp = stochastic_partition_from_simulation(&s, &merged).unwrap();
        assert!(sp.n_nonempty_groups() <= merged.n_states());
        let q = stochastic_quotient(&s, &sp).unwrap();
        assert!(simulates(&q, &merged).holds);
    }

    #[test]
    fn learn_min_no_negatives_is_one() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let r = learn_min_partition(&s, &Backend::Enumerate, 4).unwrap();
        assert_eq!(r.size, 1);
        assert_eq!(r.search_trace.len(), 1);
    }

    #[test]
    fn witness_serialization_round_trips() {
        let s = SampleSet::new(vec![branching()], vec![]).unwrap();
        let p = Partition::new(&s, vec![0, 1, 2, 1]).unwrap();
        let text = serialize_partition(&s, &p);
        assert_eq!(parse_partition(&text, &s).unwrap(), p);

        let sp = StochasticPartition::from_partition(&s, &p);
        let text = serialize_stochastic(&s, &sp);
        assert_eq!(parse_stochastic(&text, &s).unwrap(), sp);
    }
}
