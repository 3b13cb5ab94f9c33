//! Interval lattice automata.
//!
//! A [`LatticeAutomaton`] is a finite automaton over the infinite alphabet
//! `R^d` whose transitions carry [`IntervalBox`] labels. Two structural
//! properties hold at all times:
//!
//! 1. every label lies inside a single class of the automaton's [`Partition`];
//! 2. between two states there is at most one transition per class.
//!
//! [`LatticeAutomaton::add_transition`] keeps both by joining a new label
//! into an existing same-class transition instead of adding a second one.
//! Each state also carries a box `gamma` over-approximating the hidden
//! vectors that were observed there; it plays no part in the language.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Interval, IntervalBox, LatticeError, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("cannot merge state {0} into itself")]
    SameState(StateId),
    #[error("letter {index} has dimension {found}, expected {expected}")]
    LetterDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("malformed automaton: {0}")]
    Malformed(String),
}

/// Borrowed view of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<'a> {
    pub source: StateId,
    pub class: usize,
    pub label: &'a IntervalBox,
    pub target: StateId,
}

type Targets = BTreeMap<StateId, IntervalBox>;

#[derive(Debug, Clone)]
pub struct LatticeAutomaton {
    dim: usize,
    partition: Partition,
    next_id: usize,
    states: BTreeSet<StateId>,
    initial: BTreeSet<StateId>,
    finals: BTreeSet<StateId>,
    // source -> class -> target -> label
    delta: BTreeMap<StateId, BTreeMap<usize, Targets>>,
    // target -> sources with at least one transition into it
    preds: BTreeMap<StateId, BTreeSet<StateId>>,
    gamma: BTreeMap<StateId, IntervalBox>,
}

impl PartialEq for LatticeAutomaton {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.partition == other.partition
            && self.states == other.states
            && self.initial == other.initial
            && self.finals == other.finals
            && self.delta == other.delta
            && self.gamma == other.gamma
    }
}

impl LatticeAutomaton {
    /// An automaton without states over `partition.dim()`-dimensional letters.
    pub fn new(partition: Partition) -> Self {
        LatticeAutomaton {
            dim: partition.dim(),
            partition,
            next_id: 0,
            states: BTreeSet::new(),
            initial: BTreeSet::new(),
            finals: BTreeSet::new(),
            delta: BTreeMap::new(),
            preds: BTreeMap::new(),
            gamma: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn add_state(&mut self, is_final: bool, gamma: IntervalBox) -> StateId {
        let q = StateId(self.next_id);
        self.next_id += 1;
        self.states.insert(q);
        if is_final {
            self.finals.insert(q);
        }
        self.gamma.insert(q, gamma);
        q
    }

    fn check(&self, q: StateId) -> Result<(), AutomatonError> {
        if self.states.contains(&q) {
            Ok(())
        } else {
            Err(AutomatonError::UnknownState(q))
        }
    }

    pub fn contains_state(&self, q: StateId) -> bool {
        self.states.contains(&q)
    }

    pub fn set_initial(&mut self, q: StateId, initial: bool) -> Result<(), AutomatonError> {
        self.check(q)?;
        if initial {
            self.initial.insert(q);
        } else {
            self.initial.remove(&q);
        }
        Ok(())
    }

    pub fn set_final(&mut self, q: StateId, is_final: bool) -> Result<(), AutomatonError> {
        self.check(q)?;
        if is_final {
            self.finals.insert(q);
        } else {
            self.finals.remove(&q);
        }
        Ok(())
    }

    pub fn is_initial(&self, q: StateId) -> bool {
        self.initial.contains(&q)
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.states.iter().copied()
    }

    pub fn initial_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.initial.iter().copied()
    }

    pub fn final_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.finals.iter().copied()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta
            .values()
            .flat_map(|by_class| by_class.values())
            .map(BTreeMap::len)
            .sum()
    }

    /// `Γ(q)`; bottom for states that never saw a hidden vector.
    pub fn gamma(&self, q: StateId) -> Option<&IntervalBox> {
        self.gamma.get(&q)
    }

    pub fn set_gamma(&mut self, q: StateId, value: IntervalBox) -> Result<(), AutomatonError> {
        self.check(q)?;
        self.gamma.insert(q, value);
        Ok(())
    }

    /// `Γ(q) <- Γ(q) ⊔ value`.
    pub fn join_gamma(&mut self, q: StateId, value: &IntervalBox) -> Result<(), AutomatonError> {
        self.check(q)?;
        self.gamma.entry(q).or_insert(IntervalBox::Bottom).join_assign(value)?;
        Ok(())
    }

    /// All transitions in (source, class, target) order.
    pub fn transitions(&self) -> impl Iterator<Item = Transition<'_>> + '_ {
        self.delta.iter().flat_map(|(&source, by_class)| {
            by_class.iter().flat_map(move |(&class, targets)| {
                targets.iter().map(move |(&target, label)| Transition {
                    source,
                    class,
                    label,
                    target,
                })
            })
        })
    }

    pub fn outgoing(&self, q: StateId) -> impl Iterator<Item = Transition<'_>> + '_ {
        self.delta.get(&q).into_iter().flat_map(move |by_class| {
            by_class.iter().flat_map(move |(&class, targets)| {
                targets.iter().map(move |(&target, label)| Transition {
                    source: q,
                    class,
                    label,
                    target,
                })
            })
        })
    }

    /// Transitions of one class leaving `q`, as `(target, label)` pairs.
    pub fn successors(&self, q: StateId, class: usize) -> impl Iterator<Item = (StateId, &IntervalBox)> {
        self.delta
            .get(&q)
            .and_then(|by_class| by_class.get(&class))
            .into_iter()
            .flat_map(|targets| targets.iter().map(|(&t, l)| (t, l)))
    }

    pub fn incoming(&self, q: StateId) -> Vec<Transition<'_>> {
        let Some(sources) = self.preds.get(&q) else {
            return Vec::new();
        };
        sources
            .iter()
            .flat_map(|&s| self.outgoing(s).filter(move |t| t.target == q))
            .collect()
    }

    /// The label of the `class` transition from `q` to `q2`, if any.
    pub fn label(&self, q: StateId, class: usize, q2: StateId) -> Option<&IntervalBox> {
        self.delta.get(&q)?.get(&class)?.get(&q2)
    }

    /// Adds `(q, label, q2)`, joining it into an existing transition of the
    /// same class between the same two states. Returns the label's class.
    pub fn add_transition(&mut self, q: StateId, label: &IntervalBox, q2: StateId) -> Result<usize, AutomatonError> {
        self.check(q)?;
        self.check(q2)?;
        let class = self.partition.class_of(label)?;
        let slot = self.delta.entry(q).or_default().entry(class).or_default().entry(q2);
        match slot {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                e.get_mut().join_assign(label)?;
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(label.clone());
            }
        }
        self.preds.entry(q2).or_default().insert(q);
        Ok(class)
    }

    /// Removes `q` together with every transition entering or leaving it.
    pub fn delete_state(&mut self, q: StateId) -> Result<(), AutomatonError> {
        self.check(q)?;
        if let Some(by_class) = self.delta.remove(&q) {
            let targets: BTreeSet<StateId> = by_class.values().flat_map(|t| t.keys().copied()).collect();
            for t in targets {
                if let Some(p) = self.preds.get_mut(&t) {
                    p.remove(&q);
                }
            }
        }
        if let Some(sources) = self.preds.remove(&q) {
            for s in sources {
                if let Some(by_class) = self.delta.get_mut(&s) {
                    by_class.retain(|_, targets| {
                        targets.remove(&q);
                        !targets.is_empty()
                    });
                    if by_class.is_empty() {
                        self.delta.remove(&s);
                    }
                }
            }
        }
        self.states.remove(&q);
        self.initial.remove(&q);
        self.finals.remove(&q);
        self.gamma.remove(&q);
        Ok(())
    }

    fn check_letter(&self, index: usize, letter: &[f64]) -> Result<(), AutomatonError> {
        if letter.len() != self.dim {
            return Err(AutomatonError::LetterDimension {
                index,
                expected: self.dim,
                found: letter.len(),
            });
        }
        Ok(())
    }

    /// States reachable from `from` by reading `letter`.
    pub fn step(&self, from: &BTreeSet<StateId>, letter: &[f64]) -> Result<BTreeSet<StateId>, AutomatonError> {
        self.check_letter(0, letter)?;
        let class = self.partition.class_of_point(letter)?;
        let mut next = BTreeSet::new();
        for &q in from {
            for (target, label) in self.successors(q, class) {
                if label.contains_point(letter)? {
                    next.insert(target);
                }
            }
        }
        Ok(next)
    }

    /// States reachable from some initial state by reading `word`.
    pub fn run<W: AsRef<[f64]>>(&self, word: &[W]) -> Result<BTreeSet<StateId>, AutomatonError> {
        let mut current = self.initial.clone();
        for (index, letter) in word.iter().enumerate() {
            let letter = letter.as_ref();
            self.check_letter(index, letter)?;
            if current.is_empty() {
                continue;
            }
            current = self.step(&current, letter)?;
        }
        Ok(current)
    }

    /// Membership by simulating the set of reachable states.
    pub fn accepts<W: AsRef<[f64]>>(&self, word: &[W]) -> Result<bool, AutomatonError> {
        Ok(self.run(word)?.iter().any(|q| self.finals.contains(q)))
    }

    /// Full scan of the structural invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), AutomatonError> {
        let bad = |m: String| Err(AutomatonError::Malformed(m));
        for q in self.initial.iter().chain(&self.finals) {
            if !self.states.contains(q) {
                return bad(format!("{q} is initial or final but not a state"));
            }
        }
        for q in &self.states {
            if !self.gamma.contains_key(q) {
                return bad(format!("{q} has no gamma entry"));
            }
        }
        for t in self.transitions() {
            if !self.states.contains(&t.source) || !self.states.contains(&t.target) {
                return bad(format!(
                    "transition {} -> {} has an unknown endpoint",
                    t.source, t.target
                ));
            }
            match self.partition.class_of(t.label) {
                Ok(c) if c == t.class => {}
                _ => {
                    return bad(format!(
                        "label {} of {} -> {} is not pure in class {}",
                        t.label, t.source, t.target, t.class
                    ))
                }
            }
            if !self.preds.get(&t.target).is_some_and(|p| p.contains(&t.source)) {
                return bad(format!("predecessor index misses {} -> {}", t.source, t.target));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// file format

#[derive(Serialize, Deserialize)]
struct TransitionRepr {
    source: StateId,
    class: usize,
    label: Vec<Interval>,
    target: StateId,
}

#[derive(Serialize, Deserialize)]
struct GammaRepr {
    state: StateId,
    #[serde(rename = "box")]
    value: IntervalBox,
}

#[derive(Serialize, Deserialize)]
struct AutomatonRepr {
    dim: usize,
    partition: Partition,
    states: Vec<StateId>,
    initial: Vec<StateId>,
    #[serde(rename = "final")]
    finals: Vec<StateId>,
    transitions: Vec<TransitionRepr>,
    gamma: Vec<GammaRepr>,
}

impl Serialize for LatticeAutomaton {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AutomatonRepr {
            dim: self.dim,
            partition: self.partition.clone(),
            states: self.states.iter().copied().collect(),
            initial: self.initial.iter().copied().collect(),
            finals: self.finals.iter().copied().collect(),
            transitions: self
                .transitions()
                .map(|t| TransitionRepr {
                    source: t.source,
                    class: t.class,
                    label: t.label.intervals().to_vec(),
                    target: t.target,
                })
                .collect(),
            gamma: self
                .gamma
                .iter()
                .map(|(&state, value)| GammaRepr {
                    state,
                    value: value.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeAutomaton {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = AutomatonRepr::deserialize(d)?;
        LatticeAutomaton::from_repr(r).map_err(D::Error::custom)
    }
}

impl LatticeAutomaton {
    fn from_repr(r: AutomatonRepr) -> Result<Self, AutomatonError> {
        if r.dim != r.partition.dim() {
            return Err(AutomatonError::Malformed(format!(
                "dim {} disagrees with partition dimension {}",
                r.dim,
                r.partition.dim()
            )));
        }
        let mut a = LatticeAutomaton::new(r.partition);
        a.states = r.states.iter().copied().collect();
        if a.states.len() != r.states.len() {
            return Err(AutomatonError::Malformed("duplicate state ids".into()));
        }
        a.next_id = a.states.iter().next_back().map_or(0, |q| q.0 + 1);
        a.gamma = a.states.iter().map(|&q| (q, IntervalBox::Bottom)).collect();
        for q in r.initial {
            a.set_initial(q, true)?;
        }
        for q in r.finals {
            a.set_final(q, true)?;
        }
        for g in r.gamma {
            a.set_gamma(g.state, g.value)?;
        }
        for t in r.transitions {
            let label = IntervalBox::new(t.label)?;
            if a.label(t.source, t.class, t.target).is_some() {
                return Err(AutomatonError::Malformed(format!(
                    "two class-{} transitions {} -> {}",
                    t.class, t.source, t.target
                )));
            }
            let class = a.add_transition(t.source, &label, t.target)?;
            if class != t.class {
                return Err(AutomatonError::Malformed(format!(
                    "label {label} is in class {class}, file says {}",
                    t.class
                )));
            }
        }
        Ok(a)
    }
}
