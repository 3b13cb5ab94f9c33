//! Interval prefix tree automaton (IPTA) construction.
//!
//! Traces are threaded through a tree rooted at `q0`. A state has at most one
//! outgoing transition per partition class; a letter whose class already has
//! a transition widens that transition's label to include the letter, and
//! widens `Γ` of the target with the observed hidden vector. Otherwise a new
//! state is created.
//!
//! Construction requires the trace set to be coherent with the partition:
//! two prefixes reading the same sequence of classes must end on the same
//! output. A violation means the partition is too coarse and is reported as
//! a [`CoherenceConflict`].

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::automaton::{AutomatonError, LatticeAutomaton, StateId};
use crate::lattice::{IntervalBox, Partition};
use crate::trace::{Trace, TraceError, TraceSet};

/// A prefix of length `len` of trace number `trace`. Length 0 is the empty
/// prefix, whose output is the trace's `y0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixRef {
    pub trace: usize,
    pub len: usize,
}

impl fmt::Display for PrefixRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trace {} prefix of length {}", self.trace, self.len)
    }
}

/// Two prefixes with the same class sequence and different outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceConflict {
    pub first: PrefixRef,
    pub second: PrefixRef,
    pub classes: Vec<usize>,
    pub first_output: bool,
    pub second_output: bool,
}

impl fmt::Display for CoherenceConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (y={}) and {} (y={}) share class sequence {:?}",
            self.first, self.first_output as u8, self.second, self.second_output as u8, self.classes
        )
    }
}

#[derive(Debug, Error)]
pub enum IptaError {
    #[error("trace set is not coherent with the partition: {0}")]
    Coherence(CoherenceConflict),
    #[error("trace {trace}: letters have dimension {found}, partition has {expected}")]
    Dimension {
        trace: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

/// Incremental IPTA construction.
#[derive(Debug, Clone)]
pub struct IptaBuilder {
    automaton: LatticeAutomaton,
    root: StateId,
    // first prefix that reached each state, for conflict reports
    witness: HashMap<StateId, PrefixRef>,
    root_output: Option<(bool, PrefixRef)>,
    root_hidden_seen: bool,
    hidden_dim: Option<usize>,
    added: usize,
}

impl IptaBuilder {
    pub fn new(partition: Partition) -> Self {
        let mut automaton = LatticeAutomaton::new(partition);
        let root = automaton.add_state(false, IntervalBox::Bottom);
        automaton.set_initial(root, true).expect("root exists");
        IptaBuilder {
            automaton,
            root,
            witness: HashMap::new(),
            root_output: None,
            root_hidden_seen: false,
            hidden_dim: None,
            added: 0,
        }
    }

    pub fn root(&self) -> StateId {
        self.root
    }

    pub fn automaton(&self) -> &LatticeAutomaton {
        &self.automaton
    }

    /// Fixes the output of the empty word, i.e. whether `q0` is final.
    pub fn set_root_output(&mut self, y0: bool, source: PrefixRef) -> Result<(), IptaError> {
        match self.root_output {
            Some((prev, first)) if prev != y0 => Err(IptaError::Coherence(CoherenceConflict {
                first,
                second: source,
                classes: Vec::new(),
                first_output: prev,
                second_output: y0,
            })),
            Some(_) => Ok(()),
            None => {
                self.root_output = Some((y0, source));
                self.automaton.set_final(self.root, y0)?;
                Ok(())
            }
        }
    }

    /// Threads one trace through the tree. The automaton is left untouched
    /// when an error is returned.
    pub fn add_sequence(&mut self, s: &Trace) -> Result<(), IptaError> {
        let trace = self.added;
        let partition = self.automaton.partition().clone();
        for step in &s.steps {
            if step.x.len() != partition.dim() {
                return Err(IptaError::Dimension {
                    trace,
                    expected: partition.dim(),
                    found: step.x.len(),
                });
            }
        }
        let classes = s
            .steps
            .iter()
            .map(|step| partition.class_of_point(&step.x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(AutomatonError::from)?;
        let hidden = s
            .steps
            .iter()
            .map(|step| IntervalBox::point(&step.h))
            .collect::<Result<Vec<_>, _>>()
            .map_err(AutomatonError::from)?;
        let letters = s
            .steps
            .iter()
            .map(|step| IntervalBox::point(&step.x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(AutomatonError::from)?;

        // Dry walk along the existing tree: detect conflicts before mutating.
        if let (Some(y0), Some((prev, first))) = (s.y0, self.root_output) {
            if y0 != prev {
                return Err(IptaError::Coherence(CoherenceConflict {
                    first,
                    second: PrefixRef { trace, len: 0 },
                    classes: Vec::new(),
                    first_output: prev,
                    second_output: y0,
                }));
            }
        }
        let mut q = self.root;
        for (k, (step, &class)) in s.steps.iter().zip(&classes).enumerate() {
            let Some((next, _)) = self.automaton.successors(q, class).next() else {
                break;
            };
            let was_final = self.automaton.is_final(next);
            if was_final != step.y {
                return Err(IptaError::Coherence(CoherenceConflict {
                    first: self
                        .witness
                        .get(&next)
                        .copied()
                        .unwrap_or(PrefixRef { trace, len: k + 1 }),
                    second: PrefixRef { trace, len: k + 1 },
                    classes: classes[..=k].to_vec(),
                    first_output: was_final,
                    second_output: step.y,
                }));
            }
            q = next;
        }

        if let Some(y0) = s.y0 {
            self.set_root_output(y0, PrefixRef { trace, len: 0 })?;
        }
        if let Some(h0) = &s.h0 {
            let h0 = IntervalBox::point(h0).map_err(AutomatonError::from)?;
            self.automaton.join_gamma(self.root, &h0)?;
            self.root_hidden_seen = true;
            self.hidden_dim = self.hidden_dim.or(h0.dim());
        }
        let mut q = self.root;
        for (k, step) in s.steps.iter().enumerate() {
            let existing = self.automaton.successors(q, classes[k]).next().map(|(t, _)| t);
            let next = match existing {
                Some(next) => {
                    self.automaton.join_gamma(next, &hidden[k])?;
                    next
                }
                None => {
                    let next = self.automaton.add_state(step.y, hidden[k].clone());
                    self.witness.insert(next, PrefixRef { trace, len: k + 1 });
                    next
                }
            };
            self.automaton.add_transition(q, &letters[k], next)?;
            self.hidden_dim = self.hidden_dim.or(Some(step.h.len()));
            q = next;
        }
        self.added += 1;
        Ok(())
    }

    /// Completes `Γ(q0)` with the zero vector when no trace supplied `h0`.
    pub fn finish(mut self) -> LatticeAutomaton {
        if !self.root_hidden_seen {
            if let Some(m) = self.hidden_dim.filter(|&m| m > 0) {
                let zero = IntervalBox::point(&vec![0.0; m]).expect("finite");
                self.automaton.set_gamma(self.root, zero).expect("root exists");
            }
        }
        self.automaton
    }
}

/// Builds the IPTA of a trace set.
///
/// `q0` is final iff the empty word's output (per-trace `y0`, else the
/// header's `y0_default`) is 1. `Γ(q0)` joins every supplied `h0` and
/// defaults to the zero vector of the hidden dimension.
pub fn build_ipta(set: &TraceSet, partition: &Partition) -> Result<LatticeAutomaton, IptaError> {
    set.validate()?;
    if let Some(d) = set.dim() {
        if d != partition.dim() {
            return Err(IptaError::Dimension {
                trace: 0,
                expected: partition.dim(),
                found: d,
            });
        }
    }
    let mut builder = IptaBuilder::new(partition.clone());
    builder.hidden_dim = set.hidden_dim();
    for t in &set.traces {
        if t.y0.is_none() {
            if let Some(y0) = set.header.y0_default {
                let mut t = t.clone();
                t.y0 = Some(y0);
                builder.add_sequence(&t)?;
                continue;
            }
        }
        builder.add_sequence(t)?;
    }
    if builder.root_output.is_none() {
        if let Some(y0) = set.header.y0_default {
            builder.set_root_output(y0, PrefixRef { trace: 0, len: 0 })?;
        }
    }
    Ok(builder.finish())
}

/// Explicit up-front coherence check over all prefixes of a trace set.
///
/// Independent of the tree builder: it keys prefixes by their class
/// sequences in a trie and compares outputs.
pub fn check_coherence(set: &TraceSet, partition: &Partition) -> Result<(), IptaError> {
    set.validate()?;
    // trie node -> (class -> child); node 0 is the empty prefix
    let mut children: Vec<HashMap<usize, usize>> = vec![HashMap::new()];
    let mut output: Vec<Option<(bool, PrefixRef)>> = vec![None];
    let mut path: Vec<Vec<usize>> = vec![Vec::new()];
    let conflict = |first: (bool, PrefixRef), y: bool, second: PrefixRef, classes: &[usize]| {
        IptaError::Coherence(CoherenceConflict {
            first: first.1,
            second,
            classes: classes.to_vec(),
            first_output: first.0,
            second_output: y,
        })
    };
    for (i, t) in set.traces.iter().enumerate() {
        if let Some(y0) = t.y0.or(set.header.y0_default) {
            let here = PrefixRef { trace: i, len: 0 };
            match output[0] {
                Some(first) if first.0 != y0 => return Err(conflict(first, y0, here, &[])),
                Some(_) => {}
                None => output[0] = Some((y0, here)),
            }
        }
        let mut node = 0;
        for (k, step) in t.steps.iter().enumerate() {
            if step.x.len() != partition.dim() {
                return Err(IptaError::Dimension {
                    trace: i,
                    expected: partition.dim(),
                    found: step.x.len(),
                });
            }
            let class = partition.class_of_point(&step.x).map_err(AutomatonError::from)?;
            node = match children[node].get(&class) {
                Some(&child) => child,
                None => {
                    let child = children.len();
                    let mut p = path[node].clone();
                    p.push(class);
                    children[node].insert(class, child);
                    children.push(HashMap::new());
                    output.push(None);
                    path.push(p);
                    child
                }
            };
            let here = PrefixRef { trace: i, len: k + 1 };
            match output[node] {
                Some(first) if first.0 != step.y => return Err(conflict(first, step.y, here, &path[node])),
                Some(_) => {}
                None => output[node] = Some((step.y, here)),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceStep;

    fn one_step(x: f64, y: bool) -> Trace {
        Trace::new(vec![TraceStep::new(vec![x], vec![x, 1.0], y)])
    }

    #[test]
    fn empty_set_gives_single_state() {
        let a = build_ipta(&TraceSet::default(), &Partition::sign()).unwrap();
        assert_eq!(a.num_states(), 1);
        assert_eq!(a.num_transitions(), 0);
        assert_eq!(a.initial_states().count(), 1);
        assert_eq!(a.final_states().count(), 0);
    }

    #[test]
    fn single_step_trace() {
        let set = TraceSet::new(vec![Trace::new(vec![TraceStep::new(vec![2.5], vec![0.3, -0.2], true)])]);
        let a = build_ipta(&set, &Partition::sign()).unwrap();
        assert_eq!(a.num_states(), 2);
        let t: Vec<_> = a.transitions().collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].label, &IntervalBox::point(&[2.5]).unwrap());
        assert_eq!(a.gamma(t[0].target), Some(&IntervalBox::point(&[0.3, -0.2]).unwrap()));
        assert!(a.is_final(t[0].target));
        // root gets the zero vector of the hidden dimension
        assert_eq!(a.gamma(t[0].source), Some(&IntervalBox::point(&[0.0, 0.0]).unwrap()));
    }

    #[test]
    fn same_class_different_output_conflicts() {
        let set = TraceSet::new(vec![one_step(1.0, true), one_step(2.0, false)]);
        let err = build_ipta(&set, &Partition::sign()).unwrap_err();
        let IptaError::Coherence(c) = err else { panic!("{err}") };
        assert_eq!(c.first, PrefixRef { trace: 0, len: 1 });
        assert_eq!(c.second, PrefixRef { trace: 1, len: 1 });
        assert_eq!(c.classes, vec![1]);
        assert!(matches!(
            check_coherence(&set, &Partition::sign()),
            Err(IptaError::Coherence(_))
        ));
    }

    #[test]
    fn different_classes_are_coherent() {
        let set = TraceSet::new(vec![one_step(1.0, true), one_step(-1.0, false)]);
        check_coherence(&set, &Partition::sign()).unwrap();
        let a = build_ipta(&set, &Partition::sign()).unwrap();
        assert_eq!(a.num_states(), 3);
    }

    #[test]
    fn failed_add_sequence_leaves_builder_untouched() {
        let mut b = IptaBuilder::new(Partition::sign());
        b.add_sequence(&Trace::new(vec![
            TraceStep::new(vec![1.0], vec![0.0], true),
            TraceStep::new(vec![1.0], vec![0.0], true),
        ]))
        .unwrap();
        let before = b.automaton().clone();
        let bad = Trace::new(vec![
            TraceStep::new(vec![5.0], vec![9.0], true),
            TraceStep::new(vec![5.0], vec![9.0], false),
        ]);
        assert!(matches!(b.add_sequence(&bad), Err(IptaError::Coherence(_))));
        assert_eq!(b.automaton(), &before);
    }

    #[test]
    fn root_output_conflict() {
        let mut a = one_step(1.0, true);
        a.y0 = Some(true);
        let mut b = one_step(-1.0, true);
        b.y0 = Some(false);
        let set = TraceSet::new(vec![a, b]);
        assert!(matches!(
            build_ipta(&set, &Partition::sign()),
            Err(IptaError::Coherence(_))
        ));
        assert!(matches!(
            check_coherence(&set, &Partition::sign()),
            Err(IptaError::Coherence(_))
        ));
    }

    #[test]
    fn header_y0_default_makes_root_final() {
        let mut set = TraceSet::new(vec![one_step(1.0, true)]);
        set.header.y0_default = Some(true);
        let a = build_ipta(&set, &Partition::sign()).unwrap();
        let root = a.initial_states().next().unwrap();
        assert!(a.is_final(root));
    }

    #[test]
    fn letter_dimension_mismatch() {
        let set = TraceSet::new(vec![Trace::new(vec![TraceStep::new(vec![1.0, 2.0], vec![0.0], true)])]);
        assert!(matches!(
            build_ipta(&set, &Partition::sign()),
            Err(IptaError::Dimension {
                expected: 1,
                found: 2,
                ..
            })
        ));
    }
}
