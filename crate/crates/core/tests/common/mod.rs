#![allow(dead_code)]

use std::collections::BTreeSet;

use ila::automaton::{LatticeAutomaton, StateId};
use ila::lattice::{Interval, IntervalBox, Partition};
use ila::trace::{Trace, TraceHeader, TraceSet, TraceStep};
use rand::Rng;

/// The four traces of the worked IPTA example over the sign partition.
/// Hidden vectors are made up; the example only fixes letters and outputs.
#[allow(clippy::approx_constant)]
pub fn sample_traces() -> TraceSet {
    let rows: [&[(f64, bool)]; 4] = [
        &[(1.4, true), (-1.07, true), (1.08, true), (-7.06, true), (9.03, true)],
        &[(3.39, true), (-3.2, true), (7.91, true), (-3.45, true), (2.1, true)],
        &[(1.9, true), (3.56, true), (3.14, false), (-33.2, false)],
        &[(2.3, true), (2.29, true), (2.06, false), (-0.51, false)],
    ];
    let traces = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Trace::new(
                row.iter()
                    .enumerate()
                    .map(|(k, &(x, y))| {
                        let h = vec![0.1 * (k + 1) as f64, -0.2 * (i + 1) as f64];
                        TraceStep::new(vec![x], h, y)
                    })
                    .collect(),
            )
        })
        .collect();
    TraceSet::with_header(
        TraceHeader {
            dim: Some(1),
            hidden_dim: Some(2),
            y0_default: Some(true),
        },
        traces,
    )
}

pub fn closed(lo: f64, hi: f64) -> IntervalBox {
    IntervalBox::new(vec![Interval::closed(lo, hi).unwrap()]).unwrap()
}

/// The unique successor of `q` on `class`, if any.
pub fn successor(a: &LatticeAutomaton, q: StateId, class: usize) -> Option<(StateId, IntervalBox)> {
    let mut it = a.successors(q, class);
    let first = it.next().map(|(t, l)| (t, l.clone()));
    assert!(it.next().is_none(), "{q} has several successors on class {class}");
    first
}

/// Letters drawn from a small grid so random words hit label endpoints.
pub const GRID: [f64; 11] = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0];

/// Random automaton over the sign partition with 1..=max_states states.
pub fn random_automaton<R: Rng>(rng: &mut R, max_states: usize) -> LatticeAutomaton {
    let p = Partition::sign();
    let mut a = LatticeAutomaton::new(p.clone());
    let n = rng.random_range(1..=max_states);
    let ids: Vec<StateId> = (0..n)
        .map(|_| a.add_state(rng.random_bool(0.4), IntervalBox::Bottom))
        .collect();
    for &q in &ids {
        if rng.random_bool(0.3) {
            a.set_initial(q, true).unwrap();
        }
    }
    let edges = rng.random_range(0..=3 * n);
    for _ in 0..edges {
        let q = ids[rng.random_range(0..n)];
        let q2 = ids[rng.random_range(0..n)];
        let label = random_label(rng);
        a.add_transition(q, &label, q2).unwrap();
    }
    a
}

/// A class-pure interval with endpoints on the grid (possibly unbounded).
pub fn random_label<R: Rng>(rng: &mut R) -> IntervalBox {
    let iv = if rng.random_bool(0.5) {
        let mut lo = GRID[rng.random_range(0..5)];
        let mut hi = GRID[rng.random_range(0..5)];
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if rng.random_bool(0.15) {
            lo = f64::NEG_INFINITY;
        }
        if rng.random_bool(0.2) {
            Interval::half_open(lo, 0.0).unwrap()
        } else {
            Interval::closed(lo, hi).unwrap()
        }
    } else {
        let mut lo = GRID[rng.random_range(5..11)];
        let mut hi = GRID[rng.random_range(5..11)];
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if rng.random_bool(0.15) {
            hi = f64::INFINITY;
        }
        Interval::closed(lo, hi).unwrap()
    };
    IntervalBox::new(vec![iv]).unwrap()
}

pub fn random_word<R: Rng>(rng: &mut R, len: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| {
            if rng.random_bool(0.8) {
                vec![GRID[rng.random_range(0..GRID.len())]]
            } else {
                vec![rng.random_range(-4.0..4.0)]
            }
        })
        .collect()
}

/// Letter containment computed from the raw endpoints.
fn inside(label: &IntervalBox, x: &[f64]) -> bool {
    match label {
        IntervalBox::Bottom => false,
        IntervalBox::Dims(v) => v
            .iter()
            .zip(x)
            .all(|(iv, &c)| iv.lo() <= c && (c < iv.hi() || (!iv.is_hi_open() && c == iv.hi()))),
    }
}

/// Acceptance by explicit enumeration of every run.
pub fn brute_accepts(a: &LatticeAutomaton, word: &[Vec<f64>]) -> bool {
    let edges: Vec<(StateId, IntervalBox, StateId)> =
        a.transitions().map(|t| (t.source, t.label.clone(), t.target)).collect();
    fn go(a: &LatticeAutomaton, edges: &[(StateId, IntervalBox, StateId)], q: StateId, rest: &[Vec<f64>]) -> bool {
        match rest.split_first() {
            None => a.is_final(q),
            Some((x, tail)) => edges
                .iter()
                .filter(|(s, l, _)| *s == q && inside(l, x))
                .any(|(_, _, t)| go(a, edges, *t, tail)),
        }
    }
    let initial: BTreeSet<StateId> = a.initial_states().collect();
    initial.into_iter().any(|q| go(a, &edges, q, word))
}

/// Whether some run over the whole trace keeps every hidden vector inside
/// `Γ` of the current state and is in a final state whenever `y = 1`.
pub fn has_witness_run(a: &LatticeAutomaton, t: &Trace) -> bool {
    let ok = |q: StateId, h: &[f64], y: bool| (!y || a.is_final(q)) && a.gamma(q).unwrap().contains_point(h).unwrap();
    let mut current: BTreeSet<StateId> = a
        .initial_states()
        .filter(|&q| {
            t.h0.as_ref()
                .is_none_or(|h0| a.gamma(q).unwrap().contains_point(h0).unwrap())
        })
        .filter(|&q| t.y0 != Some(true) || a.is_final(q))
        .collect();
    for s in &t.steps {
        let mut next = BTreeSet::new();
        for &q in &current {
            for tr in a.outgoing(q) {
                if tr.label.contains_point(&s.x).unwrap() && ok(tr.target, &s.h, s.y) {
                    next.insert(tr.target);
                }
            }
        }
        current = next;
        if current.is_empty() {
            return false;
        }
    }
    !current.is_empty()
}
