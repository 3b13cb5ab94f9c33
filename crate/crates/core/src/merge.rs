//! Similarity-driven state merging.
//!
//! Two states are compared through their finality and the centers of their
//! `Γ` boxes: states that disagree on finality score 2, otherwise the score
//! is `1 - cos` of the two centers. [`merge_loop`] repeatedly merges the
//! globally closest pair while its score is below the threshold.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use log::{debug, warn};
use thiserror::Error;

use crate::automaton::{AutomatonError, LatticeAutomaton, StateId};
use crate::lattice::IntervalBox;

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("merge threshold must be a non-negative number, got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    threshold: f64,
    max_merges: Option<usize>,
}

impl MergeConfig {
    pub fn new(threshold: f64) -> Result<Self, MergeError> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(MergeError::Threshold(threshold));
        }
        Ok(MergeConfig {
            threshold,
            max_merges: None,
        })
    }

    pub fn with_max_merges(mut self, max: Option<usize>) -> Self {
        self.max_merges = max;
        self
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn max_merges(&self) -> Option<usize> {
        self.max_merges
    }
}

/// What the score of a state depends on.
#[derive(Debug, Clone, PartialEq)]
struct Feature {
    is_final: bool,
    dir: Direction,
}

#[derive(Debug, Clone, PartialEq)]
enum Direction {
    /// `Γ` is bottom (or unbounded, so it has no center).
    Undefined,
    /// Center with zero Euclidean norm.
    Zero,
    Vector {
        mid: Vec<f64>,
        norm: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum DirKey {
    Undefined,
    Zero,
    Vector(Vec<u64>),
}

impl Feature {
    fn of(a: &LatticeAutomaton, q: StateId) -> Feature {
        let dir = match a.gamma(q).map(IntervalBox::mid) {
            Some(Ok(mid)) => {
                // normalizes -0.0 so equal centers hash equally
                let mid: Vec<f64> = mid.into_iter().map(|v| v + 0.0).collect();
                let norm = mid.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    Direction::Zero
                } else {
                    Direction::Vector { mid, norm }
                }
            }
            _ => Direction::Undefined,
        };
        Feature {
            is_final: a.is_final(q),
            dir,
        }
    }

    fn key(&self) -> (bool, DirKey) {
        let dir = match &self.dir {
            Direction::Undefined => DirKey::Undefined,
            Direction::Zero => DirKey::Zero,
            Direction::Vector { mid, .. } => DirKey::Vector(mid.iter().map(|v| v.to_bits()).collect()),
        };
        (self.is_final, dir)
    }
}

fn feature_score(a: &Feature, b: &Feature) -> f64 {
    if a.is_final != b.is_final {
        return 2.0;
    }
    match (&a.dir, &b.dir) {
        (Direction::Undefined, Direction::Undefined) | (Direction::Zero, Direction::Zero) => 0.0,
        (Direction::Vector { mid: u, norm: nu }, Direction::Vector { mid: v, norm: nv }) => {
            if u.len() != v.len() {
                return 2.0;
            }
            if u == v {
                return 0.0;
            }
            let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
            (1.0 - dot / (nu * nv)).clamp(0.0, 2.0)
        }
        _ => 2.0,
    }
}

/// Similarity score of two states, in `[0, 2]`.
///
/// 2 when exactly one state is final. Otherwise `1 - cos` of the centers of
/// their `Γ` boxes. A center of zero norm, or a bottom `Γ`, has no
/// direction: two such states of the same kind score 0, and such a state
/// scores 2 against a state with a proper direction.
pub fn similarity_score(a: &LatticeAutomaton, qi: StateId, qj: StateId) -> Result<f64, AutomatonError> {
    for q in [qi, qj] {
        if !a.contains_state(q) {
            return Err(AutomatonError::UnknownState(q));
        }
    }
    Ok(feature_score(&Feature::of(a, qi), &Feature::of(a, qj)))
}

/// Merges `qj` into `qi`: every transition entering or leaving `qj` is
/// re-added on `qi` (joining same-class labels), `Γ(qi)` absorbs `Γ(qj)`,
/// `qi` inherits initial and final membership, and `qj` is deleted.
pub fn merge_states(a: &mut LatticeAutomaton, qi: StateId, qj: StateId) -> Result<(), AutomatonError> {
    for q in [qi, qj] {
        if !a.contains_state(q) {
            return Err(AutomatonError::UnknownState(q));
        }
    }
    if qi == qj {
        return Err(AutomatonError::SameState(qi));
    }
    let redirect = |q: StateId| if q == qj { qi } else { q };
    let moved: Vec<(StateId, IntervalBox, StateId)> = a
        .outgoing(qj)
        .chain(a.incoming(qj).into_iter().filter(|t| t.source != qj))
        .map(|t| (redirect(t.source), t.label.clone(), redirect(t.target)))
        .collect();
    for (source, label, target) in &moved {
        a.add_transition(*source, label, *target)?;
    }
    if let Some(g) = a.gamma(qj).cloned() {
        a.join_gamma(qi, &g)?;
    }
    if a.is_initial(qj) {
        a.set_initial(qi, true)?;
    }
    if a.is_final(qj) {
        a.set_final(qi, true)?;
    }
    a.delete_state(qj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MergeStats {
    pub merges: usize,
}

/// A candidate pair. `lo < hi` are the state ids, `partner` the group of
/// the other side.
#[derive(Debug, Clone, Copy)]
struct Cand {
    score: f64,
    lo: StateId,
    hi: StateId,
    partner: usize,
}

fn cand_cmp(a: &Cand, b: &Cand) -> Ordering {
    a.score.total_cmp(&b.score).then(a.lo.cmp(&b.lo)).then(a.hi.cmp(&b.hi))
}

fn better(new: &Option<Cand>, old: &Option<Cand>) -> bool {
    match (new, old) {
        (Some(n), Some(o)) => cand_cmp(n, o) == Ordering::Less,
        (Some(_), None) => true,
        _ => false,
    }
}

struct Group {
    feat: Feature,
    key: (bool, DirKey),
    members: BTreeSet<StateId>,
}

/// States grouped by identical feature; all pairs inside a group share one
/// score, and the tie-break only ever looks at the smallest ids of a group.
/// Each group caches its best partner group.
struct Pool {
    groups: Vec<Option<Group>>,
    live: Vec<usize>,
    pos: Vec<usize>,
    by_key: HashMap<(bool, DirKey), usize>,
    of_state: HashMap<StateId, usize>,
    best: Vec<Option<Cand>>,
    same_finality_only: bool,
}

impl Pool {
    fn new(a: &LatticeAutomaton, same_finality_only: bool) -> Pool {
        let mut pool = Pool {
            groups: Vec::new(),
            live: Vec::new(),
            pos: Vec::new(),
            by_key: HashMap::new(),
            of_state: HashMap::new(),
            best: Vec::new(),
            same_finality_only,
        };
        for q in a.states() {
            pool.insert(q, Feature::of(a, q));
        }
        for i in 0..pool.live.len() {
            let g = pool.live[i];
            pool.recompute(g);
        }
        pool
    }

    fn group(&self, g: usize) -> &Group {
        self.groups[g].as_ref().expect("live group")
    }

    fn insert(&mut self, q: StateId, feat: Feature) -> usize {
        let key = feat.key();
        let g = match self.by_key.get(&key) {
            Some(&g) => g,
            None => {
                let g = self.groups.len();
                self.groups.push(Some(Group {
                    feat,
                    key: key.clone(),
                    members: BTreeSet::new(),
                }));
                self.pos.push(self.live.len());
                self.live.push(g);
                self.best.push(None);
                self.by_key.insert(key, g);
                g
            }
        };
        self.groups[g].as_mut().expect("live group").members.insert(q);
        self.of_state.insert(q, g);
        g
    }

    fn remove(&mut self, q: StateId) -> usize {
        let g = self.of_state.remove(&q).expect("pooled state");
        let group = self.groups[g].as_mut().expect("live group");
        group.members.remove(&q);
        if group.members.is_empty() {
            let key = group.key.clone();
            self.by_key.remove(&key);
            self.groups[g] = None;
            self.best[g] = None;
            let p = self.pos[g];
            self.live.swap_remove(p);
            if p < self.live.len() {
                let moved = self.live[p];
                self.pos[moved] = p;
            }
            self.pos[g] = usize::MAX;
        }
        g
    }

    fn is_live(&self, g: usize) -> bool {
        self.groups[g].is_some()
    }

    fn pair(&self, g: usize, h: usize) -> Option<Cand> {
        let (a, b) = (self.group(g), self.group(h));
        if self.same_finality_only && a.feat.is_final != b.feat.is_final {
            return None;
        }
        let (lo, hi) = if g == h {
            let mut it = a.members.iter();
            (*it.next()?, *it.next()?)
        } else {
            let (x, y) = (*a.members.first()?, *b.members.first()?);
            (x.min(y), x.max(y))
        };
        Some(Cand {
            score: feature_score(&a.feat, &b.feat),
            lo,
            hi,
            partner: h,
        })
    }

    fn recompute(&mut self, g: usize) {
        let mut best = None;
        for &h in &self.live {
            let c = self.pair(g, h);
            if better(&c, &best) {
                best = c;
            }
        }
        self.best[g] = best;
    }

    fn global_best(&self) -> Option<Cand> {
        let mut best = None;
        for &g in &self.live {
            if better(&self.best[g], &best) {
                best = self.best[g];
            }
        }
        best
    }

    /// Re-pools `qi` and `qj` after `qj` was merged into `qi`.
    fn after_merge(&mut self, a: &LatticeAutomaton, qi: StateId, qj: StateId) {
        let gj = self.remove(qj);
        let feat = Feature::of(a, qi);
        let gi = self.of_state[&qi];
        let mut changed = vec![gj, gi];
        if self.group(gi).key != feat.key() {
            self.remove(qi);
            changed.push(self.insert(qi, feat));
        }
        changed.sort_unstable();
        changed.dedup();
        let changed_live: Vec<usize> = changed.iter().copied().filter(|&g| self.is_live(g)).collect();

        for i in 0..self.live.len() {
            let g = self.live[i];
            if changed.contains(&g) {
                continue;
            }
            match self.best[g] {
                Some(c) if changed.contains(&c.partner) => self.recompute(g),
                _ => {
                    for &c in &changed_live {
                        let cand = self.pair(g, c);
                        if better(&cand, &self.best[g]) {
                            self.best[g] = cand;
                        }
                    }
                }
            }
        }
        for g in changed_live {
            self.recompute(g);
        }
    }
}

/// Greedy merging: while some pair of distinct states scores below the
/// threshold, merge the pair with the smallest score (ties go to the
/// smallest `(min id, max id)`), keeping the smaller id.
pub fn merge_loop(a: &mut LatticeAutomaton, cfg: &MergeConfig) -> Result<MergeStats, AutomatonError> {
    if cfg.threshold > 2.0 {
        warn!(
            "merge threshold {} exceeds the maximal score 2; every pair of states qualifies",
            cfg.threshold
        );
    }
    let mut stats = MergeStats::default();
    if cfg.threshold == 0.0 {
        return Ok(stats);
    }
    let mut pool = Pool::new(a, cfg.threshold <= 2.0);
    while cfg.max_merges.is_none_or(|m| stats.merges < m) {
        let Some(best) = pool.global_best() else { break };
        if best.score >= cfg.threshold {
            break;
        }
        debug!("merge {} into {} (score {})", best.hi, best.lo, best.score);
        merge_states(a, best.lo, best.hi)?;
        pool.after_merge(a, best.lo, best.hi);
        stats.merges += 1;
    }
    Ok(stats)
}

/// Reference implementation of the loop: full pair scan every iteration.
/// Quadratic per merge; used to cross-check [`merge_loop`].
#[doc(hidden)]
pub fn merge_loop_naive(a: &mut LatticeAutomaton, cfg: &MergeConfig) -> Result<MergeStats, AutomatonError> {
    let mut stats = MergeStats::default();
    while cfg.max_merges.is_none_or(|m| stats.merges < m) {
        let states: Vec<StateId> = a.states().collect();
        let mut best: Option<(f64, StateId, StateId)> = None;
        for (i, &p) in states.iter().enumerate() {
            for &q in &states[i + 1..] {
                let s = similarity_score(a, p, q)?;
                if best.is_none_or(|(b, _, _)| s < b) {
                    best = Some((s, p, q));
                }
            }
        }
        match best {
            Some((s, p, q)) if s < cfg.threshold => {
                merge_states(a, p, q)?;
                stats.merges += 1;
            }
            _ => break,
        }
    }
    Ok(stats)
}
