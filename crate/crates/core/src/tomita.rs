//! Tomita benchmark languages.
//!
//! The seven classic Tomita languages are over the bits `{0, 1}`; their real
//! valued variants read letters in `R` and only look at the sign: a letter
//! `< 0` plays the role of `0`, a letter `>= 0` the role of `1`. Both
//! families share the same ground-truth DFAs.
//!
//! | # | language |
//! |---|----------|
//! | 1 | `1*` |
//! | 2 | `(10)*` |
//! | 3 | no odd run of `1`s immediately followed by an odd run of `0`s |
//! | 4 | no `000` |
//! | 5 | even number of `0`s and even number of `1`s |
//! | 6 | `#1 - #0 ≡ 0 (mod 3)` |
//! | 7 | `0*1*0*1*` |

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::lattice::Partition;
use crate::trace::{Trace, TraceHeader, TraceSet, TraceStep};
use crate::Word;

#[derive(Debug, Error, PartialEq)]
pub enum LanguageError {
    #[error("unknown language family in {0:?}, expected tomita:K or tomita2:K")]
    Family(String),
    #[error("language index {0} out of range 1..=7")]
    Index(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Bit alphabet, letters encoded as `0.0` / `1.0`.
    Classic,
    /// Real alphabet, letters classified by sign.
    Tomita2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LanguageId {
    family: Family,
    index: u8,
}

impl LanguageId {
    pub fn new(family: Family, index: u8) -> Result<Self, LanguageError> {
        if !(1..=7).contains(&index) {
            return Err(LanguageError::Index(index.to_string()));
        }
        Ok(LanguageId { family, index })
    }

    pub fn classic(index: u8) -> Result<Self, LanguageError> {
        Self::new(Family::Classic, index)
    }

    pub fn tomita2(index: u8) -> Result<Self, LanguageError> {
        Self::new(Family::Tomita2, index)
    }

    /// All fourteen languages, classic first.
    pub fn all() -> Vec<LanguageId> {
        [Family::Classic, Family::Tomita2]
            .into_iter()
            .flat_map(|family| (1..=7).map(move |index| LanguageId { family, index }))
            .collect()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn index(&self) -> u8 {
        self.index
    }

    pub fn dfa(&self) -> Dfa {
        Dfa::tomita(self.index)
    }

    /// Partition separating the two letter classes: cut at 0.5 for bits,
    /// at 0 for reals.
    pub fn partition(&self) -> Partition {
        match self.family {
            Family::Classic => Partition::single(vec![0.5]).expect("valid cut"),
            Family::Tomita2 => Partition::sign(),
        }
    }

    pub fn letter_dist(&self) -> LetterDist {
        match self.family {
            Family::Classic => LetterDist::Bits,
            Family::Tomita2 => LetterDist::Uniform {
                dim: 1,
                lo: -10.0,
                hi: 10.0,
            },
        }
    }

    /// DFA symbol of a one-dimensional letter.
    pub fn symbol(&self, letter: f64) -> usize {
        let cut = match self.family {
            Family::Classic => 0.5,
            Family::Tomita2 => 0.0,
        };
        usize::from(letter >= cut)
    }

    pub fn accepts<W: AsRef<[f64]>>(&self, word: &[W]) -> bool {
        let dfa = self.dfa();
        dfa.accepts(word.iter().map(|x| self.symbol(x.as_ref()[0])))
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self.family {
            Family::Classic => "tomita",
            Family::Tomita2 => "tomita2",
        };
        write!(f, "{family}:{}", self.index)
    }
}

impl FromStr for LanguageId {
    type Err = LanguageError;

    fn from_str(s: &str) -> Result<Self, LanguageError> {
        let (family, index) = s.split_once(':').ok_or_else(|| LanguageError::Family(s.into()))?;
        let family = match family {
            "tomita" => Family::Classic,
            "tomita2" => Family::Tomita2,
            _ => return Err(LanguageError::Family(s.into())),
        };
        let index: u8 = index.parse().map_err(|_| LanguageError::Index(index.into()))?;
        LanguageId::new(family, index)
    }
}

impl Serialize for LanguageId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LanguageId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Membership in the real-valued variant of Tomita language `index`.
pub fn tomita2_member(index: u8, word: &[f64]) -> bool {
    let dfa = Dfa::tomita(index);
    dfa.accepts(word.iter().map(|&x| usize::from(x >= 0.0)))
}

/// Membership in the classic Tomita language `index`.
pub fn tomita_member(index: u8, word: &[bool]) -> bool {
    let dfa = Dfa::tomita(index);
    dfa.accepts(word.iter().map(|&b| usize::from(b)))
}

/// Complete DFA over the symbols `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    start: usize,
    accepting: Vec<bool>,
    next: Vec<[usize; 2]>,
}

impl Dfa {
    /// Ground-truth automaton of Tomita language `index` (1..=7); the last
    /// state, where present, is the rejecting sink.
    pub fn tomita(index: u8) -> Dfa {
        let (accepting, next): (Vec<bool>, Vec<[usize; 2]>) = match index {
            1 => (vec![true, false], vec![[1, 0], [1, 1]]),
            2 => (vec![true, false, false], vec![[2, 1], [0, 2], [2, 2]]),
            3 => (
                vec![true, true, false, true, false],
                vec![[0, 1], [2, 0], [3, 4], [2, 1], [4, 4]],
            ),
            4 => (vec![true, true, true, false], vec![[1, 0], [2, 0], [3, 0], [3, 3]]),
            5 => (vec![true, false, false, false], vec![[2, 1], [3, 0], [0, 3], [1, 2]]),
            6 => (vec![true, false, false], vec![[2, 1], [0, 2], [1, 0]]),
            7 => (
                vec![true, true, true, true, false],
                vec![[0, 1], [2, 1], [2, 3], [4, 3], [4, 4]],
            ),
            _ => panic!("Tomita language index {index} out of range"),
        };
        Dfa {
            start: 0,
            accepting,
            next,
        }
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn step(&self, state: usize, symbol: usize) -> usize {
        self.next[state][symbol]
    }

    pub fn run(&self, symbols: impl IntoIterator<Item = usize>) -> usize {
        symbols.into_iter().fold(self.start, |q, s| self.step(q, s))
    }

    pub fn accepts(&self, symbols: impl IntoIterator<Item = usize>) -> bool {
        self.accepting[self.run(symbols)]
    }

    pub fn one_hot(&self, state: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_states()];
        v[state] = 1.0;
        v
    }
}

/// Distribution of single letters.
#[derive(Debug, Clone, PartialEq)]
pub enum LetterDist {
    /// `0.0` or `1.0` with equal probability.
    Bits,
    /// Independent uniform components in `[lo, hi]`.
    Uniform { dim: usize, lo: f64, hi: f64 },
}

impl LetterDist {
    pub fn dim(&self) -> usize {
        match self {
            LetterDist::Bits => 1,
            LetterDist::Uniform { dim, .. } => *dim,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            LetterDist::Bits => vec![if rng.random_bool(0.5) { 1.0 } else { 0.0 }],
            LetterDist::Uniform { dim, lo, hi } => (0..*dim).map(|_| rng.random_range(*lo..=*hi)).collect(),
        }
    }

    /// A word whose length is uniform in `1..=max_len`.
    pub fn sample_word<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Word {
        let len = rng.random_range(1..=max_len.max(1));
        (0..len).map(|_| self.sample(rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub max_len: usize,
    /// Standard deviation of the Gaussian noise added to hidden vectors.
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(count: usize, max_len: usize, noise: f64, seed: u64) -> Self {
        SynthConfig {
            count,
            max_len,
            noise,
            seed,
        }
    }
}

/// Oracle-labelled traces with synthetic hidden states.
///
/// The hidden vector after a prefix is the one-hot encoding of the
/// ground-truth DFA state, plus `N(0, noise²)` per component; `y` is the
/// oracle membership of the prefix. Every trace records `h0` (one-hot of the
/// start state) and `y0` (membership of the empty word).
pub fn gen_traces(id: LanguageId, cfg: &SynthConfig) -> TraceSet {
    let dfa = id.dfa();
    let dist = id.letter_dist();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = (cfg.noise > 0.0).then(|| Normal::new(0.0, cfg.noise).expect("finite noise"));
    let y0 = dfa.is_accepting(dfa.start());
    let traces = (0..cfg.count)
        .map(|_| {
            let word = dist.sample_word(&mut rng, cfg.max_len);
            let mut state = dfa.start();
            let steps = word
                .into_iter()
                .map(|x| {
                    state = dfa.step(state, id.symbol(x[0]));
                    let mut h = dfa.one_hot(state);
                    if let Some(n) = &normal {
                        for v in &mut h {
                            *v += n.sample(&mut rng);
                        }
                    }
                    TraceStep::new(x, h, dfa.is_accepting(state))
                })
                .collect();
            Trace {
                steps,
                h0: Some(dfa.one_hot(dfa.start())),
                y0: Some(y0),
            }
        })
        .collect();
    TraceSet::with_header(
        TraceHeader {
            dim: Some(1),
            hidden_dim: Some(dfa.num_states()),
            y0_default: Some(y0),
        },
        traces,
    )
}
