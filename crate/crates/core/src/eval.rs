//! Fidelity and error rates of a learned automaton against a reference
//! classifier.
//!
//! Percentages are fractions of all test words: a type I error is a word
//! rejected by the reference but accepted by the automaton, a type II error
//! the converse, so `fidelity + type1 + type2 = 100`.

use std::io::{BufRead, Write};

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{AutomatonError, LatticeAutomaton};
use crate::rnn::{ElmanWeights, RnnError};
use crate::tomita::{LanguageId, LetterDist};
use crate::Word;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no test words")]
    EmptyWords,
    #[error("word {word}: letter dimension {found}, reference expects {expected}")]
    Dimension { word: usize, expected: usize, found: usize },
    #[error(transparent)]
    Rnn(#[from] RnnError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A binary reference classifier over words.
pub trait Classifier: Sync {
    /// Letter dimension the classifier reads.
    fn letter_dim(&self) -> usize;

    fn classify(&self, word: &[Vec<f64>]) -> Result<bool, EvalError>;
}

impl Classifier for LanguageId {
    fn letter_dim(&self) -> usize {
        1
    }

    fn classify(&self, word: &[Vec<f64>]) -> Result<bool, EvalError> {
        Ok(self.accepts(word))
    }
}

impl Classifier for ElmanWeights {
    fn letter_dim(&self) -> usize {
        self.input_dim()
    }

    fn classify(&self, word: &[Vec<f64>]) -> Result<bool, EvalError> {
        Ok(self.accepts(word)?)
    }
}

impl Classifier for LatticeAutomaton {
    fn letter_dim(&self) -> usize {
        self.dim()
    }

    fn classify(&self, word: &[Vec<f64>]) -> Result<bool, EvalError> {
        Ok(self.accepts(word)?)
    }
}

/// One disagreement between reference and automaton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub index: usize,
    pub word: Word,
    pub reference: bool,
    pub automaton: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_words: usize,
    pub agree: usize,
    pub false_accept: usize,
    pub false_reject: usize,
    pub fidelity_pct: f64,
    pub type1_pct: f64,
    pub type2_pct: f64,
    pub states: usize,
    pub transitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disagreements: Option<Vec<Disagreement>>,
}

impl EvalReport {
    fn from_counts(n: usize, false_accept: usize, false_reject: usize, a: &LatticeAutomaton) -> Self {
        let pct = |k: usize| 100.0 * k as f64 / n as f64;
        let agree = n - false_accept - false_reject;
        EvalReport {
            n_words: n,
            agree,
            false_accept,
            false_reject,
            fidelity_pct: pct(agree),
            type1_pct: pct(false_accept),
            type2_pct: pct(false_reject),
            states: a.num_states(),
            transitions: a.num_transitions(),
            disagreements: None,
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "fidelity={:.2} type1={:.2} type2={:.2} states={}",
            self.fidelity_pct, self.type1_pct, self.type2_pct, self.states
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub jobs: usize,
    pub detail: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { jobs: 1, detail: false }
    }
}

pub fn evaluate<C: Classifier + ?Sized>(
    reference: &C,
    a: &LatticeAutomaton,
    words: &[Word],
) -> Result<EvalReport, EvalError> {
    evaluate_with(reference, a, words, &EvalOptions::default())
}

pub fn evaluate_with<C: Classifier + ?Sized>(
    reference: &C,
    a: &LatticeAutomaton,
    words: &[Word],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if words.is_empty() {
        return Err(EvalError::EmptyWords);
    }
    for (i, w) in words.iter().enumerate() {
        for x in w {
            for expected in [reference.letter_dim(), a.dim()] {
                if x.len() != expected {
                    return Err(EvalError::Dimension {
                        word: i,
                        expected,
                        found: x.len(),
                    });
                }
            }
        }
    }
    let jobs = opts.jobs.clamp(1, words.len());
    let chunk = words.len().div_ceil(jobs);
    let judge = |ws: &[Word]| -> Result<Vec<(bool, bool)>, EvalError> {
        ws.iter().map(|w| Ok((reference.classify(w)?, a.accepts(w)?))).collect()
    };
    let verdicts: Vec<(bool, bool)> = if jobs == 1 {
        judge(words)?
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = words.chunks(chunk).map(|ws| s.spawn(move || judge(ws))).collect();
            let mut all = Vec::with_capacity(words.len());
            for h in handles {
                all.extend(h.join().expect("evaluation worker panicked")?);
            }
            Ok::<_, EvalError>(all)
        })?
    };
    let false_accept = verdicts.iter().filter(|&&(r, x)| !r && x).count();
    let false_reject = verdicts.iter().filter(|&&(r, x)| r && !x).count();
    let mut report = EvalReport::from_counts(words.len(), false_accept, false_reject, a);
    if opts.detail {
        report.disagreements = Some(
            verdicts
                .iter()
                .enumerate()
                .filter(|(_, (r, x))| r != x)
                .map(|(index, &(reference, automaton))| Disagreement {
                    index,
                    word: words[index].clone(),
                    reference,
                    automaton,
                })
                .collect(),
        );
    }
    Ok(report)
}

/// Minimum share of positive words sought when balancing.
pub const BALANCE_TARGET: f64 = 0.25;
const BALANCE_ATTEMPTS: usize = 50;

/// `n` i.i.d. words with lengths uniform in `1..=max_len`.
///
/// With `balance`, negative draws are discarded once the remaining slots are
/// needed to reach a quarter of positives, giving up after a bounded number
/// of draws per word.
pub fn sample_words_from<C: Classifier + ?Sized>(
    dist: &LetterDist,
    reference: &C,
    n: usize,
    max_len: usize,
    seed: u64,
    balance: bool,
) -> Result<Vec<Word>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !balance {
        return Ok((0..n).map(|_| dist.sample_word(&mut rng, max_len)).collect());
    }
    let wanted = (BALANCE_TARGET * n as f64).ceil() as usize;
    let mut positives = 0;
    let mut words = Vec::with_capacity(n);
    let mut budget = BALANCE_ATTEMPTS * n;
    while words.len() < n {
        let w = dist.sample_word(&mut rng, max_len);
        let positive = reference.classify(&w)?;
        let open = n - words.len();
        if !positive && positives + open <= wanted && budget > 0 {
            budget -= 1;
            continue;
        }
        positives += usize::from(positive);
        words.push(w);
    }
    if positives < wanted {
        warn!("balancing gave up: {positives} positive words out of {n}");
    }
    Ok(words)
}

/// Test words drawn from the language's training letter distribution.
pub fn sample_words(id: LanguageId, n: usize, max_len: usize, seed: u64, balance: bool) -> Vec<Word> {
    sample_words_from(&id.letter_dist(), &id, n, max_len, seed, balance).expect("language oracles are total")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WordRepr {
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

/// Reads a word file: one JSON array per line, either of numbers
/// (one-dimensional letters) or of letter vectors.
pub fn read_words<R: BufRead>(reader: R) -> Result<Vec<Word>, EvalError> {
    let mut words = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let w: WordRepr = serde_json::from_str(&line).map_err(|source| EvalError::Json { line: i + 1, source })?;
        words.push(match w {
            WordRepr::Scalars(v) => v.into_iter().map(|x| vec![x]).collect(),
            WordRepr::Vectors(v) => v,
        });
    }
    Ok(words)
}

pub fn write_words<W: Write>(words: &[Word], mut w: W) -> Result<(), EvalError> {
    for (i, word) in words.iter().enumerate() {
        serde_json::to_writer(&mut w, word).map_err(|source| EvalError::Json { line: i + 1, source })?;
        writeln!(w)?;
    }
    Ok(())
}
