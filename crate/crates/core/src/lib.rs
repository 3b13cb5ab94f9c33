//! Interval lattice automata learned from recurrent-network traces.
//!
//! The pipeline reads execution traces `(x, h, y)` of a binary RNN
//! classifier, builds an interval prefix tree automaton whose transitions are
//! labelled by boxes of observed inputs, then greedily merges states whose
//! hidden-state boxes point in similar directions.
//!
//! ```
//! use ila::ipta::build_ipta;
//! use ila::lattice::Partition;
//! use ila::merge::{merge_loop, MergeConfig};
//! use ila::tomita::{gen_traces, LanguageId, SynthConfig};
//!
//! let id = LanguageId::tomita2(4).unwrap();
//! let traces = gen_traces(id, &SynthConfig::new(200, 10, 0.0, 1));
//! let mut a = build_ipta(&traces, &id.partition()).unwrap();
//! merge_loop(&mut a, &MergeConfig::new(0.5).unwrap()).unwrap();
//! assert_eq!(a.num_states(), 4);
//! assert!(a.accepts(&[[1.0], [-3.0], [-2.0]]).unwrap());
//! ```

pub mod automaton;
pub mod cli;
pub mod dot;
pub mod eval;
pub mod ipta;
pub mod lattice;
pub mod merge;
pub mod rnn;
pub mod tomita;
pub mod trace;

/// A letter of `R^d`.
pub type Letter = Vec<f64>;

/// A finite word of letters.
pub type Word = Vec<Letter>;
