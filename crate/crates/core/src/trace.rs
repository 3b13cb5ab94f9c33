//! Execution traces and the line-delimited trace file.
//!
//! A trace file holds one JSON record per line. An optional first line
//! without a `steps` field is the file header (`dim`, `hidden_dim`,
//! `y0_default`); every other line is a trace:
//!
//! ```text
//! {"dim":1,"hidden_dim":2,"y0_default":1}
//! {"steps":[{"x":[1.4],"h":[0.1,0.9],"y":1}],"h0":[0.0,0.0],"y0":1}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: header record must come first")]
    MisplacedHeader { line: usize },
    #[error("trace {trace}: {what} has dimension {found}, expected {expected}")]
    Dimension {
        trace: usize,
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("trace {trace}: non-finite value in {what}")]
    NonFinite { trace: usize, what: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

mod bit {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Bit {
        Int(u64),
        Bool(bool),
    }

    fn decode<E: de::Error>(b: Bit) -> Result<bool, E> {
        match b {
            Bit::Int(0) | Bit::Bool(false) => Ok(false),
            Bit::Int(1) | Bit::Bool(true) => Ok(true),
            Bit::Int(n) => Err(E::custom(format!("expected 0 or 1, found {n}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        decode(Bit::deserialize(d)?)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(b) => s.serialize_some(&(*b as u8)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
            Option::<Bit>::deserialize(d)?.map(decode).transpose()
        }
    }
}

/// One RNN step: input letter, hidden vector after reading it, output bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    #[serde(with = "bit")]
    pub y: bool,
}

impl TraceStep {
    pub fn new(x: Vec<f64>, h: Vec<f64>, y: bool) -> Self {
        TraceStep { x, h, y }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "bit::opt")]
    pub y0: Option<bool>,
}

impl Trace {
    pub fn new(steps: Vec<TraceStep>) -> Self {
        Trace {
            steps,
            h0: None,
            y0: None,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The input word read by the first `len` steps.
    pub fn word(&self, len: usize) -> Vec<Vec<f64>> {
        self.steps[..len].iter().map(|s| s.x.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "bit::opt")]
    pub y0_default: Option<bool>,
}

impl TraceHeader {
    fn is_empty(&self) -> bool {
        self == &TraceHeader::default()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceSet {
    pub header: TraceHeader,
    pub traces: Vec<Trace>,
}

impl TraceSet {
    pub fn new(traces: Vec<Trace>) -> Self {
        TraceSet {
            header: TraceHeader::default(),
            traces,
        }
    }

    pub fn with_header(header: TraceHeader, traces: Vec<Trace>) -> Self {
        TraceSet { header, traces }
    }

    /// Input dimension, from the header or the first step.
    pub fn dim(&self) -> Option<usize> {
        self.header.dim.or_else(|| self.first_step().map(|s| s.x.len()))
    }

    /// Hidden dimension, from the header, the first step or the first `h0`.
    pub fn hidden_dim(&self) -> Option<usize> {
        self.header
            .hidden_dim
            .or_else(|| self.first_step().map(|s| s.h.len()))
            .or_else(|| self.traces.iter().find_map(|t| t.h0.as_ref().map(Vec::len)))
    }

    fn first_step(&self) -> Option<&TraceStep> {
        self.traces.iter().find_map(|t| t.steps.first())
    }

    /// Checks uniform dimensions and finite values.
    pub fn validate(&self) -> Result<(), TraceError> {
        let dim = self.dim();
        let hidden = self.hidden_dim();
        let check = |trace: usize, what: String, v: &[f64], expected: Option<usize>| {
            if let Some(expected) = expected {
                if v.len() != expected {
                    return Err(TraceError::Dimension {
                        trace,
                        what,
                        expected,
                        found: v.len(),
                    });
                }
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(TraceError::NonFinite { trace, what });
            }
            Ok(())
        };
        for (i, t) in self.traces.iter().enumerate() {
            if let Some(h0) = &t.h0 {
                check(i, "h0".into(), h0, hidden)?;
            }
            for (k, s) in t.steps.iter().enumerate() {
                check(i, format!("x of step {}", k + 1), &s.x, dim)?;
                check(i, format!("h of step {}", k + 1), &s.h, hidden)?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<TraceSet, TraceError> {
        let mut set = TraceSet::default();
        let mut seen_record = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let json = |source| TraceError::Json { line: i + 1, source };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(json)?;
            if value.get("steps").is_some() {
                set.traces.push(serde_json::from_value(value).map_err(json)?);
            } else if !seen_record {
                set.header = serde_json::from_value(value).map_err(json)?;
            } else {
                return Err(TraceError::MisplacedHeader { line: i + 1 });
            }
            seen_record = true;
        }
        set.validate()?;
        Ok(set)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        if !self.header.is_empty() {
            serde_json::to_writer(&mut w, &self.header).map_err(|source| TraceError::Json { line: 1, source })?;
            writeln!(w)?;
        }
        for (i, t) in self.traces.iter().enumerate() {
            serde_json::to_writer(&mut w, t).map_err(|source| TraceError::Json { line: i + 2, source })?;
            writeln!(w)?;
        }
        Ok(())
    }
}
