//! Elman network forward pass.
//!
//! `h' = tanh(Wx·x + Wh·h + b)` and `y = [wo·h + c > 0]`, i.e. a logistic
//! readout cut at 0.5. The weights file is JSON with fields `d`, `m`, `Wx`
//! (m×d, row-major), `Wh` (m×m), `b`, `wo` and `c`; matrices may also be
//! given as nested row lists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Trace, TraceStep};

#[derive(Debug, Error, PartialEq)]
pub enum RnnError {
    #[error("{what} has length {found}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite weight in {0}")]
    NonFinite(&'static str),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixRepr {
    fn flatten(self) -> Vec<f64> {
        match self {
            MatrixRepr::Flat(v) => v,
            MatrixRepr::Rows(r) => r.into_iter().flatten().collect(),
        }
    }
}

#[derive(Deserialize)]
struct WeightsRepr {
    d: usize,
    m: usize,
    #[serde(rename = "Wx")]
    wx: MatrixRepr,
    #[serde(rename = "Wh")]
    wh: MatrixRepr,
    b: Vec<f64>,
    wo: Vec<f64>,
    c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightsRepr")]
pub struct ElmanWeights {
    d: usize,
    m: usize,
    #[serde(rename = "Wx")]
    wx: Vec<f64>,
    #[serde(rename = "Wh")]
    wh: Vec<f64>,
    b: Vec<f64>,
    wo: Vec<f64>,
    c: f64,
}

impl TryFrom<WeightsRepr> for ElmanWeights {
    type Error = RnnError;

    fn try_from(r: WeightsRepr) -> Result<Self, RnnError> {
        ElmanWeights::new(r.d, r.m, r.wx.flatten(), r.wh.flatten(), r.b, r.wo, r.c)
    }
}

fn shape(what: &'static str, v: &[f64], expected: usize) -> Result<(), RnnError> {
    if v.len() != expected {
        return Err(RnnError::Shape {
            what,
            expected,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RnnError::NonFinite(what));
    }
    Ok(())
}

impl ElmanWeights {
    pub fn new(
        d: usize,
        m: usize,
        wx: Vec<f64>,
        wh: Vec<f64>,
        b: Vec<f64>,
        wo: Vec<f64>,
        c: f64,
    ) -> Result<Self, RnnError> {
        shape("Wx", &wx, m * d)?;
        shape("Wh", &wh, m * m)?;
        shape("b", &b, m)?;
        shape("wo", &wo, m)?;
        if !c.is_finite() {
            return Err(RnnError::NonFinite("c"));
        }
        Ok(ElmanWeights { d, m, wx, wh, b, wo, c })
    }

    /// All-zero weights.
    pub fn zeros(d: usize, m: usize) -> Self {
        ElmanWeights {
            d,
            m,
            wx: vec![0.0; m * d],
            wh: vec![0.0; m * m],
            b: vec![0.0; m],
            wo: vec![0.0; m],
            c: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden_dim(&self) -> usize {
        self.m
    }

    /// One recurrence step.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>, RnnError> {
        if x.len() != self.d {
            return Err(RnnError::Shape {
                what: "x",
                expected: self.d,
                found: x.len(),
            });
        }
        if h.len() != self.m {
            return Err(RnnError::Shape {
                what: "h",
                expected: self.m,
                found: h.len(),
            });
        }
        Ok((0..self.m)
            .map(|i| {
                let from_x: f64 = self.wx[i * self.d..(i + 1) * self.d]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum();
                let from_h: f64 = self.wh[i * self.m..(i + 1) * self.m]
                    .iter()
                    .zip(h)
                    .map(|(w, v)| w * v)
                    .sum();
                (from_x + from_h + self.b[i]).tanh()
            })
            .collect())
    }

    pub fn logit(&self, h: &[f64]) -> Result<f64, RnnError> {
        if h.len() != self.m {
            return Err(RnnError::Shape {
                what: "h",
                expected: self.m,
                found: h.len(),
            });
        }
        Ok(self.wo.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.c)
    }

    /// `sigmoid(wo·h + c) > 0.5`; a logit of exactly 0 maps to false.
    pub fn classify(&self, h: &[f64]) -> Result<bool, RnnError> {
        Ok(self.logit(h)? > 0.0)
    }

    /// Runs the network from the zero state and records every step.
    pub fn run<W: AsRef<[f64]>>(&self, word: &[W]) -> Result<Trace, RnnError> {
        let h0 = vec![0.0; self.m];
        let y0 = self.classify(&h0)?;
        let mut h = h0.clone();
        let mut steps = Vec::with_capacity(word.len());
        for x in word {
            let x = x.as_ref();
            h = self.step(x, &h)?;
            let y = self.classify(&h)?;
            steps.push(TraceStep::new(x.to_vec(), h.clone(), y));
        }
        Ok(Trace {
            steps,
            h0: Some(h0),
            y0: Some(y0),
        })
    }

    /// Output after reading the whole word (`y0` for the empty word).
    pub fn accepts<W: AsRef<[f64]>>(&self, word: &[W]) -> Result<bool, RnnError> {
        let mut h = vec![0.0; self.m];
        for x in word {
            h = self.step(x.as_ref(), &h)?;
        }
        self.classify(&h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(wx: f64, wh: f64, b: f64, wo: f64, c: f64) -> ElmanWeights {
        ElmanWeights::new(1, 1, vec![wx], vec![wh], vec![b], vec![wo], c).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let w = ElmanWeights::zeros(2, 3);
        assert_eq!(w.step(&[4.0, -1.0], &[0.3, 0.2, 0.1]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn scalar_step() {
        let w = scalar(1.0, 0.0, 0.0, 1.0, 0.0);
        let h = w.step(&[0.5], &[0.9]).unwrap();
        assert!((h[0] - 0.46211715726000974).abs() < 1e-15);
        assert!(matches!(
            w.step(&[0.5, 1.0], &[0.9]),
            Err(RnnError::Shape { what: "x", .. })
        ));
    }

    #[test]
    fn classify_boundary() {
        assert!(!scalar(0.0, 0.0, 0.0, 1.0, 0.0).classify(&[0.0]).unwrap());
        assert!(scalar(0.0, 0.0, 0.0, 1.0, 0.0).classify(&[0.3]).unwrap());
        assert!(!scalar(0.0, 0.0, 0.0, 1.0, -1.0).classify(&[0.3]).unwrap());
        assert!(scalar(0.0, 0.0, 0.0, 1.0, 0.0).classify(&[0.3, 0.1]).is_err());
    }

    #[test]
    fn two_unit_run_matches_hand_computation() {
        // Wx = [[1], [-0.5]], Wh = [[0.5, 0], [0.25, 1]], b = [0.1, -0.2]
        let w = ElmanWeights::new(
            1,
            2,
            vec![1.0, -0.5],
            vec![0.5, 0.0, 0.25, 1.0],
            vec![0.1, -0.2],
            vec![1.0, -1.0],
            -0.1,
        )
        .unwrap();
        let t = w.run(&[[1.0], [-1.0]]).unwrap();
        let h1 = [(1.0f64 + 0.1).tanh(), (-0.5f64 - 0.2).tanh()];
        let h2 = [
            (-1.0 + 0.5 * h1[0] + 0.1f64).tanh(),
            (0.5 + 0.25 * h1[0] + h1[1] - 0.2f64).tanh(),
        ];
        assert_eq!(t.steps[0].h, h1.to_vec());
        assert_eq!(t.steps[1].h, h2.to_vec());
        assert_eq!(t.steps[0].y, h1[0] - h1[1] - 0.1 > 0.0);
        assert_eq!(t.steps[1].y, h2[0] - h2[1] - 0.1 > 0.0);
        assert_eq!(t.h0, Some(vec![0.0, 0.0]));
        assert_eq!(t.y0, Some(false));
    }

    #[test]
    fn empty_word() {
        let w = scalar(1.0, 1.0, 0.0, 1.0, 0.5);
        let t = w.run::<[f64; 1]>(&[]).unwrap();
        assert!(t.steps.is_empty());
        assert_eq!(t.h0, Some(vec![0.0]));
        assert_eq!(t.y0, Some(true));
    }

    #[test]
    fn weights_file_forms() {
        let flat = r#"{"d":1,"m":2,"Wx":[1,2],"Wh":[1,0,0,1],"b":[0,0],"wo":[1,1],"c":0}"#;
        let rows = r#"{"d":1,"m":2,"Wx":[[1],[2]],"Wh":[[1,0],[0,1]],"b":[0,0],"wo":[1,1],"c":0}"#;
        let a: ElmanWeights = serde_json::from_str(flat).unwrap();
        let b: ElmanWeights = serde_json::from_str(rows).unwrap();
        assert_eq!(a, b);
        let back: ElmanWeights = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
        let bad = r#"{"d":1,"m":2,"Wx":[1],"Wh":[1,0,0,1],"b":[0,0],"wo":[1,1],"c":0}"#;
        assert!(serde_json::from_str::<ElmanWeights>(bad).is_err());
    }
}
