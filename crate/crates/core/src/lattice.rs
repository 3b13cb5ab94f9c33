//! The box lattice over `R^d` and its finite partition into grid cells.
//!
//! An [`IntervalBox`] is either bottom or a tuple of nonempty intervals. Atoms
//! are point boxes, obtained from a vector with [`IntervalBox::point`]. A
//! [`Partition`] cuts every dimension at finitely many points and splits the
//! atoms into grid cells; transition labels of a lattice automaton must stay
//! inside one cell.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite component {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("invalid interval [{lo}, {hi}{}", if *.hi_open { ")" } else { "]" })]
    InvalidInterval { lo: f64, hi: f64, hi_open: bool },
    #[error("operation undefined on the bottom box")]
    Bottom,
    #[error("unbounded interval in dimension {0}")]
    Unbounded(usize),
    #[error("box {label} straddles a partition cut in dimension {dim}")]
    StraddlesPartition { label: String, dim: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// A nonempty interval of the extended reals.
///
/// The lower bound is always closed. The upper bound is closed unless
/// `hi_open` is set, which is how partition cells such as `[0, 1)` are
/// expressed. Bounds may be infinite but never NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
    hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Result<Self, LatticeError> {
        Self::new(lo, hi, false)
    }

    pub fn half_open(lo: f64, hi: f64) -> Result<Self, LatticeError> {
        Self::new(lo, hi, true)
    }

    pub fn new(lo: f64, hi: f64, hi_open: bool) -> Result<Self, LatticeError> {
        let ok = !lo.is_nan()
            && !hi.is_nan()
            && lo != f64::INFINITY
            && hi != f64::NEG_INFINITY
            && if hi_open { lo < hi } else { lo <= hi };
        if ok {
            Ok(Interval { lo, hi, hi_open })
        } else {
            Err(LatticeError::InvalidInterval { lo, hi, hi_open })
        }
    }

    pub fn point(x: f64) -> Result<Self, LatticeError> {
        if x.is_finite() {
            Ok(Interval {
                lo: x,
                hi: x,
                hi_open: false,
            })
        } else {
            Err(LatticeError::NonFinite { index: 0, value: x })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_hi_open(&self) -> bool {
        self.hi_open
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi && self.lo.is_finite()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && (x < self.hi || (x == self.hi && !self.hi_open))
    }

    /// Interval hull.
    pub fn join(&self, other: &Interval) -> Interval {
        let lo = self.lo.min(other.lo);
        let (hi, hi_open) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Greater) => (self.hi, self.hi_open),
            Some(Ordering::Less) => (other.hi, other.hi_open),
            _ => (self.hi, self.hi_open && other.hi_open),
        };
        Interval { lo, hi, hi_open }
    }

    /// Containment order.
    pub fn leq(&self, other: &Interval) -> bool {
        other.lo <= self.lo && (self.hi < other.hi || (self.hi == other.hi && (!other.hi_open || self.hi_open)))
    }

    pub fn mid(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let close = if self.hi_open { ')' } else { ']' };
        write!(f, "[{}, {}{}", self.lo, self.hi, close)
    }
}

/// Element of the box lattice: bottom or a `d`-tuple of intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum IntervalBox {
    Bottom,
    Dims(Vec<Interval>),
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self, LatticeError> {
        if dims.is_empty() {
            return Err(LatticeError::DimensionMismatch { expected: 1, found: 0 });
        }
        Ok(IntervalBox::Dims(dims))
    }

    /// The atom `[x1,x1] x ... x [xd,xd]`.
    pub fn point(x: &[f64]) -> Result<Self, LatticeError> {
        if x.is_empty() {
            return Err(LatticeError::DimensionMismatch { expected: 1, found: 0 });
        }
        x.iter()
            .enumerate()
            .map(|(index, &value)| Interval::point(value).map_err(|_| LatticeError::NonFinite { index, value }))
            .collect::<Result<Vec<_>, _>>()
            .map(IntervalBox::Dims)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, IntervalBox::Bottom)
    }

    /// Dimensionality, `None` for bottom.
    pub fn dim(&self) -> Option<usize> {
        match self {
            IntervalBox::Bottom => None,
            IntervalBox::Dims(d) => Some(d.len()),
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        match self {
            IntervalBox::Bottom => &[],
            IntervalBox::Dims(d) => d,
        }
    }

    pub fn join(&self, other: &IntervalBox) -> Result<IntervalBox, LatticeError> {
        match (self, other) {
            (IntervalBox::Bottom, b) | (b, IntervalBox::Bottom) => Ok(b.clone()),
            (IntervalBox::Dims(a), IntervalBox::Dims(b)) => {
                check_dims(a.len(), b.len())?;
                Ok(IntervalBox::Dims(a.iter().zip(b).map(|(x, y)| x.join(y)).collect()))
            }
        }
    }

    /// In-place join, used on hot paths where the left operand is owned.
    pub fn join_assign(&mut self, other: &IntervalBox) -> Result<(), LatticeError> {
        match (&mut *self, other) {
            (_, IntervalBox::Bottom) => Ok(()),
            (IntervalBox::Bottom, b) => {
                *self = b.clone();
                Ok(())
            }
            (IntervalBox::Dims(a), IntervalBox::Dims(b)) => {
                check_dims(a.len(), b.len())?;
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.join(y);
                }
                Ok(())
            }
        }
    }

    pub fn leq(&self, other: &IntervalBox) -> Result<bool, LatticeError> {
        match (self, other) {
            (IntervalBox::Bottom, _) => Ok(true),
            (IntervalBox::Dims(_), IntervalBox::Bottom) => Ok(false),
            (IntervalBox::Dims(a), IntervalBox::Dims(b)) => {
                check_dims(b.len(), a.len())?;
                Ok(a.iter().zip(b).all(|(x, y)| x.leq(y)))
            }
        }
    }

    /// `alpha(x) ⊑ self` without building the point box.
    pub fn contains_point(&self, x: &[f64]) -> Result<bool, LatticeError> {
        match self {
            IntervalBox::Bottom => Ok(false),
            IntervalBox::Dims(d) => {
                check_dims(d.len(), x.len())?;
                Ok(d.iter().zip(x).all(|(i, &v)| i.contains(v)))
            }
        }
    }

    /// Componentwise midpoint. Only defined on bounded, non-bottom boxes.
    pub fn mid(&self) -> Result<Vec<f64>, LatticeError> {
        match self {
            IntervalBox::Bottom => Err(LatticeError::Bottom),
            IntervalBox::Dims(d) => d
                .iter()
                .enumerate()
                .map(|(i, itv)| {
                    if itv.is_bounded() {
                        Ok(itv.mid())
                    } else {
                        Err(LatticeError::Unbounded(i))
                    }
                })
                .collect(),
        }
    }
}

fn check_dims(expected: usize, found: usize) -> Result<(), LatticeError> {
    if expected == found {
        Ok(())
    } else {
        Err(LatticeError::DimensionMismatch { expected, found })
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalBox::Bottom => write!(f, "⊥"),
            IntervalBox::Dims(d) => {
                for (i, itv) in d.iter().enumerate() {
                    if i > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "{itv}")?;
                }
                Ok(())
            }
        }
    }
}

/// Grid partition of `R^d`.
///
/// Each dimension is cut at a strictly increasing list of finite points
/// `c1 < ... < ck`, giving the cells `[-inf, c1)`, `[c1, c2)`, ...,
/// `[ck, +inf]`. Classes are the products of cells, numbered in row-major
/// order with the first dimension most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    cuts: Vec<Vec<f64>>,
}

impl Partition {
    pub fn new(cuts: Vec<Vec<f64>>) -> Result<Self, LatticeError> {
        if cuts.is_empty() {
            return Err(LatticeError::InvalidPartition("no dimensions".into()));
        }
        for (dim, c) in cuts.iter().enumerate() {
            if let Some(bad) = c.iter().find(|v| !v.is_finite()) {
                return Err(LatticeError::InvalidPartition(format!(
                    "non-finite cut {bad} in dimension {dim}"
                )));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LatticeError::InvalidPartition(format!(
                    "cuts of dimension {dim} are not strictly increasing"
                )));
            }
        }
        Ok(Partition { cuts })
    }

    /// One-dimensional partition.
    pub fn single(cuts: Vec<f64>) -> Result<Self, LatticeError> {
        Self::new(vec![cuts])
    }

    /// The sign partition `[-inf, 0) | [0, +inf]` in one dimension.
    pub fn sign() -> Self {
        Partition { cuts: vec![vec![0.0]] }
    }

    pub fn dim(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    pub fn class_count(&self) -> usize {
        self.cuts.iter().map(|c| c.len() + 1).product()
    }

    /// Cell index of a value within one dimension.
    fn cell_of_value(cuts: &[f64], x: f64) -> usize {
        cuts.partition_point(|&c| c <= x)
    }

    /// Class of the atom `alpha(x)`.
    pub fn class_of_point(&self, x: &[f64]) -> Result<usize, LatticeError> {
        check_dims(self.dim(), x.len())?;
        let mut class = 0;
        for (index, (cuts, &value)) in self.cuts.iter().zip(x).enumerate() {
            if value.is_nan() {
                return Err(LatticeError::NonFinite { index, value });
            }
            class = class * (cuts.len() + 1) + Self::cell_of_value(cuts, value);
        }
        Ok(class)
    }

    /// The unique class `i` with `b ⊑ Π(i)`.
    pub fn class_of(&self, b: &IntervalBox) -> Result<usize, LatticeError> {
        let dims = match b {
            IntervalBox::Bottom => return Err(LatticeError::Bottom),
            IntervalBox::Dims(d) => d,
        };
        check_dims(self.dim(), dims.len())?;
        let mut class = 0;
        for (dim, (cuts, itv)) in self.cuts.iter().zip(dims).enumerate() {
            let lo_cell = Self::cell_of_value(cuts, itv.lo);
            let hi_cell = if itv.hi_open {
                cuts.partition_point(|&c| c < itv.hi)
            } else {
                Self::cell_of_value(cuts, itv.hi)
            };
            if lo_cell != hi_cell {
                return Err(LatticeError::StraddlesPartition {
                    label: b.to_string(),
                    dim,
                });
            }
            class = class * (cuts.len() + 1) + lo_cell;
        }
        Ok(class)
    }

    /// The maximal element `Π(i)` of class `i`.
    pub fn cell(&self, class: usize) -> Option<IntervalBox> {
        if class >= self.class_count() {
            return None;
        }
        let mut rem = class;
        let mut dims = Vec::with_capacity(self.dim());
        for cuts in self.cuts.iter().rev() {
            let k = cuts.len() + 1;
            let cell = rem % k;
            rem /= k;
            let lo = if cell == 0 { f64::NEG_INFINITY } else { cuts[cell - 1] };
            let itv = if cell == cuts.len() {
                Interval {
                    lo,
                    hi: f64::INFINITY,
                    hi_open: false,
                }
            } else {
                Interval {
                    lo,
                    hi: cuts[cell],
                    hi_open: true,
                }
            };
            dims.push(itv);
        }
        dims.reverse();
        Some(IntervalBox::Dims(dims))
    }
}

// ---------------------------------------------------------------------------
// serde

/// Extended reals as JSON: finite values are numbers, infinities are the
/// strings `"inf"` and `"-inf"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtReal {
    Num(f64),
    Str(String),
}

impl ExtReal {
    fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::Str("inf".into())
        } else if x == f64::NEG_INFINITY {
            ExtReal::Str("-inf".into())
        } else {
            ExtReal::Num(x)
        }
    }

    fn to_f64(&self) -> Result<f64, String> {
        match self {
            ExtReal::Num(x) => Ok(*x),
            ExtReal::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(format!("not an extended real: {other:?}")),
            },
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: ExtReal,
    hi: ExtReal,
    #[serde(default, skip_serializing_if = "is_false")]
    hi_open: bool,
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IntervalRepr {
            lo: ExtReal::from_f64(self.lo),
            hi: ExtReal::from_f64(self.hi),
            hi_open: self.hi_open,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = IntervalRepr::deserialize(d)?;
        let lo = r.lo.to_f64().map_err(D::Error::custom)?;
        let hi = r.hi.to_f64().map_err(D::Error::custom)?;
        Interval::new(lo, hi, r.hi_open).map_err(D::Error::custom)
    }
}

/// Boxes serialize as a list of intervals, bottom as `null`.
impl Serialize for IntervalBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            IntervalBox::Bottom => s.serialize_none(),
            IntervalBox::Dims(d) => s.serialize_some(d),
        }
    }
}

impl<'de> Deserialize<'de> for IntervalBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match Option::<Vec<Interval>>::deserialize(d)? {
            None => Ok(IntervalBox::Bottom),
            Some(dims) => IntervalBox::new(dims).map_err(D::Error::custom),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CutsRepr {
    PerDim(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Serialize)]
struct PartitionOut<'a> {
    cuts: &'a [Vec<f64>],
}

#[derive(Deserialize)]
struct PartitionIn {
    cuts: CutsRepr,
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PartitionOut { cuts: &self.cuts }.serialize(s)
    }
}

/// Accepts `{"cuts": [[...], ...]}` or, for one dimension, `{"cuts": [...]}`.
impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let cuts = match PartitionIn::deserialize(d)?.cuts {
            CutsRepr::PerDim(c) => c,
            CutsRepr::Flat(c) => vec![c],
        };
        Partition::new(cuts).map_err(D::Error::custom)
    }
}
