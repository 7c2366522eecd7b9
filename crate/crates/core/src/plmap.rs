//! Orientation-preserving piecewise-linear homeomorphisms of the line.
//!
//! A [`PlMap`] is stored as an ordered list of knots `(x, f(x))` together
//! with the slopes of the two unbounded tails. The canonical form has no knot
//! at which the incoming and outgoing slopes agree, except that a globally
//! affine map keeps a single base knot at `x = 0` so that its offset is
//! recorded.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Q;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlError {
    #[error("a piecewise-linear map needs at least one point")]
    NoPoints,
    #[error("breakpoints not strictly increasing at index {0}")]
    BreakpointOrder(usize),
    #[error("values not strictly increasing at index {0} (orientation)")]
    ValueOrder(usize),
    #[error("{0} tail slope is not positive (orientation)")]
    TailSlope(&'static str),
}

impl PlError {
    /// True when the error means the map reverses or collapses orientation.
    pub fn is_orientation(&self) -> bool {
        matches!(self, PlError::ValueOrder(_) | PlError::TailSlope(_))
    }
}

/// The text form of a map: knots as `["x", "f(x)"]` pairs plus the tail
/// slopes. Not necessarily canonical or even valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPl {
    pub points: Vec<(Q, Q)>,
    pub left_slope: Q,
    pub right_slope: Q,
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPl", into = "RawPl")]
pub struct PlMap {
    knots: Vec<(Q, Q)>,
    left_slope: Q,
    right_slope: Q,
}

/// `f(x) = slope * x + offset` for every `x >= threshold`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineTail {
    pub slope: Q,
    pub offset: Q,
    pub threshold: Q,
}

impl TryFrom<RawPl> for PlMap {
    type Error = PlError;
    fn try_from(raw: RawPl) -> Result<PlMap, PlError> {
        PlMap::normalize(raw)
    }
}

impl From<PlMap> for RawPl {
    fn from(f: PlMap) -> RawPl {
        RawPl {
            points: f.knots,
            left_slope: f.left_slope,
            right_slope: f.right_slope,
        }
    }
}

impl PlMap {
    /// Validates and canonicalizes a raw map.
    pub fn normalize(raw: RawPl) -> Result<PlMap, PlError> {
        let RawPl {
            points,
            left_slope,
            right_slope,
        } = raw;
        if points.is_empty() {
            return Err(PlError::NoPoints);
        }
        if !left_slope.is_positive() {
            return Err(PlError::TailSlope("left"));
        }
        if !right_slope.is_positive() {
            return Err(PlError::TailSlope("right"));
        }
        for i in 1..points.len() {
            if points[i].0 <= points[i - 1].0 {
                return Err(PlError::BreakpointOrder(i));
            }
            if points[i].1 <= points[i - 1].1 {
                return Err(PlError::ValueOrder(i));
            }
        }

        let n = points.len();
        let slope_between = |i: usize, j: usize| -> Q { (&points[j].1 - &points[i].1) / (&points[j].0 - &points[i].0) };
        // a knot survives when the slope changes across it
        let mut kept: Vec<(Q, Q)> = Vec::with_capacity(n);
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let incoming = match kept.last() {
                Some(prev) => (&points[i].1 - &prev.1) / (&points[i].0 - &prev.0),
                None => left_slope.clone(),
            };
            let outgoing = if i + 1 < n {
                slope_between(i, i + 1)
            } else {
                right_slope.clone()
            };
            if incoming != outgoing {
                kept.push(points[i].clone());
            }
        }

        if kept.is_empty() {
            debug_assert_eq!(left_slope, right_slope);
            let (x0, y0) = &points[0];
            let base = y0 - &left_slope * x0;
            return Ok(PlMap {
                knots: vec![(Q::zero(), base)],
                left_slope: right_slope.clone(),
                right_slope,
            });
        }
        Ok(PlMap {
            knots: kept,
            left_slope,
            right_slope,
        })
    }

    /// Builds a map from knots and tail slopes.
    pub fn from_points(points: Vec<(Q, Q)>, left_slope: Q, right_slope: Q) -> Result<PlMap, PlError> {
        PlMap::normalize(RawPl {
            points,
            left_slope,
            right_slope,
        })
    }

    /// `x ↦ slope * x + offset`. Panics if `slope <= 0`.
    pub fn affine(slope: Q, offset: Q) -> PlMap {
        assert!(slope.is_positive(), "affine slope must be positive");
        PlMap {
            knots: vec![(Q::zero(), offset)],
            left_slope: slope.clone(),
            right_slope: slope,
        }
    }

    pub fn identity() -> PlMap {
        PlMap::affine(Q::one(), Q::zero())
    }

    pub fn translation(by: Q) -> PlMap {
        PlMap::affine(Q::one(), by)
    }

    pub fn is_affine(&self) -> bool {
        self.knots.len() == 1 && self.left_slope == self.right_slope
    }

    pub fn is_identity(&self) -> bool {
        self.is_affine() && self.left_slope.is_one() && self.knots[0].1.is_zero()
    }

    /// Stored knots; for an affine map this is the single base knot.
    pub fn knots(&self) -> &[(Q, Q)] {
        &self.knots
    }

    /// Knots at which the slope actually changes.
    pub fn breakpoints(&self) -> &[(Q, Q)] {
        if self.is_affine() {
            &[]
        } else {
            &self.knots
        }
    }

    pub fn left_slope(&self) -> &Q {
        &self.left_slope
    }

    pub fn right_slope(&self) -> &Q {
        &self.right_slope
    }

    pub fn eval(&self, x: &Q) -> Q {
        let k = &self.knots;
        let first = &k[0];
        if *x <= first.0 {
            return &first.1 + &self.left_slope * (x - &first.0);
        }
        let last = &k[k.len() - 1];
        if *x >= last.0 {
            return &last.1 + &self.right_slope * (x - &last.0);
        }
        // first.0 < x < last.0, so there are at least two knots
        let i = k.partition_point(|(kx, _)| kx <= x);
        let (x0, y0) = &k[i - 1];
        let (x1, y1) = &k[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// The unique `x` with `f(x) = y`.
    pub fn preimage(&self, y: &Q) -> Q {
        let k = &self.knots;
        let first = &k[0];
        if *y <= first.1 {
            return &first.0 + (y - &first.1) / &self.left_slope;
        }
        let last = &k[k.len() - 1];
        if *y >= last.1 {
            return &last.0 + (y - &last.1) / &self.right_slope;
        }
        let i = k.partition_point(|(_, ky)| ky <= y);
        let (x0, y0) = &k[i - 1];
        let (x1, y1) = &k[i];
        x0 + (x1 - x0) * (y - y0) / (y1 - y0)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PlMap) -> PlMap {
        let mut xs: Vec<Q> = inner.breakpoints().iter().map(|(x, _)| x.clone()).collect();
        xs.extend(self.breakpoints().iter().map(|(x, _)| inner.preimage(x)));
        xs.sort();
        xs.dedup();
        if xs.is_empty() {
            xs.push(Q::zero());
        }
        let points = xs
            .into_iter()
            .map(|x| {
                let y = self.eval(&inner.eval(&x));
                (x, y)
            })
            .collect();
        PlMap::from_points(
            points,
            &self.left_slope * &inner.left_slope,
            &self.right_slope * &inner.right_slope,
        )
        .expect("composition of orientation-preserving maps")
    }

    pub fn inverse(&self) -> PlMap {
        let points = self.knots.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
        PlMap::from_points(points, self.left_slope.recip(), self.right_slope.recip())
            .expect("inverse of an orientation-preserving map")
    }

    pub fn affine_tail(&self) -> AffineTail {
        let (x, y) = &self.knots[self.knots.len() - 1];
        AffineTail {
            slope: self.right_slope.clone(),
            offset: y - &self.right_slope * x,
            threshold: x.clone(),
        }
    }

    /// Pointwise equality: same tails and same values at every knot of
    /// either map.
    pub fn agrees_with(&self, other: &PlMap) -> bool {
        if self.left_slope != other.left_slope || self.right_slope != other.right_slope {
            return false;
        }
        self.knots
            .iter()
            .chain(other.knots.iter())
            .all(|(x, _)| self.eval(x) == other.eval(x))
    }

    /// The least `s` such that the maps agree on `[s, +∞)`, or `None` when
    /// their tails differ. `Some(None)` means they agree everywhere.
    pub fn agreement_ray(&self, other: &PlMap) -> Option<Option<Q>> {
        if self.affine_tail().slope != other.affine_tail().slope
            || self.affine_tail().offset != other.affine_tail().offset
        {
            return None;
        }
        if self.agrees_with(other) {
            return Some(None);
        }
        let mut xs: Vec<Q> = self
            .knots
            .iter()
            .chain(other.knots.iter())
            .map(|(x, _)| x.clone())
            .collect();
        xs.sort();
        xs.dedup();
        // Scan from the right: the maps agree on [xs[i], ∞) as long as they
        // agree at every knot from i on, since both are affine in between.
        let mut start = xs.len();
        while start > 0 && self.eval(&xs[start - 1]) == other.eval(&xs[start - 1]) {
            start -= 1;
        }
        if start == xs.len() {
            // disagree at the last knot but tails coincide: impossible
            unreachable!("equal tails force agreement beyond the last knot");
        }
        Some(Some(xs[start].clone()))
    }
}

impl fmt::Debug for PlMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlMap[{}|", self.left_slope)?;
        for (i, (x, y)) in self.knots.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}->{y}")?;
        }
        write!(f, "|{}]", self.right_slope)
    }
}
