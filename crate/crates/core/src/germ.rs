//! Germs at +∞ of piecewise-linear maps.
//!
//! Two finite-breakpoint maps agree on some ray `[n, +∞)` exactly when their
//! affine tails coincide, so a germ is stored as the tail pair `(a, b)`
//! standing for `x ↦ a·x + b`.
//!
//! The order is given by the cone of germs that eventually lie above the
//! diagonal: `(a, b)` is positive iff `a > 1`, or `a = 1` and `b > 0`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::plmap::PlMap;
use crate::rational::Q;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GermRepr", into = "GermRepr")]
pub struct Germ {
    slope: Q,
    offset: Q,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GermRepr {
    a: Q,
    b: Q,
}

impl TryFrom<GermRepr> for Germ {
    type Error = String;
    fn try_from(r: GermRepr) -> Result<Germ, String> {
        Germ::new(r.a, r.b).ok_or_else(|| "germ slope must be positive".to_string())
    }
}

impl From<Germ> for GermRepr {
    fn from(g: Germ) -> GermRepr {
        GermRepr {
            a: g.slope,
            b: g.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderSign {
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "GT")]
    Gt,
}

impl From<Ordering> for OrderSign {
    fn from(o: Ordering) -> OrderSign {
        match o {
            Ordering::Less => OrderSign::Lt,
            Ordering::Equal => OrderSign::Eq,
            Ordering::Greater => OrderSign::Gt,
        }
    }
}

impl fmt::Display for OrderSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderSign::Lt => "LT",
            OrderSign::Eq => "EQ",
            OrderSign::Gt => "GT",
        })
    }
}

impl Germ {
    /// `None` unless `slope > 0`.
    pub fn new(slope: Q, offset: Q) -> Option<Germ> {
        slope.is_positive().then_some(Germ { slope, offset })
    }

    pub fn identity() -> Germ {
        Germ {
            slope: Q::one(),
            offset: Q::zero(),
        }
    }

    pub fn of(f: &PlMap) -> Germ {
        let tail = f.affine_tail();
        Germ {
            slope: tail.slope,
            offset: tail.offset,
        }
    }

    pub fn slope(&self) -> &Q {
        &self.slope
    }

    pub fn offset(&self) -> &Q {
        &self.offset
    }

    pub fn is_identity(&self) -> bool {
        self.slope.is_one() && self.offset.is_zero()
    }

    /// Germ of the composition `self ∘ rhs`.
    pub fn mul(&self, rhs: &Germ) -> Germ {
        Germ {
            slope: &self.slope * &rhs.slope,
            offset: &self.slope * &rhs.offset + &self.offset,
        }
    }

    pub fn inv(&self) -> Germ {
        let slope = self.slope.recip();
        let offset = -(&self.offset * &slope);
        Germ { slope, offset }
    }

    /// Membership in the positive cone: eventually strictly above `x ↦ x`.
    pub fn is_positive(&self) -> bool {
        match self.slope.cmp(&Q::one()) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.offset.is_positive(),
        }
    }

    /// `u ≺ v` iff `u⁻¹v` is positive.
    pub fn compare(&self, other: &Germ) -> OrderSign {
        let quotient = self.inv().mul(other);
        if quotient.is_identity() {
            OrderSign::Eq
        } else if quotient.is_positive() {
            OrderSign::Lt
        } else {
            OrderSign::Gt
        }
    }

    /// A representative map: the affine map itself.
    pub fn representative(&self) -> PlMap {
        PlMap::affine(self.slope.clone(), self.offset.clone())
    }
}

impl fmt::Display for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.slope, self.offset)
    }
}

impl fmt::Debug for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Germ{self}")
    }
}
