//! Orientation-preserving actions on a leaf space and the induced germ map.
//!
//! A [`Homeo`] permutes branches and carries one piecewise-linear coordinate
//! map per branch. The germ `d(h)` of a homeomorphism is read off the chart
//! `e` (by default the root branch): on the ray where `h∘e` lands back on
//! `e(ℝ)`, the map `e⁻¹ h e` is piecewise linear and its tail is the germ.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::germ::Germ;
use crate::leafspace::{BranchId, LeafError, LeafSpace, Point, Side};
use crate::plmap::{PlError, PlMap, RawPl};
use crate::rational::Q;
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("orientation: map on branch `{branch}` is not orientation-preserving ({source})")]
    Orientation { branch: String, source: PlError },
    #[error("malformed map on branch `{branch}`: {source}")]
    MalformedMap { branch: String, source: PlError },
    #[error("branch `{0}` is not part of the leaf space")]
    UnknownBranch(String),
    #[error("no {field} entry for branch `{branch}`")]
    MissingEntry { field: &'static str, branch: String },
    #[error("branch map is not a bijection: `{0}` is hit twice")]
    NotBijective(String),
    #[error("compatibility: `{b1}` and `{b2}` split at {expected} but their images split at {found}")]
    Departure {
        b1: String,
        b2: String,
        expected: Q,
        found: String,
    },
    #[error("compatibility: maps on `{b1}` and `{b2}` differ on their shared ray beyond {from}")]
    SharedRay { b1: String, b2: String, from: Q },
    #[error("actions are only defined on leaf spaces branching on the negative side")]
    Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("generator `{generator}`: {violation}")]
    Invalid { generator: String, violation: Violation },
    #[error("undeclared generator `{0}`")]
    UndeclaredGenerator(String),
    #[error("duplicate generator `{0}`")]
    DuplicateGenerator(String),
    #[error("branch `{0}` is referenced by the action but absent from the leaf space")]
    MissingBranch(String),
    #[error("lazy extension would exceed depth {0}")]
    ExtensionDepth(usize),
    #[error(transparent)]
    Leaf(#[from] LeafError),
    #[error("threshold {threshold} lies below the overlap ray starting at {overlap}")]
    BelowOverlap { threshold: Q, overlap: Q },
    #[error("d({word}) disagrees: composed map gives {composed}, letter product gives {product}")]
    RoutesDisagree { word: Word, composed: Germ, product: Germ },
}

/// Text form of one generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeoSpec {
    pub name: String,
    pub branch_map: BTreeMap<String, String>,
    pub branch_pl: BTreeMap<String, RawPl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub generators: Vec<HomeoSpec>,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Homeo {
    name: String,
    branch_map: Vec<BranchId>,
    branch_pl: Vec<PlMap>,
}

impl fmt::Debug for Homeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Homeo")
            .field("name", &self.name)
            .field("branch_map", &self.branch_map)
            .field("branch_pl", &self.branch_pl)
            .finish()
    }
}

impl Homeo {
    pub fn identity(l: &LeafSpace) -> Homeo {
        Homeo {
            name: "1".into(),
            branch_map: l.branch_ids().collect(),
            branch_pl: vec![PlMap::identity(); l.len()],
        }
    }

    /// The same coordinate map on every branch, branches fixed.
    pub fn uniform(l: &LeafSpace, name: &str, f: PlMap) -> Homeo {
        Homeo {
            name: name.into(),
            branch_map: l.branch_ids().collect(),
            branch_pl: vec![f; l.len()],
        }
    }

    pub fn from_parts(name: &str, branch_map: Vec<BranchId>, branch_pl: Vec<PlMap>) -> Homeo {
        assert_eq!(branch_map.len(), branch_pl.len());
        Homeo {
            name: name.into(),
            branch_map,
            branch_pl,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Homeo {
        self.name = name.into();
        self
    }

    pub fn target(&self, b: BranchId) -> BranchId {
        self.branch_map[b.0]
    }

    pub fn map_on(&self, b: BranchId) -> &PlMap {
        &self.branch_pl[b.0]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Homeo) -> Homeo {
        let branch_map = inner.branch_map.iter().map(|b| self.branch_map[b.0]).collect();
        let branch_pl = inner
            .branch_map
            .iter()
            .zip(&inner.branch_pl)
            .map(|(b, g)| self.branch_pl[b.0].compose(g))
            .collect();
        Homeo {
            name: format!("{} {}", self.name, inner.name),
            branch_map,
            branch_pl,
        }
    }

    pub fn inverse(&self) -> Homeo {
        let n = self.branch_map.len();
        let mut branch_map = vec![BranchId(0); n];
        let mut branch_pl = vec![PlMap::identity(); n];
        for (b, (target, f)) in self.branch_map.iter().zip(&self.branch_pl).enumerate() {
            branch_map[target.0] = BranchId(b);
            branch_pl[target.0] = f.inverse();
        }
        Homeo {
            name: format!("{}^-1", self.name),
            branch_map,
            branch_pl,
        }
    }

    /// Checks bijectivity and compatibility with the gluing.
    pub fn validate(&self, l: &LeafSpace) -> Result<(), Violation> {
        if l.side() != Side::Negative {
            return Err(Violation::Side);
        }
        let mut hit = vec![false; l.len()];
        for &t in &self.branch_map {
            if std::mem::replace(&mut hit[t.0], true) {
                return Err(Violation::NotBijective(l.name(t).to_string()));
            }
        }
        for b1 in l.branch_ids() {
            for b2 in l.branch_ids().filter(|b2| *b2 > b1) {
                let s = l.meet(b1, b2).expect("distinct branches");
                let (f1, f2) = (self.map_on(b1), self.map_on(b2));
                match f1.agreement_ray(f2) {
                    Some(None) => {}
                    Some(Some(r)) if r <= s => {}
                    _ => {
                        return Err(Violation::SharedRay {
                            b1: l.name(b1).into(),
                            b2: l.name(b2).into(),
                            from: s,
                        })
                    }
                }
                let expected = f1.eval(&s);
                let found = l.meet(self.target(b1), self.target(b2));
                if found.as_ref() != Some(&expected) {
                    return Err(Violation::Departure {
                        b1: l.name(b1).into(),
                        b2: l.name(b2).into(),
                        expected,
                        found: found.map_or("nowhere".into(), |q| q.to_string()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Image of a point, canonicalized.
    pub fn apply(&self, l: &LeafSpace, p: &Point) -> Result<Point, LeafError> {
        let p = l.canonical_point(p)?;
        Ok(self.apply_canonical(l, &p))
    }

    pub(crate) fn apply_canonical(&self, l: &LeafSpace, p: &Point) -> Point {
        let image = Point::new(self.target(p.branch), self.map_on(p.branch).eval(&p.coord));
        l.canonical_unchecked(&image)
    }

    /// Conjugate by `x ↦ -x` on every branch.
    pub fn reflect(&self) -> Homeo {
        Homeo {
            name: self.name.clone(),
            branch_map: self.branch_map.clone(),
            branch_pl: self.branch_pl.iter().map(reflect_map).collect(),
        }
    }

    pub fn to_spec(&self, l: &LeafSpace) -> HomeoSpec {
        HomeoSpec {
            name: self.name.clone(),
            branch_map: l
                .branch_ids()
                .map(|b| (l.name(b).to_string(), l.name(self.target(b)).to_string()))
                .collect(),
            branch_pl: l
                .branch_ids()
                .map(|b| (l.name(b).to_string(), RawPl::from(self.map_on(b).clone())))
                .collect(),
        }
    }
}

/// `x ↦ -f(-x)`.
pub fn reflect_raw(raw: &RawPl) -> RawPl {
    RawPl {
        points: raw.points.iter().rev().map(|(x, y)| (-x, -y)).collect(),
        left_slope: raw.right_slope.clone(),
        right_slope: raw.left_slope.clone(),
    }
}

fn reflect_map(f: &PlMap) -> PlMap {
    PlMap::normalize(reflect_raw(&RawPl::from(f.clone()))).expect("reflection preserves validity")
}

/// Builds and validates a generator from its text form.
pub fn validate_homeo(l: &LeafSpace, spec: &HomeoSpec) -> Result<Homeo, Violation> {
    if l.side() != Side::Negative {
        return Err(Violation::Side);
    }
    for key in spec
        .branch_map
        .keys()
        .chain(spec.branch_map.values())
        .chain(spec.branch_pl.keys())
    {
        l.id(key).map_err(|_| Violation::UnknownBranch(key.clone()))?;
    }
    let mut branch_map = Vec::with_capacity(l.len());
    let mut branch_pl = Vec::with_capacity(l.len());
    for b in l.branch_ids() {
        let name = l.name(b);
        let target = spec.branch_map.get(name).ok_or_else(|| Violation::MissingEntry {
            field: "branch_map",
            branch: name.into(),
        })?;
        branch_map.push(l.id(target).expect("checked above"));
        let raw = spec.branch_pl.get(name).ok_or_else(|| Violation::MissingEntry {
            field: "branch_pl",
            branch: name.into(),
        })?;
        let f = PlMap::normalize(raw.clone()).map_err(|source| {
            if source.is_orientation() {
                Violation::Orientation {
                    branch: name.into(),
                    source,
                }
            } else {
                Violation::MalformedMap {
                    branch: name.into(),
                    source,
                }
            }
        })?;
        branch_pl.push(f);
    }
    let h = Homeo {
        name: spec.name.clone(),
        branch_map,
        branch_pl,
    };
    h.validate(l)?;
    Ok(h)
}

/// What to do when a generator sends a branch to one the tree lacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    #[default]
    Reject,
    /// Create missing target branches, as long as tree depth stays bounded.
    Extend { max_depth: usize },
}

/// The chart `e: ℝ → L` along one branch; the root branch by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embedding {
    pub branch: BranchId,
}

impl Embedding {
    pub fn root(l: &LeafSpace) -> Embedding {
        Embedding { branch: l.root() }
    }

    pub fn at(&self, l: &LeafSpace, x: Q) -> Point {
        l.canonical_unchecked(&Point::new(self.branch, x))
    }

    /// Chart coordinate of a canonical point, if it lies on `e(ℝ)`.
    pub fn coordinate(&self, l: &LeafSpace, p: &Point) -> Option<Q> {
        (self.at(l, p.coord.clone()) == *p).then(|| p.coord.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Overlap {
    FullLine,
    Threshold(Q),
}

impl Overlap {
    pub fn threshold(&self) -> Option<&Q> {
        match self {
            Overlap::FullLine => None,
            Overlap::Threshold(t) => Some(t),
        }
    }
}

/// Least `t` with `h(e(x)) ∈ e(ℝ)` for all `x > t`.
pub fn overlap_ray(l: &LeafSpace, h: &Homeo, e: &Embedding) -> Overlap {
    let image = h.target(e.branch);
    match l.meet(image, e.branch) {
        None => Overlap::FullLine,
        Some(split) => Overlap::Threshold(h.map_on(e.branch).preimage(&split)),
    }
}

/// `d(h)`, read off `e⁻¹ h e` beyond the overlap ray.
pub fn induced_germ(l: &LeafSpace, h: &Homeo, e: &Embedding) -> Germ {
    let start = overlap_ray(l, h, e).threshold().cloned().unwrap_or_else(Q::zero);
    induced_germ_at(l, h, e, &start).expect("overlap threshold is admissible")
}

/// `d(h)` computed from the restriction of `e⁻¹ h e` to `(threshold, +∞)`.
pub fn induced_germ_at(l: &LeafSpace, h: &Homeo, e: &Embedding, threshold: &Q) -> Result<Germ, ActionError> {
    if let Overlap::Threshold(t) = overlap_ray(l, h, e) {
        if *threshold < t {
            return Err(ActionError::BelowOverlap {
                threshold: threshold.clone(),
                overlap: t,
            });
        }
    }
    let tail_start = h.map_on(e.branch).affine_tail().threshold;
    let s = Q::max(threshold, &tail_start);
    let chart = |x: Q| -> Q {
        let image = h.apply_canonical(l, &e.at(l, x));
        e.coordinate(l, &image)
            .expect("points beyond the overlap ray land on e(ℝ)")
    };
    let x1 = &s + Q::one();
    let x2 = &s + Q::int(2);
    let (y1, y2) = (chart(x1.clone()), chart(x2.clone()));
    let slope = (&y2 - &y1) / (&x2 - &x1);
    let offset = &y1 - &slope * &x1;
    debug_assert_eq!(chart(&s + Q::int(3)), &slope * (&s + Q::int(3)) + &offset);
    Ok(Germ::new(slope, offset).expect("orientation-preserving"))
}

/// Some `m > n` with `h(e(m)) ≠ e(m)`, or `None` when `h` fixes `e(x)` for
/// every large `x` (and then no such `m` exists beyond some ray).
pub fn nontriviality_witness(l: &LeafSpace, h: &Homeo, e: &Embedding, n: &Q) -> Option<Q> {
    let f = h.map_on(e.branch);
    let tail = f.affine_tail();
    if tail.slope.is_one() && tail.offset.is_zero() {
        return None;
    }
    let mut m = Q::max(n, &tail.threshold);
    if let Overlap::Threshold(t) = overlap_ray(l, h, e) {
        m = Q::max(&m, &t);
    }
    m = m + Q::one();
    // the tail line crosses the diagonal at most once
    for _ in 0..2 {
        let p = e.at(l, m.clone());
        if h.apply_canonical(l, &p) != p {
            return Some(m);
        }
        m = m + Q::one();
    }
    unreachable!("a non-identity affine tail moves one of two consecutive points")
}

/// Validated generators with cached inverses.
#[derive(Debug, Clone)]
pub struct Generators {
    names: Vec<String>,
    maps: Vec<Homeo>,
    inverses: Vec<Homeo>,
}

impl Generators {
    pub fn new(l: &LeafSpace, homeos: Vec<Homeo>) -> Result<Generators, ActionError> {
        let mut names: Vec<String> = Vec::new();
        for h in &homeos {
            if names.contains(&h.name) {
                return Err(ActionError::DuplicateGenerator(h.name.clone()));
            }
            h.validate(l).map_err(|violation| ActionError::Invalid {
                generator: h.name.clone(),
                violation,
            })?;
            names.push(h.name.clone());
        }
        let inverses = homeos.iter().map(Homeo::inverse).collect();
        Ok(Generators {
            names,
            maps: homeos,
            inverses,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn homeos(&self) -> &[Homeo] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Homeo> {
        self.names.iter().position(|n| n == name).map(|i| &self.maps[i])
    }

    pub fn check_word(&self, w: &Word) -> Result<(), ActionError> {
        for g in w.generators() {
            if !self.names.iter().any(|n| n == g) {
                return Err(ActionError::UndeclaredGenerator(g.to_string()));
            }
        }
        Ok(())
    }

    fn letter(&self, generator: &str, inverse: bool) -> Result<&Homeo, ActionError> {
        let i = self
            .names
            .iter()
            .position(|n| n == generator)
            .ok_or_else(|| ActionError::UndeclaredGenerator(generator.to_string()))?;
        Ok(if inverse { &self.inverses[i] } else { &self.maps[i] })
    }

    /// The homeomorphism a word stands for, validated after composition.
    pub fn compose_word(&self, l: &LeafSpace, w: &Word) -> Result<Homeo, ActionError> {
        let mut out = Homeo::identity(l);
        for letter in w.letters() {
            out = out.compose(self.letter(&letter.generator, letter.inverse)?);
        }
        out.validate(l).map_err(|violation| ActionError::Invalid {
            generator: w.to_string(),
            violation,
        })?;
        Ok(out.with_name(w.to_string()))
    }

    /// Applies the letters right to left.
    pub fn apply_word(&self, l: &LeafSpace, w: &Word, p: &Point) -> Result<Point, ActionError> {
        let mut p = l.canonical_point(p)?;
        for letter in w.letters().iter().rev() {
            p = self.letter(&letter.generator, letter.inverse)?.apply_canonical(l, &p);
        }
        Ok(p)
    }

    pub fn reflect(&self) -> Generators {
        Generators {
            names: self.names.clone(),
            maps: self.maps.iter().map(Homeo::reflect).collect(),
            inverses: self.inverses.iter().map(Homeo::reflect).collect(),
        }
    }

    pub fn to_spec(&self, l: &LeafSpace) -> ActionSpec {
        ActionSpec {
            generators: self.maps.iter().map(|h| h.to_spec(l)).collect(),
        }
    }
}

/// `d(w)`, computed from the composed map and from the product of the
/// letters' germs; both must agree.
pub fn evaluate_d_word(l: &LeafSpace, gens: &Generators, w: &Word, e: &Embedding) -> Result<Germ, ActionError> {
    gens.check_word(w)?;
    let composed = induced_germ(l, &gens.compose_word(l, w)?, e);
    let mut product = Germ::identity();
    for letter in w.letters() {
        let h = gens.letter(&letter.generator, letter.inverse)?;
        product = product.mul(&induced_germ(l, h, e));
    }
    if composed != product {
        return Err(ActionError::RoutesDisagree {
            word: w.clone(),
            composed,
            product,
        });
    }
    Ok(composed)
}

/// Loads an action file against a leaf space. A leaf space branching on the
/// positive side is reflected first, together with every map.
pub fn load_action(
    l: &LeafSpace,
    spec: &ActionSpec,
    extension: Extension,
) -> Result<(LeafSpace, Generators), ActionError> {
    let reflect = l.side() == Side::Positive;
    let mut space = if reflect { l.reflect() } else { l.clone() };
    let specs: Vec<HomeoSpec> = spec
        .generators
        .iter()
        .map(|g| {
            if reflect {
                HomeoSpec {
                    name: g.name.clone(),
                    branch_map: g.branch_map.clone(),
                    branch_pl: g.branch_pl.iter().map(|(k, v)| (k.clone(), reflect_raw(v))).collect(),
                }
            } else {
                g.clone()
            }
        })
        .collect();
    extend_tree(&mut space, &specs, extension)?;
    let mut homeos = Vec::new();
    for g in &specs {
        if homeos.iter().any(|h: &Homeo| h.name == g.name) {
            return Err(ActionError::DuplicateGenerator(g.name.clone()));
        }
        let h = validate_homeo(&space, g).map_err(|violation| ActionError::Invalid {
            generator: g.name.clone(),
            violation,
        })?;
        homeos.push(h);
    }
    let gens = Generators::new(&space, homeos)?;
    Ok((space, gens))
}

fn extend_tree(l: &mut LeafSpace, specs: &[HomeoSpec], extension: Extension) -> Result<(), ActionError> {
    loop {
        let mut grew = false;
        for g in specs {
            for (src, dst) in &g.branch_map {
                if l.id(dst).is_ok() {
                    continue;
                }
                let Extension::Extend { max_depth } = extension else {
                    return Err(ActionError::MissingBranch(dst.clone()));
                };
                // the new branch sits under the image of src's parent, at
                // the image of src's departure
                let Ok(src_id) = l.id(src) else { continue };
                let (Some(parent), Some(t)) = (l.parent(src_id), l.departure(src_id).cloned()) else {
                    continue;
                };
                let Some(parent_img) = g.branch_map.get(l.name(parent)).and_then(|n| l.id(n).ok()) else {
                    continue;
                };
                let Some(raw) = g.branch_pl.get(l.name(parent)) else {
                    continue;
                };
                let Ok(f) = PlMap::normalize(raw.clone()) else { continue };
                if l.depth(parent_img) + 1 > max_depth {
                    return Err(ActionError::ExtensionDepth(max_depth));
                }
                l.push_child(dst.clone(), parent_img, f.eval(&t));
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    for g in specs {
        for name in g
            .branch_map
            .keys()
            .chain(g.branch_map.values())
            .chain(g.branch_pl.keys())
        {
            if l.id(name).is_err() {
                return Err(ActionError::MissingBranch(name.clone()));
            }
        }
    }
    Ok(())
}
