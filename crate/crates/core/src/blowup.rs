//! Blowing up a marked orbit and the twisted action on the blown-up space.
//!
//! Every point `g(λ)` of the (depth-bounded) orbit of the marked point `λ`
//! is replaced by a closed interval `{g(λ)} × [0, 1]`. A word `h` acts on
//! plain points through the underlying action and on intervals by
//!
//! ```text
//! α_h(g(λ), t) = (h g(λ), φ(x⁻¹_{hgK} · h · x_{gK})(t))
//! ```
//!
//! where `K` is the stabilizer of `λ`, `x_{gK}` is the chosen representative
//! of the coset of `g`, and `φ` is an action of `K` on `[0, 1]`.
//!
//! Charts on the blown-up space insert each interval with unit length at its
//! marked coordinate; branch offsets are chosen so gluing stays the identity.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{overlap_ray, ActionError, Embedding, Generators, Overlap};
use crate::germ::Germ;
use crate::leafspace::{BranchId, BranchSpec, LeafError, LeafSpace, LeafSpaceSpec, Point, PointSpec, Shape};
use crate::plmap::{PlError, PlMap, RawPl};
use crate::rational::Q;
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlowupError {
    #[error(transparent)]
    Leaf(#[from] LeafError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("point {0} is not a marked orbit point")]
    NotMarked(String),
    #[error("plain point {0} is a marked orbit point and was replaced by an interval")]
    MarkedPlain(String),
    #[error("interval coordinate {0} is outside [0, 1]")]
    IntervalParameter(Q),
    #[error("image of {point} under `{word}` leaves the depth-bounded orbit")]
    OrbitEscape { word: Word, point: String },
    #[error("twist `{twist}` does not fix the marked point (coset representative outside its coset)")]
    TwistNotInStabilizer { twist: Word },
    #[error("twist `{twist}` is not a product of declared K generators within radius {radius}")]
    TwistOutsideK { twist: Word, radius: usize },
    #[error("phi(`{generator}`) must fix 0 and 1")]
    PhiEndpoints { generator: Word },
    #[error("phi(`{generator}`) is invalid: {source}")]
    PhiMap { generator: Word, source: PlError },
    #[error("no phi map for K generator `{0}`")]
    PhiMissing(Word),
    #[error("phi is not a homomorphism: K words for `{word}` give different maps")]
    PhiInconsistent { word: Word },
    #[error("declared K generator `{0}` does not fix the marked point")]
    NotStabilizing(Word),
    #[error("coset representative `{rep}` does not lie in the coset of `{word}`")]
    WrongCoset { word: Word, rep: Word },
    #[error("the representative of K itself must be the empty word, got `{0}`")]
    RepOfK(Word),
    #[error("word `{word}` fixes the blown-up point but is outside the declared K")]
    Unexpected { word: Word },
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlownPoint {
    Plain(Point),
    Interval { at: Point, t: Q },
}

impl fmt::Debug for BlownPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlownPoint::Plain(p) => write!(f, "Plain(#{}, {})", p.branch.0, p.coord),
            BlownPoint::Interval { at, t } => write!(f, "Interval(#{}, {}; t={})", at.branch.0, at.coord, t),
        }
    }
}

/// File form of a blown-up point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlownPointSpec {
    pub branch: String,
    pub coord: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Q>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosetEntry {
    pub word: Word,
    pub rep: Word,
}

/// The blow-up spec file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSpec {
    pub marked: PointSpec,
    #[serde(rename = "K_generators")]
    pub k_generators: Vec<Word>,
    pub phi: BTreeMap<String, RawPl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coset_table: Option<Vec<CosetEntry>>,
    pub depth: usize,
    pub ball: usize,
}

/// Per-branch chart data of the blown-up space.
#[derive(Debug, Clone)]
struct Chart {
    /// Marked points on this branch's line, by coordinate.
    marks: Vec<Point>,
    offset: Q,
}

#[derive(Debug, Clone)]
pub struct BlowupSpace {
    base: LeafSpace,
    gens: Generators,
    marked: Point,
    depth: usize,
    /// Orbit point → first word (shortlex) reaching it.
    orbit: BTreeMap<Point, Word>,
    charts: Vec<Chart>,
}

/// Orbit of `p` under words of length `<= depth`, with the shortlex-first
/// word reaching each point.
pub fn orbit_ball(
    l: &LeafSpace,
    gens: &Generators,
    p: &Point,
    depth: usize,
) -> Result<BTreeMap<Point, Word>, BlowupError> {
    let start = l.canonical_point(p)?;
    let alphabet: Vec<Word> = gens
        .names()
        .iter()
        .flat_map(|g| [Word::gen(g), Word::gen(g).inverse()])
        .collect();
    let mut orbit = BTreeMap::new();
    orbit.insert(start.clone(), Word::empty());
    let mut queue = VecDeque::from([(start, Word::empty())]);
    while let Some((q, w)) = queue.pop_front() {
        if w.len() == depth {
            continue;
        }
        for s in &alphabet {
            let image = gens.apply_word(l, s, &q)?;
            if !orbit.contains_key(&image) {
                let word = s.concat(&w);
                orbit.insert(image.clone(), word.clone());
                queue.push_back((image, word));
            }
        }
    }
    Ok(orbit)
}

/// Blows up the orbit of `marked` under words of length `<= depth`.
pub fn build_blowup(
    l: &LeafSpace,
    gens: &Generators,
    marked: &Point,
    depth: usize,
) -> Result<BlowupSpace, BlowupError> {
    let marked = l.canonical_point(marked)?;
    let orbit = orbit_ball(l, gens, &marked, depth)?;
    let mut charts: Vec<Chart> = l
        .branch_ids()
        .map(|b| {
            let marks = orbit
                .keys()
                .filter(|p| l.canonical_unchecked(&Point::new(b, p.coord.clone())) == **p)
                .cloned()
                .collect::<Vec<_>>();
            Chart {
                marks,
                offset: Q::zero(),
            }
        })
        .collect();
    for c in &mut charts {
        c.marks.sort_by(|a, b| a.coord.cmp(&b.coord));
    }
    // parents before children
    let mut order: Vec<BranchId> = l.branch_ids().collect();
    order.sort_by_key(|b| l.depth(*b));
    for b in order {
        if let (Some(p), Some(t)) = (l.parent(b), l.departure(b)) {
            let count = |c: &Chart| c.marks.iter().filter(|m| m.coord <= *t).count() as i64;
            let offset = &charts[p.0].offset + Q::int(count(&charts[p.0]) - count(&charts[b.0]));
            charts[b.0].offset = offset;
        }
    }
    Ok(BlowupSpace {
        base: l.clone(),
        gens: gens.clone(),
        marked,
        depth,
        orbit,
        charts,
    })
}

impl BlowupSpace {
    pub fn base(&self) -> &LeafSpace {
        &self.base
    }

    pub fn generators(&self) -> &Generators {
        &self.gens
    }

    pub fn marked(&self) -> &Point {
        &self.marked
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Marked orbit points with their shortlex words.
    pub fn orbit(&self) -> &BTreeMap<Point, Word> {
        &self.orbit
    }

    pub fn interval_count(&self) -> usize {
        self.orbit.len()
    }

    pub fn is_marked(&self, p: &Point) -> bool {
        self.orbit.contains_key(p)
    }

    /// `λ₀ = (λ, 1/2)`.
    pub fn base_point(&self) -> BlownPoint {
        BlownPoint::Interval {
            at: self.marked.clone(),
            t: Q::half(),
        }
    }

    /// Checks that a blown point belongs to this space.
    pub fn check(&self, q: &BlownPoint) -> Result<(), BlowupError> {
        match q {
            BlownPoint::Plain(p) => {
                let c = self.base.canonical_point(p)?;
                if c != *p {
                    return Err(
                        LeafError::UnknownBranch(format!("non-canonical {}", self.base.display_point(p))).into(),
                    );
                }
                if self.is_marked(p) {
                    return Err(BlowupError::MarkedPlain(self.base.display_point(p)));
                }
            }
            BlownPoint::Interval { at, t } => {
                if !self.is_marked(at) {
                    return Err(BlowupError::NotMarked(self.base.display_point(at)));
                }
                if t.cmp_zero().is_lt() || *t > Q::one() {
                    return Err(BlowupError::IntervalParameter(t.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn point_from_spec(&self, spec: &BlownPointSpec) -> Result<BlownPoint, BlowupError> {
        let p = self.base.point(&spec.branch, spec.coord.clone())?;
        let q = match &spec.t {
            None => BlownPoint::Plain(p),
            Some(t) => BlownPoint::Interval { at: p, t: t.clone() },
        };
        self.check(&q)?;
        Ok(q)
    }

    pub fn point_spec(&self, q: &BlownPoint) -> BlownPointSpec {
        match q {
            BlownPoint::Plain(p) => BlownPointSpec {
                branch: self.base.name(p.branch).into(),
                coord: p.coord.clone(),
                t: None,
            },
            BlownPoint::Interval { at, t } => BlownPointSpec {
                branch: self.base.name(at.branch).into(),
                coord: at.coord.clone(),
                t: Some(t.clone()),
            },
        }
    }

    pub fn display(&self, q: &BlownPoint) -> String {
        match q {
            BlownPoint::Plain(p) => self.base.display_point(p),
            BlownPoint::Interval { at, t } => format!("{} x {}", self.base.display_point(at), t),
        }
    }

    /// Coordinate of `q` in the blown-up chart of branch `b`, if `q` lies on
    /// that branch's line.
    pub fn coordinate(&self, b: BranchId, q: &BlownPoint) -> Option<Q> {
        let chart = &self.charts[b.0];
        match q {
            BlownPoint::Plain(p) => {
                if self.base.canonical_unchecked(&Point::new(b, p.coord.clone())) != *p {
                    return None;
                }
                let below = chart.marks.partition_point(|m| m.coord < p.coord);
                Some(&p.coord + Q::int(below as i64) + &chart.offset)
            }
            BlownPoint::Interval { at, t } => {
                let i = chart.marks.iter().position(|m| m == at)?;
                Some(&at.coord + Q::int(i as i64) + t + &chart.offset)
            }
        }
    }

    /// The point at blown-up coordinate `u` on branch `b`.
    pub fn point_at(&self, b: BranchId, u: &Q) -> BlownPoint {
        let chart = &self.charts[b.0];
        let v = u - &chart.offset;
        for (i, m) in chart.marks.iter().enumerate() {
            let start = &m.coord + Q::int(i as i64);
            if v < start {
                return self.plain_on(b, &v - Q::int(i as i64));
            }
            let end = &start + Q::one();
            if v <= end {
                return BlownPoint::Interval {
                    at: m.clone(),
                    t: &v - &start,
                };
            }
        }
        self.plain_on(b, &v - Q::int(chart.marks.len() as i64))
    }

    fn plain_on(&self, b: BranchId, x: Q) -> BlownPoint {
        BlownPoint::Plain(self.base.canonical_unchecked(&Point::new(b, x)))
    }

    /// The blown-up space as a leaf space in its own charts.
    pub fn leaf_space(&self) -> LeafSpace {
        let spec = LeafSpaceSpec {
            side: self.base.side(),
            branches: self
                .base
                .branch_ids()
                .map(|b| {
                    let parent = self.base.parent(b);
                    let departure = self.base.departure(b).map(|t| {
                        let p = parent.expect("non-root");
                        let chart = &self.charts[p.0];
                        let upto = chart.marks.iter().filter(|m| m.coord <= *t).count();
                        t + Q::int(upto as i64) + &chart.offset
                    });
                    BranchSpec {
                        id: self.base.name(b).into(),
                        parent: parent.map(|p| self.base.name(p).into()),
                        departure,
                    }
                })
                .collect(),
        };
        LeafSpace::from_spec(&spec).expect("blow-up preserves the branch tree")
    }

    pub fn classify(&self) -> Shape {
        self.leaf_space().classify()
    }

    fn apply_base(&self, h: &Word, p: &Point) -> Result<Point, BlowupError> {
        Ok(self.gens.apply_word(&self.base, h, p)?)
    }
}

/// Coset representatives: shortlex-first words, optionally overridden.
#[derive(Debug, Clone, Default)]
pub struct CosetOracle {
    /// Orbit point → (word naming the coset, its representative).
    overrides: BTreeMap<Point, (Word, Word)>,
}

#[derive(Debug, Clone)]
pub struct StabilizerData {
    k_generators: Vec<Word>,
    phi: Vec<PlMap>,
    coset: CosetOracle,
    /// Check that every twist fixes the marked point.
    membership_check: bool,
    radius: usize,
    /// G-word of each K-ball element → its φ image.
    k_ball: BTreeMap<Word, PlMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilizerOptions {
    /// Validate coset representatives and twists against the marked point.
    pub membership_check: bool,
    /// Radius of the ball of K-words on which φ is tabulated.
    pub k_radius: usize,
}

impl Default for StabilizerOptions {
    fn default() -> Self {
        StabilizerOptions {
            membership_check: true,
            k_radius: 12,
        }
    }
}

/// Upper bound on the tabulated K-ball.
const K_BALL_LIMIT: usize = 200_000;

impl StabilizerData {
    pub fn new(
        b: &BlowupSpace,
        k_generators: Vec<Word>,
        phi: Vec<PlMap>,
        coset_table: Option<&[CosetEntry]>,
        opts: StabilizerOptions,
    ) -> Result<StabilizerData, BlowupError> {
        assert_eq!(k_generators.len(), phi.len());
        for (k, f) in k_generators.iter().zip(&phi) {
            b.gens.check_word(k)?;
            if f.eval(&Q::zero()) != Q::zero() || f.eval(&Q::one()) != Q::one() {
                return Err(BlowupError::PhiEndpoints { generator: k.clone() });
            }
            if b.apply_base(k, &b.marked)? != b.marked {
                return Err(BlowupError::NotStabilizing(k.clone()));
            }
        }
        let mut overrides = BTreeMap::new();
        for entry in coset_table.unwrap_or(&[]) {
            b.gens.check_word(&entry.word)?;
            b.gens.check_word(&entry.rep)?;
            let p = b.apply_base(&entry.word, &b.marked)?;
            if p == b.marked && !entry.rep.is_empty() {
                return Err(BlowupError::RepOfK(entry.rep.clone()));
            }
            overrides.insert(p, (entry.word.clone(), entry.rep.clone()));
        }
        let k_ball = tabulate_phi(&k_generators, &phi, opts.k_radius)?;
        Ok(StabilizerData {
            k_generators,
            phi,
            coset: CosetOracle { overrides },
            membership_check: opts.membership_check,
            radius: opts.k_radius,
            k_ball,
        })
    }

    /// Builds the data from a spec file, looking φ up by the generator's word.
    pub fn from_spec(
        b: &BlowupSpace,
        spec: &BlowupSpec,
        opts: StabilizerOptions,
    ) -> Result<StabilizerData, BlowupError> {
        let mut phi = Vec::new();
        for k in &spec.k_generators {
            let raw = spec
                .phi
                .get(&k.to_string())
                .ok_or_else(|| BlowupError::PhiMissing(k.clone()))?;
            let f = PlMap::normalize(raw.clone()).map_err(|source| BlowupError::PhiMap {
                generator: k.clone(),
                source,
            })?;
            phi.push(f);
        }
        StabilizerData::new(b, spec.k_generators.clone(), phi, spec.coset_table.as_deref(), opts)
    }

    /// K trivial, φ trivial.
    pub fn trivial(b: &BlowupSpace) -> StabilizerData {
        StabilizerData::new(b, Vec::new(), Vec::new(), None, StabilizerOptions::default())
            .expect("trivial stabilizer data is valid")
    }

    pub fn k_generators(&self) -> &[Word] {
        &self.k_generators
    }

    pub fn phi(&self) -> &[PlMap] {
        &self.phi
    }

    /// `x_{gK}` for the coset whose orbit point is `p`.
    pub fn rep_at(&self, b: &BlowupSpace, p: &Point) -> Option<Word> {
        match self.coset.overrides.get(p) {
            Some((_, rep)) => Some(rep.clone()),
            None => b.orbit.get(p).cloned(),
        }
    }

    /// Checks every explicit representative against its coset. A wrong one
    /// is otherwise only noticed when a twist through it is evaluated.
    pub fn check_coset_table(&self, b: &BlowupSpace) -> Result<(), BlowupError> {
        for (p, (word, rep)) in &self.coset.overrides {
            if b.apply_base(rep, &b.marked)? != *p {
                return Err(BlowupError::WrongCoset {
                    word: word.clone(),
                    rep: rep.clone(),
                });
            }
        }
        Ok(())
    }

    /// `x_{gK}` for the coset of `g`.
    pub fn coset_rep(&self, b: &BlowupSpace, g: &Word) -> Result<Word, BlowupError> {
        let p = b.apply_base(g, &b.marked)?;
        self.rep_at(b, &p).ok_or_else(|| BlowupError::OrbitEscape {
            word: g.clone(),
            point: b.base.display_point(&b.marked),
        })
    }

    /// φ of a G-word lying in K.
    pub fn phi_of(&self, b: &BlowupSpace, twist: &Word) -> Result<&PlMap, BlowupError> {
        if self.membership_check && b.apply_base(twist, &b.marked)? != b.marked {
            return Err(BlowupError::TwistNotInStabilizer { twist: twist.clone() });
        }
        self.k_ball.get(twist).ok_or_else(|| BlowupError::TwistOutsideK {
            twist: twist.clone(),
            radius: self.radius,
        })
    }

    /// Nontrivial reduced K-words `k` with `φ(k)(1/2) = 1/2`, up to `radius`.
    pub fn unfaithful_at_half(&self, radius: usize) -> Option<Vec<(usize, bool)>> {
        let names: Vec<String> = (0..self.k_generators.len()).map(|i| format!("{i}")).collect();
        Word::ball(&names, radius).into_iter().skip(1).find_map(|kw| {
            let mut f = PlMap::identity();
            for l in kw.letters() {
                let i: usize = l.generator.parse().expect("index names");
                let g = if l.inverse {
                    self.phi[i].inverse()
                } else {
                    self.phi[i].clone()
                };
                f = f.compose(&g);
            }
            (f.eval(&Q::half()) == Q::half()).then(|| {
                kw.letters()
                    .iter()
                    .map(|l| (l.generator.parse().expect("index names"), l.inverse))
                    .collect()
            })
        })
    }
}

fn tabulate_phi(k_generators: &[Word], phi: &[PlMap], radius: usize) -> Result<BTreeMap<Word, PlMap>, BlowupError> {
    let mut table = BTreeMap::new();
    table.insert(Word::empty(), PlMap::identity());
    let letters: Vec<(Word, PlMap)> = k_generators
        .iter()
        .zip(phi)
        .flat_map(|(k, f)| [(k.clone(), f.clone()), (k.inverse(), f.inverse())])
        .collect();
    // (K-word letters as indices into `letters`, G-word, φ image)
    let mut layer: Vec<(Option<usize>, Word, PlMap)> = vec![(None, Word::empty(), PlMap::identity())];
    for _ in 0..radius {
        let mut next = Vec::new();
        for (last, g, f) in &layer {
            for (i, (kw, kf)) in letters.iter().enumerate() {
                if last.is_some_and(|j| j ^ 1 == i) {
                    continue;
                }
                let word = g.concat(kw);
                let image = f.compose(kf);
                match table.get(&word) {
                    Some(existing) if *existing != image => {
                        return Err(BlowupError::PhiInconsistent { word });
                    }
                    Some(_) => {}
                    None => {
                        table.insert(word.clone(), image.clone());
                    }
                }
                next.push((Some(i), word, image));
            }
        }
        if table.len() > K_BALL_LIMIT {
            break;
        }
        layer = next;
    }
    Ok(table)
}

/// `α_h(q)`.
pub fn alpha_apply(b: &BlowupSpace, s: &StabilizerData, h: &Word, q: &BlownPoint) -> Result<BlownPoint, BlowupError> {
    b.check(q)?;
    match q {
        BlownPoint::Plain(p) => {
            let image = b.apply_base(h, p)?;
            if b.is_marked(&image) {
                return Err(BlowupError::OrbitEscape {
                    word: h.clone(),
                    point: b.base.display_point(p),
                });
            }
            Ok(BlownPoint::Plain(image))
        }
        BlownPoint::Interval { at, t } => {
            let image = b.apply_base(h, at)?;
            let target_rep = s.rep_at(b, &image).ok_or_else(|| BlowupError::OrbitEscape {
                word: h.clone(),
                point: b.base.display_point(at),
            })?;
            let source_rep = s.rep_at(b, at).expect("checked marked");
            let twist = target_rep.inverse().concat(h).concat(&source_rep);
            let f = s.phi_of(b, &twist)?;
            Ok(BlownPoint::Interval {
                at: image,
                t: f.eval(t),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Discrepancy {
    /// `α_{hr}(q) ≠ α_h(α_r(q))`.
    Mismatch {
        composed: BlownPoint,
        sequential: BlownPoint,
    },
    /// `α_1(q) ≠ q`.
    IdentityMoves {
        image: BlownPoint,
    },
    Error(BlowupError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionCounterexample {
    pub h: Word,
    pub r: Word,
    pub q: BlownPoint,
    pub discrepancy: Discrepancy,
}

/// Checks one instance of the action law.
pub fn check_alpha_law(
    b: &BlowupSpace,
    s: &StabilizerData,
    h: &Word,
    r: &Word,
    q: &BlownPoint,
) -> Result<(), Discrepancy> {
    if h.is_empty() && r.is_empty() {
        let image = alpha_apply(b, s, h, q).map_err(Discrepancy::Error)?;
        return if image == *q {
            Ok(())
        } else {
            Err(Discrepancy::IdentityMoves { image })
        };
    }
    let composed = alpha_apply(b, s, &h.concat(r), q).map_err(Discrepancy::Error)?;
    let inner = alpha_apply(b, s, r, q).map_err(Discrepancy::Error)?;
    let sequential = alpha_apply(b, s, h, &inner).map_err(Discrepancy::Error)?;
    if composed == sequential {
        Ok(())
    } else {
        Err(Discrepancy::Mismatch { composed, sequential })
    }
}

/// All pairs `(h, r)` of reduced words with `|h| + |r| <= ball`.
pub fn word_pairs(generators: &[String], ball: usize) -> Vec<(Word, Word)> {
    let words = Word::ball(generators, ball);
    let mut pairs = Vec::new();
    for h in &words {
        for r in words.iter().filter(|r| h.len() + r.len() <= ball) {
            pairs.push((h.clone(), r.clone()));
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionLawSummary {
    pub pairs: usize,
    pub points: usize,
    pub checks: usize,
}

/// Checks `α_{hr} = α_h α_r` and `α_1 = id` on every sample for every word
/// pair in the ball. The first failure in (pair, sample) order is reported.
pub fn validate_alpha_action(
    b: &BlowupSpace,
    s: &StabilizerData,
    samples: &[BlownPoint],
    ball: usize,
) -> Result<ActionLawSummary, Box<ActionCounterexample>> {
    let pairs = word_pairs(b.gens.names(), ball);
    let cases: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|i| (0..samples.len()).map(move |j| (i, j)))
        .collect();
    let failure = cases
        .par_iter()
        .map(|&(i, j)| {
            let (h, r) = &pairs[i];
            check_alpha_law(b, s, h, r, &samples[j]).err().map(|d| (i, j, d))
        })
        .find_first(|x| x.is_some())
        .flatten();
    match failure {
        None => Ok(ActionLawSummary {
            pairs: pairs.len(),
            points: samples.len(),
            checks: cases.len(),
        }),
        Some((i, j, discrepancy)) => Err(Box::new(ActionCounterexample {
            h: pairs[i].0.clone(),
            r: pairs[i].1.clone(),
            q: samples[j].clone(),
            discrepancy,
        })),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StabilizerSummary {
    /// Nontrivial words moving the marked point itself.
    pub outside_k: usize,
    /// Nontrivial words fixing the marked point but moving `1/2`.
    pub inside_k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StabilizerFailure {
    Fixed(Word),
    Alpha { word: Word, error: BlowupError },
}

/// No nontrivial word of length `<= ball` fixes `(λ, 1/2)`.
pub fn stabilizer_check(
    b: &BlowupSpace,
    s: &StabilizerData,
    ball: usize,
) -> Result<StabilizerSummary, StabilizerFailure> {
    let base = b.base_point();
    let words = Word::ball(b.gens.names(), ball);
    let outcomes: Vec<Result<bool, StabilizerFailure>> = words[1..]
        .par_iter()
        .map(|w| {
            let image =
                alpha_apply(b, s, w, &base).map_err(|error| StabilizerFailure::Alpha { word: w.clone(), error })?;
            match image {
                BlownPoint::Interval { at, t } if at == b.marked => {
                    if t == Q::half() {
                        Err(StabilizerFailure::Fixed(w.clone()))
                    } else {
                        Ok(true)
                    }
                }
                _ => Ok(false),
            }
        })
        .collect();
    let mut summary = StabilizerSummary::default();
    for o in outcomes {
        if o? {
            summary.inside_k += 1;
        } else {
            summary.outside_k += 1;
        }
    }
    Ok(summary)
}

/// Shortest word `h` (within the ball) with `α_h(λ₀)` over `e((n, +∞))`.
/// `None` means the ball was exhausted, not that no such `h` exists.
pub fn positive_ray_orbit_search(
    b: &BlowupSpace,
    s: &StabilizerData,
    e: &Embedding,
    n: &Q,
    ball: usize,
) -> Result<Option<Word>, BlowupError> {
    for w in Word::ball(b.gens.names(), ball) {
        let p = b.apply_base(&w, &b.marked)?;
        let over = e.coordinate(&b.base, &p).is_some_and(|c| c > *n);
        if !over {
            continue;
        }
        if b.is_marked(&p) {
            // the whole interval α_w(λ₀) sits over e(J)
            alpha_apply(b, s, &w, &b.base_point())?;
        }
        return Ok(Some(w));
    }
    Ok(None)
}

/// Far-out behaviour of `α_w` in the blown-up chart of `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlownTail {
    pub germ: Germ,
    /// Blown-up coordinate beyond which `α_w` is affine and maps the chart
    /// into itself.
    pub threshold: Q,
}

pub fn blown_tail(b: &BlowupSpace, s: &StabilizerData, w: &Word, e: &Embedding) -> Result<BlownTail, BlowupError> {
    let h = b.gens.compose_word(&b.base, w)?;
    let f = h.map_on(e.branch);
    let marks = &b.charts[e.branch.0].marks;
    let mut x = f.affine_tail().threshold;
    if let Overlap::Threshold(t) = overlap_ray(&b.base, &h, e) {
        x = Q::max(&x, &t);
    }
    if let Some(last) = marks.last() {
        x = Q::max(&x, &last.coord);
        x = Q::max(&x, &f.preimage(&last.coord));
    }
    let chart = |x: Q| -> Result<(Q, Q), BlowupError> {
        let q = BlownPoint::Plain(e.at(&b.base, x));
        let u = b.coordinate(e.branch, &q).expect("e(x) lies on the chart");
        let image = alpha_apply(b, s, w, &q)?;
        let v = b.coordinate(e.branch, &image).expect("beyond the overlap ray");
        Ok((u, v))
    };
    let (u1, v1) = chart(&x + Q::one())?;
    let (u2, v2) = chart(&x + Q::int(2))?;
    let (u3, v3) = chart(&x + Q::int(3))?;
    let slope = (&v2 - &v1) / (&u2 - &u1);
    let offset = &v1 - &slope * &u1;
    assert_eq!(v3, &slope * &u3 + &offset, "alpha is affine beyond every mark");
    Ok(BlownTail {
        germ: Germ::new(slope, offset).expect("orientation-preserving"),
        threshold: u1 - Q::one(),
    })
}

/// `d(α_w)` on the blown-up chart.
pub fn blown_germ(b: &BlowupSpace, s: &StabilizerData, w: &Word, e: &Embedding) -> Result<Germ, BlowupError> {
    Ok(blown_tail(b, s, w, e)?.germ)
}

/// Some blown-up chart coordinate `m > n` with `α_w(e(m)) ≠ e(m)`, or
/// `None` if `α_w` fixes the far end of the chart.
pub fn blown_witness(
    b: &BlowupSpace,
    s: &StabilizerData,
    w: &Word,
    e: &Embedding,
    n: &Q,
) -> Result<Option<Q>, BlowupError> {
    let tail = blown_tail(b, s, w, e)?;
    if tail.germ.is_identity() {
        return Ok(None);
    }
    let mut m = Q::max(n, &tail.threshold) + Q::one();
    for _ in 0..2 {
        let q = b.point_at(e.branch, &m);
        if alpha_apply(b, s, w, &q)? != q {
            return Ok(Some(m));
        }
        m = m + Q::one();
    }
    unreachable!("a non-identity affine tail moves one of two consecutive points")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InjectivityFailure {
    TrivialGerm(Word),
    NoWitness { word: Word, n: Q },
    Alpha { word: Word, error: BlowupError },
}

/// Every nontrivial word of length `<= ball` has a non-identity germ on the
/// blown-up chart and moves points beyond each of `ns`.
pub fn injectivity_certificate(
    b: &BlowupSpace,
    s: &StabilizerData,
    e: &Embedding,
    ball: usize,
    ns: &[Q],
) -> Result<usize, InjectivityFailure> {
    let words = Word::ball(b.gens.names(), ball);
    let results: Vec<Result<(), InjectivityFailure>> = words[1..]
        .par_iter()
        .map(|w| {
            let alpha = |error| InjectivityFailure::Alpha { word: w.clone(), error };
            let germ = blown_germ(b, s, w, e).map_err(alpha)?;
            if germ.is_identity() {
                return Err(InjectivityFailure::TrivialGerm(w.clone()));
            }
            for n in ns {
                if blown_witness(b, s, w, e, n).map_err(alpha)?.is_none() {
                    return Err(InjectivityFailure::NoWitness {
                        word: w.clone(),
                        n: n.clone(),
                    });
                }
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok(words.len() - 1)
}

/// Deterministic sample points: interval points at orbit points whose
/// images under `ball`-words stay marked, and plain points off the orbit of
/// radius `depth + ball`.
pub fn sample_points(
    b: &BlowupSpace,
    ball: usize,
    plain_per_branch: usize,
    interval_params: &[Q],
) -> Result<Vec<BlownPoint>, BlowupError> {
    let reach = b.depth.saturating_sub(ball);
    let mut out = Vec::new();
    for (p, w) in &b.orbit {
        if w.len() <= reach {
            for t in interval_params {
                out.push(BlownPoint::Interval {
                    at: p.clone(),
                    t: t.clone(),
                });
            }
        }
    }
    let wide = orbit_ball(&b.base, &b.gens, &b.marked, b.depth + ball)?;
    for branch in b.base.branch_ids() {
        let mut taken = 0;
        let mut k: i64 = 0;
        while taken < plain_per_branch {
            // coordinates spiral out from 0 with denominator 7
            let step = if k % 2 == 0 { k / 2 } else { -(k + 1) / 2 };
            k += 1;
            let p = Point::new(branch, Q::new(5 * step + 1, 7));
            if !b.base.is_canonical(&p) || wide.contains_key(&p) {
                if k > 10_000 {
                    break;
                }
                continue;
            }
            out.push(BlownPoint::Plain(p));
            taken += 1;
        }
    }
    Ok(out)
}

/// Twist word used by `α_h` at the orbit point reached by `g`. Exposed for
/// inspection and tests.
pub fn twist_word(b: &BlowupSpace, s: &StabilizerData, h: &Word, g: &Word) -> Result<Word, BlowupError> {
    let source = s.coset_rep(b, g)?;
    let target = s.coset_rep(b, &h.concat(g))?;
    Ok(target.inverse().concat(h).concat(&source))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Homeo;
    use crate::q;

    fn z_line() -> (LeafSpace, Generators) {
        let l = LeafSpace::line();
        let g = Generators::new(&l, vec![Homeo::uniform(&l, "t", PlMap::translation(q!(1)))]).unwrap();
        (l, g)
    }

    /// ⟨k⟩ acting on a line with k(x) = 2x fixing 0, φ(k)(1/2) = 3/4.
    fn dilation() -> (LeafSpace, Generators) {
        let l = LeafSpace::line();
        let g = Generators::new(&l, vec![Homeo::uniform(&l, "k", PlMap::affine(q!(2), q!(0)))]).unwrap();
        (l, g)
    }

    fn phi_three_quarters() -> PlMap {
        PlMap::from_points(
            vec![(q!(0), q!(0)), (Q::half(), q!(3, 4)), (q!(1), q!(1))],
            q!(1),
            q!(1),
        )
        .unwrap()
    }

    #[test]
    fn blowup_examples() {
        let l = LeafSpace::line();
        let trivial = Generators::new(&l, vec![]).unwrap();
        let b = build_blowup(&l, &trivial, &Point::new(l.root(), q!(0)), 3).unwrap();
        assert_eq!(b.interval_count(), 1);

        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 3).unwrap();
        let coords: Vec<Q> = b.orbit().keys().map(|p| p.coord.clone()).collect();
        assert_eq!(coords, (-3..=3).map(Q::int).collect::<Vec<_>>());
        let off = BlownPoint::Plain(Point::new(l.root(), Q::half()));
        assert!(b.check(&off).is_ok());
        assert_eq!(b.classify(), l.classify());
    }

    #[test]
    fn chart_inserts_unit_intervals() {
        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 1).unwrap();
        let root = l.root();
        // marks at -1, 0, 1 occupy [-1,0], [1,2], [3,4]
        let at = |u: Q| b.point_at(root, &u);
        assert_eq!(at(q!(-2)), BlownPoint::Plain(Point::new(root, q!(-2))));
        assert_eq!(at(Q::half()), BlownPoint::Plain(Point::new(root, Q::half() - q!(1))));
        assert_eq!(
            at(q!(3, 2)),
            BlownPoint::Interval {
                at: Point::new(root, q!(0)),
                t: Q::half()
            }
        );
        assert_eq!(at(q!(10)), BlownPoint::Plain(Point::new(root, q!(7))));
        for u in (-20..=40).map(|i| Q::new(i, 4)) {
            assert_eq!(b.coordinate(root, &at(u.clone())), Some(u));
        }
    }

    #[test]
    fn alpha_trivial_k_keeps_interval_coordinate() {
        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 3).unwrap();
        let s = StabilizerData::trivial(&b);
        let q = BlownPoint::Interval {
            at: Point::new(l.root(), q!(1)),
            t: q!(1, 3),
        };
        let image = alpha_apply(&b, &s, &"t".parse().unwrap(), &q).unwrap();
        assert_eq!(
            image,
            BlownPoint::Interval {
                at: Point::new(l.root(), q!(2)),
                t: q!(1, 3)
            }
        );
        let plain = BlownPoint::Plain(Point::new(l.root(), Q::half()));
        assert_eq!(
            alpha_apply(&b, &s, &"t".parse().unwrap(), &plain).unwrap(),
            BlownPoint::Plain(Point::new(l.root(), q!(3, 2)))
        );
        // leaving the depth-3 orbit is reported
        let edge = BlownPoint::Interval {
            at: Point::new(l.root(), q!(3)),
            t: q!(0),
        };
        assert!(matches!(
            alpha_apply(&b, &s, &"t".parse().unwrap(), &edge),
            Err(BlowupError::OrbitEscape { .. })
        ));
    }

    #[test]
    fn alpha_twists_by_phi_on_k() {
        let (l, g) = dilation();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 2).unwrap();
        assert_eq!(b.interval_count(), 1);
        let s = StabilizerData::new(
            &b,
            vec![Word::gen("k")],
            vec![phi_three_quarters()],
            None,
            StabilizerOptions::default(),
        )
        .unwrap();
        let image = alpha_apply(&b, &s, &Word::gen("k"), &b.base_point()).unwrap();
        assert_eq!(
            image,
            BlownPoint::Interval {
                at: b.marked().clone(),
                t: q!(3, 4)
            }
        );
        assert_eq!(
            stabilizer_check(&b, &s, 3),
            Ok(StabilizerSummary {
                outside_k: 0,
                inside_k: 6
            })
        );
    }

    #[test]
    fn stabilizer_fault_is_reported() {
        let (l, g) = dilation();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 2).unwrap();
        let s = StabilizerData::new(
            &b,
            vec![Word::gen("k")],
            vec![PlMap::identity()],
            None,
            StabilizerOptions::default(),
        )
        .unwrap();
        assert_eq!(
            stabilizer_check(&b, &s, 3),
            Err(StabilizerFailure::Fixed(Word::gen("k")))
        );
        assert!(s.unfaithful_at_half(2).is_some());
    }

    #[test]
    fn stabilizer_data_validation() {
        let (l, g) = dilation();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 2).unwrap();
        let moves_one = PlMap::affine(q!(2), q!(0));
        assert!(matches!(
            StabilizerData::new(
                &b,
                vec![Word::gen("k")],
                vec![moves_one],
                None,
                StabilizerOptions::default()
            ),
            Err(BlowupError::PhiEndpoints { .. })
        ));
        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 2).unwrap();
        assert!(matches!(
            StabilizerData::new(
                &b,
                vec![Word::gen("t")],
                vec![PlMap::identity()],
                None,
                StabilizerOptions::default()
            ),
            Err(BlowupError::NotStabilizing(_))
        ));
        let table = [CosetEntry {
            word: "t".parse().unwrap(),
            rep: "t t".parse().unwrap(),
        }];
        let s = StabilizerData::new(&b, vec![], vec![], Some(&table), StabilizerOptions::default()).unwrap();
        assert!(matches!(s.check_coset_table(&b), Err(BlowupError::WrongCoset { .. })));
        let q = BlownPoint::Interval {
            at: b.marked().clone(),
            t: q!(0),
        };
        assert_eq!(
            alpha_apply(&b, &s, &"t".parse().unwrap(), &q),
            Err(BlowupError::TwistNotInStabilizer {
                twist: "t^-1".parse().unwrap()
            })
        );
        let table = [CosetEntry {
            word: Word::empty(),
            rep: "t t^-1 t".parse().unwrap(),
        }];
        assert!(matches!(
            StabilizerData::new(&b, vec![], vec![], Some(&table), StabilizerOptions::default()),
            Err(BlowupError::RepOfK(_))
        ));
    }

    #[test]
    fn action_law_on_z_and_fault_injection() {
        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 6).unwrap();
        let s = StabilizerData::trivial(&b);
        let samples = sample_points(&b, 4, 80, &[q!(0), Q::half(), q!(1), q!(1, 3)]).unwrap();
        assert!(samples.len() >= 100);
        let summary = validate_alpha_action(&b, &s, &samples, 4).unwrap();
        assert_eq!(summary.pairs, 41);

        let table = [CosetEntry {
            word: "t".parse().unwrap(),
            rep: "t t".parse().unwrap(),
        }];
        let opts = StabilizerOptions {
            membership_check: false,
            ..Default::default()
        };
        let bad = StabilizerData::new(&b, vec![], vec![], Some(&table), opts).unwrap();
        let cex = validate_alpha_action(&b, &bad, &samples, 4).unwrap_err();
        assert!(matches!(
            cex.discrepancy,
            Discrepancy::Error(BlowupError::TwistOutsideK { .. })
        ));
        // replaying the reported instance fails again
        assert!(check_alpha_law(&b, &bad, &cex.h, &cex.r, &cex.q).is_err());
    }

    #[test]
    fn orbit_search_examples() {
        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 8).unwrap();
        let s = StabilizerData::trivial(&b);
        let e = Embedding::root(&l);
        let w = positive_ray_orbit_search(&b, &s, &e, &q!(5), 8).unwrap().unwrap();
        assert_eq!(w, Word::gen("t").pow(6));
        assert_eq!(
            positive_ray_orbit_search(&b, &s, &e, &q!(-1), 8).unwrap(),
            Some(Word::empty())
        );
        assert_eq!(positive_ray_orbit_search(&b, &s, &e, &q!(5), 3).unwrap(), None);
    }

    #[test]
    fn blown_germ_of_translation() {
        let (l, g) = z_line();
        let b = build_blowup(&l, &g, &Point::new(l.root(), q!(0)), 2).unwrap();
        let s = StabilizerData::trivial(&b);
        let e = Embedding::root(&l);
        // beyond the five intervals the chart is x + 5, so t stays a unit shift
        assert_eq!(
            blown_germ(&b, &s, &Word::gen("t"), &e).unwrap(),
            Germ::new(q!(1), q!(1)).unwrap()
        );
        assert_eq!(injectivity_certificate(&b, &s, &e, 3, &[q!(0), q!(1000)]), Ok(6));
    }

    #[test]
    fn phi_consistency_is_checked() {
        // k and k k declared separately with incompatible φ images
        let k = Word::gen("k");
        let kk = k.pow(2);
        let f = phi_three_quarters();
        assert!(matches!(
            tabulate_phi(&[k, kk], &[f.clone(), f], 2),
            Err(BlowupError::PhiInconsistent { .. })
        ));
    }
}
