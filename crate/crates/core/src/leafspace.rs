//! Finite branch-tree model of a simply connected non-Hausdorff 1-manifold
//! with branching on one side.
//!
//! Every branch is a copy of the line. A non-root branch `c` with departure
//! `t_c` is glued to its parent by the identity on the open ray beyond `t_c`:
//! `(t_c, +∞)` when branching is on the negative side, `(-∞, t_c)` when it is
//! on the positive side. The points `(c, t_c)` and `(parent(c), t_c)` stay
//! distinct and cannot be separated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Q;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LeafError {
    #[error("unknown branch `{0}`")]
    UnknownBranch(String),
    #[error("duplicate branch id `{0}`")]
    DuplicateBranch(String),
    #[error("branch `{branch}` departs from undefined parent `{parent}`")]
    UnknownParent { branch: String, parent: String },
    #[error("branch `{0}` has a parent but no departure coordinate")]
    MissingDeparture(String),
    #[error("root branch `{0}` must not carry a departure coordinate")]
    RootDeparture(String),
    #[error("leaf space has no root branch")]
    NoRoot,
    #[error("leaf space has more than one root: `{0}` and `{1}`")]
    MultipleRoots(String, String),
    #[error("parent chain through `{0}` is cyclic")]
    Cycle(String),
    #[error("operation requires branching on the {0} side")]
    SideMismatch(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Negative,
    Positive,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Negative => "negative",
            Side::Positive => "positive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Line,
    OneSidedNegative,
    OneSidedPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub branch: BranchId,
    pub coord: Q,
}

impl Point {
    pub fn new(branch: BranchId, coord: Q) -> Point {
        Point { branch, coord }
    }
}

/// One entry of the leaf-space file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub departure: Option<Q>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpaceSpec {
    pub side: Side,
    pub branches: Vec<BranchSpec>,
}

/// Point as it appears in files: `{"branch": "...", "coord": "p/q"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub branch: String,
    pub coord: Q,
}

#[derive(Debug, Clone)]
struct Branch {
    name: String,
    parent: Option<BranchId>,
    departure: Option<Q>,
    depth: usize,
}

#[derive(Debug, Clone)]
pub struct LeafSpace {
    side: Side,
    root: BranchId,
    branches: Vec<Branch>,
    by_name: BTreeMap<String, BranchId>,
}

impl LeafSpace {
    pub fn from_spec(spec: &LeafSpaceSpec) -> Result<LeafSpace, LeafError> {
        let mut by_name = BTreeMap::new();
        for (i, b) in spec.branches.iter().enumerate() {
            if by_name.insert(b.id.clone(), BranchId(i)).is_some() {
                return Err(LeafError::DuplicateBranch(b.id.clone()));
            }
        }
        let mut root = None;
        let mut branches = Vec::with_capacity(spec.branches.len());
        for (i, b) in spec.branches.iter().enumerate() {
            let parent = match &b.parent {
                None => {
                    if b.departure.is_some() {
                        return Err(LeafError::RootDeparture(b.id.clone()));
                    }
                    if let Some(BranchId(r)) = root {
                        let first: &BranchSpec = &spec.branches[r];
                        return Err(LeafError::MultipleRoots(first.id.clone(), b.id.clone()));
                    }
                    root = Some(BranchId(i));
                    None
                }
                Some(p) => {
                    let pid = by_name.get(p).copied().ok_or_else(|| LeafError::UnknownParent {
                        branch: b.id.clone(),
                        parent: p.clone(),
                    })?;
                    if b.departure.is_none() {
                        return Err(LeafError::MissingDeparture(b.id.clone()));
                    }
                    Some(pid)
                }
            };
            branches.push(Branch {
                name: b.id.clone(),
                parent,
                departure: b.departure.clone(),
                depth: 0,
            });
        }
        let root = root.ok_or(LeafError::NoRoot)?;
        for i in 0..branches.len() {
            let mut depth = 0;
            let mut cur = BranchId(i);
            while let Some(p) = branches[cur.0].parent {
                depth += 1;
                if depth > branches.len() {
                    return Err(LeafError::Cycle(branches[i].name.clone()));
                }
                cur = p;
            }
            branches[i].depth = depth;
        }
        Ok(LeafSpace {
            side: spec.side,
            root,
            branches,
            by_name,
        })
    }

    pub fn to_spec(&self) -> LeafSpaceSpec {
        LeafSpaceSpec {
            side: self.side,
            branches: self
                .branches
                .iter()
                .map(|b| BranchSpec {
                    id: b.name.clone(),
                    parent: b.parent.map(|p| self.branches[p.0].name.clone()),
                    departure: b.departure.clone(),
                })
                .collect(),
        }
    }

    /// A single line.
    pub fn line() -> LeafSpace {
        LeafSpace::from_spec(&LeafSpaceSpec {
            side: Side::Negative,
            branches: vec![BranchSpec {
                id: "root".into(),
                parent: None,
                departure: None,
            }],
        })
        .expect("single line is valid")
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn root(&self) -> BranchId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branch_ids(&self) -> impl Iterator<Item = BranchId> + '_ {
        (0..self.branches.len()).map(BranchId)
    }

    pub fn id(&self, name: &str) -> Result<BranchId, LeafError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| LeafError::UnknownBranch(name.to_string()))
    }

    pub fn name(&self, b: BranchId) -> &str {
        &self.branches[b.0].name
    }

    pub fn parent(&self, b: BranchId) -> Option<BranchId> {
        self.branches[b.0].parent
    }

    pub fn departure(&self, b: BranchId) -> Option<&Q> {
        self.branches[b.0].departure.as_ref()
    }

    pub fn depth(&self, b: BranchId) -> usize {
        self.branches[b.0].depth
    }

    pub fn children(&self, b: BranchId) -> impl Iterator<Item = BranchId> + '_ {
        self.branch_ids().filter(move |c| self.parent(*c) == Some(b))
    }

    fn check(&self, b: BranchId) -> Result<(), LeafError> {
        if b.0 < self.branches.len() {
            Ok(())
        } else {
            Err(LeafError::UnknownBranch(format!("#{}", b.0)))
        }
    }

    /// `x` lies on the glued ray of a branch departing at `t`.
    fn beyond(&self, x: &Q, t: &Q) -> bool {
        match self.side {
            Side::Negative => x > t,
            Side::Positive => x < t,
        }
    }

    fn beyond_or_at(&self, x: &Q, t: &Q) -> bool {
        x == t || self.beyond(x, t)
    }

    /// Climbs from `b` while `climb(x, departure)` holds.
    fn ascend(&self, mut b: BranchId, x: &Q, climb: impl Fn(&Q, &Q) -> bool) -> BranchId {
        while let (Some(p), Some(t)) = (self.parent(b), self.departure(b)) {
            if climb(x, t) {
                b = p;
            } else {
                break;
            }
        }
        b
    }

    /// Root-most branch containing the point.
    pub fn canonical_point(&self, p: &Point) -> Result<Point, LeafError> {
        self.check(p.branch)?;
        Ok(self.canonical_unchecked(p))
    }

    pub(crate) fn canonical_unchecked(&self, p: &Point) -> Point {
        let b = self.ascend(p.branch, &p.coord, |x, t| self.beyond(x, t));
        Point::new(b, p.coord.clone())
    }

    pub fn point(&self, branch: &str, coord: Q) -> Result<Point, LeafError> {
        Ok(self.canonical_unchecked(&Point::new(self.id(branch)?, coord)))
    }

    pub fn point_from_spec(&self, spec: &PointSpec) -> Result<Point, LeafError> {
        self.point(&spec.branch, spec.coord.clone())
    }

    pub fn point_spec(&self, p: &Point) -> PointSpec {
        PointSpec {
            branch: self.name(p.branch).to_string(),
            coord: p.coord.clone(),
        }
    }

    pub fn is_canonical(&self, p: &Point) -> bool {
        self.canonical_unchecked(p) == *p
    }

    /// The branch reached from `(b, x)` by moving an arbitrarily small step
    /// towards the glued side.
    fn germ_branch(&self, b: BranchId, x: &Q) -> BranchId {
        self.ascend(b, x, |x, t| self.beyond_or_at(x, t))
    }

    /// Canonical points other than `p` that cannot be separated from it.
    pub fn non_separated(&self, p: &Point) -> Result<Vec<Point>, LeafError> {
        let p = self.canonical_point(p)?;
        let target = self.germ_branch(p.branch, &p.coord);
        Ok(self
            .branch_ids()
            .filter(|&c| c != p.branch)
            .map(|c| Point::new(c, p.coord.clone()))
            .filter(|q| self.is_canonical(q) && self.germ_branch(q.branch, &q.coord) == target)
            .collect())
    }

    pub fn ancestors(&self, b: BranchId) -> Vec<BranchId> {
        let mut out = vec![b];
        let mut cur = b;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out
    }

    /// For distinct branches, the coordinate `s` such that the two lines
    /// coincide exactly on the ray beyond `s`. `None` when `b1 == b2`.
    pub fn meet(&self, b1: BranchId, b2: BranchId) -> Option<Q> {
        if b1 == b2 {
            return None;
        }
        let a1 = self.ancestors(b1);
        let a2: BTreeSet<BranchId> = self.ancestors(b2).into_iter().collect();
        let lca = *a1.iter().find(|b| a2.contains(b)).expect("tree has a single root");
        let mut deps = Vec::new();
        for start in [b1, b2] {
            let mut cur = start;
            while cur != lca {
                deps.push(self.departure(cur).expect("non-root branch").clone());
                cur = self.parent(cur).expect("non-root branch");
            }
        }
        match self.side {
            Side::Negative => deps.into_iter().max(),
            Side::Positive => deps.into_iter().min(),
        }
    }

    pub fn classify(&self) -> Shape {
        if self.branches.len() == 1 {
            Shape::Line
        } else {
            match self.side {
                Side::Negative => Shape::OneSidedNegative,
                Side::Positive => Shape::OneSidedPositive,
            }
        }
    }

    /// One negative end per branch; the positive end is the common ray.
    pub fn negative_ends(&self) -> Result<Vec<BranchId>, LeafError> {
        if self.side != Side::Negative {
            return Err(LeafError::SideMismatch(Side::Negative));
        }
        Ok(self.branch_ids().collect())
    }

    /// Mirror image under `x ↦ -x`: branching moves to the other side.
    pub fn reflect(&self) -> LeafSpace {
        let mut out = self.clone();
        out.side = match self.side {
            Side::Negative => Side::Positive,
            Side::Positive => Side::Negative,
        };
        for b in &mut out.branches {
            b.departure = b.departure.as_ref().map(|t| -t);
        }
        out
    }

    pub fn max_depth(&self) -> usize {
        self.branches.iter().map(|b| b.depth).max().unwrap_or(0)
    }

    /// Adds a child branch. Used by lazy extension during action loading.
    pub(crate) fn push_child(&mut self, name: String, parent: BranchId, departure: Q) -> BranchId {
        let id = BranchId(self.branches.len());
        let depth = self.branches[parent.0].depth + 1;
        self.branches.push(Branch {
            name: name.clone(),
            parent: Some(parent),
            departure: Some(departure),
            depth,
        });
        self.by_name.insert(name, id);
        id
    }

    pub fn display_point(&self, p: &Point) -> String {
        format!("({}, {})", self.name(p.branch), p.coord)
    }
}
