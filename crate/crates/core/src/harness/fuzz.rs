//! Seeded random PL maps, homeomorphisms, words and leaf spaces.
//!
//! Every generated object is valid by construction; callers still validate
//! homeomorphisms after composing them with words.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{Generators, Homeo};
use crate::leafspace::{BranchSpec, LeafSpace, LeafSpaceSpec, Side};
use crate::plmap::PlMap;
use crate::word::{Letter, Word};
use crate::Q;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub max_breakpoints: usize,
    pub max_denominator: i64,
    pub max_word_length: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_breakpoints: 5,
            max_denominator: 100,
            max_word_length: 8,
        }
    }
}

/// Independent stream for case `index` of a run seeded with `seed`.
pub fn case_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) << 20);
    rng
}

pub struct Fuzzer<R: Rng> {
    pub rng: R,
    pub bounds: Bounds,
}

impl Fuzzer<ChaCha8Rng> {
    pub fn seeded(seed: u64, bounds: Bounds) -> Self {
        Fuzzer {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bounds,
        }
    }
}

impl<R: Rng> Fuzzer<R> {
    pub fn new(rng: R, bounds: Bounds) -> Self {
        Fuzzer { rng, bounds }
    }

    fn denominator(&mut self) -> i64 {
        self.rng.gen_range(1..=self.bounds.max_denominator.max(1))
    }

    /// A rational in `[-span, span]` with a bounded denominator.
    pub fn rational(&mut self, span: i64) -> Q {
        let d = self.denominator();
        Q::new(self.rng.gen_range(-span * d..=span * d), d)
    }

    /// A slope in `[1/d, 4]`.
    pub fn slope(&mut self) -> Q {
        let d = self.denominator();
        Q::new(self.rng.gen_range(1..=4 * d), d)
    }

    fn distinct_sorted(&mut self, n: usize, lo: &Q, hi: &Q) -> Vec<Q> {
        let mut xs: Vec<Q> = Vec::new();
        let mut guard = 0;
        while xs.len() < n && guard < 50 * (n + 1) {
            guard += 1;
            let d = self.denominator();
            let t = Q::new(self.rng.gen_range(1..d.max(2)), d.max(2));
            let x = lo + &(hi - lo) * &t;
            if !xs.contains(&x) {
                xs.push(x);
            }
        }
        xs.sort();
        xs
    }

    pub fn pl_map(&mut self) -> PlMap {
        let n = self.rng.gen_range(0..=self.bounds.max_breakpoints);
        if n == 0 {
            return PlMap::affine(self.slope(), self.rational(10));
        }
        let mut xs: Vec<Q> = Vec::new();
        while xs.len() < n {
            let x = self.rational(10);
            if !xs.contains(&x) {
                xs.push(x);
            }
        }
        xs.sort();
        let mut points = vec![(xs[0].clone(), self.rational(10))];
        for x in &xs[1..] {
            let (px, py) = points.last().expect("nonempty").clone();
            let y = &py + &self.slope() * &(x - &px);
            points.push((x.clone(), y));
        }
        let (l, r) = (self.slope(), self.slope());
        PlMap::from_points(points, l, r).expect("increasing by construction")
    }

    /// `f` changed only on `(-∞, cutoff)`.
    pub fn mutate_below(&mut self, f: &PlMap, cutoff: &Q) -> PlMap {
        let fc = f.eval(cutoff);
        let mut points: Vec<(Q, Q)> = Vec::new();
        let k = self.rng.gen_range(0..=self.bounds.max_breakpoints.min(3));
        let mut x = cutoff.clone();
        let mut y = fc.clone();
        for _ in 0..k {
            let dx = Q::new(self.rng.gen_range(1..=20), self.denominator());
            x = &x - &dx;
            y = &y - &self.slope() * &dx;
            points.push((x.clone(), y.clone()));
        }
        points.reverse();
        points.push((cutoff.clone(), fc));
        points.extend(f.knots().iter().filter(|(kx, _)| kx > cutoff).cloned());
        PlMap::from_points(points, self.slope(), f.right_slope().clone()).expect("increasing by construction")
    }

    /// A PL map fixing each of `fixed` (sorted, distinct).
    pub fn pl_fixing(&mut self, fixed: &[Q]) -> PlMap {
        if fixed.is_empty() {
            return self.pl_map();
        }
        let mut points: Vec<(Q, Q)> = Vec::new();
        let budget = self.bounds.max_breakpoints;
        for (i, p) in fixed.iter().enumerate() {
            points.push((p.clone(), p.clone()));
            if let Some(next) = fixed.get(i + 1) {
                let k = self.rng.gen_range(0..=budget.min(2));
                let xs = self.distinct_sorted(k, p, next);
                let ys = self.distinct_sorted(xs.len(), p, next);
                if xs.len() == ys.len() {
                    points.extend(xs.into_iter().zip(ys));
                }
            }
        }
        points.sort();
        let first = fixed[0].clone();
        let last = fixed[fixed.len() - 1].clone();
        // an extra knot on each side keeps the tails generic
        if self.rng.gen_bool(0.5) {
            let dx = Q::new(self.rng.gen_range(1..=30), self.denominator());
            let x = &first - &dx;
            points.insert(0, (x, &first - &self.slope() * &dx));
        }
        if self.rng.gen_bool(0.7) {
            let dx = Q::new(self.rng.gen_range(1..=30), self.denominator());
            let x = &last + &dx;
            points.push((x, &last + &self.slope() * &dx));
        }
        PlMap::from_points(points, self.slope(), self.slope()).expect("increasing by construction")
    }

    /// A homeomorphism of `l` fixing every branch and every departure
    /// coordinate, with independent private parts below departures.
    pub fn branch_fixing_homeo(&mut self, l: &LeafSpace, name: &str) -> Homeo {
        let mut fixed: Vec<Q> = l.branch_ids().filter_map(|b| l.departure(b).cloned()).collect();
        fixed.sort();
        fixed.dedup();
        let mut maps: Vec<Option<PlMap>> = vec![None; l.len()];
        let mut order: Vec<_> = l.branch_ids().collect();
        order.sort_by_key(|b| l.depth(*b));
        for b in order {
            let map = match (l.parent(b), l.departure(b)) {
                (Some(p), Some(t)) => {
                    let parent = maps[p.0].clone().expect("parents first");
                    let below: Vec<Q> = fixed.iter().filter(|x| *x < t).cloned().collect();
                    let private = self.pl_fixing(&below);
                    let mut points: Vec<(Q, Q)> = private
                        .knots()
                        .iter()
                        .filter(|(x, y)| x < t && y < t)
                        .cloned()
                        .collect();
                    points.push((t.clone(), t.clone()));
                    points.extend(parent.knots().iter().filter(|(x, _)| x > t).cloned());
                    let left = if points.len() > 1 || !below.is_empty() {
                        private.left_slope().clone()
                    } else {
                        self.slope()
                    };
                    PlMap::from_points(points, left, parent.right_slope().clone()).expect("increasing by construction")
                }
                _ => self.pl_fixing(&fixed),
            };
            maps[b.0] = Some(map);
        }
        Homeo::from_parts(
            name,
            l.branch_ids().collect(),
            maps.into_iter().map(|m| m.expect("all branches")).collect(),
        )
    }

    pub fn word(&mut self, generators: &[String]) -> Word {
        if generators.is_empty() {
            return Word::empty();
        }
        let len = self.rng.gen_range(0..=self.bounds.max_word_length);
        let letters = (0..len).map(|_| {
            let g = generators.choose(&mut self.rng).expect("nonempty");
            Letter::new(g.clone(), self.rng.gen_bool(0.5))
        });
        Word::from_letters(letters)
    }

    /// A random word composed with a random branch-fixing map.
    pub fn homeo(&mut self, l: &LeafSpace, gens: &Generators) -> (Word, Homeo) {
        let w = self.word(gens.names());
        let r = self.branch_fixing_homeo(l, "r");
        let h = gens
            .compose_word(l, &w)
            .expect("generated words use declared generators")
            .compose(&r)
            .with_name("random");
        (w, h)
    }

    /// A random branch tree with up to `max_branches` branches.
    pub fn leaf_space(&mut self, max_branches: usize) -> LeafSpaceSpec {
        let n = self.rng.gen_range(1..=max_branches.max(1));
        let side = if self.rng.gen_bool(0.5) {
            Side::Negative
        } else {
            Side::Positive
        };
        let mut branches = vec![BranchSpec {
            id: "b0".into(),
            parent: None,
            departure: None,
        }];
        for i in 1..n {
            let parent = self.rng.gen_range(0..i);
            branches.push(BranchSpec {
                id: format!("b{i}"),
                parent: Some(format!("b{parent}")),
                departure: Some(self.rational(5)),
            });
        }
        LeafSpaceSpec { side, branches }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FuzzKind {
    Pl,
    Homeo,
    Word,
}

/// Deterministic stream of generated objects, serialized as JSON values.
pub fn fuzz_cases(
    seed: u64,
    bounds: Bounds,
    kind: FuzzKind,
    count: usize,
    l: &LeafSpace,
    gens: &Generators,
) -> Vec<serde_json::Value> {
    (0..count)
        .map(|i| {
            let mut f = Fuzzer::new(case_rng(seed, 0, i as u64), bounds);
            match kind {
                FuzzKind::Pl => serde_json::to_value(f.pl_map()),
                FuzzKind::Homeo => serde_json::to_value(f.homeo(l, gens).1.to_spec(l)),
                FuzzKind::Word => serde_json::to_value(f.word(gens.names())),
            }
            .expect("serializable")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::validate_homeo;
    use crate::harness::spec::bundled;

    #[test]
    fn same_seed_same_stream() {
        let ex = bundled("e3").unwrap();
        for kind in [FuzzKind::Pl, FuzzKind::Homeo, FuzzKind::Word] {
            let a = fuzz_cases(0, Bounds::default(), kind, 20, &ex.space, &ex.gens);
            let b = fuzz_cases(0, Bounds::default(), kind, 20, &ex.space, &ex.gens);
            assert_eq!(a, b);
            assert_ne!(a, fuzz_cases(1, Bounds::default(), kind, 20, &ex.space, &ex.gens));
        }
    }

    #[test]
    fn zero_breakpoints_gives_affine_maps() {
        let bounds = Bounds {
            max_breakpoints: 0,
            ..Bounds::default()
        };
        let mut f = Fuzzer::seeded(7, bounds);
        assert!((0..200).all(|_| f.pl_map().is_affine()));
    }

    #[test]
    fn generated_homeos_validate() {
        for name in ["e1", "e2", "e3"] {
            let ex = bundled(name).unwrap();
            let mut f = Fuzzer::seeded(3, Bounds::default());
            for _ in 0..50 {
                let (_, h) = f.homeo(&ex.space, &ex.gens);
                let spec = h.to_spec(&ex.space);
                assert!(validate_homeo(&ex.space, &spec).is_ok(), "{name}: {spec:?}");
            }
        }
        let mut f = Fuzzer::seeded(11, Bounds::default());
        for _ in 0..100 {
            let spec = f.leaf_space(6);
            let l = LeafSpace::from_spec(&spec).unwrap();
            let l = if l.side() == Side::Positive { l.reflect() } else { l };
            let h = f.branch_fixing_homeo(&l, "r");
            assert!(h.validate(&l).is_ok());
        }
    }

    #[test]
    fn mutation_keeps_the_tail() {
        let mut f = Fuzzer::seeded(5, Bounds::default());
        for _ in 0..100 {
            let g = f.pl_map();
            let c = f.rational(10);
            let m = f.mutate_below(&g, &c);
            for i in 0..10 {
                let x = &c + &Q::new(i, 3);
                assert_eq!(m.eval(&x), g.eval(&x));
            }
        }
    }
}
