//! Named property suites, each checking one claim on generated or bundled
//! inputs. Cases run in parallel; results are ordered by case index.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::action::{
    evaluate_d_word, induced_germ, induced_germ_at, nontriviality_witness, overlap_ray, reflect_raw, validate_homeo,
    ActionSpec, Embedding, Generators, Homeo, HomeoSpec, Overlap,
};
use crate::blowup::{
    build_blowup, check_alpha_law, injectivity_certificate, positive_ray_orbit_search, sample_points, stabilizer_check,
    validate_alpha_action, BlownPoint, BlowupError, BlowupSpace, BlowupSpec, Discrepancy, InjectivityFailure,
    StabilizerData, StabilizerFailure, StabilizerOptions,
};
use crate::germ::{Germ, OrderSign};
use crate::harness::fuzz::{case_rng, Bounds, Fuzzer};
use crate::harness::report::{Counterexample, GermLaw, OrderLaw, Report, SuiteReport};
use crate::harness::spec::{
    example_from_arg, parse_str, to_canonical, Example, ExampleSpec, InputError, SpecFile, BUNDLED,
};
use crate::leafspace::{LeafSpace, LeafSpaceSpec, Point, Side};
use crate::plmap::PlMap;
use crate::word::Word;
use crate::Q;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{example}: {source}")]
    Blowup { example: String, source: BlowupError },
    #[error("{0}: the example has no blow-up data")]
    MissingBlowup(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Overrides every per-suite case count.
    pub cases: Option<usize>,
    /// Bundled names or paths; each suite has its own default list.
    pub examples: Option<Vec<String>>,
    /// Bound on `|h| + |r|` for the action law.
    pub law_ball: usize,
    /// Overrides the word-ball radius stored in blow-up specs.
    pub ball: Option<usize>,
    pub bounds: Bounds,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            cases: None,
            examples: None,
            law_ball: 4,
            ball: None,
            bounds: Bounds::default(),
        }
    }
}

impl SuiteConfig {
    fn count(&self, default: usize) -> usize {
        self.cases.unwrap_or(default)
    }

    fn examples(&self, default: &[&str]) -> Vec<String> {
        self.examples
            .clone()
            .unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect())
    }
}

/// Suite names with the claim each one checks.
pub const SUITES: [(&str, &str); 12] = [
    ("germ-group-axioms", "[f]·[g] = [fg] is a group law on germs at +∞"),
    (
        "germ-well-defined",
        "[f]·[g] does not depend on the representatives f, g",
    ),
    ("germ-left-order", "u ≺ v ⇔ u⁻¹v ∈ P is a total left-invariant order"),
    ("overlap-ray", "g·e(x) ∈ e(ℝ) for every x beyond the overlap threshold"),
    (
        "d-threshold-independence",
        "d(g) = [e⁻¹ g e] on any ray inside the overlap",
    ),
    ("d-homomorphism", "d(fg) = d(f)·d(g)"),
    (
        "nontriviality-witness",
        "h·e(m) ≠ e(m) for arbitrarily large m ⇒ d(h) ≠ 1",
    ),
    ("alpha-action-law", "α_{hr}(q) = α_h(α_r(q)) and α_1(q) = q"),
    ("trivial-stabilizer", "α_w(λ₀) ≠ λ₀ for every nontrivial w"),
    ("orbit-limit", "α_h(λ₀) ∈ e((n, +∞)) for some h"),
    (
        "injectivity",
        "d(α_w) ≠ 1 and α_w·e(m) ≠ e(m) for large m, for every nontrivial w",
    ),
    (
        "structural",
        "classify(blow-up) = classify(base); canonical files round-trip",
    ),
];

pub fn claim(name: &str) -> Option<&'static str> {
    SUITES.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}

fn stream(name: &str) -> u64 {
    SUITES.iter().position(|(n, _)| *n == name).unwrap_or(SUITES.len()) as u64 + 1
}

/// First failing case in index order.
fn first_failure<F>(n: usize, f: F) -> Option<Counterexample>
where
    F: Fn(usize) -> Result<(), Counterexample> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(f)
        .find_first(|r| r.is_err())
        .and_then(Result::err)
}

fn report(name: &str, cases: usize, notes: BTreeMap<String, String>, cex: Option<Counterexample>) -> SuiteReport {
    SuiteReport {
        suite: name.to_string(),
        claim: claim(name).unwrap_or_default().to_string(),
        passed: cex.is_none(),
        cases,
        notes,
        counterexample: cex,
    }
}

pub fn run_suite(name: &str, config: &SuiteConfig) -> Result<SuiteReport, HarnessError> {
    let seed = config.seed;
    let s = stream(name);
    let fuzzer = |i: usize| Fuzzer::new(case_rng(seed, s, i as u64), config.bounds);
    match name {
        "germ-group-axioms" => {
            let n = config.count(1000);
            let cex = first_failure(n, |i| {
                let mut fz = fuzzer(i);
                let (f, g, h) = (fz.pl_map(), fz.pl_map(), fz.pl_map());
                match germ_law_violation(&f, &g, &h) {
                    None => Ok(()),
                    Some(law) => Err(Counterexample::GermLaw { law, f, g, h }),
                }
            });
            Ok(report(name, n, BTreeMap::new(), cex))
        }
        "germ-well-defined" => {
            let n = config.count(500);
            let cex = first_failure(n, |i| {
                let mut fz = fuzzer(i);
                let (f, g) = (fz.pl_map(), fz.pl_map());
                let (cf, cg) = (fz.rational(10), fz.rational(10));
                let (f_mutated, g_mutated) = (fz.mutate_below(&f, &cf), fz.mutate_below(&g, &cg));
                if well_defined(&f, &g, &f_mutated, &g_mutated) {
                    Ok(())
                } else {
                    Err(Counterexample::WellDefined {
                        f,
                        g,
                        f_mutated,
                        g_mutated,
                    })
                }
            });
            Ok(report(name, n, BTreeMap::new(), cex))
        }
        "germ-left-order" => {
            let n = config.count(1000);
            let cex = first_failure(n, |i| {
                let mut fz = fuzzer(i);
                let f = order_sample(&mut fz, None);
                let g = order_sample(&mut fz, Some(&f));
                let h = order_sample(&mut fz, Some(&g));
                match order_violation(&f, &g, &h) {
                    None => Ok(()),
                    Some(law) => Err(Counterexample::Order { law, f, g, h }),
                }
            });
            Ok(report(name, n, BTreeMap::new(), cex))
        }
        "overlap-ray" | "d-threshold-independence" | "nontriviality-witness" => {
            let per = config.count(200);
            let mut total = 0;
            let mut notes = BTreeMap::new();
            for arg in config.examples(&["e1", "e2", "e3"]) {
                let ex = example_from_arg(&arg)?;
                let e = Embedding::root(&ex.space);
                // the generators themselves come first, then random maps
                let fixed: Vec<Homeo> = ex.gens.homeos().to_vec();
                let k = fixed.len();
                let cex = first_failure(k + per, |i| {
                    let h = if i < k {
                        fixed[i].clone()
                    } else {
                        fuzzer(i).homeo(&ex.space, &ex.gens).1
                    };
                    homeo_case(name, &arg, &ex.space, &h, &e)
                });
                total += k + per;
                if name == "nontriviality-witness" {
                    let none: Vec<&str> = ex
                        .gens
                        .homeos()
                        .iter()
                        .filter(|h| nontriviality_witness(&ex.space, h, &e, &Q::zero()).is_none())
                        .map(|h| h.name())
                        .collect();
                    notes.insert(format!("{arg}: generators without witness"), none.join(" "));
                }
                if cex.is_some() {
                    return Ok(report(name, total, notes, cex));
                }
            }
            Ok(report(name, total, notes, None))
        }
        "d-homomorphism" => {
            let per = config.count(500);
            let mut total = 0;
            for arg in config.examples(&["e1", "e2", "e3"]) {
                let ex = example_from_arg(&arg)?;
                let e = Embedding::root(&ex.space);
                let cex = first_failure(per, |i| {
                    let mut fz = fuzzer(i);
                    let (w1, w2) = (fz.word(ex.gens.names()), fz.word(ex.gens.names()));
                    homomorphism_case(&ex.space, &ex.gens, &w1, &w2, &e).map_err(|detail| {
                        Counterexample::Homomorphism {
                            example: arg.clone(),
                            w1,
                            w2,
                            detail,
                        }
                    })
                });
                total += per;
                if cex.is_some() {
                    return Ok(report(name, total, BTreeMap::new(), cex));
                }
            }
            Ok(report(name, total, BTreeMap::new(), None))
        }
        "alpha-action-law" => {
            let mut total = 0;
            let mut notes = BTreeMap::new();
            for arg in config.examples(&["e1", "e3"]) {
                let ctx = BlowupContext::load(&arg)?;
                let samples = ctx.law_samples(config.law_ball)?;
                let intervals = samples
                    .iter()
                    .filter(|q| matches!(q, BlownPoint::Interval { .. }))
                    .count();
                notes.insert(
                    format!("{arg}: sample points"),
                    format!("{} ({intervals} on intervals)", samples.len()),
                );
                match validate_alpha_action(&ctx.space, &ctx.stab, &samples, config.law_ball) {
                    Ok(summary) => total += summary.checks,
                    Err(c) => {
                        let cex = Counterexample::ActionLaw {
                            example: arg.clone(),
                            h: c.h.clone(),
                            r: c.r.clone(),
                            q: ctx.space.point_spec(&c.q),
                            detail: discrepancy_text(&ctx.space, &c.discrepancy),
                        };
                        return Ok(report(name, total, notes, Some(cex)));
                    }
                }
            }
            Ok(report(name, total, notes, None))
        }
        "trivial-stabilizer" => {
            let mut total = 0;
            let mut notes = BTreeMap::new();
            for arg in config.examples(&["e3"]) {
                let ctx = BlowupContext::load(&arg)?;
                let ball = config.ball.unwrap_or(ctx.spec.ball);
                if let Some(kw) = ctx.stab.unfaithful_at_half(ball) {
                    notes.insert(format!("{arg}: phi fixes 1/2 on K-word"), format!("{kw:?}"));
                }
                match stabilizer_check(&ctx.space, &ctx.stab, ball) {
                    Ok(summary) => {
                        total += summary.outside_k + summary.inside_k;
                        notes.insert(
                            format!("{arg}: words moving the marked point"),
                            summary.outside_k.to_string(),
                        );
                        notes.insert(format!("{arg}: words in K moving 1/2"), summary.inside_k.to_string());
                    }
                    Err(failure) => {
                        let (word, detail) = match failure {
                            StabilizerFailure::Fixed(w) => (w, "fixes the marked point and 1/2".to_string()),
                            StabilizerFailure::Alpha { word, error } => (word, error.to_string()),
                        };
                        let cex = Counterexample::Stabilizer {
                            example: arg.clone(),
                            word,
                            detail,
                        };
                        return Ok(report(name, total, notes, Some(cex)));
                    }
                }
            }
            Ok(report(name, total, notes, None))
        }
        "injectivity" => {
            let mut total = 0;
            for arg in config.examples(&["e3"]) {
                let ctx = BlowupContext::load(&arg)?;
                let ball = config.ball.unwrap_or(ctx.spec.ball);
                let e = Embedding::root(&ctx.example.space);
                match injectivity_certificate(&ctx.space, &ctx.stab, &e, ball, &witness_levels()) {
                    Ok(n) => total += n,
                    Err(failure) => {
                        let (word, detail) = match failure {
                            InjectivityFailure::TrivialGerm(w) => {
                                (w, "germ on the blown-up chart is the identity".to_string())
                            }
                            InjectivityFailure::NoWitness { word, n } => (word, format!("no moved point beyond {n}")),
                            InjectivityFailure::Alpha { word, error } => (word, error.to_string()),
                        };
                        let cex = Counterexample::Injectivity {
                            example: arg.clone(),
                            word,
                            detail,
                        };
                        return Ok(report(name, total, BTreeMap::new(), Some(cex)));
                    }
                }
            }
            Ok(report(name, total, BTreeMap::new(), None))
        }
        "orbit-limit" => {
            let mut total = 0;
            let mut notes = BTreeMap::new();
            for arg in config.examples(&["e1", "e3"]) {
                let ctx = BlowupContext::load(&arg)?;
                let ball = config.ball.unwrap_or(ctx.spec.ball);
                let e = Embedding::root(&ctx.example.space);
                for n in [0, 2, 10, 100] {
                    let n = Q::int(n);
                    total += 1;
                    match positive_ray_orbit_search(&ctx.space, &ctx.stab, &e, &n, ball) {
                        Ok(found) => {
                            let text = match found {
                                None => "exhausted".to_string(),
                                Some(w) if w.is_empty() => "empty word".to_string(),
                                Some(w) => format!("`{w}`"),
                            };
                            notes.insert(format!("{arg}: n = {n}"), text);
                        }
                        Err(err) => {
                            let cex = Counterexample::OrbitSearch {
                                example: arg.clone(),
                                n,
                                detail: err.to_string(),
                            };
                            return Ok(report(name, total, notes, Some(cex)));
                        }
                    }
                }
            }
            Ok(report(name, total, notes, None))
        }
        "structural" => structural(config),
        _ => Err(HarnessError::UnknownSuite(name.to_string())),
    }
}

pub fn run_all(config: &SuiteConfig) -> Result<Report, HarnessError> {
    let suites = SUITES
        .iter()
        .map(|(name, _)| run_suite(name, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report::new(config.seed, suites))
}

pub fn witness_levels() -> [Q; 3] {
    [Q::zero(), Q::int(1000), Q::int(1_000_000)]
}

pub fn germ_law_violation(f: &PlMap, g: &PlMap, h: &PlMap) -> Option<GermLaw> {
    let (u, v, w) = (Germ::of(f), Germ::of(g), Germ::of(h));
    let id = Germ::identity();
    if u.mul(&v).mul(&w) != u.mul(&v.mul(&w)) {
        return Some(GermLaw::Associativity);
    }
    if id.mul(&u) != u || u.mul(&id) != u || Germ::of(&PlMap::identity()) != id {
        return Some(GermLaw::Identity);
    }
    if u.mul(&u.inv()) != id || u.inv().mul(&u) != id || Germ::of(&f.inverse()) != u.inv() {
        return Some(GermLaw::Inverse);
    }
    if Germ::of(&f.compose(g)) != u.mul(&v) || Germ::of(&f.compose(g).compose(h)) != u.mul(&v).mul(&w) {
        return Some(GermLaw::Homomorphism);
    }
    None
}

pub fn well_defined(f: &PlMap, g: &PlMap, f_mutated: &PlMap, g_mutated: &PlMap) -> bool {
    let product = Germ::of(&f.compose(g));
    Germ::of(f_mutated).mul(&Germ::of(g_mutated)) == product && Germ::of(&f_mutated.compose(g_mutated)) == product
}

/// A representative whose germ is often degenerate (slope 1, or equal to a
/// previous sample), mutated below a random cutoff.
fn order_sample<R: Rng>(fz: &mut Fuzzer<R>, previous: Option<&PlMap>) -> PlMap {
    let germ = match (previous, fz.rng.gen_range(0..10)) {
        (Some(p), 0) => Germ::of(p),
        (_, 1..=3) => Germ::new(Q::one(), fz.rational(5)).expect("positive"),
        (_, 4) => Germ::new(Q::new(fz.rng.gen_range(1..=4), fz.rng.gen_range(1..=4)), Q::zero()).expect("positive"),
        _ => Germ::new(fz.slope(), fz.rational(10)).expect("positive"),
    };
    let cutoff = fz.rational(10);
    fz.mutate_below(&germ.representative(), &cutoff)
}

fn sign_far_out(f: &PlMap) -> OrderSign {
    // beyond the tail threshold and the tail's fixed point, f(x) - x has
    // constant sign
    let tail = f.affine_tail();
    let mut x = tail.threshold.clone();
    if !tail.slope.is_one() {
        let fixed = &tail.offset / &(Q::one() - &tail.slope);
        x = Q::max(&x, &fixed);
    }
    let signs: Vec<OrderSign> = [Q::one(), Q::int(1000)]
        .iter()
        .map(|d| {
            let p = &x + d;
            f.eval(&p).cmp(&p).into()
        })
        .collect();
    assert_eq!(signs[0], signs[1], "sign of f(x) - x is constant far out");
    signs[0]
}

fn reverse(o: OrderSign) -> OrderSign {
    match o {
        OrderSign::Lt => OrderSign::Gt,
        OrderSign::Eq => OrderSign::Eq,
        OrderSign::Gt => OrderSign::Lt,
    }
}

pub fn order_violation(f: &PlMap, g: &PlMap, h: &PlMap) -> Option<OrderLaw> {
    let gs = [Germ::of(f), Germ::of(g), Germ::of(h)];
    for x in &gs {
        for y in &gs {
            let c = x.compare(y);
            if c != reverse(y.compare(x)) || (c == OrderSign::Eq) != (x == y) {
                return Some(OrderLaw::Antisymmetry);
            }
        }
    }
    for x in &gs {
        for y in &gs {
            for z in &gs {
                let lt = |a: &Germ, b: &Germ| a.compare(b) == OrderSign::Lt;
                if lt(x, y) && lt(y, z) && !lt(x, z) {
                    return Some(OrderLaw::Transitivity);
                }
            }
        }
    }
    for w in &gs {
        for x in &gs {
            for y in &gs {
                if x.compare(y) != w.mul(x).compare(&w.mul(y)) {
                    return Some(OrderLaw::LeftInvariance);
                }
            }
        }
    }
    for (rep, germ) in [f, g, h].into_iter().zip(&gs) {
        if germ.compare(&Germ::identity()) != sign_far_out(rep) {
            return Some(OrderLaw::Cone);
        }
    }
    None
}

fn homeo_case(suite: &str, example: &str, l: &LeafSpace, h: &Homeo, e: &Embedding) -> Result<(), Counterexample> {
    let homeo = || h.to_spec(l);
    match suite {
        "overlap-ray" => overlap_case(l, h, e).map_err(|x| Counterexample::Overlap {
            example: example.to_string(),
            homeo: homeo(),
            x,
        }),
        "d-threshold-independence" => threshold_case(l, h, e).map_err(|detail| Counterexample::Threshold {
            example: example.to_string(),
            homeo: homeo(),
            detail,
        }),
        _ => witness_case(l, h, e).map_err(|detail| Counterexample::Witness {
            example: example.to_string(),
            homeo: homeo(),
            detail,
        }),
    }
}

/// Returns a sample coordinate where the overlap threshold is wrong.
pub fn overlap_case(l: &LeafSpace, h: &Homeo, e: &Embedding) -> Result<(), Q> {
    let lands = |x: &Q| e.coordinate(l, &h.apply_canonical(l, &e.at(l, x.clone()))).is_some();
    match overlap_ray(l, h, e) {
        Overlap::FullLine => {
            for x in [-1000, -7, 0, 3, 1000].map(Q::int) {
                if !lands(&x) {
                    return Err(x);
                }
            }
        }
        Overlap::Threshold(t) => {
            for d in [Q::new(1, 97), Q::new(1, 3), Q::one(), Q::int(10), Q::int(1000)] {
                let x = &t + &d;
                if !lands(&x) {
                    return Err(x);
                }
            }
            // the threshold is sharp
            for d in [Q::zero(), Q::new(1, 1000)] {
                let x = &t - &d;
                if lands(&x) {
                    return Err(x);
                }
            }
        }
    }
    Ok(())
}

pub fn threshold_case(l: &LeafSpace, h: &Homeo, e: &Embedding) -> Result<(), String> {
    let t = overlap_ray(l, h, e).threshold().cloned().unwrap_or_else(Q::zero);
    let at = |s: &Q| induced_germ_at(l, h, e, s).map_err(|err| err.to_string());
    let (near, far) = (at(&t)?, at(&(&t + &Q::int(10)))?);
    if near != far {
        return Err(format!(
            "d read beyond {t} is {near}, beyond {} it is {far}",
            &t + &Q::int(10)
        ));
    }
    let inv = induced_germ(l, &h.inverse(), e);
    if inv != near.inv() {
        return Err(format!("d(h^-1) = {inv} but d(h)^-1 = {}", near.inv()));
    }
    Ok(())
}

pub fn homomorphism_case(l: &LeafSpace, gens: &Generators, w1: &Word, w2: &Word, e: &Embedding) -> Result<(), String> {
    let d = |w: &Word| evaluate_d_word(l, gens, w, e).map_err(|err| err.to_string());
    let (a, b, ab) = (d(w1)?, d(w2)?, d(&w1.concat(w2))?);
    if ab != a.mul(&b) {
        return Err(format!("d(w1 w2) = {ab} but d(w1) d(w2) = {}", a.mul(&b)));
    }
    Ok(())
}

pub fn witness_case(l: &LeafSpace, h: &Homeo, e: &Embedding) -> Result<(), String> {
    let germ = induced_germ(l, h, e);
    let mut all = true;
    for n in witness_levels() {
        match nontriviality_witness(l, h, e, &n) {
            Some(m) => {
                let p = e.at(l, m.clone());
                if m <= n || h.apply_canonical(l, &p) == p {
                    return Err(format!("reported witness {m} for n = {n} is not moved"));
                }
            }
            None => all = false,
        }
    }
    if all && germ.is_identity() {
        return Err("witnesses at every level but d(h) = 1".to_string());
    }
    if !all && !germ.is_identity() {
        return Err(format!("no witness but d(h) = {germ}"));
    }
    Ok(())
}

/// A loaded example with its blow-up and stabilizer data.
pub struct BlowupContext {
    pub example: Example,
    pub spec: BlowupSpec,
    pub space: BlowupSpace,
    pub stab: StabilizerData,
}

impl BlowupContext {
    pub fn load(arg: &str) -> Result<BlowupContext, HarnessError> {
        let example = example_from_arg(arg)?;
        BlowupContext::new(example, None)
    }

    pub fn new(example: Example, depth: Option<usize>) -> Result<BlowupContext, HarnessError> {
        let spec = example
            .blowup
            .clone()
            .ok_or_else(|| HarnessError::MissingBlowup(example.name.clone()))?;
        let wrap = |source| HarnessError::Blowup {
            example: example.name.clone(),
            source,
        };
        let marked = example
            .space
            .point_from_spec(&spec.marked)
            .map_err(|e| wrap(BlowupError::Leaf(e)))?;
        let space = build_blowup(&example.space, &example.gens, &marked, depth.unwrap_or(spec.depth)).map_err(wrap)?;
        let stab = StabilizerData::from_spec(&space, &spec, StabilizerOptions::default()).map_err(wrap)?;
        Ok(BlowupContext {
            example,
            spec,
            space,
            stab,
        })
    }

    /// At least 100 points, interval points at every orbit point that stays
    /// marked under the law ball.
    pub fn law_samples(&self, law_ball: usize) -> Result<Vec<BlownPoint>, HarnessError> {
        let params = [
            Q::zero(),
            Q::new(1, 7),
            Q::new(1, 3),
            Q::half(),
            Q::new(3, 4),
            Q::new(9, 10),
            Q::one(),
        ];
        let reach = self.space.depth().saturating_sub(law_ball);
        let intervals = self.space.orbit().values().filter(|w| w.len() <= reach).count() * params.len();
        let branches = self.example.space.len();
        let per_branch = (100usize.saturating_sub(intervals)).div_ceil(branches).max(10);
        sample_points(&self.space, law_ball, per_branch, &params).map_err(|source| HarnessError::Blowup {
            example: self.example.name.clone(),
            source,
        })
    }
}

fn discrepancy_text(b: &BlowupSpace, d: &Discrepancy) -> String {
    match d {
        Discrepancy::Mismatch { composed, sequential } => {
            format!(
                "α_(hr)(q) = {} but α_h(α_r(q)) = {}",
                b.display(composed),
                b.display(sequential)
            )
        }
        Discrepancy::IdentityMoves { image } => format!("α_1(q) = {}", b.display(image)),
        Discrepancy::Error(e) => e.to_string(),
    }
}

/// A random leaf space, one random generator and a marked point, in the
/// file form (`action` and `marked` are given in the loaded chart).
fn structural_input<R: Rng>(fz: &mut Fuzzer<R>) -> serde_json::Value {
    let spec = fz.leaf_space(6);
    let base = LeafSpace::from_spec(&spec).expect("generated trees are valid");
    let chart = if base.side() == Side::Positive {
        base.reflect()
    } else {
        base
    };
    let h = fz.branch_fixing_homeo(&chart, "r");
    let b = chart
        .branch_ids()
        .nth(fz.rng.gen_range(0..chart.len()))
        .expect("nonempty");
    let marked = chart
        .canonical_point(&Point::new(b, fz.rational(5)))
        .expect("known branch");
    json!({
        "leaf_space": spec,
        "action": ActionSpec { generators: vec![h.to_spec(&chart)] },
        "marked": chart.point_spec(&marked),
    })
}

pub fn classify_case(input: &serde_json::Value) -> Result<(), String> {
    let spec: LeafSpaceSpec = serde_json::from_value(input["leaf_space"].clone()).map_err(|e| e.to_string())?;
    let action: ActionSpec = serde_json::from_value(input["action"].clone()).map_err(|e| e.to_string())?;
    let base = LeafSpace::from_spec(&spec).map_err(|e| e.to_string())?;
    // the action is stored in the loaded chart; bring it back to the file's
    let action = if base.side() == Side::Positive {
        ActionSpec {
            generators: action
                .generators
                .into_iter()
                .map(|g| HomeoSpec {
                    branch_pl: g.branch_pl.iter().map(|(k, v)| (k.clone(), reflect_raw(v))).collect(),
                    ..g
                })
                .collect(),
        }
    } else {
        action
    };
    let example = crate::harness::spec::load_example(
        "structural",
        &ExampleSpec {
            leaf_space: spec.clone(),
            action,
            blowup: None,
        },
        Default::default(),
    )
    .map_err(|e| e.to_string())?;
    let marked = example
        .space
        .point_from_spec(&serde_json::from_value(input["marked"].clone()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let blown = build_blowup(&example.space, &example.gens, &marked, 2).map_err(|e| e.to_string())?;
    let mut lifted = blown.leaf_space();
    if base.side() == Side::Positive {
        lifted = lifted.reflect();
    }
    if lifted.classify() != base.classify() || lifted.len() != base.len() {
        return Err(format!("{:?} became {:?}", base.classify(), lifted.classify()));
    }
    Ok(())
}

pub fn round_trip_case(text: &str) -> Result<(), String> {
    let parsed = parse_str("round-trip", text).map_err(|e| e.to_string())?;
    if !parsed.canonical {
        return Err("canonical text changed on re-serialization".to_string());
    }
    let again = parse_str("round-trip", &parsed.file.to_canonical()).map_err(|e| e.to_string())?;
    if again.file != parsed.file {
        return Err("re-parsed file differs".to_string());
    }
    Ok(())
}

fn structural(config: &SuiteConfig) -> Result<SuiteReport, HarnessError> {
    let name = "structural";
    let s = stream(name);
    let n = config.count(100);
    let fuzzer = |i: usize| Fuzzer::new(case_rng(config.seed, s, i as u64), config.bounds);
    let mut cex = first_failure(n, |i| {
        let input = structural_input(&mut fuzzer(i));
        classify_case(&input).map_err(|detail| Counterexample::Structural {
            check: "classify".into(),
            input,
            detail,
        })
    });
    if cex.is_none() {
        cex = first_failure(n, |i| {
            let mut fz = fuzzer(i);
            let texts = [
                to_canonical(&fz.leaf_space(6)),
                to_canonical(&json!({ "branches": [{"id": "x"}], "side": "negative" })),
            ];
            for text in texts.iter().filter(|t| t.contains("branches")) {
                let Ok(parsed) = parse_str("round-trip", text) else {
                    continue;
                };
                let SpecFile::LeafSpace(_) = parsed.file else { continue };
                let text = parsed.file.to_canonical();
                round_trip_case(&text).map_err(|detail| Counterexample::Structural {
                    check: "round-trip".into(),
                    input: serde_json::Value::String(text.clone()),
                    detail,
                })?;
            }
            let f = fz.pl_map();
            let text = serde_json::to_string(&f).expect("serializes");
            let back: PlMap = serde_json::from_str(&text).map_err(|e| Counterexample::Structural {
                check: "pl-round-trip".into(),
                input: serde_json::Value::String(text.clone()),
                detail: e.to_string(),
            })?;
            if back != f || serde_json::to_string(&back).expect("serializes") != text {
                return Err(Counterexample::Structural {
                    check: "pl-round-trip".into(),
                    input: serde_json::Value::String(text),
                    detail: "PL map changed on re-serialization".into(),
                });
            }
            Ok(())
        });
    }
    if cex.is_none() {
        for (bundled, text) in BUNDLED {
            if let Err(detail) = round_trip_case(text) {
                cex = Some(Counterexample::Structural {
                    check: "round-trip".into(),
                    input: serde_json::Value::String(bundled.to_string()),
                    detail,
                });
                break;
            }
        }
    }
    if cex.is_none() {
        cex = determinism_case(config.seed)
            .err()
            .map(|detail| Counterexample::Structural {
                check: "determinism".into(),
                input: json!(config.seed),
                detail,
            });
    }
    Ok(report(name, 2 * n + BUNDLED.len() + 1, BTreeMap::new(), cex))
}

/// Runs a small suite twice with one seed and compares the reports.
pub fn determinism_case(seed: u64) -> Result<(), String> {
    let config = SuiteConfig {
        seed,
        cases: Some(64),
        examples: Some(vec!["e3".into()]),
        ..SuiteConfig::default()
    };
    let run = || -> Result<String, String> {
        let suites = ["germ-left-order", "d-homomorphism"]
            .iter()
            .map(|s| run_suite(s, &config).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Report::new(seed, suites).to_json())
    };
    if run()? != run()? {
        return Err("two runs with the same seed gave different reports".into());
    }
    Ok(())
}

/// Re-runs one counterexample; `true` means it still fails.
pub fn replay(cex: &Counterexample) -> Result<bool, HarnessError> {
    Ok(match cex {
        Counterexample::GermLaw { f, g, h, .. } => germ_law_violation(f, g, h).is_some(),
        Counterexample::WellDefined {
            f,
            g,
            f_mutated,
            g_mutated,
        } => !well_defined(f, g, f_mutated, g_mutated),
        Counterexample::Order { f, g, h, .. } => order_violation(f, g, h).is_some(),
        Counterexample::Overlap { example, homeo, .. }
        | Counterexample::Threshold { example, homeo, .. }
        | Counterexample::Witness { example, homeo, .. } => {
            let ex = example_from_arg(example)?;
            let h = match validate_homeo(&ex.space, homeo) {
                Ok(h) => h,
                Err(_) => return Ok(true),
            };
            let e = Embedding::root(&ex.space);
            let suite = match cex {
                Counterexample::Overlap { .. } => "overlap-ray",
                Counterexample::Threshold { .. } => "d-threshold-independence",
                _ => "nontriviality-witness",
            };
            homeo_case(suite, example, &ex.space, &h, &e).is_err()
        }
        Counterexample::Homomorphism { example, w1, w2, .. } => {
            let ex = example_from_arg(example)?;
            homomorphism_case(&ex.space, &ex.gens, w1, w2, &Embedding::root(&ex.space)).is_err()
        }
        Counterexample::ActionLaw { example, h, r, q, .. } => {
            let ctx = BlowupContext::load(example)?;
            match ctx.space.point_from_spec(q) {
                Ok(q) => check_alpha_law(&ctx.space, &ctx.stab, h, r, &q).is_err(),
                Err(_) => true,
            }
        }
        Counterexample::Stabilizer { example, word, .. } => {
            let ctx = BlowupContext::load(example)?;
            let base = ctx.space.base_point();
            match crate::blowup::alpha_apply(&ctx.space, &ctx.stab, word, &base) {
                Ok(image) => !word.is_empty() && image == base,
                Err(_) => true,
            }
        }
        Counterexample::Injectivity { example, word, .. } => {
            let ctx = BlowupContext::load(example)?;
            let e = Embedding::root(&ctx.example.space);
            match crate::blowup::blown_germ(&ctx.space, &ctx.stab, word, &e) {
                Ok(g) => {
                    g.is_identity()
                        || witness_levels().iter().any(|n| {
                            !matches!(
                                crate::blowup::blown_witness(&ctx.space, &ctx.stab, word, &e, n),
                                Ok(Some(_))
                            )
                        })
                }
                Err(_) => true,
            }
        }
        Counterexample::OrbitSearch { example, n, .. } => {
            let ctx = BlowupContext::load(example)?;
            let e = Embedding::root(&ctx.example.space);
            let ball = ctx.spec.ball;
            positive_ray_orbit_search(&ctx.space, &ctx.stab, &e, n, ball).is_err()
        }
        Counterexample::Structural { check, input, .. } => match check.as_str() {
            "classify" => classify_case(input).is_err(),
            "round-trip" => match input {
                serde_json::Value::String(s) => {
                    let text = crate::harness::spec::bundled_text(s).unwrap_or(s);
                    round_trip_case(text).is_err()
                }
                _ => true,
            },
            "pl-round-trip" => match input {
                serde_json::Value::String(s) => match serde_json::from_str::<PlMap>(s) {
                    Ok(f) => serde_json::to_string(&f).map_or(true, |t| t != *s),
                    Err(_) => true,
                },
                _ => true,
            },
            "determinism" => determinism_case(input.as_u64().unwrap_or_default()).is_err(),
            _ => true,
        },
    })
}
