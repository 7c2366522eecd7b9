//! Acceptance criteria, one test each. Every test prints a
//! `criterion N: PASS|FAIL` line (visible with `--nocapture`) and the test
//! name itself carries the pass/fail line in the default harness output.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use leafgerm::action::{induced_germ, nontriviality_witness, Embedding};
use leafgerm::blowup::{alpha_apply, blown_germ, BlownPointSpec};
use leafgerm::harness::report::{Counterexample, SuiteReport};
use leafgerm::harness::spec::{bundled, bundled_spec};
use leafgerm::harness::suites::{replay, run_suite, BlowupContext, SuiteConfig};
use leafgerm::word::Word;
use leafgerm::Q;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn suite(name: &str, config: &SuiteConfig) -> (SuiteReport, Duration) {
    let t = Instant::now();
    let r = run_suite(name, config).unwrap_or_else(|e| panic!("{name}: {e}"));
    (r, t.elapsed())
}

fn summary(r: &SuiteReport, took: Duration) -> String {
    format!(
        "[{}: {} cases in {:.2?}{}]",
        r.suite,
        r.cases,
        took,
        r.counterexample
            .as_ref()
            .map(|c| format!(", counterexample {}", serde_json::to_string(c).unwrap()))
            .unwrap_or_default()
    )
}

fn on(examples: &[&str]) -> SuiteConfig {
    SuiteConfig {
        examples: Some(examples.iter().map(|s| s.to_string()).collect()),
        ..SuiteConfig::default()
    }
}

// Exact affine maps x ↦ a·x + b, written against num-rational directly so the
// oracle shares no code with the germ module.
type Affine = (BigRational, BigRational);

fn rat(s: &str) -> BigRational {
    s.parse().expect("rational literal")
}

fn compose(f: &Affine, g: &Affine) -> Affine {
    (&f.0 * &g.0, &f.0 * &g.1 + &f.1)
}

fn invert(f: &Affine) -> Affine {
    let a = BigRational::one() / &f.0;
    (a.clone(), -(a * &f.1))
}

// Plain PL evaluation from knots and end slopes.
struct Pl {
    knots: Vec<(BigRational, BigRational)>,
    left: BigRational,
    right: BigRational,
}

impl Pl {
    fn from_json(v: &serde_json::Value) -> Pl {
        let knots = v["points"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| (rat(p[0].as_str().unwrap()), rat(p[1].as_str().unwrap())))
            .collect();
        Pl {
            knots,
            left: rat(v["left_slope"].as_str().unwrap()),
            right: rat(v["right_slope"].as_str().unwrap()),
        }
    }

    fn inverse(&self) -> Pl {
        Pl {
            knots: self.knots.iter().map(|(x, y)| (y.clone(), x.clone())).collect(),
            left: BigRational::one() / &self.left,
            right: BigRational::one() / &self.right,
        }
    }

    fn eval(&self, x: &BigRational) -> BigRational {
        let k = &self.knots;
        if x <= &k[0].0 {
            return &k[0].1 - &self.left * (&k[0].0 - x);
        }
        for w in k.windows(2) {
            if x <= &w[1].0 {
                let s = (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0);
                return &w[0].1 + s * (x - &w[0].0);
            }
        }
        let last = k.last().unwrap();
        &last.1 + &self.right * (x - &last.0)
    }

    fn tail(&self) -> Affine {
        let last = self.knots.last().unwrap();
        (self.right.clone(), &last.1 - &self.right * &last.0)
    }
}

/// Generator name → its map on the shared positive ray of the tripod, where
/// every branch carries the same map.
fn e3_ray_maps() -> Vec<(String, Pl)> {
    let spec: serde_json::Value = serde_json::from_str(include_str!("../data/e3.json")).unwrap();
    spec["action"]["generators"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| {
            (
                g["name"].as_str().unwrap().to_string(),
                Pl::from_json(&g["branch_pl"]["R"]),
            )
        })
        .collect()
}

/// Every freely reduced word over `names` up to `len`, as (generator index,
/// inverse) letters.
fn reduced_words(n: usize, len: usize) -> Vec<Vec<(usize, bool)>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<(usize, bool)>> = vec![vec![]];
    for _ in 0..len {
        let mut next = vec![];
        for w in &frontier {
            for g in 0..n {
                for inv in [false, true] {
                    if w.last() == Some(&(g, !inv)) {
                        continue;
                    }
                    let mut v = w.clone();
                    v.push((g, inv));
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn to_word(names: &[String], w: &[(usize, bool)]) -> Word {
    let text: Vec<String> = w
        .iter()
        .map(|(g, inv)| {
            if *inv {
                format!("{}^-1", names[*g])
            } else {
                names[*g].clone()
            }
        })
        .collect();
    text.join(" ").parse().unwrap()
}

#[test]
fn criterion_01_germ_group_axioms() {
    let (r, took) = suite("germ-group-axioms", &SuiteConfig::default());
    let ok = r.passed && r.cases == 1000 && took < Duration::from_secs(5);
    verdict(1, ok, &summary(&r, took));
}

#[test]
fn criterion_02_quotient_well_defined() {
    let (r, took) = suite("germ-well-defined", &SuiteConfig::default());
    let ok = r.passed && r.cases == 500 && took < Duration::from_secs(5);
    verdict(2, ok, &summary(&r, took));
}

#[test]
fn criterion_03_left_order() {
    let (r, took) = suite("germ-left-order", &SuiteConfig::default());

    // oracle: the germ x ↦ a·x + b is positive exactly when (a, b) > (1, 0)
    // lexicographically; check against direct evaluation far beyond every
    // fixed point
    let mut cone_ok = true;
    for (a, b) in [
        ("2", "-5"),
        ("1/2", "7"),
        ("1", "1/3"),
        ("1", "-1/3"),
        ("3", "-1000000"),
    ] {
        let f = (rat(a), rat(b));
        let lex = f.0 > BigRational::one() || (f.0.is_one() && f.1 > BigRational::zero());
        let fixed = if f.0.is_one() {
            BigRational::zero()
        } else {
            &f.1 / (BigRational::one() - &f.0)
        };
        let x = fixed.abs() + BigRational::from_integer(BigInt::from(10));
        let moved_up = &f.0 * &x + &f.1 > x;
        let germ = leafgerm::germ::Germ::new(a.parse().unwrap(), b.parse().unwrap()).unwrap();
        cone_ok &= lex == moved_up && germ.is_positive() == lex;
    }
    let ok = r.passed && r.cases == 1000 && cone_ok;
    verdict(3, ok, &format!("{} cone oracle {}", summary(&r, took), cone_ok));
}

#[test]
fn criterion_04_threshold_independence() {
    let (r, took) = suite("d-threshold-independence", &SuiteConfig::default());
    // three bundled actions, 200 random maps each plus their generators
    let ok = r.passed && r.cases >= 600;
    verdict(4, ok, &summary(&r, took));
}

#[test]
fn criterion_05_d_homomorphism() {
    let (r, took) = suite("d-homomorphism", &SuiteConfig::default());

    // oracle on the tripod: d is the tail of the composed ray maps
    let maps = e3_ray_maps();
    let names: Vec<String> = maps.iter().map(|(n, _)| n.clone()).collect();
    let ex = bundled("e3").unwrap();
    let e = Embedding::root(&ex.space);
    let mut oracle_ok = true;
    for w in reduced_words(names.len(), 4) {
        let mut tail: Affine = (BigRational::one(), BigRational::zero());
        for (g, inv) in &w {
            let t = maps[*g].1.tail();
            tail = compose(&tail, &if *inv { invert(&t) } else { t });
        }
        let d = induced_germ(
            &ex.space,
            &ex.gens.compose_word(&ex.space, &to_word(&names, &w)).unwrap(),
            &e,
        );
        oracle_ok &= d.slope().to_string() == tail.0.to_string() && d.offset().to_string() == tail.1.to_string();
    }
    let ok = r.passed && r.cases == 1500 && took < Duration::from_secs(10) && oracle_ok;
    verdict(5, ok, &format!("{} tail oracle {}", summary(&r, took), oracle_ok));
}

#[test]
fn criterion_06_witness_and_branch_forgetting() {
    let (r, took) = suite("nontriviality-witness", &SuiteConfig::default());
    let ex = bundled("e2").unwrap();
    let e = Embedding::root(&ex.space);
    let h = &ex.gens.homeos()[0];
    let none = [Q::zero(), Q::int(1000), Q::int(1_000_000)]
        .iter()
        .all(|n| nontriviality_witness(&ex.space, h, &e, n).is_none());
    let trivial = induced_germ(&ex.space, h, &e).is_identity();
    let ok = r.passed && none && trivial;
    verdict(
        6,
        ok,
        &format!("{} e2: witness none {none}, d = 1 {trivial}", summary(&r, took)),
    );
}

fn sample_counts(r: &SuiteReport, example: &str) -> (usize, usize) {
    let note = &r.notes[&format!("{example}: sample points")];
    let mut it = note.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty());
    (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
}

#[test]
fn criterion_07_action_law() {
    let (r, took) = suite("alpha-action-law", &on(&["e1", "e3"]));
    let mut samples_ok = true;
    for ex in ["e1", "e3"] {
        let (all, intervals) = sample_counts(&r, ex);
        samples_ok &= all >= 100 && intervals >= 20;
    }

    // oracle on the integers: K is trivial, every interval is carried rigidly
    // to the one at n + (exponent sum)
    let ctx = BlowupContext::load("e1").unwrap();
    let mut shift_ok = true;
    for w in Word::ball(&["t".to_string()], 4) {
        let shift = w.letters().iter().map(|l| if l.inverse { -1 } else { 1 }).sum::<i64>();
        for n in -3..=3i64 {
            for t in [Q::zero(), Q::new(1, 3), Q::one()] {
                let spec = BlownPointSpec {
                    branch: "R".into(),
                    coord: Q::int(n),
                    t: Some(t.clone()),
                };
                let q = ctx.space.point_from_spec(&spec).unwrap();
                let image = alpha_apply(&ctx.space, &ctx.stab, &w, &q).unwrap();
                let expect = BlownPointSpec {
                    branch: "R".into(),
                    coord: Q::int(n + shift),
                    t: Some(t),
                };
                shift_ok &= ctx.space.point_spec(&image) == expect;
            }
        }
    }
    let ok = r.passed && samples_ok && shift_ok && took < Duration::from_secs(30);
    verdict(
        7,
        ok,
        &format!(
            "{} samples {:?}, translation oracle {shift_ok}",
            summary(&r, took),
            r.notes
        ),
    );
}

#[test]
fn criterion_08_trivial_stabilizer() {
    let (r, took) = suite("trivial-stabilizer", &on(&["e3"]));

    // oracle: on the positive ray only powers of k fix 1, up to twice the
    // checked length; φ(k) moves 1/2 so those powers move (λ̃, 1/2)
    let maps = e3_ray_maps();
    let names: Vec<String> = maps.iter().map(|(n, _)| n.clone()).collect();
    let k = names.iter().position(|n| n == "k").unwrap();
    let inverses: Vec<Pl> = maps.iter().map(|(_, f)| f.inverse()).collect();
    let one = BigRational::one();
    let mut stray = None;
    for w in reduced_words(names.len(), 8) {
        let x = w.iter().rev().fold(one.clone(), |x, (g, inv)| {
            if *inv {
                inverses[*g].eval(&x)
            } else {
                maps[*g].1.eval(&x)
            }
        });
        if x == one && w.iter().any(|(g, _)| *g != k) {
            stray = Some(to_word(&names, &w).to_string());
            break;
        }
    }
    let phi = bundled_spec("e3").unwrap().blowup.unwrap().phi["k"].clone();
    let phi_json = serde_json::to_value(&phi).unwrap();
    let moves_half = Pl::from_json(&phi_json).eval(&rat("1/2")) != rat("1/2");

    let (fault, _) = suite("trivial-stabilizer", &on(&["e3-fault-phi"]));
    let fault_word = match &fault.counterexample {
        Some(Counterexample::Stabilizer { word, .. }) => word.to_string(),
        other => format!("{other:?}"),
    };
    let replayed = fault.counterexample.as_ref().map(|c| replay(c).unwrap()) == Some(true);

    let ok = r.passed && stray.is_none() && moves_half && !fault.passed && fault_word == "k" && replayed;
    verdict(
        8,
        ok,
        &format!(
            "{} ray oracle stray {stray:?}, φ(k)(1/2) ≠ 1/2 {moves_half}, fault word `{fault_word}` replays {replayed}",
            summary(&r, took)
        ),
    );
}

#[test]
fn criterion_09_injectivity() {
    let (r, took) = suite("injectivity", &on(&["e3"]));

    // oracle: the blown-up germ has the slope of the composed tails and is the
    // identity only when they compose to the identity
    let maps = e3_ray_maps();
    let names: Vec<String> = maps.iter().map(|(n, _)| n.clone()).collect();
    let ctx = BlowupContext::load("e3").unwrap();
    let e = Embedding::root(&ctx.example.space);
    let words = reduced_words(names.len(), 5);
    let mut oracle_ok = true;
    for w in words.iter().filter(|w| !w.is_empty()) {
        let mut tail: Affine = (BigRational::one(), BigRational::zero());
        for (g, inv) in w {
            let t = maps[*g].1.tail();
            tail = compose(&tail, &if *inv { invert(&t) } else { t });
        }
        let trivial_tail = tail.0.is_one() && tail.1.is_zero();
        let g = blown_germ(&ctx.space, &ctx.stab, &to_word(&names, w), &e).unwrap();
        oracle_ok &= !trivial_tail && g.slope().to_string() == tail.0.to_string() && !g.is_identity();
    }
    let nontrivial = words.len() - 1;
    let ok = r.passed && r.cases == nontrivial && oracle_ok && took < Duration::from_secs(60);
    verdict(
        9,
        ok,
        &format!(
            "{} {nontrivial} nontrivial words, tail oracle {oracle_ok}",
            summary(&r, took)
        ),
    );
}

#[test]
fn criterion_10_structural() {
    let (r, took) = suite("structural", &SuiteConfig::default());

    let config = SuiteConfig {
        seed: 17,
        cases: Some(50),
        ..SuiteConfig::default()
    };
    let once = |s: &str| run_suite(s, &config).unwrap();
    let same = ["germ-group-axioms", "d-homomorphism", "structural"]
        .iter()
        .all(|s| serde_json::to_string(&once(s)).unwrap() == serde_json::to_string(&once(s)).unwrap());

    let ok = r.passed && r.cases >= 200 && same;
    verdict(
        10,
        ok,
        &format!("{} repeated seeds identical {same}", summary(&r, took)),
    );
}

#[test]
fn fault_coset_variant_breaks_the_action_law() {
    let (r, _) = suite("alpha-action-law", &on(&["e3-fault-coset"]));
    assert!(!r.passed);
    let c = r.counterexample.expect("counterexample");
    assert!(matches!(c, Counterexample::ActionLaw { .. }));
    assert!(replay(&c).unwrap());
}
