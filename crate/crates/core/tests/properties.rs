use proptest::prelude::*;

use leafgerm::action::{induced_germ, induced_germ_at, nontriviality_witness, overlap_ray, Embedding};
use leafgerm::blowup::{alpha_apply, BlownPoint, BlownPointSpec};
use leafgerm::germ::{Germ, OrderSign};
use leafgerm::harness::fuzz::{Bounds, Fuzzer};
use leafgerm::harness::spec::bundled;
use leafgerm::harness::suites::BlowupContext;
use leafgerm::leafspace::LeafSpace;
use leafgerm::plmap::PlMap;
use leafgerm::word::Word;
use leafgerm::Q;

fn fuzzer(seed: u64) -> Fuzzer<rand_chacha::ChaCha8Rng> {
    Fuzzer::seeded(seed, Bounds::default())
}

fn rational() -> impl Strategy<Value = Q> {
    (-2000i64..2000, 1i64..60).prop_map(|(p, q)| Q::new(p, q))
}

fn sorted_pair() -> impl Strategy<Value = (Q, Q)> {
    (rational(), rational())
        .prop_filter("distinct", |(x, y)| x != y)
        .prop_map(|(x, y)| if x < y { (x, y) } else { (y, x) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pl_eval_is_strictly_monotone(seed: u64, (x, y) in sorted_pair()) {
        let f = fuzzer(seed).pl_map();
        prop_assert!(f.eval(&x) < f.eval(&y));
    }

    #[test]
    fn composition_evaluates_pointwise(seed: u64, x in rational()) {
        let mut fz = fuzzer(seed);
        let (f, g) = (fz.pl_map(), fz.pl_map());
        prop_assert_eq!(f.compose(&g).eval(&x), f.eval(&g.eval(&x)));
    }

    #[test]
    fn inverse_undoes_the_map(seed: u64, x in rational()) {
        let f = fuzzer(seed).pl_map();
        prop_assert_eq!(f.inverse().eval(&f.eval(&x)), x.clone());
        prop_assert_eq!(f.preimage(&f.eval(&x)), x);
    }

    #[test]
    fn normalization_is_idempotent(seed: u64, x in rational()) {
        let f = fuzzer(seed).pl_map();
        let again = PlMap::from_points(f.knots().to_vec(), f.left_slope().clone(), f.right_slope().clone()).unwrap();
        prop_assert_eq!(&again, &f);
        prop_assert_eq!(again.eval(&x), f.eval(&x));
        // no knot where the slope does not change
        let k = f.breakpoints();
        for i in 0..k.len() {
            let before = if i == 0 { f.left_slope().clone() } else { (&k[i].1 - &k[i - 1].1) / (&k[i].0 - &k[i - 1].0) };
            let after = if i + 1 == k.len() { f.right_slope().clone() } else { (&k[i + 1].1 - &k[i].1) / (&k[i + 1].0 - &k[i].0) };
            prop_assert_ne!(before, after);
        }
    }

    #[test]
    fn tail_matches_evaluation(seed: u64, d in 0i64..10_000) {
        let f = fuzzer(seed).pl_map();
        let tail = f.affine_tail();
        let x = &tail.threshold + &Q::new(d, 7);
        prop_assert_eq!(f.eval(&x), &(&tail.slope * &x) + &tail.offset);
    }

    #[test]
    fn mutation_below_a_cutoff_keeps_the_germ(seed: u64, cutoff in rational()) {
        let mut fz = fuzzer(seed);
        let f = fz.pl_map();
        let g = fz.mutate_below(&f, &cutoff);
        prop_assert_eq!(Germ::of(&g), Germ::of(&f));
    }

    #[test]
    fn germ_group_laws(seed: u64) {
        let mut fz = fuzzer(seed);
        let (f, g, h) = (fz.pl_map(), fz.pl_map(), fz.pl_map());
        let (u, v, w) = (Germ::of(&f), Germ::of(&g), Germ::of(&h));
        prop_assert_eq!(u.mul(&v).mul(&w), u.mul(&v.mul(&w)));
        prop_assert_eq!(u.mul(&Germ::identity()), u.clone());
        prop_assert!(u.mul(&u.inv()).is_identity());
        prop_assert_eq!(Germ::of(&f.compose(&g)), u.mul(&v));
    }

    #[test]
    fn order_is_total_and_left_invariant(seed: u64) {
        let mut fz = fuzzer(seed);
        let (u, v, w) = (Germ::of(&fz.pl_map()), Germ::of(&fz.pl_map()), Germ::of(&fz.pl_map()));
        let c = u.compare(&v);
        prop_assert_eq!(c == OrderSign::Eq, u == v);
        prop_assert_eq!(c, w.mul(&u).compare(&w.mul(&v)));
        if c == OrderSign::Lt && v.compare(&w) == OrderSign::Lt {
            prop_assert_eq!(u.compare(&w), OrderSign::Lt);
        }
        // the positive cone is a semigroup
        if u.is_positive() && v.is_positive() {
            prop_assert!(u.mul(&v).is_positive());
        }
    }
}

fn random_space(seed: u64) -> LeafSpace {
    LeafSpace::from_spec(&fuzzer(seed).leaf_space(6)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn canonical_point_is_idempotent(seed: u64, x in rational()) {
        let l = random_space(seed);
        for b in l.branch_ids().collect::<Vec<_>>() {
            let p = leafgerm::leafspace::Point::new(b, x.clone());
            let c = l.canonical_point(&p).unwrap();
            prop_assert_eq!(&l.canonical_point(&c).unwrap(), &c);
            prop_assert_eq!(&c.coord, &x);
            prop_assert!(l.ancestors(b).contains(&c.branch) || c.branch == b);
        }
    }

    #[test]
    fn non_separation_is_symmetric(seed: u64) {
        let l = random_space(seed);
        for b in l.branch_ids().collect::<Vec<_>>() {
            let Some(t) = l.departure(b).cloned() else { continue };
            let p = l.canonical_point(&leafgerm::leafspace::Point::new(b, t)).unwrap();
            for q in l.non_separated(&p).unwrap() {
                prop_assert_eq!(&q.coord, &p.coord);
                prop_assert!(l.non_separated(&q).unwrap().contains(&p));
            }
        }
    }

    #[test]
    fn words_act_by_composition(seed: u64, x in rational(), example in prop::sample::select(vec!["e1", "e2", "e3"])) {
        let ex = bundled(example).unwrap();
        let mut fz = fuzzer(seed);
        let (w1, w2) = (fz.word(ex.gens.names()), fz.word(ex.gens.names()));
        for b in ex.space.branch_ids().collect::<Vec<_>>() {
            let p = leafgerm::leafspace::Point::new(b, x.clone());
            let both = ex.gens.apply_word(&ex.space, &w1.concat(&w2), &p).unwrap();
            let staged = ex.gens.apply_word(&ex.space, &w1, &ex.gens.apply_word(&ex.space, &w2, &p).unwrap()).unwrap();
            prop_assert_eq!(&both, &staged);
            let h = ex.gens.compose_word(&ex.space, &w1.concat(&w2)).unwrap();
            prop_assert_eq!(h.apply(&ex.space, &p).unwrap(), both);
        }
    }

    #[test]
    fn induced_germ_respects_inverses_and_thresholds(seed: u64, example in prop::sample::select(vec!["e1", "e2", "e3"])) {
        let ex = bundled(example).unwrap();
        let e = Embedding::root(&ex.space);
        let (_, h) = fuzzer(seed).homeo(&ex.space, &ex.gens);
        let d = induced_germ(&ex.space, &h, &e);
        prop_assert_eq!(induced_germ(&ex.space, &h.inverse(), &e), d.inv());
        let t = overlap_ray(&ex.space, &h, &e).threshold().cloned().unwrap_or_else(Q::zero);
        prop_assert_eq!(induced_germ_at(&ex.space, &h, &e, &(&t + &Q::int(10))).unwrap(), d.clone());
        for n in [Q::zero(), Q::int(1000), Q::int(1_000_000)] {
            if nontriviality_witness(&ex.space, &h, &e, &n).is_some() {
                prop_assert!(!d.is_identity());
            }
        }
    }
}

fn short_word() -> impl Strategy<Value = Word> {
    prop::collection::vec(prop::sample::select(vec!["a", "a^-1", "k", "k^-1"]), 0..4)
        .prop_map(|letters| letters.join(" ").parse::<Word>().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_is_monotone_on_intervals(w in short_word(), s in 0i64..=60, t in 0i64..=60) {
        prop_assume!(s < t);
        let ctx = BlowupContext::load("e3").unwrap();
        let at = |u: i64| {
            let spec = BlownPointSpec { branch: "R".into(), coord: Q::one(), t: Some(Q::new(u, 60)) };
            ctx.space.point_from_spec(&spec).unwrap()
        };
        let (p, q) = (
            alpha_apply(&ctx.space, &ctx.stab, &w, &at(s)).unwrap(),
            alpha_apply(&ctx.space, &ctx.stab, &w, &at(t)).unwrap(),
        );
        match (p, q) {
            (BlownPoint::Interval { at: a, t: tp }, BlownPoint::Interval { at: b, t: tq }) => {
                prop_assert_eq!(a, b);
                prop_assert!(tp < tq);
            }
            other => prop_assert!(false, "interval left its orbit: {:?}", other),
        }
        prop_assert_eq!(alpha_apply(&ctx.space, &ctx.stab, &Word::empty(), &at(s)).unwrap(), at(s));
    }
}
