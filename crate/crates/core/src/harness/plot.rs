//! Tabular data for external plotting: germ tails over a word ball and the
//! marked orbit with its blown-up chart positions.

use crate::action::{evaluate_d_word, Embedding};
use crate::harness::spec::Example;
use crate::harness::suites::BlowupContext;
use crate::word::Word;

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

/// One row per word of length `<= ball`: `d(w)` exactly and approximately.
pub fn tails_csv(ex: &Example, ball: usize) -> Result<String, crate::action::ActionError> {
    let e = Embedding::root(&ex.space);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "length", "slope", "offset", "slope_approx", "offset_approx"])
        .expect("in-memory writer");
    for word in Word::ball(ex.gens.names(), ball) {
        let g = evaluate_d_word(&ex.space, &ex.gens, &word, &e)?;
        w.write_record([
            word.to_string(),
            word.len().to_string(),
            g.slope().to_string(),
            g.offset().to_string(),
            g.slope().to_f64().to_string(),
            g.offset().to_f64().to_string(),
        ])
        .expect("in-memory writer");
    }
    Ok(finish(w))
}

/// One row per marked orbit point, with the start of its interval in the
/// blown-up chart of its branch.
pub fn orbit_csv(ctx: &BlowupContext) -> String {
    let space = &ctx.space;
    let base = space.base();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "length", "branch", "coord", "coord_approx", "blown_start"])
        .expect("in-memory writer");
    let mut rows: Vec<_> = space.orbit().iter().collect();
    rows.sort_by(|(_, a), (_, b)| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    for (p, word) in rows {
        let start = space
            .coordinate(
                p.branch,
                &crate::blowup::BlownPoint::Interval {
                    at: p.clone(),
                    t: crate::Q::zero(),
                },
            )
            .expect("marked points sit on their own branch");
        w.write_record([
            word.to_string(),
            word.len().to_string(),
            base.name(p.branch).to_string(),
            p.coord.to_string(),
            p.coord.to_f64().to_string(),
            start.to_string(),
        ])
        .expect("in-memory writer");
    }
    finish(w)
}
