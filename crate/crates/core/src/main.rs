#![allow(clippy::result_large_err)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use leafgerm::action::{induced_germ, nontriviality_witness, overlap_ray, ActionError, Embedding, Overlap};
use leafgerm::germ::Germ;
use leafgerm::harness::fuzz::{fuzz_cases, Bounds, FuzzKind};
use leafgerm::harness::plot::{orbit_csv, tails_csv};
use leafgerm::harness::report::{Counterexample, Report};
use leafgerm::harness::spec::{example_from_arg, parse_spec, SpecFile};
use leafgerm::harness::suites::{replay, run_all, run_suite, BlowupContext, HarnessError, SuiteConfig, SUITES};
use leafgerm::word::Word;
use leafgerm::Q;

#[derive(Parser)]
#[command(
    name = "leafgerm",
    version,
    about = "Exact checks for germs at +∞, leaf-space actions and blow-ups"
)]
struct Cli {
    /// Seed for generated cases.
    #[arg(long, global = true, env = "LEAFGERM_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a spec file and report whether it is in canonical form.
    Parse {
        path: PathBuf,
        /// Print the canonical text instead of a summary.
        #[arg(long)]
        canonical: bool,
    },
    /// Group axioms, well-definedness and the left order on random germs.
    CheckGermGroup {
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Compare two germs given as `a,b` (the tail x ↦ a·x + b).
    OrderCompare {
        #[arg(allow_hyphen_values = true)]
        u: String,
        #[arg(allow_hyphen_values = true)]
        v: String,
    },
    /// d(w) for a word, with the overlap threshold and witnesses.
    ComputeD {
        example: String,
        /// Word such as "a k^-1"; empty for the identity.
        #[arg(default_value = "")]
        word: String,
    },
    /// d(w₁w₂) = d(w₁)d(w₂) on random word pairs.
    CheckHom {
        example: String,
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Blow up the marked orbit and print the intervals.
    Blowup {
        example: String,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// The action law for α on sampled points.
    CheckAction {
        example: String,
        #[arg(long, default_value_t = 4)]
        law_ball: usize,
    },
    /// No nontrivial word in the ball fixes (λ, 1/2).
    CheckStabilizer {
        example: String,
        #[arg(long)]
        ball: Option<usize>,
    },
    /// Shortest word moving (λ, 1/2) over e((n, +∞)).
    OrbitSearch {
        example: String,
        #[arg(long, allow_hyphen_values = true)]
        n: Q,
        #[arg(long)]
        ball: Option<usize>,
    },
    /// Print generated objects as JSON lines.
    Fuzz {
        #[arg(long, value_enum, default_value_t = FuzzKind::Pl)]
        kind: FuzzKind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Example supplying the leaf space and generators.
        #[arg(long, default_value = "e3")]
        example: String,
        #[arg(long, default_value_t = 5)]
        max_breakpoints: usize,
        #[arg(long, default_value_t = 100)]
        max_denominator: i64,
        #[arg(long, default_value_t = 8)]
        max_word_length: usize,
    },
    /// CSV for plotting: germ tails over a word ball, or the marked orbit.
    EmitPlot {
        #[arg(value_enum)]
        table: Table,
        example: String,
        #[arg(long, default_value_t = 3)]
        ball: usize,
    },
    /// Run a named suite (or `all`) and print the report.
    Suite {
        name: String,
        #[arg(long)]
        cases: Option<usize>,
        /// Example name or path; repeat for several.
        #[arg(long = "example")]
        examples: Vec<String>,
        #[arg(long, default_value_t = 4)]
        law_ball: usize,
        #[arg(long)]
        ball: Option<usize>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a counterexample, or every counterexample in a report.
    Replay { path: PathBuf },
    /// List suite names with their claims.
    Suites,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Tails,
    Orbit,
}

enum Failure {
    Violation,
    Input(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Failure {
        Failure::Input(e.to_string())
    }
}

impl From<leafgerm::harness::spec::InputError> for Failure {
    fn from(e: leafgerm::harness::spec::InputError) -> Failure {
        Failure::Input(e.to_string())
    }
}

impl From<ActionError> for Failure {
    fn from(e: ActionError) -> Failure {
        Failure::Input(e.to_string())
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn parse_germ(s: &str) -> Result<Germ, Failure> {
    let bad = || Failure::Input(format!("expected a germ as `a,b` with a > 0, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: Q = a.trim().parse().map_err(|_| bad())?;
    let b: Q = b.trim().parse().map_err(|_| bad())?;
    Germ::new(a, b).ok_or_else(bad)
}

fn parse_word(s: &str) -> Result<Word, Failure> {
    s.parse().map_err(|e| Failure::Input(format!("{e}")))
}

fn finish_report(report: Report, out: Option<&PathBuf>, started: Instant) -> Result<(), Failure> {
    let text = report.to_json();
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    for s in &report.suites {
        eprintln!("{:<26} {}", s.suite, if s.passed { "pass" } else { "FAIL" });
    }
    eprintln!("elapsed: {:.2?}", started.elapsed());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    let seed = cli.seed;
    match cli.command {
        Command::Parse { path, canonical } => {
            let parsed = parse_spec(&path)?;
            if canonical {
                print!("{}", parsed.file.to_canonical());
            } else {
                let kind = match parsed.file {
                    SpecFile::LeafSpace(_) => "leaf-space",
                    SpecFile::Action(_) => "action",
                    SpecFile::Blowup(_) => "blowup",
                    SpecFile::Example(_) => "example",
                };
                print_json(&json!({ "kind": kind, "canonical": parsed.canonical }));
            }
            Ok(())
        }
        Command::CheckGermGroup { cases } => {
            let config = SuiteConfig {
                seed,
                cases,
                ..SuiteConfig::default()
            };
            let suites = ["germ-group-axioms", "germ-well-defined", "germ-left-order"]
                .iter()
                .map(|s| run_suite(s, &config))
                .collect::<Result<Vec<_>, _>>()?;
            finish_report(Report::new(seed, suites), None, started)
        }
        Command::OrderCompare { u, v } => {
            let (u, v) = (parse_germ(&u)?, parse_germ(&v)?);
            println!("{}", u.compare(&v));
            Ok(())
        }
        Command::ComputeD { example, word } => {
            let ex = example_from_arg(&example)?;
            let w = parse_word(&word)?;
            let h = ex.gens.compose_word(&ex.space, &w)?;
            let e = Embedding::root(&ex.space);
            let germ = induced_germ(&ex.space, &h, &e);
            let overlap = match overlap_ray(&ex.space, &h, &e) {
                Overlap::FullLine => json!("full-line"),
                Overlap::Threshold(t) => json!(t),
            };
            let witnesses: serde_json::Map<String, serde_json::Value> = [0i64, 1000, 1_000_000]
                .iter()
                .map(|n| {
                    let m = nontriviality_witness(&ex.space, &h, &e, &Q::int(*n));
                    (n.to_string(), json!(m))
                })
                .collect();
            print_json(&json!({
                "word": w,
                "germ": germ,
                "overlap": overlap,
                "witness": witnesses,
            }));
            Ok(())
        }
        Command::CheckHom { example, cases } => {
            let config = SuiteConfig {
                seed,
                cases,
                examples: Some(vec![example]),
                ..SuiteConfig::default()
            };
            finish_report(
                Report::new(seed, vec![run_suite("d-homomorphism", &config)?]),
                None,
                started,
            )
        }
        Command::Blowup { example, depth } => {
            let ctx = BlowupContext::new(example_from_arg(&example)?, depth)?;
            let intervals: Vec<serde_json::Value> = ctx
                .space
                .orbit()
                .iter()
                .map(|(p, w)| json!({ "word": w, "point": ctx.example.space.point_spec(p) }))
                .collect();
            print_json(&json!({
                "marked": ctx.spec.marked,
                "depth": ctx.space.depth(),
                "classify": ctx.space.classify(),
                "base_classify": ctx.example.space.classify(),
                "blown_leaf_space": ctx.space.leaf_space().to_spec(),
                "intervals": intervals,
            }));
            Ok(())
        }
        Command::CheckAction { example, law_ball } => {
            let config = SuiteConfig {
                seed,
                examples: Some(vec![example]),
                law_ball,
                ..SuiteConfig::default()
            };
            finish_report(
                Report::new(seed, vec![run_suite("alpha-action-law", &config)?]),
                None,
                started,
            )
        }
        Command::CheckStabilizer { example, ball } => {
            let config = SuiteConfig {
                seed,
                examples: Some(vec![example]),
                ball,
                ..SuiteConfig::default()
            };
            finish_report(
                Report::new(seed, vec![run_suite("trivial-stabilizer", &config)?]),
                None,
                started,
            )
        }
        Command::OrbitSearch { example, n, ball } => {
            let ctx = BlowupContext::load(&example)?;
            let ball = ball.unwrap_or(ctx.spec.ball);
            let e = Embedding::root(&ctx.example.space);
            let found = leafgerm::blowup::positive_ray_orbit_search(&ctx.space, &ctx.stab, &e, &n, ball)
                .map_err(|err| Failure::Input(err.to_string()))?;
            match found {
                Some(w) => print_json(&json!({ "n": n, "ball": ball, "word": w })),
                None => print_json(&json!({ "n": n, "ball": ball, "word": null, "exhausted": true })),
            }
            Ok(())
        }
        Command::Fuzz {
            kind,
            count,
            example,
            max_breakpoints,
            max_denominator,
            max_word_length,
        } => {
            let ex = example_from_arg(&example)?;
            let bounds = Bounds {
                max_breakpoints,
                max_denominator,
                max_word_length,
            };
            for v in fuzz_cases(seed, bounds, kind, count, &ex.space, &ex.gens) {
                println!("{v}");
            }
            Ok(())
        }
        Command::EmitPlot { table, example, ball } => {
            match table {
                Table::Tails => print!("{}", tails_csv(&example_from_arg(&example)?, ball)?),
                Table::Orbit => print!("{}", orbit_csv(&BlowupContext::load(&example)?)),
            }
            Ok(())
        }
        Command::Suite {
            name,
            cases,
            examples,
            law_ball,
            ball,
            out,
        } => {
            let config = SuiteConfig {
                seed,
                cases,
                examples: (!examples.is_empty()).then_some(examples),
                law_ball,
                ball,
                ..SuiteConfig::default()
            };
            let report = if name == "all" {
                run_all(&config)?
            } else {
                Report::new(seed, vec![run_suite(&name, &config)?])
            };
            finish_report(report, out.as_ref(), started)
        }
        Command::Replay { path } => {
            let text =
                std::fs::read_to_string(&path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let cexs: Vec<Counterexample> = match serde_json::from_str::<Report>(&text) {
                Ok(report) => report.suites.into_iter().filter_map(|s| s.counterexample).collect(),
                Err(_) => {
                    vec![serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?]
                }
            };
            let mut failing = 0;
            for c in &cexs {
                let still = replay(c)?;
                failing += usize::from(still);
                println!("{}", if still { "reproduced" } else { "not reproduced" });
            }
            if failing > 0 {
                Err(Failure::Violation)
            } else {
                Ok(())
            }
        }
        Command::Suites => {
            for (name, claim) in SUITES {
                println!("{name:<26} {claim}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
