use std::path::Path;
use std::process::{Command, Output};

use leafgerm::harness::spec::{parse_str, BUNDLED};

fn leafgerm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafgerm"))
        .args(args)
        .env_remove("LEAFGERM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn single_line_leaf_space_parses_with_one_branch() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "line.json",
        r#"{"side": "negative", "branches": [{"id": "R"}]}"#,
    );
    let out = leafgerm(&["parse", &path]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["kind"], "leaf-space");
    assert_eq!(v["canonical"], false);
    let canon = stdout(&leafgerm(&["parse", "--canonical", &path]));
    let spec: serde_json::Value = serde_json::from_str(&canon).unwrap();
    assert_eq!(spec["branches"].as_array().unwrap().len(), 1);
}

#[test]
fn unreduced_rational_is_normalized_and_flagged() {
    let text = "{\n  \"side\": \"negative\",\n  \"branches\": [\n    {\n      \"id\": \"R\"\n    },\n    {\n      \"id\": \"C\",\n      \"parent\": \"R\",\n      \"departure\": \"2/4\"\n    }\n  ]\n}\n";
    let parsed = parse_str("t", text).unwrap();
    assert!(!parsed.canonical);
    let canon = parsed.file.to_canonical();
    assert!(canon.contains("\"1/2\"") && !canon.contains("2/4"));
    assert!(parse_str("t", &canon).unwrap().canonical);
}

#[test]
fn bad_departure_names_the_branch() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.json",
        r#"{"side": "negative", "branches": [{"id": "R"}, {"id": "orphan", "parent": "R"}]}"#,
    );
    let out = leafgerm(&["parse", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("orphan"));
}

#[test]
fn syntax_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "broken.json",
        "{\n  \"branches\": [\n    {\"id\": }\n  ]\n}\n",
    );
    let out = leafgerm(&["parse", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn bundled_examples_are_golden() {
    for (name, text) in BUNDLED {
        let parsed = parse_str(name, text).unwrap();
        assert!(parsed.canonical, "{name} is not in canonical form");
        assert_eq!(parsed.file.to_canonical(), text);
    }
}

#[test]
fn order_compare_matches_the_cone() {
    assert_eq!(stdout(&leafgerm(&["order-compare", "2,-5", "1,0"])).trim(), "GT");
    assert_eq!(stdout(&leafgerm(&["order-compare", "1,0", "1,0"])).trim(), "EQ");
    assert_eq!(stdout(&leafgerm(&["order-compare", "1/2,100", "1,0"])).trim(), "LT");
    assert_eq!(leafgerm(&["order-compare", "0,1", "1,0"]).status.code(), Some(2));
}

#[test]
fn branch_forgetting_generator_has_trivial_d() {
    let out = leafgerm(&["compute-d", "e2", "h"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["germ"], serde_json::json!({"a": "1", "b": "0"}));
    assert!(v["witness"]["0"].is_null());
}

#[test]
fn exit_codes_separate_violations_from_input_errors() {
    assert_eq!(leafgerm(&["check-action", "e1"]).status.code(), Some(0));
    assert_eq!(leafgerm(&["check-action", "e3-fault-coset"]).status.code(), Some(1));
    assert_eq!(leafgerm(&["check-stabilizer", "e3-fault-phi"]).status.code(), Some(1));
    assert_eq!(leafgerm(&["suite", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(leafgerm(&["compute-d", "nowhere.json", "a"]).status.code(), Some(2));
}

#[test]
fn reports_replay_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let out_arg = out_path.display().to_string();
    let run = |seed: &str| {
        leafgerm(&[
            "--seed",
            seed,
            "suite",
            "trivial-stabilizer",
            "--example",
            "e3-fault-phi",
            "--out",
            &out_arg,
        ])
    };
    let first = run("3");
    assert_eq!(first.status.code(), Some(1));
    assert_eq!(stdout(&first), std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(stdout(&run("3")), stdout(&first));

    let replayed = leafgerm(&["replay", &out_arg]);
    assert_eq!(replayed.status.code(), Some(1));
    assert_eq!(stdout(&replayed).trim(), "reproduced");
}

#[test]
fn fuzz_streams_are_seeded() {
    let a = leafgerm(&["--seed", "9", "fuzz", "--kind", "word", "--count", "5"]);
    let b = leafgerm(&["--seed", "9", "fuzz", "--kind", "word", "--count", "5"]);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 5);
    let affine = stdout(&leafgerm(&[
        "fuzz",
        "--kind",
        "pl",
        "--count",
        "20",
        "--max-breakpoints",
        "0",
    ]));
    for line in affine.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["points"].as_array().unwrap().len() <= 1, "{line}");
    }
}

#[test]
fn plot_tables_have_headers() {
    let tails = stdout(&leafgerm(&["emit-plot", "tails", "e1", "--ball", "2"]));
    assert!(tails.starts_with("word,length,slope,offset"));
    assert_eq!(tails.lines().count(), 1 + 5);
    let orbit = stdout(&leafgerm(&["emit-plot", "orbit", "e3"]));
    assert!(orbit.starts_with("word,length,branch,coord"));
}
