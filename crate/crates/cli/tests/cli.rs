use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ffgmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffgmc")).args(args).env_remove("FFGMC_SOLVER").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const JUSTIFYING: &str = r#"{
  "n_validators": 4,
  "blocks": [{"id": "b1", "slot": 1, "parent": "genesis"}],
  "votes": [
    {"validator": 0, "source": {"block": "genesis", "c": 0}, "target": {"block": "b1", "c": 2}},
    {"validator": 1, "source": {"block": "genesis", "c": 0}, "target": {"block": "b1", "c": 2}},
    {"validator": 2, "source": {"block": "genesis", "c": 0}, "target": {"block": "b1", "c": 2}}
  ]
}"#;

#[test]
fn check_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", r#"{"n_validators": 4, "blocks": [], "votes": []}"#);
    let o = ffgmc(&["check", &empty]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["verdict"], "holds");

    let s = write(dir.path(), "j.json", JUSTIFYING);
    let o = ffgmc(&["check", &s]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["scenario"]["finalized"], serde_json::json!([{"block": "genesis", "c": 0, "p": 0}]));
    let justified: Vec<_> = r["scenario"]["justified"].as_array().unwrap().iter().map(|c| c["block"].clone()).collect();
    assert!(justified.contains(&Value::from("b1")));

    let out = dir.path().join("report.json");
    let o = ffgmc(&["check", &s, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert_eq!(serde_json::from_str::<Value>(&fs::read_to_string(out).unwrap()).unwrap()["command"], "check");
}

#[test]
fn check_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", &JUSTIFYING.replacen("\"b1\", \"c\": 2", "\"nope\", \"c\": 2", 1));
    let o = ffgmc(&["check", &unknown]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("votes[0].target.block") && err.contains("nope"), "{err}");

    let broken = write(dir.path(), "b.json", "{\n  \"n_validators\": 4,\n  \"blocks\": [\n");
    let o = ffgmc(&["check", &broken]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let cyclic = write(
        dir.path(),
        "c.json",
        r#"{"n_validators": 1, "blocks": [{"id": "x", "slot": 1, "parent": "y"}, {"id": "y", "slot": 2, "parent": "x"}]}"#,
    );
    assert_eq!(code(&ffgmc(&["check", &cyclic])), 2);
    assert_eq!(code(&ffgmc(&["check", "/no/such/file.json"])), 2);
}

#[test]
fn search_exit_codes() {
    let o = ffgmc(&["search", "--blocks", "2", "--validators", "4", "--max-ffg", "3", "--max-votes", "9"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["verdict"], "holds-exhaustively");
    assert!(r["counters"]["states_checked"].as_u64().unwrap() > 0);

    let o = ffgmc(&["search", "--graph", "single-chain", "--max-ffg", "4", "--max-votes", "12"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["counters"]["graphs_pruned"], 1);

    let o = ffgmc(&["search", "--max-ffg", "4", "--max-votes", "12", "--budget", "1000", "--jobs", "1"]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)["verdict"], "inconclusive");

    assert_eq!(code(&ffgmc(&["search", "--validators", "0"])), 2);
    assert_eq!(code(&ffgmc(&["search", "--graph", "i2"])), 2);
    assert_eq!(code(&ffgmc(&["search", "--mutation", "bogus"])), 2);
    assert_eq!(code(&ffgmc(&["search", "--max-ffg", "100"])), 2);
}

#[test]
fn counterexamples_round_trip_through_check() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("qh.json");
    let o = ffgmc(&[
        "search",
        "--mutation",
        "quorum-half",
        "--max-ffg",
        "4",
        "--max-votes",
        "12",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["counterexample"]["holds"], false);
    assert_eq!(r["counterexample"]["disagreement"], true);

    let o = ffgmc(&["check", report.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let checked = json(&o);
    assert_eq!(checked["mutation"], "quorum-half");
    assert_eq!(checked["scenario"]["finalized"], r["counterexample"]["finalized"]);
    assert_eq!(checked["scenario"]["slashable"], r["counterexample"]["slashable"]);
    assert_eq!(code(&ffgmc(&["check", report.to_str().unwrap(), "--mutation", "none"])), 0);

    // the bare scenario part parses as a scenario file as well
    let bare = write(dir.path(), "bare.json", &r["counterexample"].to_string());
    assert_eq!(code(&ffgmc(&["check", &bare, "--mutation", "quorum-half"])), 1);
}

#[test]
fn jobs_do_not_change_the_report() {
    let run = |jobs: &str| {
        let mut r = json(&ffgmc(&[
            "search",
            "--mutation",
            "disable-slashing",
            "--max-ffg",
            "4",
            "--max-votes",
            "12",
            "--jobs",
            jobs,
        ]));
        r.as_object_mut().unwrap().remove("wall_time_ms");
        r
    };
    assert_eq!(run("1"), run("0"));
}

#[test]
fn example_command() {
    let o = ffgmc(&[
        "example",
        "--property",
        "finalized-nongenesis",
        "--blocks",
        "1",
        "--validators",
        "4",
        "--max-votes",
        "6",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let finalized = r["scenario"]["finalized"].as_array().unwrap();
    assert!(finalized.len() > 1);

    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "ex.json", &r["scenario"].to_string());
    let again = json(&ffgmc(&["check", &scenario]));
    assert_eq!(&again["scenario"]["finalized"], &r["scenario"]["finalized"]);

    let o = ffgmc(&["example", "--property", "justified-nongenesis", "--max-votes", "2", "--validators", "4"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["verdict"], "not-found");

    let o = ffgmc(&["example", "--property", "conflicting-finalized", "--max-ffg", "4", "--max-votes", "12"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let slashable = r["scenario"]["slashable"].as_array().unwrap().len();
    assert!(3 * slashable >= 4);
    assert_eq!(r["scenario"]["disagreement"], true);
}

#[test]
fn smt_commands() {
    let a = ffgmc(&["emit-smt"]);
    let b = ffgmc(&["emit-smt"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("(declare-datatype Hash ((Hash1) (Hash2) (Hash3)))"));
    assert!(text.contains("(< (* 3 (set.card slashable_nodes)) N)"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.smt2");
    let o = ffgmc(&["emit-smt", "--query", "finalized-nongenesis", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&out).unwrap().contains("(set.singleton genesis_checkpoint)"));
    assert_eq!(code(&ffgmc(&["emit-smt", "--validators", "0"])), 2);

    let o = ffgmc(&["solve", "--solver-cmd", "/definitely/not/a/solver {file}"]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)["verdict"], "solver-absent");
    assert_eq!(code(&ffgmc(&["solve", "--solver-cmd", "/definitely/not/a/solver", "--input", "/no/such.smt2"])), 2);
}

#[test]
fn forest_counts() {
    for (n, expected) in [(1, "1"), (2, "3"), (3, "16"), (4, "125")] {
        let o = ffgmc(&["forests", "--n", &n.to_string()]);
        assert_eq!(code(&o), 0);
        assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), expected);
    }
    let o = ffgmc(&["forests", "--n", "2", "--list"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "3\n[0 0]\n[0 1]\n[2 0]\n");
    assert_eq!(String::from_utf8_lossy(&ffgmc(&["forests", "--n", "3", "--iso"]).stdout).trim(), "4");
}
