mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::sample_traces;
use ila::automaton::LatticeAutomaton;
use ila::cli::{manifest_path, run_with, EXIT_INCOHERENT, VERSION};
use ila::eval::{write_words, EvalReport};
use ila::ipta::build_ipta;
use ila::lattice::{Interval, IntervalBox, Partition};
use ila::rnn::ElmanWeights;
use ila::tomita::LanguageId;
use ila::trace::{Trace, TraceSet, TraceStep};
use regex::Regex;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn ila(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("ila").chain(args.iter().copied()), &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

struct Work(TempDir);

impl Work {
    fn new() -> Self {
        let w = Work(tempfile::tempdir().unwrap());
        fs::write(w.path("sign.json"), r#"{"cuts":[[0.0]]}"#).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn write_traces(path: &Path, set: &TraceSet) {
    let mut buf = Vec::new();
    set.write(&mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

fn read_traces(path: &Path) -> TraceSet {
    TraceSet::read(fs::read(path).unwrap().as_slice()).unwrap()
}

fn read_automaton(path: &Path) -> LatticeAutomaton {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_traces_and_manifest() {
    let w = Work::new();
    let r = ila(&[
        "gen",
        "--lang",
        "tomita2:4",
        "--n",
        "1000",
        "--max-len",
        "20",
        "--noise",
        "0",
        "--seed",
        "7",
        "--out",
        &w.s("t.jsonl"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let set = read_traces(&w.path("t.jsonl"));
    assert_eq!(set.traces.len(), 1000);
    assert_eq!(set.header.hidden_dim, Some(4));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(manifest_path(&w.path("t.jsonl"))).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["version"], VERSION);
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
    assert_eq!(manifest["flags"]["gen"]["lang"], "tomita2:4");
    assert!(manifest["duration_secs"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["outputs"][0], w.s("t.jsonl"));
}

#[test]
fn gen_rejects_bad_flags() {
    let w = Work::new();
    let r = ila(&["gen", "--lang", "tomita2:9", "--out", &w.s("t.jsonl")]);
    assert_ne!(r.code, 0);
    assert!(r.err.contains("out of range"), "{}", r.err);
    assert!(!w.path("t.jsonl").exists());
    let r = ila(&[
        "gen",
        "--lang",
        "tomita2:1",
        "--weights",
        "w.json",
        "--out",
        &w.s("t.jsonl"),
    ]);
    assert_eq!(r.code, 2);
    let r = ila(&["gen", "--lang", "tomita2:1", "--noise", "-1", "--out", &w.s("t.jsonl")]);
    assert_ne!(r.code, 0);
    let r = ila(&["gen", "--weights", &w.s("missing.json"), "--out", &w.s("t.jsonl")]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("missing.json"));
}

fn small_weights() -> ElmanWeights {
    ElmanWeights::new(
        1,
        2,
        vec![1.0, -0.7],
        vec![0.3, 0.2, -0.4, 0.5],
        vec![0.0, 0.1],
        vec![1.0, -1.0],
        -0.05,
    )
    .unwrap()
}

#[test]
fn gen_from_weights_runs_the_network() {
    let w = Work::new();
    let net = small_weights();
    fs::write(w.path("w.json"), serde_json::to_string(&net).unwrap()).unwrap();
    let words = vec![vec![vec![1.0], vec![-2.0]], vec![], vec![vec![0.5]]];
    let mut buf = Vec::new();
    write_words(&words, &mut buf).unwrap();
    fs::write(w.path("in.jsonl"), buf).unwrap();
    let r = ila(&[
        "gen",
        "--weights",
        &w.s("w.json"),
        "--inputs",
        &w.s("in.jsonl"),
        "--out",
        &w.s("t.jsonl"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let set = read_traces(&w.path("t.jsonl"));
    let expected: Vec<Trace> = words.iter().map(|x| net.run(x).unwrap()).collect();
    assert_eq!(set.traces, expected);
    assert_eq!(set.header.hidden_dim, Some(2));

    let r = ila(&[
        "gen",
        "--weights",
        &w.s("w.json"),
        "--n",
        "25",
        "--max-len",
        "6",
        "--seed",
        "3",
        "--out",
        &w.s("s.jsonl"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let set = read_traces(&w.path("s.jsonl"));
    assert_eq!(set.traces.len(), 25);
    assert!(set.traces.iter().all(|t| (1..=6).contains(&t.len())));
}

#[test]
fn learn_sample_fragment_and_zero_threshold() {
    let w = Work::new();
    write_traces(&w.path("sample.jsonl"), &sample_traces());
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("sample.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--ipta-only",
        "--out",
        &w.s("ipta.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.trim(), "states=9 transitions=8");
    assert_eq!(
        read_automaton(&w.path("ipta.json")),
        build_ipta(&sample_traces(), &Partition::sign()).unwrap()
    );
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("sample.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--threshold",
        "0",
        "--out",
        &w.s("zero.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(
        fs::read(w.path("ipta.json")).unwrap(),
        fs::read(w.path("zero.json")).unwrap()
    );
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("sample.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--out",
        &w.s("x.json"),
    ]);
    assert_eq!(r.code, 2, "threshold is required without --ipta-only");
}

#[test]
fn learn_recovers_state_count() {
    let w = Work::new();
    assert_eq!(
        ila(&["gen", "--lang", "tomita2:5", "--seed", "1", "--out", &w.s("t.jsonl")]).code,
        0
    );
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("t.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--threshold",
        "0.5",
        "--out",
        &w.s("a.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("states=4 "), "{}", r.out);
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("t.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--threshold",
        "0.5",
        "--max-merges",
        "3",
        "--out",
        &w.s("b.json"),
    ]);
    assert_eq!(r.code, 0);
    let full = build_ipta(&read_traces(&w.path("t.jsonl")), &Partition::sign())
        .unwrap()
        .num_states();
    assert_eq!(read_automaton(&w.path("b.json")).num_states(), full - 3);
}

#[test]
fn incoherent_traces_exit_nonzero() {
    let w = Work::new();
    let set = TraceSet::new(vec![
        Trace::new(vec![TraceStep::new(vec![1.0], vec![0.0], true)]),
        Trace::new(vec![TraceStep::new(vec![2.0], vec![0.0], false)]),
    ]);
    write_traces(&w.path("bad.jsonl"), &set);
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("bad.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--threshold",
        "0.5",
        "--out",
        &w.s("a.json"),
    ]);
    assert_eq!(r.code, EXIT_INCOHERENT);
    assert!(r.err.contains("trace 0") && r.err.contains("trace 1"), "{}", r.err);
    assert!(!w.path("a.json").exists());
    let r = ila(&[
        "check",
        "--traces",
        &w.s("bad.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--out",
        &w.s("v.json"),
    ]);
    assert_eq!(r.code, EXIT_INCOHERENT);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(w.path("v.json")).unwrap()).unwrap();
    assert_eq!(v["coherent"], false);
    write_traces(&w.path("sample.jsonl"), &sample_traces());
    let r = ila(&[
        "check",
        "--traces",
        &w.s("sample.jsonl"),
        "--partition",
        &w.s("sign.json"),
    ]);
    assert_eq!(r.code, 0);
    assert_eq!(r.out.trim(), "coherent traces=4");
}

fn dfa_automaton(id: LanguageId) -> LatticeAutomaton {
    let dfa = id.dfa();
    let p = id.partition();
    let mut a = LatticeAutomaton::new(p.clone());
    let ids: Vec<_> = (0..dfa.num_states())
        .map(|s| a.add_state(dfa.is_accepting(s), IntervalBox::Bottom))
        .collect();
    a.set_initial(ids[dfa.start()], true).unwrap();
    for s in 0..dfa.num_states() {
        for c in 0..2 {
            a.add_transition(ids[s], &p.cell(c).unwrap(), ids[dfa.step(s, c)])
                .unwrap();
        }
    }
    a
}

#[test]
fn eval_reports_and_summary() {
    let w = Work::new();
    let id = LanguageId::tomita2(6).unwrap();
    fs::write(w.path("a.json"), serde_json::to_string(&dfa_automaton(id)).unwrap()).unwrap();
    let r = ila(&[
        "eval",
        "--ila",
        &w.s("a.json"),
        "--lang",
        "tomita2:6",
        "--report",
        &w.s("r.json"),
        "--jobs",
        "4",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let line = Regex::new(r"^fidelity=([0-9.]+) type1=([0-9.]+) type2=([0-9.]+) states=(\d+)$").unwrap();
    let caps = line.captures(r.out.trim()).expect("summary line");
    assert_eq!(&caps[1], "100.00");
    assert_eq!(&caps[4], "3");
    let report: EvalReport = serde_json::from_slice(&fs::read(w.path("r.json")).unwrap()).unwrap();
    assert_eq!(report.n_words, 1000);
    assert_eq!(report.fidelity_pct, 100.0);

    let other = LanguageId::tomita2(1).unwrap();
    fs::write(w.path("b.json"), serde_json::to_string(&dfa_automaton(other)).unwrap()).unwrap();
    let r = ila(&[
        "eval",
        "--ila",
        &w.s("b.json"),
        "--lang",
        "tomita2:6",
        "--n",
        "200",
        "--detail",
        "--balance",
        "--report",
        &w.s("s.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let report: EvalReport = serde_json::from_slice(&fs::read(w.path("s.json")).unwrap()).unwrap();
    assert!((report.fidelity_pct + report.type1_pct + report.type2_pct - 100.0).abs() < 1e-9);
    assert_eq!(
        report.disagreements.unwrap().len(),
        report.false_accept + report.false_reject
    );

    let r = ila(&["eval", "--ila", &w.s("a.json"), "--report", &w.s("x.json")]);
    assert_eq!(r.code, 2, "missing oracle is a usage error");
}

#[test]
fn eval_against_weights() {
    let w = Work::new();
    let last_sign = ElmanWeights::new(1, 2, vec![5.0, -5.0], vec![0.0; 4], vec![0.0; 2], vec![1.0, -1.0], 0.0).unwrap();
    fs::write(w.path("w.json"), serde_json::to_string(&last_sign).unwrap()).unwrap();
    assert_eq!(
        ila(&[
            "gen",
            "--weights",
            &w.s("w.json"),
            "--n",
            "300",
            "--max-len",
            "8",
            "--out",
            &w.s("t.jsonl")
        ])
        .code,
        0
    );
    let r = ila(&[
        "learn",
        "--traces",
        &w.s("t.jsonl"),
        "--partition",
        &w.s("sign.json"),
        "--ipta-only",
        "--out",
        &w.s("a.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let r = ila(&[
        "eval",
        "--ila",
        &w.s("a.json"),
        "--weights",
        &w.s("w.json"),
        "--n",
        "200",
        "--max-len",
        "8",
        "--report",
        &w.s("r.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("fidelity="));
    let two_d = ElmanWeights::zeros(2, 2);
    fs::write(w.path("w2.json"), serde_json::to_string(&two_d).unwrap()).unwrap();
    let r = ila(&[
        "eval",
        "--ila",
        &w.s("a.json"),
        "--weights",
        &w.s("w2.json"),
        "--report",
        &w.s("r2.json"),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("dimension"), "{}", r.err);
}

fn unbounded_loop_automaton() -> LatticeAutomaton {
    let p = Partition::sign();
    let neg = IntervalBox::new(vec![Interval::half_open(f64::NEG_INFINITY, 0.0).unwrap()]).unwrap();
    let pos = IntervalBox::new(vec![Interval::closed(0.0, f64::INFINITY).unwrap()]).unwrap();
    let mut a = LatticeAutomaton::new(p);
    let q: Vec<_> = [true, true, true, false]
        .iter()
        .map(|&f| a.add_state(f, IntervalBox::Bottom))
        .collect();
    a.set_initial(q[0], true).unwrap();
    for (s, l, t) in [
        (0, &neg, 0),
        (0, &pos, 1),
        (1, &neg, 0),
        (1, &pos, 2),
        (2, &neg, 0),
        (2, &pos, 3),
        (3, &pos, 3),
    ] {
        a.add_transition(q[s], l, q[t]).unwrap();
    }
    a
}

fn dot_counts(text: &str) -> (usize, usize) {
    let node = Regex::new(r"^\s*q\d+ \[shape=(double)?circle\];$").unwrap();
    let edge = Regex::new(r#"^\s*q\d+ -> q\d+ \[label="[^"]+"\];$"#).unwrap();
    (
        text.lines().filter(|l| node.is_match(l)).count(),
        text.lines().filter(|l| edge.is_match(l)).count(),
    )
}

#[test]
fn export_dot() {
    let w = Work::new();
    fs::write(
        w.path("loop.json"),
        serde_json::to_string(&unbounded_loop_automaton()).unwrap(),
    )
    .unwrap();
    let r = ila(&["export-dot", "--ila", &w.s("loop.json"), "--out", &w.s("f1.dot")]);
    assert_eq!(r.code, 0, "{}", r.err);
    let dot = fs::read_to_string(w.path("f1.dot")).unwrap();
    assert_eq!(dot_counts(&dot), (4, 7));
    assert!(dot.contains("q0 [shape=doublecircle]") && dot.contains("q3 [shape=circle]"));
    assert!(dot.contains("-> q0;"));
    assert!(dot.contains("[label=\"[-inf, 0)\"]") && dot.contains("[label=\"[0, +inf]\"]"));

    let back = read_automaton(&w.path("loop.json"));
    fs::write(w.path("f2.json"), serde_json::to_string_pretty(&back).unwrap()).unwrap();
    assert_eq!(
        ila(&["export-dot", "--ila", &w.s("f2.json"), "--out", &w.s("f2.dot")]).code,
        0
    );
    assert_eq!(fs::read(w.path("f2.dot")).unwrap(), dot.as_bytes());

    let mut single = LatticeAutomaton::new(Partition::sign());
    single.add_state(false, IntervalBox::Bottom);
    fs::write(w.path("one.json"), serde_json::to_string(&single).unwrap()).unwrap();
    assert_eq!(
        ila(&["export-dot", "--ila", &w.s("one.json"), "--out", &w.s("one.dot")]).code,
        0
    );
    assert_eq!(dot_counts(&fs::read_to_string(w.path("one.dot")).unwrap()), (1, 0));

    fs::write(w.path("junk.json"), "{").unwrap();
    assert_eq!(
        ila(&["export-dot", "--ila", &w.s("junk.json"), "--out", &w.s("junk.dot")]).code,
        1
    );
    assert!(!w.path("junk.dot").exists());
}

#[test]
fn version_flag() {
    let r = ila(&["--version"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.out.trim(), format!("ila {VERSION}"));
}

#[test]
fn binary_exit_codes() {
    let w = Work::new();
    let bin = env!("CARGO_BIN_EXE_ila");
    let ok = Command::new(bin)
        .args(["gen", "--lang", "tomita:3", "--n", "5", "--out", &w.s("t.jsonl")])
        .status()
        .unwrap();
    assert!(ok.success());
    let bad = Command::new(bin)
        .args(["gen", "--lang", "tomita:8", "--out", &w.s("u.jsonl")])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("out of range"));
}
