use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proleg-forge"))
}

fn contracts() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../contracts")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const HOUSE_CASE_FACTS: &str = r#"original_ownership("sarah","the house").
transfer("sarah","john","the house").
occupancy("alex","the house").
existence_of_accessory("garage A","the house").
"#;

fn small_config(dir: &Path, extra: serde_json::Value) -> PathBuf {
    let bundles: Vec<PathBuf> = [
        "return_object",
        "lease_termination",
        "loan_repayment",
        "sale_delivery",
    ]
    .iter()
    .map(|c| contracts().join(format!("{c}.json")))
    .collect();
    let mut cfg = serde_json::json!({
        "contracts": bundles,
        "generation": {"templates_per_contract": 3, "slot_sets_per_contract": 12, "seed": 3},
        "dataset": {"samples": 200, "seed": 5},
        "split": {"test_fraction": 0.2, "seed": 7},
        "output_dir": "out"
    });
    if let (Some(c), Some(e)) = (cfg.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            c.insert(k.clone(), v.clone());
        }
    }
    let path = dir.join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn reason_prints_the_proof_and_the_exception() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("facts.proleg");
    let program = contracts().join("return_object.proleg");
    let goal = r#"return_object("john","the house")"#;
    fs::write(&facts, HOUSE_CASE_FACTS).unwrap();
    let o = run(&[
        "reason",
        "--program",
        program.to_str().unwrap(),
        "--facts",
        facts.to_str().unwrap(),
        "--goal",
        goal,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("[+] return_object(\"john\",\"the house\")"));
    assert!(text.contains("exception: [-] rightful_occupancy(\"the house\")"));

    fs::write(
        &facts,
        format!("{HOUSE_CASE_FACTS}lease(\"sarah\",\"alex\",\"the house\").\n"),
    )
    .unwrap();
    let o = run(&[
        "reason",
        "--program",
        program.to_str().unwrap(),
        "--facts",
        facts.to_str().unwrap(),
        "--goal",
        goal,
    ]);
    let text = stdout(&o);
    assert!(text.starts_with("[-] return_object(\"john\",\"the house\")  (defeated:"));
    assert!(text.contains("exception: [+] rightful_occupancy(\"the house\")"));

    let o = run(&[
        "reason",
        "--program",
        program.to_str().unwrap(),
        "--facts",
        facts.to_str().unwrap(),
        "--goal",
        goal,
        "--format",
        "dot",
    ]);
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph proof {\n"));
    assert!(dot.ends_with("}\n"));
    assert!(dot.contains("[label=\"exception\", style=dashed];"));

    let o = run(&[
        "reason",
        "--program",
        program.to_str().unwrap(),
        "--facts",
        facts.to_str().unwrap(),
        "--goal",
        goal,
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"], "failed");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["reason", "--goal"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(
        run(&["pipeline", "--config", "/nonexistent/cfg.json"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        serde_json::json!({"contracts": [dir.path().join("missing.json")]}),
    );
    let o = run(&["pipeline", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage load-config"));

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = run(&[
        "train",
        "--data",
        empty.to_str().unwrap(),
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage train"));

    let bad = dir.path().join("bad.proleg");
    fs::write(&bad, "p(X) <= q(Y).").unwrap();
    let o = run(&[
        "reason",
        "--program",
        bad.to_str().unwrap(),
        "--goal",
        "p(\"a\")",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stage_by_stage_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, serde_json::json!({}));
    let p = |name: &str| d.join(name).to_string_lossy().into_owned();

    let o = run(&[
        "augment",
        "--config",
        cfg.to_str().unwrap(),
        "--backend",
        "offline",
        "--count",
        "120",
        "--seed",
        "9",
        "--out",
        &p("data.jsonl"),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        fs::read_to_string(p("data.jsonl")).unwrap().lines().count(),
        120
    );

    let o = run(&["stats", "--data", &p("data.jsonl")]);
    let stats: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(stats["samples"], 120);

    let o = run(&[
        "train",
        "--data",
        &p("data.jsonl"),
        "--out",
        &p("model.json"),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p("model.json")).unwrap()).unwrap();
    assert_eq!(
        model["goals"]["lease_termination"],
        "terminate_lease(\"{Landlord}\",\"{Premises}\")"
    );

    let case = d.join("case.txt");
    fs::write(
        &case,
        "helen leased unit 4B to victor for 1200 dollars a month, and gloria signed as guarantor.",
    )
    .unwrap();
    let o = run(&[
        "parse",
        "--model",
        &p("model.json"),
        "--in",
        case.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(parsed["contract_id"], "lease_termination");
    assert_eq!(parsed["extraction"][0]["surface"], "helen");

    let o = run(&[
        "parse",
        "--model",
        &p("model.json"),
        "--text",
        "nothing known here",
    ]);
    assert_eq!(o.status.code(), Some(3));

    let o = run(&[
        "evaluate",
        "--model",
        &p("model.json"),
        "--data",
        &p("data.jsonl"),
        "--programs",
        contracts().to_str().unwrap(),
        "--report",
        &p("report.json"),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let m: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["fact_exact_match_accuracy"], 1.0);
    assert_eq!(m["entailment_accuracy"], 1.0);
}

#[test]
fn pipeline_with_mock_llm_backend() {
    let dir = tempfile::tempdir().unwrap();
    let mock = dir.path().join("mock");
    fs::create_dir(&mock).unwrap();
    let reply = |content: String| {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
            .to_string()
    };
    // every contract asks for templates, then slot sets; the last reply repeats
    fs::write(
        mock.join("01.json"),
        reply("```json\n[\"{Creditor} met {Judge}.\"]\n```".into()),
    )
    .unwrap();
    fs::write(mock.join("02.json"), reply("no".into())).unwrap();
    let cfg = small_config(
        dir.path(),
        serde_json::json!({
            "contracts": [contracts().join("return_object.json")],
            "backend": "llm",
            "mock_dir": "mock",
            "llm": {"api_key_env_var": "PROLEG_FORGE_TEST_KEY", "max_in_flight": 1, "backoff_ms": 1},
            "generation": {"templates_per_contract": 1, "slot_sets_per_contract": 1, "seed": 3},
            "dataset": {"samples": 4, "seed": 5},
        }),
    );
    let o = bin()
        .args(["pipeline", "--config", cfg.to_str().unwrap()])
        .env_remove("PROLEG_FORGE_TEST_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("authentication failed"));

    let o = bin()
        .args(["pipeline", "--config", cfg.to_str().unwrap()])
        .env("PROLEG_FORGE_TEST_KEY", "secret")
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    let g = &report["generation"]["return_object"];
    assert_eq!(g["generated_templates"], 0);
    assert_eq!(g["shortfall"]["templates"], 1);
    assert_eq!(
        g["rejects"][0]["reason"],
        "placeholder {Judge} not in schema"
    );
}
