use std::fs;
use std::path::Path;
use std::process::Command;

use kgforge::gateway::{run_cli, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["kgforge"];
    argv.extend_from_slice(args);
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let (code, out, err) = run(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("Usage"), "{err}");
    assert_eq!(run(&[]).0, EXIT_USAGE);
    assert_eq!(run(&["qa"]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, EXIT_OK);

    let status = Command::new(env!("CARGO_BIN_EXE_kgforge")).arg("frobnicate").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(status.stdout.is_empty());
}

/// 244 gold links; 274 predictions of which 211 match exactly.
fn write_eval_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let link = |rec: usize, start: usize, iri: &str| {
        format!(r#"{{"recordId":"r{rec}","start":{start},"end":{},"entityIri":"edukg://concept/{iri}"}}"#, start + 4)
    };
    let mut gold = String::new();
    let mut pred = String::new();
    for i in 0..244 {
        gold.push_str(&link(i / 4, (i % 4) * 10, &format!("c{i}")));
        gold.push('\n');
        let iri = if i < 211 { format!("c{i}") } else { format!("wrong{i}") };
        pred.push_str(&link(i / 4, (i % 4) * 10, &iri));
        pred.push('\n');
    }
    for j in 0..30 {
        pred.push_str(&link(1000 + j, 0, "extra"));
        pred.push('\n');
    }
    let (g, pr) = (dir.join("gold.jsonl"), dir.join("pred.jsonl"));
    fs::write(&g, gold).unwrap();
    fs::write(&pr, pred).unwrap();
    (g, pr)
}

#[test]
fn evaluate_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let (g, pr) = write_eval_fixture(dir.path());
    let (code, out, err) = run(&["evaluate", "--gold", p(&g), "--pred", p(&pr), "--subject", "Biology"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("Biology"));
    assert!(out.contains("81.47"), "{out}");
    assert!(out.contains("77.01") && out.contains("86.48"), "{out}");

    let (code, out, _) = run(&["evaluate", "--gold", p(&g), "--pred", p(&pr), "--json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!((v["correct"].as_u64(), v["predicted"].as_u64(), v["gold"].as_u64()), (Some(211), Some(274), Some(244)));

    let (code, _, err) = run(&["evaluate", "--gold", p(&g), "--pred", p(&dir.path().join("missing.jsonl"))]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.starts_with("error:"));
}

const SEED: &str = r#"<edukg://concept/french_revolution> <http://www.w3.org/2000/01/rdf-schema#label> "French Revolution" .
<edukg://concept/french_revolution> <http://schema.org/description> "A period of political upheaval in France." .
<edukg://concept/french_revolution> <edukg://prop/startingTime> "1789" .
<edukg://concept/steam_engine> <http://www.w3.org/2000/01/rdf-schema#label> "steam engine" .
"#;

const TEMPLATES: &str = r#"[{"id":"start","triggers":["starting time","when did"],"target":{"kind":"datatypeProperty","iri":"edukg://prop/startingTime"},"priority":1}]"#;

#[test]
fn qa_on_a_seeded_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.nt");
    let templates = dir.path().join("qa.json");
    fs::write(&graph, SEED).unwrap();
    fs::write(&templates, TEMPLATES).unwrap();
    let q = |question: &str| {
        run(&["qa", "--graph", p(&graph), "--qa-templates", p(&templates), "--question", question])
    };
    let (code, out, err) = q("What is the starting time of the French Revolution?");
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.trim(), "1789");
    let (code, _, err) = q("Tell me a joke");
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("no template"), "{err}");
}

#[test]
fn session_commit_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.nt");
    let sessions = dir.path().join("sessions");
    fs::write(&graph, SEED).unwrap();
    let base = ["--graph", p(&graph), "--sessions", p(&sessions)];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = extra.to_vec();
        v.extend_from_slice(&base);
        run(&v)
    };
    let text = "Watt improved the steam engine. Later came the railway.";
    let (code, out, err) = with(&["session", "create", "--doc-id", "d1", "--id", "s1", "--text", text]);
    assert_eq!(code, EXIT_OK, "{err}");
    let s: serde_json::Value = serde_json::from_str(&out).unwrap();
    let cid = s["entityCandidates"][0]["id"].as_str().unwrap().to_owned();
    assert_eq!(with(&["session", "label", "--id", "s1", "--candidate", &cid, "--verdict", "accept"]).0, EXIT_OK);
    let (code, _, err) = with(&["session", "add", "--id", "s1", "--start", "48", "--end", "55"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, _, err) = with(&["session", "advance", "--id", "s1"]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("stage") || err.contains("undecided"), "{err}");
    assert_eq!(with(&["session", "label", "--id", "s1", "--candidate", "ent:48-55", "--verdict", "accept"]).0, EXIT_OK);
    let (code, out, err) = with(&["session", "commit", "--id", "s1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["report"]["entitiesAdded"], serde_json::json!(1));

    // the commit was saved with its sidecar; export reads it back
    assert!(dir.path().join("graph.meta.json").exists());
    let (code, out, _) = with(&["export"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("\"1789\""));
    let (_, listed, _) = with(&["session", "list"]);
    assert_eq!(listed.trim(), "s1");
}

#[test]
fn ingest_link_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.nt");
    let book = dir.path().join("bio.html");
    let topics = dir.path().join("topics.json");
    let exercises = dir.path().join("ex.jsonl");
    fs::write(
        &book,
        "<h1>Cells</h1><h2>Structure</h2><h3>Membrane</h3><p>The cell membrane is a lipid bilayer.</p>\
         <h3>Nucleus</h3><p>The nucleus holds DNA. The nucleus controls the cell.</p>",
    )
    .unwrap();
    fs::write(
        &topics,
        r#"[{"conceptIri":"edukg://concept/cell_membrane","label":"cell membrane"},{"conceptIri":"edukg://concept/nucleus","label":"nucleus"}]"#,
    )
    .unwrap();
    fs::write(&exercises, "{\"id\":\"e1\",\"raw\":\"Question: What does the nucleus hold? Answer: DNA\"}\n").unwrap();
    let (code, out, err) = run(&[
        "ingest", "--graph", p(&graph), "--book", p(&book), "--topics", p(&topics), "--exercises", p(&exercises),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["sections"], serde_json::json!(2));
    assert_eq!(report["exercises"], serde_json::json!(1));

    let index = dir.path().join("graph.idx");
    let (code, out, err) = run(&["build-index", "--graph", p(&graph), "--out", p(&index)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("indexed"));
    assert!(index.exists());

    let records = dir.path().join("records.jsonl");
    fs::write(&records, "{\"type\":\"unstructured\",\"id\":\"n1\",\"text\":\"Inside the nucleus sits DNA.\"}\n").unwrap();
    let (code, out, err) = run(&["link", "--graph", p(&graph), "--records", p(&records), "--store"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let link: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(link["resolved"], serde_json::json!("edukg://concept/nucleus"));

    let (code, _, err) = run(&["expand", "--graph", p(&graph)]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("--alignments"));
    assert_eq!(run(&["expand", "--graph", p(&graph), "--roles"]).0, EXIT_OK);
}
