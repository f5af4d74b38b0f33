use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trustgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustgate"))
        .args(args)
        .env_remove("TRUSTGATE_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generate(dir: &Path, per_scenario: usize) -> std::path::PathBuf {
    let path = dir.join("corpus.jsonl");
    let o = trustgate(&["generate", "--traces-per-scenario", &per_scenario.to_string(), "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

/// Writes the lines of one scenario's first session to `name`.
fn extract_session(corpus: &Path, scenario: &str, name: &Path) {
    let text = fs::read_to_string(corpus).unwrap();
    let mut id = None;
    let mut out = String::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let sid = v["session_id"].as_str().unwrap().to_owned();
        if id.is_none() && v["scenario"] == scenario {
            id = Some(sid.clone());
        }
        if id.as_ref() == Some(&sid) {
            out.push_str(line);
            out.push('\n');
        }
    }
    assert!(!out.is_empty(), "no {scenario} session");
    fs::write(name, out).unwrap();
}

fn summary_line(text: &str) -> &str {
    text.lines().find(|l| l.starts_with("summary ")).expect("summary line")
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), 2);
    let first = fs::read(&a).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corpus.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trace_count"], 20);
    assert_eq!(manifest["record_count"], 20 * 60);
    let again = generate(dir.path(), 2);
    assert_eq!(fs::read(again).unwrap(), first);
}

#[test]
fn replay_honest_and_teleport() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 1);

    let walk = dir.path().join("walk.jsonl");
    extract_session(&corpus, "walking", &walk);
    let o = trustgate(&["replay", "--in", walk.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains(" #")).count(), 60);
    assert!(text.lines().next().unwrap().contains("#1 T=unscored"));
    assert!(summary_line(&text).contains("deny=0"));
    assert!(summary_line(&text).contains("final_latch=none"));

    let tele = dir.path().join("tele.jsonl");
    extract_session(&corpus, "teleportation", &tele);
    let text = stdout(&trustgate(&["replay", "--in", tele.to_str().unwrap()]));
    assert!(summary_line(&text).contains("final_latch=deny"));
    let after_first_deny: Vec<&str> = text
        .lines()
        .filter(|l| l.contains(" #"))
        .skip_while(|l| !l.contains(" deny "))
        .collect();
    assert!(!after_first_deny.is_empty());
    assert!(after_first_deny.iter().all(|l| l.contains("deny latch=deny")));
}

#[test]
fn theta_p_override_flips_borderline_session() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 1);
    let path = dir.path().join("mismatch.jsonl");
    extract_session(&corpus, "net_mismatch", &path);
    let lenient = stdout(&trustgate(&["replay", "--in", path.to_str().unwrap(), "--theta-p", "0.7"]));
    let strict = stdout(&trustgate(&["replay", "--in", path.to_str().unwrap(), "--theta-p", "0.9"]));
    assert!(summary_line(&lenient).contains("final_latch=none"), "{lenient}");
    assert!(summary_line(&strict).contains("final_latch=step_up"), "{strict}");
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(
        &path,
        "{\"session_id\":\"a\",\"t_ms\":0,\"lat\":1.0,\"lon\":1.0,\"accuracy_m\":5.0}\n{\"session_id\":\"a\",\"t_ms\":1000,\"lat\":1.0}\n",
    )
    .unwrap();
    let o = trustgate(&["replay", "--in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn unknown_field_is_rejected_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.jsonl");
    fs::write(&path, "{\"session_id\":\"a\",\"t_ms\":0,\"lat\":1.0,\"lon\":1.0,\"accuracy_m\":5.0,\"speed\":3}\n").unwrap();
    assert_eq!(trustgate(&["replay", "--in", path.to_str().unwrap()]).status.code(), Some(3));
    assert!(trustgate(&["replay", "--in", path.to_str().unwrap(), "--lenient"]).status.success());
}

#[test]
fn exit_codes() {
    assert_eq!(trustgate(&["experiment", "nonsense"]).status.code(), Some(2));
    assert_eq!(trustgate(&["replay", "--in", "/nonexistent/trace.jsonl"]).status.code(), Some(4));
    assert_eq!(trustgate(&["replay", "--in", "x", "--theta-p", "0.1"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "schema_version = 9\n").unwrap();
    assert_eq!(trustgate(&["--config", cfg.to_str().unwrap(), "replay", "--in", "x"]).status.code(), Some(3));
}

#[test]
fn config_file_changes_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 1);
    let path = dir.path().join("mismatch.jsonl");
    extract_session(&corpus, "net_mismatch", &path);
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "[thresholds]\ntheta_p = 0.9\ntheta_s = 0.3\n").unwrap();
    let text = stdout(&trustgate(&["--config", cfg.to_str().unwrap(), "replay", "--in", path.to_str().unwrap()]));
    assert!(summary_line(&text).contains("theta_p=0.90"));
}

#[test]
fn experiments_write_expected_tables_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 10);
    let out = dir.path().join("reports");
    for name in ["sweep", "ablation"] {
        let o = trustgate(&["experiment", name, "--corpus", corpus.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let sweep = fs::read_to_string(out.join("sweep_gate.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3 * 2);
    assert!(sweep.starts_with("theta_p,mode,far,fdr"));
    let subsets = fs::read_to_string(out.join("ablation_subsets.csv")).unwrap();
    assert_eq!(subsets.lines().count(), 1 + 31);
    let importance = fs::read_to_string(out.join("ablation_importance.csv")).unwrap();
    assert_eq!(importance.lines().count(), 1 + 5);

    let before = fs::read(out.join("sweep.json")).unwrap();
    let md = fs::read(out.join("sweep.md")).unwrap();
    trustgate(&["experiment", "sweep", "--corpus", corpus.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read(out.join("sweep.json")).unwrap(), before);
    assert_eq!(fs::read(out.join("sweep.md")).unwrap(), md);
}

#[test]
fn tampered_corpus_fails_manifest_check() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 1);
    let mut text = fs::read_to_string(&corpus).unwrap();
    text = text.replacen("\"accuracy_m\":", "\"accuracy_m\":1", 1);
    fs::write(&corpus, text).unwrap();
    let o = trustgate(&["experiment", "detection", "--corpus", corpus.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest"));
}
