//! Drives the built `avkg` binary.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};

fn avkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avkg")).args(args).output().expect("spawn avkg")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("avkg-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn reproduce_tables_matches_golden_text_and_csv() {
    let text = avkg(&["reproduce", "tables"]);
    assert!(text.status.success());
    assert_eq!(stdout(&text), include_str!("golden/tables.txt"));
    let csv = avkg(&["reproduce", "tables", "--format", "csv"]);
    assert!(csv.status.success());
    assert_eq!(stdout(&csv), include_str!("golden/tables.csv"));
    // Byte-identical on a second run.
    assert_eq!(avkg(&["reproduce", "tables"]).stdout, text.stdout);
}

#[test]
fn graph_dump_matches_golden_and_validates() {
    let dump = avkg(&["graph", "dump"]);
    assert!(dump.status.success());
    assert_eq!(stdout(&dump), include_str!("golden/catalog.kg"));

    let dir = scratch("dump");
    let file = dir.join("catalog.kg");
    assert!(avkg(&["graph", "dump", "--out", file.to_str().unwrap()]).status.success());
    let v = avkg(&["graph", "validate", "--file", file.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn validate_rejects_a_broken_file_with_the_check_exit_code() {
    let dir = scratch("broken");
    let file = dir.join("broken.kg");
    std::fs::write(&file, "KG v1\nNODE in:a input A\nNODE out:b output B\nEDGE out:b in:a implies\n").unwrap();
    let v = avkg(&["graph", "validate", "--file", file.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    let err = String::from_utf8_lossy(&v.stderr);
    assert!(err.contains("layer order"), "{err}");
}

#[test]
fn segments_written_to_disk_cover_the_graph() {
    let dir = scratch("segs");
    let o = avkg(&["graph", "segment", "--max-nodes", "10", "--out-dir", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 5);
    let segments: Vec<_> =
        files.iter().map(|f| avkg::graphio::deserialize_segment(&std::fs::read(f).unwrap()).unwrap()).collect();
    let g = avkg::graphio::reconstruct(&segments).unwrap();
    assert_eq!(g, avkg::ontology::build_graph(&avkg::ontology::catalog()));
}

#[test]
fn run_prints_one_line_per_trial() {
    let o = avkg(&["run"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 60);

    let o = avkg(&["run", "--obstacle", "plastic_chair", "--scenario", "restricted", "--controller", "kg"]);
    assert_eq!(
        stdout(&o),
        "plastic_chair restricted kg response=SUDDEN_BRAKE outcome=stopped_before_obstacle category=\"Sudden Braking\"\n"
    );
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["bogus"][..],
        &["run", "--obstacle", "unicorn"],
        &["run", "--speed", "-1"],
        &["run", "--dt", "0"],
        &["decide", "gnome", "sideways"],
        &["graph", "segment", "--max-nodes", "0"],
        &["graph", "validate", "--file", "/nonexistent/file.kg"],
    ] {
        let o = avkg(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn oracle_exit_codes() {
    let ok = avkg(&["oracle"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("PASS"));
    let bad = avkg(&["oracle", "--min-frontal-area", "0"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("creased_box_02"));
}

#[test]
fn decide_locally_and_through_a_served_graph() {
    let local = avkg(&["decide", "plastic_chair", "restricted"]);
    assert!(local.status.success());
    let text = stdout(&local);
    assert!(text.starts_with("SUDDEN_BRAKE\nTRACE in:plastic_chair,"), "{text}");

    let mut child = Command::new(env!("CARGO_BIN_EXE_avkg"))
        .args(["graph", "serve", "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let _served = Served(child);
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();

    for (obstacle, lane) in [("plastic_chair", "restricted"), ("construction_cone", "feasible"), ("gnome", "feasible")]
    {
        let here = avkg(&["decide", obstacle, lane]);
        let there = avkg(&["decide", obstacle, lane, "--connect", &addr]);
        assert!(there.status.success(), "{}", String::from_utf8_lossy(&there.stderr));
        assert_eq!(stdout(&here), stdout(&there));
    }
    let unknown = avkg(&["decide", "unicorn", "feasible", "--connect", &addr]);
    assert_eq!(unknown.status.code(), Some(1));
}
