use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn feh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feh"))
        .args(args)
        .env_remove("FEH_BUDGET")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn put(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn corpus_file(dir: &Path, name: &str) -> String {
    let ext = if name.starts_with("c_ex") { "feh" } else { "mm" };
    put(dir, &format!("{name}.{ext}"), feh::corpus::source(name).unwrap())
        .to_string_lossy()
        .into_owned()
}

#[test]
fn parse_prints_a_reparsable_program() {
    let d = TempDir::new().unwrap();
    let o = feh(&["parse", &corpus_file(d.path(), "c_ex1")]);
    assert_eq!(code(&o), 0);
    assert!(feh::surface::parse(&stdout(&o)).is_ok());
    let bad = put(d.path(), "bad.feh", "main = (");
    assert_eq!(code(&feh(&["parse", bad.to_str().unwrap()])), 3);
}

#[test]
fn run_exit_codes() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&feh(&["run", &corpus_file(d.path(), "c_ex3")])), 0);
    assert_eq!(code(&feh(&["run", &corpus_file(d.path(), "c_ex5")])), 1);
    assert_eq!(code(&feh(&["run", &corpus_file(d.path(), "c_ex1"), "--budget", "3"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_feh"))
        .args(["run", &corpus_file(d.path(), "c_ex1")])
        .env("FEH_BUDGET", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn run_trace_lists_configurations() {
    let d = TempDir::new().unwrap();
    let o = feh(&["run", &corpus_file(d.path(), "c_ex3"), "--trace"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("0: "));
    assert!(out.contains("\n5: "));
}

#[test]
fn check_both_systems() {
    let d = TempDir::new().unwrap();
    let c3 = corpus_file(d.path(), "c_ex3");
    assert_eq!(code(&feh(&["check", &c3, "--system", "st"])), 1);
    let o = feh(&["check", &c3, "--system", "atm", "--json"]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["typable"], true);
    assert_eq!(j["type"], "Bool / pure");
    assert_eq!(j["derivation"]["rule"].as_str().unwrap().get(..2), Some("T-"));
    let o = feh(&["check", &corpus_file(d.path(), "c_ex4"), "--system", "atm", "--json"]);
    assert_eq!(code(&o), 1);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["typable"], false);
    assert!(j["error"].is_string());
}

#[test]
fn cps_writes_a_runnable_handler_free_program() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("out.feh");
    let deriv = d.path().join("out.json");
    let o = feh(&[
        "cps",
        &corpus_file(d.path(), "c_ex2"),
        "-o",
        out.to_str().unwrap(),
        "--deriv",
        deriv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(!text.contains("handle"));
    assert_eq!(code(&feh(&["run", out.to_str().unwrap()])), 0);
    assert_eq!(code(&feh(&["check", out.to_str().unwrap(), "--system", "st"])), 0);
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&deriv).unwrap()).unwrap();
    assert_eq!(j["type"], "Bool");
    assert!(j["derivation"]["premises"].is_array());

    let o = feh(&["cps", &corpus_file(d.path(), "c_ex5"), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn reach_json_and_routes() {
    let d = TempDir::new().unwrap();
    let c1 = corpus_file(d.path(), "c_ex1");
    let o = feh(&["reach", &c1, "--json"]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["verdict"], "yes");
    assert!(j["stats"]["max_active_handlers"].is_u64());
    for route in ["direct", "via-cps"] {
        let o = feh(&["reach", &c1, "--route", route, "--json"]);
        let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(j["route"], route);
    }
    let c5 = corpus_file(d.path(), "c_ex5");
    assert_eq!(code(&feh(&["reach", &c5])), 1);
    assert_eq!(code(&feh(&["reach", &c5, "--route", "via-cps"])), 1);
    assert_eq!(code(&feh(&["reach", &c1, "--budget", "2"])), 2);
}

#[test]
fn minsky_simulate_and_compile() {
    let d = TempDir::new().unwrap();
    let o = feh(&["minsky", "simulate", &corpus_file(d.path(), "count_down"), "--fuel", "100"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("halted after 7 steps"));
    let inc = corpus_file(d.path(), "inc_loop");
    assert_eq!(code(&feh(&["minsky", "simulate", &inc, "--fuel", "100"])), 2);

    let out = d.path().join("mm.feh");
    let o = feh(&["minsky", "compile", &corpus_file(d.path(), "three_state"), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let p = out.to_str().unwrap();
    assert_eq!(code(&feh(&["check", p, "--system", "st"])), 0);
    assert_eq!(code(&feh(&["reach", p])), 0);
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(code(&feh(&[])), 3);
    assert_eq!(code(&feh(&["frobnicate"])), 3);
    assert_eq!(code(&feh(&["check", "x.feh"])), 3);
    assert_eq!(code(&feh(&["run", "/nonexistent/file.feh"])), 3);
    assert_eq!(code(&feh(&["reach", "x.feh", "--route", "sideways"])), 3);
    assert_eq!(code(&feh(&["--help"])), 0);
}
