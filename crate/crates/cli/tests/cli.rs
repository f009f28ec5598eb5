use std::path::Path;
use std::process::{Command, Output};

const FLIGHT_ARGS: &[&str] = &[
    "run",
    "--deterministic",
    "--clock",
    "sim:2006-05-01T01:00:00:5000",
    "--max-cycles",
    "7",
    "--inject",
    "request(alice,paris)@0",
    "--inject",
    "request(bob,rome)@12",
];

fn ecalp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecalp"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env_remove("ECALP_TRACE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn with<'a>(base: &[&'a str], more: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(more).copied().collect()
}

#[test]
fn flight_run_matches_golden() {
    let out = ecalp(&with(FLIGHT_ARGS, &["--trace", "solver", "tests/fixtures/flight.ecalp"]));
    assert_eq!(out.status.code(), Some(0));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/flight.golden")).unwrap();
    assert_eq!(stdout(&out), golden);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let args = with(FLIGHT_ARGS, &["--trace", "rules", "tests/fixtures/flight.ecalp"]);
    let first = ecalp(&args);
    let second = ecalp(&args);
    assert!(!first.stdout.is_empty());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn trace_off_prints_only_notifications() {
    let out = ecalp(&with(FLIGHT_ARGS, &["tests/fixtures/flight.ecalp"]));
    assert_eq!(stdout(&out), "NOTIFY alice flightBooked(f2)\nNOTIFY bob bookedUp(rome)\n");
}

#[test]
fn environment_overrides_trace_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_ecalp"))
        .args(with(FLIGHT_ARGS, &["--trace", "off", "tests/fixtures/flight.ecalp"]))
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env("ECALP_TRACE", "rules")
        .output()
        .unwrap();
    let text = stdout(&out);
    assert!(text.contains("\ttime_not_due\n"), "{text}");
    assert!(!text.contains("commit"));
}

#[test]
fn query_answers_embedded_goal() {
    let out = ecalp(&["query", "tests/fixtures/interval.ecalp"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "Interval = [datetime(2005,1,1,0,0,1),datetime(2005,1,1,0,0,10)]\n");
}

#[test]
fn query_answers_command_line_goal() {
    let out = ecalp(&["query", "tests/fixtures/flight.ecalp", "flight(F, paris)"]);
    assert_eq!(stdout(&out), "F = f1\nF = f2\n");
    let out = ecalp(&["query", "tests/fixtures/flight.ecalp", "flight(f9, paris)"]);
    assert_eq!(stdout(&out), "no\n");
}

#[test]
fn query_with_injected_events() {
    let out = ecalp(&["query", "tests/fixtures/flight.ecalp", "--inject", "a@1", "--inject", "b@4", "holdsInterval([a,b], I)"]);
    assert_eq!(stdout(&out), "I = [1,4]\n");
}

#[test]
fn exit_codes() {
    assert_eq!(ecalp(&["check", "tests/fixtures/flight.ecalp"]).status.code(), Some(0));
    let broken = ecalp(&["run", "--max-cycles", "1", "tests/fixtures/broken.ecalp"]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("broken.ecalp:1:"));
    assert_eq!(ecalp(&["run", "--max-cycles", "1", "tests/fixtures/missing.ecalp"]).status.code(), Some(1));
    assert_eq!(ecalp(&["run", "--parallel", "--clock", "sim:0:10", "tests/fixtures/flight.ecalp"]).status.code(), Some(1));
    assert_eq!(ecalp(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(ecalp(&["query", "tests/fixtures/flight.ecalp", "X is foo + 1"]).status.code(), Some(2));
    assert_eq!(ecalp(&["--help"]).status.code(), Some(0));
}

#[test]
fn check_reports_violations() {
    let out = ecalp(&["check", "tests/fixtures/conflict.ecalp"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).starts_with("integrity(xor(p(x),neg(p(x)))) violated by"));
}

#[test]
fn translated_document_runs_like_the_script() {
    let dir = std::env::temp_dir().join(format!("ecalp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let script = dir.join("flight.ecalp");
    let out = ecalp(&["translate", "tests/fixtures/flight.xml", "-o", script.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let translated = ecalp(&with(FLIGHT_ARGS, &[script.to_str().unwrap()]));
    let original = ecalp(&with(FLIGHT_ARGS, &["tests/fixtures/flight.ecalp"]));
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(translated.status.code(), Some(0));
    assert_eq!(translated.stdout, original.stdout);
}

#[test]
fn translate_to_stdout() {
    let out = ecalp(&["translate", "tests/fixtures/flight.xml"]);
    assert!(stdout(&out).starts_with("eca("));
}
