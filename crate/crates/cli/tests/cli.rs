// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Output, Stdio};

fn upbw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upbw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn result(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# result {key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .map(str::to_string)
}

fn table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SIM: &[&str] = &[
    "simulate", "--sub", "240000", "--helpers", "3", "--ab", "100000", "--packets", "20", "--size", "8192",
    "--seed", "1",
];

#[test]
fn simulate_confident() {
    let o = upbw(SIM);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let est: f64 = result(&text, "estimate_Bps").unwrap().parse().unwrap();
    assert!((est - 240_000.0).abs() <= 0.02 * 240_000.0, "{est}");
    assert_eq!(result(&text, "confident").as_deref(), Some("true"));
    let t = table(&text);
    assert_eq!(t[0][0], "helper");
    assert_eq!(t.len(), 4);
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (upbw(SIM), upbw(SIM));
    assert_eq!(stdout(&a), stdout(&b));
    let mut jittery = SIM.to_vec();
    jittery.extend(["--jitter-ms", "3"]);
    assert_eq!(stdout(&upbw(&jittery)), stdout(&upbw(&jittery)));
}

#[test]
fn simulate_usage_errors() {
    assert_eq!(upbw(&["simulate", "--helpers", "0"]).status.code(), Some(1));
    assert_eq!(upbw(&["simulate", "--helpers", "3", "--ab", "1,2"]).status.code(), Some(1));
    assert_eq!(upbw(&["simulate", "--size", "4"]).status.code(), Some(1));
    assert_eq!(upbw(&["simulate", "--p1", "2"]).status.code(), Some(1));
    assert_eq!(upbw(&["simulate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(upbw(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_without_reports_is_low_confidence() {
    let o = upbw(&["simulate", "--loss", "1", "--report-deadline", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(result(&stdout(&o), "estimate_Bps").as_deref(), Some(""));
}

#[test]
fn simulate_writes_trace_and_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let report = dir.path().join("report.csv");
    let mut args = SIM.to_vec();
    let (t, r) = (trace.to_str().unwrap(), report.to_str().unwrap());
    args.extend(["--trace", t, "--output", r]);
    let o = upbw(&args);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(trace_text.lines().next(), Some("time_s,event,helper,bytes,rtt_s"));
    assert!(trace_text.contains(",path-delivery,"));
    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.contains(&format!("# output {t}")));
}

#[test]
fn alloc_all_agree() {
    let o = upbw(&["alloc", "--s", "2,0,2", "--p", "2,2,0", "--algorithm", "all"]);
    assert_eq!(o.status.code(), Some(0));
    let t = table(&stdout(&o));
    assert_eq!(t[0], ["x_units", "rsum_naive_units", "rsum_sweep_units", "rsum_closed_units"]);
    let naive: Vec<&str> = t[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(naive, ["4", "3", "2"]);
    assert_eq!(result(&stdout(&o), "agree").as_deref(), Some("true"));
}

#[test]
fn alloc_fixed_x() {
    let o = upbw(&["alloc", "--s", "2,0", "--p", "3,1", "--x", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let t = table(&stdout(&o));
    assert_eq!(t[1], ["0", "2", "3", "1", "1"]);
    assert_eq!(t[2], ["1", "0", "1", "0", "0"]);
    assert_eq!(result(&stdout(&o), "total_units").as_deref(), Some("2"));
    assert_eq!(upbw(&["alloc", "--s", "2,0", "--p", "3,1", "--x", "3"]).status.code(), Some(1));
}

#[test]
fn alloc_from_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ring.txt");
    std::fs::write(&path, "# example\nS: 2 0 2\nP: 2 2 0\n").unwrap();
    let o = upbw(&["alloc", "--file", path.to_str().unwrap(), "--algorithm", "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(table(&stdout(&o))[0], ["x_units", "rsum_sweep_units"]);

    let one = upbw(&["alloc", "--s", "4", "--p", "4"]);
    assert_eq!(one.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&one.stderr).contains("at least 2"));
    std::fs::write(&path, "S: 1 2\n").unwrap();
    assert_eq!(upbw(&["alloc", "--file", path.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(upbw(&["alloc"]).status.code(), Some(1));
}

#[test]
fn aub_search_in_simulator() {
    let o = upbw(&["aub", "--background", "140000", "--latency-ms", "20,35,50"]);
    assert_eq!(o.status.code(), Some(0));
    let est: f64 = result(&stdout(&o), "aub_estimate_Bps").unwrap().parse().unwrap();
    assert!((est - 100_000.0).abs() <= 2_000.0, "{est}");
    assert_eq!(table(&stdout(&o))[0], ["step", "rate_Bps", "measured_Bps", "passed"]);
    assert_eq!(upbw(&["aub", "--cr", "0"]).status.code(), Some(1));
    assert_eq!(upbw(&["aub", "--cr", "1.5"]).status.code(), Some(1));
}

#[test]
fn aub_ping_over_capacity_fails() {
    let o = upbw(&[
        "aub", "--mode", "ping", "--sub", "61440", "--ab", "10000000", "--window", "0", "--overhead", "40",
        "--rate", "80000", "--duration", "120",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(result(&text, "quality").as_deref(), Some("false"));
    let timeouts: usize = result(&text, "timeouts").unwrap().parse().unwrap();
    assert!(timeouts > 0);
    assert_eq!(upbw(&["aub", "--mode", "ping", "--peers", "127.0.0.1:1"]).status.code(), Some(1));
}

/// Starts a helper on a free loopback port and returns it with its address.
fn spawn_helper(transport: &str) -> (Child, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_upbw"))
        .args(["estimate", "--role", "helper", "--transport", transport, "--wait", "30"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();
    (child, addr)
}

fn loopback(transport: &str) -> Output {
    let helpers: Vec<_> = (0..3).map(|_| spawn_helper(transport)).collect();
    let peers: Vec<&str> = helpers.iter().map(|h| h.1.as_str()).collect();
    let out = upbw(&[
        "estimate", "--role", "sender", "--transport", transport, "--peers", &peers.join(","), "--rate",
        "163840", "--packets", "10", "--size", "8192",
    ]);
    for (mut child, _) in helpers {
        assert!(child.wait().unwrap().success());
    }
    out
}

#[test]
fn transports_share_the_report_schema() {
    let udp = loopback("udp");
    let tcp = loopback("tcp");
    assert_eq!(udp.status.code(), Some(0));
    assert_eq!(tcp.status.code(), Some(0));
    let keys = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .filter(|l| l.starts_with("# result"))
            .map(|l| l.split('=').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(table(&stdout(&udp))[0], table(&stdout(&tcp))[0]);
    assert_eq!(keys(&udp), keys(&tcp));
}

#[test]
fn sender_without_helpers_has_no_estimate() {
    let o = upbw(&["estimate", "--role", "sender", "--transport", "tcp", "--peers", "127.0.0.1:9"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(result(&stdout(&o), "reports_received").as_deref(), Some("0"));
    assert_eq!(upbw(&["estimate", "--role", "sender"]).status.code(), Some(1));
    assert_eq!(upbw(&["estimate", "--role", "helper", "--bind", "256.0.0.1:0"]).status.code(), Some(1));
}
