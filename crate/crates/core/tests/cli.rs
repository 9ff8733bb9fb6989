use std::path::PathBuf;
use std::process::{Command, Output};

fn drcplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drcplan"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn exit_codes() {
    assert_eq!(drcplan(&["--help"]).status.code(), Some(0));
    assert_eq!(drcplan(&["no-such-command"]).status.code(), Some(2));
    let bad = drcplan(&["generate", "zigzag", "--size", "2"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error:"));
    assert_eq!(
        drcplan(&["--set", "nope=1", "solve", "--levels", "corridor:8"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        drcplan(&["run", "--planner", "drc", "--levels", "corridor:8"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn solve_prints_one_row_per_level() {
    let o = drcplan(&["solve", "--levels", "rooms:4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,id,solved,length,actions"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn generated_levels_parse() {
    let o = drcplan(&["generate", "zigzag", "--size", "11"]);
    assert!(o.status.success());
    let level = drcplan::Level::parse(&stdout(&o)).unwrap();
    assert!(level.border_is_wall() && level.check_invariants());
}

#[test]
fn evaluate_writes_its_outputs() {
    let dir = scratch("evaluate");
    let out = dir.join("eval");
    let o = drcplan(&[
        "--levels",
        "rooms:6",
        "--out",
        out.to_str().unwrap(),
        "evaluate",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.txt", "outcomes.csv", "stats.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    assert!(stats.starts_with("n_levels,n_solved,solve_rate,mean_steps,ci_lo,ci_hi\n6,"));
}

#[test]
fn run_dumps_heatmaps_per_tick() {
    let dir = scratch("dump");
    let o = drcplan(&[
        "run",
        "--levels",
        "two_paths:7",
        "--dump",
        dir.to_str().unwrap(),
        "--channels",
        "box_short.right",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for ext in ["csv", "ppm"] {
        assert!(dir
            .join(format!("level000_tick000_box_short_right.{ext}"))
            .is_file());
    }
    let csv = std::fs::read_to_string(dir.join("level000_tick001_box_short_right.csv")).unwrap();
    assert!(drcplan::harness::read_heatmap_csv(&csv).is_ok());
}

#[test]
fn compiled_weights_load_back() {
    let dir = scratch("compile");
    let path = dir.join("w.drcw");
    let o = drcplan(&[
        "--out",
        path.to_str().unwrap(),
        "compile-weights",
        "--height",
        "7",
        "--width",
        "9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = drcplan::net::DrcConfig {
        layers: 1,
        ticks: 1,
        channels: 32,
        height: 7,
        width: 9,
    };
    assert!(drcplan::net::load_weights(&path, &cfg).is_ok());
    assert_eq!(drcplan(&["compile-weights"]).status.code(), Some(1));
}
