use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use duplex_core::metrics::read_comparison_csv;
use duplex_core::synth;
use duplex_core::trace::EpisodeTrace;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(symbols: &[&str], rows: usize, seed: u64) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let frame = synth::random_walk(symbols, rows, 1, seed);
        for (i, sym) in symbols.iter().enumerate() {
            let f = std::fs::File::create(dir.path().join(format!("{sym}.csv"))).unwrap();
            frame.series(i).write_csv(f).unwrap();
        }
        let paths: Vec<String> = symbols.iter().map(|s| format!("\"{s}.csv\"")).collect();
        let text = format!(
            "seed = 5\nout = \"out\"\n\n[data]\npaths = [{}]\ninterval_hours = 4\ntrain_steps = 60\ntest_steps = 30\n\n\
             [env]\nhistory = 8\n\n[train]\nepisodes = 2\nepisode_len = 10\nwarmup_steps = 8\nmax_updates = 4\n\n\
             [sac]\nbatch_size = 4\n\n[sppo]\nwindow = 20\nfrontier_points = 5\n",
            paths.join(", ")
        );
        std::fs::write(dir.path().join("experiment.toml"), text).unwrap();
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let out = Command::new(env!("CARGO_BIN_EXE_duplex"))
            .args(args)
            .arg("--config")
            .arg(self.path("experiment.toml"))
            .current_dir(self.dir.path())
            .output()
            .unwrap();
        out
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).into_owned()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn manifest(p: &Path) -> serde_json::Value {
    serde_json::from_slice(&read(&p.join("manifest.json"))).unwrap()
}

#[test]
fn ingest_twelve_assets_at_four_hours() {
    let symbols: Vec<String> = (0..12).map(|i| format!("S{i:02}")).collect();
    let refs: Vec<&str> = symbols.iter().map(|s| s.as_str()).collect();
    let fx = Fixture::new(&refs, 500, 1);
    fx.ok(&["ingest", "--out", "a"]);
    fx.ok(&["ingest", "--out", "b"]);
    let (a, b) = (manifest(&fx.path("a")), manifest(&fx.path("b")));
    assert_eq!(a["assets"], 12);
    assert_eq!(a["interval_hours"], 4);
    assert_eq!(a["source_interval_hours"], 1);
    assert_eq!(a["interval_rows"], 125);
    assert_eq!(a["hash"], b["hash"]);
    assert!(fx.path("a/config.resolved.toml").is_file());
}

#[test]
fn short_file_is_a_data_error() {
    let fx = Fixture::new(&["ONLY"], 40, 2);
    let out = fx.run(&["ingest"]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rows"), "{err}");
}

#[test]
fn missing_data_file_and_bad_values_are_config_errors() {
    let fx = Fixture::new(&["A", "B"], 500, 3);
    std::fs::remove_file(fx.path("B.csv")).unwrap();
    let out = fx.run(&["ingest"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("B.csv"));

    let fx = Fixture::new(&["A", "B"], 500, 3);
    assert_eq!(code(&fx.run(&["backtest", "--strategy", "sppo:foo"])), 2);
    assert_eq!(code(&fx.run(&["backtest", "--no-such-flag"])), 2);
    assert_eq!(code(&fx.run(&["backtest", "--strategy", "rl:pnl"])), 2);
}

#[test]
fn equal_weight_holds_one_over_m() {
    let fx = Fixture::new(&["A", "B", "C"], 500, 4);
    fx.ok(&["backtest", "--strategy", "equal_weight", "--out", "ew"]);
    let trace = EpisodeTrace::load(fx.path("ew/trace.csv")).unwrap();
    assert_eq!(trace.len(), 31);
    for r in &trace.records[1..] {
        assert_eq!(r.weights, vec![1.0 / 3.0; 3]);
        assert_eq!(r.loan_weight, 0.0);
    }
}

#[test]
fn backtests_repeat_byte_for_byte() {
    let fx = Fixture::new(&["A", "B", "C"], 500, 5);
    fx.ok(&["ingest", "--out", "data"]);
    for run in ["x", "y"] {
        fx.ok(&["backtest", "--strategy", "sppo:MV", "--data", "data", "--out", run]);
    }
    for file in ["trace.csv", "report.json", "report.csv"] {
        assert_eq!(read(&fx.path(&format!("x/{file}"))), read(&fx.path(&format!("y/{file}"))), "{file}");
    }
}

#[test]
fn training_respects_seed_and_budget() {
    let fx = Fixture::new(&["A", "B"], 500, 6);
    let msg = fx.ok(&["train", "--out", "t1"]);
    assert!(msg.contains("4 updates"), "{msg}");
    fx.ok(&["train", "--out", "t2"]);
    fx.ok(&["train", "--out", "t3", "--seed", "6"]);
    let ck = |d: &str| read(&fx.path(&format!("{d}/checkpoint.bin")));
    assert_eq!(ck("t1"), ck("t2"));
    assert_ne!(ck("t1"), ck("t3"));
    assert_eq!(read(&fx.path("t1/curve.csv")), read(&fx.path("t2/curve.csv")));

    let msg = fx.ok(&["train", "--out", "t0", "--episodes", "0"]);
    assert!(msg.contains("0 episodes, 0 updates"), "{msg}");
    let curve = String::from_utf8(read(&fx.path("t0/curve.csv"))).unwrap();
    assert_eq!(curve.lines().count(), 1);

    fx.ok(&["backtest", "--strategy", "rl:pnl", "--checkpoint", "t1/checkpoint.bin", "--out", "rl"]);
    let trace = EpisodeTrace::load(fx.path("rl/trace.csv")).unwrap();
    assert_eq!(trace.len(), 31);
}

#[test]
fn compare_tables() {
    let fx = Fixture::new(&["A", "B", "C"], 500, 7);
    fx.ok(&["ingest", "--out", "data"]);
    let strategies = ["equal_weight", "sppo:MV", "sppo:MAD", "sppo:CVaR"];
    for s in strategies {
        let dir = s.replace(':', "_");
        fx.ok(&["backtest", "--data", "data", "--strategy", s, "--out", &dir]);
    }
    let mut args = vec!["compare", "--data", "data", "--out", "cmp"];
    let traces: Vec<String> = strategies
        .iter()
        .map(|s| format!("{s}={}/trace.csv", s.replace(':', "_")))
        .chain(std::iter::once("copy=equal_weight/trace.csv".to_string()))
        .collect();
    args.extend(traces.iter().map(|s| s.as_str()));
    fx.ok(&args);
    let rows = read_comparison_csv(read(&fx.path("cmp/comparison.csv")).as_slice()).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].1, rows[4].1);
    assert_eq!(rows[1].0, "sppo:MV");
    assert!(fx.path("cmp/hist_equal_weight.csv").is_file());

    let out = fx.run(&["compare", "equal_weight/trace.csv", "nowhere/trace.csv"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/trace.csv"));
    assert_eq!(code(&fx.run(&["compare", "equal_weight/trace.csv"])), 2);
}

#[test]
fn frontier_and_report_write_outputs() {
    let fx = Fixture::new(&["A", "B", "C"], 500, 8);
    fx.ok(&["frontier", "--strategy", "sppo:MAD", "--out", "f"]);
    assert!(fx.path("f/frontier.csv").is_file());
    let summary: serde_json::Value = serde_json::from_slice(&read(&fx.path("f/frontier.json"))).unwrap();
    assert_eq!(summary["measure"], "MAD");
    fx.ok(&["backtest", "--strategy", "equal_weight", "--out", "ew"]);
    fx.ok(&["report", "ew/trace.csv", "--out", "r"]);
    assert_eq!(read(&fx.path("r/report.csv")), read(&fx.path("ew/report.csv")));
}
