use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ridepool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridepool"))
        .args(args)
        .env_remove("RIDEPOOL_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn sioux_falls_config() -> String {
    repo().join("configs/sioux_falls.json").display().to_string()
}

fn run_into(dir: &Path, extra: &[&str]) -> String {
    let config = sioux_falls_config();
    let out_dir = dir.display().to_string();
    let mut args = vec!["run", "--config", &config, "--output-dir", &out_dir];
    args.extend_from_slice(extra);
    ok(&ridepool(&args));
    fs::read_to_string(dir.join("summary.csv")).unwrap()
}

#[test]
fn repeated_runs_write_identical_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache").display().to_string();
    let a = run_into(&tmp.path().join("a"), &["--cache-dir", &cache]);
    let b = run_into(&tmp.path().join("b"), &["--cache-dir", &cache]);
    assert!(a.lines().count() == 13, "{a}");
    assert_eq!(a, b);
    // Per-point JSON is deterministic too.
    for i in 0..12 {
        let name = format!("points/point_{i}.json");
        assert_eq!(
            fs::read(tmp.path().join("a").join(&name)).unwrap(),
            fs::read(tmp.path().join("b").join(&name)).unwrap()
        );
    }
}

#[test]
fn warm_cache_gives_the_cold_result() {
    let tmp = tempfile::tempdir().unwrap();
    let cold = run_into(&tmp.path().join("cold"), &[]);
    let cache = tmp.path().join("cache").display().to_string();
    let _ = run_into(&tmp.path().join("fill"), &["--cache-dir", &cache]);
    let warm = run_into(&tmp.path().join("warm"), &["--cache-dir", &cache]);
    assert_eq!(cold, warm);
}

#[test]
fn precompute_reuses_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let config = sioux_falls_config();
    let cache = tmp.path().join("cache").display().to_string();
    let args = ["precompute", "--config", &config, "--cache-dir", &cache];
    let first = ok(&ridepool(&args));
    let second = ok(&ridepool(&args));
    assert!(!first.contains("from cache"), "{first}");
    assert!(second.contains("from cache"), "{second}");
    let seconds = second
        .lines()
        .find_map(|l| l.strip_prefix("precompute "))
        .and_then(|s| s.trim_end_matches(" s").parse::<f64>().ok())
        .expect("precompute time line");
    assert!(seconds < 1.0, "{second}");
}

#[test]
fn empty_request_file_pools_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("net.txt"), "1 2 1\n2 3 1\n3 1 1\n").unwrap();
    fs::write(tmp.path().join("requests.txt"), "# none\n").unwrap();
    let cfg = r#"{
        "network_format": "edge_list",
        "edge_list_path": "net.txt",
        "requests_path": "requests.txt",
        "k_max": 2,
        "delta_bar": 5.0,
        "t_bar": 5.0,
        "output_dir": "out"
    }"#;
    fs::write(tmp.path().join("cfg.json"), cfg).unwrap();
    ok(&ridepool(&["run", "--config", &tmp.path().join("cfg.json").display().to_string()]));
    let text = fs::read_to_string(tmp.path().join("out/summary.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let row = rows.records().next().unwrap().unwrap();
    let field = |name: &str| -> f64 {
        let i = headers.iter().position(|h| h == name).unwrap();
        row[i].parse().unwrap()
    };
    assert_eq!(field("pooled_percentage"), 0.0);
    assert_eq!(field("objective_improvement"), 0.0);
    assert_eq!(field("total_demand"), 0.0);
}

#[test]
fn bad_cluster_count_fails_cleanly() {
    let config = sioux_falls_config();
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().display().to_string();
    let out = ridepool(&["granularity", "--config", &config, "--output-dir", &out_dir, "--k", "1"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("at least 2"), "{err}");
}

#[test]
fn missing_config_fails_cleanly() {
    let out = ridepool(&["run", "--config", "/nonexistent/cfg.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn granularity_writes_one_row_per_k() {
    let config = sioux_falls_config();
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().display().to_string();
    ok(&ridepool(&["granularity", "--config", &config, "--output-dir", &out_dir, "--k", "12,24"]));
    let text = fs::read_to_string(tmp.path().join("granularity.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("k,nodes,"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn lemma_validation_runs() {
    let out = ridepool(&["validate-lemma", "--configs", "5", "--samples", "20000", "--seed", "3"]);
    let text = ok(&out);
    assert!(text.contains("all 5 configurations"), "{text}");
}
