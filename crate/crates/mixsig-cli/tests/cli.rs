use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixsig_cli::config::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixsig"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_SIM: &str = r#"
schema_version = "1.0"
seed = 4

[model]
family = "mirrored"
n = 2
dim = 1
phi = { family = "additive", weights = [1.0, 1.0], intercept = 0.0 }
slopes = [[[0.5, 1.0]], [[0.2, 0.6]]]
copula = { family = "gaussian", rho = 0.2 }

[profile]
kind = "canonical"
base = { kind = "linear", lo = 0.1, hi = 0.9 }

[covariates]
kind = "box"
lo = 1.0
hi = 2.0

[simulate]
auctions = 10
"#;

#[test]
fn shipped_configs_parse_and_build() {
    for entry in fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        let cfg = RunConfig::parse(&fs::read_to_string(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.primitives().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn simulate_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SMALL_SIM);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(a.join("bids.csv")).unwrap();
    assert_eq!(bytes, fs::read(b.join("bids.csv")).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# mixsig-schema 1."));
    assert_eq!(lines[1], "auction_id,bidder_id,bid,z_1");
    assert_eq!(lines.len(), 2 + 20);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn bidder_count_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SIM.replace("n = 2", "n = 3");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let o = run(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn assumption_failure_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SIM.replace("[[0.5, 1.0]], [[0.2, 0.6]]", "[[1.0, 0.5]], [[0.2, 0.6]]");
    let cfg = write_config(dir.path(), "dec.toml", &text);
    let out = dir.path().join("o");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--force"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_schema_major_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SMALL_SIM);
    let data = dir.path().join("bids.csv");
    fs::write(&data, "# mixsig-schema 2.0 bids\nauction_id,bidder_id,bid,z_1\n0,1,0.5,1\n0,2,0.6,1\n").unwrap();
    let o = run(&["field", "--config", &cfg, "--data", data.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let bad = write_config(dir.path(), "v2.toml", &SMALL_SIM.replace("\"1.0\"", "\"2.0\""));
    let o = run(&["simulate", "--config", &bad, "--out", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identify_oracle_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("interaction.toml");
    let o = run(&["identify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("PASS identification completed"));
    for line in summary.lines().filter(|l| l.starts_with("generator")) {
        let err: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(err < 1e-4, "{line}");
    }
    let slopes = fs::read_to_string(dir.path().join("slopes.csv")).unwrap();
    assert!(slopes.lines().nth(1).unwrap().starts_with("alpha,gamma_1_1,gamma_2_1"));
}

const SYMMETRIC: &str = r#"
schema_version = "1.0"
[model]
family = "mirrored"
n = 2
dim = 1
phi = { family = "additive", weights = [1.0, 1.0], intercept = 0.0 }
slopes = [[[0.5, 1.0]], [[0.4, 1.0]]]
copula = { family = "independence" }
[profile]
kind = "synthetic"
base = { kind = "linear", lo = 0.1, hi = 0.9 }
warps = [{ family = "identity" }, { family = "identity" }]
"#;

#[test]
fn symmetric_fixture_fails_rank_unless_diagnose_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sym.toml", SYMMETRIC);
    let o = run(&["identify", "--config", &cfg, "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let diag = fs::read_to_string(dir.path().join("a/diagnostics.txt")).unwrap();
    assert!(diag.lines().any(|l| l.starts_with("FAIL rank condition")));
    assert!(dir.path().join("a/error.json").exists());
    let o = run(&["identify", "--config", &cfg, "--out", dir.path().join("b").to_str().unwrap(), "--diagnose-only"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("b/diagnostics.txt").exists());
    let o = run(&["diagnose", "--config", &cfg, "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn estimate_in_sieve_generator_reaches_tiny_objective() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("interaction.toml");
    let o = run(&["estimate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let obj: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("final objective: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(obj <= 1e-10, "{obj}");
    let log = fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
    assert_eq!(log.lines().nth(1).unwrap(), "iteration,objective,segment,event");
    assert!(dir.path().join("slope_coefficients.csv").exists());
}

#[test]
fn counterfactual_uniform_ipv_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("uniform_ipv.toml");
    let o = run(&["counterfactual", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("revenue.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(2) {
        let cells: Vec<String> = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes())
            .records()
            .next()
            .unwrap()
            .unwrap()
            .iter()
            .map(String::from)
            .collect();
        let rev: f64 = cells[3].parse().unwrap();
        let se: f64 = cells[4].parse().unwrap();
        assert!((rev - 1.0 / 3.0).abs() < 3.0 * se, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 2);
    // A second run into the same directory appends.
    let o = run(&["counterfactual", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.path().join("revenue.csv")).unwrap().lines().count(), 2 + 4);
}

#[test]
fn field_export_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("wilson.toml");
    let o = run(&["field", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--grid-alpha", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["u", "bid_1", "bid_2", "gb_1", "gb_2"] {
        let text = fs::read_to_string(dir.path().join(format!("field_{name}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 2 + 7 * 3, "{name}");
    }
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("interaction.toml");
    let a = dir.path().join("a");
    let o = run(&["identify", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--grid-alpha", "41"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = dir.path().join("b");
    let o = run(&["replay", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ma: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["grid_alpha"], 41);
    for f in ma["outputs"].as_array().unwrap() {
        let name = f["file"].as_str().unwrap();
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}
