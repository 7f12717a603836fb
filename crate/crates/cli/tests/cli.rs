use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gittins(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gittins")).args(args).env_remove("GITTINS_SEED").output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bernoulli_index_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("idx.json");
    let o = gittins(&[
        "index",
        "--model",
        "bernoulli",
        "--state",
        "1,3",
        "--gamma",
        "0.8",
        "--K",
        "2",
        "--n",
        "1",
        "--eps-trunc",
        "0.0005",
        "--eps-nu",
        "0.002",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = json(&out);
    let nu = rec["nu"].as_f64().unwrap();
    assert!((nu - 0.446).abs() < 0.005, "nu = {nu}");
    assert_eq!(rec["horizon"], 35);
    assert_eq!(rec["per_k_mean"].as_array().unwrap().len(), 2);
    let m = json(&dir.path().join("idx.json.manifest.json"));
    assert_eq!(m["subcommand"], "index");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn gaussian_index_to_stdout() {
    let o = gittins(&["index", "--model", "gaussian", "--state", "0,1", "--K", "1", "--eps-nu", "0.002"]);
    assert_eq!(o.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let nu = rec["nu"].as_f64().unwrap();
    assert!((nu - 0.526).abs() < 0.006, "nu = {nu}");
}

#[test]
fn missing_state_is_a_usage_error() {
    let o = gittins(&["index", "--model", "bernoulli"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_values_are_usage_errors() {
    assert_eq!(gittins(&["index", "--model", "bernoulli", "--state", "3,2"]).status.code(), Some(2));
    assert_eq!(gittins(&["index", "--model", "bernoulli", "--state", "1,2", "--step", "warp"]).status.code(), Some(2));
    assert_eq!(gittins(&["index", "--model", "bernoulli", "--state", "1,2", "--gamma", "1.5"]).status.code(), Some(2));
}

#[test]
fn iteration_cap_exits_3_but_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("idx.json");
    let o = gittins(&[
        "index",
        "--model",
        "bernoulli",
        "--state",
        "1,2",
        "--max-iters",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let rec = json(&out);
    assert_eq!(rec["iterations"], 5);
    assert_eq!(rec["stopped_by"], "max_iters");
}

#[test]
fn oversized_tree_exits_4() {
    let o = gittins(&["index", "--model", "bernoulli", "--state", "1,2", "--K", "4", "--n", "10"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "[solver]\neps_nu = 0.01\nbogus_key = 3\n").unwrap();
    let o = gittins(&["table", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_key"));

    let syntax = dir.path().join("syntax.toml");
    fs::write(&syntax, "[model]\ngamma = 0.8\nstates = [[1, 2]\n").unwrap();
    let o = gittins(&["table", "--config", syntax.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

const SMALL_TABLE: &str = "\
[model]
family = \"bernoulli\"
states = [[1.0, 2.0], [2.0, 5.0]]

[solver]
columns = [{ depth = 1, n = 1 }, { depth = 2, n = 1 }]
eps_nu = 0.01

[experiment]
repetitions = 2
seed = 7
";

#[test]
fn table_manifest_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    fs::write(&cfg, SMALL_TABLE).unwrap();
    let a = dir.path().join("a.csv");
    let o = gittins(&["table", "--config", cfg.to_str().unwrap(), "--no-timing", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "state,calibration,method,param,value,bias,rmse,sd,cpu_seconds");
    // Per state: calibration, two columns and the limit; then four summaries.
    assert_eq!(lines.count(), 2 * 4 + 4);
    assert!(text.contains("sbgia,K=2;n=1,"));

    let manifest = dir.path().join("a.csv.manifest.json");
    let b = dir.path().join("b.csv");
    let o = gittins(&["table", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        json(&manifest)["outputs"][0]["sha256"],
        json(&dir.path().join("b.csv.manifest.json"))["outputs"][0]["sha256"]
    );
}

#[test]
fn csv_numbers_have_17_significant_digits() {
    let o = gittins(&["calibrate", "--model", "gaussian", "--kappa", "1..3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, want) in rows.iter().zip([0.505, 0.308, 0.226]) {
        let mantissa = row[2].split('e').next().unwrap();
        assert_eq!(mantissa.replace(['.', '-'], "").len(), 17);
        assert!((row[2].parse::<f64>().unwrap() - want).abs() < 0.002);
    }
}

#[test]
fn bernoulli_calibration_by_failures() {
    let o = gittins(&["calibrate", "--model", "bernoulli", "--psi", "1", "--failures", "1..2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let v: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!((v[0] - 0.641).abs() < 0.0005 && (v[1] - 0.443).abs() < 0.0005, "{v:?}");
    assert_eq!(gittins(&["calibrate", "--model", "bernoulli", "--kappa", "3"]).status.code(), Some(2));
}

const SMALL_EXPERIMENT: &str = "\
[model]
particles = 20

[solver]
iterations = 10

[experiment]
horizon = 6
replications = 3
policies = [\"sbgiap\", \"thompson\", \"bayes-ucb\"]
";

#[test]
fn experiment_csv_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("e.toml");
    fs::write(&cfg, SMALL_EXPERIMENT).unwrap();
    let run = |seed_flag: &str, env: Option<&str>, out: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_gittins"));
        c.args(["experiment", "--config", cfg.to_str().unwrap(), "--seed", seed_flag, "--out", out.to_str().unwrap()]);
        match env {
            Some(s) => c.env("GITTINS_SEED", s),
            None => c.env_remove("GITTINS_SEED"),
        };
        let o = c.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out).unwrap()
    };
    let a = run("5", None, &dir.path().join("a.csv"));
    let b = run("9", Some("5"), &dir.path().join("b.csv"));
    let c = run("9", None, &dir.path().join("c.csv"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "replication,t,policy,arm,expected_reward,optimal_flag,disc_total_080,disc_total_090,disc_total_099"
    );
    assert_eq!(lines.count(), 3 * 3 * 6);
    assert_eq!(json(&dir.path().join("b.csv.manifest.json"))["seed"], 5);

    let again = dir.path().join("d.csv");
    let manifest = dir.path().join("a.csv.manifest.json");
    let o = gittins(&["experiment", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(again).unwrap(), a);
}

#[test]
fn unknown_preset_is_rejected() {
    assert_eq!(gittins(&["table", "--preset", "table9"]).status.code(), Some(2));
    assert_eq!(gittins(&["experiment", "--preset", "huge"]).status.code(), Some(2));
}
