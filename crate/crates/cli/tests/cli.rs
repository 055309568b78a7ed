use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_slicedmi"));
    c.env_remove("SLICEDMI_OUTPUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn result(report: &str, key: &str) -> f64 {
    let doc: toml::Table = report.parse().unwrap();
    doc["result"][key].as_float().unwrap()
}

/// The `[config]` table of a TOML report, as a standalone document.
fn config_of(report: &str) -> String {
    let doc: toml::Table = report.parse().unwrap();
    toml::to_string(doc["config"].as_table().unwrap()).unwrap()
}

/// The leading `# ` block of a CSV or tensor file.
fn comment_config(text: &str) -> String {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
        .collect::<Vec<_>>()
        .join("\n")
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn identical_columns_give_large_estimate() {
    let tmp = TempDir::new().unwrap();
    let column: String = (0..400).map(|i| format!("{}\n", ((i * 37) % 101) as f64 / 7.0 + i as f64 * 1e-3)).collect();
    write(tmp.path(), "a.csv", &column);
    write(tmp.path(), "b.csv", &column);
    let out = ok(tmp.path(), &["estimate", "a.csv", "b.csv", "--m", "20"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("SMI ="));
    assert!(result(&read(tmp.path().join("estimate.toml")), "value") > 3.0);
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.csv", "1\n2\n3\n4\n5\n");
    write(tmp.path(), "b.csv", "1\n2\n3\n");
    let out = run(tmp.path(), &["estimate", "a.csv", "b.csv"]);
    assert_eq!(code(&out), 2);
    write(tmp.path(), "c.csv", "1\n2\nfoo\n4\n5\n");
    let out = run(tmp.path(), &["estimate", "a.csv", "c.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.csv:3"));
    assert_eq!(code(&run(tmp.path(), &["estimate", "a.csv", "missing.csv"])), 2);
}

#[test]
fn estimator_and_config_errors() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.csv", "1\n2\n3\n");
    assert_eq!(code(&run(tmp.path(), &["estimate", "a.csv", "a.csv"])), 3);
    assert_eq!(code(&run(tmp.path(), &["estimate", "a.csv", "a.csv", "--m", "0"])), 4);
    assert_eq!(code(&run(tmp.path(), &["oracle"])), 4);
    write(tmp.path(), "bad.toml", "[oracle]\nslices = 10\ncolour = 1\n");
    assert_eq!(code(&run(tmp.path(), &["oracle", "--config", "bad.toml"])), 4);
    write(tmp.path(), "bad.toml", "[oracle]\nscenario = { kind = \"low_rank\", d = 3 }\n");
    assert_eq!(code(&run(tmp.path(), &["oracle", "--config", "bad.toml"])), 4);
}

#[test]
fn bits_are_nats_over_ln_two() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["gen", "--scenario", "one_feature_linear", "--d", "1", "--n", "300", "--output", "data"]);
    ok(tmp.path(), &["estimate", "data/x.csv", "data/y.csv", "--m", "5", "--output", "nats"]);
    ok(tmp.path(), &["estimate", "data/x.csv", "data/y.csv", "--m", "5", "--unit", "bits", "--output", "bits"]);
    let nats = result(&read(tmp.path().join("nats/estimate.toml")), "value");
    let bits = result(&read(tmp.path().join("bits/estimate.toml")), "value");
    assert_eq!(bits, nats / std::f64::consts::LN_2);
}

fn oracle_value(tmp: &Path, body: &str) -> (f64, f64) {
    write(tmp, "o.toml", body);
    ok(tmp, &["oracle", "--config", "o.toml"]);
    let report = read(tmp.join("oracle.toml"));
    (result(&report, "value"), result(&report, "std_error"))
}

#[test]
fn oracle_examples() {
    let tmp = TempDir::new().unwrap();
    let zero = "[oracle]\nslices = 100\n[oracle.spec]\nmean_x = [0, 0]\nmean_y = [0]\n\
                sigma_x = [[1, 0], [0, 1]]\nsigma_y = [[1]]\nsigma_xy = [[0], [0]]\n";
    assert_eq!(oracle_value(tmp.path(), zero).0, 0.0);
    let scalar = "[oracle]\nslices = 10\n[oracle.spec]\nmean_x = [0]\nmean_y = [0]\n\
                  sigma_x = [[1]]\nsigma_y = [[1]]\nsigma_xy = [[0.5]]\n";
    assert!((oracle_value(tmp.path(), scalar).0 - 0.143_841_036_225_890_45).abs() < 1e-12);
    // pinned high-precision value for the d = 3 overlap, see the core crate's fixtures
    let overlap = "[oracle]\nslices = 50000\nseed = 3\n\
                   scenario = { kind = \"overlap\", d_total = 4, x_range = [1, 3], y_range = [2, 4] }\n";
    let (v, se) = oracle_value(tmp.path(), overlap);
    let (pinned, pinned_se) = (0.167_995_741_808_162_04, 0.000_249_838_565_760_546_5);
    assert!((v - pinned).abs() <= 3.0 * (se * se + pinned_se * pinned_se).sqrt(), "{v} ± {se}");
}

#[test]
fn indep_scalar_columns_agree() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "plan.toml",
        "[indep]\nscenario = \"independent\"\ndims = [1]\nsample_sizes = [60, 120]\ntrials_per_cell = 6\nm = 8\n",
    );
    ok(tmp.path(), &["indep", "--config", "plan.toml", "--seed", "3"]);
    let text = read(tmp.path().join("indep.csv"));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["scenario", "d", "n", "estimator", "auc", "trials", "m", "k", "seed"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for pair in rows.chunks(2) {
        assert_eq!((&pair[0][3], &pair[1][3]), ("SMI", "MI"));
        assert_eq!(pair[0][4], pair[1][4]);
        assert_eq!(&pair[0][8], "3");
    }
}

#[test]
fn reruns_are_byte_identical_and_configs_reparse() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--scenario", "c", "--d", "4", "--n", "400", "--seed", "9", "--output", "d1"]);
    ok(dir, &["gen", "--scenario", "c", "--d", "4", "--n", "400", "--seed", "9", "--output", "d2"]);
    assert_eq!(read(dir.join("d1/x.csv")), read(dir.join("d2/x.csv")));
    assert_eq!(read(dir.join("d1/y.csv")), read(dir.join("d2/y.csv")));

    // the config embedded in the data files regenerates them exactly
    write(dir, "gen.toml", &comment_config(&read(dir.join("d1/x.csv"))));
    ok(dir, &["gen", "--config", "gen.toml", "--output", "d3"]);
    assert_eq!(read(dir.join("d1/y.csv")), read(dir.join("d3/y.csv")));

    let args = ["estimate", "d1/x.csv", "d1/y.csv", "--m", "40", "--seed", "2"];
    ok(dir, &[&args[..], &["--output", "e1"]].concat());
    ok(dir, &[&args[..], &["--output", "e2", "--threads", "1"]].concat());
    let first = read(dir.join("e1/estimate.toml"));
    assert_eq!(first, read(dir.join("e2/estimate.toml")));
    write(dir, "est.toml", &config_of(&first));
    ok(dir, &["estimate", "--config", "est.toml", "--output", "e3"]);
    assert_eq!(first, read(dir.join("e3/estimate.toml")));
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("from_env");
    let args = ["gen", "--scenario", "a", "--d", "2", "--n", "20"];
    let out = bin().current_dir(tmp.path()).env("SLICEDMI_OUTPUT_DIR", &env_dir).args(args).output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(env_dir.join("x.csv").exists());
    // the flag wins over the environment
    let out = bin()
        .current_dir(tmp.path())
        .env("SLICEDMI_OUTPUT_DIR", &env_dir)
        .args([&args[..], &["--output", "flag"]].concat())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(tmp.path().join("flag/x.csv").exists());
}

#[test]
fn rates_writes_table_and_slopes() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "rates.toml",
        "[rates]\nn_values = [100, 200, 400]\nm_values = [2, 4, 8]\ntrials = 3\nfixed_n = 300\nsweeps = [\"joint\", \"m\"]\n\
         truth_slices = 2000\nsource = { type = \"gaussian\", spec = { mean_x = [0], mean_y = [0], sigma_x = [[1]], \
         sigma_y = [[1]], sigma_xy = [[0.5]] } }\n",
    );
    ok(tmp.path(), &["rates", "--config", "rates.toml"]);
    let text = read(tmp.path().join("rates.csv"));
    let rows = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes()).records().count();
    assert_eq!(rows, 6);
    let report: toml::Table = read(tmp.path().join("rates.toml")).parse().unwrap();
    assert!(report["result"]["slope_joint"]["slope"].as_float().unwrap().is_finite());
    assert!(report["result"].get("slope_n").is_none());
}

#[test]
fn smine_and_extract_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--scenario", "feature_needle", "--d", "10", "--n", "3000", "--seed", "1", "--output", "data"]);
    ok(dir, &["smine", "data/x.csv", "data/y.csv", "--epochs", "3", "--output", "s"]);
    let report = read(dir.join("s/smine.toml"));
    assert!(result(&report, "estimate").is_finite());
    let curve = read(dir.join("s/curve.csv"));
    assert_eq!(curve.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert!(read(dir.join("s/model.txt")).contains("weights_1 100 13"));

    write(
        dir,
        "extract.toml",
        "[extract]\nx = \"data/x.csv\"\ny = \"data/y.csv\"\nr_x = 10\n\
         train = { epochs = 150, learning_rate = 5e-3, schedule = \"linear\", folds = 1, seed = 2 }\n",
    );
    ok(dir, &["extract", "--config", "extract.toml", "--output", "f"]);
    let text = read(dir.join("f/a_x.csv"));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().len(), 13);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert_eq!(&r[1], "1", "row {} points at coordinate {}", &r[0], &r[1]);
    }
    assert!(!dir.join("f/a_y.csv").exists());
    let maps = read(dir.join("f/maps.txt"));
    assert!(maps.contains("a_x 10 10") && maps.contains("a_y 0 1"));
    assert!(comment_config(&maps).contains("[extract]"));
}
