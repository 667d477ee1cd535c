use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(out: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_motifpersist"));
    c.env("MOTIFPERSIST_OUT", out).env_remove("RUST_LOG");
    c
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn small_scenario(dir: &Path) -> PathBuf {
    let spec = dir.join("small.toml");
    std::fs::write(
        &spec,
        "n_assets = 8\nn_days = 200\nseed = 5\n\
         [[blocks]]\nmembers = [0, 1, 2, 3]\ncorrelation = 0.8\n",
    )
    .unwrap();
    spec
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no_such_prices.csv");
    let o = bin(tmp.path())
        .args(["analyze", "--input"])
        .arg(&missing)
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("no_such_prices.csv"), "{err}");
    assert!(err.starts_with("error: ingest:"), "{err}");
}

#[test]
fn short_window_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path())
        .args([
            "analyze",
            "--input",
            "prices.csv",
            "--window",
            "50",
            "--assets",
            "100",
        ])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(
        err.contains("config:") && err.contains("N < window"),
        "{err}"
    );
}

#[test]
fn invalid_spec_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(
        &bad,
        "n_assets = 4\nn_days = 100\nseed = 1\n[[blocks]]\nmembers = [0, 9]\ncorrelation = 0.5\n",
    )
    .unwrap();
    let o = bin(tmp.path()).arg("synth").arg(&bad).output().unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("synth:"), "{}", stderr(&o));

    std::fs::write(&bad, "n_assets = 4\nn_days = 100\nseed = 1\ncolour = 3\n").unwrap();
    let o = bin(tmp.path()).arg("synth").arg(&bad).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn shipped_scenarios_generate() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["planted_block", "null", "regime_switch"] {
        let out = tmp.path().join(format!("{name}.csv"));
        let o = bin(tmp.path())
            .arg("synth")
            .arg(scenarios().join(format!("{name}.toml")))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let text = std::fs::read_to_string(&out).unwrap();
        // long format: the initial prices plus one row per return day, per asset
        assert_eq!(text.lines().count(), 1 + 1301 * 100, "{name}");
        assert!(text.starts_with("date,asset,close\n"));
    }
}

#[test]
fn synth_analyze_portfolio_report() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_scenario(tmp.path());
    let o = bin(tmp.path())
        .args(["synth", "--run-name", "data"])
        .arg(&spec)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let prices = tmp.path().join("data/prices.csv");
    assert!(prices.exists());

    let common = [
        "--window",
        "20",
        "--theta",
        "8",
        "--starts",
        "5",
        "--max-shift",
        "30",
        "--tau-plat",
        "10",
        "--top-k",
        "3",
        "--n-random",
        "50",
        "--n-selections",
        "20",
        "--selection-size",
        "4",
        "--seed",
        "11",
        "--min-eval-days",
        "20",
    ];
    let o = bin(tmp.path())
        .args(["analyze", "--run-name", "a", "--threads", "2", "--input"])
        .arg(&prices)
        .args(common)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let a = tmp.path().join("a");
    for f in [
        "curves.csv",
        "fits.json",
        "node_persistence.csv",
        "overlap.csv",
        "analysis.json",
        "manifest.json",
    ] {
        assert!(a.join(f).exists(), "{f}");
    }

    let o = bin(tmp.path())
        .args(["portfolio", "--run-name", "p", "--analysis"])
        .arg(&a)
        .arg("--input")
        .arg(&prices)
        .args(common)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(tmp.path().join("p/vol_vs_persist.json")).unwrap();
    assert!(summary.contains("fraction_persist_wins"));
    assert!(summary.contains("\"seed\": 11"));

    let o = bin(tmp.path())
        .arg("report")
        .arg(tmp.path().join("p"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed 11"));
}

#[test]
fn report_without_manifest_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path())
        .arg("report")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("manifest.json"));
}
