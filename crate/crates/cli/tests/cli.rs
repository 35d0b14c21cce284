use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rentsim::engine::ScenarioConfig;
use rentsim_cli::report::RunSummary;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rentsim"))
}

fn rentsim(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn rentsim")
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{
  "n_agents": 12,
  "discount": {"horizon_t": 40},
  "snapshot_rounds": [0, 20, 39],
  "agent_policy_mix": {"myopic": 0.5, "local_search": 0.25, "q_learning": 0.25},
  "master_seed": 5
}"#,
    )
    .unwrap();
    path
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn str_path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_bundle_with_one_row_per_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let res = rentsim(&["run", "--config", str_path(&cfg), "--out", str_path(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));

    let (header, rows) = csv_rows(&out.join("series.csv"));
    assert_eq!(
        header,
        [
            "t",
            "r_bar",
            "s",
            "loss",
            "mean_utility",
            "diversity",
            "theta_bar",
            "collateral",
            "detected_count"
        ]
    );
    assert_eq!(rows.len(), 40);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        for field in &row[1..8] {
            let digits = field
                .split(['e', 'E'])
                .next()
                .unwrap()
                .chars()
                .filter(char::is_ascii_digit)
                .collect::<String>();
            assert!(digits.trim_start_matches('0').len() <= 9, "{field}");
            field.parse::<f64>().unwrap();
        }
    }

    let (header, rows) = csv_rows(&out.join("snapshots.csv"));
    assert_eq!(header, ["round", "variable", "bin", "lo", "hi", "count"]);
    assert_eq!(rows.len(), 3 * 2 * 10);
    let (header, rows) = csv_rows(&out.join("correlation.csv"));
    assert_eq!(header, ["variable", "r_bar", "s", "loss", "mean_utility"]);
    assert_eq!(rows.len(), 4);
    assert!(out.join("summary.json").is_file());
}

#[test]
fn invalid_field_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = rentsim(&["run", "--set", "s0=1.5", "--out", str_path(tmp.path())]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr(&res);
    assert!(err.contains("s0"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let res = rentsim(&[
        "run",
        "--set",
        "policy.nope=1",
        "--out",
        str_path(tmp.path()),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("policy.nope"));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"n_agent": 3}"#).unwrap();
    let res = rentsim(&[
        "run",
        "--config",
        str_path(&bad),
        "--out",
        str_path(tmp.path()),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("n_agent"));

    let res = rentsim(&["run", "--preset", "nonexistent"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let res = rentsim(&[
        "run",
        "--set",
        "n_agents=3",
        "--set",
        "discount.horizon_t=5",
        "--set",
        "snapshot_rounds=[0]",
        "--out",
        str_path(&out),
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", stderr(&res));
}

#[test]
fn reruns_are_byte_identical_regardless_of_cwd() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let mut outputs = Vec::new();
    for (k, cwd) in [tmp.path(), Path::new("/")].iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let res = bin()
            .current_dir(cwd)
            .env("RENTSIM_UNRELATED", "1")
            .args(["run", "--config", str_path(&cfg), "--out", str_path(&out)])
            .output()
            .unwrap();
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        outputs.push(out);
    }
    for name in [
        "series.csv",
        "snapshots.csv",
        "correlation.csv",
        "summary.json",
        "plots/phase_space.svg",
    ] {
        assert_eq!(
            fs::read(outputs[0].join(name)).unwrap(),
            fs::read(outputs[1].join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn summary_json_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = small_config(tmp.path());
    let out = tmp.path().join("out");
    let res = rentsim(&[
        "run",
        "--config",
        str_path(&cfg_path),
        "--out",
        str_path(&out),
    ]);
    assert_eq!(res.status.code(), Some(0));

    let text = fs::read_to_string(out.join("summary.json")).unwrap();
    let parsed: RunSummary = serde_json::from_str(&text).unwrap();
    let cfg: ScenarioConfig =
        serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let expected = RunSummary::new(&cfg, &rentsim::run(&cfg).unwrap());
    assert_eq!(parsed, expected);
}

fn svg_root(path: &Path) -> (String, usize, usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let doc =
        roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    let count = |tag: &str, class: &str| {
        root.descendants()
            .filter(|n| n.tag_name().name() == tag && n.attribute("class") == Some(class))
            .count()
    };
    (
        text.clone(),
        count("path", "series"),
        count("rect", "bar"),
        count("rect", "cell"),
    )
}

#[test]
fn every_plot_is_well_formed_and_draws_each_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    assert_eq!(
        rentsim(&["run", "--config", str_path(&cfg), "--out", str_path(&out)])
            .status
            .code(),
        Some(0)
    );
    let plots = out.join("plots");
    let (text, paths, _, _) = svg_root(&plots.join("r_utility.svg"));
    assert!(text.contains("R &amp; Utility Over Time"));
    assert_eq!(paths, 2);
    let (text, paths, _, _) = svg_root(&plots.join("s_loss.svg"));
    assert!(text.contains("S &amp; Loss Over Time"));
    assert_eq!(paths, 2);
    assert_eq!(svg_root(&plots.join("diversity.svg")).1, 1);
    let (text, paths, _, _) = svg_root(&plots.join("phase_space.svg"));
    assert!(text.contains("Phase Space, S vs R"));
    assert!(paths >= 1);
    assert_eq!(text.matches("class=\"point\"").count(), 40);
    for round in [0, 20, 39] {
        for var in ["rep", "r"] {
            let (_, _, bars, _) = svg_root(&plots.join(format!("hist_{var}_t{round}.svg")));
            assert_eq!(bars, 10);
        }
    }
    let count = fs::read_dir(&plots).unwrap().count();
    assert_eq!(count, 4 + 6);
}

#[test]
fn multiple_seeds_write_one_bundle_each() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let res = rentsim(&[
        "run",
        "--config",
        str_path(&cfg),
        "--seeds",
        "2..5",
        "--out",
        str_path(&out),
    ]);
    assert_eq!(res.status.code(), Some(0));
    for seed in 2..5 {
        let (_, rows) = csv_rows(&out.join(format!("seed_{seed}/series.csv")));
        assert_eq!(rows.len(), 40);
    }
    assert_ne!(
        fs::read(out.join("seed_2/series.csv")).unwrap(),
        fs::read(out.join("seed_3/series.csv")).unwrap()
    );
}

fn sweep_doc(dir: &Path, axes: &str) -> PathBuf {
    let path = dir.join("sweep.json");
    fs::write(
        &path,
        format!(
            r#"{{"base": {{"n_agents": 8, "discount": {{"horizon_t": 25}}, "snapshot_rounds": [0]}},
                "axes": {axes}, "seeds": [0, 1], "reduce_round": 20}}"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn sweep_writes_raw_and_aggregate_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = sweep_doc(
        tmp.path(),
        r#"[{"path": "policy.tau", "values": [0, 0.1, 0.3]}, {"path": "policy.rho", "values": [0.01, 0.1]}]"#,
    );
    let out = tmp.path().join("out");
    let res = rentsim(&[
        "sweep",
        "--config",
        str_path(&spec),
        "--out",
        str_path(&out),
        "--threads",
        "2",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let (header, raw) = csv_rows(&out.join("sweep_runs.csv"));
    assert_eq!(&header[..3], ["policy.tau", "policy.rho", "seed"]);
    assert_eq!(raw.len(), 12);
    let (_, cells) = csv_rows(&out.join("sweep_cells.csv"));
    assert_eq!(cells.len(), 6);
    assert_eq!(cells[1][..2], ["0".to_string(), "0.1".to_string()]);
}

#[test]
fn sweep_without_axes_runs_base_once() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = sweep_doc(tmp.path(), "[]");
    let out = tmp.path().join("out");
    let res = rentsim(&[
        "sweep",
        "--config",
        str_path(&spec),
        "--seeds",
        "4",
        "--out",
        str_path(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let (_, raw) = csv_rows(&out.join("sweep_runs.csv"));
    assert_eq!(raw.len(), 1);
    assert_eq!(raw[0][0], "4");
}

#[test]
fn sweep_with_unknown_axis_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = sweep_doc(tmp.path(), r#"[{"path": "policy.tao", "values": [0.1]}]"#);
    let res = rentsim(&[
        "sweep",
        "--config",
        str_path(&spec),
        "--out",
        str_path(tmp.path()),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("policy.tao"));
}

#[test]
fn sensitivity_writes_matrices_and_heatmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = rentsim(&[
        "sensitivity",
        "--preset",
        "strong_regulation",
        "--set",
        "n_agents=20",
        "--out",
        str_path(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    for stem in ["heatmap_r_final", "heatmap_loss_final"] {
        let (header, rows) = csv_rows(&out.join(format!("{stem}.csv")));
        assert_eq!(header.len(), 5);
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.len() == 5));
        let (_, _, _, cells) = svg_root(&out.join(format!("plots/{stem}.svg")));
        assert_eq!(cells, 16);
    }
    let (_, rows) = csv_rows(&out.join("heatmap_r_final.csv"));
    let first = &rows[0][1];
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| v == first)));
}

#[test]
fn single_cell_heatmap_renders() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = rentsim(&[
        "sensitivity",
        "--phi",
        "1",
        "--psi",
        "2",
        "--set",
        "n_agents=5",
        "--out",
        str_path(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let (_, _, _, cells) = svg_root(&out.join("plots/heatmap_loss_final.svg"));
    assert_eq!(cells, 1);
}

fn equilibrium_json(args: &[&str]) -> serde_json::Value {
    let mut full = vec!["equilibrium"];
    full.extend_from_slice(args);
    let res = rentsim(&full);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    serde_json::from_slice(&res.stdout).unwrap()
}

#[test]
fn equilibrium_reports_steady_state() {
    let v = equilibrium_json(&["--set", "model.gamma=0.05", "--set", "model.delta=0.1"]);
    assert_eq!(v["r_star"], 0.5);

    let v = equilibrium_json(&[
        "--set",
        "model.gamma=0.02",
        "--set",
        "model.beta2=0",
        "--set",
        "policy.tau=0",
        "--set",
        "policy.theta0=0",
        "--set",
        "policy.alpha=0",
        "--set",
        "policy.kappa=0",
    ]);
    assert_eq!(v["kind"], "interior");
    assert!((v["s_star"].as_f64().unwrap() - 0.6).abs() < 1e-6);
    assert_eq!(v["stability"]["classification"], "unstable");
    assert!((v["dr_dtau"]["derivative"].as_f64().unwrap() + 0.5).abs() < 1e-6);

    let v = equilibrium_json(&["--preset", "strong_regulation"]);
    assert_eq!(v["kind"], "boundary_high");
    assert!(v["s_star"].is_null());
    assert!(v["stability"].is_null());
}

#[test]
fn equilibrium_rejects_zero_delta() {
    let res = rentsim(&["equilibrium", "--set", "model.delta=0"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("model.delta"));
}

#[test]
fn usage_errors_exit_two_and_help_exits_zero() {
    assert_eq!(rentsim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rentsim(&["run", "--set", "novalue"]).status.code(), Some(2));
    assert_eq!(rentsim(&["run", "--threads", "0"]).status.code(), Some(2));
    let help = rentsim(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("sensitivity"));
    let presets = rentsim(&["presets"]);
    assert!(String::from_utf8_lossy(&presets.stdout).contains("strong_regulation"));
}
