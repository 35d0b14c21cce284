//! Report bundles: CSV tables, summary JSON and SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rentsim::engine::{
    AgentSummary, CorrelationMatrix, RoundRecord, RunResult, ScenarioConfig, Snapshot,
};
use rentsim::sweeps::{Heatmap, SweepResult};

use crate::format::fmt_csv;
use crate::svg;
use crate::CliError;

pub const SERIES_HEADER: [&str; 9] = [
    "t",
    "r_bar",
    "s",
    "loss",
    "mean_utility",
    "diversity",
    "theta_bar",
    "collateral",
    "detected_count",
];

/// Written to `summary.json`; reading the file back gives an equal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub rounds: usize,
    pub final_round: Option<RoundRecord>,
    pub convergence_step: Option<usize>,
    pub false_injury_rate: f64,
    pub cumulative_discounted_loss: f64,
    pub correlation: CorrelationMatrix,
    pub agents: Vec<AgentSummary>,
}

impl RunSummary {
    pub fn new(cfg: &ScenarioConfig, res: &RunResult) -> Self {
        RunSummary {
            config: cfg.clone(),
            rounds: res.series.len(),
            final_round: res.series.last().copied(),
            convergence_step: res.convergence_step,
            false_injury_rate: res.false_injury_rate,
            cumulative_discounted_loss: res.cumulative_discounted_loss(cfg.discount.beta_disc),
            correlation: res.correlation.clone(),
            agents: res.agents.clone(),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(fmt_csv).unwrap_or_else(|| "NA".into())
}

pub fn series_rows(series: &[RoundRecord]) -> Vec<Vec<String>> {
    series
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                fmt_csv(r.r_bar),
                fmt_csv(r.s),
                fmt_csv(r.loss),
                fmt_csv(r.mean_utility),
                fmt_csv(r.diversity),
                fmt_csv(r.theta_bar),
                fmt_csv(r.collateral),
                r.detected_count.to_string(),
            ]
        })
        .collect()
}

fn snapshot_rows(rows: &mut Vec<Vec<String>>, variable: &str, snaps: &[Snapshot]) {
    for snap in snaps {
        for (k, count) in snap.histogram.counts.iter().enumerate() {
            let (lo, hi) = snap.histogram.bin_edges(k);
            rows.push(vec![
                snap.round.to_string(),
                variable.into(),
                k.to_string(),
                fmt_csv(lo),
                fmt_csv(hi),
                count.to_string(),
            ]);
        }
    }
}

fn correlation_rows(m: &CorrelationMatrix) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["variable".to_string()];
    header.extend(m.labels.iter().cloned());
    let rows = m
        .labels
        .iter()
        .zip(&m.values)
        .map(|(label, row)| {
            let mut out = vec![label.clone()];
            out.extend(row.iter().map(|v| opt_csv(*v)));
            out
        })
        .collect();
    (header, rows)
}

/// Writes the full bundle for one run into `dir`.
pub fn write_run_bundle(
    dir: &Path,
    cfg: &ScenarioConfig,
    res: &RunResult,
) -> Result<RunSummary, CliError> {
    let plots = dir.join("plots");
    create_dir(&plots)?;

    write_csv(
        &dir.join("series.csv"),
        &strings(&SERIES_HEADER),
        &series_rows(&res.series),
    )?;

    let mut snaps = Vec::new();
    snapshot_rows(&mut snaps, "rep", &res.rep_snapshots);
    snapshot_rows(&mut snaps, "r", &res.r_snapshots);
    write_csv(
        &dir.join("snapshots.csv"),
        &strings(&["round", "variable", "bin", "lo", "hi", "count"]),
        &snaps,
    )?;

    let (header, rows) = correlation_rows(&res.correlation);
    write_csv(&dir.join("correlation.csv"), &header, &rows)?;

    let summary = RunSummary::new(cfg, res);
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Runtime(format!("cannot encode summary: {e}")))?;
    write_file(&dir.join("summary.json"), &json)?;

    for (name, body) in run_plots(res) {
        write_file(&plots.join(name), &body)?;
    }
    Ok(summary)
}

/// File name and SVG body of every plot for one run.
pub fn run_plots(res: &RunResult) -> Vec<(String, String)> {
    let t = res.column(|r| r.t as f64);
    let r_bar = res.column(|r| r.r_bar);
    let s = res.column(|r| r.s);
    let loss = res.column(|r| r.loss);
    let utility = res.column(|r| r.mean_utility);
    let diversity = res.column(|r| r.diversity);

    let mut out = vec![
        (
            "r_utility.svg".to_string(),
            svg::dual_axis_chart(
                "R & Utility Over Time",
                "round",
                &t,
                ("mean R", &r_bar),
                ("mean utility", &utility),
            ),
        ),
        (
            "s_loss.svg".to_string(),
            svg::dual_axis_chart(
                "S & Loss Over Time",
                "round",
                &t,
                ("S", &s),
                ("social loss", &loss),
            ),
        ),
        (
            "diversity.svg".to_string(),
            svg::line_chart(
                "Strategy Diversity Over Time",
                "round",
                "std of R",
                &t,
                &[("diversity", &diversity)],
            ),
        ),
        (
            "phase_space.svg".to_string(),
            svg::phase_scatter(
                "Phase Space, S vs R",
                "S",
                "mean R",
                &s,
                &r_bar,
                &utility,
                "utility",
            ),
        ),
    ];
    for snap in &res.rep_snapshots {
        out.push((
            format!("hist_rep_t{}.svg", snap.round),
            svg::histogram_chart(
                &format!("Reputation at round {}", snap.round),
                "reputation",
                &snap.histogram,
            ),
        ));
    }
    for snap in &res.r_snapshots {
        out.push((
            format!("hist_r_t{}.svg", snap.round),
            svg::histogram_chart(
                &format!("Injection at round {}", snap.round),
                "R",
                &snap.histogram,
            ),
        ));
    }
    out
}

/// `sweep_runs.csv` (one row per cell and seed), `sweep_cells.csv` (one row
/// per cell) and the full result as `sweep.json`.
pub fn write_sweep_bundle(dir: &Path, res: &SweepResult) -> Result<(), CliError> {
    create_dir(dir)?;
    let axis_cols = res.axis_paths.clone();

    let mut header = axis_cols.clone();
    header.extend(strings(&[
        "seed",
        "r_final",
        "s_final",
        "loss_final",
        "cum_disc_loss",
        "false_injury_rate",
        "convergence_step",
    ]));
    let mut rows = Vec::new();
    for cell in &res.cells {
        for run in &cell.runs {
            let mut row: Vec<String> = cell.values.iter().map(|v| fmt_csv(*v)).collect();
            row.extend([
                run.seed.to_string(),
                fmt_csv(run.r_final),
                fmt_csv(run.s_final),
                fmt_csv(run.loss_final),
                fmt_csv(run.cum_disc_loss),
                fmt_csv(run.false_injury_rate),
                run.convergence_step
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "NA".into()),
            ]);
            rows.push(row);
        }
    }
    write_csv(&dir.join("sweep_runs.csv"), &header, &rows)?;

    let mut header = axis_cols;
    header.push("seeds".into());
    for m in [
        "r_final",
        "s_final",
        "loss_final",
        "cum_disc_loss",
        "false_injury_rate",
        "convergence_step",
    ] {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    header.push("converged_seeds".into());
    let rows: Vec<Vec<String>> = res
        .cells
        .iter()
        .map(|cell| {
            let st = &cell.stats;
            let mut row: Vec<String> = cell.values.iter().map(|v| fmt_csv(*v)).collect();
            row.push(cell.runs.len().to_string());
            for ms in [
                st.r_final,
                st.s_final,
                st.loss_final,
                st.cum_disc_loss,
                st.false_injury_rate,
            ] {
                row.push(fmt_csv(ms.mean));
                row.push(fmt_csv(ms.std));
            }
            row.push(opt_csv(st.convergence_step.map(|c| c.mean)));
            row.push(opt_csv(st.convergence_step.map(|c| c.std)));
            row.push(st.converged_seeds.to_string());
            row
        })
        .collect();
    write_csv(&dir.join("sweep_cells.csv"), &header, &rows)?;

    let json = serde_json::to_string_pretty(res)
        .map_err(|e| CliError::Runtime(format!("cannot encode sweep: {e}")))?;
    write_file(&dir.join("sweep.json"), &json)
}

fn matrix_rows(rows: &[f64], cols: &[f64], values: &[Vec<f64>]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["phi\\psi".to_string()];
    header.extend(cols.iter().map(|c| fmt_csv(*c)));
    let body = rows
        .iter()
        .zip(values)
        .map(|(r, row)| {
            let mut out = vec![fmt_csv(*r)];
            out.extend(row.iter().map(|v| fmt_csv(*v)));
            out
        })
        .collect();
    (header, body)
}

/// Paths of the files written for a sensitivity heatmap.
pub fn write_heatmap_bundle(dir: &Path, map: &Heatmap) -> Result<Vec<PathBuf>, CliError> {
    let plots = dir.join("plots");
    create_dir(&plots)?;
    let mut written = Vec::new();
    for (stem, title, values) in [
        ("heatmap_r_final", "2D Sensitivity Heatmap: R", &map.r_final),
        (
            "heatmap_loss_final",
            "2D Sensitivity Heatmap: Loss",
            &map.loss_final,
        ),
    ] {
        let (header, rows) = matrix_rows(&map.phi_values, &map.psi_values, values);
        let csv_path = dir.join(format!("{stem}.csv"));
        write_csv(&csv_path, &header, &rows)?;
        let svg_path = plots.join(format!("{stem}.svg"));
        write_file(
            &svg_path,
            &svg::heatmap_chart(
                title,
                "phi",
                "psi",
                &map.phi_values,
                &map.psi_values,
                values,
            ),
        )?;
        written.push(csv_path);
        written.push(svg_path);
    }
    Ok(written)
}
