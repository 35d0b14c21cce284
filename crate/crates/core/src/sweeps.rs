//! Experiment harness: named scenario groups, full-factorial sweeps with
//! seed replication, and the loss-weight sensitivity heatmap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::PolicyKind;
use crate::engine::{self, PolicyMix, RunResult, ScenarioConfig};
use crate::error::{Error, Result};
use crate::stats::{self, MeanStd};

pub const DEFAULT_REDUCE_ROUND: usize = 20;
pub const DEFAULT_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted parameter path, as accepted by [`ScenarioConfig::set_param`].
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub axes: Vec<Axis>,
    pub seeds: Vec<u64>,
    /// Round at which the "final" metrics are read.
    pub reduce_round: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: ScenarioConfig::default(),
            axes: Vec::new(),
            seeds: DEFAULT_SEEDS.to_vec(),
            reduce_round: DEFAULT_REDUCE_ROUND,
        }
    }
}

impl SweepSpec {
    /// Every axis-value tuple, first axis varying slowest.
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![Vec::new()];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(*v);
                        c
                    })
                })
                .collect();
        }
        cells
    }

    /// Base config with one cell's values applied and validated.
    pub fn cell_config(&self, values: &[f64]) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        for (axis, v) in self.axes.iter().zip(values) {
            cfg.set_param(&axis.path, *v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed is required"));
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::invalid(axis.path.clone(), "axis has no values"));
            }
            let mut probe = self.base.clone();
            for v in &axis.values {
                probe.set_param(&axis.path, *v)?;
                probe.validate()?;
            }
        }
        if self.reduce_round >= self.base.discount.horizon_t {
            return Err(Error::invalid(
                "reduce_round",
                format!(
                    "round {} is beyond horizon {}",
                    self.reduce_round, self.base.discount.horizon_t
                ),
            ));
        }
        Ok(())
    }
}

/// Metrics of one run read at the reduce round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub r_final: f64,
    pub s_final: f64,
    pub loss_final: f64,
    pub cum_disc_loss: f64,
    pub false_injury_rate: f64,
    pub convergence_step: Option<usize>,
}

impl SeedMetrics {
    pub fn reduce(seed: u64, res: &RunResult, reduce_round: usize, beta: f64) -> Result<Self> {
        let rec = res.series.get(reduce_round).ok_or(Error::IndexOutOfRange {
            what: "reduce_round",
            index: reduce_round,
            len: res.series.len(),
        })?;
        Ok(SeedMetrics {
            seed,
            r_final: rec.r_bar,
            s_final: rec.s,
            loss_final: rec.loss,
            cum_disc_loss: res.cumulative_discounted_loss(beta),
            false_injury_rate: res.false_injury_rate,
            convergence_step: res.convergence_step,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub r_final: MeanStd,
    pub s_final: MeanStd,
    pub loss_final: MeanStd,
    pub cum_disc_loss: MeanStd,
    pub false_injury_rate: MeanStd,
    /// Over the seeds that converged; `None` if none did.
    pub convergence_step: Option<MeanStd>,
    pub converged_seeds: usize,
}

impl CellStats {
    pub fn of(runs: &[SeedMetrics]) -> Result<Self> {
        let col = |f: fn(&SeedMetrics) -> f64| -> Result<MeanStd> {
            MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>())
        };
        let steps: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.convergence_step.map(|s| s as f64))
            .collect();
        Ok(CellStats {
            r_final: col(|r| r.r_final)?,
            s_final: col(|r| r.s_final)?,
            loss_final: col(|r| r.loss_final)?,
            cum_disc_loss: col(|r| r.cum_disc_loss)?,
            false_injury_rate: col(|r| r.false_injury_rate)?,
            convergence_step: if steps.is_empty() {
                None
            } else {
                Some(MeanStd::of(&steps)?)
            },
            converged_seeds: steps.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub values: Vec<f64>,
    pub runs: Vec<SeedMetrics>,
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_paths: Vec<String>,
    pub cells: Vec<Cell>,
}

impl SweepResult {
    pub fn cell(&self, values: &[f64]) -> Option<&Cell> {
        self.cells.iter().find(|c| c.values == values)
    }
}

/// Runs every cell for every seed and aggregates per cell.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let labelled = |values: &[f64]| -> Vec<(String, f64)> {
        spec.axes
            .iter()
            .zip(values)
            .map(|(a, v)| (a.path.clone(), *v))
            .collect()
    };

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| spec.seeds.iter().map(move |s| (c, *s)))
        .collect();
    let metrics: Vec<SeedMetrics> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let wrap = |e: Error| Error::SweepCell {
                cell: labelled(&cells[c]),
                seed,
                source: Box::new(e),
            };
            let mut cfg = spec.cell_config(&cells[c]).map_err(wrap)?;
            cfg.master_seed = seed;
            let res = engine::run(&cfg).map_err(wrap)?;
            SeedMetrics::reduce(seed, &res, spec.reduce_round, cfg.discount.beta_disc).map_err(wrap)
        })
        .collect::<Result<_>>()?;

    let per_cell = spec.seeds.len();
    let cells = cells
        .into_iter()
        .zip(metrics.chunks(per_cell))
        .map(|(values, runs)| {
            Ok(Cell {
                values,
                runs: runs.to_vec(),
                stats: CellStats::of(runs)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axis_paths: spec.axes.iter().map(|a| a.path.clone()).collect(),
        cells,
    })
}

/// Seed-averaged final metrics over a `phi x psi` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub phi_values: Vec<f64>,
    pub psi_values: Vec<f64>,
    /// `r_final[i][j]` is the cell `(phi_values[i], psi_values[j])`.
    pub r_final: Vec<Vec<f64>>,
    pub loss_final: Vec<Vec<f64>>,
}

pub fn sensitivity_heatmap(
    base: &ScenarioConfig,
    phi_values: &[f64],
    psi_values: &[f64],
    seeds: &[u64],
    reduce_round: usize,
) -> Result<Heatmap> {
    if phi_values.is_empty() {
        return Err(Error::invalid("phi_values", "must not be empty"));
    }
    if psi_values.is_empty() {
        return Err(Error::invalid("psi_values", "must not be empty"));
    }
    let spec = SweepSpec {
        base: base.clone(),
        axes: vec![
            Axis {
                path: "model.phi".into(),
                values: phi_values.to_vec(),
            },
            Axis {
                path: "model.psi".into(),
                values: psi_values.to_vec(),
            },
        ],
        seeds: seeds.to_vec(),
        reduce_round,
    };
    let res = run_sweep(&spec)?;
    let width = psi_values.len();
    let matrix = |f: fn(&CellStats) -> f64| -> Vec<Vec<f64>> {
        res.cells
            .chunks(width)
            .map(|row| row.iter().map(|c| f(&c.stats)).collect())
            .collect()
    };
    Ok(Heatmap {
        phi_values: phi_values.to_vec(),
        psi_values: psi_values.to_vec(),
        r_final: matrix(|s| s.r_final.mean),
        loss_final: matrix(|s| s.loss_final.mean),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub config: ScenarioConfig,
}

pub const COLLATERAL_RHOS: [f64; 3] = [0.01, 0.05, 0.1];

fn preset(name: &str, description: &str, config: ScenarioConfig) -> Preset {
    Preset {
        name: name.into(),
        description: description.into(),
        config,
    }
}

pub fn weak_regulation() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.policy.tau = 0.0;
    cfg.policy.theta0 = 0.2;
    cfg.policy.kappa = 2.0;
    cfg.policy.delta_rep = 0.1;
    cfg.policy.rho = 0.01;
    cfg
}

pub fn strong_regulation() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.policy.tau = 0.3;
    cfg.policy.theta0 = 0.8;
    cfg.policy.kappa = 5.0;
    cfg.policy.delta_rep = 0.2;
    cfg.policy.rho = 0.01;
    cfg
}

/// The four scenario groups followed by the collateral-damage variants.
pub fn scenario_presets() -> Vec<Preset> {
    let mut baseline = ScenarioConfig::default();
    baseline.policy.delta_rep = 0.0;
    baseline.policy.alpha = 0.0;
    baseline.policy.rep_recovery = 0.0;
    baseline.policy.rho = 0.0;
    baseline.agent_policy_mix = PolicyMix::only(PolicyKind::Myopic);

    let mut long_term = ScenarioConfig {
        agent_policy_mix: PolicyMix::only(PolicyKind::QLearning),
        training_episodes: 50,
        ..ScenarioConfig::default()
    };
    long_term.discount.beta_disc = 0.9;
    long_term.policy.delta_rep = 0.2;

    let mut presets = vec![
        preset(
            "baseline",
            "myopic agents, no reputation mechanism, no collateral damage",
            baseline,
        ),
        preset(
            "long_term",
            "Q-learning agents with discounting and reputation penalties",
            long_term,
        ),
        preset(
            "strong_regulation",
            "high tax and high detection (tau 0.3, theta0 0.8, kappa 5)",
            strong_regulation(),
        ),
        preset(
            "weak_regulation",
            "no tax and low detection (tau 0, theta0 0.2, kappa 2)",
            weak_regulation(),
        ),
    ];
    for rho in COLLATERAL_RHOS {
        let mut cfg = weak_regulation();
        cfg.policy.rho = rho;
        presets.push(preset(
            &format!("collateral_rho_{rho}"),
            "weak regulation with varied misclassification rate",
            cfg,
        ));
    }
    presets
}

pub fn find_preset(name: &str) -> Option<Preset> {
    scenario_presets().into_iter().find(|p| p.name == name)
}

/// Mean of a reduced metric over a cell's seeds, recomputed from raw runs.
pub fn recompute_mean(cell: &Cell, f: fn(&SeedMetrics) -> f64) -> Result<f64> {
    stats::mean(&cell.runs.iter().map(f).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_base() -> ScenarioConfig {
        let mut cfg = weak_regulation();
        cfg.n_agents = 20;
        cfg.discount.horizon_t = 40;
        cfg.snapshot_rounds = vec![0];
        cfg
    }

    #[test]
    fn degenerate_sweep_matches_single_run() {
        let spec = SweepSpec {
            base: quick_base(),
            axes: vec![],
            seeds: vec![17],
            reduce_round: 20,
        };
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.cells.len(), 1);
        let mut cfg = quick_base();
        cfg.master_seed = 17;
        let run = engine::run(&cfg).unwrap();
        let expected = SeedMetrics::reduce(17, &run, 20, cfg.discount.beta_disc).unwrap();
        assert_eq!(res.cells[0].runs, vec![expected]);
        assert_eq!(res.cells[0].stats.r_final.mean, run.series[20].r_bar);
        assert_eq!(res.cells[0].stats.r_final.std, 0.0);
    }

    #[test]
    fn cartesian_completeness_and_order() {
        let spec = SweepSpec {
            base: quick_base(),
            axes: vec![
                Axis {
                    path: "policy.tau".into(),
                    values: vec![0.0, 0.1, 0.3],
                },
                Axis {
                    path: "policy.kappa".into(),
                    values: vec![2.0, 5.0],
                },
            ],
            seeds: vec![1, 2],
            reduce_round: 10,
        };
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.cells.len(), 6);
        assert_eq!(res.cells[0].values, vec![0.0, 2.0]);
        assert_eq!(res.cells[1].values, vec![0.0, 5.0]);
        assert_eq!(res.cells[5].values, vec![0.3, 5.0]);
        for cell in &res.cells {
            assert_eq!(cell.runs.len(), 2);
            let mean = recompute_mean(cell, |r| r.loss_final).unwrap();
            assert_eq!(mean, cell.stats.loss_final.mean);
        }
    }

    #[test]
    fn tax_reduces_final_injection() {
        let spec = SweepSpec {
            base: quick_base(),
            axes: vec![Axis {
                path: "policy.tau".into(),
                values: vec![0.0, 0.1, 0.3],
            }],
            seeds: (0..5).collect(),
            reduce_round: 5,
        };
        let res = run_sweep(&spec).unwrap();
        let r: Vec<f64> = res.cells.iter().map(|c| c.stats.r_final.mean).collect();
        assert!(r[0] >= r[1] && r[1] >= r[2], "{r:?}");
        assert!(r[0] > r[2]);
    }

    #[test]
    fn misclassification_raises_false_injury() {
        let spec = SweepSpec {
            base: quick_base(),
            axes: vec![Axis {
                path: "policy.rho".into(),
                values: COLLATERAL_RHOS.to_vec(),
            }],
            seeds: vec![3],
            reduce_round: 5,
        };
        let res = run_sweep(&spec).unwrap();
        let fir: Vec<f64> = res
            .cells
            .iter()
            .map(|c| c.stats.false_injury_rate.mean)
            .collect();
        assert!(fir[0] < fir[1] && fir[1] < fir[2], "{fir:?}");
    }

    #[test]
    fn bad_axis_is_reported() {
        let spec = SweepSpec {
            base: quick_base(),
            axes: vec![Axis {
                path: "policy.bogus".into(),
                values: vec![1.0],
            }],
            ..SweepSpec::default()
        };
        match run_sweep(&spec) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "policy.bogus"),
            other => panic!("unexpected {other:?}"),
        }
        let spec = SweepSpec {
            base: quick_base(),
            axes: vec![Axis {
                path: "policy.theta0".into(),
                values: vec![0.5, 1.5],
            }],
            ..SweepSpec::default()
        };
        assert!(run_sweep(&spec).is_err());
        let spec = SweepSpec {
            base: quick_base(),
            seeds: vec![],
            ..SweepSpec::default()
        };
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn heatmap_shapes_and_flat_r() {
        let mut base = strong_regulation();
        base.n_agents = 20;
        let hm = sensitivity_heatmap(&base, &[0.5, 1.0, 2.0], &[1.0, 4.0], &[0], 20).unwrap();
        assert_eq!(hm.r_final.len(), 3);
        assert!(hm.r_final.iter().all(|row| row.len() == 2));
        let first = hm.r_final[0][0];
        assert!(hm.r_final.iter().flatten().all(|v| *v == first));
        let one = sensitivity_heatmap(&base, &[1.0], &[1.0], &[0], 20).unwrap();
        assert_eq!(one.loss_final.len(), 1);
        assert!(sensitivity_heatmap(&base, &[], &[1.0], &[0], 20).is_err());
    }

    #[test]
    fn loss_grows_with_phi_when_injecting() {
        let base = quick_base();
        let hm = sensitivity_heatmap(&base, &[1.0, 2.0], &[1.0], &[2], 5).unwrap();
        assert!(hm.r_final[0][0] > 0.0);
        assert!(hm.loss_final[1][0] >= hm.loss_final[0][0]);
    }

    #[test]
    fn presets_match_scenario_groups() {
        let presets = scenario_presets();
        assert_eq!(presets.len(), 7);
        let names: Vec<&str> = presets.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            &names[..4],
            &[
                "baseline",
                "long_term",
                "strong_regulation",
                "weak_regulation"
            ]
        );
        let strong = find_preset("strong_regulation").unwrap().config;
        assert_eq!(
            (strong.policy.tau, strong.policy.theta0, strong.policy.kappa),
            (0.3, 0.8, 5.0)
        );
        let base = find_preset("baseline").unwrap().config;
        assert_eq!(base.policy.delta_rep, 0.0);
        assert_eq!(base.policy.rho, 0.0);
        assert_eq!(base.agent_policy_mix, PolicyMix::only(PolicyKind::Myopic));
        let weak = find_preset("weak_regulation").unwrap().config;
        assert_eq!(
            (weak.policy.tau, weak.policy.theta0, weak.policy.kappa),
            (0.0, 0.2, 2.0)
        );
        let rhos: Vec<f64> = presets[4..].iter().map(|p| p.config.policy.rho).collect();
        assert_eq!(rhos, COLLATERAL_RHOS.to_vec());
        for p in &presets {
            p.config.validate().unwrap();
        }
    }
}
