use proptest::prelude::*;

use rentsim::agents::{myopic_best_response, PolicyKind};
use rentsim::engine::{self, PolicyMix, ScenarioConfig};
use rentsim::equilibrium::*;
use rentsim::sweeps::{self, Axis, SeedMetrics, SweepSpec};
use rentsim::{ModelParams, PolicyParams};

fn economy() -> impl Strategy<Value = (ModelParams, PolicyParams)> {
    (
        (
            0.0..0.3f64,
            0.05..1.0f64,
            0.0..2.0f64,
            0.0..2.0f64,
            0.2..3.0f64,
        ),
        (
            0.0..0.5f64,
            0.0..=1.0f64,
            0.0..1.0f64,
            0.0..4.0f64,
            0.3..2.0f64,
        ),
    )
        .prop_map(
            |((gamma, delta, beta1, beta2, c), (tau, theta0, alpha, kappa, r_max))| {
                (
                    ModelParams {
                        gamma,
                        delta,
                        beta1,
                        beta2,
                        c,
                        ..ModelParams::default()
                    },
                    PolicyParams {
                        tau,
                        theta0,
                        alpha,
                        kappa,
                        r_max,
                        ..PolicyParams::default()
                    },
                )
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn steady_injection_is_gamma_over_delta(gamma in 0.0..1.0f64, delta in 1e-3..2.0f64) {
        let m = ModelParams { gamma, delta, ..ModelParams::default() };
        prop_assert_eq!(steady_state_r(&m).unwrap(), gamma / delta);
    }

    #[test]
    fn tax_never_raises_the_response(
        (m, p) in economy(), s in 0.0..=1.0f64, rep in 0.0..=1.0f64
    ) {
        let d = comparative_static_tau(&m, &p, s, rep, 1e-6).unwrap();
        prop_assert!(d.derivative <= 1e-9);
        if d.informative {
            prop_assert!((d.derivative + 1.0 / (2.0 * m.c)).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn interior_root_is_unique_on_the_grid((m, p) in economy()) {
        let ss = steady_state_s(&m, &p).unwrap();
        let gap = |s: f64| myopic_best_response(s, 1.0, &p, &m).unwrap() - ss.r_star;
        if let Some(s_star) = ss.interior() {
            prop_assert!(gap(s_star).abs() < 1e-6 || ss.diagnostic.is_some());
            let n = 2000;
            let signs: Vec<f64> = (0..=n)
                .map(|k| gap(k as f64 / n as f64))
                .filter(|g| g.abs() > 1e-9)
                .collect();
            let changes = signs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
            prop_assert!(changes <= 1);
        }
        match ss.s_star_kind {
            SteadyStateKind::BoundaryHigh => {
                prop_assert!(gap(0.0) < 0.0 && gap(1.0) < 0.0);
            }
            SteadyStateKind::BoundaryLow => {
                prop_assert!(gap(0.0) > 0.0 && gap(1.0) > 0.0);
            }
            _ => {}
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn bisection_ignores_the_bracket(
        (m, p) in economy(), a in 0.0..1.0f64, b in 0.0..1.0f64
    ) {
        let ss = steady_state_s(&m, &p).unwrap();
        if let Some(s_star) = ss.interior() {
            let gap = |s: f64| myopic_best_response(s, 1.0, &p, &m).unwrap() - ss.r_star;
            let lo = a.min(b).min(s_star) * 0.999;
            let hi = 1.0 - (1.0 - a.max(b).max(s_star)) * 0.999;
            if gap(lo) != 0.0 && gap(hi) != 0.0 && gap(lo).signum() != gap(hi).signum() {
                let root = bisect(gap, lo, hi, &SolverOptions::default()).unwrap();
                prop_assert!((root - s_star).abs() <= 1e-8);
            }
        }
    }
}

fn quiet_myopic(m: ModelParams, p: PolicyParams, s0: f64, horizon: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        model: ModelParams {
            sigma_eps: 0.0,
            ..m
        },
        policy: PolicyParams {
            delta_rep: 0.0,
            rep_recovery: 0.0,
            ..p
        },
        n_agents: 5,
        s0,
        agent_policy_mix: PolicyMix::only(PolicyKind::Myopic),
        snapshot_rounds: vec![0],
        ..ScenarioConfig::default()
    };
    cfg.discount.horizon_t = horizon;
    cfg
}

/// Stable economy: s* = 0.5, multiplier 0.75.
fn stable_economy() -> (ModelParams, PolicyParams) {
    (
        ModelParams {
            gamma: 0.25,
            delta: 0.5,
            beta1: 0.5,
            beta2: 1.5,
            ..ModelParams::default()
        },
        PolicyParams {
            tau: 0.0,
            theta0: 0.0,
            ..PolicyParams::default()
        },
    )
}

/// Unstable economy: s* = 0.4, multiplier 1.025.
fn unstable_economy() -> (ModelParams, PolicyParams) {
    (
        ModelParams {
            gamma: 0.04,
            delta: 0.1,
            beta1: 1.0,
            beta2: 0.5,
            ..ModelParams::default()
        },
        PolicyParams {
            tau: 0.0,
            theta0: 0.0,
            ..PolicyParams::default()
        },
    )
}

#[test]
fn reference_economies_have_expected_steady_states() {
    let (m, p) = stable_economy();
    let ss = steady_state_s(&m, &p).unwrap();
    assert!((ss.interior().unwrap() - 0.5).abs() < 1e-8);
    let rep = stability_at(&m, &p, &ss).unwrap();
    assert_eq!(rep.classification, StabilityClass::Stable);
    assert!((rep.multiplier - 0.75).abs() < 1e-12);

    let (m, p) = unstable_economy();
    let ss = steady_state_s(&m, &p).unwrap();
    assert!((ss.interior().unwrap() - 0.4).abs() < 1e-8);
    let rep = stability_at(&m, &p, &ss).unwrap();
    assert_eq!(rep.classification, StabilityClass::Unstable);
    assert!((rep.multiplier - 1.025).abs() < 1e-12);
}

#[test]
fn noise_free_run_stays_at_the_steady_state() {
    for (m, p) in [stable_economy(), unstable_economy()] {
        let ss = steady_state_s(&m, &p).unwrap();
        let s_star = ss.interior().unwrap();
        let res = engine::run(&quiet_myopic(m, p, s_star, 100)).unwrap();
        for rec in &res.series {
            assert!(
                (rec.s - s_star).abs() <= 1e-6,
                "s = {} vs {}",
                rec.s,
                s_star
            );
            assert!((rec.r_bar - ss.r_star).abs() <= 1e-6);
        }
    }
}

#[test]
fn stable_economy_contracts_and_unstable_diverges() {
    for offset in [-0.05, -0.01, 0.01, 0.05] {
        let (m, p) = stable_economy();
        let res = engine::run(&quiet_myopic(m, p, 0.5 + offset, 60)).unwrap();
        let devs: Vec<f64> = res.series.iter().map(|r| (r.s - 0.5).abs()).collect();
        assert!(devs.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(devs.last().unwrap() < &(offset.abs() * 1e-3));

        let (m, p) = unstable_economy();
        let res = engine::run(&quiet_myopic(m, p, 0.4 + offset, 30)).unwrap();
        let devs: Vec<f64> = res.series.iter().map(|r| (r.s - 0.4).abs()).collect();
        assert!(devs.windows(2).all(|w| w[1] > w[0]));

        let res = engine::run(&quiet_myopic(m, p, 0.4 + offset, 400)).unwrap();
        let end = res.series.last().unwrap().s;
        assert!(end == 0.0 || end == 1.0, "ended at {end}");
    }
}

#[test]
fn higher_tax_never_raises_mean_injection() {
    let base = sweeps::weak_regulation();
    let spec = SweepSpec {
        base,
        axes: vec![Axis {
            path: "policy.tau".into(),
            values: vec![0.0, 0.1, 0.2, 0.3],
        }],
        seeds: (0..5).collect(),
        reduce_round: 20,
    };
    let res = sweeps::run_sweep(&spec).unwrap();
    let r: Vec<f64> = res.cells.iter().map(|c| c.stats.r_final.mean).collect();
    assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
    assert!(r[1] < r[0], "{r:?}");
}

#[test]
fn loss_weights_do_not_change_trajectories() {
    let mut base = sweeps::weak_regulation();
    base.discount.horizon_t = 30;
    base.snapshot_rounds = vec![0, 29];
    base.n_agents = 20;
    base.agent_policy_mix = PolicyMix {
        myopic: 0.4,
        local_search: 0.3,
        q_learning: 0.3,
    };
    let reference = engine::run(&base).unwrap();
    for (phi, psi) in [(0.1, 5.0), (3.0, 0.2), (10.0, 10.0)] {
        let mut cfg = base.clone();
        cfg.model.phi = phi;
        cfg.model.psi = psi;
        let res = engine::run(&cfg).unwrap();
        assert_eq!(reference.column(|r| r.r_bar), res.column(|r| r.r_bar));
        assert_eq!(reference.column(|r| r.s), res.column(|r| r.s));
        assert_eq!(reference.agents, res.agents);
    }
}

#[test]
fn sweep_cells_are_complete_and_consistent() {
    let mut base = ScenarioConfig {
        n_agents: 6,
        snapshot_rounds: vec![0],
        ..ScenarioConfig::default()
    };
    base.discount.horizon_t = 15;
    let spec = SweepSpec {
        base: base.clone(),
        axes: vec![
            Axis {
                path: "policy.tau".into(),
                values: vec![0.0, 0.2],
            },
            Axis {
                path: "model.gamma".into(),
                values: vec![0.01, 0.05, 0.09],
            },
            Axis {
                path: "policy.rho".into(),
                values: vec![0.02, 0.08],
            },
        ],
        seeds: vec![3, 4, 5],
        reduce_round: 10,
    };
    let res = sweeps::run_sweep(&spec).unwrap();
    assert_eq!(res.cells.len(), 12);
    for tau in [0.0, 0.2] {
        for gamma in [0.01, 0.05, 0.09] {
            for rho in [0.02, 0.08] {
                let cell = res.cell(&[tau, gamma, rho]).expect("missing cell");
                assert_eq!(cell.runs.len(), 3);
                let mean = sweeps::recompute_mean(cell, |r| r.loss_final).unwrap();
                assert!((mean - cell.stats.loss_final.mean).abs() < 1e-12);
                let devs: Vec<f64> = cell.runs.iter().map(|r| r.r_final).collect();
                let m = devs.iter().sum::<f64>() / 3.0;
                let var = devs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
                assert!((var.sqrt() - cell.stats.r_final.std).abs() < 1e-12);

                for run in &cell.runs {
                    let cfg = spec.cell_config(&[tau, gamma, rho]).unwrap();
                    let direct = engine::run(&ScenarioConfig {
                        master_seed: run.seed,
                        ..cfg.clone()
                    })
                    .unwrap();
                    let expected =
                        SeedMetrics::reduce(run.seed, &direct, 10, cfg.discount.beta_disc).unwrap();
                    assert_eq!(*run, expected);
                    assert_eq!(run.r_final, direct.series[10].r_bar);
                }
            }
        }
    }
}
