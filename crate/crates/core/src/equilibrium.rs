//! Steady states, comparative statics, local stability and the search for a
//! loss-minimizing tax.
//!
//! The steady state pins mean injection at `gamma / delta` (transparency
//! is stationary only when the drift from injection cancels the gain) and
//! then looks for the transparency level at which the representative
//! agent's best response equals that injection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{myopic_best_response, unclamped_response};
use crate::engine::{self, ScenarioConfig};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, PolicyParams};
use crate::stats::{self, MeanStd};

/// Reputation of the representative agent in steady-state analysis.
pub const STEADY_STATE_REP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bracket width at which bisection stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Residuals at or below this are treated as exact roots.
const ROOT_EPS: f64 = 1e-12;
const MONOTONE_GRID: usize = 1000;

pub fn steady_state_r(m: &ModelParams) -> Result<f64> {
    if m.delta.is_nan() || m.delta <= 0.0 {
        return Err(Error::invalid(
            "model.delta",
            format!("must be > 0, got {}", m.delta),
        ));
    }
    Ok(m.gamma / m.delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SteadyStateKind {
    Interior(f64),
    /// Best response exceeds `gamma / delta` everywhere: transparency decays to 0.
    BoundaryLow,
    /// Best response stays below `gamma / delta`: transparency saturates at 1.
    BoundaryHigh,
    NoSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub r_star: f64,
    pub s_star_kind: SteadyStateKind,
    /// `|best_response(s) - r_star|` at the reported point (the binding
    /// boundary for boundary cases, the closest grid point otherwise).
    pub residual: f64,
    /// Reputation at which the best response was evaluated.
    pub rep: f64,
    pub diagnostic: Option<String>,
}

impl SteadyState {
    pub fn interior(&self) -> Option<f64> {
        match self.s_star_kind {
            SteadyStateKind::Interior(s) => Some(s),
            _ => None,
        }
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64, opts: &SolverOptions) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.abs() <= ROOT_EPS {
        return Ok(lo);
    }
    if f_hi.abs() <= ROOT_EPS {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NotApplicable(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= opts.tol {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Steady-state transparency for the representative agent at full reputation.
pub fn steady_state_s(m: &ModelParams, p: &PolicyParams) -> Result<SteadyState> {
    steady_state_s_with(m, p, STEADY_STATE_REP, &SolverOptions::default())
}

pub fn steady_state_s_with(
    m: &ModelParams,
    p: &PolicyParams,
    rep: f64,
    opts: &SolverOptions,
) -> Result<SteadyState> {
    let r_star = steady_state_r(m)?;
    let gap = |s: f64| myopic_best_response(s, rep, p, m).map(|r| r - r_star);

    let grid: Vec<f64> = (0..=MONOTONE_GRID)
        .map(|k| gap(k as f64 / MONOTONE_GRID as f64))
        .collect::<Result<_>>()?;
    let closest = grid.iter().fold(f64::INFINITY, |a, g| a.min(g.abs()));
    let rising = grid.windows(2).all(|w| w[1] >= w[0] - ROOT_EPS);
    let falling = grid.windows(2).all(|w| w[1] <= w[0] + ROOT_EPS);
    let mk = |kind, residual, diagnostic| SteadyState {
        r_star,
        s_star_kind: kind,
        residual,
        rep,
        diagnostic,
    };

    if !rising && !falling {
        return Ok(mk(
            SteadyStateKind::NoSolution,
            closest,
            Some("best response is not monotone in transparency".into()),
        ));
    }
    let (g0, g1) = (grid[0], grid[MONOTONE_GRID]);
    if g0.abs() <= ROOT_EPS && g1.abs() <= ROOT_EPS {
        return Ok(mk(
            SteadyStateKind::NoSolution,
            closest,
            Some("best response is flat at gamma/delta: every s is stationary".into()),
        ));
    }
    if g0 < -ROOT_EPS && g1 < -ROOT_EPS {
        return Ok(mk(SteadyStateKind::BoundaryHigh, g1.abs(), None));
    }
    if g0 > ROOT_EPS && g1 > ROOT_EPS {
        return Ok(mk(SteadyStateKind::BoundaryLow, g0.abs(), None));
    }

    let f = |s: f64| gap(s).unwrap_or(f64::NAN);
    let s = bisect(f, 0.0, 1.0, opts)?;
    let residual = gap(s)?.abs();
    let diagnostic = if s <= opts.tol {
        Some("steady state within tolerance of s = 0".to_string())
    } else if s >= 1.0 - opts.tol {
        Some("steady state within tolerance of s = 1".to_string())
    } else {
        None
    };
    Ok(mk(SteadyStateKind::Interior(s), residual, diagnostic))
}

/// Social loss at a steady state, with collateral damage evaluated at the
/// representative agent's detection probability.
pub fn steady_state_loss(m: &ModelParams, p: &PolicyParams, ss: &SteadyState) -> Result<f64> {
    let s = ss
        .interior()
        .ok_or_else(|| Error::NotApplicable("steady state is not interior".into()))?;
    let theta = model::detection_prob(ss.rep, p)?;
    model::social_loss(ss.r_star, s, model::collateral_damage(theta, p)?, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSensitivity {
    pub derivative: f64,
    /// False when the response is clamped at the evaluation point, so the
    /// derivative only reflects the cap.
    pub informative: bool,
}

/// Central finite difference of the best response in `tau` at `(s, rep)`.
pub fn comparative_static_tau(
    m: &ModelParams,
    p: &PolicyParams,
    s: f64,
    rep: f64,
    d_tau: f64,
) -> Result<TauSensitivity> {
    if !(d_tau.is_finite() && d_tau > 0.0) {
        return Err(Error::invalid("d_tau", format!("must be > 0, got {d_tau}")));
    }
    // Validate the point.
    myopic_best_response(s, rep, p, m)?;
    let theta = model::detection_prob(rep, p)?;
    let raw = |tau: f64| unclamped_response(s, rep, theta, tau, p, m);
    let clamp = |r: f64| r.clamp(0.0, p.r_max);
    let (up, down) = (raw(p.tau + d_tau), raw(p.tau - d_tau));
    let interior = |r: f64| r > 0.0 && r < p.r_max;
    Ok(TauSensitivity {
        derivative: (clamp(up) - clamp(down)) / (2.0 * d_tau),
        informative: interior(up) && interior(down),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Linearized multiplier `1 - delta * dR/dS`.
    pub multiplier: f64,
    pub classification: StabilityClass,
    pub dr_ds_analytic: f64,
    pub dr_ds_numeric: f64,
    pub diagnostic: Option<String>,
}

const MARGINAL_TOL: f64 = 1e-9;
const SLOPE_STEP: f64 = 1e-6;
const SLOPE_MISMATCH: f64 = 1e-6;

pub fn classify_multiplier(lambda: f64) -> StabilityClass {
    let mag = lambda.abs();
    if (mag - 1.0).abs() <= MARGINAL_TOL {
        StabilityClass::Marginal
    } else if mag < 1.0 {
        StabilityClass::Stable
    } else {
        StabilityClass::Unstable
    }
}

/// Local stability of an interior steady state.
pub fn stability_at(
    m: &ModelParams,
    p: &PolicyParams,
    ss: &SteadyState,
) -> Result<StabilityReport> {
    let s = ss.interior().ok_or_else(|| {
        Error::NotApplicable("stability analysis needs an interior steady state".into())
    })?;
    let rep = ss.rep;
    let br = |x: f64| myopic_best_response(x, rep, p, m);

    let r = br(s)?;
    let analytic = if r > 0.0 && r < p.r_max {
        rep * (m.beta2 - m.beta1) / (2.0 * m.c)
    } else {
        0.0
    };
    let (lo, hi) = ((s - SLOPE_STEP).max(0.0), (s + SLOPE_STEP).min(1.0));
    let numeric = (br(hi)? - br(lo)?) / (hi - lo);

    let diagnostic = ((analytic - numeric).abs() > SLOPE_MISMATCH)
        .then(|| format!("analytic dR/dS {analytic} disagrees with finite difference {numeric}"));
    let multiplier = 1.0 - m.delta * analytic;
    Ok(StabilityReport {
        multiplier,
        classification: classify_multiplier(multiplier),
        dr_ds_analytic: analytic,
        dr_ds_numeric: numeric,
        diagnostic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxPoint {
    pub tau: f64,
    pub loss: MeanStd,
    /// Cumulative discounted loss per seed, in seed order.
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxSearchResult {
    pub best_tau: f64,
    pub best_loss: f64,
    pub curve: Vec<TaxPoint>,
}

/// Mean cumulative discounted loss of `base` at tax `tau`, per seed.
fn losses_at(base: &ScenarioConfig, tau: f64, seeds: &[u64]) -> Result<Vec<f64>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.policy.tau = tau;
            cfg.master_seed = seed;
            engine::run(&cfg)
                .map(|res| res.cumulative_discounted_loss(cfg.discount.beta_disc))
                .map_err(|e| Error::TaxRun {
                    tau,
                    seed,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Grid search over constant tax rates, minimizing mean cumulative
/// discounted social loss across seeds. Ties go to the smaller tax.
///
/// With `refine_iters > 0`, golden-section search runs between the best grid
/// point and its better neighbour; the refined point replaces the grid
/// optimum only if it is strictly better.
pub fn optimal_tax_search(
    base: &ScenarioConfig,
    tau_grid: &[f64],
    seeds: &[u64],
    refine_iters: usize,
) -> Result<TaxSearchResult> {
    if tau_grid.is_empty() {
        return Err(Error::invalid("tau_grid", "must not be empty"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "must not be empty"));
    }
    let mut grid = tau_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let curve: Vec<TaxPoint> = grid
        .iter()
        .map(|&tau| {
            let per_seed = losses_at(base, tau, seeds)?;
            Ok(TaxPoint {
                tau,
                loss: MeanStd::of(&per_seed)?,
                per_seed,
            })
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, pt) in curve.iter().enumerate().skip(1) {
        if pt.loss.mean < curve[best].loss.mean {
            best = k;
        }
    }
    let (mut best_tau, mut best_loss) = (curve[best].tau, curve[best].loss.mean);

    if refine_iters > 0 && curve.len() > 1 {
        let neighbour = match (best.checked_sub(1), curve.get(best + 1)) {
            (Some(l), Some(r)) if curve[l].loss.mean <= r.loss.mean => l,
            (Some(l), None) => l,
            _ => best + 1,
        };
        let (a, b) = {
            let (x, y) = (curve[best].tau, curve[neighbour].tau);
            if x < y {
                (x, y)
            } else {
                (y, x)
            }
        };
        let eval = |tau: f64| -> Result<f64> { stats::mean(&losses_at(base, tau, seeds)?) };
        let (tau, loss) = golden_section(eval, a, b, refine_iters)?;
        if loss < best_loss {
            best_tau = tau;
            best_loss = loss;
        }
    }

    Ok(TaxSearchResult {
        best_tau,
        best_loss,
        curve,
    })
}

fn golden_section(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}
