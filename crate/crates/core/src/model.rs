//! Pure evaluation of the economy: rents, costs, payoffs, detection,
//! reputation, the transparency transition and social loss.
//!
//! Every function here is a deterministic function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural coefficients of the economy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Transparency gain per round.
    pub gamma: f64,
    /// Sensitivity of transparency to mean injection.
    pub delta: f64,
    /// Traditional rent coefficient, multiplies `r * (1 - s)`.
    pub beta1: f64,
    /// AI-manipulation rent coefficient, multiplies `r * s`.
    pub beta2: f64,
    /// Quadratic cost coefficient.
    pub c: f64,
    /// Misallocation loss weight.
    pub phi: f64,
    /// Opacity loss weight.
    pub psi: f64,
    /// Collateral-damage loss weight.
    pub eta: f64,
    /// Standard deviation of the transparency noise.
    pub sigma_eps: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            gamma: 0.05,
            delta: 0.1,
            beta1: 1.0,
            beta2: 0.5,
            c: 1.0,
            phi: 1.0,
            psi: 1.0,
            eta: 1.0,
            sigma_eps: 0.01,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        positive("model.delta", self.delta)?;
        positive("model.c", self.c)?;
        positive("model.phi", self.phi)?;
        positive("model.psi", self.psi)?;
        non_negative("model.gamma", self.gamma)?;
        non_negative("model.beta1", self.beta1)?;
        non_negative("model.beta2", self.beta2)?;
        non_negative("model.eta", self.eta)?;
        non_negative("model.sigma_eps", self.sigma_eps)?;
        Ok(())
    }
}

/// How a detected agent's fine is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineMode {
    /// Fine is `kappa * r`.
    #[default]
    KappaProportional,
    /// Fine is `tau * r`.
    TauProportional,
}

/// Regulator instruments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    /// Per-unit tax on injection, levied whether or not the agent is caught.
    pub tau: f64,
    /// Base detection probability.
    pub theta0: f64,
    /// Extra detection probability per unit of lost reputation.
    pub alpha: f64,
    /// Penalty multiplier.
    pub kappa: f64,
    /// Reputation deducted on detection.
    pub delta_rep: f64,
    /// Misclassification (false-positive) rate.
    pub rho: f64,
    /// Regulatory cap on injection.
    pub r_max: f64,
    pub fine_mode: FineMode,
    /// Reputation regained after an undetected round.
    pub rep_recovery: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            tau: 0.1,
            theta0: 0.2,
            alpha: 0.5,
            kappa: 2.0,
            delta_rep: 0.1,
            rho: 0.05,
            r_max: 1.0,
            fine_mode: FineMode::KappaProportional,
            rep_recovery: 0.01,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("policy.tau", self.tau)?;
        unit_interval("policy.theta0", self.theta0)?;
        non_negative("policy.alpha", self.alpha)?;
        non_negative("policy.kappa", self.kappa)?;
        unit_interval("policy.delta_rep", self.delta_rep)?;
        unit_interval("policy.rho", self.rho)?;
        positive("policy.r_max", self.r_max)?;
        non_negative("policy.rep_recovery", self.rep_recovery)?;
        Ok(())
    }

    /// Marginal fine per unit of injection when detected.
    pub fn fine_rate(&self) -> f64 {
        match self.fine_mode {
            FineMode::KappaProportional => self.kappa,
            FineMode::TauProportional => self.tau,
        }
    }
}

/// Agents' discounting and the run horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscountParams {
    pub beta_disc: f64,
    pub horizon_t: usize,
}

impl Default for DiscountParams {
    fn default() -> Self {
        DiscountParams {
            beta_disc: 0.95,
            horizon_t: 100,
        }
    }
}

impl DiscountParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_disc > 0.0 && self.beta_disc < 1.0) {
            return Err(Error::invalid(
                "discount.beta_disc",
                format!("must lie in (0, 1), got {}", self.beta_disc),
            ));
        }
        if self.horizon_t == 0 {
            return Err(Error::invalid("discount.horizon_t", "must be at least 1"));
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {v}")))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

fn check_injection(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "injection",
            value: r,
            expected: "finite and >= 0",
        })
    }
}

fn check_unit(what: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            expected: "within [0, 1]",
        })
    }
}

/// Reputation-weighted rent: `(beta1 * r * (1 - s) + beta2 * r * s) * rep`.
pub fn benefit(r: f64, s: f64, rep: f64, m: &ModelParams) -> Result<f64> {
    check_injection(r)?;
    check_unit("transparency", s)?;
    check_unit("reputation", rep)?;
    Ok((m.beta1 * r * (1.0 - s) + ai_rent(r, s, m)) * rep)
}

/// Incremental manipulation rent available on a trusted platform.
pub fn ai_rent(r: f64, s: f64, m: &ModelParams) -> f64 {
    m.beta2 * r * s
}

pub fn cost(r: f64, m: &ModelParams) -> Result<f64> {
    check_injection(r)?;
    Ok(m.c * r * r)
}

/// Detection probability `theta0 + alpha * (1 - rep)`, clamped to `[0, 1]`.
pub fn detection_prob(rep: f64, p: &PolicyParams) -> Result<f64> {
    check_unit("reputation", rep)?;
    Ok((p.theta0 + p.alpha * (1.0 - rep)).clamp(0.0, 1.0))
}

pub fn realized_fine(r: f64, detected: bool, p: &PolicyParams) -> Result<f64> {
    check_injection(r)?;
    Ok(if detected { p.fine_rate() * r } else { 0.0 })
}

/// Realized one-round payoff: benefit minus cost, tax and any fine.
pub fn payoff(
    r: f64,
    s: f64,
    rep: f64,
    p: &PolicyParams,
    m: &ModelParams,
    detected: bool,
) -> Result<f64> {
    Ok(benefit(r, s, rep, m)? - cost(r, m)? - p.tau * r - realized_fine(r, detected, p)?)
}

/// Payoff averaged over the detection draw.
pub fn expected_payoff(r: f64, s: f64, rep: f64, p: &PolicyParams, m: &ModelParams) -> Result<f64> {
    let theta = detection_prob(rep, p)?;
    Ok(benefit(r, s, rep, m)? - cost(r, m)? - p.tau * r - theta * p.fine_rate() * r)
}

/// Next transparency `clamp(s + gamma - delta * r_bar + eps, 0, 1)`.
pub fn transition(s: f64, r_bar: f64, eps: f64, m: &ModelParams) -> Result<f64> {
    check_unit("transparency", s)?;
    Ok((s + m.gamma - m.delta * r_bar + eps).clamp(0.0, 1.0))
}

/// Collateral damage from false positives, `rho * theta_bar`.
pub fn collateral_damage(theta_bar: f64, p: &PolicyParams) -> Result<f64> {
    check_unit("mean detection probability", theta_bar)?;
    Ok(p.rho * theta_bar)
}

/// Social loss `phi * r_bar^2 + psi * (1 - s)^2 + eta * cd`.
pub fn social_loss(r_bar: f64, s: f64, cd: f64, m: &ModelParams) -> Result<f64> {
    check_injection(r_bar)?;
    check_unit("transparency", s)?;
    if !(cd.is_finite() && cd >= 0.0) {
        return Err(Error::Domain {
            what: "collateral damage",
            value: cd,
            expected: "finite and >= 0",
        });
    }
    let opacity = 1.0 - s;
    Ok(m.phi * r_bar * r_bar + m.psi * opacity * opacity + m.eta * cd)
}

pub fn reputation_update(rep: f64, detected: bool, p: &PolicyParams) -> Result<f64> {
    check_unit("reputation", rep)?;
    Ok(if detected {
        (rep - p.delta_rep).max(0.0)
    } else {
        (rep + p.rep_recovery).min(1.0)
    })
}
