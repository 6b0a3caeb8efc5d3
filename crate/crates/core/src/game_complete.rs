//! One-shot game under complete information: Nash equilibrium, social
//! optimum, price of anarchy and comparative statics.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::model::{platform_cost, RateProfile, SystemParams};
use crate::solvers::{solve_fixed_point, SolveOptions};

/// A solved profile with its costs and first-order residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub profile: RateProfile,
    pub per_platform_costs: Vec<f64>,
    pub social: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl EquilibriumResult {
    fn build(profile: RateProfile, params: &SystemParams, residuals: Vec<f64>, iterations: usize) -> Result<Self> {
        let per_platform_costs = (0..params.n())
            .map(|i| platform_cost(i, &profile, params))
            .collect::<Result<Vec<_>>>()?;
        let social = per_platform_costs.iter().sum();
        Ok(EquilibriumResult {
            profile,
            per_platform_costs,
            social,
            residuals,
            iterations,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Cost-minimizing own rate against a rival total: √((1 + L/μ)/c).
pub fn best_response(rival_total: f64, c: f64, mu: f64) -> Result<f64> {
    if !(rival_total.is_finite() && rival_total >= 0.0) {
        return Err(AoiError::domain(format!("rival total must be nonnegative, got {rival_total}")));
    }
    if !(c.is_finite() && c > 0.0 && mu.is_finite() && mu > 0.0) {
        return Err(AoiError::domain(format!("need c > 0 and mu > 0, got c={c}, mu={mu}")));
    }
    Ok(((1.0 + rival_total / mu) / c).sqrt())
}

fn nash_map(x: &[f64], params: &SystemParams) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    x.iter()
        .zip(&params.costs)
        .map(|(&xi, &c)| ((1.0 + (total - xi) / params.mu) / c).sqrt())
        .collect()
}

fn optimum_map(x: &[f64], params: &SystemParams) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    let inv: f64 = x.iter().map(|v| 1.0 / v).sum();
    x.iter()
        .zip(&params.costs)
        .map(|(&xi, &c)| {
            let ext = (inv - 1.0 / xi) / params.mu;
            ((1.0 + (total - xi) / params.mu) / (c + ext)).sqrt()
        })
        .collect()
}

fn residuals_of(map: fn(&[f64], &SystemParams) -> Vec<f64>, profile: &RateProfile, params: &SystemParams) -> Vec<f64> {
    map(&profile.rates, params)
        .iter()
        .zip(&profile.rates)
        .map(|(g, x)| (g - x).abs())
        .collect()
}

/// |λ_i − √((1 + λ_{-i}/μ)/c_i)| per platform.
pub fn nash_residuals(profile: &RateProfile, params: &SystemParams) -> Vec<f64> {
    residuals_of(nash_map, profile, params)
}

/// Per-platform residuals of the social-optimum first-order conditions.
pub fn optimum_residuals(profile: &RateProfile, params: &SystemParams) -> Vec<f64> {
    residuals_of(optimum_map, profile, params)
}

fn default_start(params: &SystemParams) -> Vec<f64> {
    params.costs.iter().map(|c| 1.0 / c.sqrt()).collect()
}

/// Options used by the game solvers: the library defaults with a tighter
/// absolute tolerance, so downstream comparisons at 1e-8 have headroom.
pub fn game_options() -> SolveOptions {
    SolveOptions {
        abs_tol: 1e-13,
        max_iter: 100_000,
        ..SolveOptions::default()
    }
}

pub fn nash_equilibrium(params: &SystemParams) -> Result<EquilibriumResult> {
    nash_equilibrium_with(params, &game_options())
}

pub fn nash_equilibrium_with(params: &SystemParams, opts: &SolveOptions) -> Result<EquilibriumResult> {
    params.validate()?;
    let fp = solve_fixed_point(|x| Ok(nash_map(x, params)), &default_start(params), opts)
        .map_err(|e| e.in_context("Nash equilibrium system"))?;
    let profile = RateProfile::new(fp.x)?;
    let res = nash_residuals(&profile, params);
    EquilibriumResult::build(profile, params, res, fp.iterations)
}

pub fn social_optimum(params: &SystemParams) -> Result<EquilibriumResult> {
    social_optimum_with(params, &game_options())
}

pub fn social_optimum_with(params: &SystemParams, opts: &SolveOptions) -> Result<EquilibriumResult> {
    params.validate()?;
    let fp = solve_fixed_point(|x| Ok(optimum_map(x, params)), &default_start(params), opts)
        .map_err(|e| e.in_context("social optimum system"))?;
    let profile = RateProfile::new(fp.x)?;
    let res = optimum_residuals(&profile, params);
    EquilibriumResult::build(profile, params, res, fp.iterations)
}

/// Ratio of equilibrium to optimal social cost, or a marker once rates blow up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PoaOutcome {
    Finite(f64),
    Unbounded,
}

impl PoaOutcome {
    pub fn value(self) -> Option<f64> {
        match self {
            PoaOutcome::Finite(v) => Some(v),
            PoaOutcome::Unbounded => None,
        }
    }
}

pub(crate) fn ratio_outcome(num: Result<f64>, den: Result<f64>) -> Result<PoaOutcome> {
    match (num, den) {
        (Err(AoiError::Divergence { .. }), _) | (_, Err(AoiError::Divergence { .. })) => Ok(PoaOutcome::Unbounded),
        (Ok(a), Ok(b)) => Ok(PoaOutcome::Finite(a / b)),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

pub fn poa_ratio(params: &SystemParams) -> Result<PoaOutcome> {
    ratio_outcome(
        nash_equilibrium(params).map(|r| r.social),
        social_optimum(params).map(|r| r.social),
    )
}

/// Parameter nudged in a comparative-statics check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Perturbation {
    /// Increase platform j's unit cost (own cost when j == i).
    Cost(usize),
    Mu,
    /// Increase the rival total the platform best-responds to.
    RivalRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub platform: usize,
    pub perturbation: Perturbation,
    pub before: f64,
    pub after: f64,
    /// Sign of the change in the platform's equilibrium rate.
    pub observed: i8,
    /// Sign predicted by the model: decrease for costs and bandwidth, increase for rival rates.
    pub expected: i8,
}

impl SignReport {
    pub fn matches(&self) -> bool {
        self.observed == self.expected
    }
}

/// Sign of Δλ_i* under a small increase `step` of the chosen parameter.
pub fn comparative_statics_check(i: usize, params: &SystemParams, perturbation: Perturbation, step: f64) -> Result<SignReport> {
    params.check_index(i)?;
    if !(step > 0.0) {
        return Err(AoiError::domain("perturbation step must be positive"));
    }
    let base = nash_equilibrium(params)?;
    let before = base.profile.rates[i];
    let (after, expected) = match perturbation {
        Perturbation::Cost(j) => {
            params.check_index(j)?;
            let mut p = params.clone();
            p.costs[j] += step;
            (nash_equilibrium(&p)?.profile.rates[i], -1)
        }
        Perturbation::Mu => {
            let p = SystemParams { mu: params.mu + step, ..params.clone() };
            (nash_equilibrium(&p)?.profile.rates[i], -1)
        }
        Perturbation::RivalRate => {
            let rival = base.profile.rival_total(i);
            (best_response(rival + step, params.costs[i], params.mu)?, 1)
        }
    };
    let d = after - before;
    let observed = if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 };
    Ok(SignReport {
        platform: i,
        perturbation,
        before,
        after,
        observed,
        expected,
    })
}
