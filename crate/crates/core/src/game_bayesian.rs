//! One-shot Bayesian game where platform 0's cost is private: equilibrium,
//! social optimum, per-realization benchmark and information-advantage analysis.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game_complete::{game_options, nash_equilibrium, ratio_outcome, EquilibriumResult, PoaOutcome};
use crate::model::{
    bayesian_incumbent_cost, bayesian_platform1_cost, bayesian_social_cost, BayesianRateProfile, BayesianSpec,
    Realization,
};
use crate::solvers::{solve_fixed_point, solve_scalar_bracketed, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platform1Costs {
    pub high: f64,
    pub low: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianEquilibriumResult {
    pub profile: BayesianRateProfile,
    pub platform1_costs: Platform1Costs,
    pub incumbent_costs: Vec<f64>,
    pub social: f64,
    /// Residuals ordered as `[high, low, incumbents...]`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl BayesianEquilibriumResult {
    fn build(profile: BayesianRateProfile, spec: &BayesianSpec, residuals: Vec<f64>, iterations: usize) -> Result<Self> {
        let high = bayesian_platform1_cost(Realization::High, &profile, spec)?;
        let low = bayesian_platform1_cost(Realization::Low, &profile, spec)?;
        let incumbent_costs = (1..spec.n())
            .map(|i| bayesian_incumbent_cost(i, &profile, spec))
            .collect::<Result<Vec<_>>>()?;
        let social = bayesian_social_cost(&profile, spec)?;
        Ok(BayesianEquilibriumResult {
            profile,
            platform1_costs: Platform1Costs {
                high,
                low,
                expected: spec.p_high * high + (1.0 - spec.p_high) * low,
            },
            incumbent_costs,
            social,
            residuals,
            iterations,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Best-response map on `[high, low, incumbents...]`.
fn nash_map(x: &[f64], spec: &BayesianSpec) -> Vec<f64> {
    let mu = spec.mu;
    let inc = &x[2..];
    let s: f64 = inc.iter().sum();
    let h = ((1.0 + s / mu) / spec.c_high).sqrt();
    let l = ((1.0 + s / mu) / spec.c_low).sqrt();
    let e1 = spec.p_high * x[0] + (1.0 - spec.p_high) * x[1];
    let mut out = vec![h, l];
    out.extend(
        inc.iter()
            .zip(&spec.incumbent_costs)
            .map(|(&xi, &c)| ((1.0 + (e1 + s - xi) / mu) / c).sqrt()),
    );
    out
}

/// First-order-condition map of the expected social cost on `[high, low, incumbents...]`.
fn optimum_map(x: &[f64], spec: &BayesianSpec) -> Vec<f64> {
    let mu = spec.mu;
    let (h, l, inc) = (x[0], x[1], &x[2..]);
    let p = spec.p_high;
    let s: f64 = inc.iter().sum();
    let r: f64 = inc.iter().map(|v| 1.0 / v).sum::<f64>() / mu;
    let nh = ((1.0 + s / mu) / (spec.c_high + r)).sqrt();
    let nl = ((1.0 + s / mu) / (spec.c_low + r)).sqrt();
    let e1 = p * h + (1.0 - p) * l;
    let ext1 = p / (h * mu) + (1.0 - p) / (l * mu);
    let mut out = vec![nh, nl];
    out.extend(inc.iter().zip(&spec.incumbent_costs).map(|(&xi, &c)| {
        let ext = ext1 + r - 1.0 / (xi * mu);
        ((1.0 + (e1 + s - xi) / mu) / (c + ext)).sqrt()
    }));
    out
}

fn residuals(map: fn(&[f64], &BayesianSpec) -> Vec<f64>, profile: &BayesianRateProfile, spec: &BayesianSpec) -> Vec<f64> {
    let x = profile.to_vec();
    map(&x, spec).iter().zip(&x).map(|(g, v)| (g - v).abs()).collect()
}

pub fn bayesian_nash_residuals(profile: &BayesianRateProfile, spec: &BayesianSpec) -> Vec<f64> {
    residuals(nash_map, profile, spec)
}

pub fn bayesian_optimum_residuals(profile: &BayesianRateProfile, spec: &BayesianSpec) -> Vec<f64> {
    residuals(optimum_map, profile, spec)
}

fn start(spec: &BayesianSpec) -> Vec<f64> {
    let mut v = vec![1.0 / spec.c_high.sqrt(), 1.0 / spec.c_low.sqrt()];
    v.extend(spec.incumbent_costs.iter().map(|c| 1.0 / c.sqrt()));
    v
}

pub fn bayesian_nash(spec: &BayesianSpec) -> Result<BayesianEquilibriumResult> {
    bayesian_nash_with(spec, &game_options())
}

pub fn bayesian_nash_with(spec: &BayesianSpec, opts: &SolveOptions) -> Result<BayesianEquilibriumResult> {
    spec.validate()?;
    let fp = solve_fixed_point(|x| Ok(nash_map(x, spec)), &start(spec), opts)
        .map_err(|e| e.in_context("Bayesian equilibrium system"))?;
    let profile = BayesianRateProfile::from_slice(&fp.x);
    let res = bayesian_nash_residuals(&profile, spec);
    BayesianEquilibriumResult::build(profile, spec, res, fp.iterations)
}

pub fn bayesian_social_optimum(spec: &BayesianSpec) -> Result<BayesianEquilibriumResult> {
    bayesian_social_optimum_with(spec, &game_options())
}

pub fn bayesian_social_optimum_with(spec: &BayesianSpec, opts: &SolveOptions) -> Result<BayesianEquilibriumResult> {
    spec.validate()?;
    let fp = solve_fixed_point(|x| Ok(optimum_map(x, spec)), &start(spec), opts)
        .map_err(|e| e.in_context("Bayesian social optimum system"))?;
    let profile = BayesianRateProfile::from_slice(&fp.x);
    let res = bayesian_optimum_residuals(&profile, spec);
    BayesianEquilibriumResult::build(profile, spec, res, fp.iterations)
}

/// Complete-information Nash equilibria when platform 0's cost is public,
/// as `(high, low)`.
pub fn per_realization_benchmark(spec: &BayesianSpec) -> Result<(EquilibriumResult, EquilibriumResult)> {
    spec.validate()?;
    Ok((
        nash_equilibrium(&spec.realized_params(Realization::High))?,
        nash_equilibrium(&spec.realized_params(Realization::Low))?,
    ))
}

/// Platform 0's costs with and without its private information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoAdvantageReport {
    pub incomplete_high: f64,
    pub incomplete_low: f64,
    pub complete_high: f64,
    pub complete_low: f64,
    pub incomplete_average: f64,
    pub complete_average: f64,
    /// The high-cost platform is never better off hiding its cost.
    pub high_realization_worse: bool,
    /// Probability above which the average cost is worse under incomplete
    /// information, holding the per-realization costs at this spec's values.
    pub p_threshold: Option<f64>,
    /// Same threshold as a bracketed root of the frozen average-cost gap.
    pub p_threshold_bracketed: Option<f64>,
    /// Smallest point of a 0.01-step sweep where the frozen gap is nonnegative.
    pub p_threshold_sweep: Option<f64>,
    /// Average-cost gap with both games re-solved at each swept probability.
    pub resolved_gap_sweep: Vec<(f64, f64)>,
    /// Smallest positive swept probability with a nonnegative re-solved gap.
    pub resolved_threshold: Option<f64>,
}

pub const P_SWEEP_STEP: f64 = 0.01;

fn p_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| k as f64 * P_SWEEP_STEP)
}

pub fn info_advantage_report(spec: &BayesianSpec) -> Result<InfoAdvantageReport> {
    let bne = bayesian_nash(spec)?;
    let (bh, bl) = per_realization_benchmark(spec)?;
    let (ih, il) = (bne.platform1_costs.high, bne.platform1_costs.low);
    let (ch, cl) = (bh.per_platform_costs[0], bl.per_platform_costs[0]);
    let p = spec.p_high;

    let gain_low = cl - il;
    let loss_high = ih - ch;
    let den = gain_low + loss_high;
    let p_threshold = (den > 0.0).then(|| gain_low / den);

    let frozen_gap = |q: f64| q * loss_high - (1.0 - q) * gain_low;
    let p_threshold_bracketed = if frozen_gap(0.0) <= 0.0 && frozen_gap(1.0) >= 0.0 && den > 0.0 {
        let opts = SolveOptions { abs_tol: 1e-14, rel_tol: 1e-14, ..SolveOptions::default() };
        Some(solve_scalar_bracketed(frozen_gap, 0.0, 1.0, &opts)?)
    } else {
        None
    };
    let p_threshold_sweep = p_grid().find(|&q| frozen_gap(q) >= 0.0);

    let mut resolved_gap_sweep = Vec::with_capacity(101);
    for q in p_grid() {
        let s = spec.with_p_high(q);
        let b = bayesian_nash(&s)?;
        let inc = q * b.platform1_costs.high + (1.0 - q) * b.platform1_costs.low;
        let com = q * ch + (1.0 - q) * cl;
        resolved_gap_sweep.push((q, inc - com));
    }
    let resolved_threshold = resolved_gap_sweep.iter().find(|&&(q, g)| q > 0.0 && g >= 0.0).map(|&(q, _)| q);

    Ok(InfoAdvantageReport {
        incomplete_high: ih,
        incomplete_low: il,
        complete_high: ch,
        complete_low: cl,
        incomplete_average: p * ih + (1.0 - p) * il,
        complete_average: p * ch + (1.0 - p) * cl,
        high_realization_worse: ih >= ch - 1e-12 * ch.abs(),
        p_threshold,
        p_threshold_bracketed,
        p_threshold_sweep,
        resolved_gap_sweep,
        resolved_threshold,
    })
}

pub fn bayesian_poa_ratio(spec: &BayesianSpec) -> Result<PoaOutcome> {
    ratio_outcome(
        bayesian_nash(spec).map(|r| r.social),
        bayesian_social_optimum(spec).map(|r| r.social),
    )
}
