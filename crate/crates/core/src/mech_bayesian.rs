//! Approximate trigger mechanism when platform 0's cost is private.
//!
//! Platform 0 is asked for one rate regardless of its realization. The
//! reference profile λ̂ is the complete-information optimum with platform 0
//! at its mean cost; punishment is the Bayesian equilibrium. Cooperation
//! profiles are built as in [`crate::mech_complete`], with platform 0 bound by
//! the larger of its two realization-specific roots. When no single rate
//! deters both realizations the plan falls back to the Bayesian equilibrium.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::game_bayesian::{bayesian_nash, bayesian_social_optimum, BayesianEquilibriumResult};
use crate::game_complete::{social_optimum, EquilibriumResult};
use crate::mech_complete::{nominal_regime, quadratic_roots, Regime};
use crate::model::{
    bayesian_social_cost, cost_unchecked, BayesianRateProfile, BayesianSpec, RateProfile, Realization,
};

/// Rates a plan asks for: one pooled profile, or one per realization of platform 0's cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanRates {
    Single(RateProfile),
    PerRealization(BayesianRateProfile),
}

impl PlanRates {
    pub fn rates(&self, r: Realization) -> RateProfile {
        match self {
            PlanRates::Single(p) => p.clone(),
            PlanRates::PerRealization(b) => b.realized(r),
        }
    }

    pub fn as_bayesian(&self) -> BayesianRateProfile {
        match self {
            PlanRates::Single(p) => BayesianRateProfile::pooled(p),
            PlanRates::PerRealization(b) => b.clone(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            PlanRates::Single(p) => p.n(),
            PlanRates::PerRealization(b) => b.n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxThresholds {
    pub platform1_low: f64,
    pub platform1_high: f64,
    /// Thresholds of platforms 1..n in input order.
    pub incumbents: Vec<f64>,
    /// Realization whose platform-0 threshold is larger among those with positive probability.
    pub platform1_max_branch: Realization,
    /// Incumbent thresholds (sorted by cost) are nonincreasing and all below the platform-0 maximum.
    pub ordering_holds: bool,
}

impl ApproxThresholds {
    pub fn platform1(&self, r: Realization) -> f64 {
        match r {
            Realization::High => self.platform1_high,
            Realization::Low => self.platform1_low,
        }
    }

    pub fn platform1_max(&self) -> f64 {
        self.platform1(self.platform1_max_branch)
    }

    /// Per-platform thresholds used for the nominal regime.
    pub fn per_platform(&self) -> Vec<f64> {
        let mut v = vec![self.platform1_max()];
        v.extend_from_slice(&self.incumbents);
        v
    }

    pub fn max(&self) -> f64 {
        self.per_platform().into_iter().fold(0.0, f64::max)
    }
}

/// Smaller and larger no-deviation roots at the final profile, when real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub smaller: f64,
    pub larger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCooperationPlan {
    pub delta: f64,
    pub regime: Regime,
    pub nominal_regime: Regime,
    pub rates: PlanRates,
    pub binding: Vec<bool>,
    /// Realization whose root sets platform 0's rate, if platform 0 is binding.
    pub platform1_branch: Option<Realization>,
    pub roots_low: Option<RootPair>,
    pub roots_high: Option<RootPair>,
    pub thresholds: ApproxThresholds,
    pub reference_hat: RateProfile,
    pub reference_nash: BayesianRateProfile,
    pub iterations: usize,
}

impl ApproxCooperationPlan {
    /// The pooled profile, or `None` after a fallback.
    pub fn profile(&self) -> Option<&RateProfile> {
        match &self.rates {
            PlanRates::Single(p) => Some(p),
            PlanRates::PerRealization(_) => None,
        }
    }
}

const TIE_REL: f64 = 1e-12;
const FEAS_REL: f64 = 1e-10;
const FORM_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 1_000_000;

/// Solved references for one Bayesian spec.
#[derive(Debug, Clone)]
pub struct BayesianMechanism {
    pub spec: BayesianSpec,
    pub hat: EquilibriumResult,
    pub nash: BayesianEquilibriumResult,
    pub thresholds: ApproxThresholds,
}

impl BayesianMechanism {
    pub fn new(spec: &BayesianSpec) -> Result<Self> {
        spec.validate()?;
        let hat = approx_social_optimum_result(spec)?;
        let nash = bayesian_nash(spec)?;
        let mut m = BayesianMechanism {
            spec: spec.clone(),
            hat,
            nash,
            thresholds: ApproxThresholds {
                platform1_low: 0.0,
                platform1_high: 0.0,
                incumbents: vec![],
                platform1_max_branch: Realization::Low,
                ordering_holds: true,
            },
        };
        m.thresholds = m.compute_thresholds()?;
        Ok(m)
    }

    fn n(&self) -> usize {
        self.spec.n()
    }

    fn mu(&self) -> f64 {
        self.spec.mu
    }

    /// Realizations that occur with positive probability.
    pub fn live_realizations(&self) -> Vec<Realization> {
        Realization::BOTH.into_iter().filter(|&r| self.spec.prob(r) > 0.0).collect()
    }

    /// 1 + S*/μ with S* the incumbents' equilibrium total.
    fn a_star(&self) -> f64 {
        1.0 + self.nash.profile.incumbent_total() / self.mu()
    }

    /// p_H √c_H + (1 − p_H) √c_L.
    fn k_sqrt(&self) -> f64 {
        let s = &self.spec;
        s.p_high * s.c_high.sqrt() + (1.0 - s.p_high) * s.c_low.sqrt()
    }

    /// 1 + (E[λ_0*] + S* − λ_i*)/μ for incumbent `i >= 1`.
    fn a_star_incumbent(&self, i: usize) -> f64 {
        let b = &self.nash.profile;
        let e1 = b.expected_rate1(self.spec.p_high);
        1.0 + (e1 + b.incumbent_total() - b.incumbent_rates[i - 1]) / self.mu()
    }

    fn cost(&self, i: usize) -> f64 {
        if i == 0 {
            self.spec.mean_cost()
        } else {
            self.spec.incumbent_costs[i - 1]
        }
    }

    /// Platform 0's no-deviation roots in realization `r` against incumbents in `x`.
    pub fn platform1_roots(&self, r: Realization, x: &[f64], delta: f64) -> Option<(f64, f64)> {
        let c = self.spec.cost(r);
        let a_hat = 1.0 + x[1..].iter().sum::<f64>() / self.mu();
        let k = delta * self.spec.mean_cost() + (1.0 - delta) * c;
        let u = self.a_star().sqrt() * self.k_sqrt();
        let v = (a_hat * c).sqrt();
        let m = delta * u + (1.0 - delta) * v;
        // m² − k Â with the δ-free part cancelled analytically
        let disc = delta * (delta * u * u + 2.0 * (1.0 - delta) * u * v - (1.0 - delta) * v * v - self.spec.mean_cost() * a_hat);
        quadratic_roots(k, m, a_hat, disc)
    }

    /// Incumbent `i`'s no-deviation roots against the other rates in `x`.
    pub fn incumbent_roots(&self, i: usize, x: &[f64], delta: f64) -> Option<(f64, f64)> {
        let c = self.spec.incumbent_costs[i - 1];
        let a_tilde = 1.0 + (x.iter().sum::<f64>() - x[i]) / self.mu();
        let (s_star, s_tilde) = (self.a_star_incumbent(i).sqrt(), a_tilde.sqrt());
        let w = delta * s_star + (1.0 - delta) * s_tilde;
        let disc = c * delta * (s_star - s_tilde) * (w + s_tilde);
        quadratic_roots(c, c.sqrt() * w, a_tilde, disc)
    }

    fn compute_thresholds(&self) -> Result<ApproxThresholds> {
        let hat = &self.hat.profile.rates;
        let mu = self.mu();
        let s_hat: f64 = hat[1..].iter().sum();
        let a_hat = 1.0 + s_hat / mu;
        let c_hat = self.spec.mean_cost();
        let l1 = hat[0];
        let closed1 = |c: f64| {
            let num = c * l1 - 2.0 * (a_hat * c).sqrt() + a_hat / l1;
            let den = (c - c_hat) * l1 + 2.0 * self.a_star().sqrt() * self.k_sqrt() - 2.0 * (a_hat * c).sqrt();
            ratio_or_zero(num, den)
        };
        let mut p1 = [0.0; 2];
        for (k, r) in Realization::BOTH.into_iter().enumerate() {
            let closed = closed1(self.spec.cost(r));
            let by_cost = self.platform1_threshold_by_cost(r);
            check_forms(&format!("platform 0 ({})", r.as_str()), closed, by_cost)?;
            p1[k] = closed;
        }
        let mut incumbents = Vec::with_capacity(self.n() - 1);
        for i in 1..self.n() {
            let c = self.spec.incumbent_costs[i - 1];
            let a_i = 1.0 + (hat.iter().sum::<f64>() - hat[i]) / mu;
            let inv: f64 = hat.iter().map(|v| 1.0 / v).sum();
            let e_i = (inv - 1.0 / hat[i]) / mu;
            let num = ((c + e_i) / c).sqrt() + (c / (c + e_i)).sqrt() - 2.0;
            let den = 2.0 * (self.a_star_incumbent(i) / a_i).sqrt() - 2.0;
            let closed = ratio_or_zero(num, den);
            let by_cost = self.incumbent_threshold_by_cost(i);
            check_forms(&format!("platform {i}"), closed, by_cost)?;
            incumbents.push(closed);
        }
        let live = self.live_realizations();
        let platform1_max_branch = if live.len() == 1 {
            live[0]
        } else if p1[0] > p1[1] {
            Realization::High
        } else {
            Realization::Low
        };
        let pmax = match platform1_max_branch {
            Realization::High => p1[0],
            Realization::Low => p1[1],
        };
        let mut order: Vec<usize> = (0..incumbents.len()).collect();
        order.sort_by(|&a, &b| self.spec.incumbent_costs[a].total_cmp(&self.spec.incumbent_costs[b]));
        let sorted: Vec<f64> = order.iter().map(|&k| incumbents[k]).collect();
        let ordering_holds = sorted.windows(2).all(|w| w[0] >= w[1] - 1e-9)
            && sorted.first().is_none_or(|&t| t <= pmax + 1e-9);
        Ok(ApproxThresholds {
            platform1_high: p1[0],
            platform1_low: p1[1],
            incumbents,
            platform1_max_branch,
            ordering_holds,
        })
    }

    /// Platform-0 threshold written with one-shot costs instead of the closed form.
    fn platform1_threshold_by_cost(&self, r: Realization) -> f64 {
        let hat = &self.hat.profile.rates;
        let mu = self.mu();
        let s: f64 = hat[1..].iter().sum();
        let c = self.spec.cost(r);
        let b = ((1.0 + s / mu) / c).sqrt();
        let now_comply = cost_unchecked(hat[0], s, c, mu);
        let now_dev = cost_unchecked(b, s, c, mu);
        let future_comply = cost_unchecked(hat[0], s, self.spec.mean_cost(), mu);
        let punish = self.nash.platform1_costs.expected;
        ratio_or_zero(now_comply - now_dev, punish - now_dev - future_comply + now_comply)
    }

    fn incumbent_threshold_by_cost(&self, i: usize) -> f64 {
        let hat = &self.hat.profile.rates;
        let mu = self.mu();
        let rival = hat.iter().sum::<f64>() - hat[i];
        let c = self.spec.incumbent_costs[i - 1];
        let b = ((1.0 + rival / mu) / c).sqrt();
        let comply = cost_unchecked(hat[i], rival, c, mu);
        let dev = cost_unchecked(b, rival, c, mu);
        ratio_or_zero(comply - dev, self.nash.incumbent_costs[i - 1] - dev)
    }

    pub fn plan(&self, delta: f64) -> Result<ApproxCooperationPlan> {
        check_delta(delta)?;
        let n = self.n();
        let hat = self.hat.profile.rates.clone();
        let live = self.live_realizations();
        let mut x = hat.clone();
        let mut iterations = 0;
        let mut feasible = true;
        'outer: loop {
            let mut step = 0.0f64;
            let mut v = hat[0];
            for &r in &live {
                match self.platform1_roots(r, &x, delta) {
                    Some((s, _)) => v = v.max(s),
                    None => {
                        feasible = false;
                        break 'outer;
                    }
                }
            }
            step = step.max((v - x[0]).abs());
            x[0] = v;
            for i in 1..n {
                let Some((s, _)) = self.incumbent_roots(i, &x, delta) else {
                    feasible = false;
                    break 'outer;
                };
                let v = hat[i].max(s);
                step = step.max((v - x[i]).abs());
                x[i] = v;
            }
            iterations += 1;
            let scale = x.iter().copied().fold(1.0, f64::max);
            if step <= 1e-13 * scale {
                break;
            }
            if iterations >= MAX_SWEEPS {
                return Err(AoiError::NoConvergence {
                    context: "approximate cooperation profile".into(),
                    iterations,
                    residual: step,
                });
            }
        }

        let mut roots = [None, None];
        let mut binding = vec![false; n];
        let mut platform1_branch = None;
        if feasible {
            let mut best = hat[0] * (1.0 + TIE_REL);
            for (k, r) in Realization::BOTH.into_iter().enumerate() {
                let rp = self.platform1_roots(r, &x, delta).map(|(s, l)| RootPair { smaller: s, larger: l });
                roots[k] = rp;
                if !live.contains(&r) {
                    continue;
                }
                match rp {
                    Some(rp) => {
                        if x[0] > rp.larger * (1.0 + FEAS_REL) {
                            feasible = false;
                        }
                        if rp.smaller > best {
                            best = rp.smaller;
                            platform1_branch = Some(r);
                        }
                    }
                    None => feasible = false,
                }
            }
            binding[0] = platform1_branch.is_some();
            for i in 1..n {
                match self.incumbent_roots(i, &x, delta) {
                    Some((s, l)) => {
                        binding[i] = s > hat[i] * (1.0 + TIE_REL);
                        if x[i] > l * (1.0 + FEAS_REL) {
                            feasible = false;
                        }
                    }
                    None => feasible = false,
                }
            }
        }

        let per_platform = self.thresholds.per_platform();
        let nominal = nominal_regime(delta, &per_platform);
        if !feasible {
            return Ok(ApproxCooperationPlan {
                delta,
                regime: Regime::Fallback,
                nominal_regime: nominal,
                rates: PlanRates::PerRealization(self.nash.profile.clone()),
                binding: vec![true; n],
                platform1_branch: None,
                roots_low: roots[1],
                roots_high: roots[0],
                thresholds: self.thresholds.clone(),
                reference_hat: self.hat.profile.clone(),
                reference_nash: self.nash.profile.clone(),
                iterations,
            });
        }
        Ok(ApproxCooperationPlan {
            delta,
            regime: Regime::from_count(binding.iter().filter(|&&b| b).count(), n),
            nominal_regime: nominal,
            rates: PlanRates::Single(RateProfile::new(x)?),
            binding,
            platform1_branch,
            roots_low: roots[1],
            roots_high: roots[0],
            thresholds: self.thresholds.clone(),
            reference_hat: self.hat.profile.clone(),
            reference_nash: self.nash.profile.clone(),
            iterations,
        })
    }

    /// Expected one-shot cost of platform `i` under plan rates (platform 0: given realization).
    fn plan_cost(&self, i: usize, rates: &PlanRates, r: Option<Realization>) -> f64 {
        let mu = self.mu();
        match (i, r) {
            (0, Some(r)) => {
                let p = rates.rates(r);
                cost_unchecked(p.rates[0], p.rival_total(0), self.spec.cost(r), mu)
            }
            _ => self
                .live_realizations()
                .into_iter()
                .map(|q| {
                    let p = rates.rates(q);
                    let c = if i == 0 { self.spec.cost(q) } else { self.cost(i) };
                    self.spec.prob(q) * cost_unchecked(p.rates[i], p.rival_total(i), c, mu)
                })
                .sum(),
        }
    }

    /// Deviation value of platform `i` deviating once to rate `z` (best response when `None`).
    ///
    /// Platform 0 is evaluated in realization `r`; incumbents in expectation.
    pub fn deviation_value(
        &self,
        i: usize,
        r: Option<Realization>,
        rates: &PlanRates,
        delta: f64,
        z: Option<f64>,
    ) -> Result<DeviationValue> {
        check_delta(delta)?;
        if i >= self.n() {
            return Err(AoiError::InvalidIndex { index: i, n: self.n() });
        }
        let mu = self.mu();
        let w = delta / (1.0 - delta);
        let (comply, deviate, best) = if i == 0 {
            let r = r.ok_or_else(|| AoiError::domain("platform 0 needs a realization"))?;
            let p = rates.rates(r);
            let rival = p.rival_total(0);
            let c = self.spec.cost(r);
            let b = ((1.0 + rival / mu) / c).sqrt();
            let zz = z.unwrap_or(b);
            let now = self.plan_cost(0, rates, Some(r));
            let future = self.plan_cost(0, rates, None);
            (
                now + w * future,
                cost_unchecked(zz, rival, c, mu) + w * self.nash.platform1_costs.expected,
                b,
            )
        } else {
            let c = self.cost(i);
            let live = self.live_realizations();
            let exp_rival: f64 = live.iter().map(|&q| self.spec.prob(q) * rates.rates(q).rival_total(i)).sum();
            let b = ((1.0 + exp_rival / mu) / c).sqrt();
            let zz = z.unwrap_or(b);
            let now = self.plan_cost(i, rates, None);
            let dev: f64 = live
                .iter()
                .map(|&q| self.spec.prob(q) * cost_unchecked(zz, rates.rates(q).rival_total(i), c, mu))
                .sum();
            (now + w * now, dev + w * self.nash.incumbent_costs[i - 1], b)
        };
        Ok(DeviationValue {
            deviate,
            comply,
            best_deviation: best,
        })
    }
}

pub use crate::mech_complete::DeviationValue;

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if num.abs() <= 1e-14 && den.abs() <= 1e-12 {
        0.0
    } else {
        num / den
    }
}

fn check_forms(who: &str, closed: f64, by_cost: f64) -> Result<()> {
    if (closed - by_cost).abs() > FORM_TOL * closed.abs().max(1.0) {
        return Err(AoiError::Consistency(format!(
            "threshold forms disagree for {who}: {closed} vs {by_cost}"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(AoiError::domain(format!("discount factor must lie in [0, 1), got {delta}")))
    }
}

fn approx_social_optimum_result(spec: &BayesianSpec) -> Result<EquilibriumResult> {
    social_optimum(&spec.mean_params())
}

/// Optimum of the complete game with platform 0 at its mean cost.
pub fn approx_social_optimum(spec: &BayesianSpec) -> Result<RateProfile> {
    Ok(approx_social_optimum_result(spec)?.profile)
}

pub fn approx_thresholds(spec: &BayesianSpec) -> Result<ApproxThresholds> {
    Ok(BayesianMechanism::new(spec)?.thresholds)
}

pub fn approx_cooperation_profile(spec: &BayesianSpec, delta: f64) -> Result<ApproxCooperationPlan> {
    BayesianMechanism::new(spec)?.plan(delta)
}

/// Whether a high-cost platform 0 gains by playing the low-cost optimum rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatReport {
    /// False when one realization has zero probability.
    pub applicable: bool,
    pub comply_cost: f64,
    pub cheat_cost: f64,
    pub profitable: bool,
    /// (1/μ) Σ_{i≥1} 1/λ_i** at the Bayesian optimum.
    pub s_term: f64,
    /// √(c_H + S)·√(c_L + S).
    pub condition_lhs: f64,
    /// c_H.
    pub condition_rhs: f64,
    /// lhs <= rhs, equivalent to the cheat being unprofitable.
    pub condition_holds: bool,
}

pub fn cheat_incentive(spec: &BayesianSpec) -> Result<CheatReport> {
    let opt = bayesian_social_optimum(spec)?;
    let b = &opt.profile;
    let mu = spec.mu;
    let s_inc = b.incumbent_total();
    let comply_cost = cost_unchecked(b.rate1_high, s_inc, spec.c_high, mu);
    let cheat_cost = cost_unchecked(b.rate1_low, s_inc, spec.c_high, mu);
    let s_term = b.incumbent_rates.iter().map(|v| 1.0 / v).sum::<f64>() / mu;
    let lhs = (spec.c_high + s_term).sqrt() * (spec.c_low + s_term).sqrt();
    Ok(CheatReport {
        applicable: spec.p_high > 0.0 && spec.p_high < 1.0,
        comply_cost,
        cheat_cost,
        profitable: cheat_cost < comply_cost,
        s_term,
        condition_lhs: lhs,
        condition_rhs: spec.c_high,
        condition_holds: lhs <= spec.c_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxRatioRow {
    pub n: usize,
    /// Expected social cost of the pooled reference profile over the Bayesian optimum.
    pub coop_ratio: f64,
    /// Bayesian equilibrium social cost over the Bayesian optimum.
    pub nash_ratio: f64,
    /// n/(n−1); infinite for a single platform.
    pub bound: f64,
}

pub fn approximation_ratio_row(spec: &BayesianSpec) -> Result<ApproxRatioRow> {
    let hat = approx_social_optimum(spec)?;
    let opt = bayesian_social_optimum(spec)?;
    let ne = bayesian_nash(spec)?;
    let coop = bayesian_social_cost(&BayesianRateProfile::pooled(&hat), spec)?;
    let n = spec.n();
    Ok(ApproxRatioRow {
        n,
        coop_ratio: coop / opt.social,
        nash_ratio: ne.social / opt.social,
        bound: if n > 1 { n as f64 / (n as f64 - 1.0) } else { f64::INFINITY },
    })
}

pub fn approximation_ratio(family: &[BayesianSpec]) -> Result<Vec<ApproxRatioRow>> {
    family.iter().map(approximation_ratio_row).collect()
}

/// Specs with platform 0 drawing `(c_high, c_low, p_high)` and `n − 1` incumbents at `c_inc`.
pub fn symmetric_family(c_high: f64, c_low: f64, p_high: f64, c_inc: f64, mu: f64, ns: &[usize]) -> Result<Vec<BayesianSpec>> {
    ns.iter()
        .map(|&n| {
            if n < 2 {
                return Err(AoiError::domain("family members need at least two platforms"));
            }
            BayesianSpec::new(c_high, c_low, p_high, vec![c_inc; n - 1], mu)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech_complete::{linspace, CompleteMechanism};
    use crate::solvers::{solve_scalar_bracketed, SolveOptions};
    use proptest::prelude::*;

    fn spec(ch: f64, cl: f64, p: f64, inc: &[f64], mu: f64) -> BayesianSpec {
        BayesianSpec::new(ch, cl, p, inc.to_vec(), mu).unwrap()
    }

    fn fig4() -> BayesianSpec {
        spec(100.0, 10.0, 0.1, &[20.0], 0.1)
    }

    fn desk() -> BayesianSpec {
        spec(1.5, 0.5, 0.5, &[1.0], 1.0)
    }

    fn margins(m: &BayesianMechanism, plan: &ApproxCooperationPlan) -> Vec<f64> {
        let mut out = vec![];
        for r in m.live_realizations() {
            out.push(m.deviation_value(0, Some(r), &plan.rates, plan.delta, None).unwrap().margin());
        }
        for i in 1..m.spec.n() {
            out.push(m.deviation_value(i, None, &plan.rates, plan.delta, None).unwrap().margin());
        }
        out
    }

    /// Threshold by bisection on the discounted comparison at λ̂.
    fn threshold_oracle(m: &BayesianMechanism, i: usize, r: Option<Realization>) -> f64 {
        let rates = PlanRates::Single(m.hat.profile.clone());
        let f = |d: f64| m.deviation_value(i, r, &rates, d, None).unwrap().margin();
        solve_scalar_bracketed(f, 0.0, 0.999_999, &SolveOptions { abs_tol: 1e-14, ..SolveOptions::default() }).unwrap()
    }

    #[test]
    fn symmetric_mean_cost_reference() {
        let s = desk();
        let hat = approx_social_optimum(&s).unwrap();
        for v in &hat.rates {
            assert!((v - 1.0 / s.mean_cost().sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn fig4_reference_and_thresholds() {
        let m = BayesianMechanism::new(&fig4()).unwrap();
        let hat = &m.hat.profile.rates;
        assert!((hat[0] - hat[1]).abs() / hat[1] < 0.1);
        let t = &m.thresholds;
        assert!((t.incumbents[0] - 0.3).abs() <= 0.05, "{t:?}");
        assert!((t.platform1_low - 0.7).abs() <= 0.05, "{t:?}");
        assert_eq!(t.platform1_max_branch, Realization::Low);
        assert!(t.ordering_holds);
        assert!((t.platform1_low - threshold_oracle(&m, 0, Some(Realization::Low))).abs() < 1e-6);
        assert!((t.platform1_high - threshold_oracle(&m, 0, Some(Realization::High))).abs() < 1e-6);
        assert!((t.incumbents[0] - threshold_oracle(&m, 1, None)).abs() < 1e-6);
    }

    #[test]
    fn desk_thresholds_match_bisection() {
        let m = BayesianMechanism::new(&desk()).unwrap();
        let t = &m.thresholds;
        assert!((t.platform1_low - threshold_oracle(&m, 0, Some(Realization::Low))).abs() < 1e-6);
        assert!((t.platform1_high - threshold_oracle(&m, 0, Some(Realization::High))).abs() < 1e-6);
        assert!((t.incumbents[0] - threshold_oracle(&m, 1, None)).abs() < 1e-6);
    }

    #[test]
    fn degenerate_distributions_match_complete_mechanism() {
        for (p, r) in [(0.0, Realization::Low), (1.0, Realization::High)] {
            let s = spec(1.5, 0.5, p, &[1.0, 1.3], 1.0);
            let m = BayesianMechanism::new(&s).unwrap();
            let cm = CompleteMechanism::new(&s.realized_params(r)).unwrap();
            let ct = cm.thresholds();
            assert!((m.thresholds.platform1(r) - ct[0]).abs() < 1e-9);
            for i in 1..3 {
                assert!((m.thresholds.incumbents[i - 1] - ct[i]).abs() < 1e-9);
            }
            for d in linspace(0.0, 0.95, 20) {
                let a = m.plan(d).unwrap();
                let b = cm.plan(d).unwrap();
                let ap = a.profile().expect("no fallback when deterministic");
                for (x, y) in ap.rates.iter().zip(&b.profile.rates) {
                    assert!((x - y).abs() < 1e-9, "p={p} d={d}");
                }
                assert_eq!(a.regime, b.regime);
            }
            let row = approximation_ratio_row(&s).unwrap();
            assert!((row.coop_ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fig4_profiles() {
        let m = BayesianMechanism::new(&fig4()).unwrap();
        let hat = &m.hat.profile.rates;
        let plan = m.plan(0.9).unwrap();
        assert_eq!(plan.regime, Regime::Large);
        for (a, b) in plan.profile().unwrap().rates.iter().zip(hat) {
            assert!((a - b).abs() < 1e-12);
        }
        let plan = m.plan(0.5).unwrap();
        let p = plan.profile().unwrap();
        assert!((p.rates[1] - hat[1]).abs() < 1e-12);
        assert!(p.rates[0] > hat[0]);
        assert!(p.rates[0] < m.nash.profile.rate1_low);
        assert_eq!(plan.platform1_branch, Some(Realization::Low));
        let later = m.plan(0.6).unwrap();
        assert!(later.profile().unwrap().rates[0] < p.rates[0]);

        let plan = m.plan(1e-4).unwrap();
        assert_eq!(plan.regime, Regime::Fallback);
        assert_eq!(plan.rates, PlanRates::PerRealization(m.nash.profile.clone()));
    }

    #[test]
    fn certificates_on_grids() {
        for s in [fig4(), desk(), spec(3.0, 0.5, 0.3, &[1.0, 2.0], 0.7), spec(2.0, 1.0, 0.8, &[2.0], 3.0)] {
            let m = BayesianMechanism::new(&s).unwrap();
            let mut prev: Option<Vec<f64>> = None;
            for d in linspace(0.0, 0.99, 100) {
                let plan = m.plan(d).unwrap();
                for v in margins(&m, &plan) {
                    assert!(v >= -1e-8, "d={d} margin {v}");
                }
                if let Some(p) = plan.profile() {
                    for (i, x) in p.rates.iter().enumerate() {
                        assert!(*x >= m.hat.profile.rates[i] - 1e-12);
                    }
                    if let Some(prev) = &prev {
                        for (a, b) in p.rates.iter().zip(prev) {
                            assert!(*a <= b + 1e-10, "d={d}");
                        }
                    }
                    prev = Some(p.rates.clone());
                }
            }
        }
    }

    #[test]
    fn cheat_reports() {
        let r = cheat_incentive(&fig4()).unwrap();
        assert!(r.applicable);
        assert_eq!(r.profitable, !r.condition_holds);
        let r = cheat_incentive(&desk()).unwrap();
        assert!(r.profitable && !r.condition_holds);
        let r = cheat_incentive(&spec(2.0, 1.0, 0.5, &[1.0], 1e9)).unwrap();
        assert!(r.s_term < 1e-8 && r.condition_holds && !r.profitable);
        assert!(!cheat_incentive(&spec(2.0, 1.0, 1.0, &[1.0], 1.0)).unwrap().applicable);
    }

    #[test]
    fn fig5_family() {
        let fam = symmetric_family(1.5, 0.5, 0.5, 1.0, 1.0, &[2, 3, 4, 5, 6]).unwrap();
        let rows = approximation_ratio(&fam).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].coop_ratio < w[0].coop_ratio);
            assert!(w[1].nash_ratio > w[0].nash_ratio);
        }
        for r in &rows {
            assert!(r.coop_ratio >= 1.0 && r.coop_ratio < r.bound);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn under_sampling(cl in 0.05f64..5.0, gap in 0.01f64..10.0, p in 0.0f64..=1.0,
                          extra in proptest::collection::vec(0.0f64..5.0, 1..4), mu in 0.1f64..5.0) {
            let ch = cl + gap;
            let mean = p * ch + (1.0 - p) * cl;
            let inc: Vec<f64> = extra.iter().map(|e| mean + e).collect();
            let s = spec(ch, cl, p, &inc, mu);
            let hat = approx_social_optimum(&s).unwrap();
            let opt = bayesian_social_optimum(&s).unwrap();
            let e1 = opt.profile.expected_rate1(p);
            prop_assert!(hat.rates[0] <= e1 + 1e-8);
            for (a, b) in hat.rates[1..].iter().zip(&opt.profile.incumbent_rates) {
                prop_assert!(*a <= b + 1e-8);
            }
        }
    }
}
