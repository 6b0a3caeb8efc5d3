//! Trigger mechanism under complete information: discount-factor thresholds,
//! cooperation profiles and the social-cost ratio curve.
//!
//! A cooperation profile λ̃(δ) is the least fixed point of
//! `λ_i = max(λ_i**, r_i(λ_{-i}))`, where `r_i` is the smaller root of
//! platform i's no-deviation quadratic against grim punishment at the Nash
//! equilibrium. Platforms whose root exceeds the optimum are *binding*.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::game_complete::{nash_equilibrium, social_optimum, EquilibriumResult};
use crate::model::{cost_unchecked, platform_cost, social_cost, RateProfile, SystemParams};

/// How many platforms the discount factor leaves unable to hold the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "binding", rename_all = "lowercase")]
pub enum Regime {
    /// Every platform holds the optimum.
    Large,
    /// The given number of platforms sit above their optimum rate.
    Medium(usize),
    /// Every platform sits above its optimum rate.
    Small,
    /// No pooled profile deters every deviation; the one-shot equilibrium is played.
    Fallback,
}

impl Regime {
    pub fn from_count(binding: usize, n: usize) -> Self {
        if binding == 0 {
            Regime::Large
        } else if binding >= n {
            Regime::Small
        } else {
            Regime::Medium(binding)
        }
    }

    pub fn label(&self) -> String {
        match self {
            Regime::Large => "large".into(),
            Regime::Medium(j) => format!("medium({j})"),
            Regime::Small => "small".into(),
            Regime::Fallback => "fallback".into(),
        }
    }
}

/// Regime implied purely by where δ falls among the thresholds; ties count as cooperative.
pub fn nominal_regime(delta: f64, thresholds: &[f64]) -> Regime {
    let above = thresholds.iter().filter(|&&t| t > delta).count();
    Regime::from_count(above, thresholds.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperationPlan {
    pub delta: f64,
    pub regime: Regime,
    pub nominal_regime: Regime,
    pub profile: RateProfile,
    /// Per platform: true when its no-deviation root lies above its optimum rate.
    pub binding: Vec<bool>,
    pub thresholds: Vec<f64>,
    pub reference_nash: RateProfile,
    pub reference_optimum: RateProfile,
    /// Input indices ordered by nondecreasing cost.
    pub sort_order: Vec<usize>,
    pub iterations: usize,
}

/// Both algebraic forms of a platform's threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdForms {
    /// (b − λ**)² / (2λ**(λ* − b)) with b the best response to the optimum.
    pub closed: f64,
    /// (π(λ**) − π(b)) / (π* − π(b)).
    pub cost_ratio: f64,
}

const TIE_REL: f64 = 1e-12;
const FORM_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 1_000_000;

/// Solved references shared by every δ for one parameter set.
#[derive(Debug, Clone)]
pub struct CompleteMechanism {
    pub params: SystemParams,
    pub nash: EquilibriumResult,
    pub optimum: EquilibriumResult,
    pub forms: Vec<ThresholdForms>,
}

impl CompleteMechanism {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let nash = nash_equilibrium(params)?;
        let optimum = social_optimum(params)?;
        let forms = (0..params.n())
            .map(|i| threshold_forms(i, params, &nash.profile, &optimum.profile))
            .collect::<Vec<_>>();
        for (i, f) in forms.iter().enumerate() {
            if (f.closed - f.cost_ratio).abs() > FORM_TOL * f.closed.abs().max(1.0) {
                return Err(AoiError::Consistency(format!(
                    "threshold forms disagree for platform {i}: {} vs {}",
                    f.closed, f.cost_ratio
                )));
            }
        }
        Ok(CompleteMechanism {
            params: params.clone(),
            nash,
            optimum,
            forms,
        })
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.forms.iter().map(|f| f.closed).collect()
    }

    pub fn max_threshold(&self) -> f64 {
        self.thresholds().into_iter().fold(0.0, f64::max)
    }

    /// Smaller and larger no-deviation roots for platform `i` given the others' rates in `x`.
    pub fn roots(&self, i: usize, x: &[f64], delta: f64) -> Option<(f64, f64)> {
        let p = &self.params;
        let rival: f64 = x.iter().sum::<f64>() - x[i];
        let b2 = (1.0 + rival / p.mu) / p.costs[i];
        let b = b2.sqrt();
        let m = delta * self.nash.profile.rates[i] + (1.0 - delta) * b;
        quadratic_roots(1.0, m, b2, delta * (self.nash.profile.rates[i] - b) * (m + b))
    }

    pub fn plan(&self, delta: f64) -> Result<CooperationPlan> {
        check_delta(delta)?;
        let n = self.params.n();
        let opt = &self.optimum.profile.rates;
        let mut x = opt.clone();
        let mut iterations = 0;
        loop {
            // Gauss-Seidel sweep; iterates rise monotonically to the least fixed point
            let mut step = 0.0f64;
            for i in 0..n {
                let (r, _) = self.roots(i, &x, delta).ok_or_else(|| {
                    AoiError::Infeasible(format!("platform {i} has no deterring rate at delta={delta}"))
                })?;
                let v = opt[i].max(r);
                step = step.max((v - x[i]).abs());
                x[i] = v;
            }
            let scale = x.iter().copied().fold(1.0, f64::max);
            iterations += 1;
            if step <= 1e-13 * scale {
                break;
            }
            if iterations >= MAX_SWEEPS {
                return Err(AoiError::NoConvergence {
                    context: "cooperation profile".into(),
                    iterations,
                    residual: step,
                });
            }
        }
        let binding: Vec<bool> = (0..n)
            .map(|i| {
                let (r, _) = self.roots(i, &x, delta).unwrap_or((x[i], x[i]));
                r > opt[i] * (1.0 + TIE_REL)
            })
            .collect();
        let thresholds = self.thresholds();
        Ok(CooperationPlan {
            delta,
            regime: Regime::from_count(binding.iter().filter(|&&b| b).count(), n),
            nominal_regime: nominal_regime(delta, &thresholds),
            profile: RateProfile::new(x)?,
            binding,
            thresholds,
            reference_nash: self.nash.profile.clone(),
            reference_optimum: self.optimum.profile.clone(),
            sort_order: self.params.sort_order(),
            iterations,
        })
    }

    /// Discounted costs of deviating optimally once versus complying forever.
    pub fn deviation_value(&self, i: usize, coop: &RateProfile, delta: f64) -> Result<DeviationValue> {
        deviation_value_with(i, coop, &self.params, delta, self.nash.per_platform_costs[i])
    }
}

/// Smaller and larger roots of `a x² − 2 m x + q = 0`, or `None` when the
/// quadratic has no real root.
///
/// `disc` is `m² − a q`, passed in so callers can use a cancellation-free
/// form; a discriminant within rounding of zero is clamped.
pub(crate) fn quadratic_roots(a: f64, m: f64, q: f64, disc: f64) -> Option<(f64, f64)> {
    let disc = if disc < 0.0 {
        if disc >= -1e-12 * m * m {
            0.0
        } else {
            return None;
        }
    } else {
        disc
    };
    let sq = disc.sqrt();
    if m + sq <= 0.0 {
        return None;
    }
    Some((q / (m + sq), (m + sq) / a))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(AoiError::domain(format!("discount factor must lie in [0, 1), got {delta}")))
    }
}

/// Both threshold forms for platform `i` given the Nash and optimal profiles.
pub fn threshold_forms(i: usize, params: &SystemParams, nash: &RateProfile, opt: &RateProfile) -> ThresholdForms {
    let c = params.costs[i];
    let mu = params.mu;
    let lo = opt.rates[i];
    let ls = nash.rates[i];
    let rival = opt.rival_total(i);
    let b = ((1.0 + rival / mu) / c).sqrt();
    let scale = lo.max(ls);
    if (b - lo).abs() <= 1e-12 * scale && (ls - b).abs() <= 1e-12 * scale {
        // no externality: optimum, best response and equilibrium coincide
        return ThresholdForms { closed: 0.0, cost_ratio: 0.0 };
    }
    let closed = (b - lo).powi(2) / (2.0 * lo * (ls - b));
    let pi_opt = cost_unchecked(lo, rival, c, mu);
    let pi_dev = cost_unchecked(b, rival, c, mu);
    let pi_nash = cost_unchecked(ls, nash.rival_total(i), c, mu);
    ThresholdForms {
        closed,
        cost_ratio: (pi_opt - pi_dev) / (pi_nash - pi_dev),
    }
}

/// Smallest discount factor at which platform `i` keeps to the social optimum.
pub fn delta_threshold(i: usize, params: &SystemParams) -> Result<f64> {
    params.check_index(i)?;
    Ok(CompleteMechanism::new(params)?.forms[i].closed)
}

pub fn delta_thresholds(params: &SystemParams) -> Result<Vec<f64>> {
    Ok(CompleteMechanism::new(params)?.thresholds())
}

/// Discounted long-run costs of the best one-shot deviation (`deviate`) and
/// of perpetual compliance (`comply`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationValue {
    pub deviate: f64,
    pub comply: f64,
    pub best_deviation: f64,
}

impl DeviationValue {
    /// Nonnegative when compliance is weakly preferred.
    pub fn margin(&self) -> f64 {
        self.deviate - self.comply
    }
}

pub fn deviation_value(i: usize, coop: &RateProfile, params: &SystemParams, delta: f64) -> Result<DeviationValue> {
    params.check_index(i)?;
    let nash = nash_equilibrium(params)?;
    deviation_value_with(i, coop, params, delta, nash.per_platform_costs[i])
}

fn deviation_value_with(i: usize, coop: &RateProfile, params: &SystemParams, delta: f64, punish: f64) -> Result<DeviationValue> {
    check_delta(delta)?;
    let rival = coop.rival_total(i);
    let c = params.costs[i];
    let b = ((1.0 + rival / params.mu) / c).sqrt();
    let comply_now = platform_cost(i, coop, params)?;
    let dev_now = cost_unchecked(b, rival, c, params.mu);
    let w = delta / (1.0 - delta);
    Ok(DeviationValue {
        deviate: dev_now + w * punish,
        comply: comply_now + w * comply_now,
        best_deviation: b,
    })
}

pub fn cooperation_profile(params: &SystemParams, delta: f64) -> Result<CooperationPlan> {
    CompleteMechanism::new(params)?.plan(delta)
}

/// Social cost of the cooperation profile relative to the optimum, per δ.
pub fn social_cost_ratio_curve(params: &SystemParams, delta_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mech = CompleteMechanism::new(params)?;
    delta_grid
        .iter()
        .map(|&d| {
            let plan = mech.plan(d)?;
            Ok((d, social_cost(&plan.profile, params)? / mech.optimum.social))
        })
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}
