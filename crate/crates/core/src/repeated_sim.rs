//! Round-by-round play of a trigger mechanism.
//!
//! Each round every platform observes its own AoI, infers the rivals' total
//! rate from it and compares that with what the plan allows. Any detected
//! deviation switches all platforms to the punishment rates for good.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::game_bayesian::{bayesian_nash, bayesian_social_optimum};
use crate::game_complete::nash_equilibrium;
use crate::mech_bayesian::{ApproxCooperationPlan, PlanRates};
use crate::mech_complete::CooperationPlan;
use crate::model::{aoi_unchecked, cost_unchecked, BayesianSpec, RateProfile, Realization, SystemParams};
use crate::queue_sim::{seeded_rng, simulate_with_rng, Horizon, QueueOptions, RNG_NAME};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Setting {
    Complete(SystemParams),
    Bayesian(BayesianSpec),
}

impl Setting {
    pub fn n(&self) -> usize {
        match self {
            Setting::Complete(p) => p.n(),
            Setting::Bayesian(s) => s.n(),
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            Setting::Complete(p) => p.mu,
            Setting::Bayesian(s) => s.mu,
        }
    }

    /// Outcomes of platform 0's cost with positive probability.
    fn outcomes(&self) -> Vec<(Option<Realization>, f64)> {
        match self {
            Setting::Complete(_) => vec![(None, 1.0)],
            Setting::Bayesian(s) => Realization::BOTH
                .into_iter()
                .filter(|&r| s.prob(r) > 0.0)
                .map(|r| (Some(r), s.prob(r)))
                .collect(),
        }
    }

    fn cost(&self, j: usize, r: Option<Realization>) -> f64 {
        match (self, r) {
            (Setting::Complete(p), _) => p.costs[j],
            (Setting::Bayesian(s), Some(r)) if j == 0 => s.cost(r),
            (Setting::Bayesian(s), None) if j == 0 => s.mean_cost(),
            (Setting::Bayesian(s), _) => s.incumbent_costs[j - 1],
        }
    }
}

/// A plan to cooperate on and the rates that punish a detected deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub setting: Setting,
    pub plan: PlanRates,
    pub punishment: PlanRates,
}

impl Mechanism {
    pub fn new(setting: Setting, plan: PlanRates, punishment: PlanRates) -> Result<Self> {
        let n = setting.n();
        if plan.n() != n || punishment.n() != n {
            return Err(AoiError::domain(format!(
                "plan has {} rates and punishment {}, setting has {n} platforms",
                plan.n(),
                punishment.n()
            )));
        }
        let split = |r: &PlanRates| matches!(r, PlanRates::PerRealization(_));
        if matches!(setting, Setting::Complete(_)) && (split(&plan) || split(&punishment)) {
            return Err(AoiError::domain("complete-information mechanisms use a single profile"));
        }
        Ok(Mechanism { setting, plan, punishment })
    }

    /// Cooperation plan under complete information, punished by the Nash equilibrium.
    pub fn complete(params: &SystemParams, plan: &CooperationPlan) -> Result<Self> {
        let nash = nash_equilibrium(params)?;
        Mechanism::new(
            Setting::Complete(params.clone()),
            PlanRates::Single(plan.profile.clone()),
            PlanRates::Single(nash.profile),
        )
    }

    /// Approximate plan, punished by the Bayesian equilibrium.
    pub fn bayesian(spec: &BayesianSpec, plan: &ApproxCooperationPlan) -> Result<Self> {
        Mechanism::new(
            Setting::Bayesian(spec.clone()),
            plan.rates.clone(),
            PlanRates::PerRealization(plan.reference_nash.clone()),
        )
    }

    /// Plan asking platform 0 for the Bayesian optimum rate of whichever cost it reports.
    pub fn per_realization_optimum(spec: &BayesianSpec) -> Result<Self> {
        let opt = bayesian_social_optimum(spec)?;
        let nash = bayesian_nash(spec)?;
        Mechanism::new(
            Setting::Bayesian(spec.clone()),
            PlanRates::PerRealization(opt.profile),
            PlanRates::PerRealization(nash.profile),
        )
    }

    pub fn n(&self) -> usize {
        self.setting.n()
    }

    fn rates(&self, punished: bool, r: Option<Realization>) -> RateProfile {
        let src = if punished { &self.punishment } else { &self.plan };
        src.rates(r.unwrap_or(Realization::Low))
    }

    /// Rival totals that platform `j` may observe while everyone complies.
    pub fn admissible_rival_totals(&self, j: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .setting
            .outcomes()
            .into_iter()
            .map(|(r, _)| self.rates(false, r).rival_total(j))
            .collect();
        v.dedup_by(|a, b| a == b);
        v
    }

    /// Platform `j`'s one-shot best response to the plan; platform 0 knows its realization.
    fn best_response(&self, j: usize, r: Option<Realization>) -> f64 {
        let mu = self.setting.mu();
        let rival = if j == 0 {
            self.rates(false, r).rival_total(0)
        } else {
            self.setting
                .outcomes()
                .into_iter()
                .map(|(q, p)| p * self.rates(false, q).rival_total(j))
                .sum()
        };
        ((1.0 + rival / mu) / self.setting.cost(j, r)).sqrt()
    }

    /// Expected one-shot cost of platform `j` at `rates_for(realization)`, conditioned on `given` for platform 0.
    fn expected_cost(&self, j: usize, given: Option<Realization>, rates_for: impl Fn(Option<Realization>) -> Vec<f64>) -> f64 {
        let mu = self.setting.mu();
        let outcomes = match (j, given) {
            (0, Some(r)) => vec![(Some(r), 1.0)],
            _ => self.setting.outcomes(),
        };
        outcomes
            .into_iter()
            .map(|(q, p)| {
                let x = rates_for(q);
                let total: f64 = x.iter().sum();
                p * cost_unchecked(x[j], total - x[j], self.setting.cost(j, q), mu)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationRate {
    Explicit(f64),
    BestResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Comply,
    /// Deviate in round `round` (1-based) only.
    OneShotDeviate { round: u64, rate: DeviationRate },
    /// Platform 0 plays its low-cost plan rate whenever its cost is high.
    BayesianCheat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub platform: usize,
    pub kind: StrategyKind,
}

impl Strategy {
    pub fn comply(platform: usize) -> Self {
        Strategy { platform, kind: StrategyKind::Comply }
    }

    pub fn deviate_once(platform: usize, round: u64, rate: DeviationRate) -> Self {
        Strategy { platform, kind: StrategyKind::OneShotDeviate { round, rate } }
    }

    pub fn cheat() -> Self {
        Strategy { platform: 0, kind: StrategyKind::BayesianCheat }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Monitoring {
    /// Exact AoI from the closed form; `tol` is relative to max(1, admissible total).
    Analytic { tol: f64 },
    /// AoI estimated by the queue simulator each round; `band` is relative.
    Noisy { events_per_round: u64, band: f64 },
}

impl Default for Monitoring {
    fn default() -> Self {
        Monitoring::Analytic { tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Flag any inferred rival total away from every admissible total.
    #[default]
    TwoSided,
    /// Flag only inferred totals above the largest admissible total.
    UpwardOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rounds: u64,
    pub delta: f64,
    pub seed: u64,
    pub monitoring: Monitoring,
    pub detection: Detection,
    /// Overrides the random cost draws; must cover every round.
    pub forced_draws: Option<Vec<Realization>>,
}

impl RunConfig {
    pub fn new(rounds: u64, delta: f64, seed: u64) -> Self {
        RunConfig {
            rounds,
            delta,
            seed,
            monitoring: Monitoring::default(),
            detection: Detection::default(),
            forced_draws: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Cooperate,
    Punish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub realization: Option<Realization>,
    pub phase: Phase,
    pub rates: Vec<f64>,
    pub aoi: Vec<f64>,
    pub observed_aoi: Vec<f64>,
    pub inferred_rival: Vec<f64>,
    pub costs: Vec<f64>,
    /// Cost averaged over platform 0's cost draw, with the round's phase and strategies fixed.
    pub expected_costs: Vec<f64>,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub rounds: u64,
    pub delta: f64,
    pub seed: u64,
    pub rng: String,
    pub trigger_round: Option<u64>,
    /// Σ_t δ^{t−1} cost_t over the simulated rounds.
    pub discounted: Vec<f64>,
    pub discounted_expected: Vec<f64>,
    pub average: Vec<f64>,
    pub average_expected: Vec<f64>,
    /// Expected per-round cost in the stationary continuation after the last round.
    pub steady: Vec<f64>,
    /// δ^T/(1 − δ) times `steady`.
    pub tail: Vec<f64>,
    /// `discounted_expected + tail`.
    pub infinite_horizon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub strategies: Vec<Strategy>,
    pub records: Vec<RoundRecord>,
    pub summary: SimSummary,
}

impl SimTrace {
    /// One row per round.
    ///
    /// Columns: round, realization, phase, detected, then `rate_j`, `aoi_j`,
    /// `observed_aoi_j`, `inferred_rival_j`, `cost_j`, `expected_cost_j` per platform.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.records.first().map_or(0, |r| r.rates.len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["round".to_string(), "realization".into(), "phase".into(), "detected".into()];
        for col in ["rate", "aoi", "observed_aoi", "inferred_rival", "cost", "expected_cost"] {
            header.extend((0..n).map(|j| format!("{col}_{j}")));
        }
        wr.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.round.to_string(),
                r.realization.map_or("none", |x| x.as_str()).to_string(),
                match r.phase {
                    Phase::Cooperate => "cooperate".into(),
                    Phase::Punish => "punish".into(),
                },
                r.detected.to_string(),
            ];
            for v in [&r.rates, &r.aoi, &r.observed_aoi, &r.inferred_rival, &r.costs, &r.expected_costs] {
                row.extend(v.iter().map(|x| format!("{x:.17e}")));
            }
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| AoiError::Domain(format!("csv write failed: {e}")))?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary).map_err(|e| AoiError::Domain(format!("json: {e}")))
    }
}

fn csv_err(e: csv::Error) -> AoiError {
    AoiError::Domain(format!("csv: {e}"))
}

/// Rivals' total rate implied by an observed AoI, own rate and bandwidth.
pub fn infer_rival_rate(observed_aoi: f64, own_rate: f64, mu: f64) -> Result<f64> {
    if !(own_rate > 0.0 && mu > 0.0 && observed_aoi.is_finite()) {
        return Err(AoiError::domain("own rate and mu must be positive and the AoI finite"));
    }
    let floor = 1.0 / own_rate + 1.0 / mu;
    if observed_aoi < floor * (1.0 - 1e-12) {
        return Err(AoiError::Consistency(format!(
            "observed AoI {observed_aoi} is below the single-platform floor {floor}"
        )));
    }
    Ok(rival_from_aoi(observed_aoi, own_rate, mu).max(0.0))
}

fn rival_from_aoi(observed: f64, own: f64, mu: f64) -> f64 {
    (observed - 1.0 / own) * own * mu - own
}

fn validate_strategies(mech: &Mechanism, strategies: &[Strategy]) -> Result<()> {
    let n = mech.n();
    let mut seen = vec![false; n];
    for s in strategies {
        if s.platform >= n {
            return Err(AoiError::InvalidIndex { index: s.platform, n });
        }
        if std::mem::replace(&mut seen[s.platform], true) {
            return Err(AoiError::domain(format!("platform {} has more than one strategy", s.platform)));
        }
        match s.kind {
            StrategyKind::OneShotDeviate { round, rate } => {
                if round == 0 {
                    return Err(AoiError::domain("deviation rounds start at 1"));
                }
                if let DeviationRate::Explicit(z) = rate {
                    if !(z.is_finite() && z > 0.0) {
                        return Err(AoiError::domain(format!("deviation rate must be positive, got {z}")));
                    }
                }
            }
            StrategyKind::BayesianCheat => {
                if s.platform != 0 || !matches!(mech.setting, Setting::Bayesian(_)) {
                    return Err(AoiError::domain("the cheat policy belongs to platform 0 in a Bayesian setting"));
                }
            }
            StrategyKind::Comply => {}
        }
    }
    Ok(())
}

/// Rates actually played in `round` by everyone, given the phase and cost draw.
fn played(mech: &Mechanism, strategies: &[Strategy], round: u64, punished: bool, r: Option<Realization>) -> Vec<f64> {
    let mut x = mech.rates(punished, r).rates;
    if punished {
        return x;
    }
    for s in strategies {
        match s.kind {
            StrategyKind::Comply => {}
            StrategyKind::OneShotDeviate { round: k, rate } if k == round => {
                x[s.platform] = match rate {
                    DeviationRate::Explicit(z) => z,
                    DeviationRate::BestResponse => mech.best_response(s.platform, r),
                };
            }
            StrategyKind::OneShotDeviate { .. } => {}
            StrategyKind::BayesianCheat => {
                if r == Some(Realization::High) {
                    x[0] = mech.plan.rates(Realization::Low).rates[0];
                }
            }
        }
    }
    x
}

/// Plays `cfg.rounds` rounds of the mechanism with the given strategies.
pub fn run(mech: &Mechanism, strategies: &[Strategy], cfg: &RunConfig) -> Result<SimTrace> {
    if cfg.rounds == 0 {
        return Err(AoiError::domain("at least one round is required"));
    }
    if !(cfg.delta.is_finite() && (0.0..1.0).contains(&cfg.delta)) {
        return Err(AoiError::domain(format!("discount factor must lie in [0, 1), got {}", cfg.delta)));
    }
    validate_strategies(mech, strategies)?;
    if let Some(f) = &cfg.forced_draws {
        if (f.len() as u64) < cfg.rounds {
            return Err(AoiError::domain("forced draws must cover every round"));
        }
    }
    let n = mech.n();
    let mu = mech.setting.mu();
    let mut draw_rng = seeded_rng(cfg.seed, 0);
    let mut noise_rng = seeded_rng(cfg.seed, 1);
    let admissible: Vec<Vec<f64>> = (0..n).map(|j| mech.admissible_rival_totals(j)).collect();

    let mut records = Vec::with_capacity(cfg.rounds as usize);
    let mut punished = false;
    let mut trigger_round = None;
    for t in 1..=cfg.rounds {
        let realization = match &mech.setting {
            Setting::Complete(_) => None,
            Setting::Bayesian(s) => Some(match &cfg.forced_draws {
                Some(f) => f[(t - 1) as usize],
                None => {
                    if draw_rng.random_bool(s.p_high) {
                        Realization::High
                    } else {
                        Realization::Low
                    }
                }
            }),
        };
        let x = played(mech, strategies, t, punished, realization);
        let total: f64 = x.iter().sum();
        let aoi: Vec<f64> = (0..n).map(|j| aoi_unchecked(x[j], total - x[j], mu)).collect();
        let costs: Vec<f64> = (0..n)
            .map(|j| aoi[j] + mech.setting.cost(j, realization) * x[j])
            .collect();
        let expected_costs: Vec<f64> = (0..n)
            .map(|j| mech.expected_cost(j, None, |q| played(mech, strategies, t, punished, q)))
            .collect();
        let observed_aoi = match cfg.monitoring {
            Monitoring::Analytic { .. } => aoi.clone(),
            Monitoring::Noisy { events_per_round, .. } => {
                let est = simulate_with_rng(
                    &RateProfile::new(x.clone())?,
                    mu,
                    Horizon::Events(events_per_round),
                    &mut noise_rng,
                    cfg.seed,
                    &QueueOptions::default(),
                )?;
                est.estimates()
            }
        };
        let inferred_rival: Vec<f64> = (0..n).map(|j| rival_from_aoi(observed_aoi[j], x[j], mu)).collect();
        let detected = !punished
            && (0..n).any(|j| {
                let l = inferred_rival[j];
                let tol = |a: f64| match cfg.monitoring {
                    Monitoring::Analytic { tol } => tol * a.max(1.0),
                    Monitoring::Noisy { band, .. } => band * a.max(x[j]),
                };
                match cfg.detection {
                    Detection::TwoSided => admissible[j].iter().all(|&a| (l - a).abs() > tol(a)),
                    Detection::UpwardOnly => {
                        let hi = admissible[j].iter().copied().fold(f64::MIN, f64::max);
                        l > hi + tol(hi)
                    }
                }
            });
        records.push(RoundRecord {
            round: t,
            realization,
            phase: if punished { Phase::Punish } else { Phase::Cooperate },
            rates: x,
            aoi,
            observed_aoi,
            inferred_rival,
            costs,
            expected_costs,
            detected,
        });
        if detected {
            punished = true;
            trigger_round = Some(t);
        }
    }

    let d = cfg.delta;
    let mut discounted = vec![0.0; n];
    let mut discounted_expected = vec![0.0; n];
    let mut w = 1.0;
    for r in &records {
        for j in 0..n {
            discounted[j] += w * r.costs[j];
            discounted_expected[j] += w * r.expected_costs[j];
        }
        w *= d;
    }
    let t_f = records.len() as f64;
    let average: Vec<f64> = (0..n).map(|j| records.iter().map(|r| r.costs[j]).sum::<f64>() / t_f).collect();
    let average_expected: Vec<f64> =
        (0..n).map(|j| records.iter().map(|r| r.expected_costs[j]).sum::<f64>() / t_f).collect();
    // rounds after T: no further one-shot deviations, cheat policy persists
    let continuing: Vec<Strategy> = strategies
        .iter()
        .filter(|s| matches!(s.kind, StrategyKind::BayesianCheat))
        .copied()
        .collect();
    let steady: Vec<f64> = (0..n)
        .map(|j| mech.expected_cost(j, None, |q| played(mech, &continuing, cfg.rounds + 1, punished, q)))
        .collect();
    let tail_w = d.powf(t_f) / (1.0 - d);
    let tail: Vec<f64> = steady.iter().map(|s| tail_w * s).collect();
    let infinite_horizon = discounted_expected.iter().zip(&tail).map(|(a, b)| a + b).collect();
    Ok(SimTrace {
        strategies: strategies.to_vec(),
        records,
        summary: SimSummary {
            rounds: cfg.rounds,
            delta: d,
            seed: cfg.seed,
            rng: RNG_NAME.into(),
            trigger_round,
            discounted,
            discounted_expected,
            average,
            average_expected,
            steady,
            tail,
            infinite_horizon,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub platform: usize,
    pub realization: Option<Realization>,
    pub best_response: f64,
    pub margin_at_best_response: f64,
    pub worst_margin: f64,
    pub worst_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub delta: f64,
    pub entries: Vec<CertificateEntry>,
    pub worst_margin: f64,
    /// Worst margin is at least −1e-8.
    pub certified: bool,
}

pub const CERT_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_POINTS: usize = 1000;

/// Discounted deviation margins of every platform (and every cost draw of platform 0).
///
/// A deviation to `z` for one round is compared with compliance forever; the
/// rates tried are the best response and `grid_points` log-spaced values in
/// [b/100, 100b].
pub fn certify_no_deviation(mech: &Mechanism, delta: f64, grid_points: usize) -> Result<Certificate> {
    if !(delta.is_finite() && (0.0..1.0).contains(&delta)) {
        return Err(AoiError::domain(format!("discount factor must lie in [0, 1), got {delta}")));
    }
    let n = mech.n();
    let mu = mech.setting.mu();
    let w = delta / (1.0 - delta);
    let plan_for = |q: Option<Realization>| mech.rates(false, q).rates;
    let punish_for = |q: Option<Realization>| mech.rates(true, q).rates;
    let mut entries = Vec::new();
    for j in 0..n {
        let given: Vec<Option<Realization>> = if j == 0 {
            mech.setting.outcomes().into_iter().map(|(r, _)| r).collect()
        } else {
            vec![None]
        };
        for r in given {
            let now = mech.expected_cost(j, r, plan_for);
            let future = mech.expected_cost(j, None, plan_for);
            let punish = mech.expected_cost(j, None, punish_for);
            let comply = now + w * future;
            let outcomes = match r {
                Some(_) => vec![(r, 1.0)],
                None => mech.setting.outcomes(),
            };
            let dev_now = |z: f64| -> f64 {
                outcomes
                    .iter()
                    .map(|&(q, p)| {
                        let x = plan_for(q);
                        let rival = x.iter().sum::<f64>() - x[j];
                        p * cost_unchecked(z, rival, mech.setting.cost(j, q), mu)
                    })
                    .sum()
            };
            let margin = |z: f64| dev_now(z) + w * punish - comply;
            let b = mech.best_response(j, r);
            let at_b = margin(b);
            let (mut worst, mut worst_rate) = (at_b, b);
            if grid_points > 1 {
                let (lo, hi) = ((b / 100.0).ln(), (b * 100.0).ln());
                for k in 0..grid_points {
                    let z = (lo + (hi - lo) * k as f64 / (grid_points - 1) as f64).exp();
                    let m = margin(z);
                    if m < worst {
                        worst = m;
                        worst_rate = z;
                    }
                }
            }
            entries.push(CertificateEntry {
                platform: j,
                realization: r,
                best_response: b,
                margin_at_best_response: at_b,
                worst_margin: worst,
                worst_rate,
            });
        }
    }
    let worst_margin = entries.iter().map(|e| e.worst_margin).fold(f64::INFINITY, f64::min);
    Ok(Certificate {
        delta,
        entries,
        worst_margin,
        certified: worst_margin >= -CERT_TOL,
    })
}
