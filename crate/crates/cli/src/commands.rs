use aoi_core::game_bayesian::{bayesian_poa_ratio, bayesian_social_optimum, info_advantage_report};
use aoi_core::game_complete::poa_ratio;
use aoi_core::mech_bayesian::{approximation_ratio, cheat_incentive, symmetric_family, BayesianMechanism};
use aoi_core::mech_complete::CompleteMechanism;
use aoi_core::model::{bayesian_social_cost, social_cost};
use aoi_core::queue_sim::{simulate as simulate_queue, Horizon, QueueOptions};
use aoi_core::repeated_sim::{run, RunConfig};
use aoi_core::{BayesianSpec, Mechanism, PoaOutcome, RateProfile, SimTrace, SystemParams};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde_json::{json, Value};

use crate::config::{FamilyConfig, MechanismChoice, Mode, ScenarioConfig, Sweep};
use crate::table::{indexed, Cell, Report};
use crate::CliError;

pub struct Ctx {
    pub seed: u64,
    pub pool: ThreadPool,
}

fn poa_json(p: PoaOutcome) -> Value {
    match p.value() {
        Some(v) => json!(v),
        None => json!("unbounded"),
    }
}

fn family(cfg: &ScenarioConfig) -> Result<Option<(Vec<BayesianSpec>, &FamilyConfig)>, CliError> {
    match &cfg.family {
        None => Ok(None),
        Some(f) => Ok(Some((
            symmetric_family(f.c_high, f.c_low, f.p_high, f.incumbent_cost, f.mu, &f.sizes)?,
            f,
        ))),
    }
}

fn family_table(specs: &[BayesianSpec], ctx: &Ctx) -> Result<Report, CliError> {
    let rows = ctx.pool.install(|| {
        specs
            .par_iter()
            .map(|s| approximation_ratio(std::slice::from_ref(s)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut rep = Report::new(vec!["n".into(), "coop_ratio".into(), "nash_ratio".into(), "bound".into()]);
    for r in rows.into_iter().flatten() {
        rep.push(vec![r.n.into(), r.coop_ratio.into(), r.nash_ratio.into(), r.bound.into()])?;
    }
    Ok(rep)
}

pub fn solve(cfg: &ScenarioConfig, ctx: &Ctx) -> Result<Report, CliError> {
    match cfg.mode {
        Mode::Complete => solve_complete(&cfg.system_params()?),
        Mode::Bayesian => match family(cfg)? {
            Some((specs, _)) if cfg.spec.is_none() => {
                let mut rep = family_table(&specs, ctx)?;
                rep.summary = json!({ "mode": "bayesian", "table": "family" });
                Ok(rep)
            }
            _ => solve_bayesian(&cfg.bayesian_spec()?),
        },
    }
}

fn solve_complete(p: &SystemParams) -> Result<Report, CliError> {
    let m = CompleteMechanism::new(p)?;
    let mut rep = Report::new(
        ["platform", "cost", "nash_rate", "optimum_rate", "nash_cost", "optimum_cost", "threshold"]
            .map(String::from)
            .to_vec(),
    );
    let t = m.thresholds();
    for j in 0..p.n() {
        rep.push(vec![
            j.into(),
            p.costs[j].into(),
            m.nash.profile.rates[j].into(),
            m.optimum.profile.rates[j].into(),
            m.nash.per_platform_costs[j].into(),
            m.optimum.per_platform_costs[j].into(),
            t[j].into(),
        ])?;
    }
    rep.summary = json!({
        "mode": "complete",
        "mu": p.mu,
        "nash_social": m.nash.social,
        "optimum_social": m.optimum.social,
        "poa": poa_json(poa_ratio(p)?),
        "max_threshold": m.max_threshold(),
    });
    Ok(rep)
}

fn solve_bayesian(s: &BayesianSpec) -> Result<Report, CliError> {
    let bm = BayesianMechanism::new(s)?;
    let opt = bayesian_social_optimum(s)?;
    let ne = &bm.nash;
    let hat = &bm.hat.profile.rates;
    let t = &bm.thresholds;
    let mut rep = Report::new(
        [
            "platform",
            "realization",
            "cost",
            "nash_rate",
            "optimum_rate",
            "approx_rate",
            "nash_cost",
            "optimum_cost",
            "threshold",
        ]
        .map(String::from)
        .to_vec(),
    );
    for r in aoi_core::Realization::BOTH {
        let (nc, oc) = match r {
            aoi_core::Realization::High => (ne.platform1_costs.high, opt.platform1_costs.high),
            aoi_core::Realization::Low => (ne.platform1_costs.low, opt.platform1_costs.low),
        };
        rep.push(vec![
            0usize.into(),
            r.as_str().into(),
            s.cost(r).into(),
            ne.profile.rate1(r).into(),
            opt.profile.rate1(r).into(),
            hat[0].into(),
            nc.into(),
            oc.into(),
            t.platform1(r).into(),
        ])?;
    }
    for i in 1..s.n() {
        rep.push(vec![
            i.into(),
            "none".into(),
            s.incumbent_costs[i - 1].into(),
            ne.profile.incumbent_rates[i - 1].into(),
            opt.profile.incumbent_rates[i - 1].into(),
            hat[i].into(),
            ne.incumbent_costs[i - 1].into(),
            opt.incumbent_costs[i - 1].into(),
            t.incumbents[i - 1].into(),
        ])?;
    }
    let info = info_advantage_report(s)?;
    let cheat = cheat_incentive(s)?;
    rep.summary = json!({
        "mode": "bayesian",
        "mu": s.mu,
        "nash_social": ne.social,
        "optimum_social": opt.social,
        "poa": poa_json(bayesian_poa_ratio(s)?),
        "platform0_threshold_branch": t.platform1_max_branch.as_str(),
        "threshold_ordering_holds": t.ordering_holds,
        "info_advantage": info,
        "cheat": cheat,
    });
    Ok(rep)
}

pub fn thresholds(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    match cfg.mode {
        Mode::Complete => {
            let p = cfg.system_params()?;
            let m = CompleteMechanism::new(&p)?;
            let mut rep = Report::new(["platform", "cost", "threshold", "threshold_cost_form"].map(String::from).to_vec());
            for (j, f) in m.forms.iter().enumerate() {
                rep.push(vec![j.into(), p.costs[j].into(), f.closed.into(), f.cost_ratio.into()])?;
            }
            rep.summary = json!({ "mode": "complete", "max_threshold": m.max_threshold() });
            Ok(rep)
        }
        Mode::Bayesian => {
            let s = cfg.bayesian_spec()?;
            let bm = BayesianMechanism::new(&s)?;
            let t = &bm.thresholds;
            let mut rep = Report::new(["platform", "realization", "cost", "threshold"].map(String::from).to_vec());
            for r in aoi_core::Realization::BOTH {
                rep.push(vec![0usize.into(), r.as_str().into(), s.cost(r).into(), t.platform1(r).into()])?;
            }
            for (k, v) in t.incumbents.iter().enumerate() {
                rep.push(vec![(k + 1).into(), "none".into(), s.incumbent_costs[k].into(), (*v).into()])?;
            }
            rep.summary = json!({
                "mode": "bayesian",
                "platform0_branch": t.platform1_max_branch.as_str(),
                "max_threshold": t.max(),
                "ordering_holds": t.ordering_holds,
            });
            Ok(rep)
        }
    }
}

/// Appends a `monotone` flag: rates nonincreasing relative to the previous row.
fn flag_monotone(rows: Vec<(Vec<f64>, Vec<Cell>)>, rep: &mut Report) -> Result<bool, CliError> {
    let mut prev: Option<Vec<f64>> = None;
    let mut all = true;
    for (rates, mut cells) in rows {
        let ok = prev
            .as_ref()
            .is_none_or(|p| rates.iter().zip(p).all(|(a, b)| *a <= b + 1e-12));
        all &= ok;
        cells.push(ok.into());
        rep.push(cells)?;
        prev = Some(rates);
    }
    Ok(all)
}

pub fn profile(cfg: &ScenarioConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let grid = cfg.delta_grid();
    match cfg.mode {
        Mode::Complete => {
            let p = cfg.system_params()?;
            let m = CompleteMechanism::new(&p)?;
            let plans = ctx
                .pool
                .install(|| grid.par_iter().map(|&d| m.plan(d)).collect::<Result<Vec<_>, _>>())?;
            let mut cols = vec!["delta".to_string()];
            cols.extend(indexed("rate", p.n()));
            cols.extend(["regime", "nominal_regime", "monotone"].map(String::from));
            let mut rep = Report::new(cols);
            let rows = plans
                .iter()
                .map(|pl| {
                    let mut cells: Vec<Cell> = vec![pl.delta.into()];
                    cells.extend(pl.profile.rates.iter().map(|&x| Cell::from(x)));
                    cells.push(pl.regime.label().into());
                    cells.push(pl.nominal_regime.label().into());
                    (pl.profile.rates.clone(), cells)
                })
                .collect();
            let monotone = flag_monotone(rows, &mut rep)?;
            rep.summary = json!({ "mode": "complete", "thresholds": m.thresholds(), "monotone": monotone });
            Ok(rep)
        }
        Mode::Bayesian => {
            let s = cfg.bayesian_spec()?;
            let bm = BayesianMechanism::new(&s)?;
            let plans = ctx
                .pool
                .install(|| grid.par_iter().map(|&d| bm.plan(d)).collect::<Result<Vec<_>, _>>())?;
            let mut cols = vec!["delta".to_string(), "rate_0_high".into(), "rate_0_low".into()];
            cols.extend((1..s.n()).map(|j| format!("rate_{j}")));
            cols.extend(["regime", "nominal_regime", "monotone"].map(String::from));
            let mut rep = Report::new(cols);
            let rows = plans
                .iter()
                .map(|pl| {
                    let b = pl.rates.as_bayesian();
                    let rates = b.to_vec();
                    let mut cells: Vec<Cell> = vec![pl.delta.into()];
                    cells.extend(rates.iter().map(|&x| Cell::from(x)));
                    cells.push(pl.regime.label().into());
                    cells.push(pl.nominal_regime.label().into());
                    (rates, cells)
                })
                .collect();
            let monotone = flag_monotone(rows, &mut rep)?;
            rep.summary = json!({ "mode": "bayesian", "thresholds": bm.thresholds, "monotone": monotone });
            Ok(rep)
        }
    }
}

fn complete_ratio_curve(p: &SystemParams, grid: &[f64], ctx: &Ctx) -> Result<Vec<f64>, CliError> {
    let m = CompleteMechanism::new(p)?;
    let opt = m.optimum.social;
    let v = ctx.pool.install(|| {
        grid.par_iter()
            .map(|&d| m.plan(d).and_then(|pl| social_cost(&pl.profile, p)).map(|c| c / opt))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(v)
}

fn bayesian_ratio_curve(s: &BayesianSpec, grid: &[f64], ctx: &Ctx) -> Result<Vec<f64>, CliError> {
    let bm = BayesianMechanism::new(s)?;
    let opt = bayesian_social_optimum(s)?.social;
    let v = ctx.pool.install(|| {
        grid.par_iter()
            .map(|&d| bm.plan(d).and_then(|pl| bayesian_social_cost(&pl.rates.as_bayesian(), s)).map(|c| c / opt))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(v)
}

pub fn ratio(cfg: &ScenarioConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let sweep = cfg.ratio.as_ref().map_or(Sweep::Delta, |r| r.sweep);
    let grid = cfg.delta_grid();
    match sweep {
        Sweep::N => {
            let (specs, _) = family(cfg)?
                .ok_or_else(|| CliError::Config("an n sweep needs a [family] table".into()))?;
            let mut rep = family_table(&specs, ctx)?;
            rep.summary = json!({ "sweep": "n" });
            Ok(rep)
        }
        Sweep::Delta => {
            let curve = match cfg.mode {
                Mode::Complete => complete_ratio_curve(&cfg.system_params()?, &grid, ctx)?,
                Mode::Bayesian => bayesian_ratio_curve(&cfg.bayesian_spec()?, &grid, ctx)?,
            };
            let mut rep = Report::new(vec!["delta".into(), "ratio".into()]);
            for (d, r) in grid.iter().zip(curve) {
                rep.push(vec![(*d).into(), r.into()])?;
            }
            rep.summary = json!({ "sweep": "delta" });
            Ok(rep)
        }
        Sweep::Mu => {
            let values = &cfg.ratio.as_ref().expect("sweep came from [ratio]").values;
            if values.is_empty() {
                return Err(CliError::Config("a mu sweep needs [ratio] values".into()));
            }
            let mut rep = Report::new(vec!["mu".into(), "delta".into(), "ratio".into()]);
            for &mu in values {
                let curve = match cfg.mode {
                    Mode::Complete => {
                        let p = cfg.system_params()?;
                        complete_ratio_curve(&SystemParams::new(mu, p.costs)?, &grid, ctx)?
                    }
                    Mode::Bayesian => {
                        let s = cfg.bayesian_spec()?;
                        let s = BayesianSpec::new(s.c_high, s.c_low, s.p_high, s.incumbent_costs, mu)?;
                        bayesian_ratio_curve(&s, &grid, ctx)?
                    }
                };
                for (d, r) in grid.iter().zip(curve) {
                    rep.push(vec![mu.into(), (*d).into(), r.into()])?;
                }
            }
            rep.summary = json!({ "sweep": "mu", "values": values });
            Ok(rep)
        }
    }
}

pub fn simulate(cfg: &ScenarioConfig, ctx: &Ctx) -> Result<SimTrace, CliError> {
    let sc = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs a [simulate] table".into()))?;
    let mech = match cfg.mode {
        Mode::Complete => {
            let p = cfg.system_params()?;
            if sc.mechanism == MechanismChoice::PerRealizationOptimum {
                return Err(CliError::Config("per_realization_optimum needs mode = \"bayesian\"".into()));
            }
            let m = CompleteMechanism::new(&p)?;
            Mechanism::complete(&p, &m.plan(sc.delta)?)?
        }
        Mode::Bayesian => {
            let s = cfg.bayesian_spec()?;
            match sc.mechanism {
                MechanismChoice::Cooperation => Mechanism::bayesian(&s, &BayesianMechanism::new(&s)?.plan(sc.delta)?)?,
                MechanismChoice::PerRealizationOptimum => Mechanism::per_realization_optimum(&s)?,
            }
        }
    };
    let strategies = sc.strategies.iter().map(|s| s.to_core()).collect::<Result<Vec<_>, _>>()?;
    let run_cfg = RunConfig {
        monitoring: sc.monitoring.to_core(),
        detection: sc.detection.to_core(),
        ..RunConfig::new(sc.rounds, sc.delta, ctx.seed)
    };
    Ok(run(&mech, &strategies, &run_cfg)?)
}

pub fn queue_validate(cfg: &ScenarioConfig, ctx: &Ctx) -> Result<Report, CliError> {
    let default_cases = || {
        vec![(vec![1.0], 1.0), (vec![1.0, 1.0], 1.0), (vec![0.5, 1.5], 2.0)]
    };
    let (horizon, opts, cases) = match &cfg.queue {
        None => (Horizon::Events(1_000_000), QueueOptions::default(), default_cases()),
        Some(q) => {
            let horizon = match (q.events, q.time) {
                (Some(e), None) => Horizon::Events(e),
                (None, Some(t)) => Horizon::Time(t),
                (None, None) => Horizon::Events(1_000_000),
                (Some(_), Some(_)) => return Err(CliError::Config("[queue] takes events or time, not both".into())),
            };
            let cases = if q.cases.is_empty() {
                default_cases()
            } else {
                q.cases.iter().map(|c| (c.rates.clone(), c.mu)).collect()
            };
            (horizon, QueueOptions { preemption: q.preemption.to_core(), ..QueueOptions::default() }, cases)
        }
    };
    let quarter = match horizon {
        Horizon::Events(e) => Horizon::Events(e / 4),
        Horizon::Time(t) => Horizon::Time(t / 4.0),
    };
    let results = ctx.pool.install(|| {
        cases
            .par_iter()
            .enumerate()
            .map(|(k, (rates, mu))| {
                let prof = RateProfile::new(rates.clone())?;
                let seed = ctx.seed.wrapping_add(k as u64);
                let full = simulate_queue(&prof, *mu, horizon, seed, &opts)?;
                let short = simulate_queue(&prof, *mu, quarter, seed, &opts)?;
                Ok((k, full, short))
            })
            .collect::<Result<Vec<_>, aoi_core::AoiError>>()
    })?;
    let mut rep = Report::new(
        [
            "case",
            "platform",
            "rate",
            "mu",
            "estimate",
            "stderr",
            "analytic",
            "rel_error",
            "deliveries",
            "events",
            "stderr_ratio_quarter",
        ]
        .map(String::from)
        .to_vec(),
    );
    let mut worst = 0.0f64;
    for (k, full, short) in &results {
        for (p, q) in full.platforms.iter().zip(&short.platforms) {
            worst = worst.max(p.rel_error());
            rep.push(vec![
                (*k).into(),
                p.platform.into(),
                p.rate.into(),
                full.mu.into(),
                p.estimate.into(),
                p.stderr.into(),
                p.analytic.into(),
                p.rel_error().into(),
                p.deliveries.into(),
                full.events.into(),
                (p.stderr / q.stderr).into(),
            ])?;
        }
    }
    rep.summary = json!({ "seed": ctx.seed, "rng": aoi_core::queue_sim::RNG_NAME, "max_rel_error": worst });
    Ok(rep)
}
