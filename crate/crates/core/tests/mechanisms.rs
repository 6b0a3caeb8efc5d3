use aoi_core::mech_bayesian::BayesianMechanism;
use aoi_core::mech_complete::{linspace, CompleteMechanism};
use aoi_core::repeated_sim::{certify_no_deviation, run, DeviationRate, RunConfig, Setting, Strategy, DEFAULT_GRID_POINTS};
use aoi_core::{BayesianSpec, Mechanism, PlanRates, Realization, Regime, SystemParams};

fn strategy_proof(mech: &Mechanism, delta: f64, rounds: u64) {
    let n = mech.n();
    let cfg = RunConfig::new(rounds, delta, 11);
    let comply = run(mech, &[], &cfg).unwrap();
    for j in 0..n {
        let dev = run(mech, &[Strategy::deviate_once(j, 1, DeviationRate::BestResponse)], &cfg).unwrap();
        let pi_max = dev.records.iter().map(|r| r.expected_costs[j]).fold(0.0, f64::max);
        let slack = 1e-8 + delta.powi(rounds as i32) * pi_max / (1.0 - delta);
        assert!(
            dev.summary.discounted_expected[j] >= comply.summary.discounted_expected[j] - slack,
            "platform {j} gains by deviating at delta={delta}"
        );
        assert!(dev.summary.infinite_horizon[j] >= comply.summary.infinite_horizon[j] - 1e-8);
    }
}

#[test]
fn complete_plans_resist_simulated_deviation() {
    let p = SystemParams::new(1.0, vec![1.0, 1.5, 2.5]).unwrap();
    let cm = CompleteMechanism::new(&p).unwrap();
    for d in linspace(0.05, 0.95, 10) {
        let mech = Mechanism::complete(&p, &cm.plan(d).unwrap()).unwrap();
        strategy_proof(&mech, d, 200);
    }
}

#[test]
fn bayesian_plans_resist_simulated_deviation() {
    let s = BayesianSpec::new(100.0, 10.0, 0.1, vec![20.0], 0.1).unwrap();
    let bm = BayesianMechanism::new(&s).unwrap();
    for d in linspace(0.05, 0.95, 10) {
        let plan = bm.plan(d).unwrap();
        let mech = Mechanism::bayesian(&s, &plan).unwrap();
        strategy_proof(&mech, d, 200);
        assert!(certify_no_deviation(&mech, d, DEFAULT_GRID_POINTS).unwrap().certified);
    }
}

#[test]
fn punishment_profile_is_self_enforcing() {
    let s = BayesianSpec::new(2.0, 0.5, 0.4, vec![1.0, 3.0], 0.8).unwrap();
    let bm = BayesianMechanism::new(&s).unwrap();
    let nash = PlanRates::PerRealization(bm.nash.profile.clone());
    let mech = Mechanism::new(Setting::Bayesian(s), nash.clone(), nash).unwrap();
    for d in [0.0, 0.3, 0.9] {
        let c = certify_no_deviation(&mech, d, DEFAULT_GRID_POINTS).unwrap();
        for e in &c.entries {
            assert!(e.margin_at_best_response.abs() < 1e-9, "{e:?}");
        }
        assert!(c.certified);
    }
}

#[test]
fn bayesian_profile_tracks_complete_profile_when_cost_is_known() {
    let s = BayesianSpec::new(3.0, 1.0, 1.0, vec![2.0], 1.5).unwrap();
    let bm = BayesianMechanism::new(&s).unwrap();
    let cm = CompleteMechanism::new(&s.realized_params(Realization::High)).unwrap();
    for d in linspace(0.0, 0.98, 50) {
        let a = bm.plan(d).unwrap();
        let b = cm.plan(d).unwrap();
        assert_eq!(a.regime, b.regime);
        for (x, y) in a.profile().unwrap().rates.iter().zip(&b.profile.rates) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn regimes_walk_from_small_to_large() {
    let p = SystemParams::new(1.0, vec![1.0, 1.5]).unwrap();
    let cm = CompleteMechanism::new(&p).unwrap();
    let labels: Vec<Regime> = linspace(0.0, 0.99, 100).into_iter().map(|d| cm.plan(d).unwrap().regime).collect();
    assert_eq!(labels.first(), Some(&Regime::Small));
    assert_eq!(labels.last(), Some(&Regime::Large));
    assert!(labels.contains(&Regime::Medium(1)));
}
