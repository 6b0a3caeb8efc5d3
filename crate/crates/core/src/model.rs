//! Domain types and closed-form AoI / cost evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};

/// Complete-information system: bandwidth and per-platform unit sampling costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mu: f64,
    pub costs: Vec<f64>,
}

impl SystemParams {
    pub fn new(mu: f64, costs: Vec<f64>) -> Result<Self> {
        let p = SystemParams { mu, costs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(AoiError::domain("at least one platform is required"));
        }
        check_positive("mu", self.mu)?;
        for (i, &c) in self.costs.iter().enumerate() {
            check_positive(&format!("cost[{i}]"), c)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    /// Stable permutation sorting platforms by nondecreasing cost.
    ///
    /// `order[k]` is the input index of the k-th cheapest platform.
    pub fn sort_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]));
        order
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            Err(AoiError::InvalidIndex { index: i, n: self.n() })
        } else {
            Ok(())
        }
    }
}

/// Which cost platform 0 drew in the Bayesian game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Realization {
    High,
    Low,
}

impl Realization {
    pub const BOTH: [Realization; 2] = [Realization::High, Realization::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Realization::High => "high",
            Realization::Low => "low",
        }
    }
}

/// Platform 0's two-point private cost distribution plus incumbent costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianSpec {
    pub c_high: f64,
    pub c_low: f64,
    pub p_high: f64,
    pub incumbent_costs: Vec<f64>,
    pub mu: f64,
}

/// The incumbents are not sorted at or above the mean private cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingWarning {
    pub mean_cost: f64,
    pub costs: Vec<f64>,
}

impl BayesianSpec {
    pub fn new(c_high: f64, c_low: f64, p_high: f64, incumbent_costs: Vec<f64>, mu: f64) -> Result<Self> {
        let s = BayesianSpec {
            c_high,
            c_low,
            p_high,
            incumbent_costs,
            mu,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("c_low", self.c_low)?;
        check_positive("c_high", self.c_high)?;
        if self.c_low >= self.c_high {
            return Err(AoiError::domain(format!(
                "c_low ({}) must be below c_high ({})",
                self.c_low, self.c_high
            )));
        }
        if !(0.0..=1.0).contains(&self.p_high) {
            return Err(AoiError::domain(format!("p_high must lie in [0, 1], got {}", self.p_high)));
        }
        check_positive("mu", self.mu)?;
        for (i, &c) in self.incumbent_costs.iter().enumerate() {
            check_positive(&format!("incumbent_costs[{i}]"), c)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.incumbent_costs.len() + 1
    }

    /// Expected private cost p_H c_H + (1 - p_H) c_L.
    pub fn mean_cost(&self) -> f64 {
        self.p_high * self.c_high + (1.0 - self.p_high) * self.c_low
    }

    pub fn cost(&self, r: Realization) -> f64 {
        match r {
            Realization::High => self.c_high,
            Realization::Low => self.c_low,
        }
    }

    pub fn prob(&self, r: Realization) -> f64 {
        match r {
            Realization::High => self.p_high,
            Realization::Low => 1.0 - self.p_high,
        }
    }

    /// Complete-information system with platform 0's cost fixed to `c`.
    pub fn params_with_cost(&self, c: f64) -> SystemParams {
        let mut costs = Vec::with_capacity(self.n());
        costs.push(c);
        costs.extend_from_slice(&self.incumbent_costs);
        SystemParams { mu: self.mu, costs }
    }

    pub fn realized_params(&self, r: Realization) -> SystemParams {
        self.params_with_cost(self.cost(r))
    }

    /// Complete-information system with platform 0 at its mean cost.
    pub fn mean_params(&self) -> SystemParams {
        self.params_with_cost(self.mean_cost())
    }

    pub fn with_p_high(&self, p_high: f64) -> Self {
        BayesianSpec { p_high, ..self.clone() }
    }

    /// Flags specs where the mean private cost and incumbents are not nondecreasing.
    pub fn ordering_warning(&self) -> Option<OrderingWarning> {
        let mut costs = vec![self.mean_cost()];
        costs.extend_from_slice(&self.incumbent_costs);
        if costs.windows(2).all(|w| w[0] <= w[1]) {
            None
        } else {
            Some(OrderingWarning {
                mean_cost: self.mean_cost(),
                costs,
            })
        }
    }

    pub(crate) fn check_incumbent(&self, i: usize) -> Result<()> {
        if i == 0 || i >= self.n() {
            Err(AoiError::InvalidIndex { index: i, n: self.n() })
        } else {
            Ok(())
        }
    }
}

/// Sampling rates of every platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub rates: Vec<f64>,
}

impl RateProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(AoiError::domain("rate profile is empty"));
        }
        for (i, &r) in rates.iter().enumerate() {
            check_positive(&format!("rate[{i}]"), r)?;
        }
        Ok(RateProfile { rates })
    }

    pub fn n(&self) -> usize {
        self.rates.len()
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Sum of every rate except platform `i`'s.
    pub fn rival_total(&self, i: usize) -> f64 {
        self.rates
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| r)
            .sum()
    }
}

/// Rates with platform 0 split by cost realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianRateProfile {
    pub rate1_high: f64,
    pub rate1_low: f64,
    pub incumbent_rates: Vec<f64>,
}

impl BayesianRateProfile {
    pub fn new(rate1_high: f64, rate1_low: f64, incumbent_rates: Vec<f64>) -> Result<Self> {
        check_positive("rate1_high", rate1_high)?;
        check_positive("rate1_low", rate1_low)?;
        for (i, &r) in incumbent_rates.iter().enumerate() {
            check_positive(&format!("incumbent_rates[{i}]"), r)?;
        }
        Ok(BayesianRateProfile {
            rate1_high,
            rate1_low,
            incumbent_rates,
        })
    }

    /// Same rate for platform 0 under both realizations.
    pub fn pooled(profile: &RateProfile) -> Self {
        BayesianRateProfile {
            rate1_high: profile.rates[0],
            rate1_low: profile.rates[0],
            incumbent_rates: profile.rates[1..].to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.incumbent_rates.len() + 1
    }

    pub fn rate1(&self, r: Realization) -> f64 {
        match r {
            Realization::High => self.rate1_high,
            Realization::Low => self.rate1_low,
        }
    }

    pub fn expected_rate1(&self, p_high: f64) -> f64 {
        p_high * self.rate1_high + (1.0 - p_high) * self.rate1_low
    }

    pub fn incumbent_total(&self) -> f64 {
        self.incumbent_rates.iter().sum()
    }

    /// The complete profile played when platform 0 drew `r`.
    pub fn realized(&self, r: Realization) -> RateProfile {
        let mut rates = Vec::with_capacity(self.n());
        rates.push(self.rate1(r));
        rates.extend_from_slice(&self.incumbent_rates);
        RateProfile { rates }
    }

    /// The high-cost branch is not above the low-cost branch.
    pub fn branches_ordered(&self) -> bool {
        self.rate1_high <= self.rate1_low
    }

    /// Flatten as `[high, low, incumbents...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.rate1_high, self.rate1_low];
        v.extend_from_slice(&self.incumbent_rates);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        BayesianRateProfile {
            rate1_high: v[0],
            rate1_low: v[1],
            incumbent_rates: v[2..].to_vec(),
        }
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(AoiError::domain(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Δ for a platform with own rate `own` facing total rival rate `rival`.
pub fn aoi_from_rates(own: f64, rival: f64, mu: f64) -> Result<f64> {
    check_positive("own rate", own)?;
    check_positive("mu", mu)?;
    if !(rival.is_finite() && rival >= 0.0) {
        return Err(AoiError::domain(format!("rival total must be nonnegative, got {rival}")));
    }
    Ok(aoi_unchecked(own, rival, mu))
}

#[inline]
pub(crate) fn aoi_unchecked(own: f64, rival: f64, mu: f64) -> f64 {
    1.0 / own + (own + rival) / (mu * own)
}

/// One-shot cost Δ + c·λ of a single platform.
pub fn one_shot_cost(own: f64, rival: f64, c: f64, mu: f64) -> Result<f64> {
    Ok(aoi_from_rates(own, rival, mu)? + c * own)
}

#[inline]
pub(crate) fn cost_unchecked(own: f64, rival: f64, c: f64, mu: f64) -> f64 {
    aoi_unchecked(own, rival, mu) + c * own
}

/// Time-average AoI of platform `i`.
pub fn aoi(i: usize, profile: &RateProfile, mu: f64) -> Result<f64> {
    if i >= profile.n() {
        return Err(AoiError::InvalidIndex { index: i, n: profile.n() });
    }
    let p = RateProfile::new(profile.rates.clone())?;
    aoi_from_rates(p.rates[i], p.rival_total(i), mu)
}

/// Platform `i`'s one-shot cost Δ_i + c_i λ_i.
pub fn platform_cost(i: usize, profile: &RateProfile, params: &SystemParams) -> Result<f64> {
    params.check_index(i)?;
    same_size(profile.n(), params.n())?;
    Ok(aoi(i, profile, params.mu)? + params.costs[i] * profile.rates[i])
}

/// Sum of every platform's one-shot cost.
pub fn social_cost(profile: &RateProfile, params: &SystemParams) -> Result<f64> {
    (0..params.n()).map(|i| platform_cost(i, profile, params)).sum()
}

/// Platform 0's cost when it drew realization `r`.
pub fn bayesian_platform1_cost(r: Realization, profile: &BayesianRateProfile, spec: &BayesianSpec) -> Result<f64> {
    same_size(profile.n(), spec.n())?;
    let own = profile.rate1(r);
    one_shot_cost(own, positive_total(&profile.incumbent_rates)?, spec.cost(r), spec.mu)
}

/// Platform 0's cost averaged over its realizations.
pub fn bayesian_platform1_expected_cost(profile: &BayesianRateProfile, spec: &BayesianSpec) -> Result<f64> {
    Ok(spec.p_high * bayesian_platform1_cost(Realization::High, profile, spec)?
        + (1.0 - spec.p_high) * bayesian_platform1_cost(Realization::Low, profile, spec)?)
}

/// Incumbent `i` (1-based among all platforms, so `i >= 1`) cost averaged over platform 0's realization.
pub fn bayesian_incumbent_cost(i: usize, profile: &BayesianRateProfile, spec: &BayesianSpec) -> Result<f64> {
    spec.check_incumbent(i)?;
    same_size(profile.n(), spec.n())?;
    let own = profile.incumbent_rates[i - 1];
    let others = positive_total(&profile.incumbent_rates)? - own;
    let mut total = 0.0;
    for r in Realization::BOTH {
        let w = spec.prob(r);
        if w > 0.0 {
            total += w * aoi_from_rates(own, others + profile.rate1(r), spec.mu)?;
        }
    }
    Ok(total + spec.incumbent_costs[i - 1] * own)
}

/// Expected social cost: platform 0's expected cost plus every incumbent's.
pub fn bayesian_social_cost(profile: &BayesianRateProfile, spec: &BayesianSpec) -> Result<f64> {
    let mut total = bayesian_platform1_expected_cost(profile, spec)?;
    for i in 1..spec.n() {
        total += bayesian_incumbent_cost(i, profile, spec)?;
    }
    Ok(total)
}

fn positive_total(rates: &[f64]) -> Result<f64> {
    for (i, &r) in rates.iter().enumerate() {
        check_positive(&format!("rate[{i}]"), r)?;
    }
    Ok(rates.iter().sum())
}

fn same_size(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(AoiError::domain(format!("profile has {a} platforms but parameters have {b}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rp(r: &[f64]) -> RateProfile {
        RateProfile::new(r.to_vec()).unwrap()
    }

    #[test]
    fn aoi_examples() {
        assert!((aoi(0, &rp(&[1.0]), 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((aoi(0, &rp(&[1.0, 1.0]), 1.0).unwrap() - 3.0).abs() < 1e-15);
        // (2/0.5)(1/2 + 1/2)
        assert!((aoi(0, &rp(&[0.5, 1.5]), 2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((aoi(1, &rp(&[0.5, 1.5]), 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn aoi_rejects_bad_input() {
        assert!(matches!(aoi_from_rates(0.0, 1.0, 1.0), Err(AoiError::Domain(_))));
        assert!(matches!(aoi_from_rates(1.0, 1.0, 0.0), Err(AoiError::Domain(_))));
        assert!(RateProfile::new(vec![1.0, -1.0]).is_err());
        assert!(matches!(aoi(2, &rp(&[1.0, 1.0]), 1.0), Err(AoiError::InvalidIndex { .. })));
    }

    #[test]
    fn cost_examples() {
        let p2 = SystemParams::new(1.0, vec![1.0, 1.0]).unwrap();
        assert_eq!(platform_cost(0, &rp(&[1.0, 1.0]), &p2).unwrap(), 4.0);
        assert_eq!(social_cost(&rp(&[1.0, 1.0]), &p2).unwrap(), 8.0);
        let p1 = SystemParams::new(1.0, vec![1.0]).unwrap();
        assert_eq!(platform_cost(0, &rp(&[1.0]), &p1).unwrap(), 3.0);
        assert_eq!(social_cost(&rp(&[1.0]), &p1).unwrap(), 3.0);

        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // oracle: 2/phi * (1/(2 phi) + 1) + phi
        let oracle = 2.0 * (1.0 / (2.0 * phi) + 1.0) + phi;
        let got = platform_cost(0, &rp(&[phi, phi]), &p2).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 4.236068).abs() < 1e-6);
        assert!((social_cost(&rp(&[phi, phi]), &p2).unwrap() - 8.472136).abs() < 1e-6);
    }

    #[test]
    fn bayesian_cost_examples() {
        let spec = BayesianSpec::new(2.0, 0.5, 0.3, vec![1.0], 1.0).unwrap();
        let prof = BayesianRateProfile::new(1.0, 1.0, vec![1.0]).unwrap();
        assert!((bayesian_platform1_cost(Realization::High, &prof, &spec).unwrap() - 5.0).abs() < 1e-15);
        assert!((bayesian_platform1_cost(Realization::Low, &prof, &spec).unwrap() - 3.5).abs() < 1e-15);

        let spec = BayesianSpec::new(2.0, 0.5, 0.5, vec![1.0], 1.0).unwrap();
        let prof = BayesianRateProfile::new(1.0, 2.0, vec![1.0]).unwrap();
        assert!((bayesian_incumbent_cost(1, &prof, &spec).unwrap() - 4.5).abs() < 1e-14);
        assert!(matches!(
            bayesian_incumbent_cost(0, &prof, &spec),
            Err(AoiError::InvalidIndex { .. })
        ));
    }

    #[test]
    fn bayesian_degenerate_distributions() {
        let prof = BayesianRateProfile::new(0.7, 1.3, vec![0.9, 1.1]).unwrap();
        for (p, r) in [(0.0, Realization::Low), (1.0, Realization::High)] {
            let spec = BayesianSpec::new(1.5, 0.5, p, vec![1.0, 2.0], 1.0).unwrap();
            let params = spec.realized_params(r);
            let flat = prof.realized(r);
            for i in 1..3 {
                let a = bayesian_incumbent_cost(i, &prof, &spec).unwrap();
                let b = platform_cost(i, &flat, &params).unwrap();
                assert!((a - b).abs() < 1e-14);
            }
            let a = bayesian_social_cost(&prof, &spec).unwrap();
            let b = social_cost(&flat, &params).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn bayesian_social_cost_matches_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let spec = BayesianSpec::new(1.5, 0.5, 0.5, vec![1.0], 1.0).unwrap();
        let prof = BayesianRateProfile::new(0.8, 1.2, vec![1.1]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = 20_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let r = if rng.random_bool(spec.p_high) { Realization::High } else { Realization::Low };
            let v = social_cost(&prof.realized(r), &spec.realized_params(r)).unwrap();
            s += v;
            s2 += v * v;
        }
        let mean = s / m as f64;
        let sd = ((s2 / m as f64 - mean * mean).max(0.0) / m as f64).sqrt();
        let exact = bayesian_social_cost(&prof, &spec).unwrap();
        assert!((mean - exact).abs() <= 3.0 * sd + 1e-12, "{mean} vs {exact} (sd {sd})");
    }

    #[test]
    fn spec_derived_fields() {
        let spec = BayesianSpec::new(100.0, 10.0, 0.1, vec![20.0], 0.1).unwrap();
        assert_eq!(spec.mean_cost(), 0.1 * 100.0 + 0.9 * 10.0);
        assert!(spec.ordering_warning().is_none());
        let bad = BayesianSpec::new(100.0, 10.0, 0.5, vec![20.0], 0.1).unwrap();
        assert!(bad.ordering_warning().is_some());
        assert!(BayesianSpec::new(1.0, 2.0, 0.5, vec![1.0], 1.0).is_err());
        assert!(BayesianSpec::new(2.0, 1.0, 1.5, vec![1.0], 1.0).is_err());
    }

    #[test]
    fn sort_order_is_stable() {
        let p = SystemParams::new(1.0, vec![2.0, 1.0, 2.0, 0.5]).unwrap();
        assert_eq!(p.sort_order(), vec![3, 1, 0, 2]);
    }

    proptest! {
        #[test]
        fn aoi_monotone(own in 0.05f64..10.0, rival in 0.0f64..10.0, mu in 0.05f64..10.0) {
            let h = 1e-4;
            let base = aoi_from_rates(own, rival, mu).unwrap();
            prop_assert!(aoi_from_rates(own + h, rival, mu).unwrap() < base);
            prop_assert!(aoi_from_rates(own, rival + h, mu).unwrap() > base);
            prop_assert!(aoi_from_rates(own, rival, mu + h).unwrap() < base);
        }

        #[test]
        fn cost_convex_in_own_rate(own in 0.05f64..10.0, rival in 0.0f64..10.0,
                                   c in 0.01f64..10.0, mu in 0.05f64..10.0) {
            let h = 1e-3 * own;
            let f = |x: f64| one_shot_cost(x, rival, c, mu).unwrap();
            prop_assert!(f(own + h) - 2.0 * f(own) + f(own - h) > 0.0);
        }

        #[test]
        fn social_cost_permutation_invariant(rates in proptest::collection::vec(0.1f64..5.0, 2..6),
                                             mu in 0.1f64..5.0) {
            let n = rates.len();
            let params = SystemParams::new(mu, vec![1.3; n]).unwrap();
            let a = rp(&rates);
            let mut rev = rates.clone();
            rev.reverse();
            let b = rp(&rev);
            let sa = social_cost(&a, &params).unwrap();
            let sb = social_cost(&b, &params).unwrap();
            prop_assert!((sa - sb).abs() <= 1e-12 * sa);
            prop_assert!((platform_cost(0, &a, &params).unwrap()
                - platform_cost(n - 1, &b, &params).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn bayesian_social_cost_resums(h in 0.1f64..5.0, l in 0.1f64..5.0,
                                       inc in proptest::collection::vec(0.1f64..5.0, 1..5),
                                       p in 0.0f64..=1.0, mu in 0.1f64..5.0) {
            let costs: Vec<f64> = inc.iter().map(|x| 0.5 + x).collect();
            let spec = BayesianSpec::new(3.0, 0.4, p, costs.clone(), mu).unwrap();
            let prof = BayesianRateProfile::new(h, l, inc.clone()).unwrap();
            // re-sum independently: E over realization of the full realized social cost
            let mut direct = 0.0;
            for r in Realization::BOTH {
                let flat = prof.realized(r);
                let total: f64 = flat.total();
                let mut s = 0.0;
                for (i, &x) in flat.rates.iter().enumerate() {
                    let c = if i == 0 { spec.cost(r) } else { costs[i - 1] };
                    s += (total / x) * (1.0 / total + 1.0 / mu) + c * x;
                }
                direct += spec.prob(r) * s;
            }
            let got = bayesian_social_cost(&prof, &spec).unwrap();
            prop_assert!((got - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }
}
