//! Shared fixtures for the benchmarks.

use aoi_core::{BayesianSpec, SystemParams};

/// `n` platforms with costs spread evenly over `[1, 2]`.
pub fn spread_params(n: usize, mu: f64) -> SystemParams {
    let costs = (0..n).map(|j| 1.0 + j as f64 / n.max(2).saturating_sub(1) as f64).collect();
    SystemParams::new(mu, costs).expect("valid params")
}

/// Two-point private cost for platform 0 against `n - 1` spread incumbents.
pub fn spread_spec(n: usize, mu: f64) -> BayesianSpec {
    let inc = spread_params(n.saturating_sub(1).max(1), mu).costs;
    BayesianSpec::new(3.0, 0.5, 0.3, inc[..n - 1].to_vec(), mu).expect("valid spec")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert_eq!(spread_params(5, 1.0).costs, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(spread_spec(4, 1.0).n(), 4);
    }
}
