//! Discrete-event simulation of the shared LCFS M/M/1 queue with preemption.
//!
//! Every platform feeds Poisson updates into one exponential server. A new
//! arrival discards whatever is in service. Ages at the monitor are
//! integrated exactly between events and averaged with batch means.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::model::{aoi_unchecked, RateProfile};

/// Name of the generator behind every seeded stream in this crate.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Seeded generator; distinct `stream`s give independent sequences for the same seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Number of arrival and departure events.
    Events(u64),
    /// Simulated time.
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preemption {
    /// Any arrival preempts the update in service.
    #[default]
    Global,
    /// Only an arrival from the same platform preempts; others are dropped while busy.
    WithinSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueOptions {
    pub preemption: Preemption,
    /// Leading share of the horizon that is simulated but not measured.
    pub warmup_fraction: f64,
    pub batches: usize,
}

impl Default for QueueOptions {
    fn default() -> Self {
        QueueOptions {
            preemption: Preemption::Global,
            warmup_fraction: 0.01,
            batches: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformEstimate {
    pub platform: usize,
    pub rate: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Closed-form Δ_i under global preemption.
    pub analytic: f64,
    pub deliveries: u64,
}

impl PlatformEstimate {
    pub fn rel_error(&self) -> f64 {
        (self.estimate - self.analytic).abs() / self.analytic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiEstimate {
    pub rates: Vec<f64>,
    pub mu: f64,
    pub horizon: Horizon,
    pub seed: u64,
    pub rng: String,
    pub options: QueueOptions,
    /// Events after warm-up.
    pub events: u64,
    /// Measured time after warm-up.
    pub elapsed: f64,
    pub platforms: Vec<PlatformEstimate>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    platform: usize,
    rate: f64,
    estimate: f64,
    stderr: f64,
    analytic: f64,
    deliveries: u64,
    events: u64,
}

impl AoiEstimate {
    pub fn estimates(&self) -> Vec<f64> {
        self.platforms.iter().map(|p| p.estimate).collect()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.platforms.iter().map(PlatformEstimate::rel_error).fold(0.0, f64::max)
    }

    /// One row per platform: platform, rate, estimate, stderr, analytic, deliveries, events.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.platforms {
            wr.serialize(CsvRow {
                platform: p.platform,
                rate: p.rate,
                estimate: p.estimate,
                stderr: p.stderr,
                analytic: p.analytic,
                deliveries: p.deliveries,
                events: self.events,
            })
            .map_err(io_err)?;
        }
        wr.flush().map_err(|e| AoiError::Domain(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// Parses the table written by [`AoiEstimate::write_csv`].
pub fn read_csv<R: Read>(r: R) -> Result<Vec<PlatformEstimate>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(io_err)?;
            Ok(PlatformEstimate {
                platform: row.platform,
                rate: row.rate,
                estimate: row.estimate,
                stderr: row.stderr,
                analytic: row.analytic,
                deliveries: row.deliveries,
            })
        })
        .collect()
}

fn io_err(e: csv::Error) -> AoiError {
    AoiError::Domain(format!("csv: {e}"))
}

struct Accumulator {
    area: Vec<f64>,
    time: f64,
    batch_means: Vec<Vec<f64>>,
    total_area: Vec<f64>,
    total_time: f64,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            area: vec![0.0; n],
            time: 0.0,
            batch_means: vec![Vec::new(); n],
            total_area: vec![0.0; n],
            total_time: 0.0,
        }
    }

    fn add(&mut self, age: &[f64], dt: f64) {
        for (a, &g) in self.area.iter_mut().zip(age) {
            *a += g * dt + 0.5 * dt * dt;
        }
        self.time += dt;
    }

    fn close_batch(&mut self) {
        if self.time > 0.0 {
            for i in 0..self.area.len() {
                self.batch_means[i].push(self.area[i] / self.time);
                self.total_area[i] += self.area[i];
                self.area[i] = 0.0;
            }
            self.total_time += self.time;
            self.time = 0.0;
        }
    }
}

struct Queue {
    age: Vec<f64>,
    /// Platform and age of the update in service.
    busy: Option<(usize, f64)>,
}

impl Queue {
    fn advance(&mut self, dt: f64) {
        for a in &mut self.age {
            *a += dt;
        }
        if let Some((_, g)) = &mut self.busy {
            *g += dt;
        }
    }
}

/// Time-average AoI per platform at the given rates.
pub fn simulate(rates: &RateProfile, mu: f64, horizon: Horizon, seed: u64, opts: &QueueOptions) -> Result<AoiEstimate> {
    let mut rng = seeded_rng(seed, 0);
    simulate_with_rng(rates, mu, horizon, &mut rng, seed, opts)
}

/// As [`simulate`], drawing from a caller-supplied generator.
pub fn simulate_with_rng<R: Rng>(
    rates: &RateProfile,
    mu: f64,
    horizon: Horizon,
    rng: &mut R,
    seed: u64,
    opts: &QueueOptions,
) -> Result<AoiEstimate> {
    let rates = RateProfile::new(rates.rates.clone())?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(AoiError::domain(format!("mu must be positive, got {mu}")));
    }
    if !(0.0..1.0).contains(&opts.warmup_fraction) {
        return Err(AoiError::domain("warm-up fraction must lie in [0, 1)"));
    }
    if opts.batches < 2 {
        return Err(AoiError::domain("at least two batches are needed for a standard error"));
    }
    let n = rates.n();
    let lambda = rates.total();
    let mut q = Queue { age: vec![0.0; n], busy: None };
    let mut acc = Accumulator::new(n);
    let mut deliveries = vec![0u64; n];
    let mut measured_events = 0u64;
    let idle = Exp::new(lambda).map_err(|e| AoiError::domain(e.to_string()))?;
    let busy = Exp::new(lambda + mu).map_err(|e| AoiError::domain(e.to_string()))?;
    let b = opts.batches as u64;

    match horizon {
        Horizon::Events(total) => {
            let warm = (total as f64 * opts.warmup_fraction).ceil() as u64;
            let m = total.saturating_sub(warm);
            if m < b {
                return Err(AoiError::domain(format!("horizon of {total} events is too short for {b} batches")));
            }
            let mut next_batch = 1u64;
            for e in 0..total {
                let dt = if q.busy.is_some() { busy.sample(rng) } else { idle.sample(rng) };
                let measuring = e >= warm;
                if measuring {
                    acc.add(&q.age, dt);
                }
                q.advance(dt);
                if let Some(src) = step(&mut q, rng, &rates.rates, lambda, mu, opts.preemption) {
                    if measuring {
                        deliveries[src] += 1;
                    }
                }
                if measuring {
                    measured_events += 1;
                    if e + 1 == warm + (next_batch * m) / b {
                        acc.close_batch();
                        next_batch += 1;
                    }
                }
            }
        }
        Horizon::Time(total) => {
            if !(total.is_finite() && total > 0.0) {
                return Err(AoiError::domain(format!("time horizon must be positive, got {total}")));
            }
            let warm = total * opts.warmup_fraction;
            let width = (total - warm) / b as f64;
            let mut boundaries: Vec<f64> = vec![warm];
            boundaries.extend((1..=b).map(|k| warm + k as f64 * width));
            let mut bi = 0;
            let mut t = 0.0;
            'run: loop {
                let mut rem = if q.busy.is_some() { busy.sample(rng) } else { idle.sample(rng) };
                while t + rem >= boundaries[bi] {
                    let d = boundaries[bi] - t;
                    if bi > 0 {
                        acc.add(&q.age, d);
                        acc.close_batch();
                    }
                    q.advance(d);
                    t = boundaries[bi];
                    rem -= d;
                    bi += 1;
                    if bi == boundaries.len() {
                        break 'run;
                    }
                }
                if bi > 0 {
                    acc.add(&q.age, rem);
                    measured_events += 1;
                }
                q.advance(rem);
                t += rem;
                if let Some(src) = step(&mut q, rng, &rates.rates, lambda, mu, opts.preemption) {
                    if bi > 0 {
                        deliveries[src] += 1;
                    }
                }
            }
        }
    }

    let platforms = (0..n)
        .map(|i| {
            let means = &acc.batch_means[i];
            let k = means.len() as f64;
            let avg = means.iter().sum::<f64>() / k;
            let var = means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (k - 1.0);
            let own = rates.rates[i];
            PlatformEstimate {
                platform: i,
                rate: own,
                estimate: acc.total_area[i] / acc.total_time,
                stderr: (var / k).sqrt(),
                analytic: aoi_unchecked(own, lambda - own, mu),
                deliveries: deliveries[i],
            }
        })
        .collect();
    Ok(AoiEstimate {
        rates: rates.rates.clone(),
        mu,
        horizon,
        seed,
        rng: RNG_NAME.into(),
        options: *opts,
        events: measured_events,
        elapsed: acc.total_time,
        platforms,
    })
}

/// Applies one event; returns the platform whose update was delivered, if any.
fn step<R: Rng>(q: &mut Queue, rng: &mut R, rates: &[f64], lambda: f64, mu: f64, mode: Preemption) -> Option<usize> {
    let total = lambda + if q.busy.is_some() { mu } else { 0.0 };
    let mut u = rng.random::<f64>() * total;
    if u >= lambda {
        let (src, g) = q.busy.take().expect("departure only while busy");
        q.age[src] = q.age[src].min(g);
        return Some(src);
    }
    let mut src = rates.len() - 1;
    for (j, &r) in rates.iter().enumerate() {
        if u < r {
            src = j;
            break;
        }
        u -= r;
    }
    match (mode, q.busy) {
        (Preemption::WithinSource, Some((cur, _))) if cur != src => {}
        _ => q.busy = Some((src, 0.0)),
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof(r: &[f64]) -> RateProfile {
        RateProfile::new(r.to_vec()).unwrap()
    }

    fn run(r: &[f64], mu: f64, events: u64, seed: u64) -> AoiEstimate {
        simulate(&prof(r), mu, Horizon::Events(events), seed, &QueueOptions::default()).unwrap()
    }

    #[test]
    fn example_configurations() {
        for (r, mu, expect) in [
            (vec![1.0], 1.0, vec![2.0]),
            (vec![1.0, 1.0], 1.0, vec![3.0, 3.0]),
            (vec![0.5, 1.5], 2.0, vec![4.0, 4.0 / 3.0]),
        ] {
            let est = run(&r, mu, 1_000_000, 7);
            for (p, e) in est.platforms.iter().zip(&expect) {
                assert!((p.analytic - e).abs() < 1e-12);
                assert!(p.rel_error() < 0.02, "{r:?}: {} vs {e}", p.estimate);
            }
        }
    }

    #[test]
    fn error_shrinks_with_horizon() {
        let errs: Vec<f64> = [10_000u64, 100_000, 1_000_000]
            .iter()
            .map(|&e| {
                let mut s = 0.0;
                for seed in 0..4 {
                    s += run(&[0.5, 1.5], 2.0, e, seed).max_rel_error();
                }
                s / 4.0
            })
            .collect();
        assert!(errs[2] < errs[0], "{errs:?}");
    }

    #[test]
    fn stderr_halves_when_events_quadruple() {
        let a = run(&[1.0, 1.0], 1.0, 250_000, 3);
        let b = run(&[1.0, 1.0], 1.0, 1_000_000, 3);
        for (x, y) in a.platforms.iter().zip(&b.platforms) {
            let ratio = y.stderr / x.stderr;
            assert!((ratio - 0.5).abs() <= 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn fast_server_limit() {
        let est = run(&[0.5, 1.5], 1e6, 1_000_000, 11);
        for p in &est.platforms {
            assert!((p.estimate - 1.0 / p.rate).abs() / (1.0 / p.rate) < 0.02);
        }
    }

    #[test]
    fn time_horizon() {
        let est = simulate(&prof(&[1.0, 1.0]), 1.0, Horizon::Time(300_000.0), 5, &QueueOptions::default()).unwrap();
        assert!((est.elapsed - 297_000.0).abs() < 1e-6);
        assert!(est.max_rel_error() < 0.02);
    }

    #[test]
    fn seeded_determinism() {
        assert_eq!(run(&[0.7, 1.3], 1.5, 50_000, 9), run(&[0.7, 1.3], 1.5, 50_000, 9));
        assert_ne!(run(&[0.7, 1.3], 1.5, 50_000, 9).estimates(), run(&[0.7, 1.3], 1.5, 50_000, 10).estimates());
    }

    #[test]
    fn within_source_preemption_differs() {
        let opts = QueueOptions { preemption: Preemption::WithinSource, ..QueueOptions::default() };
        let est = simulate(&prof(&[1.0, 1.0]), 1.0, Horizon::Events(1_000_000), 2, &opts).unwrap();
        assert!(est.platforms[0].estimate > 3.0 * 1.02);
    }

    #[test]
    fn csv_round_trip() {
        let est = run(&[1.0, 2.0], 1.0, 20_000, 1);
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("platform,rate,estimate,stderr,analytic,deliveries,events"));
        assert_eq!(read_csv(&buf[..]).unwrap(), est.platforms);
    }

    #[test]
    fn rejects_bad_input() {
        let o = QueueOptions::default();
        assert!(simulate(&prof(&[1.0]), 1.0, Horizon::Events(0), 0, &o).is_err());
        assert!(simulate(&prof(&[1.0]), 0.0, Horizon::Events(1000), 0, &o).is_err());
        assert!(simulate(&prof(&[1.0]), 1.0, Horizon::Time(0.0), 0, &o).is_err());
        assert!(RateProfile::new(vec![1.0, -1.0]).is_err());
    }
}
