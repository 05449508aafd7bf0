//! EV owner populations and the station-switching simulation.
//!
//! Every owner scores all stations on price, congestion and attachment to
//! their home station, ranks them with PROMETHEE II and moves to the best
//! one. Congestion is evaluated once from the initial occupancy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::Network;
use crate::promethee::{
    self, CriteriaSet, Criterion, Direction, PerformanceTable, PreferenceThresholds,
    PrometheeError, WeightVector,
};

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("invalid population config: {0}")]
    InvalidConfig(String),
    #[error("station count mismatch: expected {expected}, got {got}")]
    StationMismatch { expected: usize, got: usize },
    #[error("negative mean count {value} at station index {index}")]
    NegativeCount { index: usize, value: f64 },
    #[error(transparent)]
    Promethee(#[from] PrometheeError),
}

pub type Result<T> = std::result::Result<T, BehaviorError>;

pub const PRICE: usize = 0;
pub const CONGESTION: usize = 1;
pub const BIAS: usize = 2;
pub const N_CRITERIA: usize = 3;

/// Closed sampling interval `[lo, hi]`.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    /// Expected number of owners homed at each station.
    pub arrivals: Vec<f64>,
    /// Draw counts from Poisson(arrivals); otherwise round them.
    pub poisson: bool,
    /// Average charge per session, MW.
    pub ch_avg_mw: f64,
    pub service_minutes: f64,
    /// Raw weight ranges in criterion order (price, congestion, bias).
    pub weight_ranges: [Range; N_CRITERIA],
    pub tau_q_ranges: [Range; N_CRITERIA],
    /// `tau_p - tau_q`; the lower end must be positive.
    pub tau_gap_ranges: [Range; N_CRITERIA],
    pub bias_range: Range,
    /// MW per $/kWh per vehicle.
    pub beta_range: Range,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            arrivals: vec![22.0, 24.0, 24.0, 22.0],
            poisson: true,
            ch_avg_mw: 0.05,
            service_minutes: 30.0,
            weight_ranges: [[0.2, 1.0], [0.2, 1.0], [0.2, 1.0]],
            tau_q_ranges: [[0.0, 0.01], [0.0, 5.0], [0.0, 0.2]],
            tau_gap_ranges: [[0.01, 0.05], [5.0, 30.0], [0.1, 0.5]],
            bias_range: [0.0, 1.0],
            beta_range: [0.1, 0.5],
        }
    }
}

impl PopulationConfig {
    pub fn n_stations(&self) -> usize {
        self.arrivals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BehaviorError::InvalidConfig(m));
        if self.arrivals.is_empty() {
            return bad("arrivals must list at least one station".into());
        }
        if self.arrivals.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("arrivals must be finite and nonnegative".into());
        }
        if self.arrivals.iter().sum::<f64>() <= 0.0 {
            return Err(BehaviorError::EmptyPopulation);
        }
        if !(self.ch_avg_mw > 0.0 && self.ch_avg_mw.is_finite()) {
            return bad("ch_avg_mw must be positive".into());
        }
        if !(self.service_minutes >= 0.0 && self.service_minutes.is_finite()) {
            return bad("service_minutes must be nonnegative".into());
        }
        let ordered = |r: &Range| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        for (name, ranges) in [
            ("weight_ranges", &self.weight_ranges),
            ("tau_q_ranges", &self.tau_q_ranges),
            ("tau_gap_ranges", &self.tau_gap_ranges),
        ] {
            for (j, r) in ranges.iter().enumerate() {
                if !ordered(r) || r[0] < 0.0 {
                    return bad(format!("{name}[{j}] must satisfy 0 <= lo <= hi"));
                }
            }
        }
        if self.weight_ranges.iter().all(|r| r[1] == 0.0) {
            return bad("at least one weight range must allow positive weight".into());
        }
        if let Some(j) = self.tau_gap_ranges.iter().position(|r| r[0] <= 0.0) {
            return bad(format!(
                "tau_gap_ranges[{j}]: tau_p range must lie above tau_q range"
            ));
        }
        for (name, r) in [
            ("bias_range", &self.bias_range),
            ("beta_range", &self.beta_range),
        ] {
            if !ordered(r) || r[0] < 0.0 {
                return bad(format!("{name} must satisfy 0 <= lo <= hi"));
            }
        }
        Ok(())
    }

    pub fn beta_mean(&self) -> f64 {
        0.5 * (self.beta_range[0] + self.beta_range[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Owner {
    pub id: usize,
    /// Station index.
    pub home: usize,
    pub weights: WeightVector,
    pub thresholds: Vec<PreferenceThresholds>,
    pub bias_strength: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnerPopulation {
    pub owners: Vec<Owner>,
    pub ch_avg: f64,
    pub n_stations: usize,
}

impl OwnerPopulation {
    pub fn new(owners: Vec<Owner>, ch_avg: f64, n_stations: usize) -> Result<Self> {
        if owners.is_empty() {
            return Err(BehaviorError::EmptyPopulation);
        }
        if !(ch_avg > 0.0) {
            return Err(BehaviorError::InvalidConfig(
                "ch_avg must be positive".into(),
            ));
        }
        if let Some(o) = owners.iter().find(|o| o.home >= n_stations) {
            return Err(BehaviorError::InvalidConfig(format!(
                "owner {} homed at unknown station index {}",
                o.id, o.home
            )));
        }
        if let Some(o) = owners
            .iter()
            .find(|o| o.weights.len() != N_CRITERIA || o.thresholds.len() != N_CRITERIA)
        {
            return Err(BehaviorError::InvalidConfig(format!(
                "owner {} needs {N_CRITERIA} criteria",
                o.id
            )));
        }
        Ok(Self {
            owners,
            ch_avg,
            n_stations,
        })
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    pub fn home_counts(&self) -> Vec<u32> {
        let mut n = vec![0u32; self.n_stations];
        for o in &self.owners {
            n[o.home] += 1;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationState {
    pub station_id: u32,
    /// $/kWh
    pub price: f64,
    pub occupancy: u32,
    pub congestion_minutes: f64,
}

/// Station states seen by a population: offered tariffs and congestion from
/// the initial (home) occupancy.
pub fn station_states(
    net: &Network,
    pop: &OwnerPopulation,
    service_minutes: f64,
) -> Result<Vec<StationState>> {
    if net.stations.len() != pop.n_stations {
        return Err(BehaviorError::StationMismatch {
            expected: net.stations.len(),
            got: pop.n_stations,
        });
    }
    let occ = pop.home_counts();
    Ok(net
        .stations
        .iter()
        .zip(occ)
        .map(|(s, o)| StationState {
            station_id: s.id,
            price: s.lambda_offered,
            occupancy: o,
            congestion_minutes: o as f64 / s.chargers as f64 * service_minutes,
        })
        .collect())
}

pub fn criteria() -> CriteriaSet {
    let c = |id: &str, direction| Criterion {
        id: id.into(),
        direction,
    };
    CriteriaSet::new(vec![
        c("price", Direction::Minimize),
        c("congestion", Direction::Minimize),
        c("bias", Direction::Maximize),
    ])
    .expect("static criteria are valid")
}

/// Benefit-oriented performance table of all stations for one owner.
pub fn station_performance(states: &[StationState], owner: &Owner) -> Result<PerformanceTable> {
    if owner.home >= states.len() {
        return Err(BehaviorError::StationMismatch {
            expected: owner.home + 1,
            got: states.len(),
        });
    }
    let rows: Vec<Vec<f64>> = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let bias = if i == owner.home {
                owner.bias_strength
            } else {
                0.0
            };
            vec![s.price, s.congestion_minutes, bias]
        })
        .collect();
    Ok(PerformanceTable::from_rows(&rows)?.oriented(&criteria())?)
}

/// Station index chosen by one owner.
pub fn choose_station(states: &[StationState], owner: &Owner) -> Result<usize> {
    if states.len() == 1 {
        return Ok(0);
    }
    let table = station_performance(states, owner)?;
    let flows = promethee::rank(&table, &owner.thresholds, &owner.weights)?;
    Ok(promethee::select_best(&flows, owner.home)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Initial occupancy per station.
    pub home_counts: Vec<u32>,
    /// Post-switching counts per station.
    pub counts: Vec<u32>,
    /// MW per station.
    pub p_ev: Vec<f64>,
    /// Chosen station index per owner.
    pub assignment: Vec<usize>,
}

impl Scenario {
    pub fn n_owners(&self) -> usize {
        self.assignment.len()
    }

    /// Binary owner-by-station assignment.
    pub fn delta(&self) -> Vec<Vec<u8>> {
        self.assignment
            .iter()
            .map(|&a| (0..self.counts.len()).map(|i| u8::from(i == a)).collect())
            .collect()
    }

    /// Demand had no one switched.
    pub fn baseline_p_ev(&self, ch_avg: f64) -> Vec<f64> {
        self.home_counts
            .iter()
            .map(|&n| n as f64 * ch_avg)
            .collect()
    }
}

/// One-shot switching of every owner against the given states.
pub fn simulate_scenario(pop: &OwnerPopulation, states: &[StationState]) -> Result<Scenario> {
    if states.len() != pop.n_stations {
        return Err(BehaviorError::StationMismatch {
            expected: pop.n_stations,
            got: states.len(),
        });
    }
    let assignment = pop
        .owners
        .iter()
        .map(|o| choose_station(states, o))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u32; pop.n_stations];
    for &a in &assignment {
        counts[a] += 1;
    }
    Ok(Scenario {
        home_counts: pop.home_counts(),
        p_ev: counts.iter().map(|&n| n as f64 * pop.ch_avg).collect(),
        counts,
        assignment,
    })
}

/// Independent generator for item `index` of a seeded family.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw<R: Rng + ?Sized>(rng: &mut R, r: Range) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

pub fn sample_population(cfg: &PopulationConfig, seed: u64) -> Result<OwnerPopulation> {
    sample_population_with(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_population_with<R: Rng + ?Sized>(
    cfg: &PopulationConfig,
    rng: &mut R,
) -> Result<OwnerPopulation> {
    cfg.validate()?;
    let mut owners = Vec::new();
    for (home, &rate) in cfg.arrivals.iter().enumerate() {
        let count = if !cfg.poisson {
            rate.round() as u64
        } else if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| BehaviorError::InvalidConfig(e.to_string()))?
                .sample(rng) as u64
        } else {
            0
        };
        for _ in 0..count {
            let raw: Vec<f64> = cfg.weight_ranges.iter().map(|&r| draw(rng, r)).collect();
            let weights = if raw.iter().sum::<f64>() > 0.0 {
                WeightVector::normalized(&raw)?
            } else {
                // All draws hit zero: fall back to the ranges' upper ends.
                WeightVector::normalized(&cfg.weight_ranges.map(|r| r[1]))?
            };
            let thresholds = (0..N_CRITERIA)
                .map(|j| {
                    let q = draw(rng, cfg.tau_q_ranges[j]);
                    PreferenceThresholds::new(q, q + draw(rng, cfg.tau_gap_ranges[j]))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            owners.push(Owner {
                id: owners.len(),
                home,
                weights,
                thresholds,
                bias_strength: draw(rng, cfg.bias_range),
                beta: draw(rng, cfg.beta_range),
            });
        }
    }
    OwnerPopulation::new(owners, cfg.ch_avg_mw, cfg.n_stations())
}

/// Fresh population and its switching outcome for one scenario index.
pub fn scenario_at(
    net: &Network,
    cfg: &PopulationConfig,
    seed: u64,
    index: u64,
) -> Result<(OwnerPopulation, Scenario)> {
    let pop = sample_population_with(cfg, &mut stream_rng(seed, index))?;
    let states = station_states(net, &pop, cfg.service_minutes)?;
    let sc = simulate_scenario(&pop, &states)?;
    Ok((pop, sc))
}

/// `k` scenarios, each with its own population. Output is independent of
/// the rayon pool size.
pub fn generate_scenarios(
    net: &Network,
    cfg: &PopulationConfig,
    k: usize,
    seed: u64,
) -> Result<Vec<Scenario>> {
    if net.stations.len() != cfg.n_stations() {
        return Err(BehaviorError::StationMismatch {
            expected: net.stations.len(),
            got: cfg.n_stations(),
        });
    }
    (0..k as u64)
        .into_par_iter()
        .map(|i| scenario_at(net, cfg, seed, i).map(|(_, s)| s))
        .collect()
}

/// Per-vehicle charge under a tariff deviation.
pub fn vehicle_charge(ch_avg: f64, beta: f64, d_lambda: f64) -> f64 {
    (ch_avg - beta * d_lambda).clamp(0.0, 2.0 * ch_avg)
}

/// Mean demand per station after the price response, using the population
/// mean sensitivity.
pub fn price_adjusted_mean(
    n_bar: &[f64],
    prices: &[f64],
    lambda_ref: &[f64],
    ch_avg: f64,
    beta_mean: f64,
) -> Result<Vec<f64>> {
    for len in [prices.len(), lambda_ref.len()] {
        if len != n_bar.len() {
            return Err(BehaviorError::StationMismatch {
                expected: n_bar.len(),
                got: len,
            });
        }
    }
    if let Some((index, &value)) = n_bar.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(BehaviorError::NegativeCount { index, value });
    }
    Ok(n_bar
        .iter()
        .zip(prices.iter().zip(lambda_ref))
        .map(|(&n, (&l, &r))| n * vehicle_charge(ch_avg, beta_mean, l - r))
        .collect())
}

/// Realized demand of a switched population with each owner's own
/// sensitivity.
pub fn realized_demand(
    pop: &OwnerPopulation,
    sc: &Scenario,
    prices: &[f64],
    lambda_ref: &[f64],
) -> Vec<f64> {
    let mut p = vec![0.0; pop.n_stations];
    for (o, &i) in pop.owners.iter().zip(&sc.assignment) {
        p[i] += vehicle_charge(pop.ch_avg, o.beta, prices[i] - lambda_ref[i]);
    }
    p
}

/// Mean post-switching count per station.
pub fn mean_counts(scenarios: &[Scenario]) -> Vec<f64> {
    let Some(first) = scenarios.first() else {
        return Vec::new();
    };
    let k = scenarios.len() as f64;
    (0..first.counts.len())
        .map(|i| scenarios.iter().map(|s| s.counts[i] as f64).sum::<f64>() / k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn owner(home: usize, w: [f64; 3], bias: f64) -> Owner {
        Owner {
            id: 0,
            home,
            weights: WeightVector::new(w.to_vec()).unwrap(),
            thresholds: vec![
                PreferenceThresholds::new(0.0, 0.05).unwrap(),
                PreferenceThresholds::new(0.0, 10.0).unwrap(),
                PreferenceThresholds::new(0.0, 0.5).unwrap(),
            ],
            bias_strength: bias,
            beta: 0.2,
        }
    }

    fn state(id: u32, price: f64, cong: f64) -> StationState {
        StationState {
            station_id: id,
            price,
            occupancy: 0,
            congestion_minutes: cong,
        }
    }

    #[test]
    fn identical_stations_keep_owner() {
        let s = [state(1, 0.3, 10.0), state(2, 0.3, 10.0)];
        assert_eq!(
            choose_station(&s, &owner(1, [0.5, 0.5, 0.0], 0.0)).unwrap(),
            1
        );
    }

    #[test]
    fn price_only_owner_moves_to_cheaper() {
        let s = [state(1, 0.40, 10.0), state(2, 0.30, 10.0)];
        assert_eq!(
            choose_station(&s, &owner(0, [1.0, 0.0, 0.0], 0.0)).unwrap(),
            1
        );
    }

    #[test]
    fn dominant_bias_pins_owner() {
        let s = [
            state(1, 0.30, 0.0),
            state(2, 0.01, 0.0),
            state(3, 0.02, 0.0),
        ];
        // w_b > 2(n-1)/(3n-2) = 4/7 for n = 3
        let o = owner(0, [0.4, 0.0, 0.6], 1e9);
        assert_eq!(choose_station(&s, &o).unwrap(), 0);
    }

    #[test]
    fn performance_orientation() {
        let s = [state(1, 0.3, 12.0), state(2, 0.2, 3.0)];
        let t = station_performance(&s, &owner(1, [1.0, 0.0, 0.0], 0.7)).unwrap();
        assert_eq!(t.get(0, PRICE), -0.3);
        assert_eq!(t.get(1, CONGESTION), -3.0);
        assert_eq!(t.get(0, BIAS), 0.0);
        assert_eq!(t.get(1, BIAS), 0.7);
    }

    #[test]
    fn ten_price_only_owners_all_switch() {
        let owners = (0..10)
            .map(|i| Owner {
                id: i,
                ..owner(i % 2, [1.0, 0.0, 0.0], 0.0)
            })
            .collect();
        let pop = OwnerPopulation::new(owners, 0.05, 2).unwrap();
        let sc = simulate_scenario(&pop, &[state(1, 0.5, 0.0), state(2, 0.2, 0.0)]).unwrap();
        assert_eq!(sc.counts, vec![0, 10]);
        assert!((sc.p_ev[1] - 0.5).abs() < 1e-12);
        assert!(sc
            .delta()
            .iter()
            .all(|r| r.iter().map(|&x| x as u32).sum::<u32>() == 1));
    }

    #[test]
    fn sampling_is_deterministic_and_normalized() {
        let cfg = PopulationConfig {
            arrivals: vec![25.0; 4],
            poisson: false,
            ..Default::default()
        };
        let a = sample_population(&cfg, 42).unwrap();
        assert_eq!(a, sample_population(&cfg, 42).unwrap());
        assert_eq!(a.len(), 100);
        for o in &a.owners {
            assert!((o.weights.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(o.thresholds.iter().all(|t| t.tau_q() < t.tau_p()));
        }
    }

    #[test]
    fn degenerate_weight_range_gives_price_only() {
        let cfg = PopulationConfig {
            weight_ranges: [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]],
            ..Default::default()
        };
        let pop = sample_population(&cfg, 7).unwrap();
        assert!(pop
            .owners
            .iter()
            .all(|o| o.weights.as_slice() == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn invalid_configs() {
        let gap = PopulationConfig {
            tau_gap_ranges: [[0.0, 0.1], [1.0, 2.0], [1.0, 2.0]],
            ..Default::default()
        };
        assert!(matches!(
            sample_population(&gap, 1),
            Err(BehaviorError::InvalidConfig(_))
        ));
        let empty = PopulationConfig {
            arrivals: vec![0.0, 0.0],
            ..Default::default()
        };
        assert!(matches!(
            sample_population(&empty, 1),
            Err(BehaviorError::EmptyPopulation)
        ));
    }

    #[test]
    fn price_adjusted_mean_cases() {
        let p = price_adjusted_mean(&[10.0], &[1.3], &[0.3], 0.05, 0.01).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-12);
        let p = price_adjusted_mean(&[4.0, 2.0], &[0.3, 0.3], &[0.3, 0.3], 0.05, 0.3).unwrap();
        assert_eq!(p, vec![0.2, 0.1]);
        let p = price_adjusted_mean(&[4.0], &[10.0], &[0.3], 0.05, 0.3).unwrap();
        assert_eq!(p, vec![0.0]);
        assert!(matches!(
            price_adjusted_mean(&[-1.0], &[0.3], &[0.3], 0.05, 0.3),
            Err(BehaviorError::NegativeCount { .. })
        ));
    }
}
