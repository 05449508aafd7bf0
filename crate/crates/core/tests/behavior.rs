mod common;

use common::data_dir;
use evcd_core::behavior::{
    generate_scenarios, price_adjusted_mean, realized_demand, sample_population, scenario_at,
    simulate_scenario, station_states, PopulationConfig, StationState,
};
use evcd_core::netmodel::load_network;
use proptest::prelude::*;

fn states(prices: &[f64], cong: &[f64]) -> Vec<StationState> {
    prices
        .iter()
        .zip(cong)
        .enumerate()
        .map(|(i, (&price, &c))| StationState {
            station_id: i as u32 + 1,
            price,
            occupancy: 0,
            congestion_minutes: c,
        })
        .collect()
}

#[test]
fn seeded_population_repeats() {
    let cfg = PopulationConfig::default();
    assert_eq!(
        sample_population(&cfg, 42).unwrap(),
        sample_population(&cfg, 42).unwrap()
    );
    assert_ne!(
        sample_population(&cfg, 42).unwrap(),
        sample_population(&cfg, 43).unwrap()
    );
}

#[test]
fn hundred_owners_have_unit_weights() {
    let cfg = PopulationConfig {
        arrivals: vec![25.0; 4],
        poisson: false,
        ..Default::default()
    };
    let pop = sample_population(&cfg, 7).unwrap();
    assert_eq!(pop.len(), 100);
    for o in &pop.owners {
        assert!((o.weights.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for th in &o.thresholds {
            assert!(th.tau_p() > th.tau_q());
        }
        assert!((0.1..=0.5).contains(&o.beta));
    }
}

#[test]
fn overwhelming_bias_keeps_home_distribution() {
    let net = load_network(data_dir("ieee33")).unwrap();
    // bias weight >= 1/1.4 exceeds the 4-station dominance bound 6/10
    let cfg = PopulationConfig {
        weight_ranges: [[0.1, 0.2], [0.1, 0.2], [1.0, 1.0]],
        bias_range: [1e9, 1e9],
        ..Default::default()
    };
    for i in 0..20 {
        let (_, sc) = scenario_at(&net, &cfg, 5, i).unwrap();
        assert_eq!(sc.counts, sc.home_counts);
    }
}

#[test]
fn scenarios_conserve_vehicles() {
    let net = load_network(data_dir("ieee33")).unwrap();
    let cfg = PopulationConfig {
        arrivals: vec![50.0; 4],
        poisson: false,
        ..Default::default()
    };
    for sc in generate_scenarios(&net, &cfg, 200, 11).unwrap() {
        assert_eq!(sc.counts.iter().sum::<u32>(), 200);
        assert_eq!(sc.home_counts.iter().sum::<u32>(), 200);
        assert!((sc.p_ev.iter().sum::<f64>() - 200.0 * 0.05).abs() < 1e-9);
    }
}

#[test]
fn scenario_stream_is_pool_independent() {
    let net = load_network(data_dir("ieee33")).unwrap();
    let cfg = PopulationConfig::default();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| generate_scenarios(&net, &cfg, 64, 3).unwrap());
    let b = four.install(|| generate_scenarios(&net, &cfg, 64, 3).unwrap());
    assert_eq!(a, b);
    assert_eq!(a[17], scenario_at(&net, &cfg, 3, 17).unwrap().1);
}

#[test]
fn realized_demand_at_reference_price() {
    let net = load_network(data_dir("ieee33")).unwrap();
    let cfg = PopulationConfig::default();
    let (pop, sc) = scenario_at(&net, &cfg, 9, 0).unwrap();
    let p = realized_demand(&pop, &sc, &[0.3; 4], &[0.3; 4]);
    for (a, b) in p.iter().zip(&sc.p_ev) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn raising_one_price_never_attracts(
        seed in any::<u64>(),
        prices in proptest::collection::vec(0.1f64..0.5, 4),
        cong in proptest::collection::vec(0.0f64..60.0, 4),
        station in 0usize..4,
        raise in 0.0f64..0.3,
    ) {
        let pop = sample_population(&PopulationConfig::default(), seed).unwrap();
        let before = simulate_scenario(&pop, &states(&prices, &cong)).unwrap();
        let mut p2 = prices.clone();
        p2[station] += raise;
        let after = simulate_scenario(&pop, &states(&p2, &cong)).unwrap();
        prop_assert!(after.counts[station] <= before.counts[station]);
    }

    #[test]
    fn price_adjusted_mean_monotone(
        n_bar in proptest::collection::vec(0.0f64..100.0, 1..6),
        d1 in -1.0f64..1.0,
        d2 in -1.0f64..1.0,
        beta in 0.0f64..0.5,
    ) {
        let k = n_bar.len();
        let reference = vec![0.3; k];
        let at_ref = price_adjusted_mean(&n_bar, &reference, &reference, 0.05, beta).unwrap();
        for (m, n) in at_ref.iter().zip(&n_bar) {
            prop_assert!((m - n * 0.05).abs() <= 1e-12 * (1.0 + m.abs()));
        }
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = price_adjusted_mean(&n_bar, &vec![0.3 + lo; k], &reference, 0.05, beta).unwrap();
        let b = price_adjusted_mean(&n_bar, &vec![0.3 + hi; k], &reference, 0.05, beta).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(y <= x && *y >= 0.0);
        }
    }
}

#[test]
fn station_states_follow_home_occupancy() {
    let net = load_network(data_dir("ieee33")).unwrap();
    let pop = sample_population(&PopulationConfig::default(), 1).unwrap();
    let st = station_states(&net, &pop, 30.0).unwrap();
    for (s, n) in st.iter().zip(pop.home_counts()) {
        assert_eq!(s.occupancy, n);
        assert!((s.congestion_minutes - n as f64 / 10.0 * 30.0).abs() < 1e-12);
    }
    assert_eq!(st[0].price, 0.24);
}
