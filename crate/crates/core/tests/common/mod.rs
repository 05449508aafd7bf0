#![allow(dead_code)]

use std::path::PathBuf;

use evcd_core::netmodel::{Bus, BusId, BusKind, Evcs, Generator, Line, Network};

pub fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn bus(id: BusId, p: f64) -> Bus {
    Bus {
        id,
        kind: if id == 0 {
            BusKind::Root
        } else {
            BusKind::Load
        },
        p_load: p,
        q_load: 0.0,
        v2_min: 0.81,
        v2_max: 1.21,
    }
}

pub fn line(from: BusId, to: BusId) -> Line {
    Line {
        from,
        to,
        r: 0.01,
        x: 0.01,
        s_max: 10.0,
    }
}

pub fn gen(bus: BusId, p_max: f64) -> Generator {
    Generator {
        bus,
        p_min: 0.0,
        p_max,
        q_min: -10.0,
        q_max: 10.0,
        c2: 1.0,
        c1: 10.0,
        c0: 0.0,
    }
}

pub fn station(id: u32, bus: BusId) -> Evcs {
    Evcs {
        id,
        bus,
        chargers: 4,
        lambda_nominal: 0.3,
        lambda_offered: 0.3,
    }
}

/// Tree on buses `0..=parents.len()`, bus `i + 1` hanging off `parents[i]`.
pub fn tree(parents: &[BusId], gens: Vec<Generator>, stations: Vec<Evcs>) -> Network {
    let n = parents.len() as BusId + 1;
    let buses = (0..n)
        .map(|i| bus(i, if i == 0 { 0.0 } else { 0.01 }))
        .collect();
    let lines = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| line(p, i as BusId + 1))
        .collect();
    Network::new("tree", 1.0, buses, lines, gens, stations).unwrap()
}
