//! Radial feeder model: buses, lines, generators and charging stations.
//!
//! Quantities are held in per-unit on `base_mva` (powers) with voltages as
//! squared per-unit magnitudes. Cost coefficients stay in physical units
//! ($/MW², $/MW, $) and are applied to MW quantities.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub type BusId = u32;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: column `{column}`: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}: {what} references unknown bus {bus}")]
    DanglingBus {
        file: String,
        what: String,
        bus: BusId,
    },
    #[error("duplicate {what} id {id}")]
    Duplicate { what: &'static str, id: String },
    #[error("not radial: {0}")]
    NotRadial(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("bundle.meta: {0}")]
    Meta(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, NetworkError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Root,
    Load,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    /// Non-EV real load, per-unit.
    pub p_load: f64,
    /// Non-EV reactive load, per-unit.
    pub q_load: f64,
    pub v2_min: f64,
    pub v2_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    pub r: f64,
    pub x: f64,
    /// Apparent power rating, per-unit.
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// $/MW²
    pub c2: f64,
    /// $/MW
    pub c1: f64,
    /// $
    pub c0: f64,
}

impl Generator {
    /// Quadratic generation cost of an output given in MW.
    pub fn cost_mw(&self, p_mw: f64) -> f64 {
        self.c2 * p_mw * p_mw + self.c1 * p_mw + self.c0
    }
}

/// Charging station.
#[derive(Debug, Clone, PartialEq)]
pub struct Evcs {
    pub id: u32,
    pub bus: BusId,
    pub chargers: u32,
    /// Reference tariff, $/kWh.
    pub lambda_nominal: f64,
    /// Tariff offered by the operator, $/kWh.
    pub lambda_offered: f64,
}

/// Orientation of the tree away from the root.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Root bus index.
    pub root: usize,
    /// Per line: upstream bus index.
    pub upstream: Vec<usize>,
    /// Per line: downstream bus index.
    pub downstream: Vec<usize>,
    /// Per bus: the line feeding it (`None` for the root).
    pub feeder_line: Vec<Option<usize>>,
    /// Buses in breadth-first order from the root.
    pub bfs_order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub stations: Vec<Evcs>,
    bus_index: HashMap<BusId, usize>,
    topology: Topology,
}

impl Network {
    /// Validates and indexes a network whose quantities are already per-unit.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
        stations: Vec<Evcs>,
    ) -> Result<Self> {
        if !(base_mva > 0.0 && base_mva.is_finite()) {
            return Err(NetworkError::Invalid(format!(
                "base_mva must be positive, got {base_mva}"
            )));
        }
        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(NetworkError::Duplicate {
                    what: "bus",
                    id: b.id.to_string(),
                });
            }
            if !(b.v2_min < b.v2_max) {
                return Err(NetworkError::Invalid(format!(
                    "bus {}: v2_min must be below v2_max",
                    b.id
                )));
            }
            if b.kind == BusKind::Load && (b.p_load < 0.0 || b.q_load < 0.0) {
                return Err(NetworkError::Invalid(format!(
                    "bus {}: negative load",
                    b.id
                )));
            }
        }
        let roots: Vec<usize> = (0..buses.len())
            .filter(|&i| buses[i].kind == BusKind::Root)
            .collect();
        if roots.len() != 1 {
            return Err(NetworkError::Invalid(format!(
                "expected exactly one root bus, found {}",
                roots.len()
            )));
        }
        for l in &lines {
            for end in [l.from, l.to] {
                if !bus_index.contains_key(&end) {
                    return Err(NetworkError::DanglingBus {
                        file: "lines.csv".into(),
                        what: format!("line {}-{}", l.from, l.to),
                        bus: end,
                    });
                }
            }
            if l.r < 0.0 || l.x < 0.0 || !(l.s_max > 0.0) {
                return Err(NetworkError::Invalid(format!(
                    "line {}-{}: need r >= 0, x >= 0, s_max > 0",
                    l.from, l.to
                )));
            }
        }
        for g in &generators {
            if !bus_index.contains_key(&g.bus) {
                return Err(NetworkError::DanglingBus {
                    file: "generators.csv".into(),
                    what: "generator".into(),
                    bus: g.bus,
                });
            }
            if g.p_min > g.p_max || g.q_min > g.q_max || g.c2 < 0.0 {
                return Err(NetworkError::Invalid(format!(
                    "generator at bus {}: need p_min <= p_max, q_min <= q_max, c2 >= 0",
                    g.bus
                )));
            }
        }
        if generators.is_empty() {
            return Err(NetworkError::Invalid("no generators".into()));
        }
        let mut station_ids = HashSet::new();
        for s in &stations {
            if !station_ids.insert(s.id) {
                return Err(NetworkError::Duplicate {
                    what: "station",
                    id: s.id.to_string(),
                });
            }
            if !bus_index.contains_key(&s.bus) {
                return Err(NetworkError::DanglingBus {
                    file: "stations.csv".into(),
                    what: format!("station {}", s.id),
                    bus: s.bus,
                });
            }
            if s.chargers < 1 || s.lambda_nominal < 0.0 || s.lambda_offered < 0.0 {
                return Err(NetworkError::Invalid(format!(
                    "station {}: need chargers >= 1 and nonnegative prices",
                    s.id
                )));
            }
        }
        let topology = orient(&buses, &lines, &bus_index, roots[0])?;
        Ok(Self {
            name: name.into(),
            base_mva,
            buses,
            lines,
            generators,
            stations,
            bus_index,
            topology,
        })
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn root(&self) -> usize {
        self.topology.root
    }

    /// Bus index of each generator.
    pub fn generator_buses(&self) -> Vec<usize> {
        self.generators
            .iter()
            .map(|g| self.bus_index[&g.bus])
            .collect()
    }

    /// Bus index of each station.
    pub fn station_buses(&self) -> Vec<usize> {
        self.stations
            .iter()
            .map(|s| self.bus_index[&s.bus])
            .collect()
    }

    pub fn to_mw(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    pub fn to_pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    /// Total non-EV real load in MW.
    pub fn non_ev_load_mw(&self) -> f64 {
        self.to_mw(self.buses.iter().map(|b| b.p_load).sum())
    }

    /// Total generator real capacity in MW.
    pub fn capacity_mw(&self) -> f64 {
        self.to_mw(self.generators.iter().map(|g| g.p_max).sum())
    }
}

fn orient(
    buses: &[Bus],
    lines: &[Line],
    index: &HashMap<BusId, usize>,
    root: usize,
) -> Result<Topology> {
    let n = buses.len();
    if lines.len() + 1 != n {
        return Err(NetworkError::NotRadial(format!(
            "{} lines for {} buses (a tree needs {})",
            lines.len(),
            n,
            n.saturating_sub(1)
        )));
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (li, l) in lines.iter().enumerate() {
        let (a, b) = (index[&l.from], index[&l.to]);
        if a == b {
            return Err(NetworkError::NotRadial(format!(
                "self-loop at bus {}",
                l.from
            )));
        }
        adj[a].push((li, b));
        adj[b].push((li, a));
    }
    let mut upstream = vec![usize::MAX; lines.len()];
    let mut downstream = vec![usize::MAX; lines.len()];
    let mut feeder_line = vec![None; n];
    let mut seen = vec![false; n];
    let mut bfs_order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        bfs_order.push(u);
        for &(li, v) in &adj[u] {
            if Some(li) == feeder_line[u] {
                continue;
            }
            if seen[v] {
                return Err(NetworkError::NotRadial(format!(
                    "line {}-{} closes a cycle",
                    lines[li].from, lines[li].to
                )));
            }
            seen[v] = true;
            upstream[li] = u;
            downstream[li] = v;
            feeder_line[v] = Some(li);
            queue.push_back(v);
        }
    }
    if bfs_order.len() != n {
        let orphan = (0..n)
            .find(|&i| !seen[i])
            .map(|i| buses[i].id)
            .unwrap_or_default();
        return Err(NetworkError::NotRadial(format!(
            "bus {orphan} is not connected to the root"
        )));
    }
    Ok(Topology {
        root,
        upstream,
        downstream,
        feeder_line,
        bfs_order,
    })
}

/// Binary line-by-bus matrix: entry (l, j) is set when non-root bus j lies
/// below line l.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMap {
    n_lines: usize,
    /// Column index to bus index (non-root buses in bus order).
    col_bus: Vec<usize>,
    bus_col: Vec<Option<usize>>,
    entries: Vec<bool>,
}

impl IncidenceMap {
    pub fn n_lines(&self) -> usize {
        self.n_lines
    }

    pub fn n_cols(&self) -> usize {
        self.col_bus.len()
    }

    pub fn get(&self, line: usize, col: usize) -> bool {
        self.entries[line * self.col_bus.len() + col]
    }

    /// Whether bus (by bus index) is downstream of `line`. The root never is.
    pub fn serves(&self, line: usize, bus: usize) -> bool {
        self.bus_col[bus].is_some_and(|c| self.get(line, c))
    }

    pub fn col_bus(&self) -> &[usize] {
        &self.col_bus
    }

    pub fn bus_col(&self, bus: usize) -> Option<usize> {
        self.bus_col[bus]
    }

    /// `A · w` for a vector over columns.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n_cols());
        (0..self.n_lines)
            .map(|l| {
                (0..self.n_cols())
                    .filter(|&c| self.get(l, c))
                    .map(|c| w[c])
                    .sum()
            })
            .collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.n_cols())
            .map(|c| (0..self.n_lines).filter(|&l| self.get(l, c)).count())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_lines)
            .map(|l| {
                (0..self.n_cols())
                    .map(|c| u8::from(self.get(l, c)))
                    .collect()
            })
            .collect()
    }
}

/// Builds the downstream matrix by walking each bus's path to the root.
pub fn downstream_matrix(net: &Network) -> IncidenceMap {
    let topo = net.topology();
    let n = net.buses.len();
    let col_bus: Vec<usize> = (0..n).filter(|&i| i != topo.root).collect();
    let mut bus_col = vec![None; n];
    for (c, &b) in col_bus.iter().enumerate() {
        bus_col[b] = Some(c);
    }
    let n_lines = net.lines.len();
    let mut entries = vec![false; n_lines * col_bus.len()];
    for (c, &b) in col_bus.iter().enumerate() {
        let mut cur = b;
        while let Some(li) = topo.feeder_line[cur] {
            entries[li * col_bus.len() + c] = true;
            cur = topo.upstream[li];
        }
    }
    IncidenceMap {
        n_lines,
        col_bus,
        bus_col,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSummary {
    pub total_mw: f64,
    pub evcd_mw: f64,
    pub penetration_pct: f64,
}

/// EV penetration relative to a given non-EV load.
pub fn load_summary(non_ev_mw: f64, p_ev_mw: &[f64]) -> Result<LoadSummary> {
    if let Some(v) = p_ev_mw.iter().find(|v| !(**v >= 0.0)) {
        return Err(NetworkError::Invalid(format!(
            "negative EV demand entry {v}"
        )));
    }
    let evcd_mw: f64 = p_ev_mw.iter().sum();
    let penetration_pct = if non_ev_mw > 0.0 {
        100.0 * evcd_mw / non_ev_mw
    } else {
        0.0
    };
    Ok(LoadSummary {
        total_mw: non_ev_mw + evcd_mw,
        evcd_mw,
        penetration_pct,
    })
}

pub fn total_load(net: &Network, p_ev_mw: &[f64]) -> Result<LoadSummary> {
    if p_ev_mw.len() != net.stations.len() {
        return Err(NetworkError::Invalid(format!(
            "expected {} station demands, got {}",
            net.stations.len(),
            p_ev_mw.len()
        )));
    }
    load_summary(net.non_ev_load_mw(), p_ev_mw)
}

// ---------------------------------------------------------------------------
// Bundle loading

#[derive(Deserialize)]
struct Meta {
    name: String,
    base_mva: f64,
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(dir: &Path, file: &str, required: &[&str]) -> Result<Self> {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(NetworkError::MissingFile(path));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| malformed(file, 1, "-", e.to_string()))?;
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| malformed(file, 1, "-", e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        for col in required {
            if !headers.iter().any(|h| h == col) {
                return Err(malformed(file, 1, col, "missing header column".into()));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                malformed(file, line, "-", e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(Self {
            file: file.to_owned(),
            headers,
            rows,
        })
    }

    fn text<'a>(&self, rec: &'a csv::StringRecord, line: u64, col: &str) -> Result<&'a str> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == col)
            .expect("validated header");
        rec.get(idx)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed(&self.file, line, col, "empty field".into()))
    }

    fn num<T: std::str::FromStr>(&self, rec: &csv::StringRecord, line: u64, col: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.text(rec, line, col)?;
        raw.parse::<T>()
            .map_err(|e| malformed(&self.file, line, col, format!("cannot parse {raw:?}: {e}")))
    }
}

fn malformed(file: &str, line: u64, column: &str, message: String) -> NetworkError {
    NetworkError::Malformed {
        file: file.to_owned(),
        line,
        column: column.to_owned(),
        message,
    }
}

/// Loads a bundle directory (`bundle.meta` plus four CSV tables).
pub fn load_network(dir: impl AsRef<Path>) -> Result<Network> {
    let dir = dir.as_ref();
    let meta_path = dir.join("bundle.meta");
    if !meta_path.is_file() {
        return Err(NetworkError::MissingFile(meta_path));
    }
    let meta_text = fs::read_to_string(&meta_path).map_err(|source| NetworkError::Io {
        path: meta_path.clone(),
        source,
    })?;
    let meta: Meta = toml::from_str(&meta_text).map_err(|e| NetworkError::Meta(e.to_string()))?;
    if !(meta.base_mva > 0.0) {
        return Err(NetworkError::Meta(format!(
            "base_mva must be positive, got {}",
            meta.base_mva
        )));
    }
    let base = meta.base_mva;

    let t = Table::read(
        dir,
        "buses.csv",
        &["id", "kind", "p_load_mw", "q_load_mvar", "v2_min", "v2_max"],
    )?;
    let mut buses = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let kind = match t.text(rec, *line, "kind")? {
            "root" => BusKind::Root,
            "load" => BusKind::Load,
            other => {
                return Err(malformed(
                    "buses.csv",
                    *line,
                    "kind",
                    format!("expected root|load, got {other:?}"),
                ))
            }
        };
        buses.push(Bus {
            id: t.num(rec, *line, "id")?,
            kind,
            p_load: t.num::<f64>(rec, *line, "p_load_mw")? / base,
            q_load: t.num::<f64>(rec, *line, "q_load_mvar")? / base,
            v2_min: t.num(rec, *line, "v2_min")?,
            v2_max: t.num(rec, *line, "v2_max")?,
        });
    }

    let t = Table::read(
        dir,
        "lines.csv",
        &["from", "to", "r_pu", "x_pu", "s_max_mva"],
    )?;
    let mut lines = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        lines.push(Line {
            from: t.num(rec, *line, "from")?,
            to: t.num(rec, *line, "to")?,
            r: t.num(rec, *line, "r_pu")?,
            x: t.num(rec, *line, "x_pu")?,
            s_max: t.num::<f64>(rec, *line, "s_max_mva")? / base,
        });
    }

    let t = Table::read(
        dir,
        "generators.csv",
        &[
            "bus",
            "p_min_mw",
            "p_max_mw",
            "q_min_mvar",
            "q_max_mvar",
            "c2",
            "c1",
            "c0",
        ],
    )?;
    let mut generators = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        generators.push(Generator {
            bus: t.num(rec, *line, "bus")?,
            p_min: t.num::<f64>(rec, *line, "p_min_mw")? / base,
            p_max: t.num::<f64>(rec, *line, "p_max_mw")? / base,
            q_min: t.num::<f64>(rec, *line, "q_min_mvar")? / base,
            q_max: t.num::<f64>(rec, *line, "q_max_mvar")? / base,
            c2: t.num(rec, *line, "c2")?,
            c1: t.num(rec, *line, "c1")?,
            c0: t.num(rec, *line, "c0")?,
        });
    }

    let t = Table::read(
        dir,
        "stations.csv",
        &["id", "bus", "chargers", "lambda_nominal", "lambda_offered"],
    )?;
    let mut stations = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        stations.push(Evcs {
            id: t.num(rec, *line, "id")?,
            bus: t.num(rec, *line, "bus")?,
            chargers: t.num(rec, *line, "chargers")?,
            lambda_nominal: t.num(rec, *line, "lambda_nominal")?,
            lambda_offered: t.num(rec, *line, "lambda_offered")?,
        });
    }

    Network::new(meta.name, base, buses, lines, generators, stations)
}
