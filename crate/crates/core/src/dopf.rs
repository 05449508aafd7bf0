//! Chance-constrained LinDistFlow dispatch with affine generator recourse.
//!
//! Station demand is `mean_ref + ω` with `Cov(ω) = Σ`. Generators follow
//! `p_g + α·(1ᵀω)`, so flows and voltages deviate affinely in `ω`. Each
//! chance constraint becomes `y + η·sd(ỹ) ≤ y_max`, where `sd(ỹ)` is a norm
//! affine in `α` and is carried by an auxiliary second-order cone.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::covariance_factor;
use crate::conic::{ConicModel, ConicSolver, LinExpr, SolveStatus, SolverError};
use crate::netmodel::{Generator, IncidenceMap, Network};
use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum DopfError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {what} has {got} entries, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mean load {load_mw:.4} MW exceeds total generation capacity {capacity_mw:.4} MW")]
    CapacityShortfall { load_mw: f64, capacity_mw: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solution residual {residual:.3e} at `{constraint}` exceeds tolerance")]
    Residual { residual: f64, constraint: String },
    #[error("objective check failed: solver {solver}, recomputed {recomputed}")]
    ObjectiveMismatch { solver: f64, recomputed: f64 },
}

pub type Result<T> = std::result::Result<T, DopfError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Deterministic,
    Drcc,
    DrccPm,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Deterministic, Mode::Drcc, Mode::DrccPm];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Deterministic => "deterministic",
            Mode::Drcc => "drcc",
            Mode::DrccPm => "drcc_pm",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Deterministic => "Deterministic",
            Mode::Drcc => "DRCC",
            Mode::DrccPm => "DRCC+PM",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '+'], "_")
            .as_str()
        {
            "deterministic" | "det" => Ok(Mode::Deterministic),
            "drcc" => Ok(Mode::Drcc),
            "drcc_pm" | "drccpm" | "pm" => Ok(Mode::DrccPm),
            other => Err(format!(
                "unknown mode `{other}` (expected deterministic, drcc or drcc_pm)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopfParams {
    pub eta: f64,
    /// Reactive-to-real ratio of charging demand.
    pub z: f64,
    pub polygon_edges: usize,
    pub mode: Mode,
}

impl DopfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(DopfError::InvalidParams(format!(
                "z = {} must be >= 0",
                self.z
            )));
        }
        if self.polygon_edges < 4 || !self.polygon_edges.is_multiple_of(2) {
            return Err(DopfError::InvalidParams(format!(
                "polygon_edges = {} must be even and >= 4",
                self.polygon_edges
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(DopfError::InvalidParams(format!(
                "eta = {} must be >= 0",
                self.eta
            )));
        }
        Ok(())
    }

    /// Safety factor actually applied: zero for deterministic dispatch.
    pub fn effective_eta(&self) -> f64 {
        if self.mode == Mode::Deterministic {
            0.0
        } else {
            self.eta
        }
    }
}

/// One polygon edge `b1·p + b2·q ≤ b3·S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonEdge<T = f64> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
}

/// Edges of the regular polygon inscribed in the disk `p² + q² ≤ S²`.
pub fn polygon_coefficients<T: Scalar>(edges: usize) -> Result<Vec<PolygonEdge<T>>> {
    if edges < 4 {
        return Err(DopfError::InvalidParams(format!(
            "polygon needs >= 4 edges, got {edges}"
        )));
    }
    let pi = T::lit(std::f64::consts::PI);
    let n = T::from_count(edges);
    let b3 = (pi / n).cos();
    Ok((0..edges)
        .map(|c| {
            let th = T::lit(2.0) * pi * T::from_count(c) / n;
            PolygonEdge {
                b1: th.cos(),
                b2: th.sin(),
                b3,
            }
        })
        .collect())
}

/// Whether `(p, q)` lies in the polygon of the given rating.
pub fn polygon_contains<T: Scalar>(poly: &[PolygonEdge<T>], s_max: T, p: T, q: T) -> bool {
    poly.iter().all(|e| e.b1 * p + e.b2 * q <= e.b3 * s_max)
}

/// Covariance of `δ = ω − α·(1ᵀω)` for node-indexed `Σ` and `α`.
pub fn deviation_covariance(sigma: &DMatrix<f64>, alpha: &[f64]) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n || alpha.len() != n {
        return Err(DopfError::Dimension {
            what: "alpha",
            expected: n,
            got: alpha.len(),
        });
    }
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] -= alpha[i];
        }
    }
    Ok(&m * sigma * m.transpose())
}

/// Standard deviations of the flow and voltage deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainShift {
    /// Over non-root buses (columns of the downstream matrix), per-unit².
    pub dev_cov: DMatrix<f64>,
    pub sd_p_line: Vec<f64>,
    pub sd_q_line: Vec<f64>,
    /// Per bus; zero at the root.
    pub sd_v_bus: Vec<f64>,
}

/// Dense quadratic-form route: `sd(p̃_l) = √(a_lᵀ Cov(δ) a_l)` and the
/// voltage deviation aggregates `(r + z·x)`-weighted rows along each path.
pub fn deviation_stddevs(
    net: &Network,
    a: &IncidenceMap,
    sigma_bus: &DMatrix<f64>,
    alpha_bus: &[f64],
    z: f64,
) -> Result<UncertainShift> {
    let nc = a.n_cols();
    if sigma_bus.nrows() != nc || sigma_bus.ncols() != nc {
        return Err(DopfError::Dimension {
            what: "sigma_bus",
            expected: nc,
            got: sigma_bus.nrows(),
        });
    }
    let dev_cov = deviation_covariance(sigma_bus, alpha_bus)?;
    let quad = |v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..nc {
            if v[i] != 0.0 {
                for j in 0..nc {
                    s += v[i] * dev_cov[(i, j)] * v[j];
                }
            }
        }
        s.max(0.0).sqrt()
    };
    let rows: Vec<Vec<f64>> = (0..a.n_lines())
        .map(|l| {
            (0..nc)
                .map(|c| if a.get(l, c) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let sd_p_line: Vec<f64> = rows.iter().map(|r| quad(r)).collect();
    let sd_q_line = sd_p_line.iter().map(|s| z * s).collect();
    let mut sd_v_bus = vec![0.0; net.buses.len()];
    for (c, &bus) in a.col_bus().iter().enumerate() {
        let mut g = vec![0.0; nc];
        for (l, row) in rows.iter().enumerate() {
            if a.get(l, c) {
                let k = 2.0 * (net.lines[l].r + z * net.lines[l].x);
                for (gi, ri) in g.iter_mut().zip(row) {
                    *gi += k * ri;
                }
            }
        }
        sd_v_bus[bus] = quad(&g);
    }
    Ok(UncertainShift {
        dev_cov,
        sd_p_line,
        sd_q_line,
        sd_v_bus,
    })
}

/// Lifts a station covariance and per-generator α onto the non-root bus
/// columns of `a`. Root entries drop out: nothing upstream of the root.
pub fn lift_to_buses(
    net: &Network,
    a: &IncidenceMap,
    sigma_station: &DMatrix<f64>,
    alpha: &[f64],
) -> (DMatrix<f64>, Vec<f64>) {
    let nc = a.n_cols();
    let sb = net.station_buses();
    let mut sig = DMatrix::zeros(nc, nc);
    for (s, &bs) in sb.iter().enumerate() {
        for (t, &bt) in sb.iter().enumerate() {
            if let (Some(i), Some(j)) = (a.bus_col(bs), a.bus_col(bt)) {
                sig[(i, j)] += sigma_station[(s, t)];
            }
        }
    }
    let mut al = vec![0.0; nc];
    for (g, &b) in net.generator_buses().iter().enumerate() {
        if let Some(c) = a.bus_col(b) {
            al[c] += alpha[g];
        }
    }
    (sig, al)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub mode: Mode,
    pub status: SolveStatus,
    /// MW
    pub p_g: Vec<f64>,
    /// MVAr
    pub q_g: Vec<f64>,
    /// Squared voltage magnitude per bus, per-unit².
    pub v2: Vec<f64>,
    /// MW
    pub p_flow: Vec<f64>,
    /// MVAr
    pub q_flow: Vec<f64>,
    pub alpha: Vec<f64>,
    /// $
    pub objective: f64,
    /// Station demand the dispatch was balanced against, MW.
    pub p_ev_forecast: Vec<f64>,
    pub eta: f64,
    /// `1ᵀΣ1` used by the recourse cost, MW².
    pub sigma_total: f64,
    /// Reactive-to-real ratio of charging demand.
    pub z: f64,
}

/// Expected cost of the affine policy: nominal cost plus `c2·(1ᵀΣ1)·α²`.
pub fn expected_cost(p_g: &[f64], alpha: &[f64], sigma_total: f64, gens: &[Generator]) -> f64 {
    gens.iter()
        .zip(p_g.iter().zip(alpha))
        .map(|(g, (&p, &a))| g.cost_mw(p) + g.c2 * sigma_total * a * a)
        .sum()
}

impl Dispatch {
    pub fn expected_cost(&self, sigma: &DMatrix<f64>, gens: &[Generator]) -> f64 {
        expected_cost(&self.p_g, &self.alpha, sigma.sum(), gens)
    }
}

/// Variable indices of an assembled model.
#[derive(Debug, Clone)]
pub struct DopfLayout {
    pub pg: Vec<usize>,
    pub qg: Vec<usize>,
    pub v2: Vec<usize>,
    pub pf: Vec<usize>,
    pub qf: Vec<usize>,
    pub alpha: Vec<usize>,
    /// Auxiliary bound on `sd(p̃_l)`, when robust constraints are present.
    pub t_line: Vec<usize>,
    /// Auxiliary bound on `sd(ṽ_i)` per non-root bus column.
    pub t_bus: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DopfModel {
    pub model: ConicModel,
    pub layout: DopfLayout,
    pub params: DopfParams,
    pub net: Network,
    /// MW
    pub mean_ref: Vec<f64>,
    /// MW², as used by the objective.
    pub sigma_total: f64,
    /// Stacked tails of the auxiliary cones, for polishing.
    soc_tails: Vec<(usize, Vec<LinExpr>)>,
    diagnostics: Vec<String>,
}

impl DopfModel {
    /// Non-fatal observations made while assembling.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }
}

/// Builds the chance-constrained dispatch model.
///
/// `sigma` is the station covariance in MW² and `mean_ref` the station
/// demand forecast in MW. Deterministic mode ignores `sigma` and fixes equal
/// participation.
pub fn assemble_model(
    net: &Network,
    a: &IncidenceMap,
    sigma: &DMatrix<f64>,
    mean_ref: &[f64],
    params: &DopfParams,
) -> Result<DopfModel> {
    params.validate()?;
    let ns = net.stations.len();
    if mean_ref.len() != ns {
        return Err(DopfError::Dimension {
            what: "mean_ref",
            expected: ns,
            got: mean_ref.len(),
        });
    }
    if sigma.nrows() != ns || sigma.ncols() != ns {
        return Err(DopfError::Dimension {
            what: "sigma",
            expected: ns,
            got: sigma.nrows(),
        });
    }
    if let Some(v) = mean_ref.iter().find(|v| !v.is_finite()) {
        return Err(DopfError::InvalidParams(format!("non-finite forecast {v}")));
    }
    if a.n_lines() != net.lines.len() {
        return Err(DopfError::Dimension {
            what: "downstream matrix rows",
            expected: net.lines.len(),
            got: a.n_lines(),
        });
    }
    let load_mw = net.non_ev_load_mw() + mean_ref.iter().sum::<f64>();
    if load_mw > net.capacity_mw() {
        return Err(DopfError::CapacityShortfall {
            load_mw,
            capacity_mw: net.capacity_mw(),
        });
    }
    let mut diagnostics = Vec::new();
    let base = net.base_mva;
    let deterministic = params.mode == Mode::Deterministic;
    let eta = params.effective_eta();
    let z = params.z;
    let (nb, nl, ng) = (net.buses.len(), net.lines.len(), net.generators.len());
    let topo = net.topology();

    let sigma_pu = if deterministic {
        DMatrix::zeros(ns, ns)
    } else {
        sigma / (base * base)
    };
    let sigma_total = if deterministic { 0.0 } else { sigma.sum() };
    if sigma_total < 0.0 {
        return Err(DopfError::InvalidParams("1ᵀΣ1 is negative".into()));
    }
    let sd_total_pu = (sigma_total.max(0.0)).sqrt() / base;

    let mut m = ConicModel::new();
    let pg = m.add_vars("pg", ng);
    let qg = m.add_vars("qg", ng);
    let v2 = m.add_vars("v2", nb);
    let pf = m.add_vars("pf", nl);
    let qf = m.add_vars("qf", nl);
    let alpha = m.add_vars("alpha", ng);

    for (g, gen) in net.generators.iter().enumerate() {
        m.add_quadratic_cost(pg[g], pg[g], gen.c2 * base * base);
        m.add_linear_cost(pg[g], gen.c1 * base);
        m.add_constant_cost(gen.c0);
        m.add_quadratic_cost(alpha[g], alpha[g], gen.c2 * sigma_total);
    }

    // Nodal balance: inflow − outflow + generation − demand = 0.
    let sb = net.station_buses();
    let gb = net.generator_buses();
    for (i, bus) in net.buses.iter().enumerate() {
        let ev: f64 = sb
            .iter()
            .zip(mean_ref)
            .filter(|(b, _)| **b == i)
            .map(|(_, p)| p / base)
            .sum();
        let mut ep = LinExpr::constant(-(bus.p_load + ev));
        let mut eq = LinExpr::constant(-(bus.q_load + z * ev));
        for l in 0..nl {
            if topo.downstream[l] == i {
                ep = ep.add(pf[l], 1.0);
                eq = eq.add(qf[l], 1.0);
            } else if topo.upstream[l] == i {
                ep = ep.add(pf[l], -1.0);
                eq = eq.add(qf[l], -1.0);
            }
        }
        for (g, &b) in gb.iter().enumerate() {
            if b == i {
                ep = ep.add(pg[g], 1.0);
                eq = eq.add(qg[g], 1.0);
            }
        }
        m.add_eq(format!("bus {} real balance", bus.id), ep);
        m.add_eq(format!("bus {} reactive balance", bus.id), eq);
    }

    for (l, line) in net.lines.iter().enumerate() {
        let (u, d) = (topo.upstream[l], topo.downstream[l]);
        m.add_eq(
            format!("line {}-{} voltage drop", line.from, line.to),
            LinExpr::var(v2[d])
                .add(v2[u], -1.0)
                .add(pf[l], 2.0 * line.r)
                .add(qf[l], 2.0 * line.x),
        );
    }

    m.add_eq(
        "participation sum",
        alpha
            .iter()
            .fold(LinExpr::constant(-1.0), |e, &v| e.add(v, 1.0)),
    );
    for (g, gen) in net.generators.iter().enumerate() {
        if deterministic {
            m.add_eq(
                format!("gen {} equal participation", gen.bus),
                LinExpr::var(alpha[g]).plus(-1.0 / ng as f64),
            );
        } else {
            m.add_ge0(
                format!("gen {} alpha >= 0", gen.bus),
                LinExpr::var(alpha[g]),
            );
        }
        let kp = eta * sd_total_pu;
        let kq = eta * z * sd_total_pu;
        m.add_ge0(
            format!("gen {} p_max", gen.bus),
            LinExpr::constant(gen.p_max)
                .add(pg[g], -1.0)
                .add(alpha[g], -kp),
        );
        m.add_ge0(
            format!("gen {} p_min", gen.bus),
            LinExpr::var(pg[g]).plus(-gen.p_min).add(alpha[g], -kp),
        );
        m.add_ge0(
            format!("gen {} q_max", gen.bus),
            LinExpr::constant(gen.q_max)
                .add(qg[g], -1.0)
                .add(alpha[g], -kq),
        );
        m.add_ge0(
            format!("gen {} q_min", gen.bus),
            LinExpr::var(qg[g]).plus(-gen.q_min).add(alpha[g], -kq),
        );
    }

    // Factor rows: tail_k(l) = (Fᵀ w_l)_k − (Fᵀ 1)_k · Σ_{g below l} α_g.
    let robust = eta > 0.0;
    let f = covariance_factor(&sigma_pu);
    let ft1: Vec<f64> = (0..ns).map(|k| (0..ns).map(|s| f[(s, k)]).sum()).collect();
    let line_tail = |l: usize| -> Vec<LinExpr> {
        (0..ns)
            .map(|k| {
                let fw: f64 = (0..ns)
                    .filter(|&s| a.serves(l, sb[s]))
                    .map(|s| f[(s, k)])
                    .sum();
                gb.iter()
                    .enumerate()
                    .filter(|(_, &b)| a.serves(l, b))
                    .fold(LinExpr::constant(fw), |e, (g, _)| e.add(alpha[g], -ft1[k]))
            })
            .collect()
    };
    let mut t_line = Vec::new();
    let mut t_bus = Vec::new();
    let mut soc_tails = Vec::new();
    let poly = polygon_coefficients::<f64>(params.polygon_edges)?;
    let tails: Vec<Vec<LinExpr>> = if robust {
        (0..nl).map(line_tail).collect()
    } else {
        Vec::new()
    };
    for (l, line) in net.lines.iter().enumerate() {
        let name = format!("line {}-{}", line.from, line.to);
        let t = if robust {
            let t = m.add_var(format!("sd_p[{l}]"));
            m.add_soc(
                format!("{name} flow deviation"),
                LinExpr::var(t),
                tails[l].clone(),
            );
            soc_tails.push((t, tails[l].clone()));
            t_line.push(t);
            Some(t)
        } else {
            None
        };
        for (c, e) in poly.iter().enumerate() {
            let mut expr = LinExpr::constant(e.b3 * line.s_max)
                .add(pf[l], -e.b1)
                .add(qf[l], -e.b2);
            if let Some(t) = t {
                expr = expr.add(t, -eta * (e.b1 + z * e.b2).abs());
            }
            m.add_ge0(format!("{name} polygon edge {c}"), expr);
        }
    }
    for (i, bus) in net.buses.iter().enumerate() {
        let mut lo = LinExpr::var(v2[i]).plus(-bus.v2_min);
        let mut hi = LinExpr::constant(bus.v2_max).add(v2[i], -1.0);
        if robust && i != topo.root {
            let mut tail: Vec<LinExpr> = vec![LinExpr::new(); ns];
            for (l, line) in net.lines.iter().enumerate() {
                if a.serves(l, i) {
                    let k = 2.0 * (line.r + z * line.x);
                    for (acc, row) in tail.iter_mut().zip(&tails[l]) {
                        *acc = std::mem::take(acc).add_expr(row, k);
                    }
                }
            }
            let t = m.add_var(format!("sd_v[{}]", bus.id));
            m.add_soc(
                format!("bus {} voltage deviation", bus.id),
                LinExpr::var(t),
                tail.clone(),
            );
            soc_tails.push((t, tail));
            t_bus.push(t);
            lo = lo.add(t, -eta);
            hi = hi.add(t, -eta);
        }
        m.add_ge0(format!("bus {} v_min", bus.id), lo);
        m.add_ge0(format!("bus {} v_max", bus.id), hi);
    }

    if !deterministic && sigma_total == 0.0 {
        diagnostics.push("covariance is zero: chance constraints reduce to nominal bounds".into());
    }
    Ok(DopfModel {
        model: m,
        layout: DopfLayout {
            pg,
            qg,
            v2,
            pf,
            qf,
            alpha,
            t_line,
            t_bus,
        },
        params: *params,
        net: net.clone(),
        mean_ref: mean_ref.to_vec(),
        sigma_total,
        soc_tails,
        diagnostics,
    })
}

/// Largest allowed primal residual of a returned dispatch, per-unit.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Relative tolerance of the independent objective recomputation.
pub const OBJECTIVE_RTOL: f64 = 1e-6;

/// Solves an assembled model and validates the result.
pub fn solve(dm: &DopfModel, solver: &dyn ConicSolver) -> Result<Dispatch> {
    let sol = solver.solve(&dm.model)?;
    let solver_objective = sol.objective;
    let x = polish(dm, sol.x);
    let (residual, culprit) = dm.model.max_violation(&x);
    if residual > RESIDUAL_TOL {
        return Err(DopfError::Residual {
            residual,
            constraint: culprit.unwrap_or("?").to_string(),
        });
    }
    let base = dm.net.base_mva;
    let lay = &dm.layout;
    let pick = |idx: &[usize], scale: f64| idx.iter().map(|&v| x[v] * scale).collect::<Vec<f64>>();
    let p_g = pick(&lay.pg, base);
    let alpha = pick(&lay.alpha, 1.0);
    let objective = expected_cost(&p_g, &alpha, dm.sigma_total, &dm.net.generators);
    if (objective - solver_objective).abs() > OBJECTIVE_RTOL * objective.abs().max(1.0) {
        return Err(DopfError::ObjectiveMismatch {
            solver: solver_objective,
            recomputed: objective,
        });
    }
    Ok(Dispatch {
        mode: dm.params.mode,
        status: sol.status,
        q_g: pick(&lay.qg, base),
        v2: pick(&lay.v2, 1.0),
        p_flow: pick(&lay.pf, base),
        q_flow: pick(&lay.qf, base),
        p_g,
        alpha,
        objective,
        p_ev_forecast: dm.mean_ref.clone(),
        eta: dm.params.effective_eta(),
        sigma_total: dm.sigma_total,
        z: dm.params.z,
    })
}

/// Assembles and solves in one step.
pub fn solve_dopf(
    net: &Network,
    a: &IncidenceMap,
    sigma: &DMatrix<f64>,
    mean_ref: &[f64],
    params: &DopfParams,
    solver: &dyn ConicSolver,
) -> Result<Dispatch> {
    solve(&assemble_model(net, a, sigma, mean_ref, params)?, solver)
}

/// Removes interior-point noise: renormalizes α, recomputes flows from the
/// injections, propagates voltages from the root and tightens the auxiliary
/// norm bounds.
fn polish(dm: &DopfModel, mut x: Vec<f64>) -> Vec<f64> {
    let lay = &dm.layout;
    let net = &dm.net;
    let topo = net.topology();
    let base = net.base_mva;
    let z = dm.params.z;

    let total: f64 = lay.alpha.iter().map(|&v| x[v].max(0.0)).sum();
    if total > 0.0 {
        for &v in &lay.alpha {
            x[v] = x[v].max(0.0) / total;
        }
    }

    let nb = net.buses.len();
    let mut net_p = vec![0.0; nb];
    let mut net_q = vec![0.0; nb];
    for (i, bus) in net.buses.iter().enumerate() {
        net_p[i] = bus.p_load;
        net_q[i] = bus.q_load;
    }
    for (s, &b) in net.station_buses().iter().enumerate() {
        net_p[b] += dm.mean_ref[s] / base;
        net_q[b] += z * dm.mean_ref[s] / base;
    }
    for (g, &b) in net.generator_buses().iter().enumerate() {
        net_p[b] -= x[lay.pg[g]];
        net_q[b] -= x[lay.qg[g]];
    }
    // Leaves first: a line carries its downstream bus's demand plus its children's flows.
    let mut fp = vec![0.0; net.lines.len()];
    let mut fq = vec![0.0; net.lines.len()];
    let mut acc_p = net_p.clone();
    let mut acc_q = net_q.clone();
    for &i in topo.bfs_order.iter().rev() {
        if let Some(l) = topo.feeder_line[i] {
            fp[l] = acc_p[i];
            fq[l] = acc_q[i];
            acc_p[topo.upstream[l]] += acc_p[i];
            acc_q[topo.upstream[l]] += acc_q[i];
        }
    }
    // The root balance absorbs the rounding of the generator outputs there.
    for l in 0..net.lines.len() {
        x[lay.pf[l]] = fp[l];
        x[lay.qf[l]] = fq[l];
    }
    for &i in &topo.bfs_order {
        if let Some(l) = topo.feeder_line[i] {
            let line = &net.lines[l];
            x[lay.v2[i]] = x[lay.v2[topo.upstream[l]]] - 2.0 * (line.r * fp[l] + line.x * fq[l]);
        }
    }
    for (t, tail) in &dm.soc_tails {
        let norm = tail.iter().map(|e| e.eval(&x).powi(2)).sum::<f64>().sqrt();
        x[*t] = norm;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ClarabelSolver;
    use crate::netmodel::tests::{bus, gen, line};
    use crate::netmodel::{downstream_matrix, BusKind, Evcs};

    fn two_bus(p_max: f64) -> Network {
        let mut g = gen(1);
        g.p_max = p_max;
        Network::new(
            "two",
            1.0,
            vec![bus(1, BusKind::Root, 0.0), bus(2, BusKind::Load, 0.0)],
            vec![line(1, 2)],
            vec![g],
            vec![Evcs {
                id: 1,
                bus: 2,
                chargers: 4,
                lambda_nominal: 0.3,
                lambda_offered: 0.3,
            }],
        )
        .unwrap()
    }

    fn params(mode: Mode, eta: f64) -> DopfParams {
        DopfParams {
            eta,
            z: 0.2,
            polygon_edges: 12,
            mode,
        }
    }

    #[test]
    fn polygon_first_edge_and_apothem() {
        let p = polygon_coefficients::<f64>(12).unwrap();
        assert_eq!((p[0].b1, p[0].b2), (1.0, 0.0));
        assert!((p[0].b3 - 0.965_925_826_289_068_3).abs() < 1e-15);
        assert!(polygon_contains(&p, 2.0, p[0].b3 * 2.0, 0.0));
        assert!(polygon_contains(&p, 2.0, 0.9659 * 2.0, 0.0));
        assert!(!polygon_contains(&p, 2.0, 0.96593 * 2.0, 0.0));
        assert!(!polygon_contains(&p, 2.0, 2.0, 0.0));
        assert!(polygon_coefficients::<f64>(3).is_err());
        let p32 = polygon_coefficients::<f32>(12).unwrap();
        assert!((p32[0].b3 - 0.965_925_8).abs() < 1e-6);
    }

    #[test]
    fn deviation_covariance_two_nodes() {
        let c = deviation_covariance(&DMatrix::identity(2, 2), &[0.5, 0.5]).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((c - expect).abs().max() < 1e-15);
    }

    #[test]
    fn alpha_at_the_only_station_cancels() {
        let c = deviation_covariance(
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 3.0]),
            &[0.0, 1.0],
        )
        .unwrap();
        assert!(c.abs().max() < 1e-15);
    }

    #[test]
    fn two_bus_lossless_balance() {
        let net = two_bus(5.0);
        let a = downstream_matrix(&net);
        let d = solve_dopf(
            &net,
            &a,
            &DMatrix::zeros(1, 1),
            &[1.0],
            &params(Mode::Drcc, 3.16),
            &ClarabelSolver::default(),
        )
        .unwrap();
        assert!((d.p_g[0] - 1.0).abs() < 1e-7);
        assert_eq!(d.alpha, vec![1.0]);
        assert!((d.p_flow[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_shortfall_is_diagnosed() {
        let net = two_bus(0.5);
        let a = downstream_matrix(&net);
        let err = assemble_model(
            &net,
            &a,
            &DMatrix::zeros(1, 1),
            &[1.0],
            &params(Mode::Deterministic, 0.0),
        )
        .unwrap_err();
        assert!(matches!(err, DopfError::CapacityShortfall { .. }));
    }

    #[test]
    fn expected_cost_recourse_term() {
        let mut g = gen(1);
        (g.c2, g.c1, g.c0) = (2.0, 0.0, 0.0);
        assert_eq!(expected_cost(&[0.0], &[1.0], 4.0, &[g]), 8.0);
    }

    #[test]
    fn mode_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("DRCC+PM".parse::<Mode>().unwrap(), Mode::DrccPm);
    }
}
