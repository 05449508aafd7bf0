//! Monte-Carlo evaluation of fixed dispatches.
//!
//! Each realization moves the station demand away from the forecast the
//! dispatch was balanced against. Generators respond through their
//! participation factors and every remaining infeasibility is absorbed by a
//! penalized nonnegative slack.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::covariance_factor;
use crate::behavior::{self, BehaviorError, PopulationConfig};
use crate::dopf::{polygon_coefficients, Dispatch, DopfError, Mode};
use crate::netmodel::{IncidenceMap, Network};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("realization count must be >= 1")]
    NoRealizations,
    #[error("nothing to summarize")]
    Empty,
    #[error("dimension mismatch: {what} has {got} entries, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("modes were evaluated on different realization sets ({0})")]
    MismatchedRealizations(String),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Dopf(#[from] DopfError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationSource {
    Gaussian,
    Behavioral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// MW per station, nonnegative.
    pub p_ev: Vec<f64>,
    pub source: RealizationSource,
    /// Initial and post-switching vehicle counts for behavioral draws.
    pub counts: Option<(Vec<u32>, Vec<u32>)>,
}

/// Draws `mean + F·ξ` with `Σ = F Fᵀ`, `ξ ~ N(0, I)`, clipped at zero.
pub fn gaussian_realizations(
    mean: &[f64],
    cov: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(EvalError::NoRealizations);
    }
    let n = mean.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(EvalError::Dimension {
            what: "covariance",
            expected: n,
            got: cov.nrows(),
        });
    }
    let f = covariance_factor(cov);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = behavior::stream_rng(seed, i);
            let xi: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p_ev = (0..n)
                .map(|r| (mean[r] + (0..n).map(|c| f[(r, c)] * xi[c]).sum::<f64>()).max(0.0))
                .collect();
            Realization {
                p_ev,
                source: RealizationSource::Gaussian,
                counts: None,
            }
        })
        .collect())
}

/// Fresh populations switched by the behavior model, each owner charging
/// according to their own price sensitivity.
pub fn behavioral_realizations(
    net: &Network,
    cfg: &PopulationConfig,
    lambda_ref: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(EvalError::NoRealizations);
    }
    let prices: Vec<f64> = net.stations.iter().map(|s| s.lambda_offered).collect();
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let (pop, sc) = behavior::scenario_at(net, cfg, seed, i)?;
            Ok(Realization {
                p_ev: behavior::realized_demand(&pop, &sc, &prices, lambda_ref),
                source: RealizationSource::Behavioral,
                counts: Some((sc.home_counts, sc.counts)),
            })
        })
        .collect()
}

/// Linear slack prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Penalties {
    /// $/MW of real-power imbalance.
    pub balance: f64,
    /// $/MVA of apparent-power excess on a line.
    pub line: f64,
    /// $ per per-unit² of voltage excursion.
    pub voltage: f64,
    /// $/MVAr of reactive generator-limit excess.
    pub reactive: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            balance: 1000.0,
            line: 500.0,
            voltage: 500.0,
            reactive: 1000.0,
        }
    }
}

/// Tolerance below which a slack counts as zero for `feasible`.
pub const FEASIBLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RedispatchResult {
    /// Upward real-power shortfall per generator, MW.
    pub slack_up: Vec<f64>,
    /// Downward real-power surplus per generator, MW.
    pub slack_down: Vec<f64>,
    /// Reactive limit excess per generator, MVAr.
    pub q_slack: Vec<f64>,
    /// Per bus, per-unit².
    pub voltage_slacks: Vec<f64>,
    /// Per line, MVA.
    pub line_slacks: Vec<f64>,
    /// Cost of the realized (limit-clipped) generation, $.
    pub generation_cost: f64,
    pub penalty_cost: f64,
    pub feasible: bool,
}

impl RedispatchResult {
    pub fn total_cost(&self) -> f64 {
        self.generation_cost + self.penalty_cost
    }

    pub fn d_bar(&self) -> f64 {
        self.slack_up.iter().sum()
    }

    pub fn d_under(&self) -> f64 {
        self.slack_down.iter().sum()
    }
}

/// Slack-based redispatch of a fixed dispatch under one realization.
///
/// With every decision fixed, each slack appears in exactly one constraint,
/// so the penalty-minimizing slacks are the positive parts of the
/// corresponding limit excesses.
pub fn redispatch(
    net: &Network,
    d: &Dispatch,
    r: &Realization,
    pen: &Penalties,
) -> Result<RedispatchResult> {
    let (ng, ns, nb, nl) = (
        net.generators.len(),
        net.stations.len(),
        net.buses.len(),
        net.lines.len(),
    );
    for (what, got, expected) in [
        ("p_g", d.p_g.len(), ng),
        ("alpha", d.alpha.len(), ng),
        ("realization", r.p_ev.len(), ns),
        ("forecast", d.p_ev_forecast.len(), ns),
        ("v2", d.v2.len(), nb),
    ] {
        if got != expected {
            return Err(EvalError::Dimension {
                what,
                expected,
                got,
            });
        }
    }
    let alpha: Vec<f64> = if d.mode == Mode::Deterministic {
        vec![1.0 / ng as f64; ng]
    } else {
        d.alpha.clone()
    };
    let omega: f64 = r
        .p_ev
        .iter()
        .zip(&d.p_ev_forecast)
        .map(|(a, f)| a - f)
        .sum();
    let base = net.base_mva;

    let mut slack_up = vec![0.0; ng];
    let mut slack_down = vec![0.0; ng];
    let mut q_slack = vec![0.0; ng];
    let mut generation_cost = 0.0;
    let mut target_p = vec![0.0; ng];
    let mut target_q = vec![0.0; ng];
    let z = d.z;
    for (g, gen) in net.generators.iter().enumerate() {
        let t = d.p_g[g] + alpha[g] * omega;
        let (lo, hi) = (base * gen.p_min, base * gen.p_max);
        slack_up[g] = (t - hi).max(0.0);
        slack_down[g] = (lo - t).max(0.0);
        generation_cost += gen.cost_mw(t.clamp(lo, hi));
        target_p[g] = t;
        let tq = d.q_g[g] + alpha[g] * z * omega;
        q_slack[g] = (tq - base * gen.q_max).max(0.0) + (base * gen.q_min - tq).max(0.0);
        target_q[g] = tq;
    }

    // Net demand per bus in per-unit; slacks inject at generator buses, so
    // the network sees the policy targets.
    let mut net_p: Vec<f64> = net.buses.iter().map(|b| b.p_load).collect();
    let mut net_q: Vec<f64> = net.buses.iter().map(|b| b.q_load).collect();
    for (s, &b) in net.station_buses().iter().enumerate() {
        net_p[b] += r.p_ev[s] / base;
        net_q[b] += z * r.p_ev[s] / base;
    }
    for (g, &b) in net.generator_buses().iter().enumerate() {
        net_p[b] -= target_p[g] / base;
        net_q[b] -= target_q[g] / base;
    }
    let topo = net.topology();
    let mut fp = vec![0.0; nl];
    let mut fq = vec![0.0; nl];
    for &i in topo.bfs_order.iter().rev() {
        if let Some(l) = topo.feeder_line[i] {
            fp[l] = net_p[i];
            fq[l] = net_q[i];
            let u = topo.upstream[l];
            net_p[u] += net_p[i];
            net_q[u] += net_q[i];
        }
    }
    let line_slacks: Vec<f64> = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| base * (fp[l].hypot(fq[l]) - line.s_max).max(0.0))
        .collect();
    let mut v2 = vec![0.0; nb];
    v2[topo.root] = d.v2[topo.root];
    for &i in &topo.bfs_order {
        if let Some(l) = topo.feeder_line[i] {
            let line = &net.lines[l];
            v2[i] = v2[topo.upstream[l]] - 2.0 * (line.r * fp[l] + line.x * fq[l]);
        }
    }
    let voltage_slacks: Vec<f64> = net
        .buses
        .iter()
        .zip(&v2)
        .map(|(b, &v)| (v - b.v2_max).max(0.0) + (b.v2_min - v).max(0.0))
        .collect();

    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let penalty_cost = pen.balance * (sum(&slack_up) + sum(&slack_down))
        + pen.reactive * sum(&q_slack)
        + pen.line * sum(&line_slacks)
        + pen.voltage * sum(&voltage_slacks);
    let feasible = slack_up
        .iter()
        .chain(&slack_down)
        .chain(&q_slack)
        .chain(&line_slacks)
        .map(|s| s / base)
        .chain(voltage_slacks.iter().copied())
        .all(|s| s <= FEASIBLE_TOL);
    Ok(RedispatchResult {
        slack_up,
        slack_down,
        q_slack,
        voltage_slacks,
        line_slacks,
        generation_cost,
        penalty_cost,
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Balance,
    Voltage,
    Line,
    Generator,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Balance,
        Category::Voltage,
        Category::Line,
        Category::Generator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Balance => "balance",
            Category::Voltage => "voltage",
            Category::Line => "line",
            Category::Generator => "generator",
        }
    }
}

/// Largest slack of each category in per-unit.
pub fn category_maxima(r: &RedispatchResult, base_mva: f64) -> [f64; 4] {
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    [
        max(&mut r.slack_up.iter().chain(&r.slack_down).map(|s| s / base_mva)),
        max(&mut r.voltage_slacks.iter().copied()),
        max(&mut r.line_slacks.iter().map(|s| s / base_mva)),
        max(&mut r.q_slack.iter().map(|s| s / base_mva)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationStats {
    pub violation_pct: f64,
    /// Percentage of realizations violating each category, in
    /// [`Category::ALL`] order.
    pub by_category: [f64; 4],
}

/// Share of realizations with any slack above `tol` (per-unit).
pub fn violation_stats(
    results: &[RedispatchResult],
    tol: f64,
    base_mva: f64,
) -> Result<ViolationStats> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut any = 0usize;
    let mut cat = [0usize; 4];
    for r in results {
        let m = category_maxima(r, base_mva);
        let mut hit = false;
        for (c, &v) in m.iter().enumerate() {
            if v > tol {
                cat[c] += 1;
                hit = true;
            }
        }
        any += usize::from(hit);
    }
    let pct = |k: usize| 100.0 * k as f64 / results.len() as f64;
    Ok(ViolationStats {
        violation_pct: pct(any),
        by_category: cat.map(pct),
    })
}

/// Empirical violation frequency of every chance constraint of `d` under
/// station deviations `ω = F·ξ`, `Σ = F Fᵀ` (MW²), clipped so demand stays
/// nonnegative. Constraint names follow the dispatch model's blocks.
pub fn chance_violation_rates(
    net: &Network,
    a: &IncidenceMap,
    d: &Dispatch,
    sigma: &DMatrix<f64>,
    edges: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    let ns = net.stations.len();
    if sigma.nrows() != ns || sigma.ncols() != ns {
        return Err(EvalError::Dimension {
            what: "covariance",
            expected: ns,
            got: sigma.nrows(),
        });
    }
    if samples == 0 {
        return Err(EvalError::NoRealizations);
    }
    let base = net.base_mva;
    let f = covariance_factor(sigma);
    let sb = net.station_buses();
    let gb = net.generator_buses();
    let root = net.root();
    let poly = polygon_coefficients::<f64>(edges)?;
    // Solver noise on active constraints must not count as a violation.
    let tol = 1e-7;

    let mut names = Vec::new();
    for g in &net.generators {
        for k in ["p_max", "p_min", "q_max", "q_min"] {
            names.push(format!("gen {} {k}", g.bus));
        }
    }
    for l in &net.lines {
        for c in 0..edges {
            names.push(format!("line {}-{} polygon edge {c}", l.from, l.to));
        }
    }
    for b in &net.buses {
        names.push(format!("bus {} v_min", b.id));
        names.push(format!("bus {} v_max", b.id));
    }
    let beta: Vec<f64> = (0..net.lines.len())
        .map(|l| {
            (0..gb.len())
                .filter(|&g| a.serves(l, gb[g]))
                .map(|g| d.alpha[g])
                .sum()
        })
        .collect();

    let mut counts = vec![0usize; names.len()];
    let mut rng = behavior::stream_rng(seed, 0);
    for _ in 0..samples {
        let xi: Vec<f64> = (0..ns).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w: Vec<f64> = (0..ns)
            .map(|r| ((0..ns).map(|c| f[(r, c)] * xi[c]).sum::<f64>()).max(-d.p_ev_forecast[r]))
            .collect();
        let total: f64 = w.iter().sum();
        let mut checks = Vec::with_capacity(names.len());
        for (g, gen) in net.generators.iter().enumerate() {
            let p = d.p_g[g] + d.alpha[g] * total;
            let q = d.q_g[g] + d.alpha[g] * d.z * total;
            checks.extend([
                p > gen.p_max * base + tol,
                p < gen.p_min * base - tol,
                q > gen.q_max * base + tol,
                q < gen.q_min * base - tol,
            ]);
        }
        let dev: Vec<f64> = (0..net.lines.len())
            .map(|l| {
                (0..ns)
                    .filter(|&s| a.serves(l, sb[s]))
                    .map(|s| w[s])
                    .sum::<f64>()
                    - beta[l] * total
            })
            .collect();
        for (l, line) in net.lines.iter().enumerate() {
            let (p, q) = (d.p_flow[l] + dev[l], d.q_flow[l] + d.z * dev[l]);
            checks.extend(
                poly.iter()
                    .map(|e| e.b1 * p + e.b2 * q > e.b3 * line.s_max * base + tol),
            );
        }
        for (i, bus) in net.buses.iter().enumerate() {
            let mut v = d.v2[i];
            if i != root {
                for (l, line) in net.lines.iter().enumerate() {
                    if a.serves(l, i) {
                        v -= 2.0 * (line.r + d.z * line.x) * dev[l] / base;
                    }
                }
            }
            checks.extend([v < bus.v2_min - tol / base, v > bus.v2_max + tol / base]);
        }
        for (c, hit) in counts.iter_mut().zip(checks) {
            *c += usize::from(hit);
        }
    }
    Ok(names
        .into_iter()
        .zip(counts)
        .map(|(n, c)| (n, c as f64 / samples as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub mode: Mode,
    /// Mean post-optimization cost, $.
    pub mean_cost: f64,
    /// Relative to the cheapest mode of a comparison; zero until compared.
    pub cost_increase_pct: f64,
    /// Mean upward imbalance, MW.
    pub d_bar: f64,
    /// Mean downward imbalance, MW.
    pub d_under: f64,
    pub violation_pct: f64,
    pub by_category: [f64; 4],
    pub realizations: usize,
    pub seed: u64,
}

/// Redispatches every realization, in index order.
pub fn evaluate(
    net: &Network,
    d: &Dispatch,
    realizations: &[Realization],
    pen: &Penalties,
    tol: f64,
    seed: u64,
) -> Result<(Vec<RedispatchResult>, EvalSummary)> {
    if realizations.is_empty() {
        return Err(EvalError::NoRealizations);
    }
    let results = realizations
        .par_iter()
        .map(|r| redispatch(net, d, r, pen))
        .collect::<Result<Vec<_>>>()?;
    let k = results.len() as f64;
    let stats = violation_stats(&results, tol, net.base_mva)?;
    let summary = EvalSummary {
        mode: d.mode,
        mean_cost: results
            .iter()
            .map(RedispatchResult::total_cost)
            .sum::<f64>()
            / k,
        cost_increase_pct: 0.0,
        d_bar: results.iter().map(RedispatchResult::d_bar).sum::<f64>() / k,
        d_under: results.iter().map(RedispatchResult::d_under).sum::<f64>() / k,
        violation_pct: stats.violation_pct,
        by_category: stats.by_category,
        realizations: results.len(),
        seed,
    };
    Ok((results, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<EvalSummary>,
}

/// Fills in the cost increase of each mode over the cheapest one.
pub fn compare(summaries: &[EvalSummary]) -> Result<ComparisonReport> {
    let first = summaries.first().ok_or(EvalError::Empty)?;
    if let Some(s) = summaries
        .iter()
        .find(|s| s.seed != first.seed || s.realizations != first.realizations)
    {
        return Err(EvalError::MismatchedRealizations(format!(
            "{} used seed {} x{}, {} used seed {} x{}",
            first.mode, first.seed, first.realizations, s.mode, s.seed, s.realizations
        )));
    }
    let best = summaries
        .iter()
        .map(|s| s.mean_cost)
        .fold(f64::INFINITY, f64::min);
    let rows = summaries
        .iter()
        .map(|s| EvalSummary {
            cost_increase_pct: if best > 0.0 {
                100.0 * (s.mean_cost - best) / best
            } else {
                0.0
            },
            ..s.clone()
        })
        .collect();
    Ok(ComparisonReport { rows })
}

impl ComparisonReport {
    pub fn row(&self, mode: Mode) -> Option<&EvalSummary> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// Fixed-width table with one column per mode.
    pub fn to_text(&self, system: &str) -> String {
        let mut out = String::new();
        let w = 16;
        let _ = write!(out, "{:<28}", system);
        for r in &self.rows {
            let _ = write!(out, "{:>w$}", r.mode.label());
        }
        out.push('\n');
        let line = |out: &mut String, name: &str, f: &dyn Fn(&EvalSummary) -> String| {
            let _ = write!(out, "{name:<28}");
            for r in &self.rows {
                let _ = write!(out, "{:>w$}", f(r));
            }
            out.push('\n');
        };
        line(&mut out, "Average cost ($)", &|r| {
            format!("{:.2}", r.mean_cost)
        });
        line(&mut out, "Cost increase (%)", &|r| {
            if r.cost_increase_pct == 0.0 {
                "-".into()
            } else {
                format!("{:.2}", r.cost_increase_pct)
            }
        });
        line(&mut out, "Imbalance metric D (MW)", &|r| {
            format!("{:.4}", r.d_bar)
        });
        line(&mut out, "Constraint violation (%)", &|r| {
            format!("{:.1}", r.violation_pct)
        });
        if let Some(r) = self.rows.first() {
            let _ = writeln!(out, "\n{} realizations, seed {}", r.realizations, r.seed);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::SolveStatus;
    use crate::netmodel::tests::{bus, gen, line};
    use crate::netmodel::{BusKind, Evcs};

    fn net(p_max: f64) -> Network {
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

    fn dispatch(p: f64) -> Dispatch {
        Dispatch {
            mode: Mode::Drcc,
            status: SolveStatus::Optimal,
            p_g: vec![p],
            q_g: vec![0.2 * p],
            v2: vec![1.0, 1.0 - 2.0 * (0.01 * p + 0.01 * 0.2 * p)],
            p_flow: vec![p],
            q_flow: vec![0.2 * p],
            alpha: vec![1.0],
            objective: 0.0,
            p_ev_forecast: vec![p],
            eta: 0.0,
            sigma_total: 0.0,
            z: 0.2,
        }
    }

    fn real(p: f64) -> Realization {
        Realization {
            p_ev: vec![p],
            source: RealizationSource::Gaussian,
            counts: None,
        }
    }

    #[test]
    fn forecast_realization_needs_no_slack() {
        let r = redispatch(
            &net(10.0),
            &dispatch(2.0),
            &real(2.0),
            &Penalties::default(),
        )
        .unwrap();
        assert!(r.feasible);
        assert_eq!(r.d_bar(), 0.0);
        assert_eq!(r.penalty_cost, 0.0);
    }

    #[test]
    fn shortfall_at_p_max() {
        let r = redispatch(&net(2.0), &dispatch(2.0), &real(3.0), &Penalties::default()).unwrap();
        assert!((r.d_bar() - 1.0).abs() < 1e-12);
        assert!(!r.feasible);
        assert!((r.penalty_cost - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn tight_voltage_bound_creates_slack() {
        let mut n = net(10.0);
        n.buses[1].v2_min = 0.9999;
        let n = Network::new("v", 1.0, n.buses, n.lines, n.generators, n.stations).unwrap();
        let r = redispatch(&n, &dispatch(2.0), &real(2.0), &Penalties::default()).unwrap();
        assert!(r.voltage_slacks[1] > 0.0);
        assert!(!r.feasible);
    }

    #[test]
    fn zero_covariance_draws_equal_mean() {
        let rs = gaussian_realizations(&[1.0, 2.0], &DMatrix::zeros(2, 2), 5, 3).unwrap();
        assert!(rs.iter().all(|r| r.p_ev == vec![1.0, 2.0]));
        assert!(gaussian_realizations(&[1.0], &DMatrix::zeros(1, 1), 0, 3).is_err());
    }

    #[test]
    fn stats_extremes() {
        let ok = redispatch(
            &net(10.0),
            &dispatch(2.0),
            &real(2.0),
            &Penalties::default(),
        )
        .unwrap();
        let bad = redispatch(&net(2.0), &dispatch(2.0), &real(3.0), &Penalties::default()).unwrap();
        assert_eq!(
            violation_stats(&[ok.clone(), ok.clone()], 1e-4, 1.0)
                .unwrap()
                .violation_pct,
            0.0
        );
        let s = violation_stats(&[bad.clone(), bad], 1e-4, 1.0).unwrap();
        assert_eq!(s.violation_pct, 100.0);
        assert_eq!(s.by_category[0], 100.0);
        assert!(violation_stats(&[], 1e-4, 1.0).is_err());
    }

    #[test]
    fn compare_rejects_mixed_seeds() {
        let s = EvalSummary {
            mode: Mode::Drcc,
            mean_cost: 10.0,
            cost_increase_pct: 0.0,
            d_bar: 0.0,
            d_under: 0.0,
            violation_pct: 0.0,
            by_category: [0.0; 4],
            realizations: 10,
            seed: 1,
        };
        let t = EvalSummary {
            mode: Mode::DrccPm,
            seed: 2,
            ..s.clone()
        };
        assert!(matches!(
            compare(&[s.clone(), t]),
            Err(EvalError::MismatchedRealizations(_))
        ));
        let same = compare(&[
            s.clone(),
            EvalSummary {
                mode: Mode::DrccPm,
                ..s
            },
        ])
        .unwrap();
        assert_eq!(same.rows[0].cost_increase_pct, 0.0);
        assert_eq!(same.rows[1].cost_increase_pct, 0.0);
    }
}
