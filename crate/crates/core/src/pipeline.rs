//! Pipeline stages: simulate, estimate moments, dispatch, evaluate.
//!
//! Each stage has an in-memory form and a file form; the file forms only
//! read what earlier stages wrote, so running them one by one reproduces
//! the full run byte for byte.

use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::ambiguity::{self, eta, AmbiguityError, AmbiguityMode};
use crate::behavior::{self, BehaviorError};
use crate::config::{ConfigError, PipelineConfig};
use crate::conic::ClarabelSolver;
use crate::dopf::{self, Dispatch, DopfError, DopfParams, Mode};
use crate::io::{self, IoError, MomentSet, ScenarioCounts};
use crate::netmodel::{self, downstream_matrix, Network, NetworkError};
use crate::posteval::{
    self, ComparisonReport, EvalError, Realization, RealizationSource, RedispatchResult,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
    #[error("{mode} dispatch: {source}")]
    Dopf { mode: Mode, source: DopfError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Salt separating the realization streams from the scenario streams.
const REALIZATION_SALT: u64 = 0x5E_ED0F_E7A1;

pub fn realization_seed(master: u64) -> u64 {
    master ^ REALIZATION_SALT
}

pub fn load_network(cfg: &PipelineConfig) -> Result<Network> {
    let net = netmodel::load_network(&cfg.network)?;
    if net.stations.len() != cfg.population.n_stations() {
        return Err(BehaviorError::StationMismatch {
            expected: net.stations.len(),
            got: cfg.population.n_stations(),
        }
        .into());
    }
    Ok(net)
}

pub fn simulate(cfg: &PipelineConfig, net: &Network) -> Result<Vec<ScenarioCounts>> {
    Ok(
        behavior::generate_scenarios(net, &cfg.population, cfg.scenarios.count, cfg.seed)?
            .into_iter()
            .map(|s| ScenarioCounts {
                home: s.home_counts,
                switched: s.counts,
            })
            .collect(),
    )
}

pub fn nominal_prices(net: &Network) -> Vec<f64> {
    net.stations.iter().map(|s| s.lambda_nominal).collect()
}

pub fn offered_prices(net: &Network) -> Vec<f64> {
    net.stations.iter().map(|s| s.lambda_offered).collect()
}

pub fn moments(
    cfg: &PipelineConfig,
    net: &Network,
    scenarios: &[ScenarioCounts],
) -> Result<MomentSet> {
    let ch = cfg.population.ch_avg_mw;
    let to_mw = |c: &[u32]| c.iter().map(|&n| n as f64 * ch).collect::<Vec<f64>>();
    let base: Vec<Vec<f64>> = scenarios.iter().map(|s| to_mw(&s.home)).collect();
    let sw: Vec<Vec<f64>> = scenarios.iter().map(|s| to_mw(&s.switched)).collect();
    let ridge = cfg.ambiguity.ridge;
    let baseline = ambiguity::regularize_covariance(&ambiguity::empirical_moments(&base)?, ridge);
    let switching = ambiguity::regularize_covariance(&ambiguity::empirical_moments(&sw)?, ridge);
    let k = scenarios.len() as f64;
    let n_bar: Vec<f64> = (0..net.stations.len())
        .map(|i| scenarios.iter().map(|s| s.switched[i] as f64).sum::<f64>() / k)
        .collect();
    let price_adjusted = behavior::price_adjusted_mean(
        &n_bar,
        &offered_prices(net),
        &nominal_prices(net),
        ch,
        cfg.population.beta_mean(),
    )?;
    Ok(MomentSet {
        n_bar,
        baseline,
        switching,
        price_adjusted,
    })
}

/// Forecast and covariance a mode plans against, MW and MW².
pub fn demand_model(mode: Mode, m: &MomentSet) -> (Vec<f64>, DMatrix<f64>) {
    match mode {
        Mode::Deterministic => (
            m.baseline.mean.clone(),
            DMatrix::zeros(m.baseline.dim(), m.baseline.dim()),
        ),
        Mode::Drcc => (m.baseline.mean.clone(), m.baseline.cov.clone()),
        Mode::DrccPm => (m.price_adjusted.clone(), m.switching.cov.clone()),
    }
}

pub fn dopf_params(cfg: &PipelineConfig, mode: Mode) -> Result<DopfParams> {
    let amb = match mode {
        Mode::DrccPm => AmbiguityMode::M2,
        _ => AmbiguityMode::M1,
    };
    Ok(DopfParams {
        eta: eta(&cfg.ambiguity.params(amb)?)?,
        z: cfg.dopf.z,
        polygon_edges: cfg.dopf.polygon_edges,
        mode,
    })
}

pub fn solve(cfg: &PipelineConfig, net: &Network, m: &MomentSet, mode: Mode) -> Result<Dispatch> {
    let (mean, sigma) = demand_model(mode, m);
    let params = dopf_params(cfg, mode)?;
    dopf::solve_dopf(
        net,
        &downstream_matrix(net),
        &sigma,
        &mean,
        &params,
        &ClarabelSolver::default(),
    )
    .map_err(|source| PipelineError::Dopf { mode, source })
}

/// Test realizations: the switched, price-adjusted demand.
pub fn realizations(
    cfg: &PipelineConfig,
    net: &Network,
    m: &MomentSet,
) -> Result<Vec<Realization>> {
    let seed = realization_seed(cfg.seed);
    let n = cfg.eval.realizations;
    Ok(match cfg.eval.source {
        RealizationSource::Gaussian => {
            posteval::gaussian_realizations(&m.price_adjusted, &m.switching.cov, n, seed)?
        }
        RealizationSource::Behavioral => {
            posteval::behavioral_realizations(net, &cfg.population, &nominal_prices(net), n, seed)?
        }
    })
}

pub struct Evaluation {
    pub report: ComparisonReport,
    pub results: Vec<(Mode, Vec<RedispatchResult>)>,
}

pub fn evaluate(
    cfg: &PipelineConfig,
    net: &Network,
    m: &MomentSet,
    dispatches: &[Dispatch],
) -> Result<Evaluation> {
    let reals = realizations(cfg, net, m)?;
    let mut summaries = Vec::new();
    let mut results = Vec::new();
    for d in dispatches {
        let (r, s) =
            posteval::evaluate(net, d, &reals, &cfg.eval.penalties, cfg.eval.tol, cfg.seed)?;
        summaries.push(s);
        results.push((d.mode, r));
    }
    Ok(Evaluation {
        report: posteval::compare(&summaries)?,
        results,
    })
}

/// Everything produced by one in-memory run.
pub struct RunOutput {
    pub network: Network,
    pub scenarios: Vec<ScenarioCounts>,
    pub moments: MomentSet,
    pub dispatches: Vec<Dispatch>,
    pub evaluation: Evaluation,
}

pub fn run(cfg: &PipelineConfig) -> Result<RunOutput> {
    let net = load_network(cfg)?;
    let scenarios = simulate(cfg, &net)?;
    let m = moments(cfg, &net, &scenarios)?;
    let dispatches = cfg
        .dopf
        .modes
        .iter()
        .map(|&mode| solve(cfg, &net, &m, mode))
        .collect::<Result<Vec<_>>>()?;
    let evaluation = evaluate(cfg, &net, &m, &dispatches)?;
    Ok(RunOutput {
        network: net,
        scenarios,
        moments: m,
        dispatches,
        evaluation,
    })
}

pub fn simulate_to(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let net = load_network(cfg)?;
    let sc = simulate(cfg, &net)?;
    io::write_scenarios(
        &out.join("scenarios.csv"),
        &net,
        cfg.population.ch_avg_mw,
        &sc,
    )?;
    Ok(())
}

pub fn moments_to(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let net = load_network(cfg)?;
    let sc = io::read_scenarios(&out.join("scenarios.csv"), &net)?;
    io::write_moments(out, &net, &moments(cfg, &net, &sc)?)?;
    Ok(())
}

/// Dispatch stage. Uncertainty-aware modes need the scenario-derived
/// moments; the deterministic forecast also comes from them.
pub fn solve_to(cfg: &PipelineConfig, out: &Path, modes: &[Mode]) -> Result<()> {
    let net = load_network(cfg)?;
    if !out.join("moments.csv").exists() && !out.join("scenarios.csv").exists() {
        return Err(IoError::Missing(out.join("scenarios.csv")).into());
    }
    let m = io::read_moments(out, &net)?;
    for &mode in modes {
        io::write_dispatch(out, &net, &solve(cfg, &net, &m, mode)?)?;
    }
    Ok(())
}

pub fn evaluate_to(cfg: &PipelineConfig, out: &Path, modes: &[Mode]) -> Result<ComparisonReport> {
    let net = load_network(cfg)?;
    let m = io::read_moments(out, &net)?;
    let dispatches = modes
        .iter()
        .map(|&mode| io::read_dispatch(out, &net, mode))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ev = evaluate(cfg, &net, &m, &dispatches)?;
    io::write_eval_summary(&out.join("eval_summary.csv"), &ev.report)?;
    io::write_violations(&out.join("violations.csv"), &net, &ev.results, cfg.eval.tol)?;
    io::write_text(&out.join("comparison.txt"), &ev.report.to_text(&net.name))?;
    Ok(ev.report)
}

/// All stages through files, in order.
pub fn pipeline_to(cfg: &PipelineConfig, out: &Path, modes: &[Mode]) -> Result<ComparisonReport> {
    simulate_to(cfg, out)?;
    moments_to(cfg, out)?;
    solve_to(cfg, out, modes)?;
    evaluate_to(cfg, out, modes)
}
