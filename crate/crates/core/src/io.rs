//! CSV artifacts exchanged between pipeline stages.
//!
//! Reals are written with 9 significant digits so that outputs are
//! byte-reproducible across platforms and thread counts.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::ambiguity::Moments;
use crate::conic::SolveStatus;
use crate::dopf::{Dispatch, Mode};
use crate::netmodel::Network;
use crate::posteval::{category_maxima, Category, ComparisonReport, RedispatchResult};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing {}", .0.file_name().map_or_else(|| .0.display().to_string(), |f| f.to_string_lossy().into_owned()))]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, IoError>;

/// `%.9g`-style formatting.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{}e{}", trim_zeros(mant), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    csv::Reader::from_path(path).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

struct Rows {
    path: PathBuf,
    rdr: csv::Reader<File>,
}

impl Rows {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            rdr: reader(path)?,
        })
    }

    fn records(&mut self) -> Result<Vec<(u64, csv::StringRecord)>> {
        let mut out = Vec::new();
        for rec in self.rdr.records() {
            let rec = rec.map_err(|source| IoError::Csv {
                path: self.path.clone(),
                source,
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            out.push((line, rec));
        }
        Ok(out)
    }

    fn bad(&self, line: u64, message: impl Into<String>) -> IoError {
        IoError::Malformed {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn field<T: std::str::FromStr>(
        &self,
        rec: &csv::StringRecord,
        line: u64,
        i: usize,
        name: &str,
    ) -> Result<T> {
        let raw = rec
            .get(i)
            .ok_or_else(|| self.bad(line, format!("missing column `{name}`")))?;
        raw.trim()
            .parse()
            .map_err(|_| self.bad(line, format!("column `{name}`: cannot parse `{raw}`")))
    }
}

fn write_all<W: Write>(
    w: &mut csv::Writer<W>,
    path: &Path,
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    for r in rows {
        w.write_record(&r).map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    }
    w.flush().map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Initial and post-switching counts of one scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioCounts {
    pub home: Vec<u32>,
    pub switched: Vec<u32>,
}

pub fn write_scenarios(
    path: &Path,
    net: &Network,
    ch_avg: f64,
    scenarios: &[ScenarioCounts],
) -> Result<()> {
    let mut w = writer(path)?;
    let header = ["scenario_id", "station_id", "n", "p_ev_mw", "n_home"]
        .map(String::from)
        .to_vec();
    let rows = scenarios.iter().enumerate().flat_map(|(k, s)| {
        net.stations.iter().enumerate().map(move |(i, st)| {
            vec![
                k.to_string(),
                st.id.to_string(),
                s.switched[i].to_string(),
                fmt_num(s.switched[i] as f64 * ch_avg),
                s.home[i].to_string(),
            ]
        })
    });
    write_all(&mut w, path, std::iter::once(header).chain(rows))
}

pub fn read_scenarios(path: &Path, net: &Network) -> Result<Vec<ScenarioCounts>> {
    let mut rows = Rows::open(path)?;
    let ns = net.stations.len();
    let mut out: Vec<ScenarioCounts> = Vec::new();
    for (line, rec) in rows.records()? {
        let k: usize = rows.field(&rec, line, 0, "scenario_id")?;
        let sid: u32 = rows.field(&rec, line, 1, "station_id")?;
        let n: u32 = rows.field(&rec, line, 2, "n")?;
        let home: u32 = rows.field(&rec, line, 4, "n_home")?;
        let i = net
            .stations
            .iter()
            .position(|s| s.id == sid)
            .ok_or_else(|| rows.bad(line, format!("unknown station {sid}")))?;
        if k == out.len() {
            out.push(ScenarioCounts {
                home: vec![0; ns],
                switched: vec![0; ns],
            });
        } else if k + 1 != out.len() {
            return Err(rows.bad(line, format!("scenario {k} out of order")));
        }
        let s = out.last_mut().expect("pushed above");
        s.switched[i] = n;
        s.home[i] = home;
    }
    if out.is_empty() {
        return Err(rows.bad(1, "no scenarios"));
    }
    Ok(out)
}

/// Estimated demand models consumed by the dispatch stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub n_bar: Vec<f64>,
    /// Demand without switching.
    pub baseline: Moments,
    /// Demand after switching.
    pub switching: Moments,
    /// Switching mean corrected for the tariff response, MW.
    pub price_adjusted: Vec<f64>,
}

pub fn write_moments(dir: &Path, net: &Network, m: &MomentSet) -> Result<()> {
    let path = dir.join("moments.csv");
    let mut w = writer(&path)?;
    let header = [
        "station_id",
        "bus",
        "n_bar",
        "mean_baseline_mw",
        "mean_switching_mw",
        "mean_price_adjusted_mw",
        "k_sc",
    ]
    .map(String::from)
    .to_vec();
    let rows = net.stations.iter().enumerate().map(|(i, s)| {
        vec![
            s.id.to_string(),
            s.bus.to_string(),
            fmt_num(m.n_bar[i]),
            fmt_num(m.baseline.mean[i]),
            fmt_num(m.switching.mean[i]),
            fmt_num(m.price_adjusted[i]),
            m.switching.k_sc.to_string(),
        ]
    });
    write_all(&mut w, &path, std::iter::once(header).chain(rows))?;

    let path = dir.join("cov.csv");
    let mut w = writer(&path)?;
    let mut header = vec!["kind".to_string(), "station_id".to_string()];
    header.extend(net.stations.iter().map(|s| s.id.to_string()));
    let mut rows = vec![header];
    for (kind, cov) in [
        ("baseline", &m.baseline.cov),
        ("switching", &m.switching.cov),
    ] {
        for (i, s) in net.stations.iter().enumerate() {
            let mut r = vec![kind.to_string(), s.id.to_string()];
            r.extend((0..cov.ncols()).map(|j| fmt_num(cov[(i, j)])));
            rows.push(r);
        }
    }
    write_all(&mut w, &path, rows)
}

pub fn read_moments(dir: &Path, net: &Network) -> Result<MomentSet> {
    let ns = net.stations.len();
    let mut rows = Rows::open(&dir.join("moments.csv"))?;
    let recs = rows.records()?;
    if recs.len() != ns {
        return Err(rows.bad(1, format!("expected {ns} stations, found {}", recs.len())));
    }
    let (mut n_bar, mut base, mut sw, mut pa) =
        (vec![0.0; ns], vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]);
    let mut k_sc = 0usize;
    for (i, (line, rec)) in recs.iter().enumerate() {
        let sid: u32 = rows.field(rec, *line, 0, "station_id")?;
        if sid != net.stations[i].id {
            return Err(rows.bad(*line, format!("station {sid} out of order")));
        }
        n_bar[i] = rows.field(rec, *line, 2, "n_bar")?;
        base[i] = rows.field(rec, *line, 3, "mean_baseline_mw")?;
        sw[i] = rows.field(rec, *line, 4, "mean_switching_mw")?;
        pa[i] = rows.field(rec, *line, 5, "mean_price_adjusted_mw")?;
        k_sc = rows.field(rec, *line, 6, "k_sc")?;
    }
    let mut rows = Rows::open(&dir.join("cov.csv"))?;
    let recs = rows.records()?;
    let mut covs = [DMatrix::zeros(ns, ns), DMatrix::zeros(ns, ns)];
    let mut seen = [0usize; 2];
    for (line, rec) in &recs {
        let kind = rec.get(0).unwrap_or("");
        let k = match kind {
            "baseline" => 0,
            "switching" => 1,
            other => return Err(rows.bad(*line, format!("unknown kind `{other}`"))),
        };
        let sid: u32 = rows.field(rec, *line, 1, "station_id")?;
        let i = net
            .stations
            .iter()
            .position(|s| s.id == sid)
            .ok_or_else(|| rows.bad(*line, format!("unknown station {sid}")))?;
        for j in 0..ns {
            covs[k][(i, j)] = rows.field(rec, *line, 2 + j, "covariance")?;
        }
        seen[k] += 1;
    }
    if seen != [ns, ns] {
        return Err(rows.bad(1, "incomplete covariance blocks"));
    }
    let [cb, cs] = covs;
    Ok(MomentSet {
        n_bar,
        baseline: Moments {
            mean: base,
            cov: cb,
            k_sc,
        },
        switching: Moments {
            mean: sw,
            cov: cs,
            k_sc,
        },
        price_adjusted: pa,
    })
}

pub fn dispatch_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("dispatch_{}.csv", mode.as_str()))
}

pub fn write_dispatch(dir: &Path, net: &Network, d: &Dispatch) -> Result<()> {
    let path = dispatch_path(dir, d.mode);
    let mut w = writer(&path)?;
    let base = net.base_mva;
    let row = |sec: &str, el: String, field: &str, pu: Option<f64>, phys: String| {
        vec![
            sec.to_string(),
            el,
            field.to_string(),
            pu.map(fmt_num).unwrap_or_default(),
            phys,
        ]
    };
    let mut rows = vec![["section", "element", "field", "pu", "physical"]
        .map(String::from)
        .to_vec()];
    rows.push(row(
        "meta",
        String::new(),
        "mode",
        None,
        d.mode.as_str().into(),
    ));
    let status = match d.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::AlmostOptimal => "almost_optimal",
    };
    rows.push(row("meta", String::new(), "status", None, status.into()));
    rows.push(row(
        "meta",
        String::new(),
        "objective_usd",
        None,
        fmt_num(d.objective),
    ));
    rows.push(row("meta", String::new(), "eta", None, fmt_num(d.eta)));
    rows.push(row("meta", String::new(), "z", None, fmt_num(d.z)));
    rows.push(row(
        "meta",
        String::new(),
        "sigma_total_mw2",
        None,
        fmt_num(d.sigma_total),
    ));
    for (g, gen) in net.generators.iter().enumerate() {
        rows.push(row(
            "generator",
            gen.bus.to_string(),
            "p_mw",
            Some(d.p_g[g] / base),
            fmt_num(d.p_g[g]),
        ));
        rows.push(row(
            "generator",
            gen.bus.to_string(),
            "q_mvar",
            Some(d.q_g[g] / base),
            fmt_num(d.q_g[g]),
        ));
        rows.push(row(
            "alpha",
            gen.bus.to_string(),
            "alpha",
            Some(d.alpha[g]),
            fmt_num(d.alpha[g]),
        ));
    }
    for (i, b) in net.buses.iter().enumerate() {
        rows.push(row(
            "bus",
            b.id.to_string(),
            "v2",
            Some(d.v2[i]),
            fmt_num(d.v2[i].max(0.0).sqrt()),
        ));
    }
    for (l, line) in net.lines.iter().enumerate() {
        let el = format!("{}-{}", line.from, line.to);
        rows.push(row(
            "line",
            el.clone(),
            "p_mw",
            Some(d.p_flow[l] / base),
            fmt_num(d.p_flow[l]),
        ));
        rows.push(row(
            "line",
            el,
            "q_mvar",
            Some(d.q_flow[l] / base),
            fmt_num(d.q_flow[l]),
        ));
    }
    for (s, st) in net.stations.iter().enumerate() {
        rows.push(row(
            "station",
            st.id.to_string(),
            "p_ev_forecast_mw",
            Some(d.p_ev_forecast[s] / base),
            fmt_num(d.p_ev_forecast[s]),
        ));
    }
    write_all(&mut w, &path, rows)
}

pub fn read_dispatch(dir: &Path, net: &Network, mode: Mode) -> Result<Dispatch> {
    let path = dispatch_path(dir, mode);
    let mut rows = Rows::open(&path)?;
    let (ng, nb, nl, ns) = (
        net.generators.len(),
        net.buses.len(),
        net.lines.len(),
        net.stations.len(),
    );
    let mut d = Dispatch {
        mode,
        status: SolveStatus::Optimal,
        p_g: vec![f64::NAN; ng],
        q_g: vec![f64::NAN; ng],
        v2: vec![f64::NAN; nb],
        p_flow: vec![f64::NAN; nl],
        q_flow: vec![f64::NAN; nl],
        alpha: vec![f64::NAN; ng],
        objective: f64::NAN,
        p_ev_forecast: vec![f64::NAN; ns],
        eta: f64::NAN,
        sigma_total: f64::NAN,
        z: f64::NAN,
    };
    let recs = rows.records()?;
    for (line, rec) in &recs {
        let (sec, el, field) = (
            rec.get(0).unwrap_or(""),
            rec.get(1).unwrap_or(""),
            rec.get(2).unwrap_or(""),
        );
        let phys = |rows: &Rows| rows.field::<f64>(rec, *line, 4, "physical");
        let pu = |rows: &Rows| rows.field::<f64>(rec, *line, 3, "pu");
        let gen_idx = |rows: &Rows| {
            net.generators
                .iter()
                .position(|g| g.bus.to_string() == el)
                .ok_or_else(|| rows.bad(*line, format!("unknown generator bus {el}")))
        };
        match (sec, field) {
            ("meta", "mode") => {
                if rec.get(4) != Some(mode.as_str()) {
                    return Err(rows.bad(*line, format!("file holds mode {:?}", rec.get(4))));
                }
            }
            ("meta", "status") => {
                d.status = if rec.get(4) == Some("optimal") {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::AlmostOptimal
                }
            }
            ("meta", "objective_usd") => d.objective = phys(&rows)?,
            ("meta", "eta") => d.eta = phys(&rows)?,
            ("meta", "z") => d.z = phys(&rows)?,
            ("meta", "sigma_total_mw2") => d.sigma_total = phys(&rows)?,
            ("generator", "p_mw") => d.p_g[gen_idx(&rows)?] = phys(&rows)?,
            ("generator", "q_mvar") => d.q_g[gen_idx(&rows)?] = phys(&rows)?,
            ("alpha", "alpha") => d.alpha[gen_idx(&rows)?] = phys(&rows)?,
            ("bus", "v2") => {
                let id: u32 = el.parse().map_err(|_| rows.bad(*line, "bad bus id"))?;
                let i = net
                    .bus_index(id)
                    .ok_or_else(|| rows.bad(*line, format!("unknown bus {id}")))?;
                d.v2[i] = pu(&rows)?;
            }
            ("line", f) => {
                let l = net
                    .lines
                    .iter()
                    .position(|x| format!("{}-{}", x.from, x.to) == el)
                    .ok_or_else(|| rows.bad(*line, format!("unknown line {el}")))?;
                match f {
                    "p_mw" => d.p_flow[l] = phys(&rows)?,
                    "q_mvar" => d.q_flow[l] = phys(&rows)?,
                    _ => return Err(rows.bad(*line, format!("unknown line field {f}"))),
                }
            }
            ("station", "p_ev_forecast_mw") => {
                let s = net
                    .stations
                    .iter()
                    .position(|s| s.id.to_string() == el)
                    .ok_or_else(|| rows.bad(*line, format!("unknown station {el}")))?;
                d.p_ev_forecast[s] = phys(&rows)?;
            }
            _ => return Err(rows.bad(*line, format!("unknown entry {sec}/{field}"))),
        }
    }
    let complete = [d.objective, d.eta, d.z, d.sigma_total]
        .iter()
        .chain(&d.p_g)
        .chain(&d.q_g)
        .chain(&d.alpha)
        .chain(&d.v2)
        .chain(&d.p_flow)
        .chain(&d.q_flow)
        .chain(&d.p_ev_forecast)
        .all(|v| v.is_finite());
    if !complete {
        return Err(rows.bad(1, "incomplete dispatch"));
    }
    Ok(d)
}

pub fn write_eval_summary(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = [
        "mode",
        "mean_cost_usd",
        "cost_increase_pct",
        "d_bar_mw",
        "d_under_mw",
        "violation_pct",
    ]
    .map(String::from)
    .to_vec();
    header.extend(
        Category::ALL
            .iter()
            .map(|c| format!("{}_violation_pct", c.as_str())),
    );
    header.extend(["realizations", "seed"].map(String::from));
    let rows = report.rows.iter().map(|r| {
        let mut v = vec![
            r.mode.as_str().to_string(),
            fmt_num(r.mean_cost),
            fmt_num(r.cost_increase_pct),
            fmt_num(r.d_bar),
            fmt_num(r.d_under),
            fmt_num(r.violation_pct),
        ];
        v.extend(r.by_category.iter().map(|&x| fmt_num(x)));
        v.push(r.realizations.to_string());
        v.push(r.seed.to_string());
        v
    });
    write_all(&mut w, path, std::iter::once(header).chain(rows))
}

pub fn write_violations(
    path: &Path,
    net: &Network,
    per_mode: &[(Mode, Vec<RedispatchResult>)],
    tol: f64,
) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = ["mode", "realization", "d_bar_mw", "d_under_mw"]
        .map(String::from)
        .to_vec();
    header.extend(
        Category::ALL
            .iter()
            .map(|c| format!("{}_max_pu", c.as_str())),
    );
    header.extend(["total_cost_usd", "violated"].map(String::from));
    let mut rows = vec![header];
    for (mode, results) in per_mode {
        for (k, r) in results.iter().enumerate() {
            let m = category_maxima(r, net.base_mva);
            let mut v = vec![
                mode.as_str().to_string(),
                k.to_string(),
                fmt_num(r.d_bar()),
                fmt_num(r.d_under()),
            ];
            v.extend(m.iter().map(|&x| fmt_num(x)));
            v.push(fmt_num(r.total_cost()));
            v.push(u8::from(m.iter().any(|&x| x > tol)).to_string());
            rows.push(v);
        }
    }
    write_all(&mut w, path, rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.05), "0.05");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-2.0 / 3.0), "-0.666666667");
        assert_eq!(fmt_num(123456.789012), "123456.789");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(1.234567891e12), "1.23456789e12");
        assert_eq!(fmt_num(99999999.95), "100000000");
    }

    #[test]
    fn missing_file_names_it() {
        let e = read_scenarios_missing();
        assert_eq!(e.to_string(), "missing scenarios.csv");
    }

    fn read_scenarios_missing() -> IoError {
        match Rows::open(Path::new("/nonexistent/scenarios.csv")) {
            Err(e) => e,
            Ok(_) => panic!("file should not exist"),
        }
    }
}
