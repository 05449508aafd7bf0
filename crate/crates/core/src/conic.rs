//! Small convex conic model builder with a pluggable solver backend.
//!
//! A model has a convex quadratic objective and named blocks of affine
//! expressions, each constrained to a cone:
//!
//! * `Zero`: every row equals zero,
//! * `Nonneg`: every row is nonnegative,
//! * `Soc`: `row[0] >= ‖row[1..]‖₂`.

use std::fmt;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use thiserror::Error;

/// Affine expression `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: usize, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add(mut self, v: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_expr(mut self, other: &LinExpr, scale: f64) -> Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonneg,
    Soc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBlock {
    pub name: String,
    pub kind: ConeKind,
    pub rows: Vec<LinExpr>,
}

impl ConstraintBlock {
    /// Largest violation of the cone membership at `x` (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        match self.kind {
            ConeKind::Zero => vals.iter().fold(0.0, |m, v| m.max(v.abs())),
            ConeKind::Nonneg => vals.iter().fold(0.0, |m, v| m.max(-v)),
            ConeKind::Soc => {
                let norm = vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm - vals[0]).max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicModel {
    var_names: Vec<String>,
    linear: Vec<f64>,
    /// `(i, j, c)` contributes `c·x_i·x_j`.
    quadratic: Vec<(usize, usize, f64)>,
    objective_constant: f64,
    blocks: Vec<ConstraintBlock>,
}

impl ConicModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.linear.push(0.0);
        self.var_names.len() - 1
    }

    pub fn add_vars(&mut self, prefix: &str, n: usize) -> Vec<usize> {
        (0..n)
            .map(|i| self.add_var(format!("{prefix}[{i}]")))
            .collect()
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: usize) -> &str {
        &self.var_names[v]
    }

    pub fn blocks(&self) -> &[ConstraintBlock] {
        &self.blocks
    }

    pub fn add_linear_cost(&mut self, v: usize, c: f64) {
        self.linear[v] += c;
    }

    pub fn add_quadratic_cost(&mut self, i: usize, j: usize, c: f64) {
        if c != 0.0 {
            self.quadratic.push((i, j, c));
        }
    }

    pub fn add_constant_cost(&mut self, c: f64) {
        self.objective_constant += c;
    }

    pub fn add_block(&mut self, name: impl Into<String>, kind: ConeKind, rows: Vec<LinExpr>) {
        assert!(
            kind != ConeKind::Soc || !rows.is_empty(),
            "second-order cone needs a head row"
        );
        self.blocks.push(ConstraintBlock {
            name: name.into(),
            kind,
            rows,
        });
    }

    pub fn add_eq(&mut self, name: impl Into<String>, e: LinExpr) {
        self.add_block(name, ConeKind::Zero, vec![e]);
    }

    /// `e >= 0`
    pub fn add_ge0(&mut self, name: impl Into<String>, e: LinExpr) {
        self.add_block(name, ConeKind::Nonneg, vec![e]);
    }

    /// `head >= ‖tail‖₂`
    pub fn add_soc(&mut self, name: impl Into<String>, head: LinExpr, tail: Vec<LinExpr>) {
        let mut rows = Vec::with_capacity(tail.len() + 1);
        rows.push(head);
        rows.extend(tail);
        self.add_block(name, ConeKind::Soc, rows);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|&(i, j, c)| c * x[i] * x[j])
            .sum();
        lin + quad + self.objective_constant
    }

    /// Largest cone violation over all blocks with the offending block name.
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<&str>) {
        let mut worst = (0.0, None);
        for b in &self.blocks {
            let v = b.violation(x);
            if v > worst.0 {
                worst = (v, Some(b.name.as_str()));
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Converged to reduced accuracy.
    AlmostOptimal,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::AlmostOptimal => "almost optimal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("infeasible (most implicated constraint: {culprit})")]
    Infeasible { culprit: String },
    #[error("unbounded")]
    Unbounded,
    #[error("solver failure: {0}")]
    Failure(String),
}

pub trait ConicSolver {
    fn solve(&self, model: &ConicModel) -> Result<Solution, SolverError>;
}

/// Interior-point backend.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub tolerance: f64,
    pub max_iter: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iter: 200,
        }
    }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, model: &ConicModel) -> Result<Solution, SolverError> {
        let n = model.n_vars();
        let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
        for &(i, j, c) in &model.quadratic {
            let (r, col) = (i.min(j), i.max(j));
            pi.push(r);
            pj.push(col);
            pv.push(if i == j { 2.0 * c } else { c });
        }
        let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);

        // s = b - A x with s = expr = a·x + c, hence A = -a and b = c.
        let (mut ai, mut aj, mut av, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row_block = Vec::new();
        for (k, blk) in model.blocks.iter().enumerate() {
            let dim = blk.rows.len();
            for r in &blk.rows {
                for &(v, c) in &r.terms {
                    ai.push(b.len());
                    aj.push(v);
                    av.push(-c);
                }
                b.push(r.constant);
                row_block.push(k);
            }
            let cone = match blk.kind {
                ConeKind::Zero => SupportedConeT::ZeroConeT(dim),
                ConeKind::Nonneg => SupportedConeT::NonnegativeConeT(dim),
                ConeKind::Soc => SupportedConeT::SecondOrderConeT(dim),
            };
            match (cones.last_mut(), cone) {
                (Some(SupportedConeT::ZeroConeT(d)), SupportedConeT::ZeroConeT(e)) => *d += e,
                (
                    Some(SupportedConeT::NonnegativeConeT(d)),
                    SupportedConeT::NonnegativeConeT(e),
                ) => *d += e,
                (_, c) => cones.push(c),
            }
        }
        let a = CscMatrix::new_from_triplets(b.len(), n, ai, aj, av);

        let settings = DefaultSettings {
            verbose: false,
            max_iter: self.max_iter,
            tol_gap_abs: self.tolerance,
            tol_gap_rel: self.tolerance,
            tol_feas: self.tolerance,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &model.linear, &a, &b, &cones, settings)
            .map_err(|e| SolverError::Failure(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                // The dual ray concentrates on the constraints that cannot
                // be met together.
                let mut weight = vec![0.0; model.blocks.len()];
                for (r, &z) in sol.z.iter().enumerate() {
                    weight[row_block[r]] += z.abs();
                }
                let k = (0..weight.len())
                    .max_by(|&x, &y| weight[x].total_cmp(&weight[y]))
                    .unwrap_or(0);
                let culprit = model
                    .blocks
                    .get(k)
                    .map_or_else(|| "unknown".to_string(), |b| b.name.clone());
                return Err(SolverError::Infeasible { culprit });
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                return Err(SolverError::Unbounded);
            }
            other => return Err(SolverError::Failure(format!("{other:?}"))),
        };
        Ok(Solution {
            status,
            objective: model.objective_value(&sol.x),
            x: sol.x.clone(),
            iterations: sol.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qp_with_equality() {
        // min x² + y² s.t. x + y = 2
        let mut m = ConicModel::new();
        let x = m.add_var("x");
        let y = m.add_var("y");
        m.add_quadratic_cost(x, x, 1.0);
        m.add_quadratic_cost(y, y, 1.0);
        m.add_eq("sum", LinExpr::var(x).add(y, 1.0).plus(-2.0));
        let s = ClarabelSolver::default().solve(&m).unwrap();
        assert!((s.x[x] - 1.0).abs() < 1e-7 && (s.x[y] - 1.0).abs() < 1e-7);
        assert!((s.objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn soc_projection() {
        // min t s.t. t >= ‖(x - 3, y - 4)‖, x + y <= 0  ->  distance from (3,4) to the half-plane
        let mut m = ConicModel::new();
        let t = m.add_var("t");
        let x = m.add_var("x");
        let y = m.add_var("y");
        m.add_linear_cost(t, 1.0);
        m.add_soc(
            "dist",
            LinExpr::var(t),
            vec![LinExpr::var(x).plus(-3.0), LinExpr::var(y).plus(-4.0)],
        );
        m.add_ge0("half", LinExpr::term(x, -1.0).add(y, -1.0));
        let s = ClarabelSolver::default().solve(&m).unwrap();
        assert!((s.objective - 7.0 / 2f64.sqrt()).abs() < 1e-6);
        assert!(m.max_violation(&s.x).0 < 1e-7);
    }

    #[test]
    fn infeasible_names_block() {
        let mut m = ConicModel::new();
        let x = m.add_var("x");
        m.add_linear_cost(x, 1.0);
        m.add_ge0("x_min", LinExpr::var(x).plus(-2.0));
        m.add_ge0("x_max", LinExpr::term(x, -1.0).plus(1.0));
        m.add_ge0("free", LinExpr::constant(1.0));
        match ClarabelSolver::default().solve(&m) {
            Err(SolverError::Infeasible { culprit }) => {
                assert!(culprit.starts_with("x_m"), "{culprit}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_reported() {
        let mut m = ConicModel::new();
        let x = m.add_var("x");
        m.add_linear_cost(x, 1.0);
        m.add_ge0("le", LinExpr::term(x, -1.0));
        assert_eq!(
            ClarabelSolver::default().solve(&m),
            Err(SolverError::Unbounded)
        );
    }

    #[test]
    fn violation_measures() {
        let b = ConstraintBlock {
            name: "c".into(),
            kind: ConeKind::Soc,
            rows: vec![
                LinExpr::constant(1.0),
                LinExpr::constant(3.0),
                LinExpr::constant(4.0),
            ],
        };
        assert!((b.violation(&[]) - 4.0).abs() < 1e-12);
    }
}
