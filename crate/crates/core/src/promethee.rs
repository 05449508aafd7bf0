//! PROMETHEE II outranking with V-shaped preference functions.
//!
//! Alternatives are compared pairwise on every criterion. The difference of
//! benefit-oriented scores is mapped to a preference degree in `[0, 1]`,
//! aggregated with the decision maker's weights, and summarized by the
//! positive, negative and net outranking flows. The engine knows nothing
//! about charging stations; callers supply the performance table.

use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PrometheeError {
    #[error("strict preference threshold ({tau_p}) must exceed indifference threshold ({tau_q}) and tau_q must be >= 0")]
    InvalidThresholds { tau_q: f64, tau_p: f64 },
    #[error("weights must be nonnegative and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least two alternatives, got {0}")]
    TooFewAlternatives(usize),
    #[error("empty flow vector")]
    Empty,
    #[error("alternative index {index} out of range for {len} alternatives")]
    OutOfRange { index: usize, len: usize },
    #[error("criteria set must be non-empty with unique ids")]
    InvalidCriteria,
}

pub type Result<T> = std::result::Result<T, PrometheeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Criterion {
    pub id: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriteriaSet {
    criteria: Vec<Criterion>,
}

impl CriteriaSet {
    pub fn new(criteria: Vec<Criterion>) -> Result<Self> {
        let mut ids: Vec<&str> = criteria.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if criteria.is_empty() || ids.len() != criteria.len() {
            return Err(PrometheeError::InvalidCriteria);
        }
        Ok(Self { criteria })
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Criterion> {
        self.criteria.iter()
    }
}

/// Indifference (`tau_q`) and strict preference (`tau_p`) thresholds of a
/// V-shaped preference function with indifference region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferenceThresholds<T = f64> {
    tau_q: T,
    tau_p: T,
}

impl<T: Scalar> PreferenceThresholds<T> {
    pub fn new(tau_q: T, tau_p: T) -> Result<Self> {
        if !(tau_q >= T::zero() && tau_p > tau_q && tau_p.is_finite()) {
            return Err(PrometheeError::InvalidThresholds {
                tau_q: tau_q.to_f64().unwrap_or(f64::NAN),
                tau_p: tau_p.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { tau_q, tau_p })
    }

    pub fn tau_q(&self) -> T {
        self.tau_q
    }

    pub fn tau_p(&self) -> T {
        self.tau_p
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.tau_q * factor, self.tau_p * factor)
    }
}

/// Criterion weights on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T = f64> {
    w: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    /// Accepts weights that already sum to one (within a few ulps per entry).
    pub fn new(w: Vec<T>) -> Result<Self> {
        let sum: T = w.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::from_count(4 * w.len().max(1)));
        if w.is_empty() || w.iter().any(|x| !(*x >= T::zero())) || (sum - T::one()).abs() > tol {
            return Err(PrometheeError::InvalidWeights {
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { w })
    }

    /// Normalizes nonnegative raw weights onto the simplex.
    pub fn normalized(raw: &[T]) -> Result<Self> {
        let sum: T = raw.iter().copied().sum();
        if raw.iter().any(|x| !(*x >= T::zero())) || !(sum > T::zero()) {
            return Err(PrometheeError::InvalidWeights {
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        Self::new(raw.iter().map(|&x| x / sum).collect())
    }

    pub fn as_slice(&self) -> &[T] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Scores of each alternative (rows) on each criterion (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceTable<T = f64> {
    n_alternatives: usize,
    n_criteria: usize,
    g: Vec<T>,
}

impl<T: Scalar> PerformanceTable<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_criteria = rows.first().map_or(0, Vec::len);
        let mut g = Vec::with_capacity(rows.len() * n_criteria);
        for r in rows {
            if r.len() != n_criteria {
                return Err(PrometheeError::LengthMismatch {
                    expected: n_criteria,
                    got: r.len(),
                });
            }
            g.extend_from_slice(r);
        }
        Ok(Self {
            n_alternatives: rows.len(),
            n_criteria,
            g,
        })
    }

    pub fn n_alternatives(&self) -> usize {
        self.n_alternatives
    }

    pub fn n_criteria(&self) -> usize {
        self.n_criteria
    }

    pub fn get(&self, alt: usize, crit: usize) -> T {
        self.g[alt * self.n_criteria + crit]
    }

    pub fn set(&mut self, alt: usize, crit: usize, value: T) {
        self.g[alt * self.n_criteria + crit] = value;
    }

    /// Negates minimize-direction columns so that larger always means better.
    pub fn oriented(&self, criteria: &CriteriaSet) -> Result<Self> {
        if criteria.len() != self.n_criteria {
            return Err(PrometheeError::LengthMismatch {
                expected: self.n_criteria,
                got: criteria.len(),
            });
        }
        let mut out = self.clone();
        for (j, c) in criteria.iter().enumerate() {
            if c.direction == Direction::Minimize {
                for i in 0..self.n_alternatives {
                    out.set(i, j, -self.get(i, j));
                }
            }
        }
        Ok(out)
    }

    /// `g_j(i) - g_j(k)`.
    pub fn delta(&self, crit: usize, i: usize, k: usize) -> T {
        self.get(i, crit) - self.get(k, crit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<T = f64> {
    pub phi_plus: Vec<T>,
    pub phi_minus: Vec<T>,
    pub phi: Vec<T>,
}

/// V-shaped preference function with indifference region.
pub fn preference<T: Scalar>(delta: T, th: &PreferenceThresholds<T>) -> T {
    if delta <= th.tau_q {
        T::zero()
    } else if delta >= th.tau_p {
        T::one()
    } else {
        (delta - th.tau_q) / (th.tau_p - th.tau_q)
    }
}

/// Weighted aggregation of per-criterion preference degrees.
pub fn preference_index<T: Scalar>(psi: &[T], w: &WeightVector<T>) -> Result<T> {
    if psi.len() != w.len() {
        return Err(PrometheeError::LengthMismatch {
            expected: w.len(),
            got: psi.len(),
        });
    }
    Ok(psi.iter().zip(w.as_slice()).map(|(&p, &wj)| p * wj).sum())
}

/// Pairwise preference-index matrix of a benefit-oriented table. The
/// diagonal is zero.
pub fn preference_matrix<T: Scalar>(
    table: &PerformanceTable<T>,
    thresholds: &[PreferenceThresholds<T>],
    w: &WeightVector<T>,
) -> Result<Vec<Vec<T>>> {
    let (n, m) = (table.n_alternatives(), table.n_criteria());
    for len in [thresholds.len(), w.len()] {
        if len != m {
            return Err(PrometheeError::LengthMismatch {
                expected: m,
                got: len,
            });
        }
    }
    let mut pi = vec![vec![T::zero(); n]; n];
    let mut psi = vec![T::zero(); m];
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            for (j, p) in psi.iter_mut().enumerate() {
                *p = preference(table.delta(j, i, k), &thresholds[j]);
            }
            pi[i][k] = preference_index(&psi, w)?;
        }
    }
    Ok(pi)
}

/// Positive, negative and net outranking flows. Diagonal entries are ignored.
pub fn outranking_flows<T: Scalar>(pi: &[Vec<T>]) -> Result<FlowResult<T>> {
    let n = pi.len();
    if n < 2 {
        return Err(PrometheeError::TooFewAlternatives(n));
    }
    if let Some(row) = pi.iter().find(|r| r.len() != n) {
        return Err(PrometheeError::LengthMismatch {
            expected: n,
            got: row.len(),
        });
    }
    let denom = T::from_count(n - 1);
    let mut phi_plus = vec![T::zero(); n];
    let mut phi_minus = vec![T::zero(); n];
    for i in 0..n {
        for k in 0..n {
            if i != k {
                phi_plus[i] += pi[i][k];
                phi_minus[k] += pi[i][k];
            }
        }
    }
    for v in phi_plus.iter_mut().chain(phi_minus.iter_mut()) {
        *v /= denom;
    }
    let phi = phi_plus
        .iter()
        .zip(&phi_minus)
        .map(|(&p, &m)| p - m)
        .collect();
    Ok(FlowResult {
        phi_plus,
        phi_minus,
        phi,
    })
}

/// Alternative with the highest net flow. A tie keeps `current` when it is
/// among the maximizers, otherwise the lowest index wins.
pub fn select_best<T: Scalar>(flows: &FlowResult<T>, current: usize) -> Result<usize> {
    let phi = &flows.phi;
    if phi.is_empty() {
        return Err(PrometheeError::Empty);
    }
    if current >= phi.len() {
        return Err(PrometheeError::OutOfRange {
            index: current,
            len: phi.len(),
        });
    }
    let best = phi.iter().copied().fold(T::neg_infinity(), T::max);
    if phi[current] == best {
        return Ok(current);
    }
    Ok(phi.iter().position(|&v| v == best).expect("maximum exists"))
}

/// Full PROMETHEE II pass for one decision maker.
pub fn rank<T: Scalar>(
    table: &PerformanceTable<T>,
    thresholds: &[PreferenceThresholds<T>],
    w: &WeightVector<T>,
) -> Result<FlowResult<T>> {
    outranking_flows(&preference_matrix(table, thresholds, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(q: f64, p: f64) -> PreferenceThresholds {
        PreferenceThresholds::new(q, p).unwrap()
    }

    fn flows(phi: Vec<f64>) -> FlowResult {
        FlowResult {
            phi_plus: phi.clone(),
            phi_minus: vec![0.0; phi.len()],
            phi,
        }
    }

    #[test]
    fn v_shape_regions() {
        let t = th(1.0, 3.0);
        assert_eq!(preference(0.5, &t), 0.0);
        assert_eq!(preference(2.0, &t), 0.5);
        assert_eq!(preference(5.0, &t), 1.0);
        assert_eq!(preference(1.0, &t), 0.0);
        assert_eq!(preference(3.0, &t), 1.0);
    }

    #[test]
    fn thresholds_validated() {
        assert!(PreferenceThresholds::new(3.0, 3.0).is_err());
        assert!(PreferenceThresholds::new(3.0, 1.0).is_err());
        assert!(PreferenceThresholds::new(-1.0, 1.0).is_err());
        assert!(PreferenceThresholds::<f32>::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn index_examples() {
        let w: WeightVector = WeightVector::new(vec![0.6, 0.4]).unwrap();
        assert!((preference_index(&[1.0, 0.0], &w).unwrap() - 0.6).abs() < 1e-15);
        let w3 = WeightVector::normalized(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(preference_index(&[0.0, 0.0, 0.0], &w3).unwrap(), 0.0);
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(preference_index(&[0.5, 0.5], &w).unwrap(), 0.5);
        assert!(matches!(
            preference_index(&[0.5], &w),
            Err(PrometheeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn weights_validated() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.2, -0.2]).is_err());
        assert!(WeightVector::<f64>::normalized(&[0.0, 0.0]).is_err());
        let w = WeightVector::normalized(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_alternative_flows() {
        let pi: Vec<Vec<f64>> = vec![vec![0.0, 0.6], vec![0.2, 0.0]];
        let f = outranking_flows(&pi).unwrap();
        assert!((f.phi[0] - 0.4).abs() < 1e-15);
        assert!((f.phi[1] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn equal_entries_give_zero_flows() {
        let pi = vec![vec![0.3; 4]; 4];
        let f = outranking_flows(&pi).unwrap();
        assert!(f.phi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn too_few_alternatives() {
        assert_eq!(
            outranking_flows::<f64>(&[vec![0.0]]),
            Err(PrometheeError::TooFewAlternatives(1))
        );
    }

    #[test]
    fn select_examples() {
        // indices are 0-based here: station "1" is index 0
        assert_eq!(select_best(&flows(vec![0.4, -0.4]), 1).unwrap(), 0);
        assert_eq!(select_best(&flows(vec![0.0; 4]), 2).unwrap(), 2);
        assert_eq!(select_best(&flows(vec![0.1, 0.1, 0.2]), 0).unwrap(), 2);
        assert_eq!(select_best(&flows(vec![0.2, 0.1, 0.2]), 1).unwrap(), 0);
        assert!(select_best(&flows(vec![]), 0).is_err());
        assert!(select_best(&flows(vec![0.0]), 3).is_err());
    }

    #[test]
    fn orientation_negates_minimize_columns() {
        let crit = CriteriaSet::new(vec![
            Criterion {
                id: "price".into(),
                direction: Direction::Minimize,
            },
            Criterion {
                id: "bias".into(),
                direction: Direction::Maximize,
            },
        ])
        .unwrap();
        let t = PerformanceTable::from_rows(&[vec![0.3, 1.0], vec![0.2, 0.0]]).unwrap();
        let o = t.oriented(&crit).unwrap();
        assert_eq!(o.get(0, 0), -0.3);
        assert_eq!(o.get(0, 1), 1.0);
        assert!(CriteriaSet::new(vec![]).is_err());
    }

    #[test]
    fn cheaper_alternative_wins_for_price_only_owner() {
        // benefit-oriented: -price
        let t = PerformanceTable::from_rows(&[vec![-0.30], vec![-0.20]]).unwrap();
        let w = WeightVector::new(vec![1.0]).unwrap();
        let f = rank(&t, &[th(0.01, 0.05)], &w).unwrap();
        assert_eq!(select_best(&f, 0).unwrap(), 1);
    }

    #[test]
    fn generic_over_f32() {
        let pi: Vec<Vec<f32>> = vec![vec![0.0, 0.6], vec![0.2, 0.0]];
        let f = outranking_flows(&pi).unwrap();
        assert!((f.phi[0] - 0.4).abs() < 1e-6);
    }
}
