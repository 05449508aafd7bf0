//! Moment-based ambiguity sets for station charging demand.
//!
//! The set contains every distribution whose mean lies in a `gamma1`
//! ellipsoid around a reference mean (shaped by the empirical covariance)
//! and whose centered second moment is dominated by `gamma2` times that
//! covariance. For the price-coupled variant the reference mean is the
//! price-adjusted demand rather than the raw empirical mean.

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use thiserror::Error;

use crate::num::{LinalgScalar, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum AmbiguityError {
    #[error("no scenarios")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid ambiguity parameters: {0}")]
    InvalidParams(String),
    #[error("covariance is singular; regularize before use")]
    Singular,
}

pub type Result<T> = std::result::Result<T, AmbiguityError>;

/// Empirical first and second moments of station demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T: nalgebra::Scalar = f64> {
    pub mean: Vec<T>,
    pub cov: DMatrix<T>,
    pub k_sc: usize,
}

impl<T: LinalgScalar> Moments<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Deterministic moments: the given mean with zero covariance.
    pub fn point(mean: Vec<T>) -> Self {
        let n = mean.len();
        Self {
            mean,
            cov: DMatrix::zeros(n, n),
            k_sc: 1,
        }
    }

    /// `1ᵀ Σ 1`, the variance of total demand.
    pub fn total_variance(&self) -> T {
        self.cov.iter().copied().sum()
    }

    /// Scales the mean by `factor` and the covariance by `factor²`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            mean: self.mean.iter().map(|&m| m * factor).collect(),
            cov: &self.cov * (factor * factor),
            k_sc: self.k_sc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbiguityMode {
    /// Centered on the empirical mean.
    M1,
    /// Centered on the price-adjusted mean.
    M2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityParams<T = f64> {
    pub gamma1: T,
    pub gamma2: T,
    pub epsilon: T,
    pub mode: AmbiguityMode,
}

impl<T: Scalar> AmbiguityParams<T> {
    pub fn new(gamma1: T, gamma2: T, epsilon: T, mode: AmbiguityMode) -> Result<Self> {
        let p = Self {
            gamma1,
            gamma2,
            epsilon,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 >= T::zero()) {
            return Err(AmbiguityError::InvalidParams(format!(
                "gamma1 = {} must be >= 0",
                self.gamma1
            )));
        }
        if !(self.gamma2 >= T::one()) {
            return Err(AmbiguityError::InvalidParams(format!(
                "gamma2 = {} must be >= 1",
                self.gamma2
            )));
        }
        if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
            return Err(AmbiguityError::InvalidParams(format!(
                "epsilon = {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Sample mean and biased (divisor K) covariance of demand vectors.
pub fn empirical_moments<T: LinalgScalar>(samples: &[Vec<T>]) -> Result<Moments<T>> {
    let first = samples.first().ok_or(AmbiguityError::Empty)?;
    let n = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(AmbiguityError::Dimension {
            expected: n,
            got: bad.len(),
        });
    }
    let k = T::from_count(samples.len());
    let mut mean = vec![T::zero(); n];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k;
    }
    let mut cov = DMatrix::<T>::zeros(n, n);
    let mut d = vec![T::zero(); n];
    for s in samples {
        for i in 0..n {
            d[i] = s[i] - mean[i];
        }
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / k;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(Moments {
        mean,
        cov,
        k_sc: samples.len(),
    })
}

pub fn min_eigenvalue<T: LinalgScalar>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(Float::infinity(), Float::min)
}

/// Eigenvalues below this count as rank deficiency.
pub const SINGULAR_EIGENVALUE: f64 = 1e-8;
/// Absolute diagonal loading used when the relative ridge is zero.
pub const ABSOLUTE_FLOOR: f64 = 1e-6;

/// Adds `ridge · trace/dim · I` to a rank-deficient covariance, falling back
/// to `1e-6 · I` when that shift would be zero.
pub fn regularize_covariance<T: LinalgScalar>(m: &Moments<T>, ridge: T) -> Moments<T> {
    let n = m.dim();
    if n == 0 || min_eigenvalue(&m.cov) >= T::lit(SINGULAR_EIGENVALUE) {
        return m.clone();
    }
    let trace = m.cov.trace();
    let mut shift = Float::max(ridge, T::zero()) * trace / T::from_count(n);
    if !(shift > T::zero()) {
        shift = T::lit(ABSOLUTE_FLOOR);
    }
    let mut cov = m.cov.clone();
    for i in 0..n {
        cov[(i, i)] += shift;
    }
    Moments {
        mean: m.mean.clone(),
        cov,
        k_sc: m.k_sc,
    }
}

/// Safety factor when the mean ellipsoid is small relative to `epsilon`:
/// `√γ₁ + √((1−ε)/ε · (γ₂−γ₁))`.
pub fn eta_mean_branch<T: Scalar>(p: &AmbiguityParams<T>) -> T {
    p.gamma1.sqrt() + ((T::one() - p.epsilon) / p.epsilon * (p.gamma2 - p.gamma1)).sqrt()
}

/// Safety factor `√(γ₂/ε)`.
pub fn eta_covariance_branch<T: Scalar>(p: &AmbiguityParams<T>) -> T {
    (p.gamma2 / p.epsilon).sqrt()
}

/// Distributionally robust safety factor η(ε) of the moment ambiguity set.
pub fn eta<T: Scalar>(p: &AmbiguityParams<T>) -> Result<T> {
    p.validate()?;
    if p.gamma1 / p.gamma2 <= p.epsilon {
        Ok(eta_mean_branch(p))
    } else {
        Ok(eta_covariance_branch(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Membership {
    pub mean_ok: bool,
    pub cov_ok: bool,
}

/// Tests a candidate distribution's mean and centered second moment against
/// the ambiguity set built from `m` (whose covariance must be invertible).
pub fn membership_check<T: LinalgScalar>(
    candidate_mean: &[T],
    candidate_second_moment: &DMatrix<T>,
    m: &Moments<T>,
    params: &AmbiguityParams<T>,
    mean_ref: &[T],
) -> Result<Membership> {
    params.validate()?;
    let n = m.dim();
    for len in [
        candidate_mean.len(),
        mean_ref.len(),
        candidate_second_moment.nrows(),
        candidate_second_moment.ncols(),
    ] {
        if len != n {
            return Err(AmbiguityError::Dimension {
                expected: n,
                got: len,
            });
        }
    }
    let chol = m.cov.clone().cholesky().ok_or(AmbiguityError::Singular)?;
    let d = DVector::from_iterator(n, candidate_mean.iter().zip(mean_ref).map(|(&a, &b)| a - b));
    let solved = chol.solve(&d);
    let quad = d.dot(&solved);
    let gap = &m.cov * params.gamma2 - candidate_second_moment;
    let sym = (&gap + gap.transpose()) * T::lit(0.5);
    Ok(Membership {
        mean_ok: quad <= params.gamma1,
        cov_ok: min_eigenvalue(&sym) >= T::lit(-1e-9),
    })
}

/// Symmetric square-root factor `F` with `Σ = F Fᵀ`, clipping tiny negative
/// eigenvalues to zero.
pub fn covariance_factor<T: LinalgScalar>(cov: &DMatrix<T>) -> DMatrix<T> {
    let n = cov.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (cov + cov.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    let mut f = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = Float::sqrt(Float::max(lam, T::zero()));
        for i in 0..n {
            f[(i, j)] *= s;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(g1: f64, g2: f64, eps: f64) -> AmbiguityParams {
        AmbiguityParams::new(g1, g2, eps, AmbiguityMode::M1).unwrap()
    }

    #[test]
    fn two_scenario_moments() {
        let m = empirical_moments(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.mean, vec![2.0, 3.0]);
        assert_eq!(m.cov, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(m.k_sc, 2);
    }

    #[test]
    fn degenerate_moments() {
        let m = empirical_moments(&[vec![1.5, 2.5]]).unwrap();
        assert_eq!(m.cov, DMatrix::zeros(2, 2));
        let m = empirical_moments(&vec![vec![0.7, 0.1]; 5]).unwrap();
        assert_eq!(m.cov, DMatrix::zeros(2, 2));
        assert_eq!(m.mean, vec![0.7, 0.1]);
        assert_eq!(empirical_moments::<f64>(&[]), Err(AmbiguityError::Empty));
        assert!(matches!(
            empirical_moments(&[vec![1.0], vec![1.0, 2.0]]),
            Err(AmbiguityError::Dimension { .. })
        ));
    }

    #[test]
    fn regularization_cases() {
        let pd = Moments {
            mean: vec![0.0, 0.0],
            cov: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            k_sc: 3,
        };
        assert_eq!(regularize_covariance(&pd, 0.0), pd);

        let zero = Moments::point(vec![1.0, 1.0]);
        let r = regularize_covariance(&zero, 1e-3);
        assert_eq!(r.cov, DMatrix::identity(2, 2) * 1e-6);

        let rank1 = Moments {
            mean: vec![0.0, 0.0],
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            k_sc: 2,
        };
        let r = regularize_covariance(&rank1, 1e-3);
        assert!(min_eigenvalue(&r.cov) > 0.0);
        assert!((min_eigenvalue(&r.cov) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn eta_examples() {
        assert!((eta(&params(0.1, 1.0, 0.1)).unwrap() - 10f64.sqrt()).abs() < 1e-12);
        assert!((eta(&params(0.5, 1.0, 0.1)).unwrap() - 10f64.sqrt()).abs() < 1e-12);
        assert!((eta(&params(0.0, 1.0, 0.5)).unwrap() - 1.0).abs() < 1e-15);
        let bad = AmbiguityParams {
            gamma1: 0.1,
            gamma2: 1.0,
            epsilon: 0.0,
            mode: AmbiguityMode::M1,
        };
        assert!(eta(&bad).is_err());
        assert!(AmbiguityParams::new(0.1, 0.5, 0.1, AmbiguityMode::M2).is_err());
    }

    #[test]
    fn eta_in_f32() {
        let p = AmbiguityParams::new(0.1f32, 1.0, 0.1, AmbiguityMode::M1).unwrap();
        assert!((eta(&p).unwrap() - 10f32.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn membership_examples() {
        let m = Moments {
            mean: vec![0.0, 0.0],
            cov: DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            k_sc: 10,
        };
        let p = params(0.1, 1.0, 0.1);
        let r = membership_check(&[0.0, 0.0], &m.cov, &m, &p, &[0.0, 0.0]).unwrap();
        assert!(r.mean_ok && r.cov_ok);

        let m1 = Moments {
            mean: vec![0.0],
            cov: DMatrix::from_element(1, 1, 4.0),
            k_sc: 10,
        };
        let p = params(0.2, 1.0, 0.1);
        let r = membership_check(&[1.0], &m1.cov, &m1, &p, &[0.0]).unwrap();
        assert!(!r.mean_ok);
        let big = DMatrix::from_element(1, 1, 4.5);
        assert!(
            !membership_check(&[0.0], &big, &m1, &p, &[0.0])
                .unwrap()
                .cov_ok
        );

        let singular = Moments::point(vec![0.0]);
        assert_eq!(
            membership_check(&[0.0], &big, &singular, &p, &[0.0]),
            Err(AmbiguityError::Singular)
        );
    }

    #[test]
    fn factor_reproduces_covariance() {
        let cov = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let f = covariance_factor(&cov);
        assert!((&f * f.transpose() - &cov).abs().max() < 1e-12);
    }
}
