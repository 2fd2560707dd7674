//! Gaussian summaries of curve sets and the Fréchet distance between them.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::curve::EventCurve;
use crate::error::{Error, Result};
use crate::stats;

/// Added to every fitted covariance and, when needed, before inverting.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    sample_count: usize,
}

impl GaussianStats {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>, sample_count: usize) -> Result<Self> {
        let n = mean.len();
        if n == 0 || cov.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "mean of length {n} needs an {n}x{n} covariance, got {:?}",
                cov.shape()
            )));
        }
        if sample_count < 2 {
            return Err(Error::InvalidData(format!(
                "a Gaussian fit needs at least 2 samples, got {sample_count}"
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Gaussian moments".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * cov.amax().max(1.0) {
            return Err(Error::InvalidData(format!("covariance is not symmetric (max deviation {asym:e})")));
        }
        let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidData(format!("covariance is not PSD (eigenvalue {min_eig:e})")));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

/// Sample mean and covariance (divisor `N - 1`) plus `1e-6 I`.
pub fn fit_gaussian(curves: &[EventCurve]) -> Result<GaussianStats> {
    let rows: Vec<&[f64]> = curves.iter().map(|c| c.values()).collect();
    fit_rows(&rows)
}

/// As [`fit_gaussian`], over raw vectors.
pub fn fit_rows(rows: &[&[f64]]) -> Result<GaussianStats> {
    if rows.len() < 2 {
        return Err(Error::InvalidData(format!(
            "a Gaussian fit needs at least 2 curves, got {}",
            rows.len()
        )));
    }
    let n = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::Shape(format!(
            "curves of length {n} and {} cannot share a Gaussian",
            bad.len()
        )));
    }
    let count = rows.len();
    let mean: Vec<f64> = (0..n)
        .map(|i| stats::mean(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect();
    let centered = DMatrix::from_fn(count, n, |k, i| rows[k][i] - mean[i]);
    let mut cov = centered.transpose() * &centered / (count - 1) as f64;
    // the product is symmetric mathematically; make it so bitwise
    symmetrize(&mut cov);
    for i in 0..n {
        cov[(i, i)] += COVARIANCE_REGULARIZATION;
    }
    GaussianStats::new(mean, cov, count)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_eigen(e: &SymmetricEigen<f64, nalgebra::Dyn>) -> Result<()> {
    if e.eigenvalues.iter().chain(e.eigenvectors.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
    }
    Ok(())
}

/// Square root of a symmetric PSD matrix, negative eigenvalues clamped to 0.
fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = SymmetricEigen::new(m.clone());
    check_eigen(&e)?;
    let roots = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    let mut out = &e.eigenvectors * DMatrix::from_diagonal(&roots) * e.eigenvectors.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// `Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)`.
pub(crate) fn covariance_term(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let r1 = sqrtm_psd(s1)?;
    let mut inner = &r1 * s2 * &r1;
    symmetrize(&mut inner);
    let e = SymmetricEigen::new(inner);
    check_eigen(&e)?;
    let cross: f64 = e.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(s1.trace() + s2.trace() - 2.0 * cross)
}

fn check_dims(g1: &GaussianStats, g2: &GaussianStats) -> Result<()> {
    if g1.dim() != g2.dim() {
        return Err(Error::Shape(format!(
            "Gaussians of dimension {} and {} cannot be compared",
            g1.dim(),
            g2.dim()
        )));
    }
    Ok(())
}

/// Squared Fréchet distance `|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)`.
///
/// Rounding can push the result a hair below zero for identical inputs; it
/// is clamped at 0.
pub fn frechet_distance(g1: &GaussianStats, g2: &GaussianStats) -> Result<f64> {
    check_dims(g1, g2)?;
    let mean_term = (&g1.mean - &g2.mean).norm_squared();
    let d2 = mean_term + covariance_term(&g1.cov, &g2.cov)?;
    if !d2.is_finite() {
        return Err(Error::Numerical("Fréchet distance is not finite".into()));
    }
    Ok(d2.max(0.0))
}

/// Gaussian of the first block given the second: the joint is over
/// `[M; V]` with `M` of dimension `m_dim`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    mean_m: DVector<f64>,
    mean_v: DVector<f64>,
    /// `S_MV S_VV^-1`, of shape `m_dim x v_dim`.
    gain: DMatrix<f64>,
    cov: DMatrix<f64>,
    sample_count: usize,
}

impl ConditionalGaussian {
    pub fn new(joint: &GaussianStats, m_dim: usize) -> Result<Self> {
        let n = joint.dim();
        if m_dim == 0 || m_dim >= n {
            return Err(Error::Shape(format!(
                "block split {m_dim} must leave both blocks non-empty in dimension {n}"
            )));
        }
        let v_dim = n - m_dim;
        let s = &joint.cov;
        let s_mm = s.view((0, 0), (m_dim, m_dim)).into_owned();
        let s_mv = s.view((0, m_dim), (m_dim, v_dim)).into_owned();
        let s_vv = s.view((m_dim, m_dim), (v_dim, v_dim)).into_owned();
        let chol = match Cholesky::new(s_vv.clone()) {
            Some(c) => c,
            None => {
                let reg = s_vv + DMatrix::identity(v_dim, v_dim) * COVARIANCE_REGULARIZATION;
                Cholesky::new(reg).ok_or_else(|| {
                    Error::Numerical("video block covariance is singular even after regularization".into())
                })?
            }
        };
        // gain^T = S_VV^-1 S_VM
        let gain = chol.solve(&s_mv.transpose()).transpose();
        let mut cov = s_mm - &gain * s_mv.transpose();
        symmetrize(&mut cov);
        if gain.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("conditional Gaussian is not finite".into()));
        }
        Ok(Self {
            mean_m: joint.mean.rows(0, m_dim).into_owned(),
            mean_v: joint.mean.rows(m_dim, v_dim).into_owned(),
            gain,
            cov,
            sample_count: joint.sample_count,
        })
    }

    pub fn m_dim(&self) -> usize {
        self.mean_m.len()
    }

    pub fn v_dim(&self) -> usize {
        self.mean_v.len()
    }

    /// The same for every `v`.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mean_given(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.v_dim() {
            return Err(Error::Shape(format!(
                "conditioning vector has length {}, expected {}",
                v.len(),
                self.v_dim()
            )));
        }
        let dv = DVector::from_column_slice(v) - &self.mean_v;
        Ok(&self.mean_m + &self.gain * dv)
    }

    pub fn given(&self, v: &[f64]) -> Result<GaussianStats> {
        let mean = self.mean_given(v)?;
        GaussianStats::new(mean.as_slice().to_vec(), self.cov.clone(), self.sample_count)
    }
}

/// `M | V = v` for a joint Gaussian over `[M; V]`.
pub fn conditional_gaussian(joint: &GaussianStats, m_dim: usize, v: &[f64]) -> Result<GaussianStats> {
    ConditionalGaussian::new(joint, m_dim)?.given(v)
}
