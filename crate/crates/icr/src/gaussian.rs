//! Gaussian distributions and linear-Gaussian conditionals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::VarSet;

/// Accepted asymmetry in covariance inputs.
pub const SYM_TOL: f64 = 1e-12;
/// Relative eigenvalue floor for positive definiteness.
pub const PD_RATIO: f64 = 1e-10;

/// A multivariate Gaussian over a sorted set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDistribution {
    scope: VarSet,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianDistribution {
    pub fn new(scope: VarSet, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = scope.len();
        if mean.len() != k || cov.nrows() != k || cov.ncols() != k {
            return Err(Error::InvalidDistribution(format!(
                "mean/covariance dimensions do not match scope {}",
                scope
            )));
        }
        let asym = (&cov - cov.transpose()).amax();
        if !asym.is_finite() || asym > SYM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "covariance asymmetry {} above {}",
                asym, SYM_TOL
            )));
        }
        check_positive_definite(&cov)?;
        Ok(Self { scope, mean, cov })
    }

    pub fn scope(&self) -> &VarSet {
        &self.scope
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Mean and covariance restricted to `sub`, which must be a subset of the scope.
    pub fn marginal_blocks(&self, sub: &VarSet) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if !sub.is_subset(&self.scope) {
            return Err(Error::NotSubset {
                set: sub.to_string(),
                scope: self.scope.to_string(),
            });
        }
        let pos: Vec<usize> = sub.iter().map(|&v| self.scope.position(v).unwrap()).collect();
        let mean = DVector::from_fn(pos.len(), |i, _| self.mean[pos[i]]);
        let cov = DMatrix::from_fn(pos.len(), pos.len(), |i, j| self.cov[(pos[i], pos[j])]);
        Ok((mean, cov))
    }
}

/// Positive definiteness with a relative eigenvalue floor: the smallest
/// eigenvalue must exceed [`PD_RATIO`] times the largest.
pub(crate) fn check_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let sym = (m + m.transpose()) * 0.5;
    let eigen = sym.symmetric_eigen();
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    if !max.is_finite() || !min.is_finite() || max <= 0.0 || min <= PD_RATIO * max {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// A linear-Gaussian conditional: `target | parents ~ N(coef * x_parents +
/// intercept, cond_cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    target: VarSet,
    parents: VarSet,
    coef: DMatrix<f64>,
    intercept: DVector<f64>,
    cond_cov: DMatrix<f64>,
}

impl GaussianConditional {
    pub fn new(
        target: VarSet,
        parents: VarSet,
        coef: DMatrix<f64>,
        intercept: DVector<f64>,
        cond_cov: DMatrix<f64>,
    ) -> Result<Self> {
        if !target.intersection(&parents).is_empty() {
            return Err(Error::InvalidModel(format!(
                "target {} and parents {} overlap",
                target, parents
            )));
        }
        let na = target.len();
        let nb = parents.len();
        if coef.nrows() != na || coef.ncols() != nb {
            return Err(Error::InvalidModel(format!(
                "coef must be {}x{}, found {}x{}",
                na,
                nb,
                coef.nrows(),
                coef.ncols()
            )));
        }
        if intercept.len() != na {
            return Err(Error::InvalidModel(format!(
                "intercept must have length {}",
                na
            )));
        }
        if cond_cov.nrows() != na || cond_cov.ncols() != na {
            return Err(Error::InvalidModel(format!(
                "cond_cov must be {}x{}",
                na, na
            )));
        }
        let asym = (&cond_cov - cond_cov.transpose()).amax();
        if !asym.is_finite() || asym > SYM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "cond_cov asymmetry {} above {}",
                asym, SYM_TOL
            )));
        }
        check_positive_definite(&cond_cov)?;
        Ok(Self {
            target,
            parents,
            coef,
            intercept,
            cond_cov,
        })
    }

    /// Builds from plain nested rows, as they appear in the model file.
    pub fn from_rows(
        target: VarSet,
        parents: VarSet,
        coef: &[Vec<f64>],
        intercept: &[f64],
        cond_cov: &[Vec<f64>],
    ) -> Result<Self> {
        let na = target.len();
        let nb = parents.len();
        if coef.len() != na || coef.iter().any(|r| r.len() != nb) {
            return Err(Error::InvalidModel(format!("coef must be {}x{}", na, nb)));
        }
        if cond_cov.len() != na || cond_cov.iter().any(|r| r.len() != na) {
            return Err(Error::InvalidModel(format!("cond_cov must be {}x{}", na, na)));
        }
        let coef = DMatrix::from_fn(na, nb, |i, j| coef[i][j]);
        let cond_cov = DMatrix::from_fn(na, na, |i, j| cond_cov[i][j]);
        let intercept = DVector::from_column_slice(intercept);
        Self::new(target, parents, coef, intercept, cond_cov)
    }

    pub fn target(&self) -> &VarSet {
        &self.target
    }

    pub fn parents(&self) -> &VarSet {
        &self.parents
    }

    pub fn coef(&self) -> &DMatrix<f64> {
        &self.coef
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn cond_cov(&self) -> &DMatrix<f64> {
        &self.cond_cov
    }

    pub fn scope(&self) -> VarSet {
        self.target.union(&self.parents)
    }
}

/// Closed-form Kullback-Leibler divergence between two Gaussians on the same
/// scope; zero iff the parameters coincide.
pub fn gaussian_kl(q: &GaussianDistribution, h: &GaussianDistribution) -> Result<f64> {
    if q.scope != h.scope {
        return Err(Error::ScopeMismatch {
            left: q.scope.to_string(),
            right: h.scope.to_string(),
        });
    }
    kl_moments(&q.mean, &q.cov, &h.mean, &h.cov)
}

/// KL between `N(mq, cq)` and `N(mh, ch)` of equal dimension.
pub(crate) fn kl_moments(
    mq: &DVector<f64>,
    cq: &DMatrix<f64>,
    mh: &DVector<f64>,
    ch: &DMatrix<f64>,
) -> Result<f64> {
    let k = mq.len() as f64;
    let chol_h = ch.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let chol_q = cq.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let trace = chol_h.solve(cq).trace();
    let diff = mh - mq;
    let quad = diff.dot(&chol_h.solve(&diff));
    let log_det_h: f64 = 2.0 * chol_h.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let log_det_q: f64 = 2.0 * chol_q.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok((0.5 * (trace + quad - k + log_det_h - log_det_q)).max(0.0))
}
