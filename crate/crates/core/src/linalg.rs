//! Dense symmetric linear algebra shared by every agent.
//!
//! Everything that touches a design matrix goes through the λ-regularized
//! form `V + λI`, which is positive definite for any PSD `V` and `λ > 0`.
//! Determinant ratios are always computed in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Design matrix `V = Σ x xᵀ` and moment vector `b = Σ x y` for one
/// parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    design: Matrix,
    moment: Vector,
}

impl SufficientStats {
    pub fn zeros(dim: usize) -> Self {
        Self {
            design: Matrix::zeros(dim, dim),
            moment: Vector::zeros(dim),
        }
    }

    /// Builds statistics from explicit parts. The design matrix must be
    /// square, symmetric to 1e-12 and match the moment length.
    pub fn from_parts(design: Matrix, moment: Vector) -> Result<Self> {
        let dim = moment.len();
        if design.nrows() != dim || design.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: design.nrows().max(design.ncols()),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (design[(i, j)] - design[(j, i)]).abs() > 1e-12 {
                    return Err(Error::contract("design matrix is not symmetric"));
                }
            }
        }
        let mut design = design;
        mirror_upper(&mut design);
        Ok(Self { design, moment })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn moment(&self) -> &Vector {
        &self.moment
    }

    /// Number of scalars carried by one transfer of these statistics.
    pub fn payload_params(&self) -> usize {
        let d = self.dim();
        d * d + d
    }

    /// `V += x xᵀ`, `b += x y`. Only the upper triangle is computed; the
    /// lower triangle is mirrored from it.
    pub fn rank1_update(&mut self, x: &Vector, y: f64) -> Result<()> {
        self.check_dim(x.len())?;
        let d = self.dim();
        for j in 0..d {
            let xj = x[j];
            for i in 0..=j {
                let v = self.design[(i, j)] + x[i] * xj;
                self.design[(i, j)] = v;
                self.design[(j, i)] = v;
            }
        }
        self.moment.axpy(y, x, 1.0);
        Ok(())
    }

    /// Functional form of [`SufficientStats::rank1_update`].
    pub fn with_observation(&self, x: &Vector, y: f64) -> Result<Self> {
        let mut out = self.clone();
        out.rank1_update(x, y)?;
        Ok(out)
    }

    /// `self += other`.
    pub fn absorb(&mut self, other: &SufficientStats) -> Result<()> {
        self.check_dim(other.dim())?;
        self.design += &other.design;
        self.moment += &other.moment;
        Ok(())
    }

    /// `self − other`.
    pub fn difference(&self, other: &SufficientStats) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self {
            design: &self.design - &other.design,
            moment: &self.moment - &other.moment,
        })
    }

    pub fn clear(&mut self) {
        self.design.fill(0.0);
        self.moment.fill(0.0);
    }

    /// True when the design matrix has no nonzero entry.
    pub fn design_is_zero(&self) -> bool {
        self.design.iter().all(|v| *v == 0.0)
    }

    /// Smallest eigenvalue of the (unregularized) design matrix. `None` for
    /// a zero-dimensional block.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        if self.dim() == 0 {
            return None;
        }
        self.design
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .reduce(f64::min)
    }

    /// Cholesky factorization of `V + λI` together with the ridge estimate
    /// and log-determinant it implies.
    pub fn factor(&self, lambda: f64) -> Result<RegularizedFactor> {
        RegularizedFactor::new(self, lambda)
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }
}

fn mirror_upper(m: &mut Matrix) {
    let d = m.nrows();
    for j in 0..d {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Factorization of `V + λI`, cached by agents between absorptions.
#[derive(Debug, Clone)]
pub struct RegularizedFactor {
    chol: Cholesky<f64, Dyn>,
    theta: Vector,
    log_det: f64,
}

impl RegularizedFactor {
    pub fn new(stats: &SufficientStats, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::contract(format!("λ must be positive, got {lambda}")));
        }
        let chol = regularized_cholesky(&stats.design, lambda)?;
        let theta = chol.solve(&stats.moment);
        let log_det = cholesky_log_det(&chol);
        Ok(Self {
            chol,
            theta,
            log_det,
        })
    }

    /// Ridge estimate `(V + λI)⁻¹ b`.
    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    /// `log det(V + λI)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `√(xᵀ (V + λI)⁻¹ x)`.
    pub fn mahalanobis(&self, x: &Vector) -> Result<f64> {
        if x.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                actual: x.len(),
            });
        }
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(x)
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(z.norm())
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        self.chol.solve(rhs)
    }
}

fn regularized_cholesky(design: &Matrix, lambda: f64) -> Result<Cholesky<f64, Dyn>> {
    let mut m = design.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    Cholesky::new(m).ok_or(Error::NotPositiveDefinite)
}

fn cholesky_log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// `log det(V + λI)`.
pub fn log_det_regularized(stats: &SufficientStats, lambda: f64) -> Result<f64> {
    Ok(cholesky_log_det(&regularized_cholesky(&stats.design, lambda)?))
}

/// Ridge regression estimate `(V + λI)⁻¹ b`.
pub fn ridge_estimate(stats: &SufficientStats, lambda: f64) -> Result<Vector> {
    Ok(stats.factor(lambda)?.theta)
}

/// `log[det(V_num + λI) / det(V_den + λI)]`.
pub fn log_det_ratio(
    numerator: &SufficientStats,
    denominator: &SufficientStats,
    lambda: f64,
) -> Result<f64> {
    numerator.check_dim(denominator.dim())?;
    Ok(log_det_regularized(numerator, lambda)? - log_det_regularized(denominator, lambda)?)
}

/// `‖x‖_{(V + λI)⁻¹}`.
pub fn mahalanobis_norm(stats: &SufficientStats, lambda: f64, x: &Vector) -> Result<f64> {
    stats.factor(lambda)?.mahalanobis(x)
}

/// Euclidean projection onto the ℓ2 ball of radius `radius`.
pub fn project_ball(y: &Vector, radius: f64) -> Vector {
    let scale = (y.norm() / radius).max(1.0);
    if scale > 1.0 {
        y / scale
    } else {
        y.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn diag(xs: &[f64]) -> SufficientStats {
        SufficientStats::from_parts(Matrix::from_diagonal(&v(xs)), Vector::zeros(xs.len()))
            .unwrap()
    }

    #[test]
    fn rank1_examples() {
        let mut s = SufficientStats::zeros(2);
        s.rank1_update(&v(&[1.0, 0.0]), 2.0).unwrap();
        assert_eq!(s.design(), &Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(s.moment(), &v(&[2.0, 0.0]));

        s.rank1_update(&v(&[0.0, 1.0]), -1.0).unwrap();
        assert_eq!(s.design(), &Matrix::identity(2, 2));
        assert_eq!(s.moment(), &v(&[2.0, -1.0]));

        s.rank1_update(&v(&[1.0, 1.0]), 0.0).unwrap();
        assert_eq!(s.design(), &Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        assert_eq!(s.moment(), &v(&[2.0, -1.0]));
    }

    #[test]
    fn rank1_dimension_mismatch() {
        let mut s = SufficientStats::zeros(2);
        assert!(matches!(
            s.rank1_update(&v(&[1.0, 0.0, 0.0]), 1.0),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn ridge_examples() {
        let s = SufficientStats::zeros(2);
        assert_eq!(ridge_estimate(&s, 1.0).unwrap(), v(&[0.0, 0.0]));

        let mut s = SufficientStats::zeros(2);
        s.rank1_update(&v(&[1.0, 0.0]), 1.0).unwrap();
        let th = ridge_estimate(&s, 1.0).unwrap();
        assert_abs_diff_eq!(th[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(th[1], 0.0, epsilon = 1e-14);

        let s = SufficientStats::from_parts(Matrix::identity(2, 2), v(&[2.0, 4.0])).unwrap();
        let th = ridge_estimate(&s, 1.0).unwrap();
        assert_abs_diff_eq!(th[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(th[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn ridge_rejects_corrupt_design() {
        let s = diag(&[-5.0, 1.0]);
        assert!(matches!(ridge_estimate(&s, 1.0), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn log_det_ratio_examples() {
        let a = diag(&[2.0, 2.0]);
        assert_eq!(log_det_ratio(&a, &a, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(log_det_ratio(&a, &diag(&[1.0, 1.0]), 1.0).unwrap(), (9.0f64 / 4.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(log_det_ratio(&diag(&[1.0, 0.0]), &SufficientStats::zeros(2), 1.0).unwrap(), 2.0f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn project_ball_examples() {
        assert_eq!(project_ball(&v(&[0.3, 0.4]), 1.0), v(&[0.3, 0.4]));
        let p = project_ball(&v(&[3.0, 4.0]), 1.0);
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-15);
        assert_eq!(project_ball(&v(&[0.0, 0.0]), 1.0), v(&[0.0, 0.0]));
    }

    #[test]
    fn mahalanobis_examples() {
        let zero = SufficientStats::zeros(2);
        assert_abs_diff_eq!(mahalanobis_norm(&zero, 1.0, &v(&[1.0, 0.0])).unwrap(), 1.0, epsilon = 1e-15);
        let s = diag(&[3.0, 0.0]);
        assert_abs_diff_eq!(mahalanobis_norm(&s, 1.0, &v(&[1.0, 0.0])).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mahalanobis_norm(&s, 1.0, &v(&[0.0, 1.0])).unwrap(), 1.0, epsilon = 1e-15);
        // V = 0 reduces to ‖x‖/√λ.
        assert_abs_diff_eq!(mahalanobis_norm(&zero, 4.0, &v(&[3.0, 4.0])).unwrap(), 2.5, epsilon = 1e-14);
    }

    #[test]
    fn zero_dimensional_block() {
        let s = SufficientStats::zeros(0);
        assert_eq!(log_det_regularized(&s, 1.0).unwrap(), 0.0);
        assert_eq!(ridge_estimate(&s, 1.0).unwrap().len(), 0);
        assert!(s.design_is_zero());
        assert_eq!(s.min_eigenvalue(), None);
        assert_eq!(s.payload_params(), 0);
    }

    #[test]
    fn from_parts_rejects_asymmetry() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(SufficientStats::from_parts(m, Vector::zeros(2)).is_err());
    }
}
