//! Unitarily invariant matrix norms: a symmetric gauge applied to singular
//! values. Provides evaluation, duality, the spectral prox / dual-ball
//! projection, and the rank-r subspace decomposition used by the geometric
//! bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{GdsError, Result};
use crate::gauge::{rho, Gauge, Rho};
use crate::util::abs_sorted_desc;

/// Singular values of `m`, descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().singular_values()
}

/// Spectral OWL norm: inner product of the singular values with the weight
/// magnitudes sorted descending.
pub fn spectral_owl_norm(m: &DMatrix<f64>, weights: &DVector<f64>) -> f64 {
    let sigma = singular_values(m);
    let (w, _) = abs_sorted_desc(weights);
    sigma.iter().zip(w.iter()).map(|(s, wi)| s * wi).sum()
}

/// A matrix norm on rows x cols matrices defined by a gauge on the singular
/// values. Convention: rows <= cols, and the gauge dimension equals rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNorm {
    gauge: Gauge,
    rows: usize,
    cols: usize,
}

impl SpectralNorm {
    pub fn new(gauge: Gauge, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > cols {
            return Err(GdsError::InvalidArgument(format!(
                "spectral norm needs 1 <= rows <= cols, got {rows}x{cols}"
            )));
        }
        if gauge.dim() != rows {
            return Err(GdsError::DimensionMismatch {
                expected: rows,
                got: gauge.dim(),
            });
        }
        Ok(SpectralNorm { gauge, rows, cols })
    }

    /// Sum of singular values.
    pub fn trace_norm(rows: usize, cols: usize) -> Result<Self> {
        Self::new(Gauge::l1(rows.min(cols))?, rows, cols)
    }

    /// Entrywise l2 via the singular values.
    pub fn frobenius(rows: usize, cols: usize) -> Result<Self> {
        Self::new(Gauge::l2(rows.min(cols))?, rows, cols)
    }

    pub fn spectral_k_support(rows: usize, cols: usize, k: usize) -> Result<Self> {
        Self::new(Gauge::k_support(rows.min(cols), k)?, rows, cols)
    }

    pub fn spectral_owl(rows: usize, cols: usize, weights: DVector<f64>) -> Result<Self> {
        Self::new(Gauge::owl(weights)?, rows, cols)
    }

    pub fn spectral_ky_fan(rows: usize, cols: usize, k: usize) -> Result<Self> {
        Self::new(Gauge::ky_fan(rows.min(cols), k)?, rows, cols)
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn supports_prox(&self) -> bool {
        self.gauge.supports_prox()
    }

    fn check_shape(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return Err(GdsError::ShapeMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        Ok(())
    }

    /// R(m) = f(sigma(m)).
    pub fn eval(&self, m: &DMatrix<f64>) -> Result<f64> {
        self.check_shape(m)?;
        self.gauge.eval(&singular_values(m))
    }

    /// R*(m) = f*(sigma(m)).
    pub fn dual_eval(&self, m: &DMatrix<f64>) -> Result<f64> {
        self.check_shape(m)?;
        self.gauge.dual_eval(&singular_values(m))
    }

    /// Spectral prox: apply the vector prox to the singular values and
    /// rebuild with the same singular vectors.
    pub fn prox(&self, m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        self.check_shape(m)?;
        if t <= 0.0 {
            return Err(GdsError::InvalidArgument(format!(
                "prox step must be positive, got {t}"
            )));
        }
        let svd = m.clone().svd(true, true);
        let sigma = DVector::from_iterator(self.rows, svd.singular_values.iter().copied());
        let shrunk = self.gauge.prox(&sigma, t)?;
        let u = svd.u.as_ref().expect("svd with u");
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        Ok(u * DMatrix::from_diagonal(&shrunk) * v_t)
    }

    /// Frobenius projection onto { Z : R*(Z) <= lambda }, via the Moreau
    /// identity Z = m - prox_{lambda R}(m).
    pub fn project_dual_ball(&self, m: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        self.check_shape(m)?;
        if lambda <= 0.0 {
            return Err(GdsError::InvalidArgument(format!(
                "dual-ball radius must be positive, got {lambda}"
            )));
        }
        Ok(m - self.prox(m, lambda)?)
    }

    /// Subspace decomposition at `m` with the default numerical-rank
    /// tolerance max(d, p) * eps * sigma_1.
    pub fn decompose(&self, m: &DMatrix<f64>) -> Result<SubspaceDecomposition> {
        self.decompose_with_tol(m, f64::NAN)
    }

    /// As `decompose`, with an explicit rank tolerance (NaN = default).
    pub fn decompose_with_tol(
        &self,
        m: &DMatrix<f64>,
        rank_tol: f64,
    ) -> Result<SubspaceDecomposition> {
        self.check_shape(m)?;
        let svd = m.clone().svd(true, true);
        let mut sigma = DVector::from_iterator(self.rows, svd.singular_values.iter().copied());
        if sigma[0] == 0.0 {
            return Err(GdsError::Degenerate(
                "subspace decomposition of the zero matrix".into(),
            ));
        }
        let tol = if rank_tol.is_nan() {
            self.cols.max(self.rows) as f64 * f64::EPSILON * sigma[0]
        } else {
            rank_tol
        };
        let r = sigma.iter().filter(|s| **s > tol).count().max(1);
        // Canonical exact-rank form: entries at or below tolerance are noise.
        for i in r..self.rows {
            sigma[i] = 0.0;
        }
        let u_full = svd.u.as_ref().expect("svd with u");
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        let u = u_full.columns(0, r).into_owned();
        let v = v_t.rows(0, r).transpose();
        let theta_star = self.gauge.polar(&sigma)?;
        let d = self.rows;
        let mut w = DVector::zeros(d);
        for i in 0..r {
            w[i] = theta_star[i];
        }
        let mut z = DVector::zeros(d);
        for i in r..d {
            z[i - r] = theta_star[i];
        }
        let pu = &u * u.transpose();
        let pv = &v * v.transpose();
        Ok(SubspaceDecomposition {
            rows: self.rows,
            cols: self.cols,
            rank: r,
            sigma,
            theta_star,
            w,
            z,
            u,
            v,
            pu,
            pv,
        })
    }
}

/// Decomposition of matrix space induced by the compact SVD of a reference
/// matrix and a subgradient of its gauge:
/// - M1: column space in col(U), row space in row(V^T)
/// - M2: both spaces in the orthogonal complements
/// - M_perp: everything else
///
/// with the subgradient split into a head weight vector `w` (first r
/// entries) and tail weight vector `z`.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    rows: usize,
    cols: usize,
    rank: usize,
    sigma: DVector<f64>,
    theta_star: DVector<f64>,
    w: DVector<f64>,
    z: DVector<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    pu: DMatrix<f64>,
    pv: DMatrix<f64>,
}

impl SubspaceDecomposition {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Singular values of the reference matrix (noise entries zeroed).
    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    /// The polar-operator subgradient, nonnegative descending.
    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn head_weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn tail_weights(&self) -> &DVector<f64> {
        &self.z
    }

    /// Left factor of the compact SVD, d x r orthonormal columns.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Right factor, p x r orthonormal columns.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rho(&self) -> Result<Rho> {
        rho(&self.theta_star)
    }

    pub fn project_m1(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.pu * m * &self.pv
    }

    pub fn project_m2(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let left = m - &self.pu * m;
        &left - &left * &self.pv
    }

    pub fn project_perp(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m - self.project_m1(m) - self.project_m2(m)
    }

    /// Subspace spectral OWL seminorm: ||P1 m||_w + ||P2 m||_z.
    pub fn seminorm(&self, m: &DMatrix<f64>) -> f64 {
        let s1 = singular_values(&self.project_m1(m));
        let s2 = singular_values(&self.project_m2(m));
        let a: f64 = s1.iter().zip(self.w.iter()).map(|(s, w)| s * w).sum();
        let b: f64 = s2.iter().zip(self.z.iter()).map(|(s, z)| s * z).sum();
        a + b
    }
}
