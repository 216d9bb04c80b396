//! Sub-Gaussian measurement ensembles, observation models, and the
//! forward/adjoint linear maps of the sensing operator.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GdsError, Result};
use crate::util::{split_seed, stream_rng};

const NOISE_SEED_LABEL: u64 = 0x6e_6f69_7365;

/// Entry distribution of the measurement matrices. All are isotropic:
/// E <<X, D>>^2 = ||D||_F^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// +-1 equiprobable entries.
    Rademacher,
    /// Entries 0 with probability 1 - 1/s, +-sqrt(s) with probability
    /// 1/(2s) each.
    SparseSign { s: u32 },
}

/// A distribution over d x p measurement matrices, with the sub-Gaussian
/// norm proxy kappa recorded for the bound formulas (reported, not
/// enforced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub rows: usize,
    pub cols: usize,
    pub kappa: f64,
}

impl Ensemble {
    pub fn gaussian(rows: usize, cols: usize) -> Self {
        Ensemble {
            kind: EnsembleKind::Gaussian,
            rows,
            cols,
            kappa: 1.0,
        }
    }

    pub fn rademacher(rows: usize, cols: usize) -> Self {
        Ensemble {
            kind: EnsembleKind::Rademacher,
            rows,
            cols,
            kappa: 1.0,
        }
    }

    pub fn sparse_sign(rows: usize, cols: usize, s: u32) -> Self {
        Ensemble {
            kind: EnsembleKind::SparseSign { s },
            rows,
            cols,
            kappa: (s as f64).sqrt(),
        }
    }

    /// The i-th measurement matrix of the stream keyed by `seed`. Matrices
    /// are reproducible prefix-wise: X_i depends only on (seed, i).
    pub fn sample_one(&self, seed: u64, index: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, index);
        match self.kind {
            EnsembleKind::Gaussian => {
                DMatrix::from_fn(self.rows, self.cols, |_, _| StandardNormal.sample(&mut rng))
            }
            EnsembleKind::Rademacher => DMatrix::from_fn(self.rows, self.cols, |_, _| {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }),
            EnsembleKind::SparseSign { s } => {
                let s = s as f64;
                DMatrix::from_fn(self.rows, self.cols, |_, _| {
                    let u: f64 = rng.gen();
                    if u < 1.0 / (2.0 * s) {
                        s.sqrt()
                    } else if u < 1.0 / s {
                        -s.sqrt()
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    /// n independent draws.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<DMatrix<f64>>> {
        if n == 0 {
            return Err(GdsError::InvalidArgument(
                "measurement count must be positive".into(),
            ));
        }
        Ok((0..n).map(|i| self.sample_one(seed, i as u64)).collect())
    }
}

/// Additive observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    /// omega_i ~ N(0, tau^2).
    Gaussian {
        tau: f64,
    },
    /// omega_i = +-tau equiprobable.
    Rademacher {
        tau: f64,
    },
}

impl Noise {
    pub fn tau(&self) -> f64 {
        match self {
            Noise::None => 0.0,
            Noise::Gaussian { tau } | Noise::Rademacher { tau } => *tau,
        }
    }
}

/// y_i = <<theta, X_i>> + omega_i.
pub fn observe(
    x: &[DMatrix<f64>],
    theta: &DMatrix<f64>,
    noise: Noise,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut y = forward(x, theta)?;
    let mut rng = stream_rng(seed, 0);
    match noise {
        Noise::None => {}
        Noise::Gaussian { tau } => {
            for yi in y.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *yi += tau * g;
            }
        }
        Noise::Rademacher { tau } => {
            for yi in y.iter_mut() {
                *yi += if rng.gen::<bool>() { tau } else { -tau };
            }
        }
    }
    Ok(y)
}

/// forward_i = <<X_i, theta>>.
pub fn forward(x: &[DMatrix<f64>], theta: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_shapes(x, theta)?;
    Ok(DVector::from_iterator(
        x.len(),
        x.iter().map(|xi| xi.dot(theta)),
    ))
}

/// adjoint(u) = sum_i u_i X_i.
pub fn adjoint(x: &[DMatrix<f64>], u: &DVector<f64>) -> Result<DMatrix<f64>> {
    if x.is_empty() {
        return Err(GdsError::InvalidArgument("empty measurement list".into()));
    }
    if u.len() != x.len() {
        return Err(GdsError::DimensionMismatch {
            expected: x.len(),
            got: u.len(),
        });
    }
    let (d, p) = (x[0].nrows(), x[0].ncols());
    let mut out = DMatrix::zeros(d, p);
    for (xi, ui) in x.iter().zip(u.iter()) {
        out += xi * *ui;
    }
    Ok(out)
}

fn check_shapes(x: &[DMatrix<f64>], theta: &DMatrix<f64>) -> Result<()> {
    if x.is_empty() {
        return Err(GdsError::InvalidArgument("empty measurement list".into()));
    }
    let (d, p) = (x[0].nrows(), x[0].ncols());
    if theta.nrows() != d || theta.ncols() != p {
        return Err(GdsError::ShapeMismatch {
            expected_rows: d,
            expected_cols: p,
            rows: theta.nrows(),
            cols: theta.ncols(),
        });
    }
    Ok(())
}

/// Power-iteration estimate of the spectral norm of the composite map
/// theta -> adjoint(forward(theta)). Relative accuracy 1e-3 or 200
/// iterations, whichever first.
pub fn operator_norm_estimate(x: &[DMatrix<f64>]) -> Result<f64> {
    Ok(operator_norm_history(x, 1e-3, 200)?
        .last()
        .copied()
        .unwrap_or(0.0))
}

/// Rayleigh-quotient history of the power iteration (nondecreasing for the
/// PSD composite map).
pub fn operator_norm_history(
    x: &[DMatrix<f64>],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(GdsError::InvalidArgument("empty measurement list".into()));
    }
    let (d, p) = (x[0].nrows(), x[0].ncols());
    let mut rng = stream_rng(0xabcd, 0);
    let mut v = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let mut history = Vec::new();
    let mut prev = 0.0_f64;
    for _ in 0..max_iter {
        let fwd = forward(x, &v)?;
        let av = adjoint(x, &fwd)?;
        let est = v.dot(&av);
        history.push(est);
        let n = av.norm();
        if n == 0.0 {
            break;
        }
        v = av / n;
        if (est - prev).abs() <= rel_tol * est.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = est;
    }
    Ok(history)
}

/// Serialized description of a measurement set; the measurement matrices
/// are regenerated from the seed rather than stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementMeta {
    pub ensemble: Ensemble,
    pub n: usize,
    pub noise_tau: f64,
    pub seed: u64,
}

/// n measurement matrices with observations. The matrices are held in a
/// stacked n x (d*p) operator (row i = column-major vec of X_i) so the
/// forward and adjoint maps are single matrix-vector products; individual
/// matrices are materialized on demand.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub ensemble: Ensemble,
    pub n: usize,
    pub seed: u64,
    pub noise_tau: f64,
    pub y: DVector<f64>,
    op: DMatrix<f64>,
}

impl MeasurementSet {
    /// Sample n matrices and observe theta_star under the given noise.
    /// The noise stream is derived from `seed` so the whole set is
    /// reproducible from (ensemble, n, seed).
    pub fn generate(
        ensemble: &Ensemble,
        n: usize,
        theta_star: &DMatrix<f64>,
        noise: Noise,
        seed: u64,
    ) -> Result<Self> {
        let x = ensemble.sample(n, seed)?;
        let y = observe(&x, theta_star, noise, split_seed(seed, NOISE_SEED_LABEL))?;
        Self::from_parts(ensemble.clone(), &x, y, noise.tau(), seed)
    }

    /// Wrap explicit matrices and observations.
    pub fn from_parts(
        ensemble: Ensemble,
        x: &[DMatrix<f64>],
        y: DVector<f64>,
        noise_tau: f64,
        seed: u64,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(GdsError::InvalidArgument("empty measurement list".into()));
        }
        if y.len() != x.len() {
            return Err(GdsError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let (d, p) = (x[0].nrows(), x[0].ncols());
        if d != ensemble.rows || p != ensemble.cols {
            return Err(GdsError::ShapeMismatch {
                expected_rows: ensemble.rows,
                expected_cols: ensemble.cols,
                rows: d,
                cols: p,
            });
        }
        let n = x.len();
        let mut op = DMatrix::zeros(n, d * p);
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in xi.as_slice().iter().enumerate() {
                op[(i, j)] = *v;
            }
        }
        Ok(MeasurementSet {
            ensemble,
            n,
            seed,
            noise_tau,
            y,
            op,
        })
    }

    pub fn rows(&self) -> usize {
        self.ensemble.rows
    }

    pub fn cols(&self) -> usize {
        self.ensemble.cols
    }

    /// The stacked n x (d*p) sensing operator.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.op
    }

    /// Materialize X_i.
    pub fn x_matrix(&self, i: usize) -> DMatrix<f64> {
        let row = self.op.row(i);
        DMatrix::from_column_slice(self.rows(), self.cols(), row.transpose().as_slice())
    }

    pub fn forward(&self, theta: &DMatrix<f64>) -> Result<DVector<f64>> {
        if theta.nrows() != self.rows() || theta.ncols() != self.cols() {
            return Err(GdsError::ShapeMismatch {
                expected_rows: self.rows(),
                expected_cols: self.cols(),
                rows: theta.nrows(),
                cols: theta.ncols(),
            });
        }
        let v = DVector::from_column_slice(theta.as_slice());
        Ok(&self.op * v)
    }

    pub fn adjoint(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        if u.len() != self.n {
            return Err(GdsError::DimensionMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        let v = self.op.transpose() * u;
        Ok(DMatrix::from_column_slice(
            self.rows(),
            self.cols(),
            v.as_slice(),
        ))
    }

    /// adjoint(forward(theta) - y), the correlated residual of the
    /// estimator's constraint.
    pub fn residual_map(&self, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let r = self.forward(theta)? - &self.y;
        self.adjoint(&r)
    }

    /// Power-iteration estimate of the composite-map spectral norm, using
    /// the stacked operator.
    pub fn operator_norm_estimate(&self) -> f64 {
        let mut rng = stream_rng(0xabcd, 0);
        let dp = self.rows() * self.cols();
        let mut v = DVector::from_fn(dp, |_, _| StandardNormal.sample(&mut rng));
        v /= v.norm();
        let mut prev = 0.0_f64;
        let mut est = 0.0_f64;
        for _ in 0..200 {
            let av = self.op.transpose() * (&self.op * &v);
            est = v.dot(&av);
            let n = av.norm();
            if n == 0.0 {
                break;
            }
            v = av / n;
            if (est - prev).abs() <= 1e-3 * est.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            prev = est;
        }
        est
    }

    /// Write meta.json + y.csv into `dir`; matrices are regenerated from
    /// the seed on load.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = MeasurementMeta {
            ensemble: self.ensemble.clone(),
            n: self.n,
            noise_tau: self.noise_tau,
            seed: self.seed,
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        let mut lines = String::new();
        for v in self.y.iter() {
            lines.push_str(&format!("{v}\n"));
        }
        fs::write(dir.join("y.csv"), lines)?;
        Ok(())
    }

    /// Inverse of `save`.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: MeasurementMeta =
            serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let y_text = fs::read_to_string(dir.join("y.csv"))?;
        let y: Vec<f64> = y_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| GdsError::InvalidArgument(format!("bad y value: {e}")))
            })
            .collect::<Result<_>>()?;
        if y.len() != meta.n {
            return Err(GdsError::DimensionMismatch {
                expected: meta.n,
                got: y.len(),
            });
        }
        let x = meta.ensemble.sample(meta.n, meta.seed)?;
        Self::from_parts(
            meta.ensemble,
            &x,
            DVector::from_vec(y),
            meta.noise_tau,
            meta.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_entries_are_centered() {
        let ens = Ensemble::gaussian(10, 10);
        let x = ens.sample(1000, 1).unwrap();
        let mean: f64 = x.iter().map(|m| m.sum()).sum::<f64>() / (1000.0 * 100.0);
        assert!(mean.abs() < 3e-2, "mean {mean}");
    }

    #[test]
    fn rademacher_isotropy_monte_carlo() {
        let ens = Ensemble::rademacher(5, 7);
        let mut rng = stream_rng(2, 0);
        let delta = DMatrix::from_fn(5, 7, |_, _| {
            use rand_distr::Distribution;
            let g: f64 = rand_distr::StandardNormal.sample(&mut rng);
            g
        })
        .normalize();
        let m = 20_000;
        let x = ens.sample(m, 3).unwrap();
        let second: f64 = x.iter().map(|xi| xi.dot(&delta).powi(2)).sum::<f64>() / m as f64;
        assert!((second - 1.0).abs() < 0.05, "second moment {second}");
    }

    #[test]
    fn sparse_sign_isotropy_monte_carlo() {
        let ens = Ensemble::sparse_sign(4, 6, 4);
        let mut delta = DMatrix::zeros(4, 6);
        delta[(1, 2)] = 0.8;
        delta[(3, 0)] = 0.6;
        let m = 40_000;
        let x = ens.sample(m, 5).unwrap();
        let second: f64 = x.iter().map(|xi| xi.dot(&delta).powi(2)).sum::<f64>() / m as f64;
        assert!((second - 1.0).abs() < 0.05, "second moment {second}");
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let ens = Ensemble::gaussian(3, 4);
        let a = ens.sample(5, 9).unwrap();
        let b = ens.sample(5, 9).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x, y);
        }
        // Extending n keeps the prefix.
        let c = ens.sample(8, 9).unwrap();
        for (x, y) in a.iter().zip(c.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn observe_examples() {
        let ens = Ensemble::gaussian(3, 3);
        let x = ens.sample(4, 7).unwrap();
        let zero = DMatrix::zeros(3, 3);
        let y = observe(&x, &zero, Noise::None, 0).unwrap();
        assert_eq!(y, DVector::zeros(4));

        // Indicator measurement reads off one entry.
        let mut e11 = DMatrix::zeros(3, 3);
        e11[(0, 0)] = 1.0;
        let theta = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 + 0.5);
        let y = observe(&[e11], &theta, Noise::None, 0).unwrap();
        assert_eq!(y[0], theta[(0, 0)]);
    }

    #[test]
    fn gaussian_noise_variance() {
        let ens = Ensemble::gaussian(2, 2);
        let x = ens.sample(10_000, 11).unwrap();
        let theta = DMatrix::from_element(2, 2, 0.3);
        let clean = forward(&x, &theta).unwrap();
        let noisy = observe(&x, &theta, Noise::Gaussian { tau: 0.1 }, 13).unwrap();
        let resid = noisy - clean;
        let var = resid.norm_squared() / resid.len() as f64;
        assert!((var - 0.01).abs() < 0.002, "variance {var}");
    }

    #[test]
    fn adjointness_identity() {
        let ens = Ensemble::gaussian(4, 5);
        let x = ens.sample(7, 17).unwrap();
        let mut rng = stream_rng(18, 0);
        for _ in 0..20 {
            let theta = DMatrix::from_fn(4, 5, |_, _| {
                let g: f64 = rand_distr::StandardNormal.sample(&mut rng);
                g
            });
            let u = DVector::from_fn(7, |_, _| {
                let g: f64 = rand_distr::StandardNormal.sample(&mut rng);
                g
            });
            let lhs = forward(&x, &theta).unwrap().dot(&u);
            let rhs = theta.dot(&adjoint(&x, &u).unwrap());
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn adjoint_of_unit_vector_returns_the_matrix() {
        let ens = Ensemble::gaussian(3, 3);
        let x = ens.sample(1, 19).unwrap();
        let u = DVector::from_vec(vec![1.0]);
        assert_eq!(adjoint(&x, &u).unwrap(), x[0]);
    }

    #[test]
    fn gram_map_is_symmetric_psd() {
        let ens = Ensemble::gaussian(3, 4);
        let x = ens.sample(5, 23).unwrap();
        // n x n Gram of the forward map.
        let mut gram = DMatrix::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                gram[(i, j)] = x[i].dot(&x[j]);
            }
        }
        assert!((gram.clone() - gram.transpose()).norm() < 1e-12);
        let eig = gram.symmetric_eigen();
        for ev in eig.eigenvalues.iter() {
            assert!(*ev > -1e-10);
        }
    }

    #[test]
    fn operator_norm_rank_one() {
        let ens = Ensemble::gaussian(3, 4);
        let x = ens.sample(1, 29).unwrap();
        let c2 = x[0].norm_squared();
        let est = operator_norm_estimate(&x).unwrap();
        assert_relative_eq!(est, c2, max_relative = 1e-6);
    }

    #[test]
    fn operator_norm_matches_dense_eigensolver() {
        let ens = Ensemble::gaussian(4, 4);
        let n = 12;
        let x = ens.sample(n, 31).unwrap();
        let dp = 16;
        let mut composite = DMatrix::zeros(dp, dp);
        for xi in &x {
            let v = DVector::from_column_slice(xi.as_slice());
            composite += &v * v.transpose();
        }
        let top = composite
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0_f64, |m, e| m.max(*e));
        let est = operator_norm_estimate(&x).unwrap();
        assert!((est - top).abs() / top < 5e-3, "est {est} vs {top}");
    }

    #[test]
    fn operator_norm_history_is_nondecreasing() {
        let ens = Ensemble::gaussian(4, 5);
        let x = ens.sample(10, 37).unwrap();
        let hist = operator_norm_history(&x, 0.0, 60).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
    }

    #[test]
    fn stacked_operator_agrees_with_list_maps() {
        let ens = Ensemble::rademacher(3, 5);
        let theta = DMatrix::from_fn(3, 5, |i, j| (i + 2 * j) as f64 - 3.0);
        let set = MeasurementSet::generate(&ens, 9, &theta, Noise::None, 41).unwrap();
        let x = ens.sample(9, 41).unwrap();
        let f1 = set.forward(&theta).unwrap();
        let f2 = forward(&x, &theta).unwrap();
        assert_relative_eq!((f1 - f2).norm(), 0.0, epsilon = 1e-12);
        let u = DVector::from_fn(9, |i, _| i as f64 - 4.0);
        let a1 = set.adjoint(&u).unwrap();
        let a2 = adjoint(&x, &u).unwrap();
        assert_relative_eq!((a1 - a2).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(set.x_matrix(3), x[3]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("gds_measure_roundtrip");
        let _ = std::fs::remove_dir_all(&dir);
        let ens = Ensemble::gaussian(3, 4);
        let theta = DMatrix::from_element(3, 4, 0.25);
        let set =
            MeasurementSet::generate(&ens, 6, &theta, Noise::Gaussian { tau: 0.2 }, 43).unwrap();
        set.save(&dir).unwrap();
        let loaded = MeasurementSet::load(&dir).unwrap();
        assert_eq!(loaded.n, set.n);
        assert_relative_eq!((&loaded.y - &set.y).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            (loaded.operator() - set.operator()).norm(),
            0.0,
            epsilon = 1e-12
        );
        let _ = std::fs::remove_dir_all(&dir);
    }
}
