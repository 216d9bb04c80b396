//! Geometric measures that control recovery error: the restricted
//! compatibility constant, the Gaussian width of the error cone (closed-form
//! bound and statistical-dimension Monte Carlo), the width of the norm ball,
//! the restricted-convexity prediction, and the regularization rules built
//! from them.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{GdsError, Result};
use crate::gauge::{GaugeConstants, Rho};
use crate::measure::Ensemble;
use crate::spectral::{singular_values, SpectralNorm, SubspaceDecomposition};
use crate::util::{golden_section_min, mean_stderr, quantile, split_seed, stream_rng};

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Upper bound on the restricted compatibility constant for a rank-r
/// reference point: 2 phi(r) + max(eta2, eta1 (1 + rho) sqrt(r)).
/// An infinite rho with eta1 > 0 makes the bound vacuous (+inf).
pub fn psi_bound(c: &GaugeConstants, r: usize, rho: Rho) -> f64 {
    let rf = r as f64;
    let second = match rho {
        Rho::Finite(rho) => c.eta2.max(c.eta1 * (1.0 + rho) * rf.sqrt()),
        Rho::Infinite => {
            if c.eta1 > 0.0 {
                return f64::INFINITY;
            }
            c.eta2
        }
    };
    2.0 * c.phi(r) + second
}

/// Upper bound on the Gaussian width of the error cone intersected with the
/// sphere: min( sqrt(d p), sqrt((2 rho^2 + 1)(d + p - r) r) ), falling back
/// to sqrt(d p) when rho is infinite.
pub fn width_cone_bound(d: usize, p: usize, r: usize, rho: Rho) -> f64 {
    let whole = ((d * p) as f64).sqrt();
    match rho {
        Rho::Finite(rho) => {
            let structured = ((2.0 * rho * rho + 1.0) * ((d + p - r) * r) as f64).sqrt();
            whole.min(structured)
        }
        Rho::Infinite => whole,
    }
}

/// Upper bound on the Gaussian width of the unit norm ball:
/// (sqrt(d) + sqrt(p)) / nu.
pub fn width_ball_bound(nu: f64, d: usize, p: usize) -> Result<f64> {
    if nu <= 0.0 {
        return Err(GdsError::InvalidArgument(format!(
            "nu must be positive, got {nu}"
        )));
    }
    Ok(((d as f64).sqrt() + (p as f64).sqrt()) / nu)
}

/// Statistical-dimension style Monte-Carlo upper estimate of the cone width:
/// draw a Gaussian matrix, split it across the decomposition's subspaces,
/// minimize the squared distance to the scaled subdifferential construction
/// over the scale t, average, and take the square root. The one-dimensional
/// problem is convex, so a golden-section search over a safe bracket is
/// exact to tolerance.
pub fn width_cone_mc(
    decomp: &SubspaceDecomposition,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 100 {
        return Err(GdsError::InvalidArgument(format!(
            "width_cone_mc needs at least 100 samples, got {samples}"
        )));
    }
    let d = decomp.rows();
    let p = decomp.cols();
    let r = decomp.rank();
    let theta = decomp.theta_star();
    let theta_min = theta[d - 1];
    let gamma = {
        let head = DVector::from_iterator(r, theta.iter().take(r).copied());
        decomp.u() * DMatrix::from_diagonal(&head) * decomp.v().transpose()
    };
    let gamma_sq = gamma.norm_squared();
    let z = decomp.tail_weights();

    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let g = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut rng));
            let g1 = decomp.project_m1(&g);
            let g2 = decomp.project_m2(&g);
            let gperp = &g - &g1 - &g2;
            let a = g1.norm_squared();
            let cross = g1.dot(&gamma);
            let s2 = if r < d {
                singular_values(&g2)
            } else {
                DVector::zeros(0)
            };
            let tail = d - r;
            let dist_sq = |t: f64| -> f64 {
                (0..tail)
                    .map(|j| {
                        let gap = s2[j] - t * z[j];
                        if gap > 0.0 {
                            gap * gap
                        } else {
                            0.0
                        }
                    })
                    .sum()
            };
            let objective = |t: f64| a - 2.0 * t * cross + t * t * gamma_sq + dist_sq(t);
            let t_zero = if theta_min > 0.0 && tail > 0 {
                s2[0] / theta_min
            } else {
                0.0
            };
            let t_quad = (cross.max(0.0)) / gamma_sq;
            let t_hi = (2.0 * t_zero).max(2.0 * t_quad).max(1e-6);
            let (_, inner) = golden_section_min(objective, 0.0, t_hi, 1e-8);
            inner.min(objective(0.0)) + gperp.norm_squared()
        })
        .collect();

    let (mean, se) = mean_stderr(&values);
    if mean <= 0.0 {
        return Ok(McEstimate {
            value: 0.0,
            stderr: 0.0,
        });
    }
    Ok(McEstimate {
        value: mean.sqrt(),
        stderr: se / (2.0 * mean.sqrt()),
    })
}

/// Monte-Carlo estimate of the unit-ball Gaussian width: the supremum of the
/// Gaussian inner product over the ball is exactly the dual norm of the
/// Gaussian draw.
pub fn width_ball_mc(norm: &SpectralNorm, samples: usize, seed: u64) -> McEstimate {
    let d = norm.rows();
    let p = norm.cols();
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let g = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut rng));
            norm.dual_eval(&g).expect("shape fixed by construction")
        })
        .collect();
    let (mean, se) = mean_stderr(&values);
    McEstimate {
        value: mean,
        stderr: se,
    }
}

/// Predicted restricted-convexity constant for the unnormalized quadratic
/// form: n * max(0, 1 - xi kappa^2 w / sqrt(n)). Zero means the prediction
/// is vacuous at this n.
pub fn alpha_pred(kappa: f64, n: usize, width_cone: f64, xi: f64) -> f64 {
    let nf = n as f64;
    nf * (1.0 - xi * kappa * kappa * width_cone / nf.sqrt()).max(0.0)
}

/// The two regularization rules.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LambdaRules {
    /// c0 * kappa * tau * sqrt(n) * (ball-width bound).
    pub theory: f64,
    /// Empirical quantile of the dual norm of the correlated pure-noise map
    /// over fresh draws.
    pub empirical: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn lambda_rules(
    norm: &SpectralNorm,
    ensemble: &Ensemble,
    n: usize,
    tau: f64,
    kappa: f64,
    c0: f64,
    mc_samples: usize,
    lambda_quantile: f64,
    seed: u64,
) -> Result<LambdaRules> {
    if tau < 0.0 {
        return Err(GdsError::InvalidArgument(format!(
            "tau must be nonnegative, got {tau}"
        )));
    }
    let nu = norm.gauge().constants().nu;
    let ball = width_ball_bound(nu, norm.rows(), norm.cols())?;
    let theory = c0 * kappa * tau * (n as f64).sqrt() * ball;
    if tau == 0.0 {
        return Ok(LambdaRules {
            theory: 0.0,
            empirical: 0.0,
        });
    }
    let draws: Vec<f64> = (0..mc_samples)
        .into_par_iter()
        .map(|j| {
            let draw_seed = split_seed(seed, j as u64);
            let mut noise_rng = stream_rng(split_seed(draw_seed, 1), 0);
            let mut acc = DMatrix::zeros(norm.rows(), norm.cols());
            for i in 0..n {
                let x = ensemble.sample_one(draw_seed, i as u64);
                let w: f64 = StandardNormal.sample(&mut noise_rng);
                acc += x * (tau * w);
            }
            norm.dual_eval(&acc).expect("shape fixed by construction")
        })
        .collect();
    Ok(LambdaRules {
        theory,
        empirical: quantile(&draws, lambda_quantile),
    })
}

/// Assembled error bound 2 psi lambda / alpha; +inf when the prediction is
/// vacuous (alpha <= 0 or psi infinite).
pub fn error_bound_pred(psi: f64, lambda: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 || !psi.is_finite() {
        return f64::INFINITY;
    }
    2.0 * psi * lambda / alpha
}

/// Smallest and mean value of the normalized measurement quadratic form
/// sum_i <<X_i, D>>^2 / ||D||_F^2 over random directions sampled from the
/// tractable cone superset { D : ||P2 D||_z <= ||P1 D||_w } (the perp
/// component is unconstrained). A sampled minimum only upper-bounds the true
/// restricted convexity over the cone, so this is a diagnostic to report
/// next to `alpha_pred`, never a certificate.
pub fn rsc_superset_sample(
    data: &crate::measure::MeasurementSet,
    decomp: &SubspaceDecomposition,
    samples: usize,
    seed: u64,
) -> Result<RscDiagnostic> {
    if samples == 0 {
        return Err(GdsError::InvalidArgument(
            "rsc_superset_sample needs at least one sample".into(),
        ));
    }
    let d = decomp.rows();
    let p = decomp.cols();
    if data.rows() != d || data.cols() != p {
        return Err(GdsError::ShapeMismatch {
            expected_rows: d,
            expected_cols: p,
            rows: data.rows(),
            cols: data.cols(),
        });
    }
    let w = decomp.head_weights().clone();
    let z = decomp.tail_weights().clone();
    let owl = |m: &DMatrix<f64>, weights: &DVector<f64>| -> f64 {
        singular_values(m)
            .iter()
            .zip(weights.iter())
            .map(|(s, wi)| s * wi)
            .sum()
    };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let g = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut rng));
            let g1 = decomp.project_m1(&g);
            let g2 = decomp.project_m2(&g);
            let gperp = &g - &g1 - &g2;
            // Shrink the doubly-orthogonal block until the membership
            // inequality holds.
            let head = owl(&g1, &w);
            let tail = owl(&g2, &z);
            let scale = if tail > head && tail > 0.0 {
                head / tail
            } else {
                1.0
            };
            let dir = &g1 + g2 * scale + gperp;
            let norm_sq = dir.norm_squared();
            if norm_sq == 0.0 {
                return f64::INFINITY;
            }
            let fwd = data.forward(&dir).expect("shape checked");
            fwd.norm_squared() / norm_sq
        })
        .collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(RscDiagnostic {
        sampled_min: min,
        sampled_mean: mean,
        samples,
    })
}

/// Sampled quadratic-form statistics over the cone superset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RscDiagnostic {
    pub sampled_min: f64,
    pub sampled_mean: f64,
    pub samples: usize,
}

/// Unspecified absolute constants of the probabilistic bounds, fixed once by
/// simulation on a calibration grid and checked in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub xi: f64,
    pub c0: f64,
    pub kappa: f64,
    pub quantile: f64,
    pub samples: usize,
    pub seed: u64,
    pub cells: Vec<CalibrationCell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub norm: String,
    pub ensemble: String,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub tau: f64,
    /// Calibration-quantile of the empirical noise dual norm.
    pub empirical_quantile: f64,
    /// kappa * tau * sqrt(n) * ball-width bound (the theory rule at c0 = 1).
    pub theory_unit: f64,
    /// empirical_quantile / theory_unit.
    pub ratio: f64,
}

static DEFAULT_CALIBRATION: OnceLock<Calibration> = OnceLock::new();

/// The checked-in calibration constants.
pub fn default_calibration() -> &'static Calibration {
    DEFAULT_CALIBRATION.get_or_init(|| {
        serde_json::from_str(include_str!("calibration.json"))
            .expect("embedded calibration.json parses")
    })
}

/// Smallest c0 making the theory rule dominate the empirical quantile on
/// every cell of the grid. Returns the full audit trail.
pub fn calibrate_c0(
    norms: &[SpectralNorm],
    ensembles: &[Ensemble],
    n_values: &[usize],
    taus: &[f64],
    samples: usize,
    cal_quantile: f64,
    seed: u64,
) -> Result<Calibration> {
    let mut cells = Vec::new();
    let mut c0 = 0.0_f64;
    let kappa = 1.0;
    for norm in norms {
        for ens in ensembles {
            if ens.rows != norm.rows() || ens.cols != norm.cols() {
                return Err(GdsError::ShapeMismatch {
                    expected_rows: norm.rows(),
                    expected_cols: norm.cols(),
                    rows: ens.rows,
                    cols: ens.cols,
                });
            }
            for &n in n_values {
                for &tau in taus {
                    let cell_seed = split_seed(seed, cells.len() as u64 + 0x1000);
                    let rules = lambda_rules(
                        norm,
                        ens,
                        n,
                        tau,
                        kappa,
                        1.0,
                        samples,
                        cal_quantile,
                        cell_seed,
                    )?;
                    let theory_unit = rules.theory; // c0 = 1
                    let ratio = if theory_unit > 0.0 {
                        rules.empirical / theory_unit
                    } else {
                        0.0
                    };
                    c0 = c0.max(ratio);
                    cells.push(CalibrationCell {
                        norm: format!("{:?}", norm.gauge().kind()),
                        ensemble: format!("{:?}", ens.kind),
                        d: norm.rows(),
                        p: norm.cols(),
                        n,
                        tau,
                        empirical_quantile: rules.empirical,
                        theory_unit,
                        ratio,
                    });
                }
            }
        }
    }
    Ok(Calibration {
        xi: 1.0,
        c0,
        kappa,
        quantile: cal_quantile,
        samples,
        seed,
        cells,
    })
}

/// Knobs of the geometry computations. Defaults pull the calibrated
/// constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub xi: f64,
    pub c0: f64,
    pub kappa: f64,
    pub width_samples: usize,
    pub lambda_samples: usize,
    pub lambda_quantile: f64,
    pub seed: u64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let cal = default_calibration();
        GeometryConfig {
            xi: cal.xi,
            c0: cal.c0,
            kappa: cal.kappa,
            width_samples: 10_000,
            lambda_samples: 200,
            lambda_quantile: 0.95,
            seed: 0,
        }
    }
}

/// All geometric measures of one (norm, reference matrix, design) triple at
/// a given measurement count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryReport {
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub tau: f64,
    pub rank: usize,
    /// theta_max / theta_min of the polar subgradient; None when infinite.
    pub rho: Option<f64>,
    pub psi_bound: f64,
    pub width_cone_bound: f64,
    pub width_cone_mc: McEstimate,
    pub width_ball_bound: f64,
    pub width_ball_mc: McEstimate,
    pub alpha_pred: f64,
    pub lambda_theory: f64,
    pub lambda_empirical: f64,
    /// 2 psi lambda_empirical / alpha_pred.
    pub error_bound_pred: f64,
    pub config: GeometryConfig,
}

impl GeometryReport {
    pub fn compute(
        norm: &SpectralNorm,
        theta_star: &DMatrix<f64>,
        ensemble: &Ensemble,
        n: usize,
        tau: f64,
        config: &GeometryConfig,
    ) -> Result<GeometryReport> {
        let decomp = norm.decompose(theta_star)?;
        let rho = decomp.rho()?;
        let constants = norm.gauge().constants();
        let r = decomp.rank();
        let (d, p) = (norm.rows(), norm.cols());
        let psi = psi_bound(&constants, r, rho);
        let wc_bound = width_cone_bound(d, p, r, rho);
        let wc_mc = width_cone_mc(&decomp, config.width_samples, split_seed(config.seed, 1))?;
        let wb_bound = width_ball_bound(constants.nu, d, p)?;
        let wb_mc = width_ball_mc(norm, config.width_samples, split_seed(config.seed, 2));
        let rules = lambda_rules(
            norm,
            ensemble,
            n,
            tau,
            config.kappa,
            config.c0,
            config.lambda_samples,
            config.lambda_quantile,
            split_seed(config.seed, 3),
        )?;
        let alpha = alpha_pred(config.kappa, n, wc_bound, config.xi);
        Ok(GeometryReport {
            d,
            p,
            n,
            tau,
            rank: r,
            rho: rho.value(),
            psi_bound: psi,
            width_cone_bound: wc_bound,
            width_cone_mc: wc_mc,
            width_ball_bound: wb_bound,
            width_ball_mc: wb_mc,
            alpha_pred: alpha,
            lambda_theory: rules.theory,
            lambda_empirical: rules.empirical,
            error_bound_pred: error_bound_pred(psi, rules.empirical, alpha),
            config: config.clone(),
        })
    }
}
