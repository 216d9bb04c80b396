//! Sweep execution: ground truths, per-trial recovery, geometry reports,
//! bound verification, and calibration.

use std::fs;
use std::path::Path;
use std::time::Instant;

use gds_core::geometry::{self, error_bound_pred, Calibration, GeometryConfig, GeometryReport};
use gds_core::measure::{Ensemble, MeasurementSet};
use gds_core::solver::{solve, GdsProblem};
use gds_core::spectral::SpectralNorm;
use gds_core::util::{split_seed, stream_rng};
use gds_core::{GdsError, Result};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, LambdaRule, Spectrum, SpectrumScale};

/// Outcome of one recovery trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Measured dual norm of the correlated noise (the feasibility floor
    /// for lambda).
    pub lambda_floor: f64,
    pub error: f64,
    pub rel_error: f64,
    pub obj_hat: f64,
    pub obj_star: f64,
    pub feas_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub reports: Vec<GeometryReport>,
}

/// Deterministic low-rank ground truth: orthonormal factors from QR of
/// Gaussian matrices, singular values from the configured spectrum.
pub fn make_ground_truth(config: &ExperimentConfig, seed: u64) -> Result<DMatrix<f64>> {
    let d = config.shape.d;
    let p = config.shape.p;
    let r = config.rank;
    let mut sigma: Vec<f64> = match &config.spectrum {
        Spectrum::Flat => vec![1.0; r],
        Spectrum::LinearDecay => (0..r).map(|i| (r - i) as f64).collect(),
        Spectrum::Custom { values } => values.clone(),
    };
    if sigma.len() != r {
        return Err(GdsError::InvalidArgument(format!(
            "spectrum length {} != rank {r}",
            sigma.len()
        )));
    }
    if config.spectrum_scale == SpectrumScale::UnitL2 {
        let norm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        for s in sigma.iter_mut() {
            *s /= norm;
        }
    }
    let mut rng = stream_rng(seed, 0);
    let gu: DMatrix<f64> = DMatrix::from_fn(d, r, |_, _| StandardNormal.sample(&mut rng));
    let gv: DMatrix<f64> = DMatrix::from_fn(p, r, |_, _| StandardNormal.sample(&mut rng));
    let u = gu.qr().q();
    let v = gv.qr().q();
    Ok(&u * DMatrix::from_diagonal(&DVector::from_vec(sigma)) * v.transpose())
}

fn lambda_for(
    rule: &LambdaRule,
    norm: &SpectralNorm,
    ensemble: &Ensemble,
    n: usize,
    tau: f64,
    geo: &GeometryConfig,
    seed: u64,
) -> Result<f64> {
    match rule {
        LambdaRule::Fixed { value } => Ok(*value),
        LambdaRule::Theory => {
            let rules = geometry::lambda_rules(
                norm,
                ensemble,
                n,
                tau,
                geo.kappa,
                geo.c0,
                geo.lambda_samples,
                geo.lambda_quantile,
                seed,
            )?;
            Ok(rules.theory)
        }
        LambdaRule::Empirical { quantile, samples } => {
            let rules = geometry::lambda_rules(
                norm, ensemble, n, tau, geo.kappa, geo.c0, *samples, *quantile, seed,
            )?;
            Ok(rules.empirical)
        }
    }
}

/// Run the full grid: one ground truth, one geometry report per n, fresh
/// measurements and noise per trial. Records come back sorted by (n, trial).
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let norm = config.spectral_norm()?;
    let ensemble = config.ensemble();
    let theta_star = make_ground_truth(config, split_seed(config.seed, 1))?;
    let obj_star = norm.eval(&theta_star)?;
    let theta_norm = theta_star.norm();
    let noise = config.noise();

    let mut records: Vec<TrialRecord> = Vec::new();
    let mut reports = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let mut geo = config.geometry.clone();
        geo.seed = split_seed(config.seed, 100 + ni as u64);
        let report =
            GeometryReport::compute(&norm, &theta_star, &ensemble, n, config.noise_tau, &geo)?;
        let lambda = lambda_for(
            &config.lambda_rule,
            &norm,
            &ensemble,
            n,
            config.noise_tau,
            &geo,
            split_seed(config.seed, 200 + ni as u64),
        )?;
        reports.push(report);

        let mut batch: Vec<TrialRecord> = (0..config.trials)
            .into_par_iter()
            .map(|trial| -> Result<TrialRecord> {
                let trial_seed =
                    split_seed(config.seed, 1_000_000 + (ni as u64) * 10_000 + trial as u64);
                let started = Instant::now();
                let data = MeasurementSet::generate(&ensemble, n, &theta_star, noise, trial_seed)?;
                let floor_map = data.residual_map(&theta_star)?;
                let lambda_floor = norm.dual_eval(&floor_map)?;
                let problem = GdsProblem::new(norm.clone(), data, lambda)?;
                let sol = solve(&problem, &config.solver)?;
                let error = (&sol.theta_hat - &theta_star).norm();
                Ok(TrialRecord {
                    n,
                    trial,
                    seed: trial_seed,
                    lambda,
                    lambda_floor,
                    error,
                    rel_error: error / theta_norm,
                    obj_hat: sol.objective,
                    obj_star,
                    feas_residual: sol.constraint_residual,
                    iterations: sol.iterations,
                    converged: sol.converged,
                    wall_ms: started.elapsed().as_millis() as u64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        batch.sort_by_key(|r| (r.n, r.trial));
        records.extend(batch);
    }

    let diverged = records.iter().filter(|r| !r.converged).count();
    let frac = diverged as f64 / records.len() as f64;
    if frac > config.max_diverged_frac {
        return Err(GdsError::Degenerate(format!(
            "{diverged}/{} solves did not converge (fraction {frac:.3} > allowed {})",
            records.len(),
            config.max_diverged_frac
        )));
    }
    Ok(SweepOutput { records, reports })
}

/// Write records.csv, geometry.json and the plotting script into `dir`.
pub fn write_sweep_output(dir: &Path, out: &SweepOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("records.csv"))
        .map_err(|e| GdsError::InvalidArgument(format!("csv open: {e}")))?;
    for rec in &out.records {
        w.serialize(rec)
            .map_err(|e| GdsError::InvalidArgument(format!("csv write: {e}")))?;
    }
    w.flush()?;
    fs::write(
        dir.join("geometry.json"),
        serde_json::to_string_pretty(&out.reports)?,
    )?;
    fs::write(dir.join("plot.py"), crate::io::PLOT_SCRIPT)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| GdsError::InvalidArgument(format!("csv open: {e}")))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| GdsError::InvalidArgument(format!("csv row: {e}"))))
        .collect()
}

pub fn read_reports(path: &Path) -> Result<Vec<GeometryReport>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Verdict of the bound checks on one sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSummary {
    pub total_trials: usize,
    /// Trials where lambda >= measured noise dual norm (the feasibility
    /// precondition); only these enter the bound statistics.
    pub condition_ok: usize,
    /// Among condition_ok, trials with a positive alpha prediction and a
    /// finite bound.
    pub checkable: usize,
    pub satisfied: usize,
    pub fraction_satisfied: f64,
    /// True when no n in the grid had a positive alpha prediction.
    pub vacuous_everywhere: bool,
    pub width_cone_ok: bool,
    pub width_ball_ok: bool,
    pub per_n_bounds: Vec<PerNBound>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerNBound {
    pub n: usize,
    pub alpha_pred: f64,
    pub psi_bound: f64,
    pub median_error: f64,
    pub median_bound: f64,
}

/// Compare observed errors against 2 psi lambda / alpha with the report's
/// predictions, excluding trials that violate the lambda feasibility
/// precondition.
pub fn verify_bounds(records: &[TrialRecord], reports: &[GeometryReport]) -> Result<BoundSummary> {
    if records.is_empty() {
        return Err(GdsError::InvalidArgument("no records to verify".into()));
    }
    let mut condition_ok = 0;
    let mut checkable = 0;
    let mut satisfied = 0;
    let mut any_alpha_positive = false;
    let mut per_n: Vec<PerNBound> = Vec::new();
    for report in reports {
        if report.alpha_pred > 0.0 {
            any_alpha_positive = true;
        }
        let mut errs: Vec<f64> = Vec::new();
        let mut bounds: Vec<f64> = Vec::new();
        for rec in records.iter().filter(|r| r.n == report.n) {
            let bound = error_bound_pred(report.psi_bound, rec.lambda, report.alpha_pred);
            errs.push(rec.error);
            bounds.push(bound);
            if rec.lambda >= rec.lambda_floor {
                condition_ok += 1;
                if report.alpha_pred > 0.0 && bound.is_finite() {
                    checkable += 1;
                    if rec.error <= bound {
                        satisfied += 1;
                    }
                }
            }
        }
        let med = |v: &mut Vec<f64>| -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if v.is_empty() {
                f64::NAN
            } else {
                v[v.len() / 2]
            }
        };
        per_n.push(PerNBound {
            n: report.n,
            alpha_pred: report.alpha_pred,
            psi_bound: report.psi_bound,
            median_error: med(&mut errs),
            median_bound: med(&mut bounds),
        });
    }
    let width_cone_ok = reports
        .iter()
        .all(|r| r.width_cone_mc.value <= r.width_cone_bound + 3.0 * r.width_cone_mc.stderr);
    let width_ball_ok = reports
        .iter()
        .all(|r| r.width_ball_mc.value <= r.width_ball_bound + 3.0 * r.width_ball_mc.stderr);
    Ok(BoundSummary {
        total_trials: records.len(),
        condition_ok,
        checkable,
        satisfied,
        fraction_satisfied: if checkable > 0 {
            satisfied as f64 / checkable as f64
        } else {
            0.0
        },
        vacuous_everywhere: !any_alpha_positive,
        width_cone_ok,
        width_ball_ok,
        per_n_bounds: per_n,
    })
}

/// Calibration grid: small shapes, trace and k-support norms, Gaussian and
/// Rademacher designs. Kept away from the larger shapes the validation
/// experiments use.
pub fn run_calibration(samples: usize, seed: u64) -> Result<Calibration> {
    let shapes = [(8usize, 8usize), (12usize, 14usize)];
    let n_values = [100usize, 300];
    let taus = [0.05, 0.2];
    let mut merged: Option<Calibration> = None;
    for (d, p) in shapes {
        let norms = vec![
            SpectralNorm::trace_norm(d, p)?,
            SpectralNorm::spectral_k_support(d, p, 2)?,
        ];
        let ensembles = vec![Ensemble::gaussian(d, p), Ensemble::rademacher(d, p)];
        let cal = geometry::calibrate_c0(
            &norms,
            &ensembles,
            &n_values,
            &taus,
            samples,
            0.99,
            split_seed(seed, (d * 31 + p) as u64),
        )?;
        merged = Some(match merged {
            None => cal,
            Some(mut acc) => {
                acc.c0 = acc.c0.max(cal.c0);
                acc.cells.extend(cal.cells);
                acc
            }
        });
    }
    let mut cal = merged.expect("nonempty grid");
    cal.samples = samples;
    cal.seed = seed;
    Ok(cal)
}

/// Median of a slice (sorts a copy).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx
        .iter()
        .zip(ly.iter())
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}
