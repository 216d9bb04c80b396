//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured quantities (visible with
//! `cargo test -p gds-cli --test acceptance -- --nocapture`).
//!
//! Criteria 10 and 11 share one noisy sweep per norm; it is computed once
//! and cached for the whole test binary.

use std::sync::OnceLock;
use std::time::Instant;

use gds_cli::config::{
    ExperimentConfig, LambdaRule, NormDescriptor, Shape, Spectrum, SpectrumScale,
};
use gds_cli::runner::{self, log_log_slope, median, run_sweep, SweepOutput};
use gds_core::gauge::{Gauge, Rho};
use gds_core::geometry::{self, GeometryConfig};
use gds_core::measure::{Ensemble, EnsembleKind, MeasurementSet, Noise};
use gds_core::solver::{solve, GdsProblem, SolverOptions};
use gds_core::spectral::SpectralNorm;
use gds_core::util::{split_seed, stream_rng};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn randn_vec(d: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

fn randn_mat(d: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(rng))
}

/// Rank-r matrix with orthonormal factors and the given unit-l2 spectrum.
fn low_rank_with_spectrum(d: usize, p: usize, sigma: &[f64], seed: u64) -> DMatrix<f64> {
    let r = sigma.len();
    let mut rng = stream_rng(seed, 0);
    let u = randn_mat(d, r, &mut rng).qr().q();
    let v = randn_mat(p, r, &mut rng).qr().q();
    &u * DMatrix::from_diagonal(&DVector::from_vec(sigma.to_vec())) * v.transpose()
}

fn pass(line: &str) {
    eprintln!("PASS: {line}");
}

// ---------------------------------------------------------------------
// Criterion 1: gauge axioms on 1000 random vectors per gauge, 1e-9.
// ---------------------------------------------------------------------
#[test]
fn acceptance_01_gauge_axioms() {
    let started = Instant::now();
    let d = 12;
    let tol = 1e-9;
    let gauges: Vec<(&str, Gauge)> = vec![
        ("l1", Gauge::l1(d).unwrap()),
        ("l2", Gauge::l2(d).unwrap()),
        (
            "owl",
            Gauge::owl(DVector::from_fn(d, |i, _| {
                ((d - i) * (d - i)) as f64 / 100.0
            }))
            .unwrap(),
        ),
        ("ksupport", Gauge::k_support(d, 4).unwrap()),
        ("kyfan", Gauge::ky_fan(d, 4).unwrap()),
    ];
    let mut rng = stream_rng(0xACC1, 0);
    for (name, g) in &gauges {
        for rep in 0..1000 {
            let v = randn_vec(d, &mut rng);
            let u = randn_vec(d, &mut rng);
            let f = g.eval(&v).unwrap();

            // Symmetry under permutations and sign flips.
            let mut idx: Vec<usize> = (0..d).collect();
            idx.shuffle(&mut rng);
            let sym = DVector::from_fn(d, |i, _| {
                let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                s * v[idx[i]]
            });
            let fs = g.eval(&sym).unwrap();
            assert!(
                (f - fs).abs() <= tol * f.max(1.0),
                "{name} symmetry rep {rep}"
            );

            // Triangle inequality.
            let lhs = g.eval(&(&u + &v)).unwrap();
            let rhs = g.eval(&u).unwrap() + f;
            assert!(lhs <= rhs * (1.0 + tol), "{name} triangle rep {rep}");

            // Duality gap.
            let inner = u.dot(&v);
            let dual = g.dual_eval(&u).unwrap();
            assert!(
                inner <= f * dual * (1.0 + tol) + tol,
                "{name} duality rep {rep}"
            );

            // Polar consistency on a sorted nonnegative input.
            let mut s: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..2.0)).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let sigma = DVector::from_vec(s);
            let theta = g.polar(&sigma).unwrap();
            let fsig = g.eval(&sigma).unwrap();
            assert!(
                (theta.dot(&sigma) - fsig).abs() <= tol * fsig.max(1.0),
                "{name} polar alignment rep {rep}"
            );
            assert!(
                g.dual_eval(&theta).unwrap() <= 1.0 + tol,
                "{name} polar feasibility rep {rep}"
            );

            // Prox optimality against 100 random candidates + Moreau.
            if g.supports_prox() {
                let t = rng.gen_range(0.05..1.5);
                let prox = g.prox(&v, t).unwrap();
                let objective =
                    |x: &DVector<f64>| 0.5 * (x - &v).norm_squared() + t * g.eval(x).unwrap();
                let base = objective(&prox);
                for _ in 0..100 {
                    let scale: f64 = rng.gen_range(0.0..1.0);
                    let cand = &prox + randn_vec(d, &mut rng) * scale;
                    assert!(
                        objective(&cand) >= base - tol * base.max(1.0),
                        "{name} prox optimality rep {rep}"
                    );
                }
                let moreau = &v - &prox;
                assert!(
                    g.dual_eval(&moreau).unwrap() <= t * (1.0 + tol),
                    "{name} moreau rep {rep}"
                );
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "criterion 1 runtime {secs:.1}s exceeds 30s");
    pass(&format!(
        "criterion 1 gauge axioms: 5 gauges x 1000 vectors in {secs:.1}s"
    ));
}

// ---------------------------------------------------------------------
// Criterion 2: k-support sandwich and boundary identities.
// ---------------------------------------------------------------------
#[test]
fn acceptance_02_k_support_sandwich() {
    let d = 12;
    let mut rng = stream_rng(0xACC2, 0);
    let l1 = Gauge::l1(d).unwrap();
    let l2 = Gauge::l2(d).unwrap();
    for &k in &[1usize, 2, 5, d] {
        let g = Gauge::k_support(d, k).unwrap();
        for _ in 0..1000 {
            let v = randn_vec(d, &mut rng);
            let f = g.eval(&v).unwrap();
            let lower = v.norm().max(l1.eval(&v).unwrap() / (k as f64).sqrt());
            assert!(f >= lower * (1.0 - 1e-10), "lower sandwich k={k}");
            assert!(
                f <= std::f64::consts::SQRT_2 * lower * (1.0 + 1e-10),
                "upper sandwich k={k}"
            );
            if k == 1 {
                let expect = l1.eval(&v).unwrap();
                assert!((f - expect).abs() <= 1e-12 * expect.max(1.0), "k=1 is l1");
            }
            if k == d {
                let expect = l2.eval(&v).unwrap();
                assert!((f - expect).abs() <= 1e-12 * expect.max(1.0), "k=d is l2");
            }
        }
    }
    pass("criterion 2 k-support sandwich: k in {1,2,5,12}, 1000 vectors each");
}

// ---------------------------------------------------------------------
// Criterion 3: spectral lift invariance and matrix Hoelder at d=8, p=12.
// ---------------------------------------------------------------------
#[test]
fn acceptance_03_spectral_lift() {
    let (d, p) = (8, 12);
    let tol = 1e-9;
    let norms = [
        SpectralNorm::trace_norm(d, p).unwrap(),
        SpectralNorm::frobenius(d, p).unwrap(),
        SpectralNorm::spectral_k_support(d, p, 3).unwrap(),
        SpectralNorm::spectral_ky_fan(d, p, 3).unwrap(),
        SpectralNorm::spectral_owl(d, p, DVector::from_fn(d, |i, _| 1.0 / (1.0 + i as f64)))
            .unwrap(),
    ];
    let mut rng = stream_rng(0xACC3, 0);
    for rep in 0..500 {
        let a = randn_mat(d, p, &mut rng);
        let b = randn_mat(d, p, &mut rng);
        let qu = randn_mat(d, d, &mut rng).qr().q();
        let qv = randn_mat(p, p, &mut rng).qr().q();
        let rotated = &qu * &a * &qv;
        for norm in &norms {
            let ea = norm.eval(&a).unwrap();
            let er = norm.eval(&rotated).unwrap();
            assert!((ea - er).abs() <= tol * ea.max(1.0), "invariance rep {rep}");
            let da = norm.dual_eval(&a).unwrap();
            let dr = norm.dual_eval(&rotated).unwrap();
            assert!(
                (da - dr).abs() <= tol * da.max(1.0),
                "dual invariance rep {rep}"
            );
            let inner = a.dot(&b);
            assert!(
                inner <= ea * norm.dual_eval(&b).unwrap() * (1.0 + tol),
                "hoelder rep {rep}"
            );
        }
    }
    pass("criterion 3 spectral lift: 500 pairs at 8x12, five norms");
}

// ---------------------------------------------------------------------
// Criterion 4: subspace seminorm inequality and radius equality.
// ---------------------------------------------------------------------
#[test]
fn acceptance_04_seminorm_inequality() {
    let (d, p, r) = (8, 12, 2);
    let tol = 1e-9;
    let mut rng = stream_rng(0xACC4, 0);
    let theta_star = low_rank_with_spectrum(d, p, &[0.8, 0.6], 17);
    for norm in [
        SpectralNorm::trace_norm(d, p).unwrap(),
        SpectralNorm::spectral_k_support(d, p, r).unwrap(),
    ] {
        let dec = norm.decompose(&theta_star).unwrap();
        assert_eq!(dec.rank(), r);
        let r_star = norm.eval(&theta_star).unwrap();
        assert!(
            (dec.seminorm(&theta_star) - r_star).abs() <= tol * r_star,
            "radius equality"
        );
        for rep in 0..500 {
            let delta = randn_mat(d, p, &mut rng);
            let lhs = dec.seminorm(&delta);
            let rhs = norm.eval(&delta).unwrap();
            assert!(
                lhs <= rhs * (1.0 + tol),
                "seminorm rep {rep}: {lhs} > {rhs}"
            );
        }
    }
    pass("criterion 4 seminorm inequality: 500 directions, trace + k-support");
}

// ---------------------------------------------------------------------
// Criterion 5: compatibility-constant values.
// ---------------------------------------------------------------------
#[test]
fn acceptance_05_psi_values() {
    // Trace norm: exactly 4 sqrt(r).
    let c = Gauge::l1(16).unwrap().constants();
    for r in 1..=8usize {
        let psi = geometry::psi_bound(&c, r, Rho::Finite(1.0));
        assert_eq!(psi, 4.0 * (r as f64).sqrt(), "trace psi at r={r}");
    }
    // k-support at rank k with unit spectrum: sqrt(2) (3 + sigma_1/sigma_r),
    // with the ratio taken from the polar-operator subgradient.
    let (d, p) = (10, 14);
    for k in [2usize, 3, 5] {
        let mut sigma: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
        let nrm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        for s in sigma.iter_mut() {
            *s /= nrm;
        }
        let theta_star = low_rank_with_spectrum(d, p, &sigma, 23 + k as u64);
        let norm = SpectralNorm::spectral_k_support(d, p, k).unwrap();
        let dec = norm.decompose(&theta_star).unwrap();
        let rho_val = match dec.rho().unwrap() {
            Rho::Finite(v) => v,
            Rho::Infinite => panic!("k-support rho should be finite at r=k"),
        };
        let ratio = sigma[0] / sigma[k - 1];
        assert!(
            (rho_val - ratio).abs() <= 1e-9 * ratio,
            "polar rho {rho_val} vs spectrum ratio {ratio}"
        );
        let psi = geometry::psi_bound(&norm.gauge().constants(), k, Rho::Finite(rho_val));
        let expected = std::f64::consts::SQRT_2 * (3.0 + ratio);
        assert!(
            (psi - expected).abs() <= 1e-12 * expected,
            "k-support psi {psi} vs {expected}"
        );
    }
    pass("criterion 5 psi values: trace 4*sqrt(r) exact, k-support sqrt(2)(3+rho) to 1e-12");
}

// ---------------------------------------------------------------------
// Criterion 6: cone-width MC under the closed-form bound.
// ---------------------------------------------------------------------
#[test]
fn acceptance_06_cone_width() {
    let started = Instant::now();
    let samples = 10_000;
    for &(d, p, r) in &[(10usize, 10usize, 1usize), (10, 15, 2), (20, 20, 3)] {
        // Decaying unit-l2 spectrum so the k-support rho is nontrivial.
        let mut sigma: Vec<f64> = (0..r).map(|i| (r - i) as f64).collect();
        let nrm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        for s in sigma.iter_mut() {
            *s /= nrm;
        }
        let theta_star = low_rank_with_spectrum(d, p, &sigma, 31 + (d + p + r) as u64);
        for (name, norm) in [
            ("trace", SpectralNorm::trace_norm(d, p).unwrap()),
            (
                "ksupport",
                SpectralNorm::spectral_k_support(d, p, r).unwrap(),
            ),
        ] {
            let dec = norm.decompose(&theta_star).unwrap();
            let rho_val = dec.rho().unwrap();
            if name == "trace" {
                assert_eq!(rho_val, Rho::Finite(1.0), "trace polar gives rho = 1");
            }
            let bound = geometry::width_cone_bound(d, p, r, rho_val);
            let mc = geometry::width_cone_mc(&dec, samples, 0xACC6).unwrap();
            assert!(
                mc.value <= bound + 3.0 * mc.stderr,
                "{name} at ({d},{p},{r}): mc {} vs bound {bound}",
                mc.value
            );
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 120.0, "criterion 6 runtime {secs:.1}s exceeds 2min");
    pass(&format!(
        "criterion 6 cone width: MC(1e4) <= closed form on 3 shapes x 2 norms in {secs:.1}s"
    ));
}

// ---------------------------------------------------------------------
// Criterion 7: ball-width MC under the closed-form bound.
// ---------------------------------------------------------------------
#[test]
fn acceptance_07_ball_width() {
    let (d, p) = (10, 10);
    let samples = 10_000;
    let trace = SpectralNorm::trace_norm(d, p).unwrap();
    let mc = geometry::width_ball_mc(&trace, samples, 0xACC7);
    let gaussian_bound = (d as f64).sqrt() + (p as f64).sqrt();
    assert!(
        mc.value <= gaussian_bound + 3.0 * mc.stderr,
        "trace ball width {} vs sqrt(d)+sqrt(p) = {gaussian_bound}",
        mc.value
    );
    for (name, norm) in [
        ("trace", trace),
        ("frobenius", SpectralNorm::frobenius(d, p).unwrap()),
        (
            "ksupport",
            SpectralNorm::spectral_k_support(d, p, 2).unwrap(),
        ),
        ("kyfan", SpectralNorm::spectral_ky_fan(d, p, 3).unwrap()),
        (
            "owl",
            SpectralNorm::spectral_owl(d, p, DVector::from_fn(d, |i, _| (d - i) as f64)).unwrap(),
        ),
    ] {
        let nu = norm.gauge().constants().nu;
        let bound = geometry::width_ball_bound(nu, d, p).unwrap();
        let mc = geometry::width_ball_mc(&norm, samples, 0xACC7 + 1);
        assert!(
            mc.value <= bound + 3.0 * mc.stderr,
            "{name}: ball mc {} vs bound {bound}",
            mc.value
        );
    }
    pass("criterion 7 ball width: MC(1e4) <= (sqrt(d)+sqrt(p))/nu for all gauges");
}

// ---------------------------------------------------------------------
// Criterion 8: solver objective against an independent convex solver.
// ---------------------------------------------------------------------

/// Frozen optimal objectives for the 20 instances produced by
/// `oracle_instance`, computed with cvxpy/Clarabel (nuclear-norm objective,
/// spectral-norm constraint on the correlated residual) via
/// tools/oracle/solve_reference.py at tolerance ~1e-10.
const ORACLE_OBJECTIVES: [f64; 20] = [
    0.911148976150,
    1.189258163127,
    0.927790850315,
    1.170800841934,
    0.975754014419,
    1.151089326028,
    0.974905930706,
    1.221173851535,
    0.907007693703,
    1.213371360313,
    0.912668568652,
    1.209130143746,
    0.926570853628,
    1.281780748747,
    0.974586764659,
    1.157665386606,
    0.907364506765,
    1.225693032946,
    0.949739004749,
    1.076068286921,
];

fn oracle_instance(t: usize) -> GdsProblem {
    let (d, p) = (4, 4);
    let r = 1 + t % 2;
    let mut sigma: Vec<f64> = (0..r).map(|i| (r - i) as f64).collect();
    let nrm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    for s in sigma.iter_mut() {
        *s /= nrm;
    }
    let seed = 9000 + t as u64;
    let theta_star = low_rank_with_spectrum(d, p, &sigma, seed);
    let ens = Ensemble::gaussian(d, p);
    let data = MeasurementSet::generate(
        &ens,
        26,
        &theta_star,
        Noise::Gaussian { tau: 0.05 },
        split_seed(seed, 2),
    )
    .unwrap();
    let norm = SpectralNorm::trace_norm(d, p).unwrap();
    let floor = norm
        .dual_eval(&data.residual_map(&theta_star).unwrap())
        .unwrap();
    GdsProblem::new(norm, data, 1.25 * floor).unwrap()
}

/// Dumps the oracle instances as JSON for the reference solver. Run with
/// `cargo test -p gds-cli --test acceptance -- --ignored dump_oracle`.
#[test]
#[ignore]
fn dump_oracle_instances() {
    let dir = std::path::Path::new("target/oracle");
    std::fs::create_dir_all(dir).unwrap();
    for t in 0..20 {
        let problem = oracle_instance(t);
        let n = problem.data.n;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let xi = problem.data.x_matrix(i);
                let mut flat = Vec::with_capacity(16);
                for row in 0..4 {
                    for col in 0..4 {
                        flat.push(xi[(row, col)]);
                    }
                }
                flat
            })
            .collect();
        let y: Vec<f64> = problem.data.y.iter().copied().collect();
        let obj = serde_json::json!({
            "d": 4, "p": 4, "n": n, "lambda": problem.lambda, "x": x, "y": y,
        });
        std::fs::write(
            dir.join(format!("instance_{t:02}.json")),
            serde_json::to_string(&obj).unwrap(),
        )
        .unwrap();
    }
    eprintln!("wrote 20 instances to target/oracle/");
}

#[test]
fn acceptance_08_solver_vs_convex_oracle() {
    let opts = SolverOptions {
        max_iter: 200_000,
        feas_tol: 1e-9,
        opt_tol: 1e-11,
        ..SolverOptions::default()
    };
    for (t, reference) in ORACLE_OBJECTIVES.iter().enumerate() {
        let problem = oracle_instance(t);
        let sol = solve(&problem, &opts).unwrap();
        assert!(sol.converged, "instance {t} did not converge");
        let rel = (sol.objective - reference).abs() / reference;
        assert!(
            rel <= 1e-4,
            "instance {t}: objective {obj} vs oracle {reference} (rel {rel:.2e})",
            obj = sol.objective
        );
        let scale = problem
            .norm
            .dual_eval(&problem.data.adjoint(&problem.data.y).unwrap())
            .unwrap();
        assert!(
            sol.constraint_residual <= 1e-6 * scale.max(1.0),
            "instance {t}: residual {}",
            sol.constraint_residual
        );
    }
    pass("criterion 8 solver vs convex oracle: 20 instances within 1e-4 relative");
}

// ---------------------------------------------------------------------
// Criterion 9: noiseless exact recovery at d=p=20, r=2, n=600.
// ---------------------------------------------------------------------
#[test]
fn acceptance_09_exact_recovery() {
    let started = Instant::now();
    let norm = SpectralNorm::trace_norm(20, 20).unwrap();
    // Scale-aware tiny lambda from a presampled instance.
    let presample_theta = low_rank_with_spectrum(
        20,
        20,
        &[
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
        77,
    );
    let ens = Ensemble::gaussian(20, 20);
    let presample = MeasurementSet::generate(&ens, 600, &presample_theta, Noise::None, 78).unwrap();
    let scale = norm
        .dual_eval(&presample.adjoint(&presample.y).unwrap())
        .unwrap();
    let cfg = ExperimentConfig {
        shape: Shape { d: 20, p: 20 },
        rank: 2,
        spectrum: Spectrum::Flat,
        spectrum_scale: SpectrumScale::UnitL2,
        norm: NormDescriptor::Trace,
        ensemble: EnsembleKind::Gaussian,
        noise_tau: 0.0,
        n_grid: vec![600],
        trials: 10,
        lambda_rule: LambdaRule::Fixed {
            value: 1e-6 * scale,
        },
        solver: SolverOptions::default(),
        seed: 0xACC9,
        max_diverged_frac: 0.0,
        geometry: GeometryConfig {
            width_samples: 1000,
            lambda_samples: 100,
            ..GeometryConfig::default()
        },
    };
    let out = run_sweep(&cfg).unwrap();
    let errs: Vec<f64> = out.records.iter().map(|r| r.rel_error).collect();
    let med = median(&errs);
    let secs = started.elapsed().as_secs_f64();
    assert!(
        med <= 1e-3,
        "median relative error {med:.2e} above 1e-3 (errors {errs:?})"
    );
    assert!(secs < 300.0, "criterion 9 runtime {secs:.1}s exceeds 5min");
    pass(&format!(
        "criterion 9 exact recovery: median rel error {med:.2e} over 10 trials in {secs:.0}s"
    ));
}

// ---------------------------------------------------------------------
// Criteria 10 + 11 share the noisy test sweeps.
// ---------------------------------------------------------------------

fn noisy_sweep_config(norm: NormDescriptor) -> ExperimentConfig {
    ExperimentConfig {
        shape: Shape { d: 20, p: 20 },
        rank: 2,
        spectrum: Spectrum::Flat,
        spectrum_scale: SpectrumScale::UnitL2,
        norm,
        ensemble: EnsembleKind::Gaussian,
        noise_tau: 0.1,
        n_grid: vec![400, 800, 1600, 3200],
        trials: 10,
        lambda_rule: LambdaRule::Empirical {
            quantile: 0.95,
            samples: 200,
        },
        solver: SolverOptions::default(),
        seed: 0xACC10,
        max_diverged_frac: 0.0,
        geometry: GeometryConfig {
            width_samples: 10_000,
            lambda_samples: 200,
            ..GeometryConfig::default()
        },
    }
}

static NOISY_SWEEPS: OnceLock<(SweepOutput, SweepOutput)> = OnceLock::new();

fn noisy_sweeps() -> &'static (SweepOutput, SweepOutput) {
    NOISY_SWEEPS.get_or_init(|| {
        let trace = run_sweep(&noisy_sweep_config(NormDescriptor::Trace)).expect("trace sweep");
        let ksup = run_sweep(&noisy_sweep_config(NormDescriptor::KSupport { k: 2 }))
            .expect("k-support sweep");
        (trace, ksup)
    })
}

#[test]
fn acceptance_10_scaling_slope() {
    let started = Instant::now();
    let (trace, ksup) = noisy_sweeps();
    let ns: Vec<f64> = [400.0, 800.0, 1600.0, 3200.0].to_vec();
    let mut all_ok = true;
    let mut lines = Vec::new();
    for (name, out) in [("trace", trace), ("ksupport", ksup)] {
        let meds: Vec<f64> = [400usize, 800, 1600, 3200]
            .iter()
            .map(|n| {
                let errs: Vec<f64> = out
                    .records
                    .iter()
                    .filter(|r| r.n == *n)
                    .map(|r| r.rel_error)
                    .collect();
                median(&errs)
            })
            .collect();
        let slope = log_log_slope(&ns, &meds);
        let ok = (-0.65..=-0.35).contains(&slope);
        all_ok &= ok;
        lines.push(format!(
            "{name}: slope {slope:.4} (medians {meds:?}), in [-0.65, -0.35]: {ok}"
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    for l in &lines {
        eprintln!("criterion 10 {l}");
    }
    assert!(
        secs < 1800.0,
        "criterion 10 runtime {secs:.0}s exceeds 30min"
    );
    assert!(
        all_ok,
        "log-log slope outside [-0.65, -0.35]: {}  \
         (the n=400 grid point equals d*p, where restricted convexity \
         degrades and the preasymptotic error is inflated; see the notes \
         shipped with the test record)",
        lines.join("; ")
    );
    pass(&format!("criterion 10 scaling slope in {secs:.0}s"));
}

#[test]
fn acceptance_11_bound_validation() {
    let (trace, ksup) = noisy_sweeps();
    for (name, out) in [("trace", trace), ("ksupport", ksup)] {
        let summary = runner::verify_bounds(&out.records, &out.reports).unwrap();
        assert!(
            !summary.vacuous_everywhere,
            "{name}: alpha prediction vacuous at every n"
        );
        assert!(summary.checkable > 0, "{name}: no checkable trials");
        assert!(
            summary.fraction_satisfied >= 0.95,
            "{name}: only {}/{} checkable trials satisfied the bound",
            summary.satisfied,
            summary.checkable
        );
        assert!(summary.width_cone_ok, "{name}: cone width MC above bound");
        assert!(summary.width_ball_ok, "{name}: ball width MC above bound");
        eprintln!(
            "criterion 11 {name}: {}/{} checkable trials satisfied ({}/{} met the lambda floor)",
            summary.satisfied, summary.checkable, summary.condition_ok, summary.total_trials
        );
    }
    pass("criterion 11 bound validation: >= 95% of checkable noisy trials");
}

// ---------------------------------------------------------------------
// Criterion 12: lambda scaling in n.
// ---------------------------------------------------------------------
#[test]
fn acceptance_12_lambda_scaling() {
    let (d, p) = (10, 10);
    let norm = SpectralNorm::trace_norm(d, p).unwrap();
    let ens = Ensemble::gaussian(d, p);
    let n = 200;
    let tau = 0.1;
    let mut ratios = Vec::new();
    for rep in 0..5u64 {
        let small = geometry::lambda_rules(
            &norm,
            &ens,
            n,
            tau,
            1.0,
            1.0,
            200,
            0.95,
            split_seed(0xACC12, rep * 2),
        )
        .unwrap();
        let large = geometry::lambda_rules(
            &norm,
            &ens,
            4 * n,
            tau,
            1.0,
            1.0,
            200,
            0.95,
            split_seed(0xACC12, rep * 2 + 1),
        )
        .unwrap();
        ratios.push(large.empirical / small.empirical);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (1.7..=2.3).contains(&mean),
        "lambda_empirical(4n)/lambda_empirical(n) = {mean:.3} outside [1.7, 2.3] ({ratios:?})"
    );
    pass(&format!(
        "criterion 12 lambda scaling: mean ratio {mean:.3} over 5 repetitions"
    ));
}

// ---------------------------------------------------------------------
// Supporting sweep invariants (not numbered criteria): statistical
// monotonicity and cross-norm agreement on the shared noisy sweeps.
// ---------------------------------------------------------------------
#[test]
fn sweep_invariants_monotonicity_and_norm_agreement() {
    let (trace, ksup) = noisy_sweeps();
    let grid = [400usize, 800, 1600, 3200];
    for (name, out) in [("trace", trace), ("ksupport", ksup)] {
        let meds: Vec<f64> = grid
            .iter()
            .map(|n| {
                let errs: Vec<f64> = out
                    .records
                    .iter()
                    .filter(|r| r.n == *n)
                    .map(|r| r.rel_error)
                    .collect();
                median(&errs)
            })
            .collect();
        // Soft monotonicity: allow one inversion per grid.
        let inversions = meds.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "{name}: medians not monotone: {meds:?}");
    }
    // Same ground truth, same regime: the two norms' errors agree within a
    // factor of three.
    for n in grid {
        let med = |out: &SweepOutput| {
            let errs: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.rel_error)
                .collect();
            median(&errs)
        };
        let a = med(trace);
        let b = med(ksup);
        let ratio = (a / b).max(b / a);
        assert!(ratio <= 3.0, "norms disagree at n={n}: {a} vs {b}");
    }
    pass("sweep invariants: monotone medians, trace vs k-support within factor 3");
}
