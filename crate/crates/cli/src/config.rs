//! Experiment configuration, read from JSON.

use gds_core::gauge::Gauge;
use gds_core::geometry::GeometryConfig;
use gds_core::measure::{Ensemble, EnsembleKind, Noise};
use gds_core::solver::SolverOptions;
use gds_core::spectral::SpectralNorm;
use gds_core::{GdsError, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Shape {
    pub d: usize,
    pub p: usize,
}

/// Matrix-norm selector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NormDescriptor {
    Trace,
    Frobenius,
    KSupport { k: usize },
    KyFan { k: usize },
    Owl { weights: Vec<f64> },
}

impl NormDescriptor {
    pub fn build(&self, d: usize, p: usize) -> Result<SpectralNorm> {
        match self {
            NormDescriptor::Trace => SpectralNorm::trace_norm(d, p),
            NormDescriptor::Frobenius => SpectralNorm::frobenius(d, p),
            NormDescriptor::KSupport { k } => SpectralNorm::spectral_k_support(d, p, *k),
            NormDescriptor::KyFan { k } => SpectralNorm::spectral_ky_fan(d, p, *k),
            NormDescriptor::Owl { weights } => {
                SpectralNorm::new(Gauge::owl(DVector::from_vec(weights.clone()))?, d, p)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            NormDescriptor::Trace => "trace".into(),
            NormDescriptor::Frobenius => "frobenius".into(),
            NormDescriptor::KSupport { k } => format!("ksupport{k}"),
            NormDescriptor::KyFan { k } => format!("kyfan{k}"),
            NormDescriptor::Owl { .. } => "owl".into(),
        }
    }
}

/// Singular spectrum of the synthetic ground truth.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    /// All singular values equal.
    #[default]
    Flat,
    /// sigma_i proportional to r - i + 1.
    LinearDecay,
    Custom {
        values: Vec<f64>,
    },
}

/// Normalization applied to the spectrum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumScale {
    #[default]
    UnitL2,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaRule {
    Theory,
    Empirical {
        #[serde(default = "default_quantile")]
        quantile: f64,
        #[serde(default = "default_lambda_samples")]
        samples: usize,
    },
    Fixed {
        value: f64,
    },
}

fn default_quantile() -> f64 {
    0.95
}

fn default_lambda_samples() -> usize {
    200
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Empirical {
            quantile: default_quantile(),
            samples: default_lambda_samples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub shape: Shape,
    pub rank: usize,
    #[serde(default)]
    pub spectrum: Spectrum,
    #[serde(default)]
    pub spectrum_scale: SpectrumScale,
    pub norm: NormDescriptor,
    pub ensemble: EnsembleKind,
    #[serde(default)]
    pub noise_tau: f64,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of non-converged solves tolerated before the sweep errors.
    #[serde(default)]
    pub max_diverged_frac: f64,
    #[serde(default)]
    pub geometry: GeometryConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let Shape { d, p } = self.shape;
        if d == 0 || p == 0 || d > p {
            return Err(GdsError::InvalidArgument(format!(
                "shape must satisfy 1 <= d <= p, got {d}x{p}"
            )));
        }
        if self.rank == 0 || self.rank > d {
            return Err(GdsError::InvalidArgument(format!(
                "rank must satisfy 1 <= r <= d, got {}",
                self.rank
            )));
        }
        if self.n_grid.is_empty() {
            return Err(GdsError::InvalidArgument("n_grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GdsError::InvalidArgument(
                "n_grid must be strictly ascending".into(),
            ));
        }
        if self.trials == 0 {
            return Err(GdsError::InvalidArgument("trials must be >= 1".into()));
        }
        if self.noise_tau < 0.0 {
            return Err(GdsError::InvalidArgument("noise_tau must be >= 0".into()));
        }
        if let Spectrum::Custom { values } = &self.spectrum {
            if values.len() != self.rank {
                return Err(GdsError::InvalidArgument(format!(
                    "custom spectrum length {} != rank {}",
                    values.len(),
                    self.rank
                )));
            }
            if values.iter().any(|v| *v <= 0.0) || values.windows(2).any(|w| w[0] < w[1]) {
                return Err(GdsError::InvalidArgument(
                    "custom spectrum must be positive and descending".into(),
                ));
            }
        }
        self.norm.build(d, p)?;
        Ok(())
    }

    pub fn ensemble(&self) -> Ensemble {
        let Shape { d, p } = self.shape;
        match self.ensemble {
            EnsembleKind::Gaussian => Ensemble::gaussian(d, p),
            EnsembleKind::Rademacher => Ensemble::rademacher(d, p),
            EnsembleKind::SparseSign { s } => Ensemble::sparse_sign(d, p, s),
        }
    }

    pub fn noise(&self) -> Noise {
        if self.noise_tau == 0.0 {
            Noise::None
        } else {
            Noise::Gaussian {
                tau: self.noise_tau,
            }
        }
    }

    pub fn spectral_norm(&self) -> Result<SpectralNorm> {
        self.norm.build(self.shape.d, self.shape.p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
