//! Experiment configuration, read from TOML. Every field has a default, so
//! an empty file (or none) is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub run: RunConfig,
    pub fit: FitConfig,
    pub affine: AffineConfig,
    pub alpha_limit: AlphaLimitConfig,
    pub g_limit: GLimitConfig,
    pub heatmap: HeatmapConfig,
    pub mconv: MConvConfig,
    /// Alternative potential file; the built-in `V1..V4` when absent.
    pub potentials: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Discretization parameter `M`.
    pub m: usize,
    /// 1-based eigenvalue level.
    pub k: usize,
    pub mu: f64,
    pub kappa: f64,
    pub seed: u64,
    pub rule: ReferenceRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 30,
            k: 1,
            mu: 1.0,
            kappa: 1.0,
            seed: 0,
            rule: ReferenceRule::Fair,
        }
    }
}

/// How the reference point of standard perturbation theory is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceRule {
    /// Smallest actual error, per order.
    Fair,
    /// Smallest `||G - G_i||_e`.
    ByNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Errors at or below this value are excluded from slope fits.
    pub noise_floor: f64,
    /// Sweep values above this are preasymptotic and excluded.
    pub preasymptotic_cutoff: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            noise_floor: 1e-13,
            preasymptotic_cutoff: 0.02,
        }
    }
}

/// `scale * 2^{-p}` for `p = min_power..=max_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsGrid {
    pub scale: f64,
    pub min_power: u32,
    pub max_power: u32,
}

impl Default for EpsGrid {
    fn default() -> Self {
        Self {
            scale: 0.1,
            min_power: 0,
            max_power: 20,
        }
    }
}

impl EpsGrid {
    /// Values in decreasing order.
    pub fn values(&self) -> Vec<f64> {
        (self.min_power..=self.max_power)
            .map(|p| self.scale * 0.5f64.powi(p as i32))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineConfig {
    pub alpha: Vec<f64>,
    pub eps: EpsGrid,
}

impl Default for AffineConfig {
    fn default() -> Self {
        Self {
            alpha: vec![-0.3, 0.4, 0.3, 0.6],
            eps: EpsGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaLimitConfig {
    pub eps: EpsGrid,
}

impl Default for AlphaLimitConfig {
    fn default() -> Self {
        Self {
            eps: EpsGrid {
                scale: 0.25,
                min_power: 0,
                max_power: 20,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GLimitConfig {
    pub betas: Vec<[f64; 2]>,
    /// Penalty weight of the finite mode.
    pub xi: f64,
    pub eps: EpsGrid,
}

impl Default for GLimitConfig {
    fn default() -> Self {
        Self {
            betas: vec![[0.3, 1.2], [0.3, 0.7]],
            xi: 1.0,
            eps: EpsGrid {
                scale: 0.25,
                min_power: 0,
                max_power: 20,
            },
        }
    }
}

/// `steps` equally spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub alpha1: Range,
    pub alpha2: Range,
    /// Also run the fit, multipoint, then standard chain.
    pub chained: bool,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            alpha1: Range {
                min: -1.0,
                max: 2.0,
                steps: 31,
            },
            alpha2: Range {
                min: -1.0,
                max: 2.0,
                steps: 31,
            },
            chained: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MConvConfig {
    pub m_values: Vec<usize>,
    pub reference_m: usize,
}

impl Default for MConvConfig {
    fn default() -> Self {
        Self {
            m_values: vec![4, 6, 8, 10, 12, 14, 16, 18, 20, 24, 30, 40, 50, 60],
            reference_m: 100,
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative potential paths are taken from the config's directory
        if let (Some(p), Some(dir)) = (&cfg.potentials, path.parent()) {
            if p.is_relative() {
                cfg.potentials = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }
}
