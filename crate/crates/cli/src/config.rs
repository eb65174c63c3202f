//! Run configuration: a TOML file with flag overrides on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bergman_core::manifolds::{ManifoldKind, DEFAULT_FD_STEP};
use bergman_core::sweep::{default_p_values, default_torus_p_values};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldKind,
    /// Tensor powers; defaults depend on the manifold.
    pub p_values: Option<Vec<u32>>,
    pub samples: Samples,
    /// `[re, im]` of the base point in the affine chart.
    pub base_point: Option<[f64; 2]>,
    /// Seed for the sample pairs.
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub precision: Precision,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    pub count: usize,
    /// Radius of the disc the rescaled tangent vectors are drawn from.
    pub sigma: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Precision {
    /// Step of the finite-difference curvature.
    pub fd_step: f64,
    /// Gauss–Legendre nodes of the reproducing-identity quadrature.
    pub quadrature_nodes: usize,
    /// Highest half-power in the fits; per-model default when absent.
    pub max_r: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldKind::Cp1,
            p_values: None,
            samples: Samples::default(),
            base_point: None,
            seed: 2024,
            output: None,
            precision: Precision::default(),
        }
    }
}

impl Default for Samples {
    fn default() -> Self {
        Self {
            count: 8,
            sigma: 1.0,
        }
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self {
            fd_step: DEFAULT_FD_STEP,
            quadrature_nodes: 150,
            max_r: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn p_values_for(&self, kind: ManifoldKind) -> Vec<u32> {
        self.p_values.clone().unwrap_or_else(|| match kind {
            ManifoldKind::Cp1 => default_p_values(),
            ManifoldKind::FlatTorus => default_torus_p_values(),
        })
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.samples.sigma > 0.0 && self.samples.sigma <= 1.0) {
            bail!(
                "samples.sigma must lie in (0, 1], got {}",
                self.samples.sigma
            );
        }
        if self.samples.count == 0 {
            bail!("samples.count must be positive");
        }
        if let Some(ps) = &self.p_values {
            if ps.is_empty() {
                bail!("p_values is empty");
            }
            if let Some(p) = ps.iter().find(|&&p| p < 10) {
                bail!("p values must be at least 10, got {p}");
            }
        }
        if !(self.precision.fd_step > 0.0 && self.precision.fd_step < 0.1) {
            bail!(
                "precision.fd_step must lie in (0, 0.1), got {}",
                self.precision.fd_step
            );
        }
        if self.precision.quadrature_nodes < 10 {
            bail!("precision.quadrature_nodes must be at least 10");
        }
        if let Some([re, im]) = self.base_point {
            if !(re.is_finite() && im.is_finite()) {
                bail!("base_point must be finite");
            }
        }
        Ok(())
    }
}
