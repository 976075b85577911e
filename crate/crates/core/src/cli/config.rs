//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::carleson::ScanWindow;
use crate::error::{FockError, Result};
use crate::quadrature::QuadConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Assemble,
    Berezin,
    Carleson,
    Spectral,
    VerifyDiagonalization,
    Commutativity,
    Lagrangian,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Berezin => "berezin",
            Command::Carleson => "carleson",
            Command::Spectral => "spectral",
            Command::VerifyDiagonalization => "verify-diagonalization",
            Command::Commutativity => "commutativity",
            Command::Lagrangian => "lagrangian",
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Command::Assemble => 1e-10,
            Command::Berezin => 1e-6,
            Command::Carleson => crate::carleson::GROWTH_FACTOR,
            Command::Spectral => 0.05,
            Command::VerifyDiagonalization | Command::Lagrangian => 1e-5,
            Command::Commutativity => 1e-6,
        }
    }
}

/// Lattice window for scans and sampling grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub radius: f64,
    pub spacing: f64,
    /// Polydisk radii; a single entry is repeated over all axes.
    pub r: Vec<f64>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            radius: 2.0,
            spacing: 0.5,
            r: vec![1.0],
        }
    }
}

impl WindowConfig {
    pub fn scan_window(&self) -> Result<ScanWindow> {
        ScanWindow::new(self.radius, self.spacing)
    }

    pub fn radii(&self, n: usize) -> Vec<f64> {
        if self.r.len() == 1 {
            vec![self.r[0]; n]
        } else {
            self.r.clone()
        }
    }
}

/// One experiment. Optional fields are filled by [`ExperimentConfig::resolve`]
/// and the resolved form is written next to the results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub dimension: usize,
    /// Truncation degree `D`.
    pub degree: u32,
    pub measure: String,
    /// Second symbol for `commutativity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_measure: Option<String>,
    /// Declared horizontal factor `ϱ` on `Rⁿ` for `lagrangian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    /// Doubled order `2k`.
    #[serde(default)]
    pub k: Option<Vec<u32>>,
    /// Weight `α` with `k ≥ α`; the operator is `T_{∂_R^{2(k−α)} μ_α}`.
    #[serde(default)]
    pub alpha: Option<Vec<i32>>,
    /// Spanning vectors of a Lagrangian plane in `R²ⁿ = (x, y)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Random unit vectors drawn for sampled checks.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub quadrature: Option<QuadConfig>,
    #[serde(default)]
    pub window: Option<WindowConfig>,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> FockError {
    FockError::Domain(format!("config field `{field}`: {message}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FockError::Domain(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FockError::Domain(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills defaults, applies command-line overrides and validates shapes.
    pub fn resolve(mut self, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        let n = self.dimension;
        if n == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        self.seed.get_or_insert(0);
        if let Some(o) = out {
            self.output = Some(o);
        }
        self.output.get_or_insert_with(|| PathBuf::from("fock-lab-out"));
        self.samples.get_or_insert(200);
        self.quadrature.get_or_insert_with(QuadConfig::default);
        self.window.get_or_insert_with(WindowConfig::default);
        self.tolerance.get_or_insert(self.command.default_tolerance());
        let k = self.k.get_or_insert_with(|| vec![0; n]);
        if k.len() != n {
            return Err(invalid("k", format!("expected {n} entries, found {}", k.len())));
        }
        let alpha = self.alpha.get_or_insert_with(|| vec![0; n]);
        if alpha.len() != n {
            return Err(invalid("alpha", format!("expected {n} entries, found {}", alpha.len())));
        }
        if let Some((j, _)) = self
            .k()
            .iter()
            .zip(self.alpha())
            .enumerate()
            .find(|(_, (&kk, &a))| (kk as i64) < 2 * a as i64)
        {
            return Err(invalid("alpha", format!("entry {} exceeds k", j + 1)));
        }
        let tol = self.tolerance();
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("tolerance", "must be positive"));
        }
        let w = self.window();
        w.scan_window().map_err(|e| invalid("window", e))?;
        let r = w.radii(n);
        if r.len() != n || r.iter().any(|&x| x.is_nan() || x <= 0.0) {
            return Err(invalid("window.r", format!("need 1 or {n} positive radii")));
        }
        match self.command {
            Command::Commutativity if self.second_measure.is_none() => {
                return Err(invalid("second_measure", "required by `commutativity`"));
            }
            Command::Lagrangian if self.frame.is_none() => {
                return Err(invalid("frame", "required by `lagrangian`"));
            }
            _ => {}
        }
        if let Some(frame) = &self.frame {
            if frame.len() != n || frame.iter().any(|v| v.len() != 2 * n) {
                return Err(invalid("frame", format!("expected {n} vectors of length {}", 2 * n)));
            }
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FockError::Domain(format!("cannot serialize config: {e}")))
    }

    pub fn k(&self) -> &[u32] {
        self.k.as_deref().unwrap_or(&[])
    }

    pub fn alpha(&self) -> &[i32] {
        self.alpha.as_deref().unwrap_or(&[])
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(self.command.default_tolerance())
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(200)
    }

    pub fn quadrature(&self) -> QuadConfig {
        self.quadrature.clone().unwrap_or_default()
    }

    pub fn window(&self) -> WindowConfig {
        self.window.clone().unwrap_or_default()
    }

    pub fn output(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("fock-lab-out"))
    }
}
