use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::{presets, HawkesModel, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Exp1,
    Exp2,
    Exp3,
    Poisson,
    Custom,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" => Ok(Preset::Exp1),
            "exp2" => Ok(Preset::Exp2),
            "exp3" => Ok(Preset::Exp3),
            "poisson" => Ok(Preset::Poisson),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

/// Estimation procedure: Bernstein-weighted Lasso (`B`), adaptive Lasso
/// (`A`), each optionally followed by an OLS refit on the support (`O`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    B,
    BO,
    A,
    AO,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::B, Method::BO, Method::A, Method::AO];

    pub fn is_adaptive(self) -> bool {
        matches!(self, Method::A | Method::AO)
    }

    pub fn refits(self) -> bool {
        matches!(self, Method::BO | Method::AO)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::B => "B",
            Method::BO => "BO",
            Method::A => "A",
            Method::AO => "AO",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B" => Ok(Method::B),
            "BO" => Ok(Method::BO),
            "A" => Ok(Method::A),
            "AO" => Ok(Method::AO),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

pub const BERNSTEIN_GAMMAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const ADAPTIVE_GAMMAS: [f64; 3] = [2.0, 200.0, 1000.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BChoiceConfig {
    Observed,
    LogSquared,
}

/// Parameters of the theoretical weights (Poisson pipeline and `estimate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub mu: f64,
    pub eps: f64,
    pub alpha: f64,
    /// Explicit `x`; overrides `alpha log(T)`.
    pub x: Option<f64>,
    pub b_choice: BChoiceConfig,
    /// Exponent of the adaptive weights.
    pub adaptive_p: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            eps: 0.1,
            alpha: 1.0,
            x: None,
            b_choice: BChoiceConfig::Observed,
            adaptive_p: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_passes: 10_000,
        }
    }
}

/// Poisson pipeline: `samples` i.i.d. processes on `[0, 1]` with a step
/// intensity taking `levels[k]` on the `k`-th of `levels.len()` equal pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    pub samples: usize,
    pub levels: Vec<f64>,
    /// `x` of the theoretical weights (`log T` vanishes on `[0, 1]`).
    pub x: f64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            samples: 5,
            levels: vec![40.0, 40.0, 0.0, 0.0, 20.0, 0.0, 0.0, 10.0],
            x: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    /// 1-based source mark.
    pub source: usize,
    /// 1-based target mark.
    pub target: usize,
    pub kernel: Kernel,
}

/// A model given in the config file; unlisted kernels are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub nu: Vec<f64>,
    pub support: f64,
    #[serde(default)]
    pub kernels: Vec<KernelEntry>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<HawkesModel> {
        let m = self.nu.len();
        let mut grid = vec![Kernel::Zero; m * m];
        for e in &self.kernels {
            if e.source == 0 || e.target == 0 || e.source > m || e.target > m {
                return Err(Error::Config(format!(
                    "kernel entry ({}, {}) outside marks 1..={m}",
                    e.source, e.target
                )));
            }
            grid[(e.source - 1) * m + e.target - 1] = e.kernel.clone();
        }
        HawkesModel::new(self.nu.clone(), grid, self.support)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub warmup: f64,
    #[serde(rename = "K")]
    pub bins: usize,
    pub methods: Vec<Method>,
    /// One grid for every method; `None` uses the per-family defaults.
    pub gammas: Option<Vec<f64>>,
    pub n_replicates: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub weights: WeightConfig,
    pub solver: SolverConfig,
    pub poisson: PoissonConfig,
    pub model: Option<ModelSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Exp1,
            horizon: 20.0,
            warmup: 1.0,
            bins: 4,
            methods: Method::ALL.to_vec(),
            gammas: None,
            n_replicates: 100,
            base_seed: 0,
            output_dir: PathBuf::from("out"),
            weights: WeightConfig::default(),
            solver: SolverConfig::default(),
            poisson: PoissonConfig::default(),
            model: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn gammas_for(&self, method: Method) -> Vec<f64> {
        match &self.gammas {
            Some(g) => g.clone(),
            None if method.is_adaptive() => ADAPTIVE_GAMMAS.to_vec(),
            None => BERNSTEIN_GAMMAS.to_vec(),
        }
    }

    /// The simulation model of the Hawkes presets.
    pub fn model(&self) -> Result<HawkesModel> {
        match self.preset {
            Preset::Exp1 => Ok(presets::experiment1()),
            Preset::Exp2 => Ok(presets::experiment2()),
            Preset::Exp3 => Ok(presets::experiment3()),
            Preset::Custom => self
                .model
                .as_ref()
                .ok_or_else(|| Error::Config("preset \"custom\" needs a [model] table".into()))?
                .build(),
            Preset::Poisson => Err(Error::Config("the Poisson pipeline has no Hawkes model".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.preset != Preset::Poisson && !(self.horizon > 1.0) {
            return Err(Error::Config(format!("T must be > 1 (got {})", self.horizon)));
        }
        if self.bins == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if let Some(g) = &self.gammas {
            if g.is_empty() || g.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config(
                    "gammas must be a nonempty list of positive numbers".into(),
                ));
            }
        }
        if self.preset == Preset::Poisson {
            let p = &self.poisson;
            if p.samples == 0 || p.levels.is_empty() || p.levels.iter().any(|&l| !(l >= 0.0)) || !(p.x > 0.0) {
                return Err(Error::Config(
                    "poisson: need samples >= 1, levels >= 0 and x > 0".into(),
                ));
            }
        } else {
            let model = self.model()?;
            if self.warmup < model.support() {
                return Err(Error::Config(format!(
                    "warmup {} is shorter than the kernel support {}",
                    self.warmup,
                    model.support()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_with_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            preset = "exp3"
            T = 2.0
            methods = ["B", "AO"]
            n_replicates = 10

            [weights]
            mu = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.preset, Preset::Exp3);
        assert_eq!(cfg.horizon, 2.0);
        assert_eq!(cfg.bins, 4);
        assert_eq!(cfg.methods, vec![Method::B, Method::AO]);
        assert_eq!(cfg.weights.mu, 0.2);
        assert_eq!(cfg.weights.eps, 0.1);
        assert_eq!(cfg.gammas_for(Method::B), vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.gammas_for(Method::AO), vec![2.0, 200.0, 1000.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn custom_model_from_toml() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            preset = "custom"
            [model]
            nu = [10.0, 5.0]
            support = 0.04
            [[model.kernels]]
            source = 1
            target = 2
            kernel = { type = "trunc_exp", amplitude = 50.0, rate = 100.0, support = 0.04 }
            "#,
        )
        .unwrap();
        let model = cfg.model().unwrap();
        assert!(model.kernel(0, 0).is_zero());
        assert!(!model.kernel(0, 1).is_zero());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("T = 0.5").unwrap().validate().is_err());
        assert!(ExperimentConfig::from_toml("gammas = [1.0, -1.0]")
            .unwrap()
            .validate()
            .is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("warmup = 0.01")
            .unwrap()
            .validate()
            .is_err());
    }
}
