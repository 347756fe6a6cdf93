//! Declarative experiment configuration (TOML on disk).

use serde::{Deserialize, Serialize};

use crate::adiabatic::Schedule;
use crate::engine_eigen::{Variant, MAX_DEVICES};
use crate::error::{Error, Result};
use crate::spectral::SpinChainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartPolicy {
    RestartOnHeraldFail,
    RecordAndContinue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Ground-state weight gamma^2; the remainder spread uniformly.
    GroundOverlap { gamma_sq: f64 },
    /// Explicit eigenbasis populations (will be normalized).
    Populations { weights: Vec<f64> },
    /// Output of an adiabatic sweep into the configured Hamiltonian.
    Qaa {
        total_time: f64,
        steps: usize,
        schedule: Schedule,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub hamiltonian: SpinChainSpec,
    pub variant: Variant,
    pub initial: InitialState,
    pub iterations: usize,
    pub trajectories: usize,
    /// Defaults to 4 pi / gap.
    #[serde(default)]
    pub tau_max: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_restart_policy")]
    pub restart_policy: RestartPolicy,
    #[serde(default = "default_near_convergent")]
    pub near_convergent_threshold: f64,
    /// Eigenstate index Alice is pinned to in broadcasting mode; when absent,
    /// every device starts from the same initial populations.
    #[serde(default)]
    pub alice_pinned: Option<usize>,
    /// Device count for the symmetric-subspace variant (ignored otherwise).
    #[serde(default = "default_devices")]
    pub devices: usize,
    /// Constant added to the Hamiltonian before phase draws.
    #[serde(default)]
    pub energy_offset: f64,
}

fn default_restart_policy() -> RestartPolicy {
    RestartPolicy::RestartOnHeraldFail
}

fn default_near_convergent() -> f64 {
    0.99
}

fn default_devices() -> usize {
    2
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.hamiltonian.validate()?;
        if self.trajectories == 0 {
            return Err(Error::Config("trajectories must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if let Some(t) = self.tau_max {
            if !(t > 0.0) {
                return Err(Error::Config(format!("tau_max {t} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.near_convergent_threshold) {
            return Err(Error::Config(format!(
                "near_convergent_threshold {} outside [0, 1]",
                self.near_convergent_threshold
            )));
        }
        let dim = 1usize << self.hamiltonian.n;
        match &self.initial {
            InitialState::GroundOverlap { gamma_sq } => {
                if !(0.0..=1.0).contains(gamma_sq) {
                    return Err(Error::Config(format!("gamma_sq {gamma_sq} outside [0, 1]")));
                }
            }
            InitialState::Populations { weights } => {
                if weights.len() != dim {
                    return Err(Error::Config(format!(
                        "{} initial weights for dimension {dim}",
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::Config("initial weights must be nonnegative".into()));
                }
            }
            InitialState::Qaa { total_time, steps, .. } => {
                if *total_time < 0.0 || *steps == 0 {
                    return Err(Error::Config("invalid qaa initial-state spec".into()));
                }
            }
        }
        if let Some(a) = self.alice_pinned {
            if a >= dim {
                return Err(Error::Config(format!("alice_pinned {a} out of range")));
            }
        }
        if self.variant == Variant::MultiSymmetric
            && !(1..=MAX_DEVICES).contains(&self.devices)
        {
            return Err(Error::Config(format!(
                "devices {} outside 1..={MAX_DEVICES}",
                self.devices
            )));
        }
        Ok(())
    }

    pub fn device_count(&self) -> usize {
        match self.variant {
            Variant::Single => 1,
            Variant::TwoBell | Variant::TwoSwap | Variant::Schmidt => 2,
            Variant::MultiSymmetric => self.devices,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Boundary;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            hamiltonian: SpinChainSpec {
                n: 3,
                zz_coupling: 1.0,
                x_field: 1.0,
                z_field: 1.0,
                boundary: Boundary::Periodic,
            },
            variant: Variant::Single,
            initial: InitialState::GroundOverlap { gamma_sq: 0.6 },
            iterations: 100,
            trajectories: 10,
            tau_max: None,
            seed: 1,
            restart_policy: RestartPolicy::RestartOnHeraldFail,
            near_convergent_threshold: 0.99,
            alice_pinned: None,
            devices: 2,
            energy_offset: 0.0,
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = base();
        let text = cfg.to_toml();
        let parsed = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn parses_minimal_document() {
        let text = r#"
            variant = "two_bell"
            iterations = 50
            trajectories = 100
            seed = 7
            alice_pinned = 0

            [hamiltonian]
            n = 3
            zz_coupling = 1.0
            x_field = 1.0
            z_field = 1.0
            boundary = "periodic"

            [initial]
            kind = "ground_overlap"
            gamma_sq = 0.8
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.variant, Variant::TwoBell);
        assert_eq!(cfg.restart_policy, RestartPolicy::RestartOnHeraldFail);
        assert_eq!(cfg.near_convergent_threshold, 0.99);
        assert_eq!(cfg.device_count(), 2);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = base();
        cfg.trajectories = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = base();
        cfg.initial = InitialState::GroundOverlap { gamma_sq: 1.2 };
        assert!(cfg.validate().is_err());

        let mut cfg = base();
        cfg.initial = InitialState::Populations {
            weights: vec![0.5; 3],
        };
        assert!(cfg.validate().is_err());

        let mut cfg = base();
        cfg.alice_pinned = Some(99);
        assert!(cfg.validate().is_err());

        let mut cfg = base();
        cfg.variant = Variant::MultiSymmetric;
        cfg.devices = 9;
        assert!(cfg.validate().is_err());
    }
}
