//! Trajectory sampling over the population engine.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{run_qaa, SweepConfig};
use crate::engine_eigen::{
    dominance, draw_phases, sample_outcome, step_apply, step_distribution, JointPopulationState,
    Variant,
};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, InitialState, RestartPolicy};
use crate::harness::derive_stream;
use crate::spectral::{build_zzxz, diagonalize, overlap_populations, EigenDecomposition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub tau: f64,
    pub bits: String,
    pub herald_ok: bool,
    /// Bob's largest eigenbasis population after this iteration.
    pub w_dominant: f64,
    /// Subdominant / dominant population ratio after this iteration.
    pub ratio: f64,
    /// Mean over non-dominant eigenstates of ln(w_i / w_dominant). Tracking
    /// only the running second-largest population overestimates suppression
    /// (the max of several decaying weights decays slower than each one), so
    /// aggregate estimates difference this instead.
    #[serde(default)]
    pub mean_log_ratio: f64,
    #[serde(default)]
    pub dominant_index: usize,
    #[serde(default)]
    pub restarted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminal {
    ConvergedTo { index: usize },
    LostDominance { crossing_iteration: usize },
    ExhaustedBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: u64,
    pub steps: Vec<IterationRecord>,
    pub restarts: u32,
    /// Bob's eigenbasis populations at the end of the budget.
    pub final_populations: Vec<f64>,
    pub terminal: Terminal,
}

/// Shared context for one experiment.
pub struct ExperimentSetup {
    pub ed: EigenDecomposition,
    pub initial_bob: Vec<f64>,
    pub initial_joint: JointPopulationState,
    pub tau_max: f64,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<ExperimentSetup> {
    cfg.validate()?;
    let h = build_zzxz(&cfg.hamiltonian)?.shifted(cfg.energy_offset);
    let ed = diagonalize(&h)?;
    if ed.gap <= 1e-12 {
        return Err(Error::Validation(format!(
            "target spectrum is degenerate at the ground level (gap {:.3e})",
            ed.gap
        )));
    }
    let dim = ed.eigenvalues.len();
    let initial_bob: Vec<f64> = match &cfg.initial {
        InitialState::GroundOverlap { gamma_sq } => {
            let rest = (1.0 - gamma_sq) / (dim - 1) as f64;
            (0..dim)
                .map(|i| if i == 0 { *gamma_sq } else { rest })
                .collect()
        }
        InitialState::Populations { weights } => {
            let total: f64 = weights.iter().sum();
            weights.iter().map(|w| w / total).collect()
        }
        InitialState::Qaa {
            total_time,
            steps,
            schedule,
        } => {
            let sweep = SweepConfig {
                h0: crate::spectral::build_field_z(cfg.hamiltonian.n)?,
                ht: h.clone(),
                total_time: *total_time,
                steps: *steps,
                schedule: *schedule,
            };
            let result = run_qaa(&sweep)?;
            overlap_populations(&result.final_state, &ed)?
        }
    };
    let initial_joint = initial_joint_state(cfg, &initial_bob);
    let tau_max = cfg.tau_max.unwrap_or(4.0 * PI / ed.gap);
    Ok(ExperimentSetup {
        ed,
        initial_bob,
        initial_joint,
        tau_max,
    })
}

fn initial_joint_state(cfg: &ExperimentConfig, bob: &[f64]) -> JointPopulationState {
    let dim = bob.len();
    match cfg.variant {
        Variant::Single => JointPopulationState::Single {
            weights: bob.to_vec(),
        },
        Variant::TwoBell | Variant::TwoSwap | Variant::Schmidt => match cfg.alice_pinned {
            Some(alice) => JointPopulationState::PinnedPair {
                alice,
                bob: bob.to_vec(),
            },
            None => {
                let mut weights = vec![0.0; dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        weights[a * dim + b] = bob[a] * bob[b];
                    }
                }
                JointPopulationState::Pair { dim, weights }
            }
        },
        Variant::MultiSymmetric => {
            let p = cfg.devices;
            match cfg.alice_pinned {
                Some(alice) => JointPopulationState::PinnedMulti {
                    devices: p,
                    alice,
                    bob: bob.to_vec(),
                },
                None => {
                    let total = dim.pow(p as u32);
                    let mut weights = vec![1.0; total];
                    for (idx, w) in weights.iter_mut().enumerate() {
                        let mut rem = idx;
                        for _ in 0..p {
                            *w *= bob[rem % dim];
                            rem /= dim;
                        }
                    }
                    JointPopulationState::Multi {
                        devices: p,
                        dim,
                        weights,
                    }
                }
            }
        }
    }
}

pub fn run_trajectories(cfg: &ExperimentConfig) -> Result<Vec<TrajectoryRecord>> {
    let setup = prepare(cfg)?;
    (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|id| run_one(cfg, &setup, id))
        .collect()
}

fn run_one(cfg: &ExperimentConfig, setup: &ExperimentSetup, id: u64) -> Result<TrajectoryRecord> {
    let mut rng = derive_stream(cfg.seed, id);
    let mut state = setup.initial_joint.clone();
    let mut steps = Vec::with_capacity(cfg.iterations);
    let mut restarts = 0u32;

    for iteration in 0..cfg.iterations {
        let tau = rng.gen::<f64>() * setup.tau_max;
        let pd = draw_phases(tau, &setup.ed);
        let dist = step_distribution(cfg.variant, &state, &pd)?;
        let outcome = sample_outcome(&dist, &mut rng);

        let restarted = !outcome.herald_ok
            && cfg.restart_policy == RestartPolicy::RestartOnHeraldFail;
        if restarted {
            state = setup.initial_joint.clone();
            restarts += 1;
        } else {
            state = step_apply(cfg.variant, &state, &pd, outcome.bits)?;
        }

        let bob = state.bob_populations();
        let dom = dominance(&bob);
        let w_dom = bob[dom.dominant].max(f64::MIN_POSITIVE);
        let mean_log_ratio = bob
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != dom.dominant)
            .map(|(_, w)| (w.max(f64::MIN_POSITIVE) / w_dom).ln())
            .sum::<f64>()
            / (bob.len() - 1) as f64;
        steps.push(IterationRecord {
            iteration,
            tau,
            bits: outcome.bits.to_string(),
            herald_ok: outcome.herald_ok,
            w_dominant: bob[dom.dominant],
            ratio: bob[dom.subdominant] / w_dom,
            mean_log_ratio,
            dominant_index: dom.dominant,
            restarted,
        });
    }

    let final_populations = state.bob_populations();
    let terminal = classify_convergence(&steps, &final_populations, 1e-3);
    Ok(TrajectoryRecord {
        id,
        steps,
        restarts,
        final_populations,
        terminal,
    })
}

/// Terminal classification from the iteration trace and final populations.
pub fn classify_convergence(
    steps: &[IterationRecord],
    final_populations: &[f64],
    tol: f64,
) -> Terminal {
    let dom = dominance(final_populations);
    if final_populations[dom.dominant] >= 1.0 - tol {
        return Terminal::ConvergedTo { index: dom.dominant };
    }
    // First dominance change, ignoring restart resets.
    let mut prev: Option<usize> = None;
    for s in steps {
        if s.restarted {
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            if s.dominant_index != p {
                return Terminal::LostDominance {
                    crossing_iteration: s.iteration,
                };
            }
        }
        prev = Some(s.dominant_index);
    }
    Terminal::ExhaustedBudget
}
