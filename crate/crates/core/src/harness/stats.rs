//! Aggregate statistics over trajectory records.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::derive_stream;
use crate::harness::trajectory::{Terminal, TrajectoryRecord};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuppressionEstimate {
    pub geometric_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sample_count: usize,
    /// Spread of per-trajectory mean log ratios (one standard deviation).
    pub per_trajectory_std: f64,
    /// Standard error of the pooled mean log ratio.
    pub standard_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateStats {
    pub combined: SuppressionEstimate,
    /// Conditioned on the bit string observed in the later round of a pair.
    pub per_bit_string: BTreeMap<String, SuppressionEstimate>,
    /// Fraction of trajectories converged to each eigenstate index.
    pub convergence_fractions: Vec<f64>,
    pub lost_dominance_fraction: f64,
    pub exhausted_fraction: f64,
    /// Fraction of herald failures over all iterations.
    pub herald_failure_frequency: f64,
    /// Fraction of trajectories observing at least one herald failure.
    pub ever_failed_fraction: f64,
    /// Herald-success frequency in the last decile of converged trajectories.
    pub last_decile_herald_success: f64,
    pub mean_restarts: f64,
}

const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Per-round suppression over the near-convergent window.
///
/// Ratios r_k = ratio_k / ratio_{k-1} are collected over consecutive
/// herald-success iterations where the previous dominant weight meets
/// `threshold`, dominance is retained, and no restart intervenes.
pub fn estimate_suppression(
    records: &[TrajectoryRecord],
    threshold: f64,
) -> Result<AggregateStats> {
    if records.is_empty() {
        return Err(Error::Domain("no trajectory records".into()));
    }

    // Per-trajectory collections of log ratios, keyed overall and per bit string.
    let mut traj_logs: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    let mut per_bit: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for rec in records {
        let mut logs = Vec::new();
        let mut bit_logs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for pair in rec.steps.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            let usable = cur.herald_ok
                && !cur.restarted
                && !prev.restarted
                && prev.w_dominant >= threshold
                && prev.dominant_index == cur.dominant_index
                && prev.mean_log_ratio.is_finite()
                && cur.mean_log_ratio.is_finite();
            if usable {
                let log_r = cur.mean_log_ratio - prev.mean_log_ratio;
                logs.push(log_r);
                bit_logs.entry(&cur.bits).or_default().push(log_r);
            }
        }
        for (bits, v) in bit_logs {
            per_bit.entry(bits.to_string()).or_default().push(v);
        }
        traj_logs.push(logs);
    }

    let combined = summarize(&traj_logs)?;
    let mut per_bit_string = BTreeMap::new();
    for (bits, groups) in per_bit {
        if let Ok(est) = summarize(&groups) {
            per_bit_string.insert(bits, est);
        }
    }

    let dim = records[0].final_populations.len();
    let mut convergence_fractions = vec![0.0; dim];
    let mut lost = 0usize;
    let mut exhausted = 0usize;
    for rec in records {
        match rec.terminal {
            Terminal::ConvergedTo { index } => convergence_fractions[index] += 1.0,
            Terminal::LostDominance { .. } => lost += 1,
            Terminal::ExhaustedBudget => exhausted += 1,
        }
    }
    for f in &mut convergence_fractions {
        *f /= records.len() as f64;
    }

    let mut total_iters = 0usize;
    let mut failures = 0usize;
    let mut ever_failed = 0usize;
    let mut restarts_total = 0u64;
    for rec in records {
        total_iters += rec.steps.len();
        let f = rec.steps.iter().filter(|s| !s.herald_ok).count();
        failures += f;
        if f > 0 {
            ever_failed += 1;
        }
        restarts_total += u64::from(rec.restarts);
    }

    // Herald success over the last decile of iterations, converged only.
    let mut decile_total = 0usize;
    let mut decile_ok = 0usize;
    for rec in records {
        if !matches!(rec.terminal, Terminal::ConvergedTo { .. }) {
            continue;
        }
        let start = rec.steps.len() - rec.steps.len().div_ceil(10);
        for s in &rec.steps[start..] {
            decile_total += 1;
            decile_ok += usize::from(s.herald_ok);
        }
    }

    Ok(AggregateStats {
        combined,
        per_bit_string,
        convergence_fractions,
        lost_dominance_fraction: lost as f64 / records.len() as f64,
        exhausted_fraction: exhausted as f64 / records.len() as f64,
        herald_failure_frequency: failures as f64 / total_iters.max(1) as f64,
        ever_failed_fraction: ever_failed as f64 / records.len() as f64,
        last_decile_herald_success: if decile_total == 0 {
            f64::NAN
        } else {
            decile_ok as f64 / decile_total as f64
        },
        mean_restarts: restarts_total as f64 / records.len() as f64,
    })
}

/// Pooled geometric mean with a trajectory-level bootstrap CI.
fn summarize(groups: &[Vec<f64>]) -> Result<SuppressionEstimate> {
    let nonempty: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let total: usize = nonempty.iter().map(|g| g.len()).sum();
    if total == 0 {
        return Err(Error::Domain(
            "no usable iteration pairs after filtering".into(),
        ));
    }
    let sum: f64 = nonempty.iter().flat_map(|g| g.iter()).sum();
    let mean = sum / total as f64;
    let var: f64 = nonempty
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / total as f64;

    let traj_means: Vec<(f64, usize)> = nonempty
        .iter()
        .map(|g| (g.iter().sum::<f64>(), g.len()))
        .collect();
    let per_traj: Vec<f64> = traj_means.iter().map(|(s, n)| s / *n as f64).collect();
    let pt_mean = per_traj.iter().sum::<f64>() / per_traj.len() as f64;
    let pt_std = (per_traj
        .iter()
        .map(|x| (x - pt_mean) * (x - pt_mean))
        .sum::<f64>()
        / per_traj.len() as f64)
        .sqrt();

    // Bootstrap over trajectories; seeded from the data shape so results are
    // reproducible without threading a seed through.
    let mut rng = derive_stream(0xB007_57A9, total as u64);
    let mut resampled = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut s = 0.0;
        let mut n = 0usize;
        for _ in 0..traj_means.len() {
            let pick = traj_means[rng.gen_range(0..traj_means.len())];
            s += pick.0;
            n += pick.1;
        }
        resampled.push(s / n.max(1) as f64);
    }
    resampled.sort_by(f64::total_cmp);
    let lo = resampled[(BOOTSTRAP_RESAMPLES as f64 * 0.025) as usize];
    let hi = resampled[(BOOTSTRAP_RESAMPLES as f64 * 0.975) as usize - 1];

    Ok(SuppressionEstimate {
        geometric_mean: mean.exp(),
        ci_low: lo.exp(),
        ci_high: hi.exp(),
        sample_count: total,
        per_trajectory_std: pt_std,
        standard_error: (var / total as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine_eigen::Variant;
    use crate::harness::config::{ExperimentConfig, InitialState, RestartPolicy};
    use crate::harness::trajectory::run_trajectories;
    use crate::spectral::{Boundary, SpinChainSpec};

    fn cfg(variant: Variant, alice: Option<usize>) -> ExperimentConfig {
        ExperimentConfig {
            hamiltonian: SpinChainSpec {
                n: 3,
                zz_coupling: 1.0,
                x_field: 1.0,
                z_field: 1.0,
                boundary: Boundary::Periodic,
            },
            variant,
            initial: InitialState::GroundOverlap { gamma_sq: 0.99 },
            iterations: 120,
            trajectories: 600,
            tau_max: None,
            seed: 5,
            restart_policy: RestartPolicy::RestartOnHeraldFail,
            near_convergent_threshold: 0.99,
            alice_pinned: alice,
            devices: 2,
            energy_offset: 0.0,
        }
    }

    #[test]
    fn single_device_suppression_near_inverse_e() {
        let records = run_trajectories(&cfg(Variant::Single, None)).unwrap();
        let stats = estimate_suppression(&records, 0.99).unwrap();
        let want = (-1.0f64).exp();
        assert!(
            (stats.combined.geometric_mean - want).abs() < 0.03,
            "got {} want {want}",
            stats.combined.geometric_mean
        );
        assert!(stats.combined.ci_low < stats.combined.geometric_mean);
        assert!(stats.combined.ci_high > stats.combined.geometric_mean);
    }

    #[test]
    fn bell_variant_beats_single_device() {
        let records = run_trajectories(&cfg(Variant::TwoBell, Some(0))).unwrap();
        let stats = estimate_suppression(&records, 0.99).unwrap();
        let want = 0.5 * (-0.5f64).exp();
        assert!(
            (stats.combined.geometric_mean - want).abs() < 0.03,
            "got {} want {want}",
            stats.combined.geometric_mean
        );
        // "01"-conditioned suppression is 1/4.
        let cond = &stats.per_bit_string["01"];
        assert!(
            (cond.geometric_mean - 0.25).abs() < 0.03,
            "01-conditioned {}",
            cond.geometric_mean
        );
    }

    #[test]
    fn herald_statistics_are_populated() {
        let mut c = cfg(Variant::TwoBell, Some(0));
        c.initial = InitialState::GroundOverlap { gamma_sq: 0.7 };
        c.trajectories = 400;
        let records = run_trajectories(&c).unwrap();
        let stats = estimate_suppression(&records, 0.99).unwrap();
        assert!(stats.ever_failed_fraction > 0.0);
        assert!(stats.herald_failure_frequency > 0.0);
        assert!(stats.last_decile_herald_success > 0.95);
        let total: f64 = stats.convergence_fractions.iter().sum::<f64>()
            + stats.lost_dominance_fraction
            + stats.exhausted_fraction;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_an_error() {
        let records = run_trajectories(&cfg(Variant::Single, None)).unwrap();
        assert!(estimate_suppression(&records[..0], 0.99).is_err());
        // Impossible threshold filters everything out.
        assert!(estimate_suppression(&records, 2.0).is_err());
    }
}
