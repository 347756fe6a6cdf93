//! Stochastic process maps on eigenbasis populations.
//!
//! Controlled evolution is diagonal in the eigenbasis and every device shares
//! the same tau draw, so amplitude phases never influence outcome
//! probabilities or weight factors; tracking |c|^2 per eigenstate
//! configuration is exact and costs O(N^p) per step instead of the full
//! statevector.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::EigenDecomposition;

/// Device cap for the symmetric-subspace generalization.
pub const MAX_DEVICES: usize = 6;

/// Outcomes below this probability are treated as impossible.
pub const PROB_FLOOR: f64 = 1e-14;

/// Protocol variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Single,
    TwoBell,
    TwoSwap,
    Schmidt,
    MultiSymmetric,
}

/// Eigenphases phi_j = lambda_j * tau mod 2pi for one iteration.
#[derive(Debug, Clone)]
pub struct PhaseDraw {
    pub tau: f64,
    pub phases: Vec<f64>,
}

pub fn draw_phases(tau: f64, ed: &EigenDecomposition) -> PhaseDraw {
    let phases = ed
        .eigenvalues
        .iter()
        .map(|l| (l * tau).rem_euclid(TAU))
        .collect();
    PhaseDraw { tau, phases }
}

/// Measurement record of one step, helper bit first where a helper exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitString {
    pub bits: u16,
    pub len: u8,
}

impl BitString {
    pub fn new(bits: u16, len: u8) -> Self {
        debug_assert!(len <= 16);
        Self { bits, len }
    }

    pub fn bit(&self, i: u8) -> u8 {
        debug_assert!(i < self.len);
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > 16 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::Domain(format!("invalid bit string {s:?}")));
        }
        let bits = u16::from_str_radix(s, 2).expect("validated");
        Ok(Self::new(bits, s.len() as u8))
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

/// One possible measurement outcome of a step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub bits: BitString,
    pub herald_ok: bool,
    pub probability: f64,
}

/// Nonnegative weights over eigenstate configurations.
///
/// `PinnedPair` / `PinnedMulti` hold the broadcasting reduction where every
/// Alice is fixed to one eigenstate; off-pin weights are exactly zero and
/// only Bob's marginal is stored.
#[derive(Debug, Clone, PartialEq)]
pub enum JointPopulationState {
    Single { weights: Vec<f64> },
    /// Row-major (alice, bob) over N x N configurations.
    Pair { dim: usize, weights: Vec<f64> },
    PinnedPair { alice: usize, bob: Vec<f64> },
    /// Row-major over N^devices configurations, device 0 slowest.
    /// Devices 0..p-2 are Alices, the last device is Bob.
    Multi { devices: usize, dim: usize, weights: Vec<f64> },
    PinnedMulti { devices: usize, alice: usize, bob: Vec<f64> },
}

impl JointPopulationState {
    pub fn total_weight(&self) -> f64 {
        self.raw_weights().iter().sum()
    }

    pub fn device_count(&self) -> usize {
        match self {
            Self::Single { .. } => 1,
            Self::Pair { .. } | Self::PinnedPair { .. } => 2,
            Self::Multi { devices, .. } | Self::PinnedMulti { devices, .. } => *devices,
        }
    }

    fn raw_weights(&self) -> &[f64] {
        match self {
            Self::Single { weights } => weights,
            Self::Pair { weights, .. } => weights,
            Self::PinnedPair { bob, .. } => bob,
            Self::Multi { weights, .. } => weights,
            Self::PinnedMulti { bob, .. } => bob,
        }
    }

    fn raw_weights_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Self::Single { weights } => weights,
            Self::Pair { weights, .. } => weights,
            Self::PinnedPair { bob, .. } => bob,
            Self::Multi { weights, .. } => weights,
            Self::PinnedMulti { bob, .. } => bob,
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total_weight();
        if total < PROB_FLOOR {
            return Err(Error::Inconsistency(
                "population state has vanishing total weight".into(),
            ));
        }
        for w in self.raw_weights_mut() {
            *w /= total;
        }
        Ok(())
    }

    /// Bob's marginal eigenstate populations (the broadcast target register).
    pub fn bob_populations(&self) -> Vec<f64> {
        match self {
            Self::Single { weights } => weights.clone(),
            Self::PinnedPair { bob, .. } | Self::PinnedMulti { bob, .. } => bob.clone(),
            Self::Pair { dim, weights } => {
                let mut out = vec![0.0; *dim];
                for a in 0..*dim {
                    for b in 0..*dim {
                        out[b] += weights[a * dim + b];
                    }
                }
                out
            }
            Self::Multi { devices, dim, weights } => {
                let mut out = vec![0.0; *dim];
                for (idx, w) in weights.iter().enumerate() {
                    out[idx % dim] += w;
                }
                let _ = devices;
                out
            }
        }
    }

    /// Sum of weights on configurations where every device holds the same
    /// eigenstate (the "diagonal norm" governing the antisymmetric herald).
    pub fn diagonal_weight(&self) -> f64 {
        match self {
            Self::Single { weights } => weights.iter().sum(),
            Self::Pair { dim, weights } => (0..*dim).map(|i| weights[i * dim + i]).sum(),
            Self::PinnedPair { alice, bob } => bob[*alice],
            Self::PinnedMulti { alice, bob, .. } => bob[*alice],
            Self::Multi { devices, dim, weights } => {
                let mut sum = 0.0;
                for i in 0..*dim {
                    let mut idx = 0usize;
                    for _ in 0..*devices {
                        idx = idx * dim + i;
                    }
                    sum += weights[idx];
                }
                sum
            }
        }
    }
}

/// Iterates pair configurations as (alice_index, bob_index, weight).
fn for_each_pair(state: &JointPopulationState, mut f: impl FnMut(usize, usize, f64)) {
    match state {
        JointPopulationState::Pair { dim, weights } => {
            for a in 0..*dim {
                for b in 0..*dim {
                    let w = weights[a * dim + b];
                    if w != 0.0 {
                        f(a, b, w);
                    }
                }
            }
        }
        JointPopulationState::PinnedPair { alice, bob } => {
            for (b, w) in bob.iter().enumerate() {
                if *w != 0.0 {
                    f(*alice, b, *w);
                }
            }
        }
        _ => unreachable!("pair iteration on non-pair state"),
    }
}

fn map_pair(state: &JointPopulationState, f: impl Fn(usize, usize, f64) -> f64) -> JointPopulationState {
    match state {
        JointPopulationState::Pair { dim, weights } => {
            let mut new = weights.clone();
            for a in 0..*dim {
                for b in 0..*dim {
                    new[a * dim + b] = f(a, b, weights[a * dim + b]);
                }
            }
            JointPopulationState::Pair { dim: *dim, weights: new }
        }
        JointPopulationState::PinnedPair { alice, bob } => {
            let new = bob
                .iter()
                .enumerate()
                .map(|(b, w)| f(*alice, b, *w))
                .collect();
            JointPopulationState::PinnedPair { alice: *alice, bob: new }
        }
        _ => unreachable!("pair map on non-pair state"),
    }
}

// ---------------------------------------------------------------------------
// Single device (Hadamard test)
// ---------------------------------------------------------------------------

fn single_factor(bit: u8, phi: f64) -> f64 {
    match bit {
        0 => 1.0 + phi.cos(),
        _ => 1.0 - phi.cos(),
    }
}

/// Per-draw outcome distribution Pr_0 = sum_l |c_l|^2 (1+cos phi_l)/2.
pub fn single_step_distribution(pop: &[f64], pd: &PhaseDraw) -> [StepOutcome; 2] {
    let mut p0 = 0.0;
    for (w, phi) in pop.iter().zip(&pd.phases) {
        p0 += w * single_factor(0, *phi) / 2.0;
    }
    [
        StepOutcome {
            bits: BitString::new(0, 1),
            herald_ok: true,
            probability: p0,
        },
        StepOutcome {
            bits: BitString::new(1, 1),
            herald_ok: true,
            probability: 1.0 - p0,
        },
    ]
}

/// Applies the single-device process map for a measured bit.
pub fn single_step_apply(pop: &[f64], pd: &PhaseDraw, bit: u8) -> Result<Vec<f64>> {
    let mut new: Vec<f64> = pop
        .iter()
        .zip(&pd.phases)
        .map(|(w, phi)| w * single_factor(bit, *phi))
        .collect();
    let total: f64 = new.iter().sum();
    if total < PROB_FLOOR {
        return Err(Error::Inconsistency(format!(
            "requested zero-probability outcome {bit} (weight {total:.3e})"
        )));
    }
    for w in &mut new {
        *w /= total;
    }
    Ok(new)
}

// ---------------------------------------------------------------------------
// Two devices, Bell-basis V (2 auxiliary qubits)
// ---------------------------------------------------------------------------

const BELL_OUTCOMES: [(u16, bool); 4] = [
    (0b00, true),
    (0b01, true),
    (0b11, true),
    (0b10, false), // antisymmetric projection
];

fn bell_factor(bits: u16, phi_i: f64, phi_j: f64) -> f64 {
    match bits {
        0b00 => 1.0 + (phi_i + phi_j).cos(),
        0b01 => 1.0 + (phi_i - phi_j).cos(),
        0b11 => 1.0 - (phi_i + phi_j).cos(),
        0b10 => 1.0 - (phi_i - phi_j).cos(),
        _ => unreachable!(),
    }
}

pub fn two_bell_distribution(joint: &JointPopulationState, pd: &PhaseDraw) -> Vec<StepOutcome> {
    BELL_OUTCOMES
        .iter()
        .map(|&(bits, herald_ok)| {
            let mut p = 0.0;
            for_each_pair(joint, |i, j, w| {
                p += w * bell_factor(bits, pd.phases[i], pd.phases[j]) / 4.0;
            });
            StepOutcome {
                bits: BitString::new(bits, 2),
                herald_ok,
                probability: p,
            }
        })
        .collect()
}

pub fn two_bell_apply(
    joint: &JointPopulationState,
    pd: &PhaseDraw,
    bits: BitString,
) -> Result<JointPopulationState> {
    let mut new = map_pair(joint, |i, j, w| {
        w * bell_factor(bits.bits, pd.phases[i], pd.phases[j])
    });
    new.normalize().map_err(|_| zero_outcome_err(bits))?;
    Ok(new)
}

// ---------------------------------------------------------------------------
// Two devices, controlled-SWAP + V = H (x) H (3 auxiliary qubits)
// ---------------------------------------------------------------------------

const SWAP_OUTCOMES: [(u16, bool); 8] = [
    (0b000, true),
    (0b001, true),
    (0b010, true),
    (0b011, true),
    (0b100, false),
    (0b101, false),
    (0b110, false),
    (0b111, false),
];

/// Factor and constant prefactor for the swap variant; prefactors already sum
/// the process map to one over the eight bit strings.
fn swap_factor(bits: u16, phi_i: f64, phi_j: f64) -> (f64, f64) {
    match bits {
        0b000 => ((1.0 + phi_i.cos()) * (1.0 + phi_j.cos()), 0.25),
        0b001 | 0b010 => (1.0 - (phi_i + phi_j).cos(), 0.125),
        0b011 => ((1.0 - phi_i.cos()) * (1.0 - phi_j.cos()), 0.25),
        0b100 | 0b111 => (0.0, 0.0),
        0b101 | 0b110 => (1.0 - (phi_i - phi_j).cos(), 0.125),
        _ => unreachable!(),
    }
}

pub fn two_swap_distribution(joint: &JointPopulationState, pd: &PhaseDraw) -> Vec<StepOutcome> {
    SWAP_OUTCOMES
        .iter()
        .map(|&(bits, herald_ok)| {
            let mut p = 0.0;
            for_each_pair(joint, |i, j, w| {
                let (f, pre) = swap_factor(bits, pd.phases[i], pd.phases[j]);
                p += w * f * pre;
            });
            StepOutcome {
                bits: BitString::new(bits, 3),
                herald_ok,
                probability: p,
            }
        })
        .collect()
}

pub fn two_swap_apply(
    joint: &JointPopulationState,
    pd: &PhaseDraw,
    bits: BitString,
) -> Result<JointPopulationState> {
    let mut new = map_pair(joint, |i, j, w| {
        w * swap_factor(bits.bits, pd.phases[i], pd.phases[j]).0
    });
    new.normalize().map_err(|_| zero_outcome_err(bits))?;
    Ok(new)
}

// ---------------------------------------------------------------------------
// Two devices, Schmidt-projection V-tilde (2 auxiliary qubits)
// ---------------------------------------------------------------------------

fn schmidt_factor(bits: u16, phi_i: f64, phi_j: f64) -> f64 {
    match bits {
        0b00 | 0b11 => 1.0,
        0b01 => 1.0 + (phi_i - phi_j).cos(),
        0b10 => 1.0 - (phi_i - phi_j).cos(),
        _ => unreachable!(),
    }
}

pub fn schmidt_distribution(joint: &JointPopulationState, pd: &PhaseDraw) -> Vec<StepOutcome> {
    BELL_OUTCOMES
        .iter()
        .map(|&(bits, herald_ok)| {
            let mut p = 0.0;
            for_each_pair(joint, |i, j, w| {
                p += w * schmidt_factor(bits, pd.phases[i], pd.phases[j]) / 4.0;
            });
            StepOutcome {
                bits: BitString::new(bits, 2),
                herald_ok,
                probability: p,
            }
        })
        .collect()
}

pub fn schmidt_apply(
    joint: &JointPopulationState,
    pd: &PhaseDraw,
    bits: BitString,
) -> Result<JointPopulationState> {
    let mut new = map_pair(joint, |i, j, w| {
        w * schmidt_factor(bits.bits, pd.phases[i], pd.phases[j])
    });
    new.normalize().map_err(|_| zero_outcome_err(bits))?;
    Ok(new)
}

// ---------------------------------------------------------------------------
// p devices, explicit symmetric-subspace projection
// ---------------------------------------------------------------------------

/// Cached H^{(x)p} (P_sym) and H^{(x)p} (1 - P_sym) on the 2^p auxiliary space.
struct MultiProjector {
    devices: usize,
    /// Row-major 2^p x 2^p matrices.
    sym: Vec<Complex64>,
    anti: Vec<Complex64>,
}

/// P_sym on p qubits as the average of all p! permutation operators,
/// row-major over the 2^p computational basis (qubit 0 most significant).
pub(crate) fn symmetric_projector_entries(p: usize) -> Vec<Complex64> {
    let dim = 1usize << p;
    let mut psym = vec![Complex64::new(0.0, 0.0); dim * dim];
    let perms = permutations(p);
    let count = perms.len() as f64;
    for perm in &perms {
        for col in 0..dim {
            // Basis state `col` maps to the state with bit k taken from
            // position perm[k].
            let mut row = 0usize;
            for k in 0..p {
                let bit = (col >> (p - 1 - perm[k])) & 1;
                row |= bit << (p - 1 - k);
            }
            psym[row * dim + col] += Complex64::new(1.0 / count, 0.0);
        }
    }
    psym
}

impl MultiProjector {
    fn build(p: usize) -> Self {
        let dim = 1usize << p;
        let psym = symmetric_projector_entries(p);
        // Hadamard transform rows: (H^p M)[r][c] = sum_m H^p[r][m] M[m][c].
        let scale = 1.0 / (dim as f64).sqrt();
        let had = |r: usize, m: usize| -> f64 {
            if (r & m).count_ones() % 2 == 0 {
                scale
            } else {
                -scale
            }
        };
        let mut sym = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mut anti = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let mut s = Complex64::new(0.0, 0.0);
                let mut a = Complex64::new(0.0, 0.0);
                for m in 0..dim {
                    let h = had(r, m);
                    let pm = psym[m * dim + c];
                    s += h * pm;
                    let idm = if m == c { 1.0 } else { 0.0 };
                    a += h * (Complex64::new(idm, 0.0) - pm);
                }
                sym[r * dim + c] = s;
                anti[r * dim + c] = a;
            }
        }
        Self { devices: p, sym, anti }
    }

    /// |<b| H^p M |chi>|^2 for every b, where chi = prod (|0> + e^{i phi}|1>)/sqrt(2).
    fn outcome_weights(&self, phases: &[f64], herald_ok: bool) -> Vec<f64> {
        let p = self.devices;
        let dim = 1usize << p;
        let mut chi = vec![Complex64::new(0.0, 0.0); dim];
        let amp = (1.0 / (dim as f64)).sqrt();
        for (idx, c) in chi.iter_mut().enumerate() {
            let mut phase = 0.0;
            for k in 0..p {
                if (idx >> (p - 1 - k)) & 1 == 1 {
                    phase += phases[k];
                }
            }
            *c = Complex64::from_polar(amp, phase);
        }
        let m = if herald_ok { &self.sym } else { &self.anti };
        (0..dim)
            .map(|b| {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..dim {
                    acc += m[b * dim + c] * chi[c];
                }
                acc.norm_sqr()
            })
            .collect()
    }
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            cur.push(v);
            rec(cur, rest, out);
            cur.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..p).collect(), &mut out);
    out
}

static PROJECTOR_CACHE: Lazy<Mutex<HashMap<usize, Arc<MultiProjector>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn projector(p: usize) -> Result<Arc<MultiProjector>> {
    if p == 0 || p > MAX_DEVICES {
        return Err(Error::Capacity(format!(
            "device count {p} outside supported range 1..={MAX_DEVICES}"
        )));
    }
    let mut cache = PROJECTOR_CACHE.lock().expect("projector cache poisoned");
    Ok(cache
        .entry(p)
        .or_insert_with(|| Arc::new(MultiProjector::build(p)))
        .clone())
}

/// Iterates multi-device configurations as (&[device eigenstate indices], weight).
/// Devices 0..p-2 are Alices, device p-1 is Bob.
fn for_each_multi(state: &JointPopulationState, mut f: impl FnMut(&[usize], f64)) {
    match state {
        JointPopulationState::PinnedMulti { devices, alice, bob } => {
            let mut config = vec![*alice; *devices];
            for (b, w) in bob.iter().enumerate() {
                if *w != 0.0 {
                    config[*devices - 1] = b;
                    f(&config, *w);
                }
            }
        }
        JointPopulationState::Multi { devices, dim, weights } => {
            let mut config = vec![0usize; *devices];
            for (idx, w) in weights.iter().enumerate() {
                if *w != 0.0 {
                    let mut rem = idx;
                    for d in (0..*devices).rev() {
                        config[d] = rem % dim;
                        rem /= dim;
                    }
                    f(&config, *w);
                }
            }
        }
        _ => unreachable!("multi iteration on non-multi state"),
    }
}

/// Per-draw outcome distribution for the p-device symmetric projection.
/// Bit strings are helper-first followed by the p auxiliary bits in device
/// order; herald succeeds iff the helper bit is 0.
pub fn multi_symmetric_distribution(
    joint: &JointPopulationState,
    pd: &PhaseDraw,
) -> Result<Vec<StepOutcome>> {
    let p = joint.device_count();
    let proj = projector(p)?;
    let dim = 1usize << p;
    let mut sym = vec![0.0; dim];
    let mut anti = vec![0.0; dim];
    let mut phases = vec![0.0; p];
    for_each_multi(joint, |config, w| {
        for (k, &c) in config.iter().enumerate() {
            phases[k] = pd.phases[c];
        }
        for (acc, ws) in sym.iter_mut().zip(proj.outcome_weights(&phases, true)) {
            *acc += w * ws;
        }
        for (acc, ws) in anti.iter_mut().zip(proj.outcome_weights(&phases, false)) {
            *acc += w * ws;
        }
    });
    let mut out = Vec::with_capacity(2 * dim);
    for (b, pr) in sym.into_iter().enumerate() {
        out.push(StepOutcome {
            bits: BitString::new(b as u16, (p + 1) as u8),
            herald_ok: true,
            probability: pr,
        });
    }
    for (b, pr) in anti.into_iter().enumerate() {
        out.push(StepOutcome {
            bits: BitString::new((1 << p | b) as u16, (p + 1) as u8),
            herald_ok: false,
            probability: pr,
        });
    }
    Ok(out)
}

pub fn multi_symmetric_apply(
    joint: &JointPopulationState,
    pd: &PhaseDraw,
    bits: BitString,
) -> Result<JointPopulationState> {
    let p = joint.device_count();
    if bits.len as usize != p + 1 {
        return Err(Error::Domain(format!(
            "expected {} bits for {p} devices, got {}",
            p + 1,
            bits.len
        )));
    }
    let proj = projector(p)?;
    let herald_ok = bits.bit(0) == 0;
    let aux = (bits.bits & ((1 << p) - 1)) as usize;
    let mut new = joint.clone();
    let mut phases = vec![0.0; p];
    {
        let weights = new.raw_weights_mut();
        let mut idx = 0usize;
        for_each_multi(joint, |_, _| idx += 1);
        let _ = idx;
        let mut cursor = 0usize;
        for_each_weight_multi(joint, |config, w| {
            for (k, &c) in config.iter().enumerate() {
                phases[k] = pd.phases[c];
            }
            let factor = proj.outcome_weights(&phases, herald_ok)[aux];
            weights[cursor] = w * factor;
            cursor += 1;
        });
    }
    new.normalize().map_err(|_| zero_outcome_err(bits))?;
    Ok(new)
}

/// Like `for_each_multi` but visits every stored weight slot (including
/// zeros) in storage order, so results can be written back positionally.
fn for_each_weight_multi(state: &JointPopulationState, mut f: impl FnMut(&[usize], f64)) {
    match state {
        JointPopulationState::PinnedMulti { devices, alice, bob } => {
            let mut config = vec![*alice; *devices];
            for (b, w) in bob.iter().enumerate() {
                config[*devices - 1] = b;
                f(&config, *w);
            }
        }
        JointPopulationState::Multi { devices, dim, weights } => {
            let mut config = vec![0usize; *devices];
            for (idx, w) in weights.iter().enumerate() {
                let mut rem = idx;
                for d in (0..*devices).rev() {
                    config[d] = rem % dim;
                    rem /= dim;
                }
                f(&config, *w);
            }
        }
        _ => unreachable!(),
    }
}

/// Samples one symmetric-projection step.
pub fn multi_symmetric_step(
    joint: &JointPopulationState,
    pd: &PhaseDraw,
    rng: &mut impl rand::Rng,
) -> Result<(StepOutcome, JointPopulationState)> {
    let dist = multi_symmetric_distribution(joint, pd)?;
    let outcome = sample_outcome(&dist, rng);
    let new = multi_symmetric_apply(joint, pd, outcome.bits)?;
    Ok((outcome, new))
}

// ---------------------------------------------------------------------------
// Variant dispatch
// ---------------------------------------------------------------------------

pub fn step_distribution(
    variant: Variant,
    state: &JointPopulationState,
    pd: &PhaseDraw,
) -> Result<Vec<StepOutcome>> {
    match (variant, state) {
        (Variant::Single, JointPopulationState::Single { weights }) => {
            Ok(single_step_distribution(weights, pd).to_vec())
        }
        (Variant::TwoBell, s) if s.device_count() == 2 => Ok(two_bell_distribution(s, pd)),
        (Variant::TwoSwap, s) if s.device_count() == 2 => Ok(two_swap_distribution(s, pd)),
        (Variant::Schmidt, s) if s.device_count() == 2 => Ok(schmidt_distribution(s, pd)),
        (Variant::MultiSymmetric, s)
            if matches!(
                s,
                JointPopulationState::Multi { .. } | JointPopulationState::PinnedMulti { .. }
            ) =>
        {
            multi_symmetric_distribution(s, pd)
        }
        _ => Err(Error::Inconsistency(format!(
            "variant {variant:?} does not match state shape {state:?}"
        ))),
    }
}

pub fn step_apply(
    variant: Variant,
    state: &JointPopulationState,
    pd: &PhaseDraw,
    bits: BitString,
) -> Result<JointPopulationState> {
    match (variant, state) {
        (Variant::Single, JointPopulationState::Single { weights }) => {
            Ok(JointPopulationState::Single {
                weights: single_step_apply(weights, pd, bits.bit(0))?,
            })
        }
        (Variant::TwoBell, s) if s.device_count() == 2 => two_bell_apply(s, pd, bits),
        (Variant::TwoSwap, s) if s.device_count() == 2 => two_swap_apply(s, pd, bits),
        (Variant::Schmidt, s) if s.device_count() == 2 => schmidt_apply(s, pd, bits),
        (Variant::MultiSymmetric, _) => multi_symmetric_apply(state, pd, bits),
        _ => Err(Error::Inconsistency(format!(
            "variant {variant:?} does not match state shape {state:?}"
        ))),
    }
}

/// Samples an outcome from a per-draw distribution.
pub fn sample_outcome(dist: &[StepOutcome], rng: &mut impl rand::Rng) -> StepOutcome {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for o in dist {
        if o.probability < PROB_FLOOR {
            continue;
        }
        acc += o.probability;
        last = Some(*o);
        if r < acc {
            return *o;
        }
    }
    last.expect("distribution has at least one outcome above the floor")
}

fn zero_outcome_err(bits: BitString) -> Error {
    Error::Inconsistency(format!("requested zero-probability outcome {bits}"))
}

// ---------------------------------------------------------------------------
// Dominance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    pub dominant: usize,
    pub subdominant: usize,
    /// D = |c_d|^2 - |c_s|^2.
    pub gap: f64,
    pub tied: bool,
}

/// Dominant and subdominant eigenstate indices; ties break to lower index.
pub fn dominance(pop: &[f64]) -> Dominance {
    assert!(pop.len() >= 2, "dominance needs at least two eigenstates");
    let mut d = 0usize;
    for (i, w) in pop.iter().enumerate().skip(1) {
        if *w > pop[d] {
            d = i;
        }
    }
    let mut s = usize::MAX;
    for (i, w) in pop.iter().enumerate() {
        if i == d {
            continue;
        }
        if s == usize::MAX || *w > pop[s] {
            s = i;
        }
    }
    Dominance {
        dominant: d,
        subdominant: s,
        gap: pop[d] - pop[s],
        tied: pop[d] == pop[s],
    }
}
