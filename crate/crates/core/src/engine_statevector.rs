//! Full-statevector circuit oracle.
//!
//! Simulates the measurement circuits exactly on the joint
//! auxiliary-plus-system Hilbert space. Much slower than the population
//! engine, but makes no structural assumptions, so the two can be
//! cross-validated record by record.

use num_complex::Complex64;
use rand::Rng;

use crate::engine_eigen::{symmetric_projector_entries, BitString, StepOutcome, Variant};
use crate::error::{Error, Result};
use crate::spectral::EigenDecomposition;

const NORM_TOL: f64 = 1e-10;

/// Dense state over a row-major product of registers; register 0 varies
/// slowest, so for qubit registers bit 0 of a measurement record is the
/// most significant index digit.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub dims: Vec<usize>,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != amps.len() || dims.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "register dims {dims:?} do not index {} amplitudes",
                amps.len()
            )));
        }
        let sv = Self { dims, amps };
        let norm = sv.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!("state norm {norm} is not 1")));
        }
        Ok(sv)
    }

    /// Tensor product of per-register states, each normalized.
    pub fn from_product(parts: &[(usize, &[Complex64])]) -> Result<Self> {
        let mut dims = Vec::new();
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for (dim, part) in parts {
            if part.len() != *dim {
                return Err(Error::DimensionMismatch(format!(
                    "register of dim {dim} given {} amplitudes",
                    part.len()
                )));
            }
            dims.push(*dim);
            let mut next = Vec::with_capacity(amps.len() * dim);
            for a in &amps {
                for b in *part {
                    next.push(a * b);
                }
            }
            amps = next;
        }
        Self::new(dims, amps)
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn stride(&self, reg: usize) -> usize {
        self.dims[reg + 1..].iter().product()
    }
}

/// Applies `matrix` (row-major, square over the joint space of `regs`) to the
/// listed registers, in the listed order.
pub fn apply_to_registers(
    state: &StateVector,
    matrix: &[Complex64],
    regs: &[usize],
) -> Result<StateVector> {
    for r in regs {
        if *r >= state.dims.len() {
            return Err(Error::DimensionMismatch(format!("no register {r}")));
        }
    }
    let m: usize = regs.iter().map(|r| state.dims[*r]).product();
    if matrix.len() != m * m {
        return Err(Error::DimensionMismatch(format!(
            "operator of {} entries on target space of dim {m}",
            matrix.len()
        )));
    }
    let strides: Vec<usize> = regs.iter().map(|r| state.stride(*r)).collect();
    let target_dims: Vec<usize> = regs.iter().map(|r| state.dims[*r]).collect();

    // Offsets of every joint target assignment relative to a base index.
    let mut offsets = vec![0usize; m];
    for (joint, off) in offsets.iter_mut().enumerate() {
        let mut rem = joint;
        for k in (0..regs.len()).rev() {
            *off += (rem % target_dims[k]) * strides[k];
            rem /= target_dims[k];
        }
    }

    let total = state.amps.len();
    let mut out = state.amps.clone();
    let mut gathered = vec![Complex64::new(0.0, 0.0); m];
    // Enumerate base indices: those where every target coordinate is zero.
    for base in 0..total {
        let is_base = regs
            .iter()
            .all(|&r| (base / state.stride(r)) % state.dims[r] == 0);
        if !is_base {
            continue;
        }
        for (g, off) in gathered.iter_mut().zip(&offsets) {
            *g = state.amps[base + off];
        }
        for (row, off) in offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, g) in gathered.iter().enumerate() {
                acc += matrix[row * m + col] * g;
            }
            out[base + off] = acc;
        }
    }
    Ok(StateVector {
        dims: state.dims.clone(),
        amps: out,
    })
}

/// Named fixed operators used by the measurement circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxOperator {
    VBell,
    VHadamard2,
    VSchmidt,
    Hadamard,
    ControlledSwap,
    /// Projector, not a unitary; `p` qubits.
    SymmetricProjector(usize),
}

impl AuxOperator {
    pub fn dim(&self) -> usize {
        match self {
            Self::Hadamard => 2,
            Self::VBell | Self::VHadamard2 | Self::VSchmidt => 4,
            Self::ControlledSwap => 8,
            Self::SymmetricProjector(p) => 1 << p,
        }
    }

    /// Row-major entries.
    pub fn entries(&self) -> Vec<Complex64> {
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let re = |rows: &[&[f64]]| -> Vec<Complex64> {
            rows.iter()
                .flat_map(|r| r.iter().map(|x| Complex64::new(*x, 0.0)))
                .collect()
        };
        match self {
            Self::Hadamard => re(&[&[r2, r2], &[r2, -r2]]),
            Self::VBell => re(&[
                &[r2, 0.0, 0.0, r2],
                &[0.0, r2, r2, 0.0],
                &[0.0, r2, -r2, 0.0],
                &[r2, 0.0, 0.0, -r2],
            ]),
            Self::VHadamard2 => {
                let h = 0.5;
                re(&[
                    &[h, h, h, h],
                    &[h, -h, h, -h],
                    &[h, h, -h, -h],
                    &[h, -h, -h, h],
                ])
            }
            Self::VSchmidt => re(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, r2, r2, 0.0],
                &[0.0, r2, -r2, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
            ]),
            Self::ControlledSwap => {
                let mut m = vec![Complex64::new(0.0, 0.0); 64];
                for (r, c) in [(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (5, 6), (6, 5), (7, 7)] {
                    m[r * 8 + c] = Complex64::new(1.0, 0.0);
                }
                m
            }
            Self::SymmetricProjector(p) => symmetric_projector_entries(*p),
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Self::SymmetricProjector(_))
    }
}

/// exp(-iHτ) via the eigendecomposition, applied to one register.
pub fn evolve_exact(
    state: &StateVector,
    reg: usize,
    ed: &EigenDecomposition,
    tau: f64,
) -> Result<StateVector> {
    let n = ed.eigenvalues.len();
    if reg >= state.dims.len() || state.dims[reg] != n {
        return Err(Error::DimensionMismatch(format!(
            "register {reg} does not hold a dim-{n} system"
        )));
    }
    let u = propagator(ed, tau);
    apply_to_registers(state, &u, &[reg])
}

fn propagator(ed: &EigenDecomposition, tau: f64) -> Vec<Complex64> {
    let n = ed.eigenvalues.len();
    let v = &ed.eigenvectors;
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, lambda) in ed.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * tau);
        for r in 0..n {
            let vr = v[(r, j)] * phase;
            for c in 0..n {
                u[r * n + c] += vr * v[(c, j)].conj();
            }
        }
    }
    u
}

/// exp(-iHτ) on `target`, conditioned on the qubit register `control` = 1.
pub fn controlled_evolution(
    state: &StateVector,
    control: usize,
    target: usize,
    ed: &EigenDecomposition,
    tau: f64,
) -> Result<StateVector> {
    if control >= state.dims.len() || state.dims[control] != 2 {
        return Err(Error::DimensionMismatch(format!(
            "control register {control} is not a qubit"
        )));
    }
    let n = ed.eigenvalues.len();
    if target >= state.dims.len() || state.dims[target] != n {
        return Err(Error::DimensionMismatch(format!(
            "target register {target} does not hold a dim-{n} system"
        )));
    }
    let u = propagator(ed, tau);
    let m = 2 * n;
    let mut cu = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..n {
        cu[i * m + i] = Complex64::new(1.0, 0.0);
        for j in 0..n {
            cu[(n + i) * m + (n + j)] = u[i * n + j];
        }
    }
    apply_to_registers(state, &cu, &[control, target])
}

pub fn apply_aux(state: &StateVector, op: AuxOperator, regs: &[usize]) -> Result<StateVector> {
    apply_to_registers(state, &op.entries(), regs)
}

/// How a measurement outcome is chosen.
pub enum MeasureChoice<'a> {
    Sample(&'a mut dyn rand::RngCore),
    Forced(usize),
}

/// Born-rule measurement of the listed registers in the computational basis.
/// Returns the joint outcome index (register order as listed, first register
/// most significant), the collapsed renormalized state, and the outcome
/// probability.
pub fn measure_register(
    state: &StateVector,
    regs: &[usize],
    choice: MeasureChoice,
) -> Result<(usize, StateVector, f64)> {
    let m: usize = regs.iter().map(|r| state.dims[*r]).product();
    let target_dims: Vec<usize> = regs.iter().map(|r| state.dims[*r]).collect();
    let strides: Vec<usize> = regs.iter().map(|r| state.stride(*r)).collect();
    let joint_of = |idx: usize| -> usize {
        let mut joint = 0usize;
        for (k, (dim, stride)) in target_dims.iter().zip(&strides).enumerate() {
            let _ = k;
            joint = joint * dim + (idx / stride) % dim;
        }
        joint
    };
    let mut probs = vec![0.0; m];
    for (idx, a) in state.amps.iter().enumerate() {
        probs[joint_of(idx)] += a.norm_sqr();
    }
    let outcome = match choice {
        MeasureChoice::Forced(b) => {
            if b >= m {
                return Err(Error::Domain(format!("outcome {b} out of range {m}")));
            }
            if probs[b] < 1e-14 {
                return Err(Error::Inconsistency(format!(
                    "forced outcome {b} has probability {:.3e}",
                    probs[b]
                )));
            }
            b
        }
        MeasureChoice::Sample(rng) => {
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut picked = m - 1;
            for (b, p) in probs.iter().enumerate() {
                acc += p;
                if r < acc {
                    picked = b;
                    break;
                }
            }
            picked
        }
    };
    let scale = 1.0 / probs[outcome].sqrt();
    let amps = state
        .amps
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            if joint_of(idx) == outcome {
                a * scale
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok((
        outcome,
        StateVector {
            dims: state.dims.clone(),
            amps,
        },
        probs[outcome],
    ))
}

/// Drops registers that are in a definite computational basis state
/// (post-measurement auxiliaries), keeping the remaining joint state.
fn discard_collapsed(state: &StateVector, keep: &[usize]) -> StateVector {
    let dims: Vec<usize> = keep.iter().map(|r| state.dims[*r]).collect();
    let total: usize = dims.iter().product();
    let mut amps = vec![Complex64::new(0.0, 0.0); total];
    let strides: Vec<usize> = keep.iter().map(|r| state.stride(*r)).collect();
    // Find the index of the largest amplitude to fix the collapsed registers.
    let pivot = state
        .amps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut base = pivot;
    for (r, stride) in keep.iter().map(|r| (*r, state.stride(*r))) {
        let coord = (base / stride) % state.dims[r];
        base -= coord * stride;
    }
    for (out_idx, amp) in amps.iter_mut().enumerate() {
        let mut rem = out_idx;
        let mut src = base;
        for k in (0..keep.len()).rev() {
            src += (rem % dims[k]) * strides[k];
            rem /= dims[k];
        }
        *amp = state.amps[src];
    }
    StateVector { dims, amps }
}

/// Runs one full measurement circuit. `systems` holds one normalized system
/// state per device (or a single entangled joint state over all devices);
/// returned is the post-measurement joint system state. Bit strings follow
/// the population engine's layout: helper first where present, then one bit
/// per auxiliary qubit in device order.
pub fn run_circuit_variant(
    variant: Variant,
    systems: &StateVector,
    ed: &EigenDecomposition,
    tau: f64,
    choice: MeasureChoice,
) -> Result<(StepOutcome, StateVector)> {
    let n = ed.eigenvalues.len();
    let p = systems.dims.len();
    if systems.dims.iter().any(|d| *d != n) {
        return Err(Error::DimensionMismatch(format!(
            "system registers {:?} do not match dim-{n} Hamiltonian",
            systems.dims
        )));
    }
    let expected_devices = match variant {
        Variant::Single => 1,
        Variant::TwoBell | Variant::TwoSwap | Variant::Schmidt => 2,
        Variant::MultiSymmetric => p,
    };
    if p != expected_devices {
        return Err(Error::DimensionMismatch(format!(
            "variant {variant:?} needs {expected_devices} system registers, got {p}"
        )));
    }

    match variant {
        Variant::Single => {
            // Registers: (aux, system).
            let zero = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let mut st = prepend_aux(systems, &[2], &zero)?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[0])?;
            st = controlled_evolution(&st, 0, 1, ed, tau)?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[0])?;
            let (bit, collapsed, prob) = measure_register(&st, &[0], choice)?;
            let out = StepOutcome {
                bits: BitString::new(bit as u16, 1),
                herald_ok: true,
                probability: prob,
            };
            Ok((out, discard_collapsed(&collapsed, &[1])))
        }
        Variant::TwoBell | Variant::Schmidt => {
            // Registers: (auxA, auxB, sysA, sysB).
            let zero = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let mut st = prepend_aux(systems, &[2, 2], &zero)?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[0])?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[1])?;
            st = controlled_evolution(&st, 0, 2, ed, tau)?;
            st = controlled_evolution(&st, 1, 3, ed, tau)?;
            let v = if variant == Variant::TwoBell {
                AuxOperator::VBell
            } else {
                AuxOperator::VSchmidt
            };
            st = apply_aux(&st, v, &[0, 1])?;
            let (bits, collapsed, prob) = measure_register(&st, &[0, 1], choice)?;
            let out = StepOutcome {
                bits: BitString::new(bits as u16, 2),
                herald_ok: bits != 0b10,
                probability: prob,
            };
            Ok((out, discard_collapsed(&collapsed, &[2, 3])))
        }
        Variant::TwoSwap => {
            // Registers: (helper, auxA, auxB, sysA, sysB).
            let zero = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let mut st = prepend_aux(systems, &[2, 2, 2], &zero)?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[1])?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[2])?;
            st = controlled_evolution(&st, 1, 3, ed, tau)?;
            st = controlled_evolution(&st, 2, 4, ed, tau)?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[0])?;
            st = apply_aux(&st, AuxOperator::ControlledSwap, &[0, 1, 2])?;
            st = apply_aux(&st, AuxOperator::Hadamard, &[0])?;
            st = apply_aux(&st, AuxOperator::VHadamard2, &[1, 2])?;
            let (bits, collapsed, prob) = measure_register(&st, &[0, 1, 2], choice)?;
            let out = StepOutcome {
                bits: BitString::new(bits as u16, 3),
                herald_ok: bits >> 2 == 0,
                probability: prob,
            };
            Ok((out, discard_collapsed(&collapsed, &[3, 4])))
        }
        Variant::MultiSymmetric => {
            // Registers: (aux_1..aux_p, sys_1..sys_p); the helper-mediated
            // symmetric-subspace measurement is performed as a direct
            // projective measurement on the auxiliary register.
            let zero = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let mut st = prepend_aux(systems, &vec![2; p], &zero)?;
            for k in 0..p {
                st = apply_aux(&st, AuxOperator::Hadamard, &[k])?;
                st = controlled_evolution(&st, k, p + k, ed, tau)?;
            }
            let aux_regs: Vec<usize> = (0..p).collect();
            let (helper_bit, mut st, herald_prob, forced_aux) = match choice {
                MeasureChoice::Forced(rec) => {
                    let helper = rec >> p;
                    if helper > 1 {
                        return Err(Error::Domain(format!("record {rec} out of range")));
                    }
                    let (st, pr) = project_symmetric(&st, &aux_regs, p, helper == 0)?;
                    (helper, st, pr, Some(rec & ((1 << p) - 1)))
                }
                MeasureChoice::Sample(rng) => {
                    let psym = AuxOperator::SymmetricProjector(p).entries();
                    let projected = apply_to_registers(&st, &psym, &aux_regs)?;
                    let p0: f64 = projected.amps.iter().map(|a| a.norm_sqr()).sum();
                    let herald_ok = rng.gen::<f64>() < p0;
                    let (st, pr) = project_symmetric(&st, &aux_regs, p, herald_ok)?;
                    let bit = if herald_ok { 0 } else { 1 };
                    let (aux_bits, collapsed, aux_prob) = {
                        let mut st2 = st;
                        for k in 0..p {
                            st2 = apply_aux(&st2, AuxOperator::Hadamard, &[k])?;
                        }
                        measure_register(&st2, &aux_regs, MeasureChoice::Sample(rng))?
                    };
                    let sys_regs: Vec<usize> = (p..2 * p).collect();
                    let out = StepOutcome {
                        bits: BitString::new(((bit << p) | aux_bits) as u16, (p + 1) as u8),
                        herald_ok: bit == 0,
                        probability: pr * aux_prob,
                    };
                    return Ok((out, discard_collapsed(&collapsed, &sys_regs)));
                }
            };
            for k in 0..p {
                st = apply_aux(&st, AuxOperator::Hadamard, &[k])?;
            }
            let aux = forced_aux.expect("forced path");
            let (aux_bits, collapsed, aux_prob) =
                measure_register(&st, &aux_regs, MeasureChoice::Forced(aux))?;
            let sys_regs: Vec<usize> = (p..2 * p).collect();
            let out = StepOutcome {
                bits: BitString::new(((helper_bit << p) | aux_bits) as u16, (p + 1) as u8),
                herald_ok: helper_bit == 0,
                probability: herald_prob * aux_prob,
            };
            Ok((out, discard_collapsed(&collapsed, &sys_regs)))
        }
    }
}

/// Projective measurement {P_sym, 1 - P_sym} on the auxiliary register.
fn project_symmetric(
    state: &StateVector,
    aux_regs: &[usize],
    p: usize,
    symmetric: bool,
) -> Result<(StateVector, f64)> {
    let psym = AuxOperator::SymmetricProjector(p).entries();
    let matrix = if symmetric {
        psym
    } else {
        let dim = 1usize << p;
        let mut anti = psym;
        for (i, e) in anti.iter_mut().enumerate() {
            let id = if i / dim == i % dim { 1.0 } else { 0.0 };
            *e = Complex64::new(id, 0.0) - *e;
        }
        anti
    };
    let projected = apply_to_registers(state, &matrix, aux_regs)?;
    let prob: f64 = projected.amps.iter().map(|a| a.norm_sqr()).sum();
    if prob < 1e-14 {
        return Err(Error::Inconsistency(
            "projection branch has vanishing probability".into(),
        ));
    }
    let scale = 1.0 / prob.sqrt();
    let amps = projected.amps.iter().map(|a| a * scale).collect();
    Ok((
        StateVector {
            dims: state.dims.clone(),
            amps,
        },
        prob,
    ))
}

fn prepend_aux(
    systems: &StateVector,
    aux_dims: &[usize],
    aux_state: &[Complex64],
) -> Result<StateVector> {
    let mut dims = aux_dims.to_vec();
    dims.extend_from_slice(&systems.dims);
    let aux_total: usize = aux_dims.iter().product();
    let mut amps = Vec::with_capacity(aux_total * systems.amps.len());
    for a in 0..aux_total {
        // Each auxiliary qubit starts in `aux_state` independently.
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut rem = a;
        for dim in aux_dims.iter().rev() {
            coeff *= aux_state[rem % dim];
            rem /= dim;
        }
        for s in &systems.amps {
            amps.push(coeff * s);
        }
    }
    StateVector::new(dims, amps)
}

/// Joint eigenbasis populations |<phi_i1 ... phi_ip | psi>|^2 of a
/// multi-device system state, row-major over configurations.
pub fn joint_populations(state: &StateVector, ed: &EigenDecomposition) -> Result<Vec<f64>> {
    let n = ed.eigenvalues.len();
    if state.dims.iter().any(|d| *d != n) {
        return Err(Error::DimensionMismatch(format!(
            "system registers {:?} vs dim-{n} eigenbasis",
            state.dims
        )));
    }
    let p = state.dims.len();
    // Transform each register into the eigenbasis: amps' = (V^dag)^{(x)p} amps.
    let v = &ed.eigenvectors;
    let mut vdag = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            vdag[r * n + c] = v[(c, r)].conj();
        }
    }
    let mut st = state.clone();
    for reg in 0..p {
        st = apply_to_registers(&st, &vdag, &[reg])?;
    }
    Ok(st.amps.iter().map(|a| a.norm_sqr()).collect())
}

/// Enumerates every measurement record of a variant on a product of
/// eigenbasis-diagonal device states and compares record probabilities and
/// post-measurement populations against the population engine. Returns the
/// largest absolute deviation found.
pub fn cross_check_variant(
    variant: Variant,
    ed: &EigenDecomposition,
    device_weights: &[Vec<f64>],
    tau: f64,
) -> Result<f64> {
    use crate::engine_eigen::{draw_phases, step_apply, step_distribution, JointPopulationState};

    let n = ed.eigenvalues.len();
    let p = device_weights.len();
    let mut parts = Vec::with_capacity(p);
    let mut normalized = Vec::with_capacity(p);
    for w in device_weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for dim-{n} eigenbasis",
                w.len()
            )));
        }
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        for (i, pr) in probs.iter().enumerate() {
            for (r, a) in amps.iter_mut().enumerate() {
                *a += pr.sqrt() * ed.eigenvectors[(r, i)];
            }
        }
        parts.push(amps);
        normalized.push(probs);
    }
    let systems = StateVector::from_product(
        &parts.iter().map(|a| (n, a.as_slice())).collect::<Vec<_>>(),
    )?;

    let joint = match variant {
        Variant::Single => JointPopulationState::Single {
            weights: normalized[0].clone(),
        },
        Variant::TwoBell | Variant::TwoSwap | Variant::Schmidt => {
            let mut weights = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    weights[a * n + b] = normalized[0][a] * normalized[1][b];
                }
            }
            JointPopulationState::Pair { dim: n, weights }
        }
        Variant::MultiSymmetric => {
            let total = n.pow(p as u32);
            let mut weights = vec![1.0; total];
            for (idx, w) in weights.iter_mut().enumerate() {
                let mut rem = idx;
                for dev in (0..p).rev() {
                    *w *= normalized[dev][rem % n];
                    rem /= n;
                }
            }
            JointPopulationState::Multi {
                devices: p,
                dim: n,
                weights,
            }
        }
    };

    let pd = draw_phases(tau, ed);
    let dist = step_distribution(variant, &joint, &pd)?;
    let mut max_dev: f64 = 0.0;
    for o in &dist {
        if o.probability < 1e-12 {
            continue;
        }
        let (out, post) = run_circuit_variant(
            variant,
            &systems,
            ed,
            tau,
            MeasureChoice::Forced(o.bits.bits as usize),
        )?;
        if out.herald_ok != o.herald_ok {
            return Err(Error::Inconsistency(format!(
                "herald flags disagree on record {}",
                o.bits
            )));
        }
        max_dev = max_dev.max((out.probability - o.probability).abs());
        let expected = match step_apply(variant, &joint, &pd, o.bits)? {
            JointPopulationState::Single { weights } => weights,
            JointPopulationState::Pair { weights, .. } => weights,
            JointPopulationState::Multi { weights, .. } => weights,
            _ => unreachable!("cross-check uses unpinned states"),
        };
        let got = joint_populations(&post, ed)?;
        for (g, e) in got.iter().zip(&expected) {
            max_dev = max_dev.max((g - e).abs());
        }
    }
    Ok(max_dev)
}
