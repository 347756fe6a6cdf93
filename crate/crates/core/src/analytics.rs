//! Closed-form moments, suppression constants, the postselection overhead
//! model, and a Monte Carlo integration oracle that validates every closed
//! form independently.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

pub const LN_2: f64 = std::f64::consts::LN_2;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Normalization convention of an amplitude factor S.
///
/// `OnePlusCos` counts each controlled evolution as a (1 + cos phi) factor;
/// `CosSquared` as cos^2(phi/2). They differ by exactly log 2 per factor in
/// any log-moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    OnePlusCos,
    CosSquared,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Zero for closed forms.
    pub standard_error: f64,
    pub convention: Convention,
}

impl MomentEstimate {
    pub fn closed(mean: f64, variance: f64, convention: Convention) -> Self {
        Self {
            mean,
            variance,
            standard_error: 0.0,
            convention,
        }
    }

    /// Exact convention change; `factors` counts the (1 + cos) terms in S.
    pub fn convert(&self, to: Convention, factors: u32) -> Self {
        if self.convention == to {
            return *self;
        }
        let shift = f64::from(factors) * LN_2;
        let mean = match to {
            // log(1 + cos) = log 2 + log cos^2(phi/2)
            Convention::OnePlusCos => self.mean + shift,
            Convention::CosSquared => self.mean - shift,
        };
        Self {
            mean,
            variance: self.variance,
            standard_error: self.standard_error,
            convention: to,
        }
    }
}

/// Harmonic number at real argument, H(z) = psi(z + 1) + gamma.
pub fn harmonic(z: f64) -> f64 {
    digamma(z + 1.0) + EULER_GAMMA
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

fn check_unit_interval(x: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("{what} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// E[log(1 + cos phi)] under the bit-0 posterior with population c^2.
pub fn mu_single(c_sq: f64) -> Result<f64> {
    check_unit_interval(c_sq, "c_sq")?;
    Ok(c_sq - LN_2)
}

/// Var[log(1 + cos phi)] under the same posterior.
pub fn var_single(c_sq: f64) -> Result<f64> {
    check_unit_interval(c_sq, "c_sq")?;
    Ok(PI * PI / 3.0 - c_sq * (2.0 + c_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuTwoBellKind {
    /// (d,d) configuration, "01" outcome: the factor is the constant 2.
    Dd01,
    /// (d,j) configuration, "01" outcome.
    Dj01,
    /// Diagonal bit strings "00"/"11": same structure as the single device.
    Diag0011,
}

pub fn mu_two_bell(
    kind: MuTwoBellKind,
    c_dj_sq: f64,
    c_jd_sq: f64,
    sum_diag: f64,
) -> Result<f64> {
    check_unit_interval(c_dj_sq, "c_dj_sq")?;
    check_unit_interval(c_jd_sq, "c_jd_sq")?;
    check_unit_interval(sum_diag, "sum_diag")?;
    Ok(match kind {
        MuTwoBellKind::Dd01 => LN_2,
        MuTwoBellKind::Dj01 => -LN_2 + (c_dj_sq + c_jd_sq) / (1.0 + sum_diag),
        // Configuration weight enters exactly as |c|^2 does for one device.
        MuTwoBellKind::Diag0011 => c_dj_sq - LN_2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuThreeSwapKind {
    Dd000,
    Ds000,
    Any001,
}

/// General "000" log-moment for configuration (i, j) given the full joint
/// weight matrix (row-major dim x dim).
pub fn mu_swap_000(weights: &[f64], dim: usize, i: usize, j: usize) -> Result<f64> {
    if weights.len() != dim * dim || i >= dim || j >= dim {
        return Err(Error::DimensionMismatch(format!(
            "weights of len {} vs dim {dim}, config ({i},{j})",
            weights.len()
        )));
    }
    let w = |a: usize, b: usize| weights[a * dim + b];
    let sum_diag: f64 = (0..dim).map(|a| w(a, a)).sum();
    let mut bracket = 7.0 / 4.0 * (w(i, i) + w(j, j));
    for a in 0..dim {
        if a != i {
            bracket += w(i, a) + w(a, i);
        }
        if a != j {
            bracket += w(j, a) + w(a, j);
        }
    }
    Ok(-2.0 * LN_2 + bracket / (1.0 + 0.5 * sum_diag))
}

/// "001"/"010" log-moment for configuration (i, j).
pub fn mu_swap_001(c_ij_sq: f64) -> Result<f64> {
    check_unit_interval(c_ij_sq, "c_ij_sq")?;
    Ok(c_ij_sq - LN_2)
}

/// Kind-based access using dominance read off the diagonal of `weights`.
pub fn mu_three_swap(kind: MuThreeSwapKind, weights: &[f64], dim: usize) -> Result<f64> {
    if weights.len() != dim * dim || dim < 2 {
        return Err(Error::DimensionMismatch(format!(
            "weights of len {} vs dim {dim}",
            weights.len()
        )));
    }
    let diag: Vec<f64> = (0..dim).map(|a| weights[a * dim + a]).collect();
    let d = (0..dim).max_by(|a, b| diag[*a].total_cmp(&diag[*b])).unwrap();
    let s = (0..dim)
        .filter(|a| *a != d)
        .max_by(|a, b| diag[*a].total_cmp(&diag[*b]))
        .unwrap();
    match kind {
        MuThreeSwapKind::Dd000 => mu_swap_000(weights, dim, d, d),
        MuThreeSwapKind::Ds000 => mu_swap_000(weights, dim, d, s),
        MuThreeSwapKind::Any001 => mu_swap_001(weights[d * dim + s]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuppressionKind {
    Single,
    TwoBellCombined,
    /// Conditioned on a measured "01".
    TwoBell01,
    TwoSwapCombined,
    /// Conditioned on "000"/"011".
    TwoSwap000,
    /// Large-p limit of the symmetric-subspace generalization.
    MultiAsymptote,
}

/// Near-convergent per-round suppression constants.
pub fn suppression_constant(kind: SuppressionKind) -> f64 {
    match kind {
        SuppressionKind::Single => (-1.0f64).exp(),
        SuppressionKind::TwoBellCombined => (-0.5f64).exp() * 0.5,
        SuppressionKind::TwoBell01 => 0.25,
        SuppressionKind::TwoSwapCombined => (-9.0f64 / 8.0).exp(),
        SuppressionKind::TwoSwap000 => (-7.0f64 / 6.0).exp(),
        SuppressionKind::MultiAsymptote => 0.25,
    }
}

#[derive(Debug, Clone)]
pub struct SuppressionReport {
    pub variant: crate::engine_eigen::Variant,
    /// (bit string, per-round suppression, probability weight).
    pub per_bit: Vec<(&'static str, f64, f64)>,
    pub combined: f64,
}

/// Near-convergent per-bit-string suppression table for a variant, with the
/// probability-weighted geometric combination.
pub fn suppression_report(variant: crate::engine_eigen::Variant) -> Result<SuppressionReport> {
    use crate::engine_eigen::Variant as V;
    let e1 = suppression_constant(SuppressionKind::Single);
    let per_bit: Vec<(&'static str, f64, f64)> = match variant {
        V::Single => vec![("0", e1, 1.0)],
        V::TwoBell => vec![
            ("00", e1, 0.25),
            ("11", e1, 0.25),
            ("01", suppression_constant(SuppressionKind::TwoBell01), 0.5),
        ],
        V::TwoSwap => {
            let s000 = suppression_constant(SuppressionKind::TwoSwap000);
            vec![
                ("000", s000, 0.375),
                ("011", s000, 0.375),
                ("001", e1, 0.125),
                ("010", e1, 0.125),
            ]
        }
        _ => {
            return Err(Error::Domain(format!(
                "no closed-form suppression table for {variant:?}"
            )))
        }
    };
    let combined = per_bit
        .iter()
        .map(|(_, s, w)| s.powf(*w))
        .product();
    Ok(SuppressionReport {
        variant,
        per_bit,
        combined,
    })
}

/// F(p) = Gamma(p + 1/2) / (sqrt(pi) Gamma(p + 1)): probability of the
/// all-zeros (equivalently all-ones) record in the p-device variant.
pub fn symmetric_outcome_probability(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("device count must be positive".into()));
    }
    let p = p as f64;
    Ok((ln_gamma(p + 0.5) - ln_gamma(p + 1.0) - 0.5 * PI.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuMultiKind {
    Dominant,
    Subdominant,
}

/// Log-moments of the all-zeros amplitude factor (cos^2 convention) for the
/// p-device protocol in the near-convergent regime.
pub fn mu_multi(p: usize, kind: MuMultiKind) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("device count must be positive".into()));
    }
    let pf = p as f64;
    let dh = harmonic(pf - 0.5) - harmonic(pf);
    Ok(match kind {
        MuMultiKind::Dominant => pf * dh,
        MuMultiKind::Subdominant => -2.0 * LN_2 + (pf - 1.0) * dh,
    })
}

/// Per-round suppression exp(mu_sub - mu_dom) for p devices.
pub fn multi_suppression(p: usize) -> Result<f64> {
    Ok((mu_multi(p, MuMultiKind::Subdominant)? - mu_multi(p, MuMultiKind::Dominant)?).exp())
}

/// Diagonal norm x^(k) = 2^k x0 / (1 + x0 (2^k - 1)) after k heralded rounds.
pub fn overhead_diagonal_norm(x0: f64, k: u32) -> Result<f64> {
    check_unit_interval(x0, "x0")?;
    let pow = 2.0f64.powi(k as i32);
    Ok(pow * x0 / (1.0 + x0 * (pow - 1.0)))
}

/// Asymptotic probability of ever observing the antisymmetric herald.
pub fn overhead_failure_probability(x0: f64) -> Result<f64> {
    check_unit_interval(x0, "x0")?;
    Ok((1.0 - x0) / (1.0 + x0))
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle
// ---------------------------------------------------------------------------

pub type PhaseFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// 64 strata per dimension with per-stratum RNG streams.
    Stratified,
    /// Plain uniform sampling, retained as a cross-check.
    Uniform,
}

const STRATA_PER_DIM: usize = 64;

/// Estimates E[f] over [0, 2pi)^dims under the (unnormalized) density `bias`,
/// using the self-normalizing ratio of uniform-sample averages. Also
/// estimates Var[f] under the same density. Deterministic for a fixed seed,
/// independent of worker count.
pub fn mc_integral_oracle(
    dims: usize,
    f: PhaseFn,
    bias: PhaseFn,
    samples: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<MomentEstimate> {
    if dims == 0 || dims > 3 {
        return Err(Error::Domain(format!("unsupported dimension {dims}")));
    }
    if samples < 1_000 {
        return Err(Error::Domain(format!("sample count {samples} below 1000")));
    }
    let strata: usize = match mode {
        SamplingMode::Stratified => STRATA_PER_DIM.pow(dims as u32),
        SamplingMode::Uniform => 1,
    };
    let per_stratum = samples.div_ceil(strata).max(2);

    // Sums of w, f w, f^2 w, (f w)^2, w^2, f^2 w^2 per stratum; strata have
    // equal volume, so plain sums combine across strata.
    let sums: Vec<[f64; 6]> = (0..strata)
        .into_par_iter()
        .map(|stratum| {
            let mut rng = stratum_rng(seed, stratum as u64);
            let mut lo = [0.0f64; 3];
            let mut width = TAU;
            if mode == SamplingMode::Stratified {
                width = TAU / STRATA_PER_DIM as f64;
                let mut rem = stratum;
                for l in lo.iter_mut().take(dims) {
                    *l = (rem % STRATA_PER_DIM) as f64 * width;
                    rem /= STRATA_PER_DIM;
                }
            }
            let mut acc = [0.0f64; 6];
            let mut x = vec![0.0f64; dims];
            for _ in 0..per_stratum {
                for (k, xi) in x.iter_mut().enumerate() {
                    *xi = lo[k] + rng.gen::<f64>() * width;
                }
                let w = bias(&x);
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::Domain(format!("bias({x:?}) = {w}")));
                }
                let fv = if w > 0.0 { f(&x) } else { 0.0 };
                acc[0] += w;
                acc[1] += fv * w;
                acc[2] += fv * fv * w;
                acc[3] += (fv * w) * (fv * w);
                acc[4] += w * w;
                acc[5] += (fv * fv * w) * (fv * fv * w);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let total = (strata * per_stratum) as f64;
    let mut s = [0.0f64; 6];
    for acc in &sums {
        for (t, a) in s.iter_mut().zip(acc) {
            *t += a;
        }
    }
    let w_mean = s[0] / total;
    if w_mean < 1e-300 {
        return Err(Error::Domain("bias integrates to zero".into()));
    }
    let mean = s[1] / s[0];
    let second = s[2] / s[0];
    let variance = (second - mean * mean).max(0.0);

    // Delta-method standard error of the ratio estimator, conservatively
    // ignoring the (variance-reducing) stratification.
    let fw_mean = s[1] / total;
    let var_fw = (s[3] / total - fw_mean * fw_mean).max(0.0);
    let var_w = (s[4] / total - w_mean * w_mean).max(0.0);
    // cov(fw, w) via E[f w^2]: not accumulated separately; bound it by
    // Cauchy-Schwarz for a conservative SE.
    let cov_bound = (var_fw * var_w).sqrt();
    let var_ratio =
        (var_fw + mean * mean * var_w + 2.0 * mean.abs() * cov_bound) / (w_mean * w_mean);
    let standard_error = (var_ratio / total).sqrt();

    Ok(MomentEstimate {
        mean,
        variance,
        standard_error,
        convention: Convention::OnePlusCos,
    })
}

/// Splitmix-style per-stratum stream derivation.
fn stratum_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

// ---------------------------------------------------------------------------
// Moment catalogue
// ---------------------------------------------------------------------------

pub struct CatalogueEntry {
    pub name: String,
    pub dims: usize,
    pub closed_form: f64,
    pub integrand: PhaseFn,
    pub bias: PhaseFn,
}

fn uniform_bias() -> PhaseFn {
    Arc::new(|_: &[f64]| 1.0)
}

/// Every analytic quantity paired with its defining integral, for
/// table-driven validation against the MC oracle.
pub fn moment_catalogue() -> Vec<CatalogueEntry> {
    let mut cat: Vec<CatalogueEntry> = Vec::new();

    for c_sq in [0.0, 0.5, 1.0] {
        cat.push(CatalogueEntry {
            name: format!("mu_single({c_sq})"),
            dims: 1,
            closed_form: mu_single(c_sq).unwrap(),
            integrand: Arc::new(|x: &[f64]| (1.0 + x[0].cos()).ln()),
            bias: Arc::new(move |x: &[f64]| 1.0 + c_sq * x[0].cos()),
        });
        // Second moment E[log^2 S] = var + mu^2 validates var_single.
        let mu = mu_single(c_sq).unwrap();
        cat.push(CatalogueEntry {
            name: format!("var_single({c_sq})+mu^2"),
            dims: 1,
            closed_form: var_single(c_sq).unwrap() + mu * mu,
            integrand: Arc::new(|x: &[f64]| {
                let l = (1.0 + x[0].cos()).ln();
                l * l
            }),
            bias: Arc::new(move |x: &[f64]| 1.0 + c_sq * x[0].cos()),
        });
    }

    cat.push(CatalogueEntry {
        name: "mu_two_bell(dd_01)".into(),
        dims: 1,
        closed_form: mu_two_bell(MuTwoBellKind::Dd01, 0.0, 0.0, 1.0).unwrap(),
        integrand: Arc::new(|_: &[f64]| 2.0f64.ln()),
        bias: uniform_bias(),
    });
    // Population set {c_dd^2 = 0.9, c_dj^2 = 0.1}: bias is the "01" posterior
    // marginalized onto (phi_d, phi_j).
    cat.push(CatalogueEntry {
        name: "mu_two_bell(dj_01, 0.1/0/0.9)".into(),
        dims: 2,
        closed_form: mu_two_bell(MuTwoBellKind::Dj01, 0.1, 0.0, 0.9).unwrap(),
        integrand: Arc::new(|x: &[f64]| (1.0 + (x[0] - x[1]).cos()).ln()),
        bias: Arc::new(|x: &[f64]| 2.0 * 0.9 + 0.1 * (1.0 + (x[0] - x[1]).cos())),
    });

    // Swap "000": near-convergent configurations.
    cat.push(CatalogueEntry {
        name: "mu_three_swap(dd_000, near-convergent)".into(),
        dims: 1,
        closed_form: mu_three_swap(MuThreeSwapKind::Dd000, &[1.0, 0.0, 0.0, 0.0], 2).unwrap(),
        integrand: Arc::new(|x: &[f64]| 2.0 * (1.0 + x[0].cos()).ln()),
        bias: Arc::new(|x: &[f64]| {
            let s = 1.0 + x[0].cos();
            s * s
        }),
    });
    cat.push(CatalogueEntry {
        name: "mu_three_swap(ds_000, near-convergent)".into(),
        dims: 2,
        closed_form: mu_three_swap(MuThreeSwapKind::Ds000, &[1.0, 0.0, 0.0, 0.0], 2).unwrap(),
        integrand: Arc::new(|x: &[f64]| ((1.0 + x[0].cos()) * (1.0 + x[1].cos())).ln()),
        bias: Arc::new(|x: &[f64]| {
            let s = 1.0 + x[0].cos();
            s * s
        }),
    });
    // General "000" formula away from the near-convergent limit; the 2x2
    // joint weight matrix below has entries (dd, ds; sd, ss).
    {
        let w = [0.55, 0.2, 0.05, 0.2];
        cat.push(CatalogueEntry {
            name: "mu_swap_000(general, config (d,s))".into(),
            dims: 2,
            closed_form: mu_swap_000(&w, 2, 0, 1).unwrap(),
            integrand: Arc::new(|x: &[f64]| ((1.0 + x[0].cos()) * (1.0 + x[1].cos())).ln()),
            bias: Arc::new(move |x: &[f64]| {
                let f = [1.0 + x[0].cos(), 1.0 + x[1].cos()];
                w[0] * f[0] * f[0] + (w[1] + w[2]) * f[0] * f[1] + w[3] * f[1] * f[1]
            }),
        });
    }
    cat.push(CatalogueEntry {
        name: "mu_three_swap(any_001, zero weight)".into(),
        dims: 2,
        closed_form: mu_swap_001(0.0).unwrap(),
        integrand: Arc::new(|x: &[f64]| (1.0 - (x[0] + x[1]).cos()).ln()),
        bias: uniform_bias(),
    });

    for p in 1..=6usize {
        cat.push(CatalogueEntry {
            name: format!("symmetric_outcome_probability({p})"),
            dims: 1,
            closed_form: symmetric_outcome_probability(p).unwrap(),
            integrand: Arc::new(move |x: &[f64]| (x[0] / 2.0).cos().powi(2 * p as i32)),
            bias: uniform_bias(),
        });
    }

    for p in 2..=6usize {
        cat.push(CatalogueEntry {
            name: format!("mu_multi({p}, dominant)"),
            dims: 1,
            closed_form: mu_multi(p, MuMultiKind::Dominant).unwrap(),
            integrand: Arc::new(move |x: &[f64]| {
                2.0 * p as f64 * (x[0] / 2.0).cos().abs().max(1e-300).ln()
            }),
            bias: Arc::new(move |x: &[f64]| (x[0] / 2.0).cos().powi(2 * p as i32)),
        });
        cat.push(CatalogueEntry {
            name: format!("mu_multi({p}, subdominant)"),
            dims: 2,
            closed_form: mu_multi(p, MuMultiKind::Subdominant).unwrap(),
            integrand: Arc::new(move |x: &[f64]| {
                2.0 * (p as f64 - 1.0) * (x[0] / 2.0).cos().abs().max(1e-300).ln()
                    + 2.0 * (x[1] / 2.0).cos().abs().max(1e-300).ln()
            }),
            bias: Arc::new(move |x: &[f64]| (x[0] / 2.0).cos().powi(2 * p as i32)),
        });
    }

    cat
}
