//! Downlink MU-MIMO for one CU serving K DUs with one stream each.
//!
//! For DU `i` with channel `H_i` (M_i x N) and the stacked channels of the
//! other DUs `H~_i`, the SLNR of a unit precoder `w` is
//!
//! ```text
//! SLNR_i(w) = |H_i w|² / (M_i σ_i² + |H~_i w|²)
//! ```
//!
//! and its maximizer is the dominant generalized eigenvector of
//! `(H_i^H H_i, M_i σ_i² I + H~_i^H H~_i)`. The solver works on Gram factors
//! (see [`ChannelMatrix::gram_factor`]) and inverts the noise-plus-leakage
//! matrix with the Woodbury identity whenever the leakage has fewer rows than
//! the CU has antennas.
//!
//! Receivers use maximum-ratio combining matched to `H_i w_i`.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelMatrix;
use crate::linalg::{dominant_hermitian_eigen, normalize_phase, vstack, CMatrix, CVector, C64};
use crate::node::NodeId;
use crate::trace::RadioParams;

#[derive(Debug, Error, PartialEq)]
pub enum MimoError {
    #[error("index {index} out of range for {len} channels")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no channels given")]
    NoChannels,
    #[error("channels disagree on CU antenna count ({expected} vs {found})")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("channel {cu}-{du} has non-finite entries")]
    NonFinite { cu: NodeId, du: NodeId },
    #[error("noise power must be finite and > 0, got {0}")]
    InvalidNoise(f64),
    #[error("zero forcing needs at least {required} CU antennas, have {available}")]
    ZfInfeasible { available: usize, required: usize },
    #[error("{0} precoders/powers/noise values given for {1} channels")]
    LengthMismatch(usize, usize),
    #[error("noise-plus-leakage matrix is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    #[default]
    Slnr,
    Zf,
}

impl std::str::FromStr for PrecoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slnr" => Ok(PrecoderKind::Slnr),
            "zf" => Ok(PrecoderKind::Zf),
            other => Err(format!("unknown precoder `{other}` (expected slnr or zf)")),
        }
    }
}

impl std::fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrecoderKind::Slnr => "slnr",
            PrecoderKind::Zf => "zf",
        })
    }
}

/// Precoders and power split of one CU.
#[derive(Debug, Clone)]
pub struct PrecodedGroup {
    pub cu_id: NodeId,
    pub du_ids: Vec<NodeId>,
    /// Unit-norm, one per DU.
    pub precoders: Vec<CVector>,
    /// Watts, one per DU, summing to the CU transmit power.
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub cu_id: NodeId,
    pub du_id: NodeId,
    pub slnr_db: f64,
    pub sinr_db: f64,
    pub rate_bps: f64,
}

fn check_channels(channels: &[ChannelMatrix]) -> Result<usize, MimoError> {
    let first = channels.first().ok_or(MimoError::NoChannels)?;
    let n = first.cols();
    for h in channels {
        if h.cols() != n {
            return Err(MimoError::ColumnMismatch {
                expected: n,
                found: h.cols(),
            });
        }
        if !h.is_finite() {
            return Err(MimoError::NonFinite {
                cu: h.cu_id.clone(),
                du: h.du_id.clone(),
            });
        }
    }
    Ok(n)
}

fn check_index(channels: &[ChannelMatrix], i: usize) -> Result<(), MimoError> {
    if i >= channels.len() {
        return Err(MimoError::IndexOutOfRange {
            index: i,
            len: channels.len(),
        });
    }
    Ok(())
}

/// Stack of all channels except the `i`-th, in index order
/// (`Σ_{j≠i} M_j x N`; `0 x N` for a single channel).
pub fn extended_channel(channels: &[ChannelMatrix], i: usize) -> Result<CMatrix, MimoError> {
    let n = check_channels(channels)?;
    check_index(channels, i)?;
    let dense: Vec<CMatrix> = channels
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, h)| h.dense())
        .collect();
    let refs: Vec<&CMatrix> = dense.iter().collect();
    Ok(vstack(&refs, n))
}

/// Applies `(s I + L^H L)^{-1}`.
enum RegularizedInverse {
    Scaled(f64),
    Woodbury {
        leak: CMatrix,
        chol: Cholesky<C64, nalgebra::Dyn>,
        s: f64,
    },
    Dense(Cholesky<C64, nalgebra::Dyn>),
}

impl RegularizedInverse {
    fn new(leak: CMatrix, s: f64) -> Result<Self, MimoError> {
        let (r, n) = leak.shape();
        if r == 0 {
            return Ok(RegularizedInverse::Scaled(s));
        }
        let sc = C64::new(s, 0.0);
        if r < n {
            let k = CMatrix::identity(r, r) * sc + &leak * leak.adjoint();
            let chol = Cholesky::new(k).ok_or(MimoError::NotPositiveDefinite)?;
            Ok(RegularizedInverse::Woodbury { leak, chol, s })
        } else {
            let b = CMatrix::identity(n, n) * sc + leak.adjoint() * &leak;
            let chol = Cholesky::new(b).ok_or(MimoError::NotPositiveDefinite)?;
            Ok(RegularizedInverse::Dense(chol))
        }
    }

    fn apply(&self, x: &CMatrix) -> CMatrix {
        match self {
            RegularizedInverse::Scaled(s) => x / C64::new(*s, 0.0),
            RegularizedInverse::Woodbury { leak, chol, s } => {
                let inner = chol.solve(&(leak * x));
                (x - leak.adjoint() * inner) / C64::new(*s, 0.0)
            }
            RegularizedInverse::Dense(chol) => chol.solve(x),
        }
    }
}

fn leakage_factor(factors: &[CMatrix], i: usize, n: usize) -> CMatrix {
    let others: Vec<&CMatrix> = factors
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, f)| f)
        .collect();
    vstack(&others, n)
}

/// Dominant generalized eigenpair given Gram factors. Returns the unit
/// precoder (phase-normalized) and the maximal SLNR (linear).
fn slnr_solve(factors: &[CMatrix], i: usize, n: usize, reg: f64) -> Result<(CVector, f64), MimoError> {
    let own = &factors[i];
    if own.nrows() == 0 || own.norm_squared() == 0.0 {
        let mut e = CVector::zeros(n);
        e[0] = C64::new(1.0, 0.0);
        return Ok((e, 0.0));
    }
    let inv = RegularizedInverse::new(leakage_factor(factors, i, n), reg)?;
    // T = F B^{-1} F^H is small (rows of F); its top eigenvector u gives
    // w ∝ B^{-1} F^H u with the same eigenvalue.
    let y = inv.apply(&own.adjoint());
    let t = own * &y;
    let (lambda, u) = dominant_hermitian_eigen(&t);
    let w = normalize_phase(y * u);
    Ok((w, lambda.max(0.0)))
}

fn gram_factors(channels: &[ChannelMatrix]) -> Vec<CMatrix> {
    channels.iter().map(ChannelMatrix::gram_factor).collect()
}

fn check_noise(noise_w: f64) -> Result<(), MimoError> {
    if noise_w > 0.0 && noise_w.is_finite() {
        Ok(())
    } else {
        Err(MimoError::InvalidNoise(noise_w))
    }
}

/// SLNR-maximizing unit precoder for DU `i`: the eigenvector of
/// `(M_i σ_i² I + H~_i^H H~_i)^{-1} H_i^H H_i` for its largest eigenvalue,
/// with its largest entry made real-positive.
pub fn slnr_precoder(
    channels: &[ChannelMatrix],
    i: usize,
    noise_w: f64,
    du_elements: usize,
) -> Result<CVector, MimoError> {
    slnr_precoder_with_value(channels, i, noise_w, du_elements).map(|(w, _)| w)
}

/// As [`slnr_precoder`], also returning the attained SLNR (linear), which
/// equals the dominant generalized eigenvalue.
pub fn slnr_precoder_with_value(
    channels: &[ChannelMatrix],
    i: usize,
    noise_w: f64,
    du_elements: usize,
) -> Result<(CVector, f64), MimoError> {
    let n = check_channels(channels)?;
    check_index(channels, i)?;
    check_noise(noise_w)?;
    slnr_solve(&gram_factors(channels), i, n, du_elements as f64 * noise_w)
}

/// SLNR precoders for every DU, sharing one set of Gram factors.
pub fn slnr_precoders(
    channels: &[ChannelMatrix],
    noise_w: &[f64],
    du_elements: &[usize],
) -> Result<Vec<CVector>, MimoError> {
    let n = check_channels(channels)?;
    if noise_w.len() != channels.len() || du_elements.len() != channels.len() {
        return Err(MimoError::LengthMismatch(noise_w.len().min(du_elements.len()), channels.len()));
    }
    let factors = gram_factors(channels);
    (0..channels.len())
        .map(|i| {
            check_noise(noise_w[i])?;
            slnr_solve(&factors, i, n, du_elements[i] as f64 * noise_w[i]).map(|(w, _)| w)
        })
        .collect()
}

/// Zero-forcing (block-diagonalization) unit precoders.
///
/// Each `W_i` lies in the null space of the other DUs' channels and, within
/// it, maximizes `|H_i W_i|`. Requires `N >= Σ M_i`.
pub fn zf_precoders(channels: &[ChannelMatrix]) -> Result<Vec<CVector>, MimoError> {
    let n = check_channels(channels)?;
    let required: usize = channels.iter().map(ChannelMatrix::rows).sum();
    if n < required {
        return Err(MimoError::ZfInfeasible {
            available: n,
            required,
        });
    }
    let factors = gram_factors(channels);
    (0..channels.len())
        .map(|i| Ok(zf_one(&factors, i, n)))
        .collect()
}

fn zf_one(factors: &[CMatrix], i: usize, n: usize) -> CVector {
    let leak = leakage_factor(factors, i, n);
    let q = if leak.nrows() == 0 {
        CMatrix::zeros(n, 0)
    } else {
        nalgebra::QR::new(leak.adjoint()).q()
    };
    let project = |x: &CMatrix| -> CMatrix {
        if q.ncols() == 0 {
            x.clone()
        } else {
            x - &q * (q.adjoint() * x)
        }
    };
    // E^H = P F_i^H
    let e_h = project(&factors[i].adjoint());
    if e_h.ncols() > 0 && e_h.norm_squared() > 0.0 {
        let (_, u) = dominant_hermitian_eigen(&(e_h.adjoint() * &e_h));
        let w = project(&CMatrix::from_column_slice(n, 1, (&e_h * u).as_slice()));
        if w.norm() > 0.0 {
            return normalize_phase(w.column(0).into_owned());
        }
    }
    // The DU's channel lies inside the others' row space: any null-space
    // vector is optimal.
    let p = project(&CMatrix::identity(n, n));
    let best = (0..n)
        .max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm()))
        .unwrap_or(0);
    normalize_phase(p.column(best).into_owned())
}

/// Signal-to-leakage-plus-noise ratio of precoder `w` for DU `i`, in dB.
/// A zero desired channel gives `-inf`.
pub fn slnr_value(
    channels: &[ChannelMatrix],
    i: usize,
    w: &CVector,
    noise_w: f64,
    du_elements: usize,
) -> Result<f64, MimoError> {
    Ok(crate::linear_to_db(slnr_linear(channels, i, w, noise_w, du_elements)?))
}

pub fn slnr_linear(
    channels: &[ChannelMatrix],
    i: usize,
    w: &CVector,
    noise_w: f64,
    du_elements: usize,
) -> Result<f64, MimoError> {
    check_channels(channels)?;
    check_index(channels, i)?;
    let signal = channels[i].apply(w).norm_squared();
    if signal == 0.0 {
        return Ok(0.0);
    }
    let leakage: f64 = channels
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, h)| h.apply(w).norm_squared())
        .sum();
    Ok(signal / (du_elements as f64 * noise_w + leakage))
}

/// SINR (linear) at a DU that combines with `v = H w / |H w|`.
///
/// `interferers` lists, for every other stream, the channel from its
/// transmitter to this DU, its precoder and its power.
pub fn mrc_sinr_linear(
    desired: &ChannelMatrix,
    precoder: &CVector,
    power_w: f64,
    interferers: &[(&ChannelMatrix, &CVector, f64)],
    noise_w: f64,
) -> f64 {
    let eff = desired.apply(precoder);
    let gain = eff.norm_squared();
    if gain == 0.0 {
        return 0.0;
    }
    let v = eff / C64::new(gain.sqrt(), 0.0);
    let interference: f64 = interferers
        .iter()
        .map(|(h, w, p)| p * v.dotc(&h.apply(w)).norm_sqr())
        .sum();
    power_w * gain / (noise_w + interference)
}

/// SINR in dB at DU `i` of a single-CU group with MRC reception.
pub fn sinr(
    channels: &[ChannelMatrix],
    precoders: &[CVector],
    powers: &[f64],
    noise_w: &[f64],
    i: usize,
) -> Result<f64, MimoError> {
    check_channels(channels)?;
    check_index(channels, i)?;
    let k = channels.len();
    for len in [precoders.len(), powers.len(), noise_w.len()] {
        if len != k {
            return Err(MimoError::LengthMismatch(len, k));
        }
    }
    let interferers: Vec<(&ChannelMatrix, &CVector, f64)> = (0..k)
        .filter(|&j| j != i)
        .map(|j| (&channels[i], &precoders[j], powers[j]))
        .collect();
    Ok(crate::linear_to_db(mrc_sinr_linear(
        &channels[i],
        &precoders[i],
        powers[i],
        &interferers,
        noise_w[i],
    )))
}

/// `B (1 - β) min(log2(1 + Γ), ρ_max)` for a linear SINR `Γ >= 0`.
pub fn link_rate(sinr_linear: f64, radio: &RadioParams) -> f64 {
    let se = (1.0 + sinr_linear.max(0.0)).log2().min(radio.max_spectral_efficiency);
    radio.bandwidth_hz * (1.0 - radio.loss_factor) * se
}

/// Computes precoders for every DU of one CU and splits `total_power_w`
/// equally among them.
pub fn precode_group(
    cu_id: NodeId,
    channels: &[ChannelMatrix],
    kind: PrecoderKind,
    total_power_w: f64,
    noise_w: &[f64],
    du_elements: &[usize],
) -> Result<PrecodedGroup, MimoError> {
    let precoders = match kind {
        PrecoderKind::Slnr => slnr_precoders(channels, noise_w, du_elements)?,
        PrecoderKind::Zf => zf_precoders(channels)?,
    };
    let k = channels.len();
    Ok(PrecodedGroup {
        cu_id,
        du_ids: channels.iter().map(|h| h.du_id.clone()).collect(),
        precoders,
        powers: vec![total_power_w / k as f64; k],
    })
}
