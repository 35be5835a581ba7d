//! Narrowband MIMO channel synthesis from path records.
//!
//! A channel is the sum over paths of
//! `a_DU(AoA) a_CU(AoD)^T sqrt(g) exp(j (2π f δ + φ))`. It is kept in
//! factored form `H = L R`, where column `k` of `L` is the DU steering
//! vector of path `k` and row `k` of `R` is the scaled CU steering vector,
//! so rank and cost scale with the number of paths rather than the array
//! sizes. Dense channels use `L = I`.

use std::f64::consts::TAU;

use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::arrays::{steering_vector, ArrayState};
use crate::linalg::{all_finite, CMatrix, CVector, C64};
use crate::node::NodeId;
use crate::trace::{path_gain_linear, PathRecord};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("cannot synthesize a channel from an empty path list")]
    Empty,
    #[error("path {path_id} belongs to {cu}-{du}, expected {expected_cu}-{expected_du}")]
    MixedPair {
        path_id: u64,
        cu: NodeId,
        du: NodeId,
        expected_cu: NodeId,
        expected_du: NodeId,
    },
    #[error("channel {cu}-{du} has non-finite entries")]
    NonFinite { cu: NodeId, du: NodeId },
}

#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub cu_id: NodeId,
    pub du_id: NodeId,
    /// `M x r`; `None` means the identity (`r = M`).
    left: Option<CMatrix>,
    /// `r x N`
    right: CMatrix,
}

impl ChannelMatrix {
    pub fn from_dense(cu_id: NodeId, du_id: NodeId, h: CMatrix) -> Self {
        ChannelMatrix {
            cu_id,
            du_id,
            left: None,
            right: h,
        }
    }

    /// `H = left * right`.
    pub fn from_factors(cu_id: NodeId, du_id: NodeId, left: CMatrix, right: CMatrix) -> Self {
        assert_eq!(left.ncols(), right.nrows(), "factor inner dimensions differ");
        ChannelMatrix {
            cu_id,
            du_id,
            left: Some(left),
            right,
        }
    }

    /// DU element count (M).
    pub fn rows(&self) -> usize {
        self.left.as_ref().map_or(self.right.nrows(), |l| l.nrows())
    }

    /// CU element count (N).
    pub fn cols(&self) -> usize {
        self.right.ncols()
    }

    pub fn dense(&self) -> CMatrix {
        match &self.left {
            Some(l) => l * &self.right,
            None => self.right.clone(),
        }
    }

    /// `H v`
    pub fn apply(&self, v: &CVector) -> CVector {
        let r = &self.right * v;
        match &self.left {
            Some(l) => l * r,
            None => r,
        }
    }

    /// Returns a scaled copy, `c H`.
    pub fn scaled(&self, c: C64) -> Self {
        ChannelMatrix {
            right: &self.right * c,
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.right) && self.left.as_ref().is_none_or(all_finite)
    }

    /// A matrix `F` with at most `min(M, paths)` rows such that
    /// `F^H F = H^H H`. Precoding only needs this Gram factor.
    pub fn gram_factor(&self) -> CMatrix {
        let Some(left) = &self.left else {
            return self.right.clone();
        };
        let gram = left.adjoint() * left;
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > top * 1e-13 && eig.eigenvalues[k] > 0.0)
            .collect();
        let mut f = CMatrix::zeros(keep.len(), self.cols());
        for (row, &k) in keep.iter().enumerate() {
            let scale = C64::new(eig.eigenvalues[k].sqrt(), 0.0);
            let v = eig.eigenvectors.column(k);
            // row = sqrt(λ_k) v_k^H R
            let r = (v.adjoint() * &self.right) * scale;
            f.row_mut(row).copy_from(&r);
        }
        f
    }

    /// Upper bound on the rank: the number of factored terms.
    pub fn rank_bound(&self) -> usize {
        self.right.nrows()
    }
}

/// Builds the channel between one CU and one DU from their shared paths and
/// the aligned arrays. `carrier_hz` enters through the `2π f δ` phase term;
/// the gain `g` is taken relative to isotropic antennas at `tx_power_dbm`.
pub fn synthesize_channel(
    paths: &[PathRecord],
    du_state: &ArrayState,
    cu_state: &ArrayState,
    carrier_hz: f64,
    tx_power_dbm: f64,
) -> Result<ChannelMatrix, ChannelError> {
    let first = paths.first().ok_or(ChannelError::Empty)?;
    if let Some(p) = paths
        .iter()
        .find(|p| p.cu_id != first.cu_id || p.du_id != first.du_id)
    {
        return Err(ChannelError::MixedPair {
            path_id: p.path_id,
            cu: p.cu_id.clone(),
            du: p.du_id.clone(),
            expected_cu: first.cu_id.clone(),
            expected_du: first.du_id.clone(),
        });
    }
    let m = du_state.config.elements();
    let n = cu_state.config.elements();
    let mut left = CMatrix::zeros(m, paths.len());
    let mut right = CMatrix::zeros(paths.len(), n);
    for (k, p) in paths.iter().enumerate() {
        let a_du = steering_vector(du_state, &p.aoa());
        let a_cu = steering_vector(cu_state, &p.aod());
        let phase = TAU * (carrier_hz * p.delay_s).fract() + p.phase_rad;
        let coeff = C64::from_polar(path_gain_linear(p, tx_power_dbm).sqrt(), phase);
        left.set_column(k, &a_du.0);
        right.set_row(k, &(a_cu.0.transpose() * coeff));
    }
    let h = ChannelMatrix::from_factors(first.cu_id.clone(), first.du_id.clone(), left, right);
    if !h.is_finite() {
        return Err(ChannelError::NonFinite {
            cu: h.cu_id,
            du: h.du_id,
        });
    }
    Ok(h)
}

/// `10 log10(Σ |H_ij|²)`, `-inf` for the zero matrix.
pub fn channel_frobenius_gain(h: &ChannelMatrix) -> f64 {
    crate::linear_to_db(h.gram_factor().norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::ArrayConfig;
    use crate::geometry::Vec3;
    use std::f64::consts::PI;

    fn path(id: u64, power: f64, az: f64, el: f64, delay: f64, phase: f64) -> PathRecord {
        PathRecord {
            path_id: id,
            cu_id: "CU1".into(),
            du_id: "DU1".into(),
            rx_power_dbm: power,
            aod_az_deg: az,
            aod_el_deg: el,
            aoa_az_deg: crate::geometry::normalize_azimuth_deg(az + 180.0),
            aoa_el_deg: 180.0 - el,
            delay_s: delay,
            phase_rad: phase,
        }
    }

    fn states() -> (ArrayState, ArrayState) {
        (
            ArrayState::new(ArrayConfig::new(2, 3), Vec3::new(-1.0, -0.2, 0.1)),
            ArrayState::new(ArrayConfig::new(3, 3), Vec3::new(1.0, 0.3, -0.1)),
        )
    }

    #[test]
    fn single_path_is_outer_product() {
        let (du, cu) = states();
        let p = path(1, 43.0, 10.0, 95.0, 0.0, 0.0);
        let h = synthesize_channel(std::slice::from_ref(&p), &du, &cu, 140e9, 43.0).unwrap();
        let expect = steering_vector(&du, &p.aoa()).0 * steering_vector(&cu, &p.aod()).0.transpose();
        assert!((h.dense() - &expect).camax() < 1e-12);

        let flipped = path(1, 43.0, 10.0, 95.0, 0.0, PI);
        let h = synthesize_channel(&[flipped], &du, &cu, 140e9, 43.0).unwrap();
        assert!((h.dense() + expect).camax() < 1e-12);
    }

    #[test]
    fn antiphase_pair_cancels() {
        let (du, cu) = states();
        let a = path(1, 43.0, 10.0, 95.0, 0.0, 0.0);
        let b = PathRecord {
            path_id: 2,
            phase_rad: PI,
            ..a.clone()
        };
        let h = synthesize_channel(&[a, b], &du, &cu, 140e9, 43.0).unwrap();
        assert!(h.dense().camax() < 1e-12);
        assert!(channel_frobenius_gain(&h) < -250.0);
    }

    #[test]
    fn errors() {
        let (du, cu) = states();
        assert!(matches!(
            synthesize_channel(&[], &du, &cu, 140e9, 43.0),
            Err(ChannelError::Empty)
        ));
        let a = path(1, -60.0, 10.0, 95.0, 1e-7, 0.0);
        let mut b = path(2, -60.0, 10.0, 95.0, 1e-7, 0.0);
        b.du_id = "DU2".into();
        assert!(matches!(
            synthesize_channel(&[a, b], &du, &cu, 140e9, 43.0),
            Err(ChannelError::MixedPair { path_id: 2, .. })
        ));
    }

    #[test]
    fn frobenius_examples() {
        let eye = CMatrix::identity(2, 2);
        let h = ChannelMatrix::from_dense("C".into(), "D".into(), eye);
        assert!((channel_frobenius_gain(&h) - 10.0 * 2f64.log10()).abs() < 1e-12);
        let zero = ChannelMatrix::from_dense("C".into(), "D".into(), CMatrix::zeros(2, 3));
        assert_eq!(channel_frobenius_gain(&zero), f64::NEG_INFINITY);
    }

    #[test]
    fn gram_factor_reproduces_gram() {
        let (du, cu) = states();
        let paths = [
            path(1, -60.0, 10.0, 95.0, 1.1e-7, 0.3),
            path(2, -65.0, -20.0, 100.0, 1.3e-7, 1.3),
            path(3, -70.0, 40.0, 80.0, 1.7e-7, 2.3),
        ];
        let h = synthesize_channel(&paths, &du, &cu, 140e9, 43.0).unwrap();
        let f = h.gram_factor();
        let d = h.dense();
        let g1 = d.adjoint() * &d;
        let g2 = f.adjoint() * &f;
        assert!((g1 - &g2).camax() < 1e-12 * g2.camax());
        assert!(f.nrows() <= 3);
    }
}
