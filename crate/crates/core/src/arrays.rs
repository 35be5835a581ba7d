//! Uniform planar arrays: element pattern, steering vectors and boresight
//! alignment.
//!
//! An array's local frame has x along the boresight, z along the array "up"
//! vector and y completing a right-handed frame. Elements lie in the local
//! y-z plane on a grid centered at the origin; element `(row, col)` sits at
//! `y = (col - (cols-1)/2) s`, `z = (row - (rows-1)/2) s` wavelengths and is
//! stored at index `row * cols + col`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::ops::Deref;

use nalgebra::Unit;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::linalg::{CVector, C64};
use crate::node::NodeId;
use crate::trace::PathRecord;

#[derive(Debug, Error, PartialEq)]
pub enum ArrayError {
    #[error("cannot align an array without any paths")]
    NoPaths,
    #[error("connected DU directions cancel out (mean norm {norm:e}); set the CU boresight manually")]
    DegenerateMean { norm: f64 },
    #[error("invalid array configuration: {0}")]
    Invalid(String),
}

/// Parabolic-in-dB element pattern with separate horizontal and vertical
/// cuts and a common attenuation floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPattern {
    pub beamwidth_deg: f64,
    pub max_attenuation_db: f64,
    pub max_gain_dbi: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern {
            beamwidth_deg: 65.0,
            max_attenuation_db: 30.0,
            max_gain_dbi: 8.0,
        }
    }
}

impl ElementPattern {
    /// Gain in dBi for a local elevation `theta` (from the array zenith) and
    /// local azimuth `phi` (from boresight), both in degrees.
    pub fn gain_db_angles(&self, theta_deg: f64, phi_deg: f64) -> f64 {
        let bw2 = self.beamwidth_deg * self.beamwidth_deg;
        let cap = self.max_attenuation_db;
        let vertical = (12.0 * (theta_deg - 90.0).powi(2) / bw2).min(cap);
        let horizontal = (12.0 * phi_deg.powi(2) / bw2).min(cap);
        self.max_gain_dbi - (vertical + horizontal).min(cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub pattern: ElementPattern,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            rows: 16,
            cols: 16,
            spacing: 0.5,
            pattern: ElementPattern::default(),
        }
    }
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        ArrayConfig {
            rows,
            cols,
            ..ArrayConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ArrayError::Invalid("rows and cols must be >= 1".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(ArrayError::Invalid("element spacing must be > 0".into()));
        }
        if !(self.pattern.beamwidth_deg > 0.0) {
            return Err(ArrayError::Invalid("beamwidth must be > 0".into()));
        }
        Ok(())
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Local (y, z) element offsets in wavelengths, row-major.
    fn offsets(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let cy = (self.cols as f64 - 1.0) / 2.0;
        let cz = (self.rows as f64 - 1.0) / 2.0;
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).map(move |c| ((c as f64 - cy) * self.spacing, (r as f64 - cz) * self.spacing))
        })
    }
}

/// An array together with its orientation in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayState {
    pub config: ArrayConfig,
    boresight: Unit<Vec3>,
    up: Unit<Vec3>,
}

impl ArrayState {
    /// Orients the array along `boresight`, with the up vector taken from
    /// global +z (or +x when the boresight is vertical).
    pub fn new(config: ArrayConfig, boresight: Vec3) -> Self {
        let b = Unit::new_normalize(boresight);
        let reference = if b.z.abs() > 1.0 - 1e-9 { Vec3::x() } else { Vec3::z() };
        Self::with_up(config, b.into_inner(), reference)
    }

    /// Orients the array with an explicit up vector, which is
    /// orthogonalized against the boresight.
    pub fn with_up(config: ArrayConfig, boresight: Vec3, up: Vec3) -> Self {
        let b = Unit::new_normalize(boresight);
        let up = Unit::new_normalize(up - b.as_ref() * b.dot(&up));
        ArrayState {
            config,
            boresight: b,
            up,
        }
    }

    pub fn boresight(&self) -> &Vec3 {
        self.boresight.as_ref()
    }

    pub fn up(&self) -> &Vec3 {
        self.up.as_ref()
    }

    /// Expresses a global direction in the array frame.
    pub fn to_local(&self, direction: &Vec3) -> Vec3 {
        let x = self.boresight.as_ref();
        let z = self.up.as_ref();
        let y = z.cross(x);
        Vec3::new(direction.dot(x), direction.dot(&y), direction.dot(z))
    }
}

/// Element gain in dBi for a unit direction given in the array frame.
pub fn element_gain_db(pattern: &ElementPattern, local: &Vec3) -> f64 {
    let theta = local.z.clamp(-1.0, 1.0).acos().to_degrees();
    let phi = if local.x == 0.0 && local.y == 0.0 {
        0.0
    } else {
        local.y.atan2(local.x).to_degrees()
    };
    pattern.gain_db_angles(theta, phi)
}

/// Per-element complex response of an array towards one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSignature(pub CVector);

impl Deref for SpatialSignature {
    type Target = CVector;

    fn deref(&self) -> &CVector {
        &self.0
    }
}

/// Steering vector with the element amplitude `sqrt(G)` folded in:
/// entry `k` is `10^(G_dB/20) exp(j 2π <p_k, d_local>)`.
pub fn steering_vector(state: &ArrayState, direction: &Vec3) -> SpatialSignature {
    let local = state.to_local(&direction.normalize());
    let amp = 10f64.powf(element_gain_db(&state.config.pattern, &local) / 20.0);
    let entries = state
        .config
        .offsets()
        .map(|(py, pz)| C64::from_polar(amp, TAU * (py * local.y + pz * local.z)))
        .collect::<Vec<_>>();
    SpatialSignature(CVector::from_vec(entries))
}

/// Strongest path, ties going to the lowest path id.
pub fn strongest_path(paths: &[PathRecord]) -> Option<&PathRecord> {
    paths.iter().min_by(|a, b| {
        b.rx_power_dbm
            .total_cmp(&a.rx_power_dbm)
            .then(a.path_id.cmp(&b.path_id))
    })
}

/// Points a DU array at the arrival direction of its strongest path.
pub fn align_du(config: ArrayConfig, paths: &[PathRecord]) -> Result<ArrayState, ArrayError> {
    let best = strongest_path(paths).ok_or(ArrayError::NoPaths)?;
    Ok(ArrayState::new(config, best.aoa()))
}

/// Points a CU array along the normalized sum of the departure directions of
/// each connected DU's strongest path.
pub fn align_cu(
    config: ArrayConfig,
    paths_by_du: &BTreeMap<NodeId, Vec<PathRecord>>,
) -> Result<ArrayState, ArrayError> {
    let mut sum = Vec3::zeros();
    let mut any = false;
    for paths in paths_by_du.values() {
        if let Some(best) = strongest_path(paths) {
            sum += best.aod();
            any = true;
        }
    }
    if !any {
        return Err(ArrayError::NoPaths);
    }
    let norm = sum.norm();
    if norm < 1e-9 {
        return Err(ArrayError::DegenerateMean { norm });
    }
    Ok(ArrayState::new(config, sum / norm))
}
