//! Angle conventions.
//!
//! Elevation is measured from the zenith (+z) in `[0, 180]` degrees and
//! azimuth counter-clockwise from +x in `[-180, 180)` degrees. A direction
//! with no horizontal component has azimuth 0.

use std::f64::consts::TAU;

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

const VERTICAL_EPS: f64 = 1e-12;

/// Unit vector for an (azimuth, elevation-from-zenith) pair in degrees.
pub fn direction_from_angles(az_deg: f64, el_deg: f64) -> Vec3 {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    Vec3::new(el.sin() * az.cos(), el.sin() * az.sin(), el.cos())
}

/// (azimuth, elevation) in degrees of a non-zero vector.
pub fn angles_from_direction(v: &Vec3) -> (f64, f64) {
    let n = v.norm();
    let horiz = v.x.hypot(v.y);
    let el = (v.z / n).clamp(-1.0, 1.0).acos().to_degrees();
    let az = if horiz <= VERTICAL_EPS * n {
        0.0
    } else {
        normalize_azimuth_deg(v.y.atan2(v.x).to_degrees())
    };
    (az, el)
}

/// Wraps an azimuth into `[-180, 180)`.
pub fn normalize_azimuth_deg(az: f64) -> f64 {
    let mut a = (az + 180.0).rem_euclid(360.0) - 180.0;
    if a >= 180.0 {
        a -= 360.0;
    }
    a
}

/// Wraps a phase into `[0, 2π)`.
pub fn wrap_phase_rad(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}
