//! Path-record files, node inventories and the [`Scenario`] they form.
//!
//! The canonical trace file is UTF-8 CSV with `\n` line endings and the
//! header [`TRACE_HEADER`]. Phases are written in degrees and held in radians
//! in memory. Node inventories use [`NODES_HEADER`].

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_azimuth_deg, wrap_phase_rad, Vec3};
use crate::node::{Node, NodeId, NodeKind};
use crate::{db_to_linear, dbm_to_watts};

pub const TRACE_HEADER: &str =
    "path_id,cu_id,du_id,rx_power_dbm,aod_az_deg,aod_el_deg,aoa_az_deg,aoa_el_deg,delay_s,phase_deg";
pub const NODES_HEADER: &str = "node_id,kind,x_m,y_m,z_m";

const TRACE_COLUMNS: [&str; 10] = [
    "path_id",
    "cu_id",
    "du_id",
    "rx_power_dbm",
    "aod_az_deg",
    "aod_el_deg",
    "aoa_az_deg",
    "aoa_el_deg",
    "delay_s",
    "phase_deg",
];
const NODE_COLUMNS: [&str; 5] = ["node_id", "kind", "x_m", "y_m", "z_m"];

/// Default cap on the number of paths kept per CU-DU pair.
pub const DEFAULT_MAX_PATHS: usize = 25;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: header must be exactly `{expected}`")]
    BadHeader { line: u64, expected: &'static str },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {message}")]
    Malformed {
        line: u64,
        column: &'static str,
        message: String,
    },
    #[error("path {path_id}: {message}")]
    Invalid { path_id: u64, message: String },
    #[error("path {path_id}: unknown {kind} id `{id}`")]
    UnknownNode {
        path_id: u64,
        kind: NodeKind,
        id: NodeId,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("node `{id}`: {message}")]
    InvalidNode { id: NodeId, message: String },
    #[error("pair {cu}-{du} has {count} paths, more than the maximum of {max}")]
    TooManyPaths {
        cu: NodeId,
        du: NodeId,
        count: usize,
        max: usize,
    },
    #[error("invalid radio parameters: {0}")]
    InvalidRadio(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One propagation path between a CU and a DU.
///
/// `rx_power_dbm` assumes isotropic antennas at both ends. Elevations are
/// from zenith; `aoa_*` points from the DU back towards where the energy
/// arrives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path_id: u64,
    pub cu_id: NodeId,
    pub du_id: NodeId,
    pub rx_power_dbm: f64,
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub delay_s: f64,
    /// Radians in `[0, 2π)`.
    pub phase_rad: f64,
}

impl PathRecord {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |message: String| TraceError::Invalid {
            path_id: self.path_id,
            message,
        };
        for (name, el) in [("aod_el_deg", self.aod_el_deg), ("aoa_el_deg", self.aoa_el_deg)] {
            if !(0.0..=180.0).contains(&el) {
                return Err(bad(format!("{name} = {el} outside [0, 180]")));
            }
        }
        for (name, az) in [("aod_az_deg", self.aod_az_deg), ("aoa_az_deg", self.aoa_az_deg)] {
            if !(-180.0..180.0).contains(&az) {
                return Err(bad(format!("{name} = {az} outside [-180, 180)")));
            }
        }
        if !self.rx_power_dbm.is_finite() {
            return Err(bad("rx_power_dbm is not finite".into()));
        }
        if !(self.delay_s >= 0.0 && self.delay_s.is_finite()) {
            return Err(bad(format!("delay_s = {} must be finite and >= 0", self.delay_s)));
        }
        if !(0.0..std::f64::consts::TAU).contains(&self.phase_rad) {
            return Err(bad(format!("phase {} rad outside [0, 2π)", self.phase_rad)));
        }
        Ok(())
    }

    pub fn aod(&self) -> Vec3 {
        crate::geometry::direction_from_angles(self.aod_az_deg, self.aod_el_deg)
    }

    pub fn aoa(&self) -> Vec3 {
        crate::geometry::direction_from_angles(self.aoa_az_deg, self.aoa_el_deg)
    }
}

/// Linear path gain relative to isotropic antennas,
/// `10^((rx_power - tx_power) / 10)`.
pub fn path_gain_linear(record: &PathRecord, tx_power_dbm: f64) -> f64 {
    db_to_linear(record.rx_power_dbm - tx_power_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    /// Noise power given directly, dBm.
    Direct { noise_dbm: f64 },
    /// Thermal floor -174 dBm/Hz over the bandwidth plus a noise figure.
    Thermal { noise_figure_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub rate_target_bps: f64,
    /// β in the rate formula.
    pub loss_factor: f64,
    /// ρ_max, bits/s/Hz.
    pub max_spectral_efficiency: f64,
    pub noise: NoiseSpec,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            carrier_hz: 140e9,
            bandwidth_hz: 2e9,
            tx_power_dbm: 43.0,
            rate_target_bps: 10e9,
            loss_factor: 0.15,
            max_spectral_efficiency: 5.9,
            noise: NoiseSpec::Thermal {
                noise_figure_db: 7.0,
            },
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), TraceError> {
        let err = |m: &str| Err(TraceError::InvalidRadio(m.to_owned()));
        if !(self.carrier_hz > 0.0) {
            return err("carrier frequency must be > 0");
        }
        if !(self.bandwidth_hz > 0.0) {
            return err("bandwidth must be > 0");
        }
        if !(0.0..1.0).contains(&self.loss_factor) {
            return err("loss factor must lie in [0, 1)");
        }
        if !(self.max_spectral_efficiency > 0.0) {
            return err("maximum spectral efficiency must be > 0");
        }
        if !self.tx_power_dbm.is_finite() {
            return err("transmit power must be finite");
        }
        if !(self.rate_target_bps >= 0.0) {
            return err("rate target must be >= 0");
        }
        if !self.noise_dbm().is_finite() {
            return err("noise power must be finite");
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn noise_dbm(&self) -> f64 {
        match self.noise {
            NoiseSpec::Direct { noise_dbm } => noise_dbm,
            NoiseSpec::Thermal { noise_figure_db } => {
                -174.0 + 10.0 * self.bandwidth_hz.log10() + noise_figure_db
            }
        }
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm())
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// `B (1 - β) ρ_max`, the largest achievable link rate.
    pub fn peak_rate_bps(&self) -> f64 {
        self.bandwidth_hz * (1.0 - self.loss_factor) * self.max_spectral_efficiency
    }

    /// Smallest linear SINR at which the rate reaches its cap, `2^ρ_max - 1`.
    pub fn cap_sinr_linear(&self) -> f64 {
        self.max_spectral_efficiency.exp2() - 1.0
    }
}

/// Nodes, paths and radio parameters of one planning problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub nodes: Vec<Node>,
    pub paths: Vec<PathRecord>,
    pub radio: RadioParams,
    pub max_paths_per_pair: usize,
}

impl Scenario {
    /// Builds a scenario, checking id uniqueness, referential integrity of
    /// every path, record ranges and the per-pair path cap.
    pub fn new(
        nodes: Vec<Node>,
        paths: Vec<PathRecord>,
        radio: RadioParams,
        max_paths_per_pair: usize,
    ) -> Result<Self, TraceError> {
        radio.validate()?;
        let mut kinds = BTreeMap::new();
        for n in &nodes {
            if kinds.insert(n.id.clone(), n.kind).is_some() {
                return Err(TraceError::DuplicateNode(n.id.clone()));
            }
            if !(n.position.z >= 0.0) || !n.position.iter().all(|c| c.is_finite()) {
                return Err(TraceError::InvalidNode {
                    id: n.id.clone(),
                    message: "position must be finite with z >= 0".into(),
                });
            }
        }
        let mut per_pair: BTreeMap<(&NodeId, &NodeId), usize> = BTreeMap::new();
        for p in &paths {
            p.validate()?;
            for (id, kind) in [(&p.cu_id, NodeKind::Cu), (&p.du_id, NodeKind::Du)] {
                if kinds.get(id) != Some(&kind) {
                    return Err(TraceError::UnknownNode {
                        path_id: p.path_id,
                        kind,
                        id: id.clone(),
                    });
                }
            }
            *per_pair.entry((&p.cu_id, &p.du_id)).or_default() += 1;
        }
        if let Some(((cu, du), &count)) = per_pair.iter().find(|(_, &c)| c > max_paths_per_pair) {
            return Err(TraceError::TooManyPaths {
                cu: (*cu).clone(),
                du: (*du).clone(),
                count,
                max: max_paths_per_pair,
            });
        }
        Ok(Scenario {
            nodes,
            paths,
            radio,
            max_paths_per_pair,
        })
    }

    pub fn cu_ids(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Cu)
    }

    pub fn du_ids(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Du)
    }

    fn ids_of(&self, kind: NodeKind) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Paths grouped by `(cu, du)` pair, in file order within a pair.
    pub fn paths_by_pair(&self) -> BTreeMap<(NodeId, NodeId), Vec<PathRecord>> {
        let mut map: BTreeMap<(NodeId, NodeId), Vec<PathRecord>> = BTreeMap::new();
        for p in &self.paths {
            map.entry((p.cu_id.clone(), p.du_id.clone()))
                .or_default()
                .push(p.clone());
        }
        map
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn check_header(
    rec: Option<csv::StringRecord>,
    columns: &[&str],
    expected: &'static str,
) -> Result<(), TraceError> {
    match rec {
        Some(h) if h.iter().eq(columns.iter().copied()) => Ok(()),
        Some(h) => Err(TraceError::BadHeader {
            line: line_of(&h),
            expected,
        }),
        None => Err(TraceError::BadHeader { line: 1, expected }),
    }
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    columns: &[&'static str],
) -> Result<T, TraceError>
where
    T::Err: std::fmt::Display,
{
    let raw = &rec[idx];
    raw.parse::<T>().map_err(|e| TraceError::Malformed {
        line: line_of(rec),
        column: columns[idx],
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn id_field(
    rec: &csv::StringRecord,
    idx: usize,
    columns: &[&'static str],
) -> Result<NodeId, TraceError> {
    let raw = &rec[idx];
    if raw.is_empty() {
        return Err(TraceError::Malformed {
            line: line_of(rec),
            column: columns[idx],
            message: "empty node id".into(),
        });
    }
    Ok(NodeId::new(raw))
}

/// Parses a canonical trace file. Azimuths are wrapped into `[-180, 180)` and
/// phases converted from degrees to radians in `[0, 2π)`; elevations outside
/// `[0, 180]` are rejected. Node references are checked by [`Scenario::new`].
pub fn parse_trace<R: Read>(input: R) -> Result<Vec<PathRecord>, TraceError> {
    let mut reader = csv_reader(input);
    let mut rows = reader.records();
    check_header(rows.next().transpose()?, &TRACE_COLUMNS, TRACE_HEADER)?;
    let mut out = Vec::new();
    for rec in rows {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != TRACE_COLUMNS.len() {
            return Err(TraceError::FieldCount {
                line: line_of(&rec),
                expected: TRACE_COLUMNS.len(),
                found: rec.len(),
            });
        }
        let c = &TRACE_COLUMNS;
        let finite = |idx: usize| -> Result<f64, TraceError> {
            let v: f64 = field(&rec, idx, c)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(TraceError::Malformed {
                    line: line_of(&rec),
                    column: c[idx],
                    message: format!("value `{}` is not finite", &rec[idx]),
                })
            }
        };
        let elevation = |idx: usize| -> Result<f64, TraceError> {
            let v = finite(idx)?;
            if (0.0..=180.0).contains(&v) {
                Ok(v)
            } else {
                Err(TraceError::Malformed {
                    line: line_of(&rec),
                    column: c[idx],
                    message: format!("elevation {v} outside [0, 180]"),
                })
            }
        };
        let delay_s = finite(8)?;
        if delay_s < 0.0 {
            return Err(TraceError::Malformed {
                line: line_of(&rec),
                column: c[8],
                message: format!("negative delay {delay_s}"),
            });
        }
        out.push(PathRecord {
            path_id: field(&rec, 0, c)?,
            cu_id: id_field(&rec, 1, c)?,
            du_id: id_field(&rec, 2, c)?,
            rx_power_dbm: finite(3)?,
            aod_az_deg: normalize_azimuth_deg(finite(4)?),
            aod_el_deg: elevation(5)?,
            aoa_az_deg: normalize_azimuth_deg(finite(6)?),
            aoa_el_deg: elevation(7)?,
            delay_s,
            phase_rad: wrap_phase_rad(finite(9)?.to_radians()),
        });
    }
    Ok(out)
}

/// Writes records in the canonical format, one line per record in the order
/// given.
pub fn serialize_trace(records: &[PathRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:e},{}\n",
            r.path_id,
            r.cu_id,
            r.du_id,
            r.rx_power_dbm,
            r.aod_az_deg,
            r.aod_el_deg,
            r.aoa_az_deg,
            r.aoa_el_deg,
            r.delay_s,
            r.phase_rad.to_degrees(),
        ));
    }
    out
}

pub fn parse_nodes<R: Read>(input: R) -> Result<Vec<Node>, TraceError> {
    let mut reader = csv_reader(input);
    let mut rows = reader.records();
    check_header(rows.next().transpose()?, &NODE_COLUMNS, NODES_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rows {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != NODE_COLUMNS.len() {
            return Err(TraceError::FieldCount {
                line: line_of(&rec),
                expected: NODE_COLUMNS.len(),
                found: rec.len(),
            });
        }
        let c = &NODE_COLUMNS;
        let id = id_field(&rec, 0, c)?;
        if !seen.insert(id.clone()) {
            return Err(TraceError::DuplicateNode(id));
        }
        let kind = rec[1].parse::<NodeKind>().map_err(|message| TraceError::Malformed {
            line: line_of(&rec),
            column: c[1],
            message,
        })?;
        let position = Vec3::new(field(&rec, 2, c)?, field(&rec, 3, c)?, field(&rec, 4, c)?);
        if !(position.z >= 0.0) {
            return Err(TraceError::Malformed {
                line: line_of(&rec),
                column: c[4],
                message: format!("height {} must be >= 0", position.z),
            });
        }
        out.push(Node { id, kind, position });
    }
    Ok(out)
}

pub fn serialize_nodes(nodes: &[Node]) -> String {
    let mut out = String::from(NODES_HEADER);
    out.push('\n');
    for n in nodes {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            n.id, n.kind, n.position.x, n.position.y, n.position.z
        ));
    }
    out
}
