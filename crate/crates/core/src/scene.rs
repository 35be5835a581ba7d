//! Synthetic rooftop deployments and a simple propagation model standing in
//! for a full ray tracer: free-space loss with linear atmospheric absorption,
//! plus optional single-bounce specular reflections off vertical walls.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{angles_from_direction, wrap_phase_rad, Vec3};
use crate::node::{Node, NodeKind};
use crate::trace::{PathRecord, RadioParams, DEFAULT_MAX_PATHS};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("scene has {available} rooftops but {requested} nodes were requested")]
    Capacity { requested: usize, available: usize },
    #[error("invalid scene configuration: {0}")]
    Invalid(String),
}

/// Axis-aligned box standing on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Building {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub height: f64,
}

impl Building {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64, height: f64) -> Result<Self, SceneError> {
        if !(max_x > min_x && max_y > min_y) {
            return Err(SceneError::Invalid("building footprint must have positive area".into()));
        }
        if !(height > 0.0) {
            return Err(SceneError::Invalid("building height must be > 0".into()));
        }
        Ok(Building {
            min_x,
            min_y,
            max_x,
            max_y,
            height,
        })
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    /// True if `p` lies strictly inside the box.
    pub fn contains(&self, p: &Vec3) -> bool {
        p.x > self.min_x
            && p.x < self.max_x
            && p.y > self.min_y
            && p.y < self.max_y
            && p.z > 0.0
            && p.z < self.height
    }

    /// True if the open segment `a`-`b` passes through the interior of the
    /// box. Touching a face (e.g. an endpoint on the roof) is not blockage.
    pub fn blocks(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        let lo = [self.min_x, self.min_y, 0.0];
        let hi = [self.max_x, self.max_y, self.height];
        for axis in 0..3 {
            if d[axis] == 0.0 {
                if !(a[axis] > lo[axis] && a[axis] < hi[axis]) {
                    return false;
                }
            } else {
                let ta = (lo[axis] - a[axis]) / d[axis];
                let tb = (hi[axis] - a[axis]) / d[axis];
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
                if t0 >= t1 {
                    return false;
                }
            }
        }
        t0 < t1
    }

    /// The four vertical walls as (axis, plane coordinate, outward sign).
    fn walls(&self) -> [(usize, f64, f64); 4] {
        [
            (0, self.min_x, -1.0),
            (0, self.max_x, 1.0),
            (1, self.min_y, -1.0),
            (1, self.max_y, 1.0),
        ]
    }
}

/// True iff the open segment `a`-`b` intersects no building volume.
pub fn line_of_sight(a: &Vec3, b: &Vec3, buildings: &[Building]) -> bool {
    !buildings.iter().any(|bld| bld.blocks(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationModel {
    /// Linear absorption, dB per meter.
    pub absorption_db_per_m: f64,
    pub reflections: bool,
    pub reflection_loss_db: f64,
    pub max_paths_per_pair: usize,
}

impl Default for PropagationModel {
    fn default() -> Self {
        PropagationModel {
            absorption_db_per_m: 0.0015,
            reflections: true,
            reflection_loss_db: 10.0,
            max_paths_per_pair: DEFAULT_MAX_PATHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub area_m: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Building side as a fraction of its grid cell, `(min, max)`.
    pub footprint_fraction: (f64, f64),
    pub min_height_m: f64,
    pub max_height_m: f64,
    pub cu_count: usize,
    pub du_count: usize,
    /// Mounting heights above the roof.
    pub cu_mast_m: f64,
    pub du_mast_m: f64,
    pub seed: u64,
    pub propagation: PropagationModel,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            area_m: 500.0,
            grid_rows: 10,
            grid_cols: 10,
            footprint_fraction: (0.45, 0.7),
            min_height_m: 10.0,
            max_height_m: 60.0,
            cu_count: 8,
            du_count: 36,
            cu_mast_m: 4.0,
            du_mast_m: 2.0,
            seed: 1,
            propagation: PropagationModel::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::Invalid(m.to_owned()));
        if self.cu_count == 0 || self.du_count == 0 {
            return bad("CU and DU counts must be >= 1");
        }
        if !(self.area_m > 0.0) || self.grid_rows == 0 || self.grid_cols == 0 {
            return bad("area and building grid must be non-empty");
        }
        let (fmin, fmax) = self.footprint_fraction;
        if !(fmin > 0.0 && fmin <= fmax && fmax <= 1.0) {
            return bad("footprint fraction must satisfy 0 < min <= max <= 1");
        }
        if !(self.min_height_m > 0.0 && self.min_height_m <= self.max_height_m) {
            return bad("building heights must satisfy 0 < min <= max");
        }
        if !(self.cu_mast_m > self.du_mast_m && self.du_mast_m >= 0.0) {
            return bad("CU mast must be taller than DU mast, DU mast >= 0");
        }
        if !(self.propagation.absorption_db_per_m >= 0.0) || self.propagation.max_paths_per_pair == 0 {
            return bad("absorption must be >= 0 and max paths >= 1");
        }
        Ok(())
    }
}

/// Lays out a jittered grid of buildings and puts CUs on the tallest roofs
/// and DUs on a random selection of the remaining ones.
///
/// Every CU sits strictly higher than every DU. Output depends only on
/// `config`.
pub fn generate_scene(config: &SceneConfig) -> Result<(Vec<Building>, Vec<Node>), SceneError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cell_x = config.area_m / config.grid_cols as f64;
    let cell_y = config.area_m / config.grid_rows as f64;
    let (fmin, fmax) = config.footprint_fraction;
    let mut buildings = Vec::with_capacity(config.grid_rows * config.grid_cols);
    for r in 0..config.grid_rows {
        for c in 0..config.grid_cols {
            let w = cell_x * rng.gen_range(fmin..=fmax);
            let d = cell_y * rng.gen_range(fmin..=fmax);
            let x0 = c as f64 * cell_x + rng.gen_range(0.0..=(cell_x - w));
            let y0 = r as f64 * cell_y + rng.gen_range(0.0..=(cell_y - d));
            let h = rng.gen_range(config.min_height_m..=config.max_height_m);
            buildings.push(Building::new(x0, y0, x0 + w, y0 + d, h)?);
        }
    }
    place_nodes(config, buildings, &mut rng)
}

/// Places nodes on a fixed building list with the same rule as
/// [`generate_scene`]; the grid and footprint settings are ignored.
pub fn place_on_buildings(
    config: &SceneConfig,
    buildings: Vec<Building>,
) -> Result<(Vec<Building>, Vec<Node>), SceneError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    place_nodes(config, buildings, &mut rng)
}

fn place_nodes(
    config: &SceneConfig,
    buildings: Vec<Building>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Building>, Vec<Node>), SceneError> {
    let requested = config.cu_count + config.du_count;
    if requested > buildings.len() {
        return Err(SceneError::Capacity {
            requested,
            available: buildings.len(),
        });
    }
    let mut by_height: Vec<usize> = (0..buildings.len()).collect();
    by_height.sort_by(|&a, &b| buildings[b].height.total_cmp(&buildings[a].height).then(a.cmp(&b)));
    let mut cu_sites = by_height[..config.cu_count].to_vec();
    let mut rest = by_height[config.cu_count..].to_vec();
    rest.shuffle(rng);
    let mut du_sites = rest[..config.du_count].to_vec();
    cu_sites.sort_unstable();
    du_sites.sort_unstable();

    let rooftop = |idx: usize, mast: f64| {
        let b = &buildings[idx];
        let (x, y) = b.center();
        Vec3::new(x, y, b.height + mast)
    };
    let mut nodes = Vec::with_capacity(requested);
    for (k, &idx) in cu_sites.iter().enumerate() {
        nodes.push(Node::new(format!("CU{}", k + 1), NodeKind::Cu, rooftop(idx, config.cu_mast_m)));
    }
    for (k, &idx) in du_sites.iter().enumerate() {
        nodes.push(Node::new(format!("DU{}", k + 1), NodeKind::Du, rooftop(idx, config.du_mast_m)));
    }
    Ok((buildings, nodes))
}

/// Free-space loss `20 log10(4πd/λ)` in dB.
pub fn free_space_loss_db(distance_m: f64, wavelength_m: f64) -> f64 {
    20.0 * (4.0 * PI * distance_m / wavelength_m).log10()
}

/// Path gain in dB (negative for a loss) over `distance_m`, excluding any
/// reflection loss.
pub fn path_gain_db(distance_m: f64, wavelength_m: f64, absorption_db_per_m: f64) -> f64 {
    -(free_space_loss_db(distance_m, wavelength_m) + absorption_db_per_m * distance_m)
}

struct Candidate {
    departure: Vec3,
    arrival: Vec3,
    length: f64,
    extra_loss_db: f64,
}

/// Emits path records for every CU-DU pair: the direct path when it has line
/// of sight and, if enabled, one specular bounce per visible vertical wall.
/// At most `max_paths_per_pair` records per pair are kept, strongest first.
/// Path ids are assigned sequentially from 1 in (CU, DU) order.
pub fn synthesize_paths(
    nodes: &[Node],
    buildings: &[Building],
    radio: &RadioParams,
    model: &PropagationModel,
) -> Vec<PathRecord> {
    let lambda = radio.wavelength_m();
    let mut cus: Vec<&Node> = nodes.iter().filter(|n| n.kind == NodeKind::Cu).collect();
    let mut dus: Vec<&Node> = nodes.iter().filter(|n| n.kind == NodeKind::Du).collect();
    cus.sort_by(|a, b| a.id.cmp(&b.id));
    dus.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = Vec::new();
    let mut next_id = 1u64;
    for cu in &cus {
        for du in &dus {
            let mut cands = pair_candidates(&cu.position, &du.position, buildings, model);
            cands.sort_by(|a, b| {
                let ga = path_gain_db(a.length, lambda, model.absorption_db_per_m) - a.extra_loss_db;
                let gb = path_gain_db(b.length, lambda, model.absorption_db_per_m) - b.extra_loss_db;
                gb.total_cmp(&ga)
            });
            cands.truncate(model.max_paths_per_pair);
            for c in cands {
                let gain_db = path_gain_db(c.length, lambda, model.absorption_db_per_m) - c.extra_loss_db;
                let (aod_az, aod_el) = angles_from_direction(&c.departure);
                let (aoa_az, aoa_el) = angles_from_direction(&c.arrival);
                out.push(PathRecord {
                    path_id: next_id,
                    cu_id: cu.id.clone(),
                    du_id: du.id.clone(),
                    rx_power_dbm: radio.tx_power_dbm + gain_db,
                    aod_az_deg: aod_az,
                    aod_el_deg: aod_el,
                    aoa_az_deg: aoa_az,
                    aoa_el_deg: aoa_el,
                    delay_s: c.length / SPEED_OF_LIGHT,
                    phase_rad: wrap_phase_rad(-TAU * (c.length / lambda).fract()),
                });
                next_id += 1;
            }
        }
    }
    out
}

fn pair_candidates(cu: &Vec3, du: &Vec3, buildings: &[Building], model: &PropagationModel) -> Vec<Candidate> {
    let mut out = Vec::new();
    let direct = du - cu;
    if direct.norm() > 0.0 && line_of_sight(cu, du, buildings) {
        out.push(Candidate {
            departure: direct.normalize(),
            arrival: -direct.normalize(),
            length: direct.norm(),
            extra_loss_db: 0.0,
        });
    }
    if !model.reflections {
        return out;
    }
    for b in buildings {
        for (axis, plane, outward) in b.walls() {
            // both ends strictly on the outer side of the wall
            if (cu[axis] - plane) * outward <= 0.0 || (du[axis] - plane) * outward <= 0.0 {
                continue;
            }
            let mut image = *du;
            image[axis] = 2.0 * plane - du[axis];
            let t = (plane - cu[axis]) / (image[axis] - cu[axis]);
            let hit = cu + (image - cu) * t;
            let other = 1 - axis;
            let (lo, hi) = if other == 0 { (b.min_x, b.max_x) } else { (b.min_y, b.max_y) };
            if !(hit[other] > lo && hit[other] < hi && hit.z > 0.0 && hit.z < b.height) {
                continue;
            }
            if !line_of_sight(cu, &hit, buildings) || !line_of_sight(&hit, du, buildings) {
                continue;
            }
            out.push(Candidate {
                departure: (hit - cu).normalize(),
                arrival: (hit - du).normalize(),
                length: (image - cu).norm(),
                extra_loss_db: model.reflection_loss_db,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bld(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> Building {
        Building::new(x0, y0, x1, y1, h).unwrap()
    }

    #[test]
    fn determinism() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg).unwrap();
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_counts_and_height_ordering() {
        let (_, nodes) = generate_scene(&SceneConfig::default()).unwrap();
        let cu: Vec<_> = nodes.iter().filter(|n| n.is_cu()).collect();
        let du: Vec<_> = nodes.iter().filter(|n| !n.is_cu()).collect();
        assert_eq!(cu.len(), 8);
        assert_eq!(du.len(), 36);
        let min_cu = cu.iter().map(|n| n.position.z).fold(f64::INFINITY, f64::min);
        let max_du = du.iter().map(|n| n.position.z).fold(f64::NEG_INFINITY, f64::max);
        assert!(min_cu > max_du);
    }

    #[test]
    fn capacity_error() {
        let cfg = SceneConfig {
            grid_rows: 1,
            grid_cols: 1,
            cu_count: 2,
            du_count: 1,
            ..SceneConfig::default()
        };
        assert_eq!(
            generate_scene(&cfg).unwrap_err(),
            SceneError::Capacity {
                requested: 3,
                available: 1
            }
        );
    }

    #[test]
    fn los_above_everything_and_forced_blockage() {
        let scene = [bld(10.0, -5.0, 20.0, 5.0, 50.0)];
        assert!(line_of_sight(&Vec3::new(0.0, 0.0, 60.0), &Vec3::new(30.0, 0.0, 55.0), &scene));
        let a = Vec3::new(0.0, 0.0, 20.0);
        let b = Vec3::new(30.0, 0.0, 30.0);
        assert!(!line_of_sight(&a, &b, &scene));
        assert!(!line_of_sight(&b, &a, &scene));
    }

    #[test]
    fn rooftop_endpoint_is_not_blockage() {
        let scene = [bld(0.0, 0.0, 10.0, 10.0, 20.0)];
        let roof = Vec3::new(5.0, 5.0, 20.0);
        assert!(line_of_sight(&roof, &Vec3::new(50.0, 5.0, 40.0), &scene));
    }

    #[test]
    fn friis_reference_value() {
        let lambda = SPEED_OF_LIGHT / 140e9;
        let fspl = free_space_loss_db(100.0, lambda);
        assert!((fspl - 115.37).abs() < 0.05, "{fspl}");
        assert!(free_space_loss_db(lambda / (4.0 * PI), lambda).abs() < 1e-12);
    }

    fn two_node_paths(cu: Vec3, du: Vec3, model: &PropagationModel) -> Vec<PathRecord> {
        let nodes = vec![Node::new("CU1", NodeKind::Cu, cu), Node::new("DU1", NodeKind::Du, du)];
        synthesize_paths(&nodes, &[], &RadioParams::default(), model)
    }

    #[test]
    fn vertical_link_has_zero_azimuth() {
        let p = two_node_paths(Vec3::new(3.0, 4.0, 50.0), Vec3::new(3.0, 4.0, 10.0), &PropagationModel::default());
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].aod_el_deg, 180.0);
        assert_eq!(p[0].aod_az_deg, 0.0);
        assert_eq!(p[0].aoa_el_deg, 0.0);
    }

    #[test]
    fn los_record_consistency() {
        let radio = RadioParams::default();
        let p = &two_node_paths(Vec3::new(0.0, 0.0, 40.0), Vec3::new(80.0, 60.0, 20.0), &PropagationModel::default())[0];
        let d = (80.0f64 * 80.0 + 60.0 * 60.0 + 20.0 * 20.0).sqrt();
        let lambda = radio.wavelength_m();
        let expect = radio.tx_power_dbm - free_space_loss_db(d, lambda) - 0.0015 * d;
        assert!((p.rx_power_dbm - expect).abs() < 1e-9);
        assert!((p.delay_s - d / SPEED_OF_LIGHT).abs() < 1e-18);
        // arrival is the reversed departure
        assert!((p.aod() + p.aoa()).norm() < 1e-12);
        // phase = -2π f δ mod 2π
        let expect_phase = wrap_phase_rad(-TAU * radio.carrier_hz * p.delay_s);
        let diff = (p.phase_rad - expect_phase).abs();
        assert!(diff.min(TAU - diff) < 1e-6, "{} vs {}", p.phase_rad, expect_phase);
    }

    #[test]
    fn single_wall_reflection_geometry() {
        let radio = RadioParams::default();
        let wall = bld(-50.0, 20.0, 50.0, 30.0, 60.0);
        let nodes = vec![
            Node::new("CU1", NodeKind::Cu, Vec3::new(-20.0, 0.0, 30.0)),
            Node::new("DU1", NodeKind::Du, Vec3::new(20.0, 0.0, 30.0)),
        ];
        let paths = synthesize_paths(&nodes, &[wall], &radio, &PropagationModel::default());
        assert_eq!(paths.len(), 2);
        let refl = &paths[1];
        let length = (40.0f64.powi(2) + 40.0f64.powi(2)).sqrt();
        assert!((refl.delay_s * SPEED_OF_LIGHT - length).abs() < 1e-9);
        assert!((paths[0].rx_power_dbm - refl.rx_power_dbm) > 10.0);
        assert!((refl.aod_az_deg - 45.0).abs() < 1e-9);
        assert!((refl.aoa_az_deg - 135.0).abs() < 1e-9);

        let no_refl = PropagationModel {
            reflections: false,
            ..PropagationModel::default()
        };
        assert_eq!(synthesize_paths(&nodes, &[wall], &radio, &no_refl).len(), 1);
    }

    #[test]
    fn blocked_pair_without_reflections_emits_nothing() {
        let wall = bld(-5.0, -50.0, 5.0, 50.0, 80.0);
        let nodes = vec![
            Node::new("CU1", NodeKind::Cu, Vec3::new(-20.0, 0.0, 30.0)),
            Node::new("DU1", NodeKind::Du, Vec3::new(20.0, 0.0, 30.0)),
        ];
        let model = PropagationModel {
            reflections: false,
            ..PropagationModel::default()
        };
        assert!(synthesize_paths(&nodes, &[wall], &RadioParams::default(), &model).is_empty());
    }
}
