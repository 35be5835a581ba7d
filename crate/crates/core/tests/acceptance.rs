//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line before
//! asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! readable summary.

use std::collections::BTreeMap;
use std::path::PathBuf;

use midhaul::arrays::{steering_vector, ArrayState};
use midhaul::channel::synthesize_channel;
use midhaul::cli::{array_sweep, cu_sweep};
use midhaul::config::Settings;
use midhaul::geometry::{direction_from_angles, Vec3};
use midhaul::mimo::{extended_channel, link_rate, slnr_linear, slnr_precoder_with_value, zf_precoders};
use midhaul::planner::{greedy_order, AssociationPlan, EvalOptions, Planner, PlannerMode};
use midhaul::scene::{place_on_buildings, synthesize_paths};
use midhaul::trace::{parse_nodes, parse_trace, serialize_nodes, serialize_trace};
use midhaul::*;
use nalgebra::{Cholesky, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {id} [{name}]: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = gaussian(rng, n, 1).column(0).into_owned();
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

fn dense_channels(rng: &mut ChaCha8Rng, k: usize, m: usize, n: usize) -> Vec<ChannelMatrix> {
    (0..k)
        .map(|j| ChannelMatrix::from_dense("CU1".into(), format!("DU{}", j + 1).into(), gaussian(rng, m, n)))
        .collect()
}

fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn c1_peak_rate_constant() {
    let radio = RadioParams::default();
    let cap = link_rate(1e12, &radio);
    let threshold_db = linear_to_db(2f64.powf(5.9) - 1.0);
    let at_threshold = link_rate(radio.cap_sinr_linear(), &radio);
    let below = link_rate(radio.cap_sinr_linear() * 0.99, &radio);
    let ok = (cap - 10.03e9).abs() < 1.0
        && (cap - 10e9).abs() / 10e9 <= 0.005
        && (threshold_db - 17.69).abs() < 0.005
        && (linear_to_db(radio.cap_sinr_linear()) - threshold_db).abs() < 1e-12
        && (at_threshold - cap).abs() < 1e-3
        && below < cap;
    verdict(
        1,
        "peak-rate constant",
        ok,
        &format!("cap {:.4} Gbps, cap SINR {threshold_db:.3} dB", cap / 1e9),
    );
    assert!(ok);
}

/// Dominant generalized eigenvalue of `(A, B)` via Cholesky whitening.
fn generalized_max_eig(a: &CMatrix, b: &CMatrix) -> f64 {
    let l = Cholesky::new(b.clone()).expect("B is positive definite").l();
    let l_inv = l.clone().try_inverse().unwrap();
    let c = &l_inv * a * l_inv.adjoint();
    let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(c).eigenvalues.max()
}

fn slnr_direct(h: &CMatrix, leak: &CMatrix, w: &CVector, reg: f64) -> f64 {
    let s = (h * w).norm_squared();
    let l = if leak.nrows() == 0 { 0.0 } else { (leak * w).norm_squared() };
    s / (reg + l)
}

#[test]
fn c2_slnr_optimality() {
    let (k, n, m, sigma2) = (3, 16, 4, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gap = f64::INFINITY;
    let mut worst_eig = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let channels = dense_channels(&mut rng, k, m, n);
        let i = rng.gen_range(0..k);
        let (w, _) = slnr_precoder_with_value(&channels, i, sigma2, m).unwrap();
        let h = channels[i].dense();
        let leak = extended_channel(&channels, i).unwrap();
        let reg = m as f64 * sigma2;
        let got = slnr_direct(&h, &leak, &w, reg);
        let lib = slnr_linear(&channels, i, &w, sigma2, m).unwrap();

        let a = h.adjoint() * &h;
        let b = CMatrix::identity(n, n) * C64::new(reg, 0.0) + leak.adjoint() * &leak;
        let lambda = generalized_max_eig(&a, &b);
        let eig_err = ((got - lambda) / lambda).abs().max(((lib - lambda) / lambda).abs());
        worst_eig = worst_eig.max(eig_err);

        let best_random = (0..10_000)
            .map(|_| slnr_direct(&h, &leak, &random_unit(&mut rng, n), reg))
            .fold(0.0, f64::max);
        worst_gap = worst_gap.min(got / best_random);
        if !(got >= best_random && eig_err <= 1e-8 && ((w.norm() - 1.0).abs() < 1e-9)) {
            failures += 1;
        }
    }
    let ok = failures == 0;
    verdict(
        2,
        "SLNR optimality",
        ok,
        &format!("{failures} failing instances, min SLNR/best-random {worst_gap:.4}, max eigen rel err {worst_eig:.2e}"),
    );
    assert!(ok);
}

#[test]
fn c3_zf_nulling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let k = 2 + t % 3;
        let m = 1 + t % 4;
        let n = k * m + rng.gen_range(0..6);
        let channels = dense_channels(&mut rng, k, m, n);
        let w = zf_precoders(&channels).unwrap();
        for i in 0..k {
            let leak = extended_channel(&channels, i).unwrap();
            let signal = channels[i].apply(&w[i]).norm_squared();
            let leaked = (&leak * &w[i]).norm_squared();
            worst = worst.max(leaked / signal);
        }
    }
    let ok = worst <= 1e-16;
    verdict(3, "ZF nulling", ok, &format!("max leakage/signal {worst:.2e}"));
    assert!(ok);
}

#[test]
fn c4_single_du_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 1.0f64;
    for t in 0..50 {
        let (m, n) = (1 + t % 5, 2 + t % 15);
        let channels = dense_channels(&mut rng, 1, m, n);
        let (w, _) = slnr_precoder_with_value(&channels, 0, 0.5, m).unwrap();
        let svd = channels[0].dense().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let top = (0..svd.singular_values.len())
            .max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap();
        let v = v_t.row(top).adjoint();
        worst = worst.min(w.dotc(&v).norm());
    }
    let ok = worst >= 1.0 - 1e-8;
    verdict(4, "single-DU reduction", ok, &format!("min |<w, v1>| = {worst:.12}"));
    assert!(ok);
}

#[test]
fn c5_channel_synthesis() {
    let radio = RadioParams::default();
    let du = ArrayState::new(ArrayConfig::new(4, 4), Vec3::new(-1.0, 0.1, 0.05));
    let cu = ArrayState::new(ArrayConfig::new(8, 4), Vec3::new(1.0, -0.1, -0.05));
    let aod = direction_from_angles(-4.0, 93.0);
    let (aoa_az, aoa_el) = midhaul::geometry::angles_from_direction(&(-aod));
    let (aod_az, aod_el) = midhaul::geometry::angles_from_direction(&aod);
    let unit = PathRecord {
        path_id: 1,
        cu_id: "CU1".into(),
        du_id: "DU1".into(),
        rx_power_dbm: radio.tx_power_dbm,
        aod_az_deg: aod_az,
        aod_el_deg: aod_el,
        aoa_az_deg: aoa_az,
        aoa_el_deg: aoa_el,
        delay_s: 0.0,
        phase_rad: 0.0,
    };
    let h = synthesize_channel(std::slice::from_ref(&unit), &du, &cu, radio.carrier_hz, radio.tx_power_dbm)
        .unwrap()
        .dense();
    let outer = steering_vector(&du, &unit.aoa()).0 * steering_vector(&cu, &unit.aod()).0.transpose();
    let err_outer = (h - outer).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let anti = PathRecord {
        path_id: 2,
        phase_rad: std::f64::consts::PI,
        ..unit.clone()
    };
    let z = synthesize_channel(&[unit, anti], &du, &cu, radio.carrier_hz, radio.tx_power_dbm)
        .unwrap()
        .dense();
    let err_zero = z.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ok = err_outer <= 1e-12 && err_zero <= 1e-12;
    verdict(
        5,
        "channel synthesis",
        ok,
        &format!("outer-product max err {err_outer:.1e}, antiphase max entry {err_zero:.1e}"),
    );
    assert!(ok);
}

/// Random small scenario: every pair gets 0-2 paths with random angles and
/// powers; every DU gets at least one path.
fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let c = rng.gen_range(2..=6);
    let d = rng.gen_range(2..=12);
    let mut nodes = Vec::new();
    for i in 0..c {
        nodes.push(Node::new(format!("CU{}", i + 1), NodeKind::Cu, Vec3::new(i as f64 * 50.0, 0.0, 40.0)));
    }
    for j in 0..d {
        nodes.push(Node::new(format!("DU{}", j + 1), NodeKind::Du, Vec3::new(j as f64 * 20.0, 100.0, 15.0)));
    }
    let mut paths = Vec::new();
    let mut pid = 1;
    for j in 0..d {
        let forced = rng.gen_range(0..c);
        for i in 0..c {
            let count = if i == forced { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) * rng.gen_range(0..=1) };
            for _ in 0..count {
                let aod = direction_from_angles(rng.gen_range(-60.0..60.0), rng.gen_range(91.0..110.0));
                let (az, el) = midhaul::geometry::angles_from_direction(&aod);
                let back = -direction_from_angles(rng.gen_range(-180.0..180.0), 180.0 - el);
                let (aaz, ael) = midhaul::geometry::angles_from_direction(&back);
                paths.push(PathRecord {
                    path_id: pid,
                    cu_id: format!("CU{}", i + 1).into(),
                    du_id: format!("DU{}", j + 1).into(),
                    rx_power_dbm: rng.gen_range(-85.0..-60.0),
                    aod_az_deg: az,
                    aod_el_deg: el,
                    aoa_az_deg: aaz,
                    aoa_el_deg: ael,
                    delay_s: rng.gen_range(1e-7..2e-6),
                    phase_rad: rng.gen_range(0.0..std::f64::consts::TAU),
                });
                pid += 1;
            }
        }
    }
    Scenario::new(nodes, paths, RadioParams::default(), 25).unwrap()
}

/// Independent association: strongest path power per pair, ties to the
/// lower CU id.
fn oracle_plan(scenario: &Scenario, selected: &[NodeId]) -> AssociationPlan {
    let mut strength: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for p in &scenario.paths {
        let e = strength.entry((p.cu_id.clone(), p.du_id.clone())).or_insert(f64::NEG_INFINITY);
        *e = e.max(p.rx_power_dbm);
    }
    let mut assignment = BTreeMap::new();
    let mut unassigned = Vec::new();
    for du in scenario.du_ids() {
        let mut best: Option<(NodeId, f64)> = None;
        let mut sorted = selected.to_vec();
        sorted.sort();
        for cu in sorted {
            if let Some(&s) = strength.get(&(cu.clone(), du.clone())) {
                if best.as_ref().is_none_or(|(_, b)| s > *b) {
                    best = Some((cu, s));
                }
            }
        }
        match best {
            Some((cu, _)) => {
                assignment.insert(du, cu);
            }
            None => unassigned.push(du),
        }
    }
    AssociationPlan {
        selected: selected.to_vec(),
        assignment,
        unassigned,
        links: vec![],
        evaluated: false,
        feasible: false,
        rate_target_bps: 0.0,
    }
}

#[test]
fn c6_planner_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let options = EvalOptions {
        cu_array: ArrayConfig::new(4, 4),
        du_array: ArrayConfig::new(4, 4),
        ..EvalOptions::default()
    };
    let (mut mismatches, mut greedy_smaller) = (0, 0);
    let mut sizes = BTreeMap::<Option<usize>, usize>::new();
    for _ in 0..50 {
        let scenario = random_scenario(&mut rng);
        let planner = Planner::new(&scenario, options).unwrap();
        let exhaustive = planner.plan_minimum(PlannerMode::Exhaustive).unwrap();
        let greedy = planner.plan_minimum(PlannerMode::Greedy).unwrap();

        let cus = scenario.cu_ids();
        let fresh = Planner::new(&scenario, options).unwrap();
        let mut true_min: Option<usize> = None;
        for mask in 1u32..(1 << cus.len()) {
            let size = mask.count_ones() as usize;
            if true_min.is_some_and(|t| size >= t) {
                continue;
            }
            let subset: Vec<NodeId> = (0..cus.len()).filter(|b| mask >> b & 1 == 1).map(|b| cus[b].clone()).collect();
            let plan = oracle_plan(&scenario, &subset);
            if !plan.unassigned.is_empty() {
                continue;
            }
            if fresh.evaluate(&plan).unwrap().feasible {
                true_min = Some(size);
            }
        }
        let reeval = fresh.evaluate(&oracle_plan(&scenario, &exhaustive.selected)).unwrap();
        let exhaustive_min = exhaustive.feasible.then_some(exhaustive.selected.len());
        if exhaustive_min != true_min || reeval.feasible != exhaustive.feasible {
            mismatches += 1;
        }
        if let (Some(e), true) = (exhaustive_min, greedy.feasible) {
            if greedy.selected.len() < e {
                greedy_smaller += 1;
            }
        }
        if greedy.feasible && !exhaustive.feasible {
            greedy_smaller += 1;
        }
        *sizes.entry(true_min).or_default() += 1;
    }
    let ok = mismatches == 0 && greedy_smaller == 0;
    verdict(
        6,
        "planner optimality",
        ok,
        &format!("{mismatches} exhaustive mismatches, {greedy_smaller} greedy < exhaustive, minimum sizes {sizes:?}"),
    );
    assert!(ok);
}

/// Loads the bundled scene after checking it regenerates byte for byte.
fn bundled_scene() -> Scenario {
    let dir = data_dir("scene8x36");
    let settings = Settings::load(&dir.join("run.cfg")).unwrap();
    let (buildings, nodes) = place_on_buildings(&settings.scene, settings.buildings.clone()).unwrap();
    let paths = synthesize_paths(&nodes, &buildings, &settings.radio, &settings.scene.propagation);
    let nodes_text = std::fs::read_to_string(dir.join("nodes.csv")).unwrap();
    let trace_text = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(serialize_nodes(&nodes), nodes_text, "bundled nodes.csv is stale");
    assert_eq!(serialize_trace(&paths), trace_text, "bundled trace.csv is stale");
    let nodes = parse_nodes(nodes_text.as_bytes()).unwrap();
    let paths = parse_trace(trace_text.as_bytes()).unwrap();
    Scenario::new(nodes, paths, settings.radio, settings.scene.propagation.max_paths_per_pair).unwrap()
}

#[test]
fn c7_cu_count_sweep() {
    let start = std::time::Instant::now();
    let scenario = bundled_scene();
    let radio = scenario.radio;
    let sweep = cu_sweep(&scenario, EvalOptions::default(), &[1, 2, 3]).unwrap();
    let summary: Vec<String> = sweep
        .iter()
        .map(|(k, p)| format!("{k} CU: {}/{} at R, min {:.2} Gbps", p.links_meeting_target(), p.du_count(), p.min_rate_bps() / 1e9))
        .collect();
    let one = &sweep[0].1;
    let three = &sweep[2].1;
    let mins: Vec<f64> = sweep.iter().map(|(_, p)| p.min_rate_bps()).collect();
    let ok = scenario.cu_ids().len() == 8
        && scenario.du_ids().len() == 36
        && one.min_rate_bps() < radio.rate_target_bps
        && three.links.len() == 36
        && three.unassigned.is_empty()
        && three.links.iter().all(|l| l.rate_bps >= radio.rate_target_bps)
        && mins.windows(2).all(|w| w[1] >= w[0])
        && start.elapsed().as_secs() < 60;
    verdict(7, "CU-count sweep on bundled scene", ok, &summary.join("; "));
    assert!(ok);
}

#[test]
fn c8_array_size_trend() {
    let start = std::time::Instant::now();
    let scenario = bundled_scene();
    let planner = Planner::new(&scenario, EvalOptions::default()).unwrap();
    let selected = greedy_order(&planner.graph).unwrap().order[..3].to_vec();
    let sweep = array_sweep(&scenario, EvalOptions::default(), &selected, &[(8, 8), (16, 8), (16, 16)]).unwrap();
    let counts: Vec<usize> = sweep.iter().map(|(_, p)| p.links_meeting_target()).collect();
    let ok = counts.windows(2).all(|w| w[1] >= w[0]) && start.elapsed().as_secs() < 120;
    verdict(
        8,
        "array-size trend",
        ok,
        &format!("links at R for 8x8, 16x8, 16x16: {counts:?}"),
    );
    assert!(ok);
}

#[test]
fn c9_trace_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let records: Vec<PathRecord> = (0..10_000u64)
        .map(|k| {
            let scale = 10f64.powi(rng.gen_range(-3..4));
            PathRecord {
                path_id: k + 1,
                cu_id: format!("CU{}", rng.gen_range(1..9)).into(),
                du_id: format!("DU{}", rng.gen_range(1..37)).into(),
                rx_power_dbm: rng.gen_range(-150.0..0.0) * scale.min(1.0),
                aod_az_deg: rng.gen_range(-180.0..180.0),
                aod_el_deg: rng.gen_range(0.0..=180.0),
                aoa_az_deg: rng.gen_range(-180.0..180.0),
                aoa_el_deg: rng.gen_range(0.0..=180.0),
                delay_s: rng.gen_range(1e-9..1e-5),
                phase_rad: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();
    let back = parse_trace(serialize_trace(&records).as_bytes()).unwrap();
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    let mut worst = 0.0f64;
    let mut ids_ok = back.len() == records.len();
    for (a, b) in records.iter().zip(&back) {
        ids_ok &= a.path_id == b.path_id && a.cu_id == b.cu_id && a.du_id == b.du_id;
        for (x, y) in [
            (a.rx_power_dbm, b.rx_power_dbm),
            (a.aod_az_deg, b.aod_az_deg),
            (a.aod_el_deg, b.aod_el_deg),
            (a.aoa_az_deg, b.aoa_az_deg),
            (a.aoa_el_deg, b.aoa_el_deg),
            (a.delay_s, b.delay_s),
            (a.phase_rad, b.phase_rad),
        ] {
            worst = worst.max(rel(x, y));
        }
    }
    let ok = ids_ok && worst <= 1e-12;
    verdict(9, "trace round trip", ok, &format!("10000 records, max rel err {worst:.1e}"));
    assert!(ok);
}
