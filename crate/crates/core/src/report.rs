//! Plan reports, per-link metric tables and plot-ready sweep data.

use std::fmt::Write as _;

use serde::Serialize;

use crate::linear_to_db;
use crate::mimo::LinkMetrics;
use crate::node::NodeId;
use crate::planner::AssociationPlan;
use crate::trace::RadioParams;

pub const METRICS_HEADER: &str = "cu_id,du_id,slnr_db,sinr_db,rate_bps";

#[derive(Debug, Clone, Serialize)]
pub struct AssignmentRow {
    pub du_id: NodeId,
    pub cu_id: NodeId,
}

/// Machine-readable plan report.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub feasible: bool,
    pub selected_cus: Vec<NodeId>,
    pub assignment: Vec<AssignmentRow>,
    pub unassigned_dus: Vec<NodeId>,
    pub links: Vec<LinkMetrics>,
    pub bottlenecks: Vec<NodeId>,
    pub rate_target_bps: f64,
    pub peak_rate_bps: f64,
    /// SINR at which the rate cap is reached.
    pub sinr_threshold_db: f64,
}

impl PlanReport {
    pub fn new(plan: &AssociationPlan, radio: &RadioParams) -> Self {
        PlanReport {
            feasible: plan.feasible,
            selected_cus: plan.selected.clone(),
            assignment: plan
                .assignment
                .iter()
                .map(|(du, cu)| AssignmentRow {
                    du_id: du.clone(),
                    cu_id: cu.clone(),
                })
                .collect(),
            unassigned_dus: plan.unassigned.clone(),
            links: plan.links.clone(),
            bottlenecks: plan
                .bottlenecks()
                .into_iter()
                .map(|l| l.du_id.clone())
                .chain(plan.unassigned.iter().cloned())
                .collect(),
            rate_target_bps: plan.rate_target_bps,
            peak_rate_bps: radio.peak_rate_bps(),
            sinr_threshold_db: linear_to_db(radio.cap_sinr_linear()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "feasible: {}", if self.feasible { "yes" } else { "no" });
        let _ = writeln!(
            out,
            "selected CUs ({}): {}",
            self.selected_cus.len(),
            join(&self.selected_cus)
        );
        let _ = writeln!(
            out,
            "rate target: {:.3} Gbps, peak rate: {:.3} Gbps, cap SINR: {:.2} dB",
            self.rate_target_bps / 1e9,
            self.peak_rate_bps / 1e9,
            self.sinr_threshold_db
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>10} {:>10} {:>12}",
            "DU", "CU", "SLNR dB", "SINR dB", "rate Gbps"
        );
        for l in &self.links {
            let _ = writeln!(
                out,
                "{:<8} {:<8} {:>10.2} {:>10.2} {:>12.4}{}",
                l.du_id.as_str(),
                l.cu_id.as_str(),
                l.slnr_db,
                l.sinr_db,
                l.rate_bps / 1e9,
                if l.rate_bps < self.rate_target_bps { "  *" } else { "" }
            );
        }
        if !self.unassigned_dus.is_empty() {
            let _ = writeln!(out, "\nunassigned DUs: {}", join(&self.unassigned_dus));
        }
        if !self.bottlenecks.is_empty() {
            let _ = writeln!(out, "\nbottleneck DUs: {}", join(&self.bottlenecks));
        }
        out
    }
}

fn join(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
}

/// Shortest round-trip float formatting; non-finite values as `inf`,
/// `-inf` or `NaN`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// `cu_id,du_id,slnr_db,sinr_db,rate_bps` rows, one per link.
pub fn metrics_csv(links: &[LinkMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for l in links {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            l.cu_id,
            l.du_id,
            num(l.slnr_db),
            num(l.sinr_db),
            num(l.rate_bps)
        );
    }
    out
}

/// Parses [`metrics_csv`] output.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<LinkMetrics>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err("bad metrics header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let [cu, du, slnr, sinr, rate] = f[..] else {
                return Err(format!("line {}: expected 5 fields", i + 2));
            };
            let p = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            Ok(LinkMetrics {
                cu_id: cu.into(),
                du_id: du.into(),
                slnr_db: p(slnr)?,
                sinr_db: p(sinr)?,
                rate_bps: p(rate)?,
            })
        })
        .collect()
}

/// One labelled configuration of a sweep.
#[derive(Debug, Clone)]
pub struct SweepSeries<'a> {
    pub label: String,
    pub links: &'a [LinkMetrics],
}

/// Plot-ready table: one row per DU (in `dus` order) with an SINR and a rate
/// column per series, plus constant peak-rate and cap-SINR columns. A DU with
/// no link in a series gets an empty SINR cell and rate 0.
pub fn emit_plot_data(dus: &[NodeId], series: &[SweepSeries], radio: &RadioParams) -> String {
    let mut out = String::from("du_index,du_id");
    for s in series {
        let _ = write!(out, ",sinr_db_{}", s.label);
    }
    for s in series {
        let _ = write!(out, ",rate_bps_{}", s.label);
    }
    out.push_str(",peak_rate_bps,sinr_threshold_db\n");
    let peak = num(radio.peak_rate_bps());
    let threshold = num(linear_to_db(radio.cap_sinr_linear()));
    for (idx, du) in dus.iter().enumerate() {
        let _ = write!(out, "{},{}", idx + 1, du);
        let found: Vec<Option<&LinkMetrics>> = series
            .iter()
            .map(|s| s.links.iter().find(|l| &l.du_id == du))
            .collect();
        for l in &found {
            let _ = write!(out, ",{}", l.map(|l| num(l.sinr_db)).unwrap_or_default());
        }
        for l in &found {
            let _ = write!(out, ",{}", num(l.map_or(0.0, |l| l.rate_bps)));
        }
        let _ = writeln!(out, ",{peak},{threshold}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(cu: &str, du: &str, sinr: f64, rate: f64) -> LinkMetrics {
        LinkMetrics {
            cu_id: cu.into(),
            du_id: du.into(),
            slnr_db: sinr + 1.0,
            sinr_db: sinr,
            rate_bps: rate,
        }
    }

    #[test]
    fn metrics_round_trip() {
        let links = vec![
            link("CU1", "DU1", 20.125, 10.03e9),
            link("CU2", "DU2", f64::NEG_INFINITY, 0.0),
        ];
        let text = metrics_csv(&links);
        assert!(text.starts_with("cu_id,du_id,slnr_db,sinr_db,rate_bps\n"));
        assert_eq!(parse_metrics_csv(&text).unwrap(), links);
    }

    #[test]
    fn plot_columns() {
        let radio = RadioParams::default();
        let a = vec![link("CU1", "DU1", 10.0, 5e9)];
        let b = vec![link("CU1", "DU1", 20.0, 10.03e9), link("CU2", "DU2", 18.0, 10.03e9)];
        let dus = vec![NodeId::from("DU1"), NodeId::from("DU2")];
        let text = emit_plot_data(
            &dus,
            &[
                SweepSeries {
                    label: "1cu".into(),
                    links: &a,
                },
                SweepSeries {
                    label: "2cu".into(),
                    links: &b,
                },
            ],
            &radio,
        );
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "du_index,du_id,sinr_db_1cu,sinr_db_2cu,rate_bps_1cu,rate_bps_2cu,peak_rate_bps,sinr_threshold_db"
        );
        assert_eq!(lines.len(), 3);
        let row2: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row2[2], "");
        assert_eq!(row2[4], "0.0");
        let thr: f64 = row2[7].parse().unwrap();
        assert!((thr - 17.69).abs() < 0.01);
        let peak: f64 = row2[6].parse().unwrap();
        assert!((peak - 10.03e9).abs() < 1.0);
    }
}
