//! CU selection and CU-DU association.
//!
//! Selection is a greedy set cover over the connectivity graph (an edge
//! exists when some path clears the received-power threshold). Association
//! sends each DU to the selected CU with its strongest edge. Evaluation runs
//! the full alignment, channel and precoding chain, and the outer loop grows
//! the CU set until every link meets the rate target. An exhaustive mode
//! enumerates CU subsets by increasing size instead.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arrays::{align_cu, align_du, ArrayConfig, ArrayError, ArrayState};
use crate::channel::{synthesize_channel, ChannelError, ChannelMatrix};
use crate::linalg::CVector;
use crate::mimo::{link_rate, mrc_sinr_linear, precode_group, slnr_linear, LinkMetrics, MimoError, PrecoderKind};
use crate::node::NodeId;
use crate::trace::{PathRecord, Scenario};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("DUs without any usable CU: {}", join_ids(.0))]
    Uncoverable(Vec<NodeId>),
    #[error("aligning {node}: {source}")]
    Alignment { node: NodeId, source: ArrayError },
    #[error("channel {cu}-{du}: {source}")]
    Channel {
        cu: NodeId,
        du: NodeId,
        source: ChannelError,
    },
    #[error("precoding at {cu}: {source}")]
    Precoding { cu: NodeId, source: MimoError },
    #[error("unknown CU `{0}`")]
    UnknownCu(NodeId),
    #[error("invalid options: {0}")]
    Invalid(String),
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Strongest path power, dBm.
    pub strength_dbm: f64,
    pub paths: Vec<PathRecord>,
}

/// Bipartite CU/DU graph; both id lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    pub cus: Vec<NodeId>,
    pub dus: Vec<NodeId>,
    pub edges: BTreeMap<(NodeId, NodeId), Edge>,
}

impl ConnectivityGraph {
    pub fn edge(&self, cu: &NodeId, du: &NodeId) -> Option<&Edge> {
        self.edges.get(&(cu.clone(), du.clone()))
    }

    fn strength(&self, cu: &NodeId, du: &NodeId) -> Option<f64> {
        self.edge(cu, du).map(|e| e.strength_dbm)
    }

    /// DUs with no edge at all.
    pub fn uncoverable(&self) -> Vec<NodeId> {
        let covered: BTreeSet<&NodeId> = self.edges.keys().map(|(_, du)| du).collect();
        self.dus.iter().filter(|d| !covered.contains(d)).cloned().collect()
    }
}

/// Adds an edge for every pair with at least one path at or above
/// `threshold_dbm`; the edge strength is the strongest path power.
pub fn build_connectivity(scenario: &Scenario, threshold_dbm: f64) -> ConnectivityGraph {
    let mut edges: BTreeMap<(NodeId, NodeId), Edge> = BTreeMap::new();
    for ((cu, du), paths) in scenario.paths_by_pair() {
        let best = paths.iter().map(|p| p.rx_power_dbm).fold(f64::NEG_INFINITY, f64::max);
        if best >= threshold_dbm {
            edges.insert(
                (cu, du),
                Edge {
                    strength_dbm: best,
                    paths,
                },
            );
        }
    }
    ConnectivityGraph {
        cus: scenario.cu_ids(),
        dus: scenario.du_ids(),
        edges,
    }
}

/// Full greedy selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOrder {
    /// Every CU, in selection order.
    pub order: Vec<NodeId>,
    /// Length of the prefix that first covers all DUs.
    pub cover_len: usize,
}

/// Picks the CU with the most DUs not yet covered until all DUs are covered.
/// Ties go to the larger summed edge strength over the newly covered DUs,
/// then to the lower CU id.
pub fn greedy_select(graph: &ConnectivityGraph) -> Result<Vec<NodeId>, PlanError> {
    let GreedyOrder { mut order, cover_len } = greedy_order(graph)?;
    order.truncate(cover_len);
    Ok(order)
}

/// Runs [`greedy_select`] and then keeps selecting past full coverage: each
/// further CU is the one that would become the strongest server of the most
/// DUs (ties as before, over those DUs).
pub fn greedy_order(graph: &ConnectivityGraph) -> Result<GreedyOrder, PlanError> {
    let missing = graph.uncoverable();
    if !missing.is_empty() {
        return Err(PlanError::Uncoverable(missing));
    }
    let mut remaining: Vec<&NodeId> = graph.cus.iter().collect();
    let mut order = Vec::with_capacity(remaining.len());

    let mut uncovered: BTreeSet<&NodeId> = graph.dus.iter().collect();
    while !uncovered.is_empty() {
        let pick = best_candidate(&remaining, |cu| {
            gain_over(graph, cu, uncovered.iter().copied(), |_, _| true)
        });
        let cu = remaining.remove(pick);
        uncovered.retain(|du| graph.edge(cu, du).is_none());
        order.push(cu.clone());
    }
    let cover_len = order.len();

    let mut best: BTreeMap<&NodeId, f64> = graph.dus.iter().map(|d| (d, f64::NEG_INFINITY)).collect();
    for cu in &order {
        refresh_best(graph, cu, &mut best);
    }
    while !remaining.is_empty() {
        let pick = best_candidate(&remaining, |cu| {
            gain_over(graph, cu, graph.dus.iter(), |du, s| s > best[du])
        });
        let cu = remaining.remove(pick);
        refresh_best(graph, cu, &mut best);
        order.push(cu.clone());
    }
    Ok(GreedyOrder { order, cover_len })
}

fn refresh_best<'a>(graph: &ConnectivityGraph, cu: &NodeId, best: &mut BTreeMap<&'a NodeId, f64>) {
    for (du, b) in best.iter_mut() {
        if let Some(s) = graph.strength(cu, du) {
            *b = b.max(s);
        }
    }
}

/// (count, summed strength) over the DUs in `dus` that `cu` reaches and
/// that pass `counts`.
fn gain_over<'a>(
    graph: &ConnectivityGraph,
    cu: &NodeId,
    dus: impl Iterator<Item = &'a NodeId>,
    counts: impl Fn(&NodeId, f64) -> bool,
) -> (usize, f64) {
    dus.filter_map(|du| graph.strength(cu, du).filter(|&s| counts(du, s)))
        .fold((0, 0.0), |(n, sum), s| (n + 1, sum + s))
}

fn best_candidate(remaining: &[&NodeId], score: impl Fn(&NodeId) -> (usize, f64)) -> usize {
    let mut best_idx = 0;
    let mut best_score = score(remaining[0]);
    for (idx, cu) in remaining.iter().enumerate().skip(1) {
        let s = score(cu);
        let better = s.0 > best_score.0
            || (s.0 == best_score.0 && s.1 > best_score.1)
            || (s.0 == best_score.0 && s.1 == best_score.1 && *cu < remaining[best_idx]);
        if better {
            best_idx = idx;
            best_score = s;
        }
    }
    best_idx
}

/// Selected CUs, DU assignment and, once evaluated, per-link metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationPlan {
    /// In selection order.
    pub selected: Vec<NodeId>,
    /// DU -> serving CU.
    pub assignment: BTreeMap<NodeId, NodeId>,
    /// DUs none of the selected CUs can reach.
    pub unassigned: Vec<NodeId>,
    /// One per assigned DU, in DU order.
    pub links: Vec<LinkMetrics>,
    pub evaluated: bool,
    pub feasible: bool,
    pub rate_target_bps: f64,
}

impl AssociationPlan {
    /// Links below the rate target.
    pub fn bottlenecks(&self) -> Vec<&LinkMetrics> {
        self.links
            .iter()
            .filter(|l| l.rate_bps < self.rate_target_bps)
            .collect()
    }

    pub fn links_meeting_target(&self) -> usize {
        self.links.len() - self.bottlenecks().len()
    }

    pub fn min_rate_bps(&self) -> f64 {
        if !self.unassigned.is_empty() {
            return 0.0;
        }
        self.links.iter().map(|l| l.rate_bps).fold(f64::INFINITY, f64::min)
    }

    pub fn du_count(&self) -> usize {
        self.assignment.len() + self.unassigned.len()
    }

    /// Checks the three structural constraints of the selection problem
    /// against the plan and its graph: rate target on every used link, one
    /// CU per DU, and assignments only to selected CUs over real edges.
    pub fn check_constraints(&self, graph: &ConnectivityGraph) -> Result<(), String> {
        let selected: BTreeSet<&NodeId> = self.selected.iter().collect();
        for du in &graph.dus {
            match self.assignment.get(du) {
                Some(cu) if !selected.contains(cu) => {
                    return Err(format!("{du} assigned to unselected {cu}"));
                }
                Some(cu) if graph.edge(cu, du).is_none() => {
                    return Err(format!("{du} assigned to {cu} without an edge"));
                }
                Some(_) => {}
                None => return Err(format!("{du} is not assigned")),
            }
        }
        if self.assignment.len() != graph.dus.len() {
            return Err("assignment covers DUs outside the graph".into());
        }
        if self.links.len() != self.assignment.len() {
            return Err("missing link metrics".into());
        }
        for l in &self.links {
            if self.assignment.get(&l.du_id) != Some(&l.cu_id) {
                return Err(format!("metrics for {}-{} disagree with assignment", l.cu_id, l.du_id));
            }
            if l.rate_bps < self.rate_target_bps {
                return Err(format!("{}-{} rate {} below target", l.cu_id, l.du_id, l.rate_bps));
            }
        }
        Ok(())
    }
}

/// Assigns every DU to the selected CU with its strongest edge (ties: lower
/// CU id). DUs no selected CU reaches are listed as unassigned.
pub fn associate(selected: &[NodeId], graph: &ConnectivityGraph) -> AssociationPlan {
    let mut ranked: Vec<&NodeId> = selected.iter().collect();
    ranked.sort();
    let mut assignment = BTreeMap::new();
    let mut unassigned = Vec::new();
    for du in &graph.dus {
        let mut best: Option<(&NodeId, f64)> = None;
        for cu in &ranked {
            if let Some(s) = graph.strength(cu, du) {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((cu, s));
                }
            }
        }
        match best {
            Some((cu, _)) => {
                assignment.insert(du.clone(), cu.clone());
            }
            None => unassigned.push(du.clone()),
        }
    }
    AssociationPlan {
        selected: selected.to_vec(),
        assignment,
        unassigned,
        links: Vec::new(),
        evaluated: false,
        feasible: false,
        rate_target_bps: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerMode {
    #[default]
    Greedy,
    Exhaustive,
}

impl std::str::FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" | "greedy-loop" => Ok(PlannerMode::Greedy),
            "exhaustive" => Ok(PlannerMode::Exhaustive),
            other => Err(format!("unknown planner mode `{other}` (expected greedy or exhaustive)")),
        }
    }
}

impl std::fmt::Display for PlannerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlannerMode::Greedy => "greedy",
            PlannerMode::Exhaustive => "exhaustive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub cu_array: ArrayConfig,
    pub du_array: ArrayConfig,
    pub precoder: PrecoderKind,
    /// Also count interference from the other selected CUs' streams.
    pub inter_cu_interference: bool,
    pub connectivity_threshold_dbm: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cu_array: ArrayConfig::default(),
            du_array: ArrayConfig::default(),
            precoder: PrecoderKind::Slnr,
            inter_cu_interference: false,
            connectivity_threshold_dbm: -100.0,
        }
    }
}

/// A scenario prepared for repeated plan evaluation.
pub struct Planner<'a> {
    pub scenario: &'a Scenario,
    pub graph: ConnectivityGraph,
    pub options: EvalOptions,
    paths: BTreeMap<(NodeId, NodeId), Vec<PathRecord>>,
}

struct CuGroup {
    cu: NodeId,
    state: ArrayState,
    du_ids: Vec<NodeId>,
    channels: Vec<ChannelMatrix>,
    precoders: Vec<CVector>,
    powers: Vec<f64>,
}

impl<'a> Planner<'a> {
    pub fn new(scenario: &'a Scenario, options: EvalOptions) -> Result<Self, PlanError> {
        options
            .cu_array
            .validate()
            .and(options.du_array.validate())
            .map_err(|e| PlanError::Invalid(e.to_string()))?;
        Ok(Planner {
            scenario,
            graph: build_connectivity(scenario, options.connectivity_threshold_dbm),
            options,
            paths: scenario.paths_by_pair(),
        })
    }

    fn pair_paths(&self, cu: &NodeId, du: &NodeId) -> &[PathRecord] {
        self.paths
            .get(&(cu.clone(), du.clone()))
            .map_or(&[][..], Vec::as_slice)
    }

    /// Aligns arrays, synthesizes channels, precodes each CU's DUs with an
    /// equal power split and fills in per-link SLNR, SINR and rate.
    pub fn evaluate(&self, plan: &AssociationPlan) -> Result<AssociationPlan, PlanError> {
        let radio = &self.scenario.radio;
        let opts = &self.options;
        let noise = radio.noise_watts();
        let m = opts.du_array.elements();
        let known: BTreeSet<&NodeId> = self.graph.cus.iter().collect();
        if let Some(cu) = plan.selected.iter().find(|c| !known.contains(c)) {
            return Err(PlanError::UnknownCu(cu.clone()));
        }

        let mut by_cu: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for (du, cu) in &plan.assignment {
            by_cu.entry(cu).or_default().push(du);
        }

        let mut du_states: BTreeMap<NodeId, ArrayState> = BTreeMap::new();
        let mut groups: Vec<CuGroup> = Vec::new();
        for (cu, dus) in &by_cu {
            let mut connected = BTreeMap::new();
            for du in dus {
                let paths = self.pair_paths(cu, du);
                let state = align_du(opts.du_array, paths).map_err(|source| PlanError::Alignment {
                    node: (*du).clone(),
                    source,
                })?;
                du_states.insert((*du).clone(), state);
                connected.insert((*du).clone(), paths.to_vec());
            }
            let cu_state = align_cu(opts.cu_array, &connected).map_err(|source| PlanError::Alignment {
                node: (*cu).clone(),
                source,
            })?;
            let channels = dus
                .iter()
                .map(|du| self.channel(cu, du, &du_states[*du], &cu_state))
                .collect::<Result<Vec<_>, _>>()?;
            let k = channels.len();
            let group = precode_group(
                (*cu).clone(),
                &channels,
                opts.precoder,
                radio.tx_power_watts(),
                &vec![noise; k],
                &vec![m; k],
            )
            .map_err(|source| PlanError::Precoding {
                cu: (*cu).clone(),
                source,
            })?;
            groups.push(CuGroup {
                cu: (*cu).clone(),
                state: cu_state,
                du_ids: group.du_ids,
                channels,
                precoders: group.precoders,
                powers: group.powers,
            });
        }

        let mut links = Vec::with_capacity(plan.assignment.len());
        for (gi, g) in groups.iter().enumerate() {
            for (i, du) in g.du_ids.iter().enumerate() {
                let slnr = slnr_linear(&g.channels, i, &g.precoders[i], noise, m).map_err(|source| {
                    PlanError::Precoding {
                        cu: g.cu.clone(),
                        source,
                    }
                })?;
                let mut interferers: Vec<(&ChannelMatrix, &CVector, f64)> = (0..g.du_ids.len())
                    .filter(|&j| j != i)
                    .map(|j| (&g.channels[i], &g.precoders[j], g.powers[j]))
                    .collect();
                let cross;
                if opts.inter_cu_interference {
                    cross = self.cross_channels(&groups, gi, du, &du_states[du])?;
                    for (other, h) in &cross {
                        let og = &groups[*other];
                        for j in 0..og.du_ids.len() {
                            interferers.push((h, &og.precoders[j], og.powers[j]));
                        }
                    }
                }
                let gamma = mrc_sinr_linear(&g.channels[i], &g.precoders[i], g.powers[i], &interferers, noise);
                links.push(LinkMetrics {
                    cu_id: g.cu.clone(),
                    du_id: du.clone(),
                    slnr_db: crate::linear_to_db(slnr),
                    sinr_db: crate::linear_to_db(gamma),
                    rate_bps: link_rate(gamma, radio),
                });
            }
        }
        links.sort_by(|a, b| a.du_id.cmp(&b.du_id));

        let rate_target_bps = radio.rate_target_bps;
        let feasible = !plan.selected.is_empty()
            && plan.unassigned.is_empty()
            && links.iter().all(|l| l.rate_bps >= rate_target_bps);
        Ok(AssociationPlan {
            links,
            evaluated: true,
            feasible,
            rate_target_bps,
            ..plan.clone()
        })
    }

    fn channel(
        &self,
        cu: &NodeId,
        du: &NodeId,
        du_state: &ArrayState,
        cu_state: &ArrayState,
    ) -> Result<ChannelMatrix, PlanError> {
        let radio = &self.scenario.radio;
        synthesize_channel(
            self.pair_paths(cu, du),
            du_state,
            cu_state,
            radio.carrier_hz,
            radio.tx_power_dbm,
        )
        .map_err(|source| PlanError::Channel {
            cu: cu.clone(),
            du: du.clone(),
            source,
        })
    }

    /// Channels from every other selected CU that has paths to `du`.
    fn cross_channels(
        &self,
        groups: &[CuGroup],
        own: usize,
        du: &NodeId,
        du_state: &ArrayState,
    ) -> Result<Vec<(usize, ChannelMatrix)>, PlanError> {
        let mut out = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            if gi == own || self.pair_paths(&g.cu, du).is_empty() {
                continue;
            }
            out.push((gi, self.channel(&g.cu, du, du_state, &g.state)?));
        }
        Ok(out)
    }

    fn associate_and_evaluate(&self, selected: &[NodeId]) -> Result<AssociationPlan, PlanError> {
        self.evaluate(&associate(selected, &self.graph))
    }

    /// Smallest CU set whose plan meets the rate target on every link.
    ///
    /// If none is feasible, the evaluated plan with the most links at the
    /// target (then the fewest CUs) is returned with `feasible == false`.
    pub fn plan_minimum(&self, mode: PlannerMode) -> Result<AssociationPlan, PlanError> {
        match mode {
            PlannerMode::Greedy => self.plan_greedy_loop(),
            PlannerMode::Exhaustive => self.plan_exhaustive(),
        }
    }

    fn plan_greedy_loop(&self) -> Result<AssociationPlan, PlanError> {
        let GreedyOrder { order, cover_len } = greedy_order(&self.graph)?;
        let mut best: Option<AssociationPlan> = None;
        for k in cover_len..=order.len() {
            let plan = self.associate_and_evaluate(&order[..k])?;
            if plan.feasible {
                return Ok(plan);
            }
            keep_better(&mut best, plan);
        }
        best.ok_or_else(|| PlanError::Invalid("scenario has no CUs".into()))
    }

    fn plan_exhaustive(&self) -> Result<AssociationPlan, PlanError> {
        let missing = self.graph.uncoverable();
        if !missing.is_empty() {
            return Err(PlanError::Uncoverable(missing));
        }
        let cus = &self.graph.cus;
        let mut best: Option<AssociationPlan> = None;
        for size in 1..=cus.len() {
            let subsets: Vec<Vec<NodeId>> = combinations(cus.len(), size)
                .into_iter()
                .map(|idx| idx.into_iter().map(|i| cus[i].clone()).collect::<Vec<_>>())
                .filter(|s| covers_all(&self.graph, s))
                .collect();
            let plans = subsets
                .par_iter()
                .map(|s| self.associate_and_evaluate(s))
                .collect::<Result<Vec<_>, _>>()?;
            for plan in plans {
                if plan.feasible {
                    return Ok(plan);
                }
                keep_better(&mut best, plan);
            }
        }
        best.ok_or_else(|| PlanError::Invalid("scenario has no CUs".into()))
    }
}

fn keep_better(best: &mut Option<AssociationPlan>, plan: AssociationPlan) {
    let better = match best {
        None => true,
        Some(b) => {
            let (pm, bm) = (plan.links_meeting_target(), b.links_meeting_target());
            pm > bm || (pm == bm && plan.selected.len() < b.selected.len())
        }
    };
    if better {
        *best = Some(plan);
    }
}

fn covers_all(graph: &ConnectivityGraph, selected: &[NodeId]) -> bool {
    graph
        .dus
        .iter()
        .all(|du| selected.iter().any(|cu| graph.edge(cu, du).is_some()))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Associates and evaluates a fixed CU selection.
pub fn evaluate_plan(plan: &AssociationPlan, scenario: &Scenario, options: EvalOptions) -> Result<AssociationPlan, PlanError> {
    Planner::new(scenario, options)?.evaluate(plan)
}

/// Minimum-CU plan for the scenario's rate target.
pub fn plan_minimum_cus(
    scenario: &Scenario,
    options: EvalOptions,
    mode: PlannerMode,
) -> Result<AssociationPlan, PlanError> {
    Planner::new(scenario, options)?.plan_minimum(mode)
}
