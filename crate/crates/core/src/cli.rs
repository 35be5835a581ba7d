//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure, 2 configuration error,
//! 3 infeasible plan, 4 I/O error, 5 invalid input data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::arrays::{align_cu, align_du, ArrayConfig};
use crate::channel::synthesize_channel;
use crate::config::{parse_array_sizes, parse_cu_counts, ConfigError, Settings};
use crate::mimo::{MimoError, PrecoderKind};
use crate::node::NodeId;
use crate::planner::{associate, greedy_order, AssociationPlan, EvalOptions, PlanError, Planner, PlannerMode};
use crate::report::{emit_plot_data, metrics_csv, PlanReport, SweepSeries};
use crate::scene::{generate_scene, place_on_buildings, synthesize_paths};
use crate::trace::{parse_nodes, parse_trace, serialize_nodes, serialize_trace, Scenario, TraceError};

#[derive(Debug, Parser)]
#[command(name = "midhaul", version, about = "Plan sub-THz wireless midhaul links between CUs and DUs")]
pub struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scene seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// CU search strategy.
    #[arg(long, global = true)]
    pub mode: Option<PlannerMode>,
    /// Precoder used at every CU.
    #[arg(long, global = true)]
    pub precoder: Option<PrecoderKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct InputArgs {
    /// Node inventory CSV (`node_id,kind,x_m,y_m,z_m`).
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Path trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene: scene.cfg, nodes.csv and trace.csv.
    GenerateScene,
    /// Find the smallest CU set meeting the rate target on every link.
    Plan(InputArgs),
    /// Evaluate the first k greedily ordered CUs for each k.
    SweepCus {
        #[command(flatten)]
        input: InputArgs,
        /// Comma list of CU counts, e.g. `1,2,3`.
        counts: Option<String>,
    },
    /// Count links meeting the rate target for each array size.
    SweepArrays {
        #[command(flatten)]
        input: InputArgs,
        /// Comma list of array sizes, e.g. `8x8,16x8,16x16`.
        sizes: Option<String>,
        /// Number of CUs to keep fixed; defaults to the minimum plan.
        #[arg(long)]
        cus: Option<usize>,
    },
    /// Parse and check a node file and a trace.
    ValidateTrace(InputArgs),
    /// Write one aligned channel matrix as `row,col,re,im` CSV.
    DumpChannel {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        cu: String,
        #[arg(long)]
        du: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: TraceError },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Data { .. } | CliError::Scenario(_) => 5,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Uncoverable(_) => CliError::Infeasible(e.to_string()),
            PlanError::UnknownCu(_) | PlanError::Invalid(_) => CliError::Config(e.to_string()),
            PlanError::Precoding {
                source: MimoError::ZfInfeasible { .. },
                ..
            } => CliError::Config(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

/// Resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub settings: Settings,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let mut settings = match &cli.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        if let Some(seed) = cli.seed {
            settings.scene.seed = seed;
        }
        if let Some(mode) = cli.mode {
            settings.mode = mode;
        }
        if let Some(p) = cli.precoder {
            settings.precoder = p;
        }
        Ok(RunConfig {
            settings,
            out: cli.out.clone(),
        })
    }

    fn input_path(&self, flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        flag.clone()
            .or_else(|| configured.clone())
            .ok_or_else(|| CliError::Config(format!("no {what} file given (use --{what} or the `{what}` key)")))
    }

    /// Reads nodes and trace named by flags or config.
    pub fn load_scenario(&self, input: &InputArgs) -> Result<Scenario, CliError> {
        let s = &self.settings;
        let nodes_path = self.input_path(&input.nodes, &s.nodes, "nodes")?;
        let trace_path = self.input_path(&input.trace, &s.trace, "trace")?;
        let nodes = parse_nodes(open(&nodes_path)?).map_err(|source| CliError::Data {
            path: nodes_path.clone(),
            source,
        })?;
        let paths = parse_trace(open(&trace_path)?).map_err(|source| CliError::Data {
            path: trace_path.clone(),
            source,
        })?;
        Scenario::new(nodes, paths, s.radio, s.scene.propagation.max_paths_per_pair)
            .map_err(|e| CliError::Scenario(e.to_string()))
    }
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Parses arguments, runs, prints diagnostics and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Executes one subcommand; returns the text printed on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::from_cli(cli)?;
    match &cli.command {
        Command::GenerateScene => generate(&cfg),
        Command::Plan(input) => plan(&cfg, input),
        Command::SweepCus { input, counts } => {
            let counts = match counts {
                Some(c) => parse_cu_counts(c).map_err(CliError::Config)?,
                None => cfg.settings.sweep_cus.clone(),
            };
            sweep_cus(&cfg, input, &counts)
        }
        Command::SweepArrays { input, sizes, cus } => {
            let sizes = match sizes {
                Some(s) => parse_array_sizes(s).map_err(CliError::Config)?,
                None => cfg.settings.sweep_arrays.clone(),
            };
            sweep_arrays(&cfg, input, &sizes, cus.or(cfg.settings.plan_cus))
        }
        Command::ValidateTrace(input) => validate(&cfg, input),
        Command::DumpChannel { input, cu, du } => dump_channel(&cfg, input, cu, du),
    }
}

fn generate(cfg: &RunConfig) -> Result<String, CliError> {
    let s = &cfg.settings;
    let (buildings, nodes) = if s.buildings.is_empty() {
        generate_scene(&s.scene)
    } else {
        place_on_buildings(&s.scene, s.buildings.clone())
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let paths = synthesize_paths(&nodes, &buildings, &s.radio, &s.scene.propagation);
    write(&cfg.out, "scene.cfg", &s.scene_text(&buildings))?;
    write(&cfg.out, "nodes.csv", &serialize_nodes(&nodes))?;
    write(&cfg.out, "trace.csv", &serialize_trace(&paths))?;
    Ok(format!(
        "wrote {} buildings, {} nodes, {} paths to {}\n",
        buildings.len(),
        nodes.len(),
        paths.len(),
        cfg.out.display()
    ))
}

fn plan(cfg: &RunConfig, input: &InputArgs) -> Result<String, CliError> {
    let scenario = cfg.load_scenario(input)?;
    let planner = Planner::new(&scenario, cfg.settings.eval_options())?;
    let plan = planner.plan_minimum(cfg.settings.mode)?;
    let report = PlanReport::new(&plan, &scenario.radio);
    let text = report.to_text();
    write(&cfg.out, "plan.json", &report.to_json())?;
    write(&cfg.out, "plan.txt", &text)?;
    write(&cfg.out, "metrics.csv", &metrics_csv(&plan.links))?;
    if !plan.feasible {
        print!("{text}");
        return Err(CliError::Infeasible(format!(
            "no CU set meets the rate target on every link; best plan uses {} CUs with {} of {} links at target",
            plan.selected.len(),
            plan.links_meeting_target(),
            plan.du_count()
        )));
    }
    Ok(text)
}

/// Plans for the first `k` CUs of the greedy order, for each `k`.
pub fn cu_sweep(
    scenario: &Scenario,
    options: EvalOptions,
    counts: &[usize],
) -> Result<Vec<(usize, AssociationPlan)>, CliError> {
    let planner = Planner::new(scenario, options)?;
    let order = greedy_order(&planner.graph)?.order;
    if let Some(&k) = counts.iter().find(|&&k| k == 0 || k > order.len()) {
        return Err(CliError::Config(format!(
            "CU count {k} outside 1..={}",
            order.len()
        )));
    }
    counts
        .par_iter()
        .map(|&k| Ok((k, planner.evaluate(&associate(&order[..k], &planner.graph))?)))
        .collect()
}

fn sweep_cus(cfg: &RunConfig, input: &InputArgs, counts: &[usize]) -> Result<String, CliError> {
    let scenario = cfg.load_scenario(input)?;
    let plans = cu_sweep(&scenario, cfg.settings.eval_options(), counts)?;
    let mut summary = String::from("cus,links_at_target,dus,min_rate_bps\n");
    let mut labels = Vec::new();
    for (k, plan) in &plans {
        write(&cfg.out, &format!("metrics_{k}cu.csv"), &metrics_csv(&plan.links))?;
        summary.push_str(&format!(
            "{k},{},{},{:?}\n",
            plan.links_meeting_target(),
            plan.du_count(),
            plan.min_rate_bps()
        ));
        labels.push(format!("{k}cu"));
    }
    let series: Vec<SweepSeries> = plans
        .iter()
        .zip(labels)
        .map(|((_, p), label)| SweepSeries { label, links: &p.links })
        .collect();
    write(&cfg.out, "plot_data.csv", &emit_plot_data(&scenario.du_ids(), &series, &scenario.radio))?;
    write(&cfg.out, "cu_sweep.csv", &summary)?;
    Ok(summary)
}

/// Evaluates one CU selection with every array size (applied at both ends).
pub fn array_sweep(
    scenario: &Scenario,
    options: EvalOptions,
    selected: &[NodeId],
    sizes: &[(usize, usize)],
) -> Result<Vec<((usize, usize), AssociationPlan)>, CliError> {
    sizes
        .par_iter()
        .map(|&(rows, cols)| {
            let array = ArrayConfig {
                rows,
                cols,
                ..options.cu_array
            };
            let opts = EvalOptions {
                cu_array: array,
                du_array: ArrayConfig {
                    rows,
                    cols,
                    ..options.du_array
                },
                ..options
            };
            let planner = Planner::new(scenario, opts)?;
            Ok(((rows, cols), planner.evaluate(&associate(selected, &planner.graph))?))
        })
        .collect()
}

fn sweep_arrays(
    cfg: &RunConfig,
    input: &InputArgs,
    sizes: &[(usize, usize)],
    cus: Option<usize>,
) -> Result<String, CliError> {
    let scenario = cfg.load_scenario(input)?;
    let options = cfg.settings.eval_options();
    let planner = Planner::new(&scenario, options)?;
    let selected = match cus {
        Some(k) => {
            let order = greedy_order(&planner.graph)?.order;
            if k == 0 || k > order.len() {
                return Err(CliError::Config(format!("CU count {k} outside 1..={}", order.len())));
            }
            order[..k].to_vec()
        }
        None => planner.plan_minimum(cfg.settings.mode)?.selected,
    };
    let results = array_sweep(&scenario, options, &selected, sizes)?;
    let mut summary = String::from("array,elements,links_at_target,dus,min_rate_bps\n");
    for ((r, c), plan) in &results {
        write(&cfg.out, &format!("metrics_{r}x{c}.csv"), &metrics_csv(&plan.links))?;
        summary.push_str(&format!(
            "{r}x{c},{},{},{},{:?}\n",
            r * c,
            plan.links_meeting_target(),
            plan.du_count(),
            plan.min_rate_bps()
        ));
    }
    write(&cfg.out, "array_sweep.csv", &summary)?;
    Ok(summary)
}

fn validate(cfg: &RunConfig, input: &InputArgs) -> Result<String, CliError> {
    let scenario = cfg.load_scenario(input)?;
    let pairs = scenario.paths_by_pair();
    Ok(format!(
        "ok: {} CUs, {} DUs, {} paths over {} CU-DU pairs\n",
        scenario.cu_ids().len(),
        scenario.du_ids().len(),
        scenario.paths.len(),
        pairs.len()
    ))
}

fn dump_channel(cfg: &RunConfig, input: &InputArgs, cu: &str, du: &str) -> Result<String, CliError> {
    let scenario = cfg.load_scenario(input)?;
    let (cu, du) = (NodeId::from(cu), NodeId::from(du));
    let mut pairs = scenario.paths_by_pair();
    let paths = pairs
        .remove(&(cu.clone(), du.clone()))
        .ok_or_else(|| CliError::Config(format!("no paths between {cu} and {du}")))?;
    let s = &cfg.settings;
    let du_state = align_du(s.du_array, &paths).map_err(|e| CliError::Internal(e.to_string()))?;
    let connected = [(du.clone(), paths.clone())].into_iter().collect();
    let cu_state = align_cu(s.cu_array, &connected).map_err(|e| CliError::Internal(e.to_string()))?;
    let h = synthesize_channel(&paths, &du_state, &cu_state, s.radio.carrier_hz, s.radio.tx_power_dbm)
        .map_err(|e| CliError::Internal(e.to_string()))?
        .dense();
    let mut out = String::from("row,col,re,im\n");
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            let v = h[(r, c)];
            out.push_str(&format!("{r},{c},{:?},{:?}\n", v.re, v.im));
        }
    }
    let path = write(&cfg.out, &format!("channel_{cu}_{du}.csv"), &out)?;
    Ok(format!("wrote {}x{} channel to {}\n", h.nrows(), h.ncols(), path.display()))
}
