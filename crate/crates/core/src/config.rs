//! Line-oriented `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Each key may appear
//! once, except `building`, which may repeat. Unknown keys are rejected.
//! Relative file paths resolve against the directory of the config file.
//!
//! | key | value |
//! |-----|-------|
//! | `carrier_hz`, `bandwidth_hz`, `tx_power_dbm`, `rate_target_bps` | number |
//! | `loss_factor`, `max_spectral_efficiency` | number |
//! | `noise_dbm` or `noise_figure_db` | number (mutually exclusive) |
//! | `cu_array`, `du_array` | `ROWSxCOLS` |
//! | `array_spacing` | element spacing in wavelengths |
//! | `element_beamwidth_deg`, `element_max_attenuation_db`, `element_max_gain_dbi` | number |
//! | `mode` | `greedy` or `exhaustive` |
//! | `precoder` | `slnr` or `zf` |
//! | `inter_cu_interference` | bool |
//! | `connectivity_threshold_dbm` | number |
//! | `plan_cus` | CU count for `sweep-arrays` |
//! | `sweep_cus` | comma list of CU counts |
//! | `sweep_arrays` | comma list of `ROWSxCOLS` |
//! | `nodes`, `trace` | file paths |
//! | `area_m`, `grid_rows`, `grid_cols`, `footprint_min`, `footprint_max` | scene layout |
//! | `min_height_m`, `max_height_m`, `cu_count`, `du_count`, `cu_mast_m`, `du_mast_m`, `seed` | scene layout |
//! | `absorption_db_per_m`, `reflections`, `reflection_loss_db`, `max_paths_per_pair` | propagation |
//! | `building` | `min_x min_y max_x max_y height`, repeatable |

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::arrays::ArrayConfig;
use crate::mimo::PrecoderKind;
use crate::planner::{EvalOptions, PlannerMode};
use crate::scene::{Building, SceneConfig};
use crate::trace::{NoiseSpec, RadioParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub radio: RadioParams,
    pub cu_array: ArrayConfig,
    pub du_array: ArrayConfig,
    pub mode: PlannerMode,
    pub precoder: PrecoderKind,
    pub inter_cu_interference: bool,
    pub connectivity_threshold_dbm: f64,
    pub plan_cus: Option<usize>,
    pub sweep_cus: Vec<usize>,
    pub sweep_arrays: Vec<(usize, usize)>,
    pub nodes: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub scene: SceneConfig,
    /// Fixed building list; when non-empty it replaces the random layout.
    pub buildings: Vec<Building>,
}

impl Default for Settings {
    fn default() -> Self {
        let eval = EvalOptions::default();
        Settings {
            radio: RadioParams::default(),
            cu_array: eval.cu_array,
            du_array: eval.du_array,
            mode: PlannerMode::default(),
            precoder: eval.precoder,
            inter_cu_interference: eval.inter_cu_interference,
            connectivity_threshold_dbm: eval.connectivity_threshold_dbm,
            plan_cus: None,
            sweep_cus: vec![1, 2, 3],
            sweep_arrays: vec![(8, 8), (16, 8), (16, 16)],
            nodes: None,
            trace: None,
            scene: SceneConfig::default(),
            buildings: Vec::new(),
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{value}`")),
    }
}

/// Parses `ROWSxCOLS`, e.g. `16x8`.
pub fn parse_array_size(value: &str) -> Result<(usize, usize), String> {
    let (r, c) = value
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got `{value}`"))?;
    let r: usize = parse_num(r.trim())?;
    let c: usize = parse_num(c.trim())?;
    if r == 0 || c == 0 {
        return Err("array dimensions must be >= 1".into());
    }
    Ok((r, c))
}

/// Parses a comma separated list with `item`.
pub fn parse_list<T>(value: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let out = value
        .split(',')
        .map(|s| item(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(out)
}

pub fn parse_cu_counts(value: &str) -> Result<Vec<usize>, String> {
    parse_list(value, |s| {
        let k: usize = parse_num(s)?;
        if k == 0 {
            return Err("CU counts must be >= 1".into());
        }
        Ok(k)
    })
}

pub fn parse_array_sizes(value: &str) -> Result<Vec<(usize, usize)>, String> {
    parse_list(value, parse_array_size)
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Settings::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{trimmed}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key != "building" && !seen.insert(key.to_owned()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_owned(),
                });
            }
            s.apply(key, value, base_dir).map_err(|e| match e {
                None => ConfigError::UnknownKey {
                    line,
                    key: key.to_owned(),
                },
                Some(message) => ConfigError::Value {
                    line,
                    key: key.to_owned(),
                    message,
                },
            })?;
        }
        if seen.contains("noise_dbm") && seen.contains("noise_figure_db") {
            return Err(ConfigError::Invalid(
                "`noise_dbm` and `noise_figure_db` are mutually exclusive".into(),
            ));
        }
        s.validate()?;
        Ok(s)
    }

    /// `Err(None)` for an unknown key.
    fn apply(&mut self, key: &str, value: &str, base_dir: &Path) -> Result<(), Option<String>> {
        let num = |v: &str| parse_num::<f64>(v).map_err(Some);
        let count = |v: &str| parse_num::<usize>(v).map_err(Some);
        let sc = &mut self.scene;
        match key {
            "carrier_hz" => self.radio.carrier_hz = num(value)?,
            "bandwidth_hz" => self.radio.bandwidth_hz = num(value)?,
            "tx_power_dbm" => self.radio.tx_power_dbm = num(value)?,
            "rate_target_bps" => self.radio.rate_target_bps = num(value)?,
            "loss_factor" => self.radio.loss_factor = num(value)?,
            "max_spectral_efficiency" => self.radio.max_spectral_efficiency = num(value)?,
            "noise_dbm" => self.radio.noise = NoiseSpec::Direct { noise_dbm: num(value)? },
            "noise_figure_db" => {
                self.radio.noise = NoiseSpec::Thermal {
                    noise_figure_db: num(value)?,
                }
            }
            "cu_array" => (self.cu_array.rows, self.cu_array.cols) = parse_array_size(value).map_err(Some)?,
            "du_array" => (self.du_array.rows, self.du_array.cols) = parse_array_size(value).map_err(Some)?,
            "array_spacing" => {
                let d = num(value)?;
                self.cu_array.spacing = d;
                self.du_array.spacing = d;
            }
            "element_beamwidth_deg" => {
                let v = num(value)?;
                self.cu_array.pattern.beamwidth_deg = v;
                self.du_array.pattern.beamwidth_deg = v;
            }
            "element_max_attenuation_db" => {
                let v = num(value)?;
                self.cu_array.pattern.max_attenuation_db = v;
                self.du_array.pattern.max_attenuation_db = v;
            }
            "element_max_gain_dbi" => {
                let v = num(value)?;
                self.cu_array.pattern.max_gain_dbi = v;
                self.du_array.pattern.max_gain_dbi = v;
            }
            "mode" => self.mode = value.parse().map_err(Some)?,
            "precoder" => self.precoder = value.parse().map_err(Some)?,
            "inter_cu_interference" => self.inter_cu_interference = parse_bool(value).map_err(Some)?,
            "connectivity_threshold_dbm" => self.connectivity_threshold_dbm = num(value)?,
            "plan_cus" => {
                let k = count(value)?;
                if k == 0 {
                    return Err(Some("must be >= 1".into()));
                }
                self.plan_cus = Some(k);
            }
            "sweep_cus" => self.sweep_cus = parse_cu_counts(value).map_err(Some)?,
            "sweep_arrays" => self.sweep_arrays = parse_array_sizes(value).map_err(Some)?,
            "nodes" => self.nodes = Some(base_dir.join(value)),
            "trace" => self.trace = Some(base_dir.join(value)),
            "area_m" => sc.area_m = num(value)?,
            "grid_rows" => sc.grid_rows = count(value)?,
            "grid_cols" => sc.grid_cols = count(value)?,
            "footprint_min" => sc.footprint_fraction.0 = num(value)?,
            "footprint_max" => sc.footprint_fraction.1 = num(value)?,
            "min_height_m" => sc.min_height_m = num(value)?,
            "max_height_m" => sc.max_height_m = num(value)?,
            "cu_count" => sc.cu_count = count(value)?,
            "du_count" => sc.du_count = count(value)?,
            "cu_mast_m" => sc.cu_mast_m = num(value)?,
            "du_mast_m" => sc.du_mast_m = num(value)?,
            "seed" => sc.seed = parse_num(value).map_err(Some)?,
            "absorption_db_per_m" => sc.propagation.absorption_db_per_m = num(value)?,
            "reflections" => sc.propagation.reflections = parse_bool(value).map_err(Some)?,
            "reflection_loss_db" => sc.propagation.reflection_loss_db = num(value)?,
            "max_paths_per_pair" => sc.propagation.max_paths_per_pair = count(value)?,
            "building" => {
                let f = value
                    .split_whitespace()
                    .map(parse_num::<f64>)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(Some)?;
                let [x0, y0, x1, y1, h] = f[..] else {
                    return Err(Some("expected `min_x min_y max_x max_y height`".into()));
                };
                self.buildings
                    .push(Building::new(x0, y0, x1, y1, h).map_err(|e| Some(e.to_string()))?);
            }
            _ => return Err(None),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.radio.validate().map_err(|e| invalid(&e))?;
        self.cu_array.validate().map_err(|e| invalid(&e))?;
        self.du_array.validate().map_err(|e| invalid(&e))?;
        self.scene.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            cu_array: self.cu_array,
            du_array: self.du_array,
            precoder: self.precoder,
            inter_cu_interference: self.inter_cu_interference,
            connectivity_threshold_dbm: self.connectivity_threshold_dbm,
        }
    }

    /// Scene description: layout and propagation keys plus one `building`
    /// line per building. Reads back through [`Settings::parse`].
    pub fn scene_text(&self, buildings: &[Building]) -> String {
        let sc = &self.scene;
        let p = &sc.propagation;
        let mut out = String::new();
        let _ = writeln!(out, "# scene");
        let _ = writeln!(out, "seed = {}", sc.seed);
        let _ = writeln!(out, "area_m = {}", sc.area_m);
        let _ = writeln!(out, "grid_rows = {}", sc.grid_rows);
        let _ = writeln!(out, "grid_cols = {}", sc.grid_cols);
        let _ = writeln!(out, "footprint_min = {}", sc.footprint_fraction.0);
        let _ = writeln!(out, "footprint_max = {}", sc.footprint_fraction.1);
        let _ = writeln!(out, "min_height_m = {}", sc.min_height_m);
        let _ = writeln!(out, "max_height_m = {}", sc.max_height_m);
        let _ = writeln!(out, "cu_count = {}", sc.cu_count);
        let _ = writeln!(out, "du_count = {}", sc.du_count);
        let _ = writeln!(out, "cu_mast_m = {}", sc.cu_mast_m);
        let _ = writeln!(out, "du_mast_m = {}", sc.du_mast_m);
        let _ = writeln!(out, "absorption_db_per_m = {}", p.absorption_db_per_m);
        let _ = writeln!(out, "reflections = {}", p.reflections);
        let _ = writeln!(out, "reflection_loss_db = {}", p.reflection_loss_db);
        let _ = writeln!(out, "max_paths_per_pair = {}", p.max_paths_per_pair);
        for b in buildings {
            let _ = writeln!(
                out,
                "building = {} {} {} {} {}",
                b.min_x, b.min_y, b.max_x, b.max_y, b.height
            );
        }
        out
    }
}
