//! Plain-text scenario configuration.
//!
//! One `section.key = value` pair per line, `#` starts a comment. Unknown keys
//! are rejected with their line number. A bare `seed = N` sets both the demand
//! seed and the driver-noise seed.
//!
//! ```text
//! network.rows = 3
//! network.cols = 4
//! demand.vehicles = 600
//! demand.penetration = 0.25
//! closure.edges = central
//! closure.start = 1200
//! closure.end = 2400
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::demand::{generate_trips, load_trips, DemandConfig};
use crate::engine::{EngineConfig, MetricsConfig, ModelParams, Scenario};
use crate::events::{ClosureEvent, DEFAULT_CLOSURE_END, DEFAULT_CLOSURE_START};
use crate::network::{
    build_grid, central_edges, load_network, EdgeId, Network, DEFAULT_EDGE_LENGTH, DEFAULT_SPEED_LIMIT,
};
use crate::routing::{HdvRerouting, ReroutePolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    Grid { rows: u32, cols: u32, edge_length: f64, speed_limit: f64, lanes: u32 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClosureEdges {
    /// The `k` links nearest the network centroid, both directions.
    Central(usize),
    Ids(Vec<EdgeId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureSpec {
    pub edges: ClosureEdges,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub network: NetworkSpec,
    pub demand: DemandConfig,
    /// Explicit trip list; replaces generated demand when set.
    pub trips_file: Option<PathBuf>,
    pub models: ModelParams,
    pub closure: Option<ClosureSpec>,
    pub engine: EngineConfig,
    pub policy: ReroutePolicy,
    pub metrics: MetricsConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            network: NetworkSpec::Grid {
                rows: 3,
                cols: 4,
                edge_length: DEFAULT_EDGE_LENGTH,
                speed_limit: DEFAULT_SPEED_LIMIT,
                lanes: 1,
            },
            demand: DemandConfig::default(),
            trips_file: None,
            models: ModelParams::default(),
            closure: None,
            engine: EngineConfig::default(),
            policy: ReroutePolicy::default(),
            metrics: MetricsConfig::default(),
            output_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.demand.seed = seed;
        self.engine.seed = seed;
    }

    /// Parses config text. Relative file paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut grid = GridFields::default();
        let mut network_file: Option<PathBuf> = None;
        let mut closure = ClosureFields::default();
        let resolve = |p: &str| match base {
            Some(dir) if Path::new(p).is_relative() => dir.join(p),
            _ => PathBuf::from(p),
        };

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Syntax { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            let num = |v: &str| parse_value::<f64>(v, key, line);
            match key {
                "seed" => cfg.set_seed(parse_value(value, key, line)?),

                "network.rows" => grid.rows = Some(parse_value(value, key, line)?),
                "network.cols" => grid.cols = Some(parse_value(value, key, line)?),
                "network.edge_length" => grid.edge_length = Some(num(value)?),
                "network.speed_limit" => grid.speed_limit = Some(num(value)?),
                "network.lanes" => grid.lanes = Some(parse_value(value, key, line)?),
                "network.file" => network_file = Some(resolve(value)),

                "demand.vehicles" => cfg.demand.total_vehicles = parse_value(value, key, line)?,
                "demand.horizon" => cfg.demand.horizon = num(value)?,
                "demand.penetration" => cfg.demand.penetration = parse_penetration(value, line)?,
                "demand.seed" => cfg.demand.seed = parse_value(value, key, line)?,
                "demand.trips_file" => cfg.trips_file = Some(resolve(value)),

                "krauss.accel" => cfg.models.krauss.accel = num(value)?,
                "krauss.decel" => cfg.models.krauss.decel = num(value)?,
                "krauss.tau" => cfg.models.krauss.tau = num(value)?,
                "krauss.sigma" => cfg.models.krauss.sigma = num(value)?,
                "krauss.v_max" => cfg.models.krauss.v_max = num(value)?,
                "krauss.min_gap" => cfg.models.krauss.min_gap = num(value)?,
                "krauss.length" => cfg.models.krauss.length = num(value)?,

                "idm.accel" => cfg.models.idm.accel = num(value)?,
                "idm.decel" => cfg.models.idm.decel = num(value)?,
                "idm.time_headway" | "idm.T" => cfg.models.idm.time_headway = num(value)?,
                "idm.s0" => cfg.models.idm.s0 = num(value)?,
                "idm.delta" => cfg.models.idm.delta = num(value)?,
                "idm.v_max" => cfg.models.idm.v_max = num(value)?,
                "idm.length" => cfg.models.idm.length = num(value)?,

                "closure.edges" => closure.edges = Some(parse_closure_edges(value, line)?),
                "closure.start" => closure.start = Some(num(value)?),
                "closure.end" => closure.end = Some(num(value)?),

                "engine.dt" => cfg.engine.dt = num(value)?,
                "engine.end_time" => cfg.engine.end_time = num(value)?,
                "engine.seed" => cfg.engine.seed = parse_value(value, key, line)?,
                "engine.insertion_min_gap" => cfg.engine.insertion_min_gap = num(value)?,
                "engine.strict" => cfg.engine.strict = parse_value(value, key, line)?,

                "routing.hdv_policy" => {
                    cfg.policy.hdv = match value {
                        "sign" => HdvRerouting::SignVisibility,
                        "immediate" => HdvRerouting::Immediate,
                        other => return Err(err(format!("hdv_policy must be `sign` or `immediate`, got `{other}`"))),
                    }
                }

                "metrics.pet_threshold" => cfg.metrics.pet_threshold = num(value)?,
                "metrics.c0" => cfg.metrics.fuel.c0 = num(value)?,
                "metrics.c1" => cfg.metrics.fuel.c1 = num(value)?,
                "metrics.c2" => cfg.metrics.fuel.c2 = num(value)?,
                "metrics.c3" => cfg.metrics.fuel.c3 = num(value)?,
                "metrics.c4" => cfg.metrics.fuel.c4 = num(value)?,
                "metrics.c5" => cfg.metrics.fuel.c5 = num(value)?,

                "output.dir" => cfg.output_dir = Some(resolve(value)),

                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }

        if let Some(path) = network_file {
            if grid.any() {
                return Err(ConfigError::Invalid("network.file cannot be combined with grid keys".into()));
            }
            cfg.network = NetworkSpec::File(path);
        } else if let NetworkSpec::Grid { rows, cols, edge_length, speed_limit, lanes } = &mut cfg.network {
            *rows = grid.rows.unwrap_or(*rows);
            *cols = grid.cols.unwrap_or(*cols);
            *edge_length = grid.edge_length.unwrap_or(*edge_length);
            *speed_limit = grid.speed_limit.unwrap_or(*speed_limit);
            *lanes = grid.lanes.unwrap_or(*lanes);
        }
        cfg.closure = closure.finish()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        ScenarioConfig::parse(&text, path.parent())
    }

    pub fn build_network(&self) -> Result<Network, ConfigError> {
        let net = match &self.network {
            NetworkSpec::Grid { rows, cols, edge_length, speed_limit, lanes } => {
                build_grid(*rows, *cols, *edge_length, *speed_limit, *lanes)
            }
            NetworkSpec::File(path) => load_network(&read(path)?),
        };
        net.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Builds and validates a runnable scenario.
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let network = self.build_network()?;
        let trips = match &self.trips_file {
            Some(path) => load_trips(&read(path)?).map_err(|e| invalid(&e))?,
            None => generate_trips(&network, &self.demand).map_err(|e| invalid(&e))?,
        };
        let mut events = Vec::new();
        if let Some(c) = &self.closure {
            let ids = match &c.edges {
                ClosureEdges::Central(k) => central_edges(&network, *k).map_err(|e| invalid(&e))?,
                ClosureEdges::Ids(ids) => ids.clone(),
            };
            events.push(ClosureEvent::new(ids, c.start, c.end));
        }
        let scenario = Scenario {
            network,
            trips,
            events,
            models: self.models,
            policy: self.policy,
            engine: self.engine,
            metrics: self.metrics,
        };
        scenario.validate().map_err(|e| invalid(&e))?;
        Ok(scenario)
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

fn parse_value<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Syntax { line, message: format!("bad value `{value}` for `{key}`") })
}

/// Accepts a fraction (`0.25`) or a percentage (`25%`).
fn parse_penetration(value: &str, line: usize) -> Result<f64, ConfigError> {
    let p = match value.strip_suffix('%') {
        Some(pct) => parse_value::<f64>(pct.trim(), "demand.penetration", line)? / 100.0,
        None => parse_value::<f64>(value, "demand.penetration", line)?,
    };
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(ConfigError::Syntax { line, message: format!("penetration must lie in [0, 1], got {value}") })
    }
}

fn parse_closure_edges(value: &str, line: usize) -> Result<ClosureEdges, ConfigError> {
    if value == "central" {
        return Ok(ClosureEdges::Central(1));
    }
    if let Some(k) = value.strip_prefix("central:") {
        return Ok(ClosureEdges::Central(parse_value(k.trim(), "closure.edges", line)?));
    }
    value
        .split(',')
        .map(|s| parse_value(s.trim(), "closure.edges", line))
        .collect::<Result<Vec<EdgeId>, _>>()
        .map(ClosureEdges::Ids)
}

#[derive(Default)]
struct GridFields {
    rows: Option<u32>,
    cols: Option<u32>,
    edge_length: Option<f64>,
    speed_limit: Option<f64>,
    lanes: Option<u32>,
}

impl GridFields {
    fn any(&self) -> bool {
        self.rows.is_some()
            || self.cols.is_some()
            || self.edge_length.is_some()
            || self.speed_limit.is_some()
            || self.lanes.is_some()
    }
}

#[derive(Default)]
struct ClosureFields {
    edges: Option<ClosureEdges>,
    start: Option<f64>,
    end: Option<f64>,
}

impl ClosureFields {
    fn finish(self) -> Result<Option<ClosureSpec>, ConfigError> {
        match self.edges {
            None if self.start.is_some() || self.end.is_some() => {
                Err(ConfigError::Invalid("closure window given without closure.edges".into()))
            }
            None => Ok(None),
            Some(edges) => Ok(Some(ClosureSpec {
                edges,
                start: self.start.unwrap_or(DEFAULT_CLOSURE_START),
                end: self.end.unwrap_or(DEFAULT_CLOSURE_END),
            })),
        }
    }
}
