//! Run configuration: a flat `key=value` file with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use maxwell1d::io::read_key_values;
use maxwell1d::solver::{Scheme, SolverConfig};
use maxwell1d::{FrequencyGrid, MixingParams, SpectralState};

use crate::CliError;

/// Initial data for `evolve`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Gaussian,
    TwoPoint,
    Steady,
    File(PathBuf),
}

impl InitSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(InitSpec::Gaussian),
            "twopoint" => Ok(InitSpec::TwoPoint),
            "steady" => Ok(InitSpec::Steady),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(InitSpec::File(PathBuf::from(path))),
                _ => Err(format!("init must be gaussian, twopoint, steady or file:<path>, got {other:?}")),
            },
        }
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Gaussian => f.write_str("gaussian"),
            InitSpec::TwoPoint => f.write_str("twopoint"),
            InitSpec::Steady => f.write_str("steady"),
            InitSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: MixingParams,
    pub scheme: Scheme,
    pub solver: SolverConfig,
    pub init: InitSpec,
    pub xi_max: f64,
    pub n_points: usize,
    pub out: PathBuf,
    pub created: u64,
}

pub const KEYS: &[&str] = &[
    "p", "q", "scheme", "dt", "t_end", "quad_nodes", "snapshot_every", "tail_tol", "init", "xi_max", "n_points",
    "out", "created",
];

fn defaults() -> BTreeMap<&'static str, String> {
    let d = SolverConfig::default();
    [
        ("p", "0.7".to_string()),
        ("q", "0.3".to_string()),
        ("scheme", "scaled".to_string()),
        ("dt", d.dt.to_string()),
        ("t_end", d.t_end.to_string()),
        ("quad_nodes", d.quad_nodes.to_string()),
        ("snapshot_every", d.snapshot_every.to_string()),
        ("tail_tol", d.tail_tol.to_string()),
        ("init", "gaussian".to_string()),
        ("xi_max", "40".to_string()),
        ("n_points", "4097".to_string()),
        ("out", "run".to_string()),
    ]
    .into_iter()
    .collect()
}

/// Reproducible default for the manifest timestamp.
fn default_created() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| CliError::Usage(format!("{key}: cannot parse {v:?}: {e}")))
}

impl RunConfig {
    /// Defaults, then the file (if any), then `overrides`, in that order.
    pub fn build(file: Option<&Path>, overrides: &[(&str, Option<String>)]) -> Result<Self, CliError> {
        let mut map: BTreeMap<&str, String> = defaults();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let kv = read_key_values(&text)
                .map_err(|(line, msg)| CliError::Usage(format!("{}:{line}: {msg}", path.display())))?;
            for (k, (line, v)) in kv {
                let key = KEYS
                    .iter()
                    .find(|&&known| known == k)
                    .ok_or_else(|| CliError::Usage(format!("{}:{line}: unknown key {k:?}", path.display())))?;
                map.insert(key, v);
            }
        }
        for (k, v) in overrides {
            if let Some(v) = v {
                map.insert(k, v.clone());
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str).unwrap_or_default();
        let params = MixingParams::new(parse("p", get("p"))?, parse("q", get("q"))?)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let scheme: Scheme = get("scheme").parse().map_err(CliError::Usage)?;
        let solver = SolverConfig {
            dt: parse("dt", get("dt"))?,
            t_end: parse("t_end", get("t_end"))?,
            quad_nodes: parse("quad_nodes", get("quad_nodes"))?,
            snapshot_every: parse("snapshot_every", get("snapshot_every"))?,
            tail_tol: parse("tail_tol", get("tail_tol"))?,
        };
        let cfg = RunConfig {
            params,
            scheme,
            solver,
            init: InitSpec::parse(get("init")).map_err(CliError::Usage)?,
            xi_max: parse("xi_max", get("xi_max"))?,
            n_points: parse("n_points", get("n_points"))?,
            out: PathBuf::from(get("out")),
            created: match map.get("created") {
                Some(v) => parse("created", v)?,
                None => default_created(),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything that can be checked without touching the initial data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.solver.validate_for(&self.params, self.scheme).map_err(|e| match e {
            maxwell1d::Error::ElasticSingularity => CliError::Core(e),
            other => CliError::Usage(other.to_string()),
        })?;
        if !matches!(self.init, InitSpec::File(_)) {
            FrequencyGrid::new(self.xi_max, self.n_points).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<FrequencyGrid, CliError> {
        FrequencyGrid::new(self.xi_max, self.n_points).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<SpectralState, CliError> {
        let kind = self.scheme.state_kind();
        Ok(match &self.init {
            InitSpec::Gaussian => SpectralState::gaussian(self.grid()?, self.params, kind),
            InitSpec::TwoPoint => SpectralState::two_point(self.grid()?, self.params, kind),
            InitSpec::Steady => SpectralState::explicit_steady(self.grid()?, self.params, kind),
            InitSpec::File(path) => SpectralState::load(path)?.with_kind(kind).with_params(self.params),
        })
    }

    /// Initial-data descriptor recorded in the manifest, including the grid.
    pub fn descriptor(&self) -> String {
        match &self.init {
            InitSpec::File(_) => self.init.to_string(),
            other => format!("{other} xi_max:{} n_points:{}", self.xi_max, self.n_points),
        }
    }
}
