//! Run configuration: command-line flags, flat `key = value` files and the
//! `RWRE_SEED` environment variable.
//!
//! Precedence, lowest first: built-in defaults, config file, `RWRE_SEED`,
//! command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Env,
    Walk,
    Brox,
    Forms,
    Converge,
    Semigroup,
    CompareDist,
    SinaiScaling,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Env => "env",
            Command::Walk => "walk",
            Command::Brox => "brox",
            Command::Forms => "forms",
            Command::Converge => "converge",
            Command::Semigroup => "semigroup",
            Command::CompareDist => "compare-dist",
            Command::SinaiScaling => "sinai-scaling",
        }
    }
}

/// Command-line interface. Every option can also be given in the config file
/// under the same name (without the dashes).
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "rwre", version, about = "Random walks in random environment and the Brox diffusion")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Scaling index for single-scale commands.
    #[arg(long)]
    pub n: Option<u64>,
    /// Comma-separated scaling indices.
    #[arg(long = "n-list", value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
    /// Number of environments.
    #[arg(long)]
    pub envs: Option<usize>,
    /// Number of Monte Carlo samples.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Half-width of the spatial window.
    #[arg(long)]
    pub window: Option<f64>,
    /// Truncation radius for form outputs.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Time horizon.
    #[arg(long = "t")]
    pub t_max: Option<f64>,
    /// Vanishing-noise exponent (converge only).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Vanishing-noise variance constant.
    #[arg(long)]
    pub c: Option<f64>,
    /// Refinement levels (semigroup).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Environment grid step.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Intrinsic Brownian time step.
    #[arg(long)]
    pub du: Option<f64>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed_root: u64,
    pub n: u64,
    pub n_list: Vec<u64>,
    pub num_envs: usize,
    pub num_samples: usize,
    pub t_max: f64,
    pub truncation_radius: f64,
    pub spatial_window: f64,
    pub output_dir: PathBuf,
    pub gamma: Option<f64>,
    pub c: f64,
    pub levels: usize,
    pub dx: f64,
    pub du: f64,
}

impl RunConfig {
    /// Defaults for `command`.
    pub fn defaults(command: Command) -> Self {
        let (n_list, num_samples, t_max) = match command {
            Command::CompareDist => (vec![100, 1_000, 10_000], 10_000, 1.0),
            Command::SinaiScaling => (vec![1_000, 10_000, 100_000], 1_000, 1.0),
            Command::Semigroup => (vec![64, 256, 1024, 4096], 10_000, 0.5),
            _ => (vec![64, 256, 1024, 4096], 10_000, 1.0),
        };
        Self {
            command,
            seed_root: 0,
            n: 1024,
            n_list,
            num_envs: 100,
            num_samples,
            t_max,
            truncation_radius: 8.0,
            spatial_window: 8.0,
            output_dir: PathBuf::from("rwre-out").join(command.name()),
            gamma: None,
            c: 1.0,
            levels: 4,
            dx: if command == Command::Converge { 1e-5 } else { 1e-3 },
            du: 1e-3,
        }
    }

    /// Resolves flags, the optional config file and `RWRE_SEED`.
    pub fn resolve(cli: &Cli, env_seed: Option<&str>) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => Some(parse_config_file(path)?),
            None => None,
        };
        let command = cli
            .command
            .or(file.as_ref().and_then(|f| f.command))
            .ok_or_else(|| Error::Config("no command given".into()))?;
        let mut cfg = Self::defaults(command);
        if let Some(f) = &file {
            cfg.apply(f);
        }
        if let Some(s) = env_seed {
            cfg.seed_root = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("RWRE_SEED = {s:?} is not an unsigned integer")))?;
        }
        cfg.apply(cli);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Cli) {
        if let Some(v) = o.n {
            self.n = v;
            if o.n_list.is_none() {
                self.n_list = vec![v];
            }
        }
        if let Some(v) = &o.n_list {
            self.n_list = v.clone();
        }
        if let Some(v) = o.envs {
            self.num_envs = v;
        }
        if let Some(v) = o.samples {
            self.num_samples = v;
        }
        if let Some(v) = o.seed {
            self.seed_root = v;
        }
        if let Some(v) = o.window {
            self.spatial_window = v;
        }
        if let Some(v) = o.radius {
            self.truncation_radius = v;
        }
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.t_max {
            self.t_max = v;
        }
        if o.gamma.is_some() {
            self.gamma = o.gamma;
        }
        if let Some(v) = o.c {
            self.c = v;
        }
        if let Some(v) = o.levels {
            self.levels = v;
        }
        if let Some(v) = o.dx {
            self.dx = v;
        }
        if let Some(v) = o.du {
            self.du = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.num_envs == 0 || self.num_samples == 0 || self.levels == 0 {
            return bad("n, envs, samples and levels must be positive".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad(format!("n_list must be non-empty and positive: {:?}", self.n_list));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("n_list must be strictly increasing: {:?}", self.n_list));
        }
        for (name, v) in [
            ("t", self.t_max),
            ("window", self.spatial_window),
            ("radius", self.truncation_radius),
            ("dx", self.dx),
            ("du", self.du),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be positive and finite"));
            }
        }
        if self.spatial_window < self.truncation_radius {
            return bad(format!(
                "window {} is smaller than the truncation radius {}",
                self.spatial_window, self.truncation_radius
            ));
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return bad(format!("gamma = {g} outside [0, 1)"));
            }
        }
        if !(self.c >= 0.0) {
            return bad(format!("c = {} must be >= 0", self.c));
        }
        if self.command == Command::SinaiScaling && self.n_list[0] < 2 {
            return bad("sinai-scaling needs n >= 2".into());
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("config key {key}: cannot parse {value:?}")))
}

/// Parses a flat `key = value` file (`#` starts a comment). Keys are the long
/// flag names; `command` selects the command.
pub fn parse_config_str(text: &str) -> Result<Cli> {
    let mut c = Cli::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        match key.as_str() {
            "command" => {
                c.command = Some(
                    Command::from_str(value, true)
                        .map_err(|_| Error::Parse(format!("unknown command {value:?}")))?,
                )
            }
            "n" => c.n = Some(parse_value(&key, value)?),
            "n-list" => {
                c.n_list = Some(
                    value
                        .split(',')
                        .map(|s| parse_value(&key, s.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "envs" => c.envs = Some(parse_value(&key, value)?),
            "samples" => c.samples = Some(parse_value(&key, value)?),
            "seed" => c.seed = Some(parse_value(&key, value)?),
            "window" => c.window = Some(parse_value(&key, value)?),
            "radius" => c.radius = Some(parse_value(&key, value)?),
            "out" => c.out = Some(PathBuf::from(value)),
            "t" => c.t_max = Some(parse_value(&key, value)?),
            "gamma" => c.gamma = Some(parse_value(&key, value)?),
            "c" => c.c = Some(parse_value(&key, value)?),
            "levels" => c.levels = Some(parse_value(&key, value)?),
            "dx" => c.dx = Some(parse_value(&key, value)?),
            "du" => c.du = Some(parse_value(&key, value)?),
            other => return Err(Error::Parse(format!("unknown config key {other:?}"))),
        }
    }
    Ok(c)
}

pub fn parse_config_file(path: &Path) -> Result<Cli> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
