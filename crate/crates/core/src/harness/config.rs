//! Run configuration and the flat `key = value` config format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agent::{DEFAULT_EPSILON, DEFAULT_GAMMA, DEFAULT_GO_BONUS, DEFAULT_LEARNING_RATE};
use crate::density::{Kernel, DEFAULT_BANDWIDTH};
use crate::envs::GridMaze;
use crate::replay::RfaabRatios;
use crate::select::{Strategy, DEFAULT_NUM_CANDIDATES, DEFAULT_OMEGA_BIAS};

use super::HarnessError;

/// Training environments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvId {
    Spiral10,
    UCorridor,
    /// A layout file in the text grid format.
    Layout(PathBuf),
}

impl EnvId {
    /// Default step budget.
    pub fn default_steps(&self) -> usize {
        match self {
            EnvId::UCorridor => 600_000,
            _ => 200_000,
        }
    }

    pub fn name(&self) -> String {
        match self {
            EnvId::Spiral10 => "spiral10".into(),
            EnvId::UCorridor => "ucorridor".into(),
            EnvId::Layout(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "layout".into()),
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvId::Layout(p) => write!(f, "{}", p.display()),
            other => f.write_str(&other.name()),
        }
    }
}

impl FromStr for EnvId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "spiral10" => Ok(EnvId::Spiral10),
            "ucorridor" => Ok(EnvId::UCorridor),
            other if other.ends_with(".txt") => Ok(EnvId::Layout(PathBuf::from(other))),
            other => Err(format!(
                "unknown environment '{other}' (expected spiral10, ucorridor or a .txt layout)"
            )),
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvId,
    pub strategy: Strategy,
    pub seed: u64,
    /// Environment steps; `None` uses the environment's default budget.
    pub total_steps: Option<usize>,
    pub episodes_per_eval: usize,
    pub eval_episodes: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub go_bonus: f64,
    pub rfaab: RfaabRatios,
    pub warmup_random_steps: usize,
    /// Steps during which relabeling is pure `future`.
    pub warmup_relabel_steps: usize,
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub num_candidates: usize,
    pub omega_bias: f64,
    pub kl_samples: usize,
    /// Buffer samples used for the entropy metric.
    pub entropy_samples: usize,
    /// Initial Q-value; `None` means `−1/(1−γ)`.
    pub q_init: Option<f64>,
    /// Maximum stored transitions; `None` keeps everything.
    pub replay_capacity: Option<usize>,
    /// Episode length override for the maze.
    pub horizon: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvId::Spiral10,
            strategy: Strategy::Mega,
            seed: 0,
            total_steps: None,
            episodes_per_eval: 50,
            eval_episodes: 50,
            batch_size: 256,
            learning_rate: DEFAULT_LEARNING_RATE,
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            go_bonus: DEFAULT_GO_BONUS,
            rfaab: RfaabRatios::default(),
            warmup_random_steps: 1000,
            warmup_relabel_steps: 5000,
            bandwidth: DEFAULT_BANDWIDTH,
            kernel: Kernel::Gaussian,
            num_candidates: DEFAULT_NUM_CANDIDATES,
            omega_bias: DEFAULT_OMEGA_BIAS,
            kl_samples: 500,
            entropy_samples: 1000,
            q_init: None,
            replay_capacity: None,
            horizon: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_with<T, E: fmt::Display>(key: &str, r: Result<T, E>) -> Result<T, HarnessError> {
    r.map_err(|e| HarnessError::Config(format!("{key}: {e}")))
}

/// Splits config text into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "env" => self.env = parse_with(key, value.parse())?,
            "strategy" => self.strategy = parse_with(key, value.parse())?,
            "seed" => self.seed = parse(key, value)?,
            "total_steps" | "steps" => self.total_steps = Some(parse(key, value)?),
            "episodes_per_eval" => self.episodes_per_eval = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "go_bonus" => self.go_bonus = parse(key, value)?,
            "rfaab" => self.rfaab = parse_with(key, value.parse())?,
            "warmup_random_steps" => self.warmup_random_steps = parse(key, value)?,
            "warmup_relabel_steps" => self.warmup_relabel_steps = parse(key, value)?,
            "bandwidth" => self.bandwidth = parse(key, value)?,
            "kernel" => self.kernel = parse_with(key, value.parse())?,
            "num_candidates" => self.num_candidates = parse(key, value)?,
            "omega_bias" | "b" => self.omega_bias = parse(key, value)?,
            "kl_samples" => self.kl_samples = parse(key, value)?,
            "entropy_samples" => self.entropy_samples = parse(key, value)?,
            "q_init" => {
                self.q_init = match value {
                    "pessimistic" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "replay_capacity" => {
                self.replay_capacity = match value {
                    "none" | "infinite" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "horizon" => self.horizon = Some(parse(key, value)?),
            other => return Err(HarnessError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every pair of a config text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// The step budget, falling back to the environment default.
    pub fn steps(&self) -> usize {
        self.total_steps.unwrap_or_else(|| self.env.default_steps())
    }

    /// Initial Q-value actually used.
    pub fn initial_q(&self) -> f64 {
        self.q_init.unwrap_or(-1.0 / (1.0 - self.gamma))
    }

    /// Checks ranges and builds the maze.
    pub fn validate(&self) -> Result<GridMaze, HarnessError> {
        let positive = [
            ("total_steps", self.steps()),
            ("episodes_per_eval", self.episodes_per_eval),
            ("batch_size", self.batch_size),
            ("num_candidates", self.num_candidates),
            ("kl_samples", self.kl_samples),
            ("entropy_samples", self.entropy_samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(HarnessError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(HarnessError::Config("gamma must be in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(HarnessError::Config("learning_rate must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) || self.go_bonus < 0.0 {
            return Err(HarnessError::Config(
                "epsilon must be in [0, 1] and go_bonus non-negative".into(),
            ));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(HarnessError::Config("bandwidth must be positive".into()));
        }
        if let Some(q) = self.q_init {
            if !(q <= 0.0 && q >= -1.0 / (1.0 - self.gamma) - 1e-9) {
                return Err(HarnessError::Config("q_init must be in [-1/(1-gamma), 0]".into()));
            }
        }
        if self.strategy == Strategy::EgOracle {
            return Err(HarnessError::Config(
                "eg-oracle needs a known conditional and is only available in the toy experiment"
                    .into(),
            ));
        }
        let mut maze = match &self.env {
            EnvId::Spiral10 => GridMaze::spiral10(),
            EnvId::UCorridor => GridMaze::ucorridor(),
            EnvId::Layout(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    HarnessError::Config(format!("cannot read layout {}: {e}", path.display()))
                })?;
                GridMaze::parse(&text, self.horizon.unwrap_or(50))?
            }
        };
        if let Some(h) = self.horizon {
            maze = maze.with_horizon(h)?;
        }
        Ok(maze)
    }
}

/// A strategy × seed grid over one base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl SweepConfig {
    /// Parses a config text; `strategies`, `seeds` and `out_dir` are the
    /// sweep keys, every other key sets the base run.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut base = RunConfig::default();
        let mut strategies = None;
        let mut seeds = None;
        let mut out_dir = PathBuf::from("sweep_out");
        for (k, v) in parse_pairs(text)? {
            match k.as_str() {
                "strategies" => {
                    strategies = Some(
                        v.split(',')
                            .map(|s| parse_with("strategies", s.parse::<Strategy>()))
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                "seeds" => seeds = Some(parse_seeds(&v)?),
                "out_dir" => out_dir = PathBuf::from(v),
                _ => base.set(&k, &v)?,
            }
        }
        let strategies = strategies.unwrap_or_else(|| vec![base.strategy]);
        let seeds = seeds.unwrap_or_else(|| vec![base.seed]);
        if strategies.is_empty() || seeds.is_empty() {
            return Err(HarnessError::Config("empty strategy or seed list".into()));
        }
        Ok(Self {
            base,
            strategies,
            seeds,
            out_dir,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// One config per grid point, strategies outermost.
    pub fn runs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &seed in &self.seeds {
                out.push(RunConfig {
                    strategy,
                    seed,
                    ..self.base.clone()
                });
            }
        }
        out
    }

    /// Output file for one run.
    pub fn output_path(&self, run: &RunConfig) -> PathBuf {
        self.out_dir
            .join(format!("{}_{}_seed{}.csv", run.env.name(), run.strategy, run.seed))
    }
}

/// `0,1,2` or a range `0..5` (end exclusive).
fn parse_seeds(v: &str) -> Result<Vec<u64>, HarnessError> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = parse("seeds", a.trim())?;
        let b: u64 = parse("seeds", b.trim())?;
        return Ok((a..b).collect());
    }
    v.split(',').map(|s| parse("seeds", s.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_skip_comments_and_blanks() {
        let p = parse_pairs("# c\n\n env = ucorridor \nseed=4\n").unwrap();
        assert_eq!(
            p,
            vec![("env".into(), "ucorridor".into()), ("seed".into(), "4".into())]
        );
        assert!(parse_pairs("oops").is_err());
    }

    #[test]
    fn file_values_override_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("env = ucorridor\nstrategy = omega\nrfaab = 1_5_2_1_1\nkernel = exponential")
            .unwrap();
        assert_eq!(c.env, EnvId::UCorridor);
        assert_eq!(c.strategy, Strategy::Omega);
        assert_eq!(c.steps(), 600_000);
        assert_eq!(c.kernel, Kernel::Exponential);
        assert_eq!(c.rfaab.as_array(), [1, 5, 2, 1, 1]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("no_such_key", "1").is_err());
        assert!(c.set("seed", "x").is_err());
        assert!(c.set("strategy", "her").is_err());
        let c = RunConfig {
            strategy: Strategy::EgOracle,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            batch_size: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            env: EnvId::Layout("/nonexistent/maze.txt".into()),
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn pessimistic_initial_value_by_default() {
        assert!((RunConfig::default().initial_q() + 50.0).abs() < 1e-9);
        let mut c = RunConfig::default();
        c.set("q_init", "0").unwrap();
        assert_eq!(c.initial_q(), 0.0);
    }

    #[test]
    fn sweep_grid() {
        let s = SweepConfig::parse("strategies = mega,desired\nseeds = 0..3\nsteps = 1000\nout_dir = /tmp/x")
            .unwrap();
        let runs = s.runs();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[4].strategy, Strategy::Desired);
        assert_eq!(runs[4].seed, 1);
        assert_eq!(runs[4].steps(), 1000);
        assert_eq!(
            s.output_path(&runs[0]),
            PathBuf::from("/tmp/x/spiral10_mega_seed0.csv")
        );
    }
}
