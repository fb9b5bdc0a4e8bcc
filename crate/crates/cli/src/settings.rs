//! Solver settings from flags and an optional `key=value` file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use svddf::operator::POWER_SEED;
use svddf::{HighFreqIndex, Method, SolverConfig, SpectralEstimate, StepRule, StoppingRule};

/// Keys accepted in a config file, one per solver flag.
pub const KEYS: &[&str] = &[
    "p",
    "eta",
    "epsilon",
    "sigma",
    "h",
    "dt",
    "dt-max",
    "safety",
    "max-steps",
    "reuse-every",
    "spectral",
    "stop",
    "tol",
    "n0",
    "delta",
    "c1",
    "c2",
    "gamma",
    "seed",
    "method",
];

#[derive(Args, Clone, Debug, Default)]
pub struct SolverArgs {
    /// Plain `key=value` file; flags given on the command line win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Exponent p in [1, 2] [default: 1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Damping eta > 0 [default: 1]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Regularization of the diffusivity [default: 0.01]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Gaussian pre-smoothing variance [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Grid spacing [default: 1]
    #[arg(long)]
    pub h: Option<f64>,
    /// `auto`, `theorem` or a fixed step [default: auto]
    #[arg(long)]
    pub dt: Option<String>,
    /// Upper cap on the step size
    #[arg(long)]
    pub dt_max: Option<f64>,
    /// Multiplier applied to the spectral step rules [default: 0.9]
    #[arg(long)]
    pub safety: Option<f64>,
    /// [default: 500]
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Reassemble the operator every N steps [default: 1]
    #[arg(long)]
    pub reuse_every: Option<usize>,
    /// `power` or `gershgorin` [default: power]
    #[arg(long)]
    pub spectral: Option<String>,
    /// `rde`, `discrepancy`, `a-priori` or `none` [default: rde]
    #[arg(long)]
    pub stop: Option<String>,
    /// RDE tolerance [default: 1e-4]
    #[arg(long)]
    pub tol: Option<f64>,
    /// RDE frequency threshold: `auto`, `literal` or an integer [default: auto]
    #[arg(long)]
    pub n0: Option<String>,
    /// Noise level for the discrepancy and a-priori rules
    #[arg(long)]
    pub delta: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub c1: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub c2: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Seed of the power-iteration start vector
    #[arg(long)]
    pub seed: Option<u64>,
    /// `svddf` or `first-order` [default: svddf]
    #[arg(long)]
    pub method: Option<String>,
}

/// Fully resolved settings, kept as strings for echoing into manifests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse_file(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key=value", n + 1))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                bail!("config line {}: unknown key '{key}'", n + 1);
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn from_args(args: &SolverArgs) -> Result<Self> {
        let mut s = match &args.config {
            Some(path) => Self::parse_file(&read_text(path)?)?,
            None => Self::default(),
        };
        s.set("p", args.p);
        s.set("eta", args.eta);
        s.set("epsilon", args.epsilon);
        s.set("sigma", args.sigma);
        s.set("h", args.h);
        s.set("dt", args.dt.as_ref());
        s.set("dt-max", args.dt_max);
        s.set("safety", args.safety);
        s.set("max-steps", args.max_steps);
        s.set("reuse-every", args.reuse_every);
        s.set("spectral", args.spectral.as_ref());
        s.set("stop", args.stop.as_ref());
        s.set("tol", args.tol);
        s.set("n0", args.n0.as_ref());
        s.set("delta", args.delta);
        s.set("c1", args.c1);
        s.set("c2", args.c2);
        s.set("gamma", args.gamma);
        s.set("seed", args.seed);
        s.set("method", args.method.as_ref());
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: Option<impl Display>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn num<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("--{key} '{v}': {e}")),
        }
    }

    fn required(&self, key: &str, rule: &str) -> Result<f64> {
        match self.get(key) {
            Some(_) => self.num(key, 0.0),
            None => bail!("--stop {rule} needs --{key}"),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.num("seed", POWER_SEED)
    }

    pub fn method(&self) -> Result<Method> {
        match self.get("method").unwrap_or("svddf") {
            "svddf" => Ok(Method::Svddf),
            "first-order" => Ok(Method::FirstOrder),
            other => bail!("unknown method '{other}' (expected svddf or first-order)"),
        }
    }

    pub fn step_rule(&self) -> Result<StepRule> {
        match self.get("dt").unwrap_or("auto") {
            "auto" => Ok(StepRule::Stable),
            "theorem" => Ok(StepRule::TheoremBound),
            v => Ok(StepRule::Fixed(v.parse().map_err(|e| anyhow!("--dt '{v}': {e}"))?)),
        }
    }

    pub fn stopping(&self) -> Result<StoppingRule> {
        let rule = self.get("stop").unwrap_or("rde");
        Ok(match rule {
            "rde" => StoppingRule::Rde {
                tol: self.num("tol", 1e-4)?,
                n0: match self.get("n0").unwrap_or("auto") {
                    "auto" => HighFreqIndex::default(),
                    "literal" => HighFreqIndex::SquaredCols(0.6),
                    v => HighFreqIndex::Fixed(v.parse().map_err(|e| anyhow!("--n0 '{v}': {e}"))?),
                },
            },
            "discrepancy" => StoppingRule::Discrepancy { delta: self.required("delta", rule)? },
            "a-priori" => StoppingRule::APriori {
                c1: self.num("c1", 1.0)?,
                c2: self.num("c2", 1.0)?,
                gamma: self.num("gamma", 1.0)?,
                delta: self.required("delta", rule)?,
            },
            "none" => StoppingRule::MaxStepsOnly,
            other => bail!("unknown stopping rule '{other}'"),
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let spectral = match self.get("spectral").unwrap_or("power") {
            "power" => match SpectralEstimate::default() {
                SpectralEstimate::PowerIteration { tol, max_iter, .. } => {
                    SpectralEstimate::PowerIteration { tol, max_iter, seed: self.seed()? }
                }
                other => other,
            },
            "gershgorin" => SpectralEstimate::Gershgorin,
            other => bail!("unknown spectral estimate '{other}' (expected power or gershgorin)"),
        };
        let cfg = SolverConfig {
            p: self.num("p", d.p)?,
            eta: self.num("eta", d.eta)?,
            epsilon: self.num("epsilon", d.epsilon)?,
            sigma: self.num("sigma", d.sigma)?,
            spacing: self.num("h", d.spacing)?,
            step_rule: self.step_rule()?,
            safety: self.num("safety", d.safety)?,
            dt_max: match self.get("dt-max") {
                Some(_) => Some(self.num("dt-max", 0.0)?),
                None => None,
            },
            max_steps: self.num("max-steps", d.max_steps)?,
            stopping: self.stopping()?,
            reuse_every: self.num("reuse-every", d.reuse_every)?,
            spectral,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key=value` lines with every resolved key, sorted.
    pub fn manifest_lines(&self) -> Result<Vec<String>> {
        let cfg = self.solver_config()?;
        let mut out = vec![
            format!("method={}", self.get("method").unwrap_or("svddf")),
            format!("p={}", cfg.p),
            format!("eta={}", cfg.eta),
            format!("epsilon={}", cfg.epsilon),
            format!("sigma={}", cfg.sigma),
            format!("h={}", cfg.spacing),
            format!("dt={}", self.get("dt").unwrap_or("auto")),
            format!("dt-max={}", cfg.dt_max.map_or("none".to_string(), |v| v.to_string())),
            format!("safety={}", cfg.safety),
            format!("max-steps={}", cfg.max_steps),
            format!("reuse-every={}", cfg.reuse_every),
            format!("spectral={}", self.get("spectral").unwrap_or("power")),
            format!("stop={:?}", cfg.stopping),
            format!("seed={}", self.seed()?),
        ];
        out.sort();
        Ok(out)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}
