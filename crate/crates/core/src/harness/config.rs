//! Sweep configuration: defaults, flat TOML files and validation.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::baseline::{Activation, GcnConfig};
use crate::error::{Error, Result};
use crate::model::{default_beta, ModelParams};
use crate::rng::replicate_seed;

/// The parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAxis {
    Gamma,
    SigmaEta2,
    N,
}

impl GridAxis {
    pub fn tag(self) -> &'static str {
        match self {
            GridAxis::Gamma => "gamma",
            GridAxis::SigmaEta2 => "sigma_eta2",
            GridAxis::N => "n",
        }
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(GridAxis::Gamma),
            "sigma_eta2" => Ok(GridAxis::SigmaEta2),
            "n" => Ok(GridAxis::N),
            other => Err(Error::InvalidConfig(format!("unknown grid axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Coefficient errors of the naive and proxy estimators.
    Estimation,
    /// Held-out prediction error of the attention predictor and the baselines.
    Prediction,
}

impl SweepMode {
    pub fn tag(self) -> &'static str {
        match self {
            SweepMode::Estimation => "estimation",
            SweepMode::Prediction => "prediction",
        }
    }

    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            SweepMode::Estimation => &["rel_error", "abs_error"],
            SweepMode::Prediction => &["mse", "mse_stderr", "fallback_rate"],
        }
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimation" => Ok(SweepMode::Estimation),
            "prediction" => Ok(SweepMode::Prediction),
            other => Err(Error::InvalidConfig(format!("unknown sweep mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepMethod {
    /// OLS on `Z`; in prediction mode, its prediction `z_{n+1}ᵀ β̂_z`.
    Naive,
    /// OLS on the proxies.
    Proxy,
    /// Mean-aggregation baseline at the configured depth.
    Gcn,
    /// Proxy prediction with the neighbourhood held out of the fit.
    AttentionPredict,
}

impl SweepMethod {
    pub fn tag(self) -> &'static str {
        match self {
            SweepMethod::Naive => "naive",
            SweepMethod::Proxy => "proxy",
            SweepMethod::Gcn => "gcn",
            SweepMethod::AttentionPredict => "attention_predict",
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SweepMethod::Naive),
            "proxy" => Ok(SweepMethod::Proxy),
            "gcn" => Ok(SweepMethod::Gcn),
            "attention_predict" => Ok(SweepMethod::AttentionPredict),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: GridAxis,
    pub grid: Vec<f64>,
    /// Fixed parameters; the swept one is overwritten per grid point and
    /// `base.seed` is the base seed of the replicate schedule.
    pub base: ModelParams,
    pub num_seeds: usize,
    pub mode: SweepMode,
    pub methods: Vec<SweepMethod>,
    pub holdouts: usize,
    pub gcn: GcnConfig,
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Model parameters used when nothing else is given.
pub fn default_params(full_scale: bool) -> ModelParams {
    let (n, d) = if full_scale { (30000, 250) } else { (10000, 100) };
    ModelParams::new(n, d, 0.72, 0.725).with_seed(1)
}

impl SweepConfig {
    pub fn defaults(axis: GridAxis, full_scale: bool) -> Self {
        let mut base = default_params(full_scale);
        let grid = match axis {
            GridAxis::Gamma => linspace(0.70, 0.75, 11),
            GridAxis::SigmaEta2 => (1..=12).map(|k| 0.25 * k as f64).collect(),
            GridAxis::N => {
                base.d = if full_scale { 250 } else { 80 };
                base.beta = default_beta(base.d);
                base.gamma = 0.6;
                if full_scale {
                    vec![10000.0, 30000.0, 60000.0]
                } else {
                    vec![4000.0, 10000.0, 25000.0]
                }
            }
        };
        SweepConfig {
            axis,
            grid,
            base,
            num_seeds: 10,
            mode: SweepMode::Estimation,
            methods: vec![SweepMethod::Naive, SweepMethod::Proxy],
            holdouts: 200,
            gcn: GcnConfig::default(),
        }
    }

    /// Switches to prediction mode with its default methods.
    pub fn prediction(mut self) -> Self {
        self.mode = SweepMode::Prediction;
        self.methods = vec![SweepMethod::AttentionPredict, SweepMethod::Gcn, SweepMethod::Naive];
        self
    }

    /// Replicate seeds `base + k · stride`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64).map(|k| replicate_seed(self.base.seed, k)).collect()
    }

    /// Parameters of the cell at `value` on the grid axis with replicate `seed`.
    pub fn params_at(&self, value: f64, seed: u64) -> Result<ModelParams> {
        let mut p = self.base.clone();
        match self.axis {
            GridAxis::Gamma => p.gamma = value,
            GridAxis::SigmaEta2 => p.sigma_eta2 = value,
            GridAxis::N => {
                if !(value >= 2.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::InvalidConfig(format!("grid value {value} is not a node count")));
                }
                p.n = value as usize;
            }
        }
        p.seed = seed;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid is empty".into()));
        }
        if self.num_seeds == 0 {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods list is empty".into()));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(Error::InvalidConfig("methods list has duplicates".into()));
        }
        match self.mode {
            SweepMode::Estimation => {
                if let Some(m) = self
                    .methods
                    .iter()
                    .find(|m| !matches!(m, SweepMethod::Naive | SweepMethod::Proxy))
                {
                    return Err(Error::InvalidConfig(format!("method {m} needs prediction mode")));
                }
            }
            SweepMode::Prediction => {
                if self.methods.contains(&SweepMethod::Proxy) {
                    return Err(Error::InvalidConfig("method proxy needs estimation mode".into()));
                }
                for need in [SweepMethod::AttentionPredict, SweepMethod::Gcn] {
                    if !self.methods.contains(&need) {
                        return Err(Error::InvalidConfig(format!("prediction sweeps need method {need}")));
                    }
                }
                if self.holdouts == 0 {
                    return Err(Error::InvalidConfig("holdouts must be positive".into()));
                }
            }
        }
        self.gcn.validate()?;
        for &v in &self.grid {
            self.params_at(v, self.base.seed)?
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("grid value {v}: {e}")))?;
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order. Written as comment
    /// lines on top of result files and used to match resumed runs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.base;
        let list = |v: Vec<String>| format!("[{}]", v.join(", "));
        let mut out = vec![
            ("axis", format!("\"{}\"", self.axis)),
            ("mode", format!("\"{}\"", self.mode.tag())),
            ("grid", list(self.grid.iter().map(|v| format!("{v:?}")).collect())),
            ("methods", list(self.methods.iter().map(|m| format!("\"{m}\"")).collect())),
            ("n", p.n.to_string()),
            ("d", p.d.to_string()),
            ("alpha", format!("{:?}", p.alpha)),
            ("gamma", format!("{:?}", p.gamma)),
            ("sigma_x2", format!("{:?}", p.sigma_x2)),
            ("sigma_eta2", format!("{:?}", p.sigma_eta2)),
            ("sigma_eps2", format!("{:?}", p.sigma_eps2)),
            ("seed", p.seed.to_string()),
            ("seeds", self.num_seeds.to_string()),
        ];
        if self.mode == SweepMode::Prediction {
            out.extend([
                ("holdouts", self.holdouts.to_string()),
                ("gcn_layers", self.gcn.layers.to_string()),
                ("gcn_self_weight", format!("{:?}", self.gcn.self_weight)),
                ("gcn_activation", format!("\"{}\"", self.gcn.activation)),
            ]);
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// The echo as `# key = value` lines.
    pub fn header_comments(&self) -> String {
        self.echo().iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
    }

    /// Overrides fields with those present in a flat TOML document.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        raw.apply(self)
    }
}

/// Every key a config file may set; all optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub axis: Option<String>,
    pub mode: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma_x2: Option<f64>,
    pub sigma_eta2: Option<f64>,
    pub sigma_eps2: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub holdouts: Option<usize>,
    pub gcn_layers: Option<usize>,
    pub gcn_self_weight: Option<f64>,
    pub gcn_activation: Option<String>,
}

impl RawConfig {
    pub fn apply(self, cfg: &mut SweepConfig) -> Result<()> {
        if let Some(a) = self.axis {
            let axis: GridAxis = a.parse()?;
            if axis != cfg.axis {
                return Err(Error::InvalidConfig(format!(
                    "config file sweeps {axis}, command sweeps {}",
                    cfg.axis
                )));
            }
        }
        if let Some(m) = self.mode {
            let mode: SweepMode = m.parse()?;
            if mode != cfg.mode {
                *cfg = match mode {
                    SweepMode::Prediction => cfg.clone().prediction(),
                    SweepMode::Estimation => SweepConfig {
                        mode,
                        methods: vec![SweepMethod::Naive, SweepMethod::Proxy],
                        ..cfg.clone()
                    },
                };
            }
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(ms) = self.methods {
            cfg.methods = ms.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        let p = &mut cfg.base;
        if let Some(n) = self.n {
            p.n = n;
        }
        if let Some(d) = self.d {
            if d != p.d {
                p.d = d;
                p.beta = default_beta(d);
            }
        }
        set(&mut p.alpha, self.alpha);
        set(&mut p.gamma, self.gamma);
        set(&mut p.sigma_x2, self.sigma_x2);
        set(&mut p.sigma_eta2, self.sigma_eta2);
        set(&mut p.sigma_eps2, self.sigma_eps2);
        set(&mut p.seed, self.seed);
        set(&mut cfg.num_seeds, self.seeds);
        set(&mut cfg.holdouts, self.holdouts);
        set(&mut cfg.gcn.layers, self.gcn_layers);
        set(&mut cfg.gcn.self_weight, self.gcn_self_weight);
        if let Some(a) = self.gcn_activation {
            cfg.gcn.activation = a.parse::<Activation>()?;
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
