//! Run configuration: a flat document of dotted keys (`env.N = 50`,
//! `proto.gamma_u = 2.0`), parsed as TOML.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::env::{ContextSampling, NoiseKind};
use crate::error::{Error, Result};
use crate::hetero::AmConfig;
use crate::homogeneous::UcbConfig;
use crate::protocol::Threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    AsyncLinUcb,
    AsyncLinUcbAm,
    SyncLinUcb,
    IndependentLinUcb,
    CentralizedLinUcb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::AsyncLinUcb,
        Algorithm::AsyncLinUcbAm,
        Algorithm::SyncLinUcb,
        Algorithm::IndependentLinUcb,
        Algorithm::CentralizedLinUcb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::AsyncLinUcb => "async-linucb",
            Algorithm::AsyncLinUcbAm => "async-linucb-am",
            Algorithm::SyncLinUcb => "sync-linucb",
            Algorithm::IndependentLinUcb => "independent-linucb",
            Algorithm::CentralizedLinUcb => "centralized-linucb",
        }
    }

    pub fn is_async(self) -> bool {
        matches!(self, Algorithm::AsyncLinUcb | Algorithm::AsyncLinUcbAm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Accepts `async-linucb-am` as well as `AsyncLinUCBAM`.
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().replace('-', "") == norm)
            .ok_or_else(|| Error::config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvMode {
    Homogeneous,
    Heterogeneous,
    Replay,
}

impl EnvMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvMode::Homogeneous => "homogeneous",
            EnvMode::Heterogeneous => "heterogeneous",
            EnvMode::Replay => "replay",
        }
    }
}

impl FromStr for EnvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homogeneous" => Ok(EnvMode::Homogeneous),
            "heterogeneous" => Ok(EnvMode::Heterogeneous),
            "replay" => Ok(EnvMode::Replay),
            _ => Err(Error::config(format!("unknown env.mode '{s}'"))),
        }
    }
}

fn noise_name(n: NoiseKind) -> &'static str {
    match n {
        NoiseKind::Gaussian => "gaussian",
        NoiseKind::BoundedUniform => "uniform",
    }
}

fn context_name(c: ContextSampling) -> &'static str {
    match c {
        ContextSampling::PerBlock => "per-block",
        ContextSampling::Joint => "joint",
    }
}

fn parse_context(s: &str) -> Result<ContextSampling> {
    match s.to_ascii_lowercase().as_str() {
        "per-block" => Ok(ContextSampling::PerBlock),
        "joint" => Ok(ContextSampling::Joint),
        _ => Err(Error::config(format!("unknown env.context '{s}'"))),
    }
}

fn parse_noise(s: &str) -> Result<NoiseKind> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" => Ok(NoiseKind::Gaussian),
        "uniform" | "bounded-uniform" => Ok(NoiseKind::BoundedUniform),
        _ => Err(Error::config(format!("unknown env.noise '{s}'"))),
    }
}

/// `uniform`, `dirichlet:<α>`, `explicit:<path>` (one weight per line or
/// comma-separated) or `weights:<w1>,<w2>,…`.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalConfig {
    Uniform,
    Dirichlet(f64),
    ExplicitFile(PathBuf),
    Weights(Vec<f64>),
}

impl fmt::Display for ArrivalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArrivalConfig::Uniform => f.write_str("uniform"),
            ArrivalConfig::Dirichlet(a) => write!(f, "dirichlet:{a}"),
            ArrivalConfig::ExplicitFile(p) => write!(f, "explicit:{}", p.display()),
            ArrivalConfig::Weights(w) => {
                f.write_str("weights:")?;
                for (k, x) in w.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_weight_list(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::config(format!("bad arrival weight '{t}'")))
        })
        .collect()
}

impl FromStr for ArrivalConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind.to_ascii_lowercase().as_str(), arg) {
            ("uniform", None) => Ok(ArrivalConfig::Uniform),
            ("dirichlet", None) => Ok(ArrivalConfig::Dirichlet(1.0)),
            ("dirichlet", Some(a)) => {
                let alpha: f64 = a
                    .parse()
                    .map_err(|_| Error::config(format!("bad dirichlet α '{a}'")))?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::config("dirichlet α must be > 0"));
                }
                Ok(ArrivalConfig::Dirichlet(alpha))
            }
            ("explicit", Some(p)) if !p.is_empty() => Ok(ArrivalConfig::ExplicitFile(p.into())),
            ("weights", Some(w)) => Ok(ArrivalConfig::Weights(parse_weight_list(w)?)),
            _ => Err(Error::config(format!("unknown env.arrival '{s}'"))),
        }
    }
}

impl ArrivalConfig {
    /// Weights for the explicit forms, reading the file if needed.
    pub fn load_weights(&self) -> Result<Option<Vec<f64>>> {
        match self {
            ArrivalConfig::Weights(w) => Ok(Some(w.clone())),
            ArrivalConfig::ExplicitFile(p) => {
                let text = fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.clone(),
                    source,
                })?;
                Ok(Some(parse_weight_list(&text)?))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalDims {
    Uniform(usize),
    PerClient(Vec<usize>),
}

impl LocalDims {
    pub fn resolve(&self, n_clients: usize) -> Result<Vec<usize>> {
        match self {
            LocalDims::Uniform(d) => Ok(vec![*d; n_clients]),
            LocalDims::PerClient(v) if v.len() == n_clients => Ok(v.clone()),
            LocalDims::PerClient(v) => Err(Error::config(format!(
                "env.d_i lists {} dimensions for {n_clients} clients",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub mode: EnvMode,
    pub n_clients: usize,
    pub n_arms: usize,
    /// Context dimension in homogeneous mode.
    pub dim: usize,
    pub global_dim: usize,
    pub local_dims: LocalDims,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub context: ContextSampling,
    pub arrival: ArrivalConfig,
    pub replay: Option<PathBuf>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            mode: EnvMode::Homogeneous,
            n_clients: 10,
            n_arms: 10,
            dim: 5,
            global_dim: 2,
            local_dims: LocalDims::Uniform(2),
            sigma: 0.1,
            noise: NoiseKind::Gaussian,
            context: ContextSampling::PerBlock,
            arrival: ArrivalConfig::Uniform,
            replay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Horizon `T`.
    pub horizon: u64,
    pub seed: u64,
    pub env: EnvConfig,
    pub gamma_u: Option<Threshold>,
    pub gamma_d: Option<Threshold>,
    /// Register clients with the server on first arrival instead of at start.
    pub lazy_join: bool,
    /// Sync-LinUCB threshold `D`.
    pub sync_threshold: Option<f64>,
    pub ucb: UcbConfig,
    pub am: AmConfig,
    pub trace_gamma: bool,
    pub trace_ledger: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::CentralizedLinUcb,
            horizon: 1000,
            seed: 0,
            env: EnvConfig::default(),
            gamma_u: None,
            gamma_d: None,
            lazy_join: false,
            sync_threshold: None,
            ucb: UcbConfig::default(),
            am: AmConfig::default(),
            trace_gamma: false,
            trace_ledger: false,
        }
    }
}

/// Every key accepted in a config document, in emission order.
pub const KEYS: &[&str] = &[
    "algorithm",
    "T",
    "seed",
    "env.mode",
    "env.N",
    "env.K",
    "env.d",
    "env.d_g",
    "env.d_l",
    "env.d_i",
    "env.sigma",
    "env.noise",
    "env.context",
    "env.arrival",
    "env.replay",
    "proto.gamma",
    "proto.gamma_u",
    "proto.gamma_d",
    "proto.lazy_join",
    "sync.D",
    "ucb.lambda",
    "ucb.sigma",
    "ucb.delta",
    "am.alternations",
    "am.epsilon",
    "am.rank_tol",
    "am.bootstrap",
    "diag.trace_gamma",
    "diag.trace_ledger",
];

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn bad(key: &str, v: &Value, want: &str) -> Error {
    Error::config(format!("{key}: expected {want}, got {v}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s.trim().parse().map_err(|_| bad(key, v, "a number")),
        _ => Err(bad(key, v, "a number")),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Float(x) if *x >= 0.0 && x.fract() == 0.0 && *x < u64::MAX as f64 => Ok(*x as u64),
        Value::String(s) => s.trim().parse().map_err(|_| bad(key, v, "a non-negative integer")),
        _ => Err(bad(key, v, "a non-negative integer")),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    as_u64(key, v).map(|x| x as usize)
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) => s.trim().parse().map_err(|_| bad(key, v, "true or false")),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, v, "a string"))
}

fn as_threshold(key: &str, v: &Value) -> Result<Threshold> {
    match v {
        Value::String(s) => s.parse(),
        other => Threshold::new(as_f64(key, other)?),
    }
    .map_err(|e| Error::config(format!("{key}: {e}")))
}

fn as_dims(key: &str, v: &Value) -> Result<Vec<usize>> {
    match v {
        Value::Array(items) => items.iter().map(|x| as_usize(key, x)).collect(),
        Value::String(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| bad(key, v, "a list of dimensions"))
            })
            .collect(),
        _ => Err(bad(key, v, "a list of dimensions")),
    }
}

/// Parses an override value the way a TOML value would be written, falling
/// back to a bare string (`algorithm=sync-linucb`).
pub fn parse_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        let mut cfg = RunConfig::default();
        for (k, v) in &flat {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = as_str(key, v)?.parse()?,
            "T" => self.horizon = as_u64(key, v)?,
            "seed" => self.seed = as_u64(key, v)?,
            "env.mode" => self.env.mode = as_str(key, v)?.parse()?,
            "env.N" => self.env.n_clients = as_usize(key, v)?,
            "env.K" => self.env.n_arms = as_usize(key, v)?,
            "env.d" => self.env.dim = as_usize(key, v)?,
            "env.d_g" => self.env.global_dim = as_usize(key, v)?,
            "env.d_l" => self.env.local_dims = LocalDims::Uniform(as_usize(key, v)?),
            "env.d_i" => self.env.local_dims = LocalDims::PerClient(as_dims(key, v)?),
            "env.sigma" => self.env.sigma = as_f64(key, v)?,
            "env.noise" => self.env.noise = parse_noise(as_str(key, v)?)?,
            "env.context" => self.env.context = parse_context(as_str(key, v)?)?,
            "env.arrival" => self.env.arrival = as_str(key, v)?.parse()?,
            "env.replay" => {
                let p = as_str(key, v)?;
                self.env.replay = (!p.is_empty()).then(|| PathBuf::from(p));
            }
            "proto.gamma" => {
                let g = as_threshold(key, v)?;
                self.gamma_u = Some(g);
                self.gamma_d = Some(g);
            }
            "proto.gamma_u" => self.gamma_u = Some(as_threshold(key, v)?),
            "proto.gamma_d" => self.gamma_d = Some(as_threshold(key, v)?),
            "proto.lazy_join" => self.lazy_join = as_bool(key, v)?,
            "sync.D" => self.sync_threshold = Some(as_f64(key, v)?),
            "ucb.lambda" => self.ucb.lambda = as_f64(key, v)?,
            "ucb.sigma" => self.ucb.sigma = as_f64(key, v)?,
            "ucb.delta" => self.ucb.delta = as_f64(key, v)?,
            "am.alternations" => self.am.alternations = as_usize(key, v)?,
            "am.epsilon" => self.am.epsilon = as_f64(key, v)?,
            "am.rank_tol" => self.am.rank_tol = as_f64(key, v)?,
            "am.bootstrap" => self.am.bootstrap = as_bool(key, v)?,
            "diag.trace_gamma" => self.trace_gamma = as_bool(key, v)?,
            "diag.trace_ledger" => self.trace_ledger = as_bool(key, v)?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override '{assignment}' is not key=value")))?;
        self.set(k.trim(), &parse_value(v.trim()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("T must be ≥ 1"));
        }
        self.ucb.validate()?;
        let e = &self.env;
        if e.mode != EnvMode::Replay {
            if e.n_clients == 0 || e.n_arms == 0 {
                return Err(Error::config("env.N and env.K must be ≥ 1"));
            }
            if !(e.sigma >= 0.0 && e.sigma.is_finite()) {
                return Err(Error::config("env.sigma must be ≥ 0"));
            }
        }
        match e.mode {
            EnvMode::Homogeneous if e.dim == 0 => return Err(Error::config("env.d must be ≥ 1")),
            EnvMode::Heterogeneous => {
                let dims = e.local_dims.resolve(e.n_clients)?;
                if dims.iter().any(|&dl| e.global_dim + dl == 0) {
                    return Err(Error::config("env.d_g + env.d_l must be ≥ 1"));
                }
            }
            EnvMode::Replay if e.replay.is_none() => {
                return Err(Error::config("env.mode = replay needs env.replay"))
            }
            _ => {}
        }

        let alg = self.algorithm;
        if alg == Algorithm::SyncLinUcb {
            match self.sync_threshold {
                None => return Err(Error::config("sync-linucb needs sync.D")),
                Some(d) if !(d > 0.0) => {
                    return Err(Error::config(format!("sync.D must be > 0, got {d}")))
                }
                _ => {}
            }
        } else if self.sync_threshold.is_some() {
            return Err(Error::config(format!("sync.D is only valid with sync-linucb, not {alg}")));
        }
        // Thresholds are ignored by the other algorithms, so a base config
        // can be swept across algorithms.
        if alg.is_async() && (self.gamma_u.is_none() || self.gamma_d.is_none()) {
            return Err(Error::config(format!("{alg} needs proto.gamma_u and proto.gamma_d")));
        }
        if alg == Algorithm::AsyncLinUcbAm {
            if e.mode == EnvMode::Homogeneous {
                return Err(Error::config("async-linucb-am needs a heterogeneous or replay environment"));
            }
            self.am.validate()?;
            if self.trace_gamma {
                return Err(Error::config("diag.trace_gamma is only available for single-model learners"));
            }
        }
        Ok(())
    }

    /// Flat key-value document holding every setting; parses back to an
    /// equal config.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: Value| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v.to_string());
            out.push('\n');
        };
        let num = |x: f64| Value::Float(x);
        let int = |x: u64| Value::Integer(x as i64);
        let s = |x: &str| Value::String(x.to_string());
        let e = &self.env;
        put("algorithm", s(self.algorithm.as_str()));
        put("T", int(self.horizon));
        put("seed", int(self.seed));
        put("env.mode", s(e.mode.as_str()));
        put("env.N", int(e.n_clients as u64));
        put("env.K", int(e.n_arms as u64));
        put("env.d", int(e.dim as u64));
        put("env.d_g", int(e.global_dim as u64));
        match &e.local_dims {
            LocalDims::Uniform(d) => put("env.d_l", int(*d as u64)),
            LocalDims::PerClient(v) => put(
                "env.d_i",
                Value::Array(v.iter().map(|&d| int(d as u64)).collect()),
            ),
        }
        put("env.sigma", num(e.sigma));
        put("env.noise", s(noise_name(e.noise)));
        put("env.context", s(context_name(e.context)));
        put("env.arrival", s(&e.arrival.to_string()));
        if let Some(p) = &e.replay {
            put("env.replay", s(&p.display().to_string()));
        }
        if let Some(g) = self.gamma_u {
            put("proto.gamma_u", num(g.value()));
        }
        if let Some(g) = self.gamma_d {
            put("proto.gamma_d", num(g.value()));
        }
        put("proto.lazy_join", Value::Boolean(self.lazy_join));
        if let Some(d) = self.sync_threshold {
            put("sync.D", num(d));
        }
        put("ucb.lambda", num(self.ucb.lambda));
        put("ucb.sigma", num(self.ucb.sigma));
        put("ucb.delta", num(self.ucb.delta));
        put("am.alternations", int(self.am.alternations as u64));
        put("am.epsilon", num(self.am.epsilon));
        put("am.rank_tol", num(self.am.rank_tol));
        put("am.bootstrap", Value::Boolean(self.am.bootstrap));
        put("diag.trace_gamma", Value::Boolean(self.trace_gamma));
        put("diag.trace_ledger", Value::Boolean(self.trace_ledger));
        out
    }

    /// Dimension of the statistics the protocol exchanges.
    pub fn communicated_dim(&self) -> usize {
        match (self.env.mode, self.algorithm) {
            (EnvMode::Heterogeneous, Algorithm::AsyncLinUcbAm) => self.env.global_dim,
            (EnvMode::Heterogeneous, _) => {
                self.env.global_dim
                    + self
                        .env
                        .local_dims
                        .resolve(self.env.n_clients)
                        .ok()
                        .and_then(|v| v.first().copied())
                        .unwrap_or(0)
            }
            _ => self.env.dim,
        }
    }
}

pub const PRESETS: [&str; 6] = [
    "sync-every-step",
    "gamma-expinvN",
    "gamma-expinvsqrtN",
    "no-comm",
    "sync-D-centralrate",
    "sync-D-quarterrate",
];

/// Applies a named threshold setting, computed from the config's `N`, `d`
/// and `T`. Threshold presets turn a non-async algorithm into
/// `async-linucb`; `D` presets select `sync-linucb`.
pub fn apply_preset(cfg: &mut RunConfig, name: &str) -> Result<()> {
    let n = cfg.env.n_clients as f64;
    let d = cfg.communicated_dim() as f64;
    let t = cfg.horizon as f64;
    let gamma = |cfg: &mut RunConfig, g: Threshold| {
        if !cfg.algorithm.is_async() {
            cfg.algorithm = Algorithm::AsyncLinUcb;
        }
        cfg.sync_threshold = None;
        cfg.gamma_u = Some(g);
        cfg.gamma_d = Some(g);
    };
    let sync = |cfg: &mut RunConfig, big_d: f64| -> Result<()> {
        if !(big_d > 0.0 && big_d.is_finite()) {
            return Err(Error::config(format!(
                "preset {name} gives D = {big_d}; it needs T ≥ 2, N ≥ 1 and d ≥ 1"
            )));
        }
        cfg.algorithm = Algorithm::SyncLinUcb;
        cfg.gamma_u = None;
        cfg.gamma_d = None;
        cfg.sync_threshold = Some(big_d);
        Ok(())
    };
    match name {
        "sync-every-step" => gamma(cfg, Threshold::ONE),
        "gamma-expinvN" => gamma(cfg, Threshold::new((1.0 / n).exp())?),
        "gamma-expinvsqrtN" => gamma(cfg, Threshold::new((1.0 / n.sqrt()).exp())?),
        "no-comm" => gamma(cfg, Threshold::INFINITE),
        "sync-D-centralrate" => sync(cfg, t / (n * n * d * t.ln()))?,
        "sync-D-quarterrate" => sync(cfg, t / (n.powf(1.5) * d * t.ln()))?,
        _ => {
            return Err(Error::config(format!(
                "unknown preset '{name}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        let mut c = RunConfig::default();
        c.env.n_clients = 100;
        c
    }

    #[test]
    fn expinvsqrt_preset() {
        let mut c = base();
        apply_preset(&mut c, "gamma-expinvsqrtN").unwrap();
        assert_eq!(c.algorithm, Algorithm::AsyncLinUcb);
        let g = c.gamma_u.unwrap().value();
        assert!((g - 1.1051709180756477).abs() < 1e-12);
        assert_eq!(c.gamma_d, c.gamma_u);
    }

    #[test]
    fn no_comm_preset() {
        let mut c = base();
        apply_preset(&mut c, "no-comm").unwrap();
        assert!(c.gamma_u.unwrap().is_infinite() && c.gamma_d.unwrap().is_infinite());
    }

    #[test]
    fn centralrate_preset() {
        let mut c = RunConfig::default();
        c.env.n_clients = 10;
        c.env.dim = 5;
        c.horizon = 10_000;
        apply_preset(&mut c, "sync-D-centralrate").unwrap();
        assert_eq!(c.algorithm, Algorithm::SyncLinUcb);
        let want = 1e4 / (100.0 * 5.0 * (1e4f64).ln());
        assert!((c.sync_threshold.unwrap() - want).abs() < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_preset() {
        assert!(apply_preset(&mut base(), "gamma-fast").is_err());
    }

    #[test]
    fn sync_threshold_needs_sync_algorithm() {
        let mut c = RunConfig::default();
        c.sync_threshold = Some(1.0);
        assert!(c.validate().is_err());
        c.algorithm = Algorithm::SyncLinUcb;
        c.validate().unwrap();
        c.sync_threshold = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn async_needs_thresholds() {
        let mut c = RunConfig::default();
        c.algorithm = Algorithm::AsyncLinUcb;
        assert!(c.validate().is_err());
        c.set_str("proto.gamma=inf").unwrap();
        c.validate().unwrap();
        assert!(c.gamma_u.unwrap().is_infinite());
    }

    #[test]
    fn zero_horizon_rejected() {
        let mut c = RunConfig::default();
        c.horizon = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn parse_dotted_document() {
        let c = RunConfig::from_toml_str(
            "algorithm = \"AsyncLinUCBAM\"\nT = 500\n[env]\nmode = \"heterogeneous\"\nN = 4\nd_g = 3\nd_i = [1, 2, 3, 4]\n\
             arrival = \"weights:0.7,0.1,0.1,0.1\"\n[proto]\ngamma_u = 2\ngamma_d = inf\n",
        )
        .unwrap();
        assert_eq!(c.algorithm, Algorithm::AsyncLinUcbAm);
        assert_eq!(c.horizon, 500);
        assert_eq!(c.env.local_dims, LocalDims::PerClient(vec![1, 2, 3, 4]));
        assert_eq!(c.env.arrival, ArrivalConfig::Weights(vec![0.7, 0.1, 0.1, 0.1]));
        assert!(c.gamma_d.unwrap().is_infinite());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::from_toml_str("env.Q = 3").is_err());
    }

    #[test]
    fn emitted_document_parses_back() {
        let mut c = RunConfig::default();
        c.algorithm = Algorithm::AsyncLinUcb;
        c.gamma_u = Some(Threshold::new(1.5).unwrap());
        c.gamma_d = Some(Threshold::INFINITE);
        c.env.sigma = 0.123456789012345;
        c.env.arrival = ArrivalConfig::Dirichlet(0.5);
        c.ucb.delta = 0.01;
        c.trace_gamma = true;
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);

        let mut h = RunConfig::default();
        h.env.mode = EnvMode::Heterogeneous;
        h.env.local_dims = LocalDims::PerClient(vec![2; 10]);
        h.env.context = ContextSampling::Joint;
        h.algorithm = Algorithm::SyncLinUcb;
        h.sync_threshold = Some(3.25);
        assert_eq!(RunConfig::from_toml_str(&h.to_toml_string()).unwrap(), h);
    }

    #[test]
    fn override_values() {
        let mut c = RunConfig::default();
        c.set_str("algorithm=sync-linucb").unwrap();
        c.set_str("sync.D = 2.5").unwrap();
        c.set_str("env.N=20").unwrap();
        assert_eq!(c.algorithm, Algorithm::SyncLinUcb);
        assert_eq!(c.sync_threshold, Some(2.5));
        assert_eq!(c.env.n_clients, 20);
        assert!(c.set_str("env.N=-1").is_err());
        assert!(c.set_str("nonsense").is_err());
    }
}
