//! The interaction loop and its per-step metrics.

use std::borrow::Cow;
use std::io;
use std::path::Path;
use std::time::Instant;

use crate::agent::Learner;
use crate::config::{Algorithm, EnvMode, RunConfig};
use crate::env::{Arm, ArrivalSpec, Layout, ReplayEnv, Round, SyntheticEnv, SyntheticParams};
use crate::error::{Error, Result};
use crate::hetero::{AsyncLinUcbAm, HeteroArm};
use crate::homogeneous::{AsyncLinUcb, CentralizedLinUcb, IndependentLinUcb};
use crate::linalg::SufficientStats;
use crate::protocol::{compute_gamma, ClientId, CommLedger, ProtocolConfig, Threshold};
use crate::sync::{SyncConfig, SyncLinUcb};

/// Source of rounds for one simulation.
#[derive(Debug, Clone)]
pub enum Environment {
    Synthetic(SyntheticEnv),
    /// Logged rounds. With `split` set, every arm is served as a
    /// global/local pair that both equal the logged features.
    Replay { env: ReplayEnv, split: bool },
}

impl Environment {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let e = &cfg.env;
        if e.mode == EnvMode::Replay {
            let path = e
                .replay
                .as_ref()
                .ok_or_else(|| Error::config("env.mode = replay needs env.replay"))?;
            let env = ReplayEnv::load(path, None)?;
            return Ok(Environment::Replay {
                env,
                split: cfg.algorithm == Algorithm::AsyncLinUcbAm,
            });
        }
        let layout = match e.mode {
            EnvMode::Homogeneous => Layout::Homogeneous { dim: e.dim },
            _ => Layout::Heterogeneous {
                global_dim: e.global_dim,
                local_dims: e.local_dims.resolve(e.n_clients)?,
            },
        };
        let arrival = match &e.arrival {
            crate::config::ArrivalConfig::Uniform => ArrivalSpec::Uniform,
            crate::config::ArrivalConfig::Dirichlet(a) => ArrivalSpec::Dirichlet(*a),
            explicit => ArrivalSpec::Explicit(explicit.load_weights()?.unwrap_or_default()),
        };
        Ok(Environment::Synthetic(SyntheticEnv::new(SyntheticParams {
            layout,
            n_clients: e.n_clients,
            n_arms: e.n_arms,
            sigma: e.sigma,
            noise: e.noise,
            context: e.context,
            arrival,
            seed: cfg.seed,
        })?))
    }

    pub fn n_clients(&self) -> usize {
        match self {
            Environment::Synthetic(s) => s.params().n_clients,
            Environment::Replay { env, .. } => env.n_clients(),
        }
    }

    /// Number of rounds available, if finite.
    pub fn len(&self) -> Option<u64> {
        match self {
            Environment::Synthetic(_) => None,
            Environment::Replay { env, .. } => Some(env.len() as u64),
        }
    }

    pub fn is_replay(&self) -> bool {
        matches!(self, Environment::Replay { .. })
    }

    /// Round `t` (1-based). Reading past the end of a replay log is an
    /// error.
    pub fn round(&self, t: u64) -> Result<Cow<'_, Round>> {
        match self {
            Environment::Synthetic(s) => Ok(Cow::Owned(s.sample_round(t))),
            Environment::Replay { env, split } => {
                let r = env
                    .replay_round(t)
                    .ok_or_else(|| Error::contract(format!("replay log ended before step {t}")))?;
                if !split {
                    return Ok(Cow::Borrowed(r));
                }
                let arms = r
                    .arms
                    .iter()
                    .map(|a| {
                        Arm::split(HeteroArm {
                            global: a.flat.clone(),
                            local: a.flat.clone(),
                        })
                    })
                    .collect();
                Ok(Cow::Owned(Round::new(r.step, r.client, arms, r.means.clone(), 0.0)))
            }
        }
    }
}

/// Single-model context dimension seen by flat learners.
fn flat_dim(cfg: &RunConfig, env: &Environment) -> Result<usize> {
    match env {
        Environment::Replay { env, .. } => Ok(env.dim()),
        Environment::Synthetic(_) => match cfg.env.mode {
            EnvMode::Homogeneous => Ok(cfg.env.dim),
            _ => {
                let dims = cfg.env.local_dims.resolve(cfg.env.n_clients)?;
                if dims.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::config(format!(
                        "{} needs equal local dimensions for every client",
                        cfg.algorithm
                    )));
                }
                Ok(cfg.env.global_dim + dims.first().copied().unwrap_or(0))
            }
        },
    }
}

pub fn build_learner(cfg: &RunConfig, env: &Environment) -> Result<Box<dyn Learner>> {
    let n = env.n_clients();
    let proto = || ProtocolConfig {
        gamma_u: cfg.gamma_u.unwrap_or(Threshold::ONE),
        gamma_d: cfg.gamma_d.unwrap_or(Threshold::ONE),
        lambda: cfg.ucb.lambda,
    };
    Ok(match cfg.algorithm {
        Algorithm::CentralizedLinUcb => Box::new(CentralizedLinUcb::new(flat_dim(cfg, env)?, cfg.ucb)?),
        Algorithm::IndependentLinUcb => Box::new(IndependentLinUcb::new(n, flat_dim(cfg, env)?, cfg.ucb)?),
        Algorithm::AsyncLinUcb => Box::new(AsyncLinUcb::new(
            n,
            flat_dim(cfg, env)?,
            cfg.ucb,
            proto(),
            cfg.lazy_join,
        )?),
        Algorithm::SyncLinUcb => Box::new(SyncLinUcb::new(
            n,
            flat_dim(cfg, env)?,
            SyncConfig {
                threshold: cfg.sync_threshold.unwrap_or(0.0),
                ucb: cfg.ucb,
            },
        )?),
        Algorithm::AsyncLinUcbAm => {
            let (global_dim, local_dims, shared) = match env {
                Environment::Replay { env, .. } => (env.dim(), vec![env.dim(); n], true),
                Environment::Synthetic(_) => (
                    cfg.env.global_dim,
                    cfg.env.local_dims.resolve(n)?,
                    false,
                ),
            };
            let am = crate::hetero::AmConfig {
                shared_features: shared,
                ..cfg.am
            };
            Box::new(AsyncLinUcbAm::new(global_dim, &local_dims, cfg.ucb, proto(), am, cfg.lazy_join)?)
        }
    })
}

/// What the first trace column accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    /// Pseudo-regret against the best arm's mean (synthetic environments).
    Regret,
    /// Logged reward of the chosen arm (replay).
    Reward,
}

impl Score {
    pub fn column(self) -> &'static str {
        match self {
            Score::Regret => "cum_regret",
            Score::Reward => "cum_reward",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTrace {
    pub algorithm: String,
    pub score: Score,
    /// `R_t` (or cumulative reward) after each step.
    pub cum_score: Vec<f64>,
    /// `C_t` after each step.
    pub cum_comm: Vec<u64>,
    /// `Γ_{t−1}` of the active client in the chosen arm's direction.
    pub gamma: Option<Vec<f64>>,
    pub chosen: Vec<usize>,
    pub clients: Vec<ClientId>,
    pub wall_ms: f64,
    pub ledger: Option<CommLedger>,
}

impl MetricsTrace {
    pub fn len(&self) -> usize {
        self.cum_score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_score.is_empty()
    }

    pub fn final_score(&self) -> f64 {
        self.cum_score.last().copied().unwrap_or(0.0)
    }

    pub fn final_comm(&self) -> u64 {
        self.cum_comm.last().copied().unwrap_or(0)
    }

    /// Headered CSV `t,cum_regret,cum_comm[,gamma_diag]` with `t` from 1.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["t", self.score.column(), "cum_comm"];
        if self.gamma.is_some() {
            header.push("gamma_diag");
        }
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![
                (k + 1).to_string(),
                self.cum_score[k].to_string(),
                self.cum_comm[k].to_string(),
            ];
            if let Some(g) = &self.gamma {
                rec.push(g[k].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(io::BufWriter::new(file)).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads the columns written by [`MetricsTrace::write_csv`]. Fields not
    /// stored in the file are left empty.
    pub fn read_csv<R: io::Read>(reader: R, path: &Path) -> Result<Self> {
        let perr = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        let score = match header.get(1) {
            Some("cum_regret") => Score::Regret,
            Some("cum_reward") => Score::Reward,
            _ => return Err(perr(1, "expected t, cum_regret|cum_reward, cum_comm".into())),
        };
        if header.get(0) != Some("t") || header.get(2) != Some("cum_comm") {
            return Err(perr(1, "expected t, cum_regret|cum_reward, cum_comm".into()));
        }
        let with_gamma = match header.get(3) {
            None => false,
            Some("gamma_diag") if header.len() == 4 => true,
            _ => return Err(perr(1, "unexpected trailing columns".into())),
        };
        let mut trace = MetricsTrace {
            algorithm: String::new(),
            score,
            cum_score: Vec::new(),
            cum_comm: Vec::new(),
            gamma: with_gamma.then(Vec::new),
            chosen: Vec::new(),
            clients: Vec::new(),
            wall_ms: 0.0,
            ledger: None,
        };
        for (k, rec) in rdr.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let t: usize = field(0).parse().map_err(|_| perr(line, "bad t".into()))?;
            if t != k + 1 {
                return Err(perr(line, format!("expected t = {}, got {t}", k + 1)));
            }
            trace
                .cum_score
                .push(field(1).parse().map_err(|_| perr(line, "bad score".into()))?);
            trace
                .cum_comm
                .push(field(2).parse().map_err(|_| perr(line, "bad cum_comm".into()))?);
            if let Some(g) = trace.gamma.as_mut() {
                g.push(field(3).parse().map_err(|_| perr(line, "bad gamma_diag".into()))?);
            }
        }
        Ok(trace)
    }
}

/// One completed interaction, handed to the step hook of [`drive`].
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub t: u64,
    pub round: &'a Round,
    pub chosen: usize,
    pub reward: f64,
    /// Regret (or reward) credited for this step.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveOptions {
    pub horizon: u64,
    pub score: Score,
    /// λ for the `Γ` diagnostic, when traced.
    pub trace_gamma: Option<f64>,
    pub keep_ledger: bool,
}

/// Runs `horizon` steps of `learner` against `env`, calling `hook` after
/// each step with the learner's updated state.
pub fn drive<L, F>(env: &Environment, learner: &mut L, opts: DriveOptions, mut hook: F) -> Result<MetricsTrace>
where
    L: Learner + ?Sized,
    F: FnMut(&StepRecord<'_>, &L) -> Result<()>,
{
    let start = Instant::now();
    let cap = opts.horizon as usize;
    let mut trace = MetricsTrace {
        algorithm: learner.name().to_string(),
        score: opts.score,
        cum_score: Vec::with_capacity(cap),
        cum_comm: Vec::with_capacity(cap),
        gamma: opts.trace_gamma.map(|_| Vec::with_capacity(cap)),
        chosen: Vec::with_capacity(cap),
        clients: Vec::with_capacity(cap),
        wall_ms: 0.0,
        ledger: None,
    };
    let mut pooled: Option<SufficientStats> = None;
    let mut total = 0.0;
    for t in 1..=opts.horizon {
        let round = env.round(t)?;
        let client = round.client;
        let chosen = learner.choose(client, &round.arms)?;
        let arm = &round.arms[chosen];
        if let (Some(lambda), Some(g)) = (opts.trace_gamma, trace.gamma.as_mut()) {
            let pool = pooled.get_or_insert_with(|| SufficientStats::zeros(arm.flat.len()));
            let local = learner
                .decision_stats(client)
                .ok_or_else(|| Error::contract("Γ tracing needs a single-model learner"))?;
            g.push(compute_gamma(local, pool, &arm.flat, lambda)?);
        }
        let reward = round.reward(chosen)?;
        let score = match opts.score {
            Score::Regret => round.instantaneous_regret(chosen)?,
            Score::Reward => reward,
        };
        learner.observe(t, client, arm, reward)?;
        if let Some(pool) = pooled.as_mut() {
            pool.rank1_update(&arm.flat, reward)?;
        }
        total += score;
        trace.cum_score.push(total);
        trace.cum_comm.push(learner.comm_cost());
        trace.chosen.push(chosen);
        trace.clients.push(client);
        hook(
            &StepRecord {
                t,
                round: &round,
                chosen,
                reward,
                score,
            },
            learner,
        )?;
    }
    if opts.keep_ledger {
        trace.ledger = learner.ledger().cloned();
    }
    trace.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(trace)
}

/// Validates `cfg`, builds its environment and learner, and runs it.
pub fn run_simulation(cfg: &RunConfig) -> Result<MetricsTrace> {
    cfg.validate()?;
    let env = Environment::from_config(cfg)?;
    if let Some(len) = env.len() {
        if cfg.horizon > len {
            return Err(Error::config(format!("T = {} exceeds the {len} logged rounds", cfg.horizon)));
        }
    }
    let mut learner = build_learner(cfg, &env)?;
    let opts = DriveOptions {
        horizon: cfg.horizon,
        score: if env.is_replay() { Score::Reward } else { Score::Regret },
        trace_gamma: cfg.trace_gamma.then_some(cfg.ucb.lambda),
        keep_ledger: cfg.trace_ledger,
    };
    log::debug!("running {} for T = {} (seed {})", cfg.algorithm, cfg.horizon, cfg.seed);
    drive(&env, learner.as_mut(), opts, |_, _| Ok(()))
}
