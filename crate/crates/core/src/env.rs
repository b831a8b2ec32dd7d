//! Reward-generating environments.
//!
//! Synthetic environments draw the active client, the arm contexts and the
//! reward noise for step `t` from a random stream keyed by `(seed, t)`, so a
//! run's environment draws never depend on what the agents do. The replay
//! environment serves logged interactions from a CSV file.

use std::io;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::hetero::HeteroArm;
use crate::linalg::{Matrix, Vector};
use crate::protocol::ClientId;

const STREAM_TRUTH: u64 = 0;
const STREAM_ARRIVALS: u64 = 1;
const STREAM_STEP_BASE: u64 = 1 << 32;

/// Random stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform sample from the unit ℓ2 ball in `dim` dimensions.
pub fn sample_unit_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    if dim == 0 {
        return Vector::zeros(0);
    }
    let dir = sample_unit_sphere(rng, dim);
    let radius = rng.random::<f64>().powf(1.0 / dim as f64);
    dir * radius
}

/// Uniform sample from the unit sphere in `dim` dimensions.
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    if dim == 0 {
        return Vector::zeros(0);
    }
    loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// One arm's context. `flat` is what a single-model learner sees; `split`
/// carries the global/local decomposition when the environment has one.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub flat: Vector,
    pub split: Option<HeteroArm>,
}

impl Arm {
    pub fn flat(x: Vector) -> Self {
        Self {
            flat: x,
            split: None,
        }
    }

    /// Concatenates the two parts into the flat context.
    pub fn split(parts: HeteroArm) -> Self {
        let flat = parts.concatenated();
        Self {
            flat,
            split: Some(parts),
        }
    }
}

/// One interaction: the active client, its arm set, and the noiseless mean
/// reward of every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub step: u64,
    pub client: ClientId,
    pub arms: Vec<Arm>,
    pub means: Vec<f64>,
    noise: f64,
}

impl Round {
    pub fn new(step: u64, client: ClientId, arms: Vec<Arm>, means: Vec<f64>, noise: f64) -> Self {
        debug_assert_eq!(arms.len(), means.len());
        Self {
            step,
            client,
            arms,
            means,
            noise,
        }
    }

    fn check(&self, chosen: usize) -> Result<()> {
        if chosen >= self.arms.len() {
            return Err(Error::ArmOutOfRange {
                index: chosen,
                len: self.arms.len(),
            });
        }
        Ok(())
    }

    /// Observed reward of the chosen arm: its mean plus this step's noise.
    pub fn reward(&self, chosen: usize) -> Result<f64> {
        self.check(chosen)?;
        Ok(self.means[chosen] + self.noise)
    }

    /// Best mean in the arm set minus the chosen arm's mean.
    pub fn instantaneous_regret(&self, chosen: usize) -> Result<f64> {
        self.check(chosen)?;
        let best = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((best - self.means[chosen]).max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on `[−σ√3, σ√3]`, i.e. variance σ².
    BoundedUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalSpec {
    Uniform,
    Dirichlet(f64),
    Explicit(Vec<f64>),
}

/// Probability of each client being the active one at a step.
#[derive(Debug, Clone)]
pub struct ArrivalDistribution {
    weights: Vec<f64>,
    sampler: Option<WeightedIndex<f64>>,
}

impl ArrivalDistribution {
    pub fn uniform(n_clients: usize) -> Result<Self> {
        if n_clients == 0 {
            return Err(Error::config("at least one client is required"));
        }
        Ok(Self {
            weights: vec![1.0 / n_clients as f64; n_clients],
            sampler: None,
        })
    }

    /// Explicit weights; they are normalized and must all be strictly
    /// positive.
    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("arrival weights are empty"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config("every arrival weight must be finite and > 0"));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::config(format!("arrival weights: {e}")))?;
        Ok(Self {
            weights,
            sampler: Some(sampler),
        })
    }

    pub fn from_spec(spec: &ArrivalSpec, n_clients: usize, seed: u64) -> Result<Self> {
        match spec {
            ArrivalSpec::Uniform => Self::uniform(n_clients),
            ArrivalSpec::Dirichlet(alpha) => {
                if n_clients < 2 {
                    return Self::uniform(n_clients);
                }
                // Normalized Gamma(α, 1) draws are Dirichlet(α, …, α).
                let dist = Gamma::new(*alpha, 1.0)
                    .map_err(|e| Error::config(format!("dirichlet({alpha}): {e}")))?;
                let mut rng = stream_rng(seed, STREAM_ARRIVALS);
                let g: Vec<f64> = (0..n_clients).map(|_| dist.sample(&mut rng)).collect();
                let total: f64 = g.iter().sum();
                if !(total > 0.0) {
                    return Self::uniform(n_clients);
                }
                // A draw can underflow to exactly 0 for tiny α; keep P(i) > 0.
                let w: Vec<f64> = g.iter().map(|x| (x / total).max(1e-12)).collect();
                Self::explicit(w)
            }
            ArrivalSpec::Explicit(w) => {
                if w.len() != n_clients {
                    return Err(Error::config(format!(
                        "{} explicit arrival weights for {n_clients} clients",
                        w.len()
                    )));
                }
                Self::explicit(w.clone())
            }
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_clients(&self) -> usize {
        self.weights.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ClientId {
        match &self.sampler {
            None => rng.random_range(0..self.weights.len()),
            Some(s) => s.sample(rng),
        }
    }
}

/// Ground-truth reward parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvTruth {
    Homogeneous {
        theta: Vector,
    },
    Heterogeneous {
        theta_global: Vector,
        theta_local: Vec<Vector>,
    },
}

impl EnvTruth {
    pub fn mean_reward(&self, client: ClientId, arm: &Arm) -> Result<f64> {
        match self {
            EnvTruth::Homogeneous { theta } => {
                check_len(theta.len(), arm.flat.len())?;
                Ok(theta.dot(&arm.flat))
            }
            EnvTruth::Heterogeneous {
                theta_global,
                theta_local,
            } => {
                let parts = arm
                    .split
                    .as_ref()
                    .ok_or_else(|| Error::contract("heterogeneous reward needs a split arm"))?;
                let local = theta_local.get(client).ok_or(Error::UnknownClient(client))?;
                check_len(theta_global.len(), parts.global.len())?;
                check_len(local.len(), parts.local.len())?;
                Ok(theta_global.dot(&parts.global) + local.dot(&parts.local))
            }
        }
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Feature layout of a synthetic environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Homogeneous { dim: usize },
    Heterogeneous { global_dim: usize, local_dims: Vec<usize> },
}

/// How a heterogeneous arm's two parts are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContextSampling {
    /// Global and local parts from their own unit balls.
    #[default]
    PerBlock,
    /// The concatenated context from one unit ball of dimension
    /// `d_g + d_i`, then split.
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub layout: Layout,
    pub n_clients: usize,
    pub n_arms: usize,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub context: ContextSampling,
    pub arrival: ArrivalSpec,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    params: SyntheticParams,
    truth: EnvTruth,
    arrivals: ArrivalDistribution,
}

impl SyntheticEnv {
    pub fn new(params: SyntheticParams) -> Result<Self> {
        if params.n_clients == 0 {
            return Err(Error::config("env.N must be ≥ 1"));
        }
        if params.n_arms == 0 {
            return Err(Error::config("env.K must be ≥ 1"));
        }
        if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
            return Err(Error::config("env.sigma must be finite and ≥ 0"));
        }
        let mut rng = stream_rng(params.seed, STREAM_TRUTH);
        let truth = match &params.layout {
            Layout::Homogeneous { dim } => {
                if *dim == 0 {
                    return Err(Error::config("env.d must be ≥ 1"));
                }
                EnvTruth::Homogeneous {
                    theta: sample_unit_sphere(&mut rng, *dim),
                }
            }
            Layout::Heterogeneous {
                global_dim,
                local_dims,
            } => {
                if local_dims.len() != params.n_clients {
                    return Err(Error::config("one local dimension per client is required"));
                }
                let theta_global = sample_unit_sphere(&mut rng, *global_dim);
                let theta_local = local_dims
                    .iter()
                    .map(|&d| sample_unit_sphere(&mut rng, d))
                    .collect();
                EnvTruth::Heterogeneous {
                    theta_global,
                    theta_local,
                }
            }
        };
        let arrivals = ArrivalDistribution::from_spec(&params.arrival, params.n_clients, params.seed)?;
        Ok(Self {
            params,
            truth,
            arrivals,
        })
    }

    /// Replaces the sampled ground truth, projecting each block onto the
    /// unit ball.
    pub fn with_truth(mut self, truth: EnvTruth) -> Result<Self> {
        let proj = |v: Vector| crate::linalg::project_ball(&v, 1.0);
        let truth = match (truth, &self.params.layout) {
            (EnvTruth::Homogeneous { theta }, Layout::Homogeneous { dim }) => {
                check_len(*dim, theta.len())?;
                EnvTruth::Homogeneous { theta: proj(theta) }
            }
            (
                EnvTruth::Heterogeneous {
                    theta_global,
                    theta_local,
                },
                Layout::Heterogeneous {
                    global_dim,
                    local_dims,
                },
            ) => {
                check_len(*global_dim, theta_global.len())?;
                check_len(local_dims.len(), theta_local.len())?;
                for (d, t) in local_dims.iter().zip(&theta_local) {
                    check_len(*d, t.len())?;
                }
                EnvTruth::Heterogeneous {
                    theta_global: proj(theta_global),
                    theta_local: theta_local.into_iter().map(proj).collect(),
                }
            }
            _ => return Err(Error::contract("truth does not match the environment layout")),
        };
        self.truth = truth;
        Ok(self)
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    pub fn truth(&self) -> &EnvTruth {
        &self.truth
    }

    pub fn arrivals(&self) -> &ArrivalDistribution {
        &self.arrivals
    }

    /// Draws step `t`: active client, `K` contexts and the reward noise.
    pub fn sample_round(&self, t: u64) -> Round {
        let mut rng = stream_rng(self.params.seed, STREAM_STEP_BASE.wrapping_add(t));
        let client = self.arrivals.sample(&mut rng);
        let arms: Vec<Arm> = (0..self.params.n_arms)
            .map(|_| match &self.params.layout {
                Layout::Homogeneous { dim } => Arm::flat(sample_unit_ball(&mut rng, *dim)),
                Layout::Heterogeneous {
                    global_dim,
                    local_dims,
                } => {
                    let (dg, dl) = (*global_dim, local_dims[client]);
                    Arm::split(match self.params.context {
                        ContextSampling::PerBlock => HeteroArm {
                            global: sample_unit_ball(&mut rng, dg),
                            local: sample_unit_ball(&mut rng, dl),
                        },
                        ContextSampling::Joint => {
                            let x = sample_unit_ball(&mut rng, dg + dl);
                            HeteroArm {
                                global: x.rows(0, dg).into_owned(),
                                local: x.rows(dg, dl).into_owned(),
                            }
                        }
                    })
                }
            })
            .collect();
        let noise = self.sample_noise(&mut rng);
        let means = arms
            .iter()
            .map(|a| {
                self.truth
                    .mean_reward(client, a)
                    .expect("sampled arms match the environment layout")
            })
            .collect();
        Round::new(t, client, arms, means, noise)
    }

    fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.params.sigma;
        match self.params.noise {
            NoiseKind::Gaussian => s * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::BoundedUniform => {
                let half = s * 3f64.sqrt();
                rng.random_range(-half..=half)
            }
        }
    }
}

/// Smallest eigenvalue of the empirical second-moment matrix of `samples`
/// uniform unit-ball draws. The analytic value is `1/(d+2)`.
pub fn context_regularity(dim: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 7);
    let mut m = Matrix::zeros(dim, dim);
    for _ in 0..samples {
        let x = sample_unit_ball(&mut rng, dim);
        m.ger(1.0, &x, &x, 1.0);
    }
    m /= samples as f64;
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Logged interactions served in order.
#[derive(Debug, Clone)]
pub struct ReplayEnv {
    rounds: Vec<Round>,
    dim: usize,
    n_clients: usize,
}

impl ReplayEnv {
    /// Parses a headered CSV with columns `t, client_id, arm_index, reward,
    /// f_1..f_d`. Rows sharing `t` form one round; every round must list
    /// exactly `n_arms` arms (inferred from the first round when `None`)
    /// with `arm_index` running `0..K`.
    pub fn from_reader<R: io::Read>(reader: R, path: &Path, n_arms: Option<usize>) -> Result<Self> {
        let perr = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if header.len() < 5 {
            return Err(perr(1, "expected columns t, client_id, arm_index, reward, f_1..f_d".into()));
        }
        let expected = ["t", "client_id", "arm_index", "reward"];
        for (k, name) in expected.iter().enumerate() {
            if &header[k] != *name {
                return Err(perr(1, format!("column {} must be {name:?}, got {:?}", k + 1, &header[k])));
            }
        }
        let dim = header.len() - 4;

        struct Pending {
            t: u64,
            client: ClientId,
            first_line: u64,
            arms: Vec<Arm>,
            rewards: Vec<f64>,
        }
        let mut rounds: Vec<Round> = Vec::new();
        let mut k_arms = n_arms;
        let mut pending: Option<Pending> = None;
        let mut n_clients = 0;

        let finish = |p: Pending, k_arms: &mut Option<usize>, rounds: &mut Vec<Round>| -> Result<()> {
            let k = *k_arms.get_or_insert(p.arms.len());
            if p.arms.len() != k {
                return Err(perr(
                    p.first_line,
                    format!("round t={} has {} arms, expected {k}", p.t, p.arms.len()),
                ));
            }
            rounds.push(Round::new(p.t, p.client, p.arms, p.rewards, 0.0));
            Ok(())
        };

        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            if rec.len() != dim + 4 {
                return Err(perr(line, format!("expected {} fields, got {}", dim + 4, rec.len())));
            }
            let int = |k: usize| -> Result<u64> {
                rec[k]
                    .parse()
                    .map_err(|_| perr(line, format!("bad integer {:?} in column {}", &rec[k], k + 1)))
            };
            let float = |k: usize| -> Result<f64> {
                let v: f64 = rec[k]
                    .parse()
                    .map_err(|_| perr(line, format!("bad number {:?} in column {}", &rec[k], k + 1)))?;
                if !v.is_finite() {
                    return Err(perr(line, format!("non-finite value in column {}", k + 1)));
                }
                Ok(v)
            };
            let t = int(0)?;
            let client = int(1)? as ClientId;
            let arm_index = int(2)? as usize;
            let reward = float(3)?;
            let feats = Vector::from_iterator(dim, (4..dim + 4).map(float).collect::<Result<Vec<_>>>()?);

            let same_round = pending.as_ref().is_some_and(|p| p.t == t);
            if !same_round {
                if let Some(p) = pending.take() {
                    if t <= p.t {
                        return Err(perr(line, format!("t={t} is not after t={}", p.t)));
                    }
                    finish(p, &mut k_arms, &mut rounds)?;
                }
                pending = Some(Pending {
                    t,
                    client,
                    first_line: line,
                    arms: Vec::new(),
                    rewards: Vec::new(),
                });
            }
            let p = pending.as_mut().expect("pending round exists");
            if p.client != client {
                return Err(perr(line, format!("round t={t} mixes clients {} and {client}", p.client)));
            }
            if arm_index != p.arms.len() {
                return Err(perr(
                    line,
                    format!("arm_index {arm_index} out of order (expected {})", p.arms.len()),
                ));
            }
            n_clients = n_clients.max(client + 1);
            p.arms.push(Arm::split(HeteroArm {
                global: feats.clone(),
                local: feats,
            }));
            // Split arms concatenate their parts; replay uses the shared
            // features as the flat context instead.
            let last = p.arms.last_mut().expect("just pushed");
            last.flat = last.split.as_ref().expect("split").global.clone();
            p.rewards.push(reward);
        }
        if let Some(p) = pending.take() {
            finish(p, &mut k_arms, &mut rounds)?;
        }
        Ok(Self {
            rounds,
            dim,
            n_clients,
        })
    }

    pub fn load(path: &Path, n_arms: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: PathBuf::from(path),
            source,
        })?;
        Self::from_reader(io::BufReader::new(file), path, n_arms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// The `t`-th logged round (1-based), or `None` past the end of the log.
    pub fn replay_round(&self, t: u64) -> Option<&Round> {
        let idx = usize::try_from(t).ok()?.checked_sub(1)?;
        self.rounds.get(idx)
    }
}
