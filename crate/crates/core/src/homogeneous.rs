//! LinUCB for clients sharing one reward parameter.
//!
//! [`AsyncLinUcb`] runs the event-triggered protocol between per-client
//! models. [`CentralizedLinUcb`] (one pooled model) and [`IndependentLinUcb`]
//! (one isolated model per client) are the two communication extremes and
//! are implemented separately from the protocol path.

use crate::agent::Learner;
use crate::env::Arm;
use crate::error::{Error, Result};
use crate::linalg::{RegularizedFactor, SufficientStats, Vector};
use crate::protocol::{
    protocol_round, ClientChannelState, ClientId, CommLedger, ProtocolConfig, ServerState,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl UcbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("λ must be > 0, got {}", self.lambda)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("σ must be > 0, got {}", self.sigma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!("δ must be in (0,1), got {}", self.delta)));
        }
        Ok(())
    }
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sigma: 0.1,
            delta: 0.05,
        }
    }
}

/// `scale · √(log[det(V+λI)/det(λI)] + 2 log(1/δ)) + √λ`, given
/// `log det(V+λI)`.
pub fn width_from_log_det(log_det: f64, dim: usize, cfg: &UcbConfig, scale: f64) -> f64 {
    let info = (log_det - dim as f64 * cfg.lambda.ln()).max(0.0);
    scale * (info + 2.0 * (1.0 / cfg.delta).ln()).sqrt() + cfg.lambda.sqrt()
}

/// Ellipsoid radius α for a model whose noise is σ-sub-Gaussian.
pub fn confidence_width(stats: &SufficientStats, cfg: &UcbConfig) -> Result<f64> {
    let f = stats.factor(cfg.lambda)?;
    Ok(width_from_log_det(f.log_det(), stats.dim(), cfg, cfg.sigma))
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax<I: IntoIterator<Item = Result<f64>>>(scores: I) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.into_iter().enumerate() {
        let s = s?;
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((k, s)),
        }
    }
    best.map(|(k, _)| k).ok_or(Error::EmptyArmSet)
}

/// `xᵀθ̂ + α‖x‖_{(V+λI)⁻¹}` for each arm.
pub fn ucb_scores<'a>(
    factor: &'a RegularizedFactor,
    width: f64,
    arms: impl IntoIterator<Item = &'a Vector> + 'a,
) -> impl Iterator<Item = Result<f64>> + 'a {
    arms.into_iter()
        .map(move |x| Ok(x.dot(factor.theta()) + width * factor.mahalanobis(x)?))
}

/// Chooses the arm with the highest UCB score under `stats`.
pub fn select_arm(stats: &SufficientStats, cfg: &UcbConfig, arms: &[Vector]) -> Result<usize> {
    if arms.is_empty() {
        return Err(Error::EmptyArmSet);
    }
    let f = stats.factor(cfg.lambda)?;
    let width = width_from_log_det(f.log_det(), stats.dim(), cfg, cfg.sigma);
    argmax(ucb_scores(&f, width, arms.iter()))
}

/// Cached factorization for one flat model.
#[derive(Debug, Clone, Default)]
pub(crate) struct FactorCache(Option<RegularizedFactor>);

impl FactorCache {
    pub(crate) fn get(&mut self, stats: &SufficientStats, lambda: f64) -> Result<&RegularizedFactor> {
        if self.0.is_none() {
            self.0 = Some(stats.factor(lambda)?);
        }
        Ok(self.0.as_ref().expect("filled above"))
    }

    pub(crate) fn invalidate(&mut self) {
        self.0 = None;
    }
}

pub(crate) fn choose_flat(
    stats: &SufficientStats,
    cache: &mut FactorCache,
    cfg: &UcbConfig,
    arms: &[Arm],
) -> Result<usize> {
    if arms.is_empty() {
        return Err(Error::EmptyArmSet);
    }
    let f = cache.get(stats, cfg.lambda)?;
    let width = width_from_log_det(f.log_det(), stats.dim(), cfg, cfg.sigma);
    argmax(ucb_scores(f, width, arms.iter().map(|a| &a.flat)))
}

/// A single LinUCB model.
#[derive(Debug, Clone)]
pub struct LinUcbModel {
    stats: SufficientStats,
    cache: FactorCache,
}

impl LinUcbModel {
    pub fn new(dim: usize) -> Self {
        Self {
            stats: SufficientStats::zeros(dim),
            cache: FactorCache::default(),
        }
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn choose(&mut self, cfg: &UcbConfig, arms: &[Arm]) -> Result<usize> {
        choose_flat(&self.stats, &mut self.cache, cfg, arms)
    }

    pub fn absorb(&mut self, x: &Vector, y: f64) -> Result<()> {
        self.cache.invalidate();
        self.stats.rank1_update(x, y)
    }
}

/// One model trained on every client's data as soon as it arrives.
#[derive(Debug, Clone)]
pub struct CentralizedLinUcb {
    cfg: UcbConfig,
    model: LinUcbModel,
}

impl CentralizedLinUcb {
    pub fn new(dim: usize, cfg: UcbConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            model: LinUcbModel::new(dim),
        })
    }

    pub fn model(&self) -> &LinUcbModel {
        &self.model
    }
}

impl Learner for CentralizedLinUcb {
    fn name(&self) -> &'static str {
        "centralized-linucb"
    }

    fn choose(&mut self, _client: ClientId, arms: &[Arm]) -> Result<usize> {
        self.model.choose(&self.cfg, arms)
    }

    fn observe(&mut self, _step: u64, _client: ClientId, arm: &Arm, reward: f64) -> Result<()> {
        self.model.absorb(&arm.flat, reward)
    }

    fn comm_cost(&self) -> u64 {
        0
    }

    fn decision_stats(&self, _client: ClientId) -> Option<&SufficientStats> {
        Some(self.model.stats())
    }
}

/// One isolated model per client, never communicating.
#[derive(Debug, Clone)]
pub struct IndependentLinUcb {
    cfg: UcbConfig,
    models: Vec<LinUcbModel>,
}

impl IndependentLinUcb {
    pub fn new(n_clients: usize, dim: usize, cfg: UcbConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            models: vec![LinUcbModel::new(dim); n_clients],
        })
    }

    fn model(&mut self, client: ClientId) -> Result<&mut LinUcbModel> {
        self.models.get_mut(client).ok_or(Error::UnknownClient(client))
    }
}

impl Learner for IndependentLinUcb {
    fn name(&self) -> &'static str {
        "independent-linucb"
    }

    fn choose(&mut self, client: ClientId, arms: &[Arm]) -> Result<usize> {
        let cfg = self.cfg;
        self.model(client)?.choose(&cfg, arms)
    }

    fn observe(&mut self, _step: u64, client: ClientId, arm: &Arm, reward: f64) -> Result<()> {
        self.model(client)?.absorb(&arm.flat, reward)
    }

    fn comm_cost(&self) -> u64 {
        0
    }

    fn decision_stats(&self, client: ClientId) -> Option<&SufficientStats> {
        self.models.get(client).map(LinUcbModel::stats)
    }
}

#[derive(Debug, Clone)]
pub struct AsyncClient {
    pub channel: ClientChannelState,
    cache: FactorCache,
}

impl AsRef<ClientChannelState> for AsyncClient {
    fn as_ref(&self) -> &ClientChannelState {
        &self.channel
    }
}

impl AsMut<ClientChannelState> for AsyncClient {
    fn as_mut(&mut self) -> &mut ClientChannelState {
        &mut self.channel
    }
}

/// LinUCB clients sharing statistics through the event-triggered protocol.
#[derive(Debug, Clone)]
pub struct AsyncLinUcb {
    ucb: UcbConfig,
    proto: ProtocolConfig,
    clients: Vec<AsyncClient>,
    server: ServerState,
    ledger: CommLedger,
}

impl AsyncLinUcb {
    /// With `lazy_join` a client registers with the server on its first
    /// interaction (picking up the aggregate at its next download);
    /// otherwise every client registers before the first step.
    pub fn new(
        n_clients: usize,
        dim: usize,
        ucb: UcbConfig,
        proto: ProtocolConfig,
        lazy_join: bool,
    ) -> Result<Self> {
        ucb.validate()?;
        if proto.lambda != ucb.lambda {
            return Err(Error::config("protocol and UCB must share λ"));
        }
        let mut server = ServerState::new(dim);
        if !lazy_join {
            for j in 0..n_clients {
                server.register_client(j)?;
            }
        }
        Ok(Self {
            ucb,
            proto,
            clients: (0..n_clients)
                .map(|_| AsyncClient {
                    channel: ClientChannelState::new(dim),
                    cache: FactorCache::default(),
                })
                .collect(),
            server,
            ledger: CommLedger::new(),
        })
    }

    pub fn clients(&self) -> &[AsyncClient] {
        &self.clients
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn comm_ledger(&self) -> &CommLedger {
        &self.ledger
    }

    fn ensure_registered(&mut self, client: ClientId) -> Result<()> {
        if client >= self.clients.len() {
            return Err(Error::UnknownClient(client));
        }
        if !self.server.is_registered(client) {
            self.server.register_client(client)?;
        }
        Ok(())
    }
}

impl Learner for AsyncLinUcb {
    fn name(&self) -> &'static str {
        "async-linucb"
    }

    fn choose(&mut self, client: ClientId, arms: &[Arm]) -> Result<usize> {
        self.ensure_registered(client)?;
        let c = &mut self.clients[client];
        choose_flat(&c.channel.local, &mut c.cache, &self.ucb, arms)
    }

    fn observe(&mut self, step: u64, client: ClientId, arm: &Arm, reward: f64) -> Result<()> {
        self.ensure_registered(client)?;
        let c = &mut self.clients[client];
        c.channel.absorb_observation(&arm.flat, reward)?;
        c.cache.invalidate();
        let outcome = protocol_round(
            step,
            client,
            &mut self.clients,
            &mut self.server,
            &self.proto,
            &mut self.ledger,
        )?;
        for j in outcome.downloaded {
            self.clients[j].cache.invalidate();
        }
        Ok(())
    }

    fn comm_cost(&self) -> u64 {
        self.ledger.total()
    }

    fn ledger(&self) -> Option<&CommLedger> {
        Some(&self.ledger)
    }

    fn decision_stats(&self, client: ClientId) -> Option<&SufficientStats> {
        self.clients.get(client).map(|c| &c.channel.local)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn width_examples() {
        let delta = (-2.0f64).exp();
        let s = SufficientStats::zeros(2);
        let w = confidence_width(&s, &UcbConfig { lambda: 1.0, sigma: 1.0, delta }).unwrap();
        assert!((w - 3.0).abs() < 1e-12, "{w}");
        let w = confidence_width(&s, &UcbConfig { lambda: 4.0, sigma: 0.5, delta }).unwrap();
        assert!((w - 3.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn cold_start_prefers_longest_arm() {
        let s = SufficientStats::zeros(2);
        let cfg = UcbConfig::default();
        let arms = vec![v(&[0.1, 0.0]), v(&[0.0, 0.9]), v(&[0.5, 0.5])];
        assert_eq!(select_arm(&s, &cfg, &arms).unwrap(), 1);
        let equal = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0])];
        assert_eq!(select_arm(&s, &cfg, &equal).unwrap(), 0);
    }

    #[test]
    fn exploration_bonus_picks_unexplored_direction() {
        // V = diag(100, 0), b = (5, 0): θ̂₁ = 5/101 ≈ 0.0495.
        // α with σ=1, λ=1, δ=e⁻²: √(log 101 + 4) + 1 ≈ 3.953.
        // Score(e₁) = 0.0495 + 3.953/√101 ≈ 0.443, score(e₂) = 3.953.
        let s = SufficientStats::from_parts(
            Matrix::from_diagonal(&v(&[100.0, 0.0])),
            v(&[5.0, 0.0]),
        )
        .unwrap();
        let cfg = UcbConfig { lambda: 1.0, sigma: 1.0, delta: (-2.0f64).exp() };
        let alpha = confidence_width(&s, &cfg).unwrap();
        assert!((alpha - ((101.0f64).ln() + 4.0).sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(select_arm(&s, &cfg, &[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(), 1);
    }

    #[test]
    fn empty_arm_set_is_rejected() {
        let s = SufficientStats::zeros(2);
        assert!(matches!(
            select_arm(&s, &UcbConfig::default(), &[]),
            Err(Error::EmptyArmSet)
        ));
    }

    #[test]
    fn width_grows_with_data() {
        let cfg = UcbConfig::default();
        let mut s = SufficientStats::zeros(3);
        let mut last = confidence_width(&s, &cfg).unwrap();
        for k in 0..20 {
            let x = v(&[(k as f64).sin(), (k as f64).cos(), 0.3]);
            s.rank1_update(&x, 0.0).unwrap();
            let w = confidence_width(&s, &cfg).unwrap();
            assert!(w >= last);
            last = w;
        }
    }

    #[test]
    fn first_step_with_every_step_sync() {
        let proto = ProtocolConfig::symmetric(crate::protocol::Threshold::ONE, 1.0);
        let mut agent = AsyncLinUcb::new(3, 2, UcbConfig::default(), proto, false).unwrap();
        let arms = vec![Arm::flat(v(&[0.2, 0.1])), Arm::flat(v(&[0.6, 0.6]))];
        let k = agent.choose(2, &arms).unwrap();
        assert_eq!(k, 1);
        agent.observe(1, 2, &arms[k], 0.5).unwrap();
        assert_eq!(agent.comm_cost(), 3);
        for c in agent.clients() {
            assert_eq!(c.channel.local, agent.server().global);
        }
    }

    #[test]
    fn lazy_join_registers_on_first_appearance() {
        let proto = ProtocolConfig::symmetric(crate::protocol::Threshold::ONE, 1.0);
        let mut agent = AsyncLinUcb::new(2, 2, UcbConfig::default(), proto, true).unwrap();
        let arms = vec![Arm::flat(v(&[0.6, 0.0]))];
        agent.observe(1, 0, &arms[0], 1.0).unwrap();
        // Client 1 is unknown to the server, so only the upload happened.
        assert_eq!(agent.comm_cost(), 1);
        agent.choose(1, &arms).unwrap();
        assert_eq!(agent.server().download_buffer(1).unwrap(), &agent.server().global);
        assert!(agent.clients()[1].channel.local.design_is_zero());
    }
}
