//! Async-LinUCB-AM: clients whose reward parameter splits into a block
//! `θ^(g)` shared by everyone and a private block `θ^(i)`.
//!
//! Only the global block's statistics travel through the protocol. Each
//! observation's reward is split into two partial rewards by one pass of
//! alternating minimization; the global partial reward feeds the shared
//! statistics and the local one feeds the private statistics.
//!
//! A fresh client starts in [`AmPhase::Bootstrap`]: it runs flat LinUCB on
//! the concatenated context and keeps its raw observations until either
//! they or its received global statistics have full rank. It then
//! initializes AM on that log, discards the raw data and switches to
//! [`AmPhase::Running`].

use crate::agent::Learner;
use crate::env::Arm;
use crate::error::{Error, Result};
use crate::homogeneous::{argmax, choose_flat, width_from_log_det, FactorCache, UcbConfig};
use crate::linalg::{project_ball, RegularizedFactor, SufficientStats, Vector};
use crate::protocol::{
    protocol_round, ClientChannelState, ClientId, CommLedger, ProtocolConfig, ServerState,
};

/// Context split into the globally shared and the client-specific part.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroArm {
    pub global: Vector,
    pub local: Vector,
}

impl HeteroArm {
    pub fn concatenated(&self) -> Vector {
        Vector::from_iterator(
            self.global.len() + self.local.len(),
            self.global.iter().chain(self.local.iter()).copied(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmConfig {
    /// Local-then-global passes per observation.
    pub alternations: usize,
    /// Ridge used in place of the generalized inverse.
    pub epsilon: f64,
    /// Smallest eigenvalue above which a design matrix counts as full rank.
    pub rank_tol: f64,
    /// Start clients in the bootstrap phase. When false, clients start
    /// running AM from zero estimates.
    pub bootstrap: bool,
    /// Global and local contexts are the same vector. The decomposition is
    /// then unidentifiable from raw data, so bootstrap checks the rank of
    /// the shared features alone and initializes from the minimum-norm
    /// least-squares solution.
    pub shared_features: bool,
}

impl Default for AmConfig {
    fn default() -> Self {
        Self {
            alternations: 1,
            epsilon: 1e-8,
            rank_tol: 1e-6,
            bootstrap: true,
            shared_features: false,
        }
    }
}

impl AmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alternations == 0 {
            return Err(Error::config("am.alternations must be ≥ 1"));
        }
        if !(self.epsilon > 0.0) || !(self.rank_tol > 0.0) {
            return Err(Error::config("am.epsilon and am.rank_tol must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmPhase {
    Bootstrap,
    Running,
}

/// Partial rewards produced by one AM update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialRewards {
    /// `y − x^(l)ᵀθ̂^(l)`, absorbed into the shared statistics.
    pub global: f64,
    /// `y − x^(g)ᵀθ̂^(g)`, absorbed into the private statistics.
    pub local: f64,
}

#[derive(Debug, Clone)]
pub struct HeteroClientState {
    channel: ClientChannelState,
    local_stats: SufficientStats,
    phase: AmPhase,
    // Raw observations; never leave this struct.
    bootstrap_log: Vec<(HeteroArm, f64)>,
    bootstrap_stats: SufficientStats,
    theta_global: Vector,
    theta_local: Vector,
    global_cache: FactorCache,
    local_cache: FactorCache,
    bootstrap_cache: FactorCache,
}

impl AsRef<ClientChannelState> for HeteroClientState {
    fn as_ref(&self) -> &ClientChannelState {
        &self.channel
    }
}

impl AsMut<ClientChannelState> for HeteroClientState {
    fn as_mut(&mut self) -> &mut ClientChannelState {
        &mut self.channel
    }
}

/// `proj_B(1)((S + x xᵀ + εI)⁻¹ (b + x y))`.
fn projected_solve(stats: &SufficientStats, x: &Vector, y: f64, epsilon: f64) -> Result<Vector> {
    let with = stats.with_observation(x, y)?;
    Ok(project_ball(with.factor(epsilon)?.theta(), 1.0))
}

impl HeteroClientState {
    /// A fresh client in the bootstrap phase.
    pub fn new(global_dim: usize, local_dim: usize) -> Self {
        Self {
            channel: ClientChannelState::new(global_dim),
            local_stats: SufficientStats::zeros(local_dim),
            phase: AmPhase::Bootstrap,
            bootstrap_log: Vec::new(),
            bootstrap_stats: SufficientStats::zeros(global_dim + local_dim),
            theta_global: Vector::zeros(global_dim),
            theta_local: Vector::zeros(local_dim),
            global_cache: FactorCache::default(),
            local_cache: FactorCache::default(),
            bootstrap_cache: FactorCache::default(),
        }
    }

    /// A client already running AM, with zero statistics and estimates.
    pub fn running(global_dim: usize, local_dim: usize) -> Self {
        Self {
            phase: AmPhase::Running,
            ..Self::new(global_dim, local_dim)
        }
    }

    pub fn global_dim(&self) -> usize {
        self.channel.dim()
    }

    pub fn local_dim(&self) -> usize {
        self.local_stats.dim()
    }

    pub fn phase(&self) -> AmPhase {
        self.phase
    }

    pub fn channel(&self) -> &ClientChannelState {
        &self.channel
    }

    pub fn local_stats(&self) -> &SufficientStats {
        &self.local_stats
    }

    /// Current AM estimate of the global block (unit-ball projected).
    pub fn theta_global(&self) -> &Vector {
        &self.theta_global
    }

    /// Current AM estimate of the local block (unit-ball projected).
    pub fn theta_local(&self) -> &Vector {
        &self.theta_local
    }

    pub fn bootstrap_len(&self) -> usize {
        self.bootstrap_log.len()
    }

    fn check_arm(&self, arm: &HeteroArm) -> Result<()> {
        if arm.global.len() != self.global_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.global_dim(),
                actual: arm.global.len(),
            });
        }
        if arm.local.len() != self.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.local_dim(),
                actual: arm.local.len(),
            });
        }
        Ok(())
    }

    fn invalidate(&mut self) {
        self.global_cache.invalidate();
        self.local_cache.invalidate();
    }

    /// Runs `alternations` local-then-global projected solves on the new
    /// observation and returns the partial rewards formed from the final
    /// estimates. The statistics must not yet contain this observation;
    /// this method does not absorb it.
    pub fn am_update(&mut self, arm: &HeteroArm, y: f64, cfg: &AmConfig) -> Result<PartialRewards> {
        if self.phase != AmPhase::Running {
            return Err(Error::contract("am_update called during bootstrap"));
        }
        self.check_arm(arm)?;
        let mut theta_g = self.theta_global.clone();
        let mut theta_l = self.theta_local.clone();
        for _ in 0..cfg.alternations {
            let y_local = y - arm.global.dot(&theta_g);
            theta_l = projected_solve(&self.local_stats, &arm.local, y_local, cfg.epsilon)?;
            let y_global = y - arm.local.dot(&theta_l);
            theta_g = projected_solve(&self.channel.local, &arm.global, y_global, cfg.epsilon)?;
        }
        let partial = PartialRewards {
            global: y - arm.local.dot(&theta_l),
            local: y - arm.global.dot(&theta_g),
        };
        self.theta_global = theta_g;
        self.theta_local = theta_l;
        Ok(partial)
    }

    /// Running-phase update: AM, then absorb the partial rewards. Protocol
    /// communication is left to the caller.
    pub fn absorb_running(&mut self, arm: &HeteroArm, y: f64, cfg: &AmConfig) -> Result<PartialRewards> {
        let partial = self.am_update(arm, y, cfg)?;
        self.channel.absorb_observation(&arm.global, partial.global)?;
        self.local_stats.rank1_update(&arm.local, partial.local)?;
        self.invalidate();
        Ok(partial)
    }

    /// Bootstrap-phase update: record the raw observation, then initialize
    /// AM if enough data is available. Returns true on the transition.
    pub fn absorb_bootstrap(&mut self, arm: &HeteroArm, y: f64, cfg: &AmConfig) -> Result<bool> {
        if self.phase != AmPhase::Bootstrap {
            return Err(Error::contract("client already left bootstrap"));
        }
        self.check_arm(arm)?;
        self.bootstrap_stats.rank1_update(&arm.concatenated(), y)?;
        self.bootstrap_cache.invalidate();
        self.bootstrap_log.push((arm.clone(), y));
        self.bootstrap_check_and_init(cfg)
    }

    fn log_has_full_rank(&self, cfg: &AmConfig) -> bool {
        if cfg.shared_features {
            let mut g = SufficientStats::zeros(self.global_dim());
            for (arm, y) in &self.bootstrap_log {
                // Dimensions were checked on entry.
                let _ = g.rank1_update(&arm.global, *y);
            }
            g.min_eigenvalue().is_some_and(|e| e > cfg.rank_tol)
        } else {
            self.bootstrap_stats
                .min_eigenvalue()
                .is_some_and(|e| e > cfg.rank_tol)
        }
    }

    /// If the bootstrap log or the received global statistics have full
    /// rank, initializes AM and switches to the running phase.
    pub fn bootstrap_check_and_init(&mut self, cfg: &AmConfig) -> Result<bool> {
        if self.phase != AmPhase::Bootstrap {
            return Err(Error::contract("client already left bootstrap"));
        }
        let dg = self.global_dim();
        let log_full = !self.bootstrap_log.is_empty() && self.log_has_full_rank(cfg);
        let received_full = self
            .channel
            .local
            .min_eigenvalue()
            .is_some_and(|e| e > cfg.rank_tol);
        if !(log_full || received_full) {
            return Ok(false);
        }

        let init_global = if log_full {
            let solution = if cfg.shared_features {
                self.bootstrap_stats.factor(cfg.epsilon)?.theta().clone()
            } else {
                let v = self.bootstrap_stats.design().clone();
                v.cholesky()
                    .ok_or(Error::NotPositiveDefinite)?
                    .solve(self.bootstrap_stats.moment())
            };
            project_ball(&solution.rows(0, dg).into_owned(), 1.0)
        } else {
            project_ball(self.channel.local.factor(cfg.epsilon)?.theta(), 1.0)
        };

        let (theta_g, theta_l) = self.batch_alternation(init_global, cfg)?;

        let mut batch_global = SufficientStats::zeros(dg);
        let mut batch_local = SufficientStats::zeros(self.local_dim());
        for (arm, y) in &self.bootstrap_log {
            batch_global.rank1_update(&arm.global, y - arm.local.dot(&theta_l))?;
            batch_local.rank1_update(&arm.local, y - arm.global.dot(&theta_g))?;
        }
        self.channel.absorb_batch(&batch_global)?;
        self.local_stats = batch_local;
        self.theta_global = theta_g;
        self.theta_local = theta_l;
        self.bootstrap_log.clear();
        self.bootstrap_stats.clear();
        self.bootstrap_cache.invalidate();
        self.invalidate();
        self.phase = AmPhase::Running;
        Ok(true)
    }

    /// Alternates projected solves over the bootstrap log until both blocks
    /// move less than 1e-8 (at most 1000 passes). The global solve also
    /// includes whatever global statistics the client has received.
    fn batch_alternation(&self, init_global: Vector, cfg: &AmConfig) -> Result<(Vector, Vector)> {
        let mut theta_g = init_global;
        let mut theta_l = Vector::zeros(self.local_dim());
        for _ in 0..1000 {
            let mut local = SufficientStats::zeros(self.local_dim());
            for (arm, y) in &self.bootstrap_log {
                local.rank1_update(&arm.local, y - arm.global.dot(&theta_g))?;
            }
            let next_l = project_ball(local.factor(cfg.epsilon)?.theta(), 1.0);

            let mut global = self.channel.local.clone();
            for (arm, y) in &self.bootstrap_log {
                global.rank1_update(&arm.global, y - arm.local.dot(&next_l))?;
            }
            let next_g = project_ball(global.factor(cfg.epsilon)?.theta(), 1.0);

            let moved = (&next_g - &theta_g).norm().max((&next_l - &theta_l).norm());
            theta_g = next_g;
            theta_l = next_l;
            if moved < 1e-8 {
                break;
            }
        }
        Ok((theta_g, theta_l))
    }

    /// Ridge estimate of the global block on the partial-reward statistics.
    pub fn global_ridge(&mut self, lambda: f64) -> Result<&RegularizedFactor> {
        self.global_cache.get(&self.channel.local, lambda)
    }

    /// Ridge estimate of the local block on the partial-reward statistics.
    pub fn local_ridge(&mut self, lambda: f64) -> Result<&RegularizedFactor> {
        self.local_cache.get(&self.local_stats, lambda)
    }

    /// Two-term UCB choice for a running client.
    pub fn select_arm_hetero(&mut self, cfg: &UcbConfig, arms: &[HeteroArm]) -> Result<usize> {
        if self.phase != AmPhase::Running {
            return Err(Error::contract("two-term UCB requires a running client"));
        }
        if arms.is_empty() {
            return Err(Error::EmptyArmSet);
        }
        for a in arms {
            self.check_arm(a)?;
        }
        let scale = cfg.sigma + 2.0;
        let (dg, dl) = (self.global_dim(), self.local_dim());
        let g = self.global_cache.get(&self.channel.local, cfg.lambda)?;
        let l = self.local_cache.get(&self.local_stats, cfg.lambda)?;
        let alpha_g = width_from_log_det(g.log_det(), dg, cfg, scale);
        let alpha_l = width_from_log_det(l.log_det(), dl, cfg, scale);
        argmax(arms.iter().map(|a| {
            Ok(a.global.dot(g.theta())
                + alpha_g * g.mahalanobis(&a.global)?
                + a.local.dot(l.theta())
                + alpha_l * l.mahalanobis(&a.local)?)
        }))
    }

    /// Flat LinUCB on the concatenated context over the bootstrap log.
    fn select_bootstrap(&mut self, cfg: &UcbConfig, arms: &[HeteroArm]) -> Result<usize> {
        for a in arms {
            self.check_arm(a)?;
        }
        let flat: Vec<Arm> = arms.iter().map(|a| Arm::flat(a.concatenated())).collect();
        choose_flat(&self.bootstrap_stats, &mut self.bootstrap_cache, cfg, &flat)
    }
}

/// Global/local LinUCB clients sharing the global block through the
/// event-triggered protocol.
#[derive(Debug, Clone)]
pub struct AsyncLinUcbAm {
    ucb: UcbConfig,
    proto: ProtocolConfig,
    am: AmConfig,
    clients: Vec<HeteroClientState>,
    server: ServerState,
    ledger: CommLedger,
}

impl AsyncLinUcbAm {
    pub fn new(
        global_dim: usize,
        local_dims: &[usize],
        ucb: UcbConfig,
        proto: ProtocolConfig,
        am: AmConfig,
        lazy_join: bool,
    ) -> Result<Self> {
        ucb.validate()?;
        am.validate()?;
        if proto.lambda != ucb.lambda {
            return Err(Error::config("protocol and UCB must share λ"));
        }
        if am.shared_features && local_dims.iter().any(|&d| d != global_dim) {
            return Err(Error::config("shared features need equal global and local dimensions"));
        }
        let mut server = ServerState::new(global_dim);
        if !lazy_join {
            for j in 0..local_dims.len() {
                server.register_client(j)?;
            }
        }
        let clients = local_dims
            .iter()
            .map(|&dl| {
                if am.bootstrap {
                    HeteroClientState::new(global_dim, dl)
                } else {
                    HeteroClientState::running(global_dim, dl)
                }
            })
            .collect();
        Ok(Self {
            ucb,
            proto,
            am,
            clients,
            server,
            ledger: CommLedger::new(),
        })
    }

    pub fn clients(&self) -> &[HeteroClientState] {
        &self.clients
    }

    pub fn client_mut(&mut self, client: ClientId) -> Option<&mut HeteroClientState> {
        self.clients.get_mut(client)
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

fn split_arms(arms: &[Arm]) -> Result<Vec<HeteroArm>> {
    arms.iter()
        .map(|a| {
            a.split
                .clone()
                .ok_or_else(|| Error::contract("Async-LinUCB-AM needs global/local arm contexts"))
        })
        .collect()
}

impl Learner for AsyncLinUcbAm {
    fn name(&self) -> &'static str {
        "async-linucb-am"
    }

    fn choose(&mut self, client: ClientId, arms: &[Arm]) -> Result<usize> {
        self.ensure_registered(client)?;
        let parts = split_arms(arms)?;
        let ucb = self.ucb;
        let c = &mut self.clients[client];
        match c.phase {
            AmPhase::Bootstrap => c.select_bootstrap(&ucb, &parts),
            AmPhase::Running => c.select_arm_hetero(&ucb, &parts),
        }
    }

    fn observe(&mut self, step: u64, client: ClientId, arm: &Arm, reward: f64) -> Result<()> {
        self.ensure_registered(client)?;
        let parts = arm
            .split
            .as_ref()
            .ok_or_else(|| Error::contract("Async-LinUCB-AM needs global/local arm contexts"))?;
        let am = self.am;
        let c = &mut self.clients[client];
        match c.phase {
            AmPhase::Bootstrap => {
                c.absorb_bootstrap(parts, reward, &am)?;
            }
            AmPhase::Running => {
                c.absorb_running(parts, reward, &am)?;
            }
        }
        let outcome = protocol_round(
            step,
            client,
            &mut self.clients,
            &mut self.server,
            &self.proto,
            &mut self.ledger,
        )?;
        for j in outcome.downloaded {
            self.clients[j].invalidate();
        }
        Ok(())
    }

    fn comm_cost(&self) -> u64 {
        self.ledger.total()
    }

    fn ledger(&self) -> Option<&CommLedger> {
        Some(&self.ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn arm(g: &[f64], l: &[f64]) -> HeteroArm {
        HeteroArm { global: v(g), local: v(l) }
    }

    #[test]
    fn zero_fixed_point() {
        let mut c = HeteroClientState::running(2, 2);
        let p = c.am_update(&arm(&[0.3, 0.1], &[0.2, -0.4]), 0.0, &AmConfig::default()).unwrap();
        assert_eq!(p, PartialRewards { global: 0.0, local: 0.0 });
        assert_eq!(c.theta_global(), &v(&[0.0, 0.0]));
        assert_eq!(c.theta_local(), &v(&[0.0, 0.0]));
    }

    #[test]
    fn am_update_requires_running_phase() {
        let mut c = HeteroClientState::new(1, 1);
        assert!(matches!(
            c.am_update(&arm(&[1.0], &[0.0]), 1.0, &AmConfig::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn partial_rewards_are_consistent() {
        let cfg = AmConfig::default();
        let mut c = HeteroClientState::running(2, 1);
        let data = [
            (arm(&[0.5, 0.1], &[0.7]), 1.3),
            (arm(&[-0.2, 0.6], &[0.1]), -0.4),
            (arm(&[0.9, 0.0], &[-0.3]), 2.5),
        ];
        for (a, y) in &data {
            let p = c.absorb_running(a, *y, &cfg).unwrap();
            let tl = c.theta_local().clone();
            let tg = c.theta_global().clone();
            assert!((p.global + a.local.dot(&tl) - y).abs() <= 1e-12);
            assert!((p.local + a.global.dot(&tg) - y).abs() <= 1e-12);
            assert!(tg.norm() <= 1.0 + 1e-12 && tl.norm() <= 1.0 + 1e-12);
            assert!(p.global.abs() <= y.abs() + 1.0 + 1e-12);
            assert!(p.local.abs() <= y.abs() + 1.0 + 1e-12);
        }
    }

    #[test]
    fn bootstrap_waits_for_rank() {
        let cfg = AmConfig::default();
        let mut c = HeteroClientState::new(2, 2);
        assert!(!c.absorb_bootstrap(&arm(&[0.5, 0.1], &[0.2, 0.3]), 1.0, &cfg).unwrap());
        assert_eq!(c.phase(), AmPhase::Bootstrap);
        assert_eq!(c.bootstrap_len(), 1);
    }

    #[test]
    fn bootstrap_exits_at_full_rank() {
        let cfg = AmConfig::default();
        let mut c = HeteroClientState::new(1, 1);
        assert!(!c.absorb_bootstrap(&arm(&[1.0], &[0.0]), 0.5, &cfg).unwrap());
        assert!(c.absorb_bootstrap(&arm(&[0.0], &[1.0]), -0.25, &cfg).unwrap());
        assert_eq!(c.phase(), AmPhase::Running);
        assert_eq!(c.bootstrap_len(), 0);
        assert!((c.theta_global()[0] - 0.5).abs() < 1e-6);
        assert!((c.theta_local()[0] + 0.25).abs() < 1e-6);
        // The whole bootstrap batch is waiting to be uploaded.
        assert_eq!(c.channel().upload_buffer, c.channel().local);
        assert_eq!(c.channel().local.design()[(0, 0)], 1.0);
    }

    #[test]
    fn received_full_rank_global_statistics_end_bootstrap() {
        let cfg = AmConfig::default();
        let mut c = HeteroClientState::new(2, 2);
        // As if a download had delivered full-rank global statistics.
        c.channel.local.rank1_update(&v(&[1.0, 0.0]), 0.4).unwrap();
        c.channel.local.rank1_update(&v(&[0.0, 1.0]), -0.2).unwrap();
        assert!(c.absorb_bootstrap(&arm(&[0.1, 0.2], &[0.3, 0.4]), 0.1, &cfg).unwrap());
        assert_eq!(c.phase(), AmPhase::Running);
        // Only the client's own observation is queued for upload.
        assert!((c.channel().upload_buffer.design()[(1, 1)] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn cold_running_client_picks_largest_combined_norm() {
        let mut c = HeteroClientState::running(2, 2);
        let arms = vec![
            arm(&[0.5, 0.0], &[0.0, 0.1]),
            arm(&[0.3, 0.3], &[0.3, 0.3]),
            arm(&[0.0, 0.6], &[0.0, 0.0]),
        ];
        assert_eq!(c.select_arm_hetero(&UcbConfig::default(), &arms).unwrap(), 1);
    }

    #[test]
    fn no_local_part_matches_flat_rule_with_inflated_width() {
        use crate::homogeneous::select_arm;
        let cfg = UcbConfig::default();
        let mut c = HeteroClientState::running(2, 0);
        let am = AmConfig::default();
        let mut flat = SufficientStats::zeros(2);
        let data = [([0.4, 0.2], 0.3), ([0.1, -0.7], -0.2), ([0.5, 0.5], 0.6)];
        for (x, y) in data {
            c.absorb_running(&arm(&x, &[]), y, &am).unwrap();
            // With no local block the global partial reward is y itself.
            flat.rank1_update(&v(&x), y).unwrap();
        }
        assert_eq!(c.channel().local, flat);
        let arms: Vec<HeteroArm> = [[0.2, 0.9], [0.7, 0.1], [-0.5, 0.5]]
            .iter()
            .map(|x| arm(x, &[]))
            .collect();
        let inflated = UcbConfig { sigma: cfg.sigma + 2.0, ..cfg };
        let flat_arms: Vec<Vector> = arms.iter().map(|a| a.global.clone()).collect();
        assert_eq!(
            c.select_arm_hetero(&cfg, &arms).unwrap(),
            select_arm(&flat, &inflated, &flat_arms).unwrap()
        );
    }

    #[test]
    fn zero_global_dimension_never_communicates() {
        let proto = ProtocolConfig::symmetric(crate::protocol::Threshold::ONE, 1.0);
        let mut agent =
            AsyncLinUcbAm::new(0, &[2, 2], UcbConfig::default(), proto, AmConfig::default(), false)
                .unwrap();
        let arms: Vec<Arm> = [[0.5, 0.1], [0.1, 0.8], [-0.3, 0.3]]
            .iter()
            .map(|l| Arm::split(arm(&[], l)))
            .collect();
        for t in 0..20u64 {
            let client = (t % 2) as usize;
            let k = agent.choose(client, &arms).unwrap();
            agent.observe(t + 1, client, &arms[k], 0.1 * t as f64).unwrap();
        }
        assert_eq!(agent.comm_cost(), 0);
    }
}
