//! Sync-LinUCB: the global-synchronization baseline.
//!
//! A client triggers a synchronization round when the number of its
//! unsynchronized interactions times the log-det growth they caused exceeds
//! `D`. Every client then uploads and every client downloads the full
//! aggregate, for a cost of exactly `2N` per round.

use crate::agent::Learner;
use crate::env::Arm;
use crate::error::{Error, Result};
use crate::homogeneous::{choose_flat, FactorCache, UcbConfig};
use crate::linalg::{log_det_regularized, SufficientStats};
use crate::protocol::{ClientId, CommLedger, Direction, Transfer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub threshold: f64,
    pub ucb: UcbConfig,
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || self.threshold.is_nan() {
            return Err(Error::config(format!(
                "sync threshold D must be > 0, got {}",
                self.threshold
            )));
        }
        self.ucb.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SyncClientState {
    pub local: SufficientStats,
    pub upload_buffer: SufficientStats,
    /// Interactions since the last synchronization.
    pub delta_t: u64,
    cache: FactorCache,
}

impl SyncClientState {
    pub fn new(dim: usize) -> Self {
        Self {
            local: SufficientStats::zeros(dim),
            upload_buffer: SufficientStats::zeros(dim),
            delta_t: 0,
            cache: FactorCache::default(),
        }
    }
}

/// `Δt · log[det(V_local + λI) / det(V_local − ΔV + λI)] > D`.
pub fn check_sync(client: &SyncClientState, cfg: &SyncConfig) -> Result<bool> {
    if client.delta_t == 0 {
        return Ok(false);
    }
    let lambda = cfg.ucb.lambda;
    let base = client.local.difference(&client.upload_buffer)?;
    let log_ratio = log_det_regularized(&client.local, lambda)? - log_det_regularized(&base, lambda)?;
    Ok(client.delta_t as f64 * log_ratio > cfg.threshold)
}

/// Full synchronization: all clients upload into `global`, then every client
/// replaces its local statistics with the aggregate.
pub fn sync_round(
    step: u64,
    clients: &mut [SyncClientState],
    global: &mut SufficientStats,
    ledger: &mut CommLedger,
) -> Result<()> {
    let payload = global.payload_params();
    for (i, c) in clients.iter_mut().enumerate() {
        global.absorb(&c.upload_buffer)?;
        c.upload_buffer.clear();
        c.delta_t = 0;
        ledger.record(Transfer {
            step,
            direction: Direction::Upload,
            client: i,
            payload_params: payload,
        });
    }
    for (i, c) in clients.iter_mut().enumerate() {
        c.local.clone_from(global);
        c.cache.invalidate();
        ledger.record(Transfer {
            step,
            direction: Direction::Download,
            client: i,
            payload_params: payload,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SyncLinUcb {
    cfg: SyncConfig,
    clients: Vec<SyncClientState>,
    global: SufficientStats,
    ledger: CommLedger,
}

impl SyncLinUcb {
    pub fn new(n_clients: usize, dim: usize, cfg: SyncConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            clients: (0..n_clients).map(|_| SyncClientState::new(dim)).collect(),
            global: SufficientStats::zeros(dim),
            ledger: CommLedger::new(),
        })
    }

    pub fn clients(&self) -> &[SyncClientState] {
        &self.clients
    }

    pub fn global(&self) -> &SufficientStats {
        &self.global
    }

    fn client(&mut self, client: ClientId) -> Result<&mut SyncClientState> {
        self.clients.get_mut(client).ok_or(Error::UnknownClient(client))
    }
}

impl Learner for SyncLinUcb {
    fn name(&self) -> &'static str {
        "sync-linucb"
    }

    fn choose(&mut self, client: ClientId, arms: &[Arm]) -> Result<usize> {
        let ucb = self.cfg.ucb;
        let c = self.client(client)?;
        choose_flat(&c.local, &mut c.cache, &ucb, arms)
    }

    fn observe(&mut self, step: u64, client: ClientId, arm: &Arm, reward: f64) -> Result<()> {
        let cfg = self.cfg;
        let c = self.client(client)?;
        c.local.rank1_update(&arm.flat, reward)?;
        c.upload_buffer.rank1_update(&arm.flat, reward)?;
        c.delta_t += 1;
        c.cache.invalidate();
        if check_sync(c, &cfg)? {
            sync_round(step, &mut self.clients, &mut self.global, &mut self.ledger)?;
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
        self.clients.get(client).map(|c| &c.local)
    }
}
