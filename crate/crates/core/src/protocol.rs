//! Asynchronous event-triggered communication between clients and the
//! server.
//!
//! Each client keeps a local copy of the shared statistics plus an upload
//! buffer of observations the server has not seen. The server keeps the
//! aggregate plus, per client, a download buffer of updates that client has
//! not received. A transfer happens only when a buffer would grow the
//! receiving side's `log det(V + λI)` by more than `log γ`.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{log_det_regularized, mahalanobis_norm, SufficientStats, Vector};

pub type ClientId = usize;

/// A communication threshold `γ ≥ 1`, or `+∞` to disable the trigger.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub const ONE: Threshold = Threshold(1.0);
    pub const INFINITE: Threshold = Threshold(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 1.0 {
            return Err(Error::config(format!("threshold must be ≥ 1 or inf, got {value}")));
        }
        Ok(Threshold(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Decides whether a buffer fires. `buffer_is_zero` short-circuits the
    /// ratio-is-exactly-one case; `log_ratio` is only evaluated when the
    /// answer is not already determined.
    fn fires(self, buffer_is_zero: bool, log_ratio: impl FnOnce() -> Result<f64>) -> Result<bool> {
        if self.is_infinite() || buffer_is_zero {
            return Ok(false);
        }
        if self.0 == 1.0 {
            return Ok(true);
        }
        Ok(log_ratio()? > self.0.ln())
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(Threshold::INFINITE),
            _ => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::config(format!("not a threshold: {s:?}")))?;
                Threshold::new(v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub gamma_u: Threshold,
    pub gamma_d: Threshold,
    pub lambda: f64,
}

impl ProtocolConfig {
    pub fn symmetric(gamma: Threshold, lambda: f64) -> Self {
        Self {
            gamma_u: gamma,
            gamma_d: gamma,
            lambda,
        }
    }
}

/// A client's view of the shared statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientChannelState {
    pub local: SufficientStats,
    pub upload_buffer: SufficientStats,
}

impl ClientChannelState {
    pub fn new(dim: usize) -> Self {
        Self {
            local: SufficientStats::zeros(dim),
            upload_buffer: SufficientStats::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.local.dim()
    }

    /// Adds one observation to both the local copy and the upload buffer.
    pub fn absorb_observation(&mut self, x: &Vector, y: f64) -> Result<()> {
        self.local.rank1_update(x, y)?;
        self.upload_buffer.rank1_update(x, y)
    }

    /// Adds a batch of statistics to both the local copy and the upload
    /// buffer.
    pub fn absorb_batch(&mut self, batch: &SufficientStats) -> Result<()> {
        self.local.absorb(batch)?;
        self.upload_buffer.absorb(batch)
    }

    /// `log[det(V_local + λI) / det(V_local − ΔV + λI)]`.
    pub fn upload_log_ratio(&self, lambda: f64) -> Result<f64> {
        let base = self.local.difference(&self.upload_buffer)?;
        Ok(log_det_regularized(&self.local, lambda)? - log_det_regularized(&base, lambda)?)
    }
}

impl AsRef<ClientChannelState> for ClientChannelState {
    fn as_ref(&self) -> &ClientChannelState {
        self
    }
}

impl AsMut<ClientChannelState> for ClientChannelState {
    fn as_mut(&mut self) -> &mut ClientChannelState {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub global: SufficientStats,
    download_buffers: BTreeMap<ClientId, SufficientStats>,
}

impl ServerState {
    pub fn new(dim: usize) -> Self {
        Self {
            global: SufficientStats::zeros(dim),
            download_buffers: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.global.dim()
    }

    /// Registers a client. Its download buffer starts as a copy of the
    /// current aggregate, so its first download delivers everything the
    /// server has seen.
    pub fn register_client(&mut self, client: ClientId) -> Result<()> {
        if self.download_buffers.contains_key(&client) {
            return Err(Error::DuplicateClient(client));
        }
        self.download_buffers.insert(client, self.global.clone());
        Ok(())
    }

    pub fn is_registered(&self, client: ClientId) -> bool {
        self.download_buffers.contains_key(&client)
    }

    pub fn download_buffer(&self, client: ClientId) -> Result<&SufficientStats> {
        self.download_buffers
            .get(&client)
            .ok_or(Error::UnknownClient(client))
    }

    /// Registered client ids in ascending order.
    pub fn clients(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.download_buffers.keys().copied()
    }

    /// `log[det(V_g + λI) / det(V_g − ΔV_{−j} + λI)]`.
    pub fn download_log_ratio(&self, client: ClientId, lambda: f64) -> Result<f64> {
        let global_log_det = log_det_regularized(&self.global, lambda)?;
        self.download_log_ratio_with(client, lambda, global_log_det)
    }

    fn download_log_ratio_with(
        &self,
        client: ClientId,
        lambda: f64,
        global_log_det: f64,
    ) -> Result<f64> {
        let base = self.global.difference(self.download_buffer(client)?)?;
        Ok(global_log_det - log_det_regularized(&base, lambda)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Upload,
    Download,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upload => "upload",
            Direction::Download => "download",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upload" => Ok(Direction::Upload),
            "download" => Ok(Direction::Download),
            other => Err(Error::config(format!("unknown direction {other:?}"))),
        }
    }
}

/// One directed transfer of a `{ΔV, Δb}` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transfer {
    pub step: u64,
    pub direction: Direction,
    pub client: ClientId,
    pub payload_params: usize,
}

/// Append-only record of transfers. Its length is the communication cost.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLedger {
    transfers: Vec<Transfer>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, transfer: Transfer) {
        debug_assert!(self
            .transfers
            .last()
            .is_none_or(|last| last.step <= transfer.step));
        self.transfers.push(transfer);
    }

    pub fn total(&self) -> u64 {
        self.transfers.len() as u64
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    pub fn count(&self, direction: Direction) -> u64 {
        self.transfers
            .iter()
            .filter(|t| t.direction == direction)
            .count() as u64
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["step", "direction", "client_id", "payload_params"])?;
        for t in &self.transfers {
            w.write_record([
                t.step.to_string(),
                t.direction.as_str().to_string(),
                t.client.to_string(),
                t.payload_params.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(io::BufWriter::new(file))
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut ledger = CommLedger::new();
        for (i, row) in r.records().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| parse_err(line, e.to_string()))?;
            if row.len() != 4 {
                return Err(parse_err(line, format!("expected 4 fields, got {}", row.len())));
            }
            let field = |k: usize| row.get(k).unwrap_or_default();
            let num = |k: usize| -> Result<u64> {
                field(k)
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad integer {:?}", field(k))))
            };
            ledger.transfers.push(Transfer {
                step: num(0)?,
                direction: field(1).parse().map_err(|e: Error| parse_err(line, e.to_string()))?,
                client: num(2)? as ClientId,
                payload_params: num(3)? as usize,
            });
        }
        Ok(ledger)
    }
}

fn parse_err(line: u64, message: String) -> Error {
    Error::Parse {
        path: "<ledger>".into(),
        line,
        message,
    }
}

/// Upload event: `det(V_local + λI) / det(V_local − ΔV + λI) > γ_U`.
pub fn check_upload(client: &ClientChannelState, cfg: &ProtocolConfig) -> Result<bool> {
    cfg.gamma_u.fires(client.upload_buffer.design_is_zero(), || {
        client.upload_log_ratio(cfg.lambda)
    })
}

/// Download event for client `j`: `det(V_g + λI) / det(V_g − ΔV_{−j} + λI) > γ_D`.
pub fn check_download(server: &ServerState, client: ClientId, cfg: &ProtocolConfig) -> Result<bool> {
    let buffer = server.download_buffer(client)?;
    cfg.gamma_d.fires(buffer.design_is_zero(), || {
        server.download_log_ratio(client, cfg.lambda)
    })
}

/// What a protocol round did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundOutcome {
    pub uploaded: bool,
    /// Clients that received a download, ascending.
    pub downloaded: Vec<ClientId>,
}

/// One round of the event-triggered protocol, run after `uploader` has
/// absorbed its newest observation.
///
/// On an upload the server folds the buffer into the aggregate and into
/// every other registered client's download buffer, then checks every
/// registered client (uploader included) in ascending id order for a
/// download. Without an upload nothing happens.
pub fn protocol_round<C>(
    step: u64,
    uploader: ClientId,
    clients: &mut [C],
    server: &mut ServerState,
    cfg: &ProtocolConfig,
    ledger: &mut CommLedger,
) -> Result<RoundOutcome>
where
    C: AsRef<ClientChannelState> + AsMut<ClientChannelState>,
{
    let mut outcome = RoundOutcome::default();
    let sender = clients
        .get_mut(uploader)
        .ok_or(Error::UnknownClient(uploader))?
        .as_mut();
    if !server.is_registered(uploader) {
        return Err(Error::UnknownClient(uploader));
    }
    if !check_upload(sender, cfg)? {
        return Ok(outcome);
    }

    let delta = sender.upload_buffer.clone();
    sender.upload_buffer.clear();
    server.global.absorb(&delta)?;
    for (&j, buffer) in server.download_buffers.iter_mut() {
        if j != uploader {
            buffer.absorb(&delta)?;
        }
    }
    ledger.record(Transfer {
        step,
        direction: Direction::Upload,
        client: uploader,
        payload_params: delta.payload_params(),
    });
    outcome.uploaded = true;

    if cfg.gamma_d.is_infinite() {
        return Ok(outcome);
    }
    // Only evaluated when some buffer needs the full ratio.
    let mut global_log_det = None;
    let ids: Vec<ClientId> = server.clients().collect();
    for j in ids {
        let fire = {
            let buffer = server.download_buffer(j)?;
            cfg.gamma_d.fires(buffer.design_is_zero(), || {
                let g = match global_log_det {
                    Some(g) => g,
                    None => {
                        let g = log_det_regularized(&server.global, cfg.lambda)?;
                        global_log_det = Some(g);
                        g
                    }
                };
                server.download_log_ratio_with(j, cfg.lambda, g)
            })?
        };
        if !fire {
            continue;
        }
        let receiver = clients.get_mut(j).ok_or(Error::UnknownClient(j))?.as_mut();
        let buffer = server
            .download_buffers
            .get_mut(&j)
            .ok_or(Error::UnknownClient(j))?;
        receiver.local.absorb(buffer)?;
        ledger.record(Transfer {
            step,
            direction: Direction::Download,
            client: j,
            payload_params: buffer.payload_params(),
        });
        buffer.clear();
        outcome.downloaded.push(j);
    }
    Ok(outcome)
}

/// Staleness diagnostic `Γ = xᵀ(V_i + λI)⁻¹x / xᵀ(V + λI)⁻¹x`, comparing a
/// client's local statistics against the pooled statistics of every
/// observation so far. Never used to make decisions.
pub fn compute_gamma(
    client_local: &SufficientStats,
    pooled: &SufficientStats,
    x: &Vector,
    lambda: f64,
) -> Result<f64> {
    let local = mahalanobis_norm(client_local, lambda, x)?;
    let global = mahalanobis_norm(pooled, lambda, x)?;
    if global == 0.0 {
        return Ok(1.0);
    }
    Ok((local * local) / (global * global))
}
