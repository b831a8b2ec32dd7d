use crate::env::Arm;
use crate::error::Result;
use crate::linalg::SufficientStats;
use crate::protocol::{ClientId, CommLedger};

/// A multi-client bandit learner driven one interaction at a time.
///
/// The simulation asks the learner to `choose` an arm for the active client,
/// reveals the reward, then calls `observe`, which absorbs the observation and
/// runs whatever communication the algorithm prescribes. UCB learners are
/// fully deterministic; none of them consumes randomness.
pub trait Learner: Send {
    fn name(&self) -> &'static str;

    fn choose(&mut self, client: ClientId, arms: &[Arm]) -> Result<usize>;

    fn observe(&mut self, step: u64, client: ClientId, arm: &Arm, reward: f64) -> Result<()>;

    /// Communication cost so far.
    fn comm_cost(&self) -> u64;

    fn ledger(&self) -> Option<&CommLedger> {
        None
    }

    /// The statistics a client currently decides with, when the learner has
    /// a single flat model per client.
    fn decision_stats(&self, _client: ClientId) -> Option<&SufficientStats> {
        None
    }
}
