//! Federated linear contextual bandits with event-triggered asynchronous
//! communication.
//!
//! Clients observe contexts and rewards one at a time and share only
//! sufficient statistics `(V, b)` with a server. A client uploads its
//! buffered statistics when they would grow its log-determinant by more
//! than `log γ_U`; the server then pushes pending aggregates to every
//! client whose download buffer would grow that client's log-determinant by
//! more than `log γ_D`.

pub mod agent;
pub mod config;
pub mod env;
pub mod error;
pub mod hetero;
pub mod homogeneous;
pub mod linalg;
pub mod protocol;
pub mod sim;
pub mod sweep;
pub mod sync;

pub use agent::Learner;
pub use config::{apply_preset, Algorithm, RunConfig};
pub use error::{Error, Result};
pub use sim::{run_simulation, MetricsTrace};
pub use sweep::{run_sweep, Grid, SweepTable};
