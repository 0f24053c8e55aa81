//! Status updating under a privacy-leakage budget over an erasure channel.
//!
//! A source samples a process at will and ships each sample through a channel
//! with i.i.d. busy times and i.i.d. erasures. Each sample is held back for a
//! post-sampling wait `zeta` before its first transmission so that the
//! destination only ever sees moderately fresh data, and a failed sample is
//! retransmitted up to `K` times before it is discarded and a fresh one taken.
//!
//! The crate provides:
//!
//! * [`leakage`]: leakage-versus-age models and the post-sampling wait solver.
//! * [`analysis`]: closed-form renewal moments, long-term average age, and
//!   the search for the best retransmission cap.
//! * [`presampling`]: the error-free threshold pre-sampling policy.
//! * [`sim`]: an epoch-by-epoch Monte Carlo simulator used to check all of the
//!   above.

pub mod analysis;
pub mod busy;
pub mod error;
pub mod leakage;
pub mod numfmt;
pub mod params;
pub mod penalty;
pub mod presampling;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;

pub use analysis::{average_age, epoch_moments, optimal_k, AnalyticReport, KSearch, RetransMoments};
pub use busy::BusyTimeDistribution;
pub use error::{Error, Result};
pub use leakage::{expected_leakage, solve_zeta, LeakageModel, ZetaSolution};
pub use params::SystemParams;
pub use penalty::AgePenalty;
pub use presampling::{PolicyContext, ThresholdPolicy};
pub use rng::RandomSource;
pub use sim::{leakage_feasibility, simulate, EpochRecord, Feasibility, SimConfig, SimulationResult};
