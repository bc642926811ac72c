//! Block online EM driver, the online-EM baseline and the Monte Carlo rate
//! probe.

mod backend;
mod boem;
mod online;
mod rate;
mod record;
mod schedule;

pub use backend::{BlockBackend, ExactBackend, KalmanBackend, Params, ParticleBackend};
pub use boem::{run_averaged_boem, run_boem, BoemOptions, ChiPolicy};
pub use online::{run_online_em, OnlineBackend, OnlineOptions};
pub use rate::{rate_probe, RateProbe, RateRow};
pub use record::{RunEntry, RunRecord};
pub use schedule::BlockSchedule;
