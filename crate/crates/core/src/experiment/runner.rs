use rayon::prelude::*;

use super::config::{Algorithm, BackendKind, ExperimentConfig, ModelKind};
use crate::engine::{
    run_averaged_boem, run_boem, run_online_em, BlockBackend, BoemOptions, ExactBackend, KalmanBackend, OnlineBackend,
    OnlineOptions, ParticleBackend, RunRecord,
};
use crate::error::{Error, Result};
use crate::model::{ExponentialFamily, FiniteHmm, Lgssm, Propagate, StochVol};
use crate::rng::{stream, Purpose};
use crate::simulate::simulate;

/// A replication that returned an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub replication: u64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub coordinates: Vec<String>,
    /// Successful replications in replication order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
}

/// Simulated observations with the hidden path rendered as text.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStream {
    pub states: Vec<String>,
    pub observations: Vec<f64>,
}

/// Runs every replication on a pool of `workers` threads (rayon's default
/// when `None`). Each replication owns its data and smoother streams, so the
/// records do not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<(u64, Result<RunRecord>)> = pool.install(|| {
        (0..cfg.replications as u64).into_par_iter().map(|rep| (rep, run_replication(cfg, rep))).collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, res) in results {
        match res {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure { replication: rep, seed: cfg.seed, error: e.to_string() }),
        }
    }
    Ok(ExperimentOutput { config_hash: cfg.hash(), coordinates: coordinate_names(cfg), records, failures })
}

fn coordinate_names(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.model {
        ModelKind::Lgssm => Lgssm::new(cfg.bounds.clone()).coordinate_names(),
        ModelKind::StochVol => StochVol::new(cfg.bounds.clone()).coordinate_names(),
        ModelKind::FiniteHmm => FiniteHmm::new(cfg.states, cfg.bounds.clone()).coordinate_names(),
    }
}

/// One replication: simulate from the true parameter, then estimate.
pub fn run_replication(cfg: &ExperimentConfig, rep: u64) -> Result<RunRecord> {
    let b = cfg.bounds.clone();
    let particles = cfg.particles;
    let mut rec = match (cfg.model, cfg.backend, cfg.algorithm.is_online()) {
        (ModelKind::Lgssm, BackendKind::Kalman, false) => drive_blocks(&KalmanBackend { model: Lgssm::new(b) }, cfg, rep),
        (ModelKind::Lgssm, BackendKind::Particle, false) => drive_blocks(&ParticleBackend { model: Lgssm::new(b), particles }, cfg, rep),
        (ModelKind::Lgssm, BackendKind::Particle, true) => drive_online(&ParticleBackend { model: Lgssm::new(b), particles }, cfg, rep),
        (ModelKind::FiniteHmm, BackendKind::Exact, false) => drive_blocks(&ExactBackend { model: cfg.finite_model()? }, cfg, rep),
        (ModelKind::FiniteHmm, BackendKind::Exact, true) => drive_online(&ExactBackend { model: cfg.finite_model()? }, cfg, rep),
        (ModelKind::FiniteHmm, BackendKind::Particle, false) => {
            drive_blocks(&ParticleBackend { model: cfg.finite_model()?, particles }, cfg, rep)
        }
        (ModelKind::FiniteHmm, BackendKind::Particle, true) => {
            drive_online(&ParticleBackend { model: cfg.finite_model()?, particles }, cfg, rep)
        }
        (ModelKind::StochVol, BackendKind::Particle, false) => drive_blocks(&ParticleBackend { model: StochVol::new(b), particles }, cfg, rep),
        (ModelKind::StochVol, BackendKind::Particle, true) => drive_online(&ParticleBackend { model: StochVol::new(b), particles }, cfg, rep),
        (m, be, _) => Err(Error::Unsupported(format!("model '{}' with backend '{}'", m.as_str(), be.as_str()))),
    }?;
    rec.seed = cfg.seed;
    rec.replication = rep;
    rec.config_hash = cfg.hash();
    Ok(rec)
}

fn observations<M: Propagate>(model: &M, cfg: &ExperimentConfig, rep: u64) -> Result<(M::Params, Vec<f64>)> {
    let truth = model.unflatten(&cfg.true_params)?;
    model.validate(&truth)?;
    let y = simulate(model, &truth, cfg.observations, &mut stream(cfg.seed, rep, Purpose::Data)).observations;
    Ok((model.unflatten(&cfg.init_params)?, y))
}

fn drive_blocks<B>(backend: &B, cfg: &ExperimentConfig, rep: u64) -> Result<RunRecord>
where
    B: BlockBackend,
    B::Model: Propagate,
{
    let (theta0, y) = observations(backend.model(), cfg, rep)?;
    let opts = BoemOptions {
        schedule: cfg.schedule,
        chi_policy: cfg.chi_policy,
        averaging_start: cfg.averaging_start,
        burn_in: cfg.boem_burn_in,
    };
    let mut rng = stream(cfg.seed, rep, Purpose::Smoother);
    match cfg.algorithm {
        Algorithm::BoemAveraged => run_averaged_boem(backend, &theta0, &y, &opts, &mut rng),
        _ => run_boem(backend, &theta0, &y, &opts, &mut rng),
    }
}

fn drive_online<B>(backend: &B, cfg: &ExperimentConfig, rep: u64) -> Result<RunRecord>
where
    B: OnlineBackend,
    B::Model: Propagate,
{
    let (theta0, y) = observations(backend.model(), cfg, rep)?;
    let opts = OnlineOptions {
        step_exponent: cfg.step_exponent,
        burn_in: cfg.burn_in,
        averaging_start: cfg.averaging_start.max(1),
        record_at: cfg.checkpoints.clone(),
    };
    run_online_em(backend, &theta0, &y, &opts, &mut stream(cfg.seed, rep, Purpose::Smoother))
}

/// The observation stream of replication `rep`, identical to the one the
/// estimators see.
pub fn simulate_stream(cfg: &ExperimentConfig, rep: u64) -> Result<SimulatedStream> {
    fn go<M: Propagate>(model: M, cfg: &ExperimentConfig, rep: u64) -> Result<SimulatedStream> {
        let truth = model.unflatten(&cfg.true_params)?;
        model.validate(&truth)?;
        let sim = simulate(&model, &truth, cfg.observations, &mut stream(cfg.seed, rep, Purpose::Data));
        Ok(SimulatedStream { states: sim.states.iter().map(|x| format!("{x:?}")).collect(), observations: sim.observations })
    }
    let b = cfg.bounds.clone();
    match cfg.model {
        ModelKind::Lgssm => go(Lgssm::new(b), cfg, rep),
        ModelKind::StochVol => go(StochVol::new(b), cfg, rep),
        ModelKind::FiniteHmm => go(FiniteHmm::new(cfg.states, b), cfg, rep),
    }
}
