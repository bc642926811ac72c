use std::time::{Duration, Instant};

use super::backend::{BlockBackend, Params};
use super::record::{RunEntry, RunRecord};
use super::schedule::BlockSchedule;
use crate::error::{Error, Result};
use crate::model::{ExponentialFamily, SuffStat};
use crate::rng::StreamRng;

/// Block-initial law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChiPolicy {
    /// Stationary law of the hidden chain at the current parameter.
    Stationary,
    /// Filtering law at the end of the previous block.
    #[default]
    Handoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoemOptions {
    pub schedule: BlockSchedule,
    pub chi_policy: ChiPolicy,
    /// Blocks starting at or after this observation count enter the average.
    pub averaging_start: usize,
    /// Blocks ending at or before this observation count keep `θ₀`; their
    /// statistics are pooled into the first M-step.
    pub burn_in: usize,
}

impl BoemOptions {
    pub fn new(schedule: BlockSchedule) -> Self {
        Self { schedule, chi_policy: ChiPolicy::default(), averaging_start: 0, burn_in: 0 }
    }
}

/// Block online EM over every complete block of `y`.
pub fn run_boem<B: BlockBackend>(
    backend: &B,
    theta0: &Params<B>,
    y: &[f64],
    opts: &BoemOptions,
    rng: &mut StreamRng,
) -> Result<RunRecord> {
    run(backend, theta0, y, opts, false, rng)
}

/// As [`run_boem`], additionally recording `θ̄(Σ_k τ_k S_k / Σ_k τ_k)` over the
/// blocks that start at or after `opts.averaging_start`.
pub fn run_averaged_boem<B: BlockBackend>(
    backend: &B,
    theta0: &Params<B>,
    y: &[f64],
    opts: &BoemOptions,
    rng: &mut StreamRng,
) -> Result<RunRecord> {
    run(backend, theta0, y, opts, true, rng)
}

fn run<B: BlockBackend>(
    backend: &B,
    theta0: &Params<B>,
    y: &[f64],
    opts: &BoemOptions,
    averaged: bool,
    rng: &mut StreamRng,
) -> Result<RunRecord> {
    let model = backend.model();
    model.validate(theta0)?;
    let clock = Instant::now();
    let mut theta = theta0.clone();
    let mut record = RunRecord::new(model.coordinate_names());
    let flat = model.flatten(&theta);
    record.push(entry(0, flat.clone(), flat.clone(), 0, Duration::ZERO))?;

    let mut avg_theta = flat;
    let mut avg_sum: Vec<f64> = Vec::new();
    let mut avg_count = 0usize;
    let mut handoff: Option<B::Law> = None;
    let mut pool: Vec<f64> = Vec::new();
    let mut pooled = 0usize;

    for (k, (start, tau)) in opts.schedule.blocks_within(y.len()).into_iter().enumerate() {
        let n = k + 1;
        let chi = match (opts.chi_policy, handoff.take()) {
            (ChiPolicy::Handoff, Some(law)) => law,
            _ => backend.stationary_law(&theta, rng)?,
        };
        let (stat, terminal) = backend.block_statistic(&theta, &chi, &y[start..start + tau], rng)?;
        handoff = Some(terminal);

        if opts.burn_in > 0 && (pooled > 0 || start + tau <= opts.burn_in) {
            if pool.is_empty() {
                pool = vec![0.0; stat.dim()];
            }
            for (a, s) in pool.iter_mut().zip(stat.values()) {
                *a += tau as f64 * s;
            }
            pooled += tau;
        }
        if start + tau <= opts.burn_in {
            let flat = model.flatten(&theta);
            record.push(entry(start + tau, flat.clone(), flat, n, clock.elapsed()))?;
            continue;
        }
        let m_stat = if pooled > 0 {
            let s = SuffStat::new(pool.iter().map(|v| v / pooled as f64).collect(), pooled);
            pool.clear();
            pooled = 0;
            s
        } else {
            stat.clone()
        };

        let updated = match checked_m_step(model, &m_stat) {
            Ok(t) => {
                theta = t;
                true
            }
            Err(Error::DegenerateStatistic(msg)) => {
                log::debug!("block {n} skipped: {msg}");
                record.skipped.push(n);
                false
            }
            Err(e) => return Err(e),
        };

        if averaged && updated && start >= opts.averaging_start {
            if avg_sum.is_empty() {
                avg_sum = vec![0.0; stat.dim()];
            }
            for (a, s) in avg_sum.iter_mut().zip(stat.values()) {
                *a += tau as f64 * s;
            }
            avg_count += tau;
            let mean = SuffStat::new(avg_sum.iter().map(|v| v / avg_count as f64).collect(), avg_count);
            if let Ok(t) = checked_m_step(model, &mean) {
                avg_theta = model.flatten(&t);
            }
        } else if avg_count == 0 {
            avg_theta = model.flatten(&theta);
        }
        let est = model.flatten(&theta);
        let avg = if averaged { avg_theta.clone() } else { est.clone() };
        record.push(entry(start + tau, est, avg, n, clock.elapsed()))?;
    }
    Ok(record)
}

pub(super) fn checked_m_step<M: ExponentialFamily>(model: &M, stat: &SuffStat) -> Result<M::Params> {
    if !stat.is_finite() {
        return Err(Error::DegenerateStatistic("non-finite block statistic".into()));
    }
    model.m_step(stat)
}

pub(super) fn entry(observations: usize, estimate: Vec<f64>, averaged: Vec<f64>, block: usize, elapsed: Duration) -> RunEntry {
    RunEntry { observations, estimate, averaged, block, elapsed }
}
