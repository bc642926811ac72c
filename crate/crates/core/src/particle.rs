//! Bootstrap particle filter with path-space (genealogy) accumulation of
//! additive functionals, used as the Monte Carlo E-step when no exact
//! smoother exists.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Propagate, SuffStat};

/// Resampling is triggered when `ESS < RESAMPLE_THRESHOLD · N`.
pub const RESAMPLE_THRESHOLD: f64 = 0.5;

/// Weighted particles, their last resampling ancestors, and per-particle
/// statistic accumulators (row-major, `N × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<S> {
    positions: Vec<S>,
    weights: Vec<f64>,
    ancestors: Vec<usize>,
    acc: Vec<f64>,
    dim: usize,
    steps: usize,
    resamples: usize,
}

impl<S: Copy> ParticleCloud<S> {
    /// Equally weighted cloud with zero accumulators.
    pub fn uniform(positions: Vec<S>, dim: usize) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a particle cloud needs at least one particle".into()));
        }
        Ok(Self {
            positions,
            weights: vec![1.0 / n as f64; n],
            ancestors: (0..n).collect(),
            acc: vec![0.0; n * dim],
            dim,
            steps: 0,
            resamples: 0,
        })
    }

    pub fn from_stationary<M, R>(model: &M, theta: &M::Params, n: usize, rng: &mut R) -> Result<Self>
    where
        M: Propagate<State = S>,
        R: Rng + ?Sized,
    {
        Self::uniform(model.sample_stationary_n(theta, n, rng), model.stat_dim())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[S] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ancestors(&self) -> &[usize] {
        &self.ancestors
    }

    pub fn accumulator(&self, i: usize) -> &[f64] {
        &self.acc[i * self.dim..(i + 1) * self.dim]
    }

    pub fn resample_count(&self) -> usize {
        self.resamples
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    /// `Σ_i w_i acc_i`.
    pub fn weighted_accumulator(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, w) in self.weights.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.accumulator(i)) {
                *o += w * a;
            }
        }
        out
    }

    pub fn reset_accumulators(&mut self) {
        self.acc.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Redraw `n` equally weighted particles from the current weighted cloud.
    pub fn resized<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Self> {
        let idx = systematic_resample_n(&self.weights, n, rng);
        let mut acc = Vec::with_capacity(n * self.dim);
        for &a in &idx {
            acc.extend_from_slice(self.accumulator(a));
        }
        Ok(Self {
            positions: idx.iter().map(|&a| self.positions[a]).collect(),
            weights: vec![1.0 / n as f64; n],
            ancestors: idx,
            acc,
            dim: self.dim,
            steps: self.steps,
            resamples: self.resamples,
        })
    }

    fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.len();
        let idx = systematic_resample_n(&self.weights, n, rng);
        let mut acc = vec![0.0; n * self.dim];
        for (i, &a) in idx.iter().enumerate() {
            acc[i * self.dim..(i + 1) * self.dim].copy_from_slice(&self.acc[a * self.dim..(a + 1) * self.dim]);
        }
        self.positions = idx.iter().map(|&a| self.positions[a]).collect();
        self.acc = acc;
        self.weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
        self.ancestors = idx;
        self.resamples += 1;
    }
}

/// `1 / Σ w_i²` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one uniform offset, `n` evenly spaced points.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    systematic_resample_n(weights, weights.len(), rng)
}

fn systematic_resample_n<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for _ in 0..n {
        while u >= cum && j + 1 < weights.len() {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
        u += step;
    }
    out
}

/// Propagate through the prior kernel, reweight by the emission density,
/// and resample when the effective sample size drops below `N/2`.
///
/// Accumulators are updated as `acc_i ← discount·acc_i + gain·S(x_i, x'_i, y)`
/// before resampling, so after resampling each accumulator follows its
/// ancestral line.
pub fn pf_step_in_place<M, R>(
    model: &M,
    theta: &M::Params,
    cloud: &mut ParticleCloud<M::State>,
    y: f64,
    discount: f64,
    gain: f64,
    rng: &mut R,
) -> Result<()>
where
    M: Propagate,
    R: Rng + ?Sized,
{
    let n = cloud.len();
    let dim = cloud.dim;
    cloud.steps += 1;
    let mut logw = vec![0.0; n];
    for i in 0..n {
        let x = cloud.positions[i];
        let x2 = model.sample_transition(theta, x, rng);
        let acc = &mut cloud.acc[i * dim..(i + 1) * dim];
        if discount != 1.0 {
            acc.iter_mut().for_each(|a| *a *= discount);
        }
        model.add_suff_stat(x, x2, y, gain, acc);
        cloud.positions[i] = x2;
        logw[i] = cloud.weights[i].ln() + model.log_emission(theta, x2, y);
    }
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::ParticleDegeneracy { step: cloud.steps });
    }
    let mut z = 0.0;
    for (w, lw) in cloud.weights.iter_mut().zip(&logw) {
        *w = (lw - top).exp();
        z += *w;
    }
    cloud.weights.iter_mut().for_each(|w| *w /= z);
    if cloud.ess() < RESAMPLE_THRESHOLD * n as f64 {
        cloud.resample(rng);
    } else {
        cloud.ancestors.iter_mut().enumerate().for_each(|(i, a)| *a = i);
    }
    Ok(())
}

pub fn pf_step<M, R>(
    model: &M,
    theta: &M::Params,
    cloud: &ParticleCloud<M::State>,
    y: f64,
    rng: &mut R,
) -> Result<ParticleCloud<M::State>>
where
    M: Propagate,
    R: Rng + ?Sized,
{
    let mut next = cloud.clone();
    pf_step_in_place(model, theta, &mut next, y, 1.0, 1.0, rng)?;
    Ok(next)
}

/// Monte Carlo block statistic `S̃ = (1/τ) Σ_i w_i acc_i` from `n` particles
/// started from `cloud0`. Returns the terminal cloud for handoff.
pub fn block_statistic_pf<M, R>(
    model: &M,
    theta: &M::Params,
    cloud0: &ParticleCloud<M::State>,
    y: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<(SuffStat, ParticleCloud<M::State>)>
where
    M: Propagate,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::InvalidArgument(format!("particle count must be at least 2, got {n}")));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("block must contain at least one observation".into()));
    }
    if cloud0.dim != model.stat_dim() {
        return Err(Error::InvalidArgument("cloud accumulator dimension does not match the model".into()));
    }
    let mut cloud = if cloud0.len() == n { cloud0.clone() } else { cloud0.resized(n, rng)? };
    cloud.reset_accumulators();
    for &obs in y {
        pf_step_in_place(model, theta, &mut cloud, obs, 1.0, 1.0, rng)?;
    }
    let tau = y.len() as f64;
    let values = cloud.weighted_accumulator().into_iter().map(|v| v / tau).collect();
    Ok((SuffStat::new(values, y.len()), cloud))
}

/// Particle count per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticleCount {
    Fixed(usize),
    /// `N_n = ⌈base · τ_n^{2b-1}⌉`.
    Scaled { base: usize, b: f64 },
}

impl ParticleCount {
    pub fn for_block(&self, tau: usize) -> usize {
        match *self {
            ParticleCount::Fixed(n) => n,
            ParticleCount::Scaled { base, b } => {
                let n = (base as f64 * (tau as f64).powf(2.0 * b - 1.0)).ceil() as usize;
                n.max(base).max(2)
            }
        }
    }
}
