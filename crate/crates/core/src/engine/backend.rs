use crate::error::Result;
use crate::exact::{block_statistic, CategoricalLaw};
use crate::kalman::{block_statistic_lgssm, GaussianLaw};
use crate::model::{ExponentialFamily, FiniteHmm, Lgssm, Propagate, SuffStat};
use crate::particle::{block_statistic_pf, ParticleCloud, ParticleCount};
use crate::rng::StreamRng;

pub type Params<B> = <<B as BlockBackend>::Model as ExponentialFamily>::Params;

/// E-step engine: computes the block statistic under `θ` from a block-initial
/// law and returns the law at the end of the block.
pub trait BlockBackend: Send + Sync {
    type Model: ExponentialFamily;
    type Law: Clone + Send;

    fn model(&self) -> &Self::Model;

    fn stationary_law(&self, theta: &Params<Self>, rng: &mut StreamRng) -> Result<Self::Law>;

    fn block_statistic(
        &self,
        theta: &Params<Self>,
        chi: &Self::Law,
        y: &[f64],
        rng: &mut StreamRng,
    ) -> Result<(SuffStat, Self::Law)>;
}

/// Exact forward smoothing for the finite-state model.
#[derive(Debug, Clone)]
pub struct ExactBackend {
    pub model: FiniteHmm,
}

impl BlockBackend for ExactBackend {
    type Model = FiniteHmm;
    type Law = CategoricalLaw;

    fn model(&self) -> &FiniteHmm {
        &self.model
    }

    fn stationary_law(&self, theta: &Params<Self>, _rng: &mut StreamRng) -> Result<CategoricalLaw> {
        Ok(CategoricalLaw::stationary(theta))
    }

    fn block_statistic(
        &self,
        theta: &Params<Self>,
        chi: &CategoricalLaw,
        y: &[f64],
        _rng: &mut StreamRng,
    ) -> Result<(SuffStat, CategoricalLaw)> {
        let b = block_statistic(theta, chi, y)?;
        Ok((b.stat, b.terminal))
    }
}

/// Kalman filter and RTS smoother for the linear-Gaussian model.
#[derive(Debug, Clone, Default)]
pub struct KalmanBackend {
    pub model: Lgssm,
}

impl BlockBackend for KalmanBackend {
    type Model = Lgssm;
    type Law = GaussianLaw;

    fn model(&self) -> &Lgssm {
        &self.model
    }

    fn stationary_law(&self, theta: &Params<Self>, _rng: &mut StreamRng) -> Result<GaussianLaw> {
        Ok(GaussianLaw::stationary(theta))
    }

    fn block_statistic(
        &self,
        theta: &Params<Self>,
        chi: &GaussianLaw,
        y: &[f64],
        _rng: &mut StreamRng,
    ) -> Result<(SuffStat, GaussianLaw)> {
        let b = block_statistic_lgssm(theta, chi, y)?;
        Ok((b.stat, b.terminal))
    }
}

/// Bootstrap particle filter with genealogy smoothing.
#[derive(Debug, Clone)]
pub struct ParticleBackend<M> {
    pub model: M,
    pub particles: ParticleCount,
}

impl<M: Propagate> BlockBackend for ParticleBackend<M> {
    type Model = M;
    type Law = ParticleCloud<M::State>;

    fn model(&self) -> &M {
        &self.model
    }

    fn stationary_law(&self, theta: &M::Params, rng: &mut StreamRng) -> Result<Self::Law> {
        ParticleCloud::from_stationary(&self.model, theta, self.particles.for_block(1), rng)
    }

    fn block_statistic(
        &self,
        theta: &M::Params,
        chi: &Self::Law,
        y: &[f64],
        rng: &mut StreamRng,
    ) -> Result<(SuffStat, Self::Law)> {
        block_statistic_pf(&self.model, theta, chi, y, self.particles.for_block(y.len()), rng)
    }
}
