//! Hidden Markov models whose complete-data log-density is an exponential
//! family in a fixed sufficient statistic:
//!
//! ```text
//! log m(x, x') + log g(x', y) - log r(x') = φ(θ) + <S(x, x', y), ψ(θ)>
//! ```
//!
//! where `r` is a θ-free reference weight (identically 1 except for the
//! stochastic volatility model). The M-step map `θ̄(s)` maximizes
//! `φ(θ) + <s, ψ(θ)>` over the configured parameter box.

mod finite;
mod lgssm;
mod sv;

pub use finite::{stationary_distribution, FiniteHmm, FiniteHmmParams};
pub use lgssm::{Lgssm, LgssmParams};
pub use sv::{StochVol, SvParams};

use std::fmt::Debug;

use rand::Rng;

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) fn gaussian_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * d * d / var
}

/// Bounds of the compact parameter set Θ. Every M-step output is clipped
/// into this box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    /// Autoregressive coefficients satisfy `|φ| <= phi_max`.
    pub phi_max: f64,
    pub var_min: f64,
    pub var_max: f64,
    /// Smallest admissible transition probability (finite HMM).
    pub prob_min: f64,
    /// Emission means satisfy `|x_i| <= mean_bound`.
    pub mean_bound: f64,
    /// Half-width, in stationary standard deviations, of the state box on
    /// which continuous-state transition bounds are evaluated.
    pub truncation_sd: Option<f64>,
}

impl Default for ParamBox {
    fn default() -> Self {
        Self {
            phi_max: 0.999,
            var_min: 1e-8,
            var_max: 1e8,
            prob_min: 1e-6,
            mean_bound: 1e6,
            truncation_sd: Some(6.0),
        }
    }
}

impl ParamBox {
    pub(crate) fn clip_phi(&self, phi: f64) -> f64 {
        phi.clamp(-self.phi_max, self.phi_max)
    }

    pub(crate) fn clip_var(&self, v: f64) -> f64 {
        v.clamp(self.var_min, self.var_max)
    }

    pub(crate) fn check_phi(&self, name: &str, phi: f64) -> Result<()> {
        if !phi.is_finite() || phi.abs() >= 1.0 || phi.abs() > self.phi_max {
            return Err(Error::Domain(format!("{name} = {phi} outside |{name}| <= {}", self.phi_max)));
        }
        Ok(())
    }

    pub(crate) fn check_var(&self, name: &str, v: f64) -> Result<()> {
        if !v.is_finite() || v <= 0.0 || v < self.var_min || v > self.var_max {
            return Err(Error::Domain(format!(
                "{name} = {v} outside [{}, {}]",
                self.var_min, self.var_max
            )));
        }
        Ok(())
    }
}

/// Per-observation average of smoothed sufficient statistics, together with
/// the number of observations it averages over.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStat {
    values: Vec<f64>,
    count: usize,
}

impl SuffStat {
    pub fn new(values: Vec<f64>, count: usize) -> Self {
        Self { values, count }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim], count: 0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Count-weighted average of two statistics, i.e. the statistic of the
    /// concatenated window when both were computed under the same parameter.
    pub fn combine(&self, other: &SuffStat) -> SuffStat {
        assert_eq!(self.dim(), other.dim(), "statistic dimensions differ");
        let n = self.count + other.count;
        if n == 0 {
            return SuffStat::zeros(self.dim());
        }
        let (wa, wb) = (self.count as f64 / n as f64, other.count as f64 / n as f64);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| wa * a + wb * b).collect();
        SuffStat { values, count: n }
    }
}

/// Transition-density bounds `σ₋ <= m(x, x') <= σ₊` and the induced
/// contraction rate `ρ = 1 - σ₋/σ₊` of forward and backward smoothing kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBounds {
    pub lower: f64,
    pub upper: f64,
    pub rho: f64,
}

impl ModelBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::Domain(format!("transition bounds must satisfy 0 < {lower} <= {upper}")));
        }
        Ok(Self { lower, upper, rho: 1.0 - lower / upper })
    }
}

/// A model family with an exponential-family complete-data density.
pub trait ExponentialFamily: Send + Sync {
    type State: Copy + Debug + Send + Sync;
    type Params: Clone + Debug + Send + Sync;

    /// Dimension of the sufficient statistic.
    fn stat_dim(&self) -> usize;

    /// `out += weight * S(x, x2, y)`.
    fn add_suff_stat(&self, x: Self::State, x2: Self::State, y: f64, weight: f64, out: &mut [f64]);

    fn suff_stat(&self, x: Self::State, x2: Self::State, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.stat_dim()];
        self.add_suff_stat(x, x2, y, 1.0, &mut out);
        out
    }

    fn log_transition(&self, theta: &Self::Params, x: Self::State, x2: Self::State) -> f64;

    fn log_emission(&self, theta: &Self::Params, x2: Self::State, y: f64) -> f64;

    /// θ-free log reference weight of the next state; zero unless the model
    /// needs a tilted reference measure for the decomposition to hold.
    fn log_reference(&self, _x2: Self::State) -> f64 {
        0.0
    }

    /// `φ(θ)`.
    fn log_partition(&self, theta: &Self::Params) -> f64;

    /// `ψ(θ)`.
    fn natural_params(&self, theta: &Self::Params) -> Vec<f64>;

    fn validate(&self, theta: &Self::Params) -> Result<()>;

    /// Closed-form `θ̄(s)`, clipped into the parameter box.
    fn m_step(&self, s: &SuffStat) -> Result<Self::Params>;

    fn transition_bounds(&self, theta: &Self::Params) -> Result<ModelBounds>;

    fn flatten(&self, theta: &Self::Params) -> Vec<f64>;

    fn unflatten(&self, flat: &[f64]) -> Result<Self::Params>;

    fn coordinate_names(&self) -> Vec<String>;

    /// `log m_θ(x, x') + log g_θ(x', y)` relative to the model's reference measure.
    fn complete_data_logdensity(&self, theta: &Self::Params, x: Self::State, x2: Self::State, y: f64) -> Result<f64> {
        self.validate(theta)?;
        Ok(self.log_transition(theta, x, x2) + self.log_emission(theta, x2, y) - self.log_reference(x2))
    }

    /// `φ(θ) + <S(x, x', y), ψ(θ)>`; equal to [`Self::complete_data_logdensity`].
    fn decomposed_logdensity(&self, theta: &Self::Params, x: Self::State, x2: Self::State, y: f64) -> Result<f64> {
        self.validate(theta)?;
        Ok(self.expected_complete_loglik(theta, &self.suff_stat(x, x2, y)))
    }

    /// `φ(θ) + <s, ψ(θ)>`, the objective maximized by the M-step.
    fn expected_complete_loglik(&self, theta: &Self::Params, s: &[f64]) -> f64 {
        let psi = self.natural_params(theta);
        self.log_partition(theta) + s.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Models that can be simulated forward, as needed by the bootstrap filter.
pub trait Propagate: ExponentialFamily {
    fn sample_stationary<R: Rng + ?Sized>(&self, theta: &Self::Params, rng: &mut R) -> Self::State;

    fn sample_stationary_n<R: Rng + ?Sized>(&self, theta: &Self::Params, n: usize, rng: &mut R) -> Vec<Self::State> {
        (0..n).map(|_| self.sample_stationary(theta, rng)).collect()
    }

    fn sample_transition<R: Rng + ?Sized>(&self, theta: &Self::Params, x: Self::State, rng: &mut R) -> Self::State;

    fn sample_emission<R: Rng + ?Sized>(&self, theta: &Self::Params, x: Self::State, rng: &mut R) -> f64;
}

/// A parameter point tagged with its model family.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamVector {
    Lgssm(LgssmParams),
    FiniteHmm(FiniteHmmParams),
    StochVol(SvParams),
}

impl ParamVector {
    pub fn flat(&self) -> Vec<f64> {
        match self {
            ParamVector::Lgssm(p) => vec![p.phi, p.var_u, p.var_v],
            ParamVector::FiniteHmm(p) => p.flat(),
            ParamVector::StochVol(p) => vec![p.phi, p.var, p.beta2],
        }
    }
}

impl From<LgssmParams> for ParamVector {
    fn from(p: LgssmParams) -> Self {
        ParamVector::Lgssm(p)
    }
}

impl From<FiniteHmmParams> for ParamVector {
    fn from(p: FiniteHmmParams) -> Self {
        ParamVector::FiniteHmm(p)
    }
}

impl From<SvParams> for ParamVector {
    fn from(p: SvParams) -> Self {
        ParamVector::StochVol(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_is_count_weighted() {
        let a = SuffStat::new(vec![1.0, 2.0], 1);
        let b = SuffStat::new(vec![4.0, 5.0], 3);
        let c = a.combine(&b);
        assert_eq!(c.count(), 4);
        assert!((c.values()[0] - 3.25).abs() < 1e-15);
        assert!((c.values()[1] - 4.25).abs() < 1e-15);
    }

    #[test]
    fn bounds_rho() {
        let b = ModelBounds::new(0.1, 0.9).unwrap();
        assert!((b.rho - 8.0 / 9.0).abs() < 1e-15);
        assert!(ModelBounds::new(0.0, 1.0).is_err());
        assert!(ModelBounds::new(0.5, 0.4).is_err());
    }
}
