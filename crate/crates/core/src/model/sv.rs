use rand::Rng;
use rand_distr::StandardNormal;

use super::lgssm::truncated_ar1_bounds;
use super::{gaussian_logpdf, ExponentialFamily, ModelBounds, ParamBox, Propagate, SuffStat, LN_2PI};
use crate::error::{Error, Result};

/// `(φ, σ², β²)` of `X' = φX + σU`, `Y = β exp(X/2) V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvParams {
    pub phi: f64,
    pub var: f64,
    pub beta2: f64,
}

impl SvParams {
    pub fn new(phi: f64, var: f64, beta2: f64) -> Self {
        Self { phi, var, beta2 }
    }

    pub fn stationary_var(&self) -> f64 {
        self.var / (1.0 - self.phi * self.phi)
    }
}

/// Stochastic volatility model.
///
/// Statistic layout: `(x², x x', x'², y² e^{-x'})`. The emission density
/// carries a θ-free factor `e^{-x'/2}`; it is moved into the reference
/// measure of the hidden state so that the complete-data density is exactly
/// exponential in the four statistics above.
#[derive(Debug, Clone, Default)]
pub struct StochVol {
    pub bounds: ParamBox,
}

impl StochVol {
    pub fn new(bounds: ParamBox) -> Self {
        Self { bounds }
    }
}

impl ExponentialFamily for StochVol {
    type State = f64;
    type Params = SvParams;

    fn stat_dim(&self) -> usize {
        4
    }

    fn add_suff_stat(&self, x: f64, x2: f64, y: f64, w: f64, out: &mut [f64]) {
        out[0] += w * x * x;
        out[1] += w * x * x2;
        out[2] += w * x2 * x2;
        out[3] += w * y * y * (-x2).exp();
    }

    fn log_transition(&self, t: &SvParams, x: f64, x2: f64) -> f64 {
        gaussian_logpdf(x2, t.phi * x, t.var)
    }

    fn log_emission(&self, t: &SvParams, x2: f64, y: f64) -> f64 {
        -0.5 * (LN_2PI + t.beta2.ln() + x2) - 0.5 * y * y * (-x2).exp() / t.beta2
    }

    fn log_reference(&self, x2: f64) -> f64 {
        -0.5 * x2
    }

    fn log_partition(&self, t: &SvParams) -> f64 {
        -0.5 * (LN_2PI + t.var.ln()) - 0.5 * (LN_2PI + t.beta2.ln())
    }

    fn natural_params(&self, t: &SvParams) -> Vec<f64> {
        vec![-t.phi * t.phi / (2.0 * t.var), t.phi / t.var, -0.5 / t.var, -0.5 / t.beta2]
    }

    fn validate(&self, t: &SvParams) -> Result<()> {
        self.bounds.check_phi("phi", t.phi)?;
        self.bounds.check_var("sigma2", t.var)?;
        self.bounds.check_var("beta2", t.beta2)
    }

    fn m_step(&self, s: &SuffStat) -> Result<SvParams> {
        let v = s.values();
        if v.len() != 4 || !s.is_finite() {
            return Err(Error::DegenerateStatistic("sv statistic must be 4 finite values".into()));
        }
        let (xx, xy, yy, scaled_obs) = (v[0], v[1], v[2], v[3]);
        if xx <= 0.0 {
            return Err(Error::DegenerateStatistic(format!("E[x²] = {xx} <= 0")));
        }
        let phi = self.bounds.clip_phi(xy / xx);
        let var = yy - 2.0 * phi * xy + phi * phi * xx;
        if var <= 0.0 || scaled_obs <= 0.0 {
            return Err(Error::DegenerateStatistic(format!("implied variances ({var}, {scaled_obs}) not positive")));
        }
        Ok(SvParams { phi, var: self.bounds.clip_var(var), beta2: self.bounds.clip_var(scaled_obs) })
    }

    fn transition_bounds(&self, t: &SvParams) -> Result<ModelBounds> {
        truncated_ar1_bounds(&self.bounds, t.phi, t.var)
    }

    fn flatten(&self, t: &SvParams) -> Vec<f64> {
        vec![t.phi, t.var, t.beta2]
    }

    fn unflatten(&self, flat: &[f64]) -> Result<SvParams> {
        match flat {
            [phi, var, beta2] => Ok(SvParams::new(*phi, *var, *beta2)),
            _ => Err(Error::InvalidArgument(format!("sv expects 3 parameters, got {}", flat.len()))),
        }
    }

    fn coordinate_names(&self) -> Vec<String> {
        vec!["phi".into(), "sigma2".into(), "beta2".into()]
    }
}

impl Propagate for StochVol {
    fn sample_stationary<R: Rng + ?Sized>(&self, t: &SvParams, rng: &mut R) -> f64 {
        t.stationary_var().sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, t: &SvParams, x: f64, rng: &mut R) -> f64 {
        t.phi * x + t.var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_emission<R: Rng + ?Sized>(&self, t: &SvParams, x: f64, rng: &mut R) -> f64 {
        (t.beta2 * x.exp()).sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}
