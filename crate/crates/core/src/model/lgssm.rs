use rand::Rng;
use rand_distr::StandardNormal;

use super::{gaussian_logpdf, ExponentialFamily, ModelBounds, ParamBox, Propagate, SuffStat, LN_2PI};
use crate::error::{Error, Result};

/// `(φ, σ_u², σ_v²)` of `X' = φX + σ_u U`, `Y = X + σ_v V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgssmParams {
    pub phi: f64,
    pub var_u: f64,
    pub var_v: f64,
}

impl LgssmParams {
    pub fn new(phi: f64, var_u: f64, var_v: f64) -> Self {
        Self { phi, var_u, var_v }
    }

    pub fn stationary_var(&self) -> f64 {
        self.var_u / (1.0 - self.phi * self.phi)
    }
}

/// Scalar linear-Gaussian state space model.
///
/// Statistic layout: `(x², x x', x'², y x', y²)`.
#[derive(Debug, Clone, Default)]
pub struct Lgssm {
    pub bounds: ParamBox,
}

impl Lgssm {
    pub fn new(bounds: ParamBox) -> Self {
        Self { bounds }
    }
}

impl ExponentialFamily for Lgssm {
    type State = f64;
    type Params = LgssmParams;

    fn stat_dim(&self) -> usize {
        5
    }

    fn add_suff_stat(&self, x: f64, x2: f64, y: f64, w: f64, out: &mut [f64]) {
        out[0] += w * x * x;
        out[1] += w * x * x2;
        out[2] += w * x2 * x2;
        out[3] += w * y * x2;
        out[4] += w * y * y;
    }

    fn log_transition(&self, t: &LgssmParams, x: f64, x2: f64) -> f64 {
        gaussian_logpdf(x2, t.phi * x, t.var_u)
    }

    fn log_emission(&self, t: &LgssmParams, x2: f64, y: f64) -> f64 {
        gaussian_logpdf(y, x2, t.var_v)
    }

    fn log_partition(&self, t: &LgssmParams) -> f64 {
        -0.5 * (LN_2PI + t.var_u.ln()) - 0.5 * (LN_2PI + t.var_v.ln())
    }

    fn natural_params(&self, t: &LgssmParams) -> Vec<f64> {
        vec![
            -t.phi * t.phi / (2.0 * t.var_u),
            t.phi / t.var_u,
            -0.5 / t.var_u - 0.5 / t.var_v,
            1.0 / t.var_v,
            -0.5 / t.var_v,
        ]
    }

    fn validate(&self, t: &LgssmParams) -> Result<()> {
        self.bounds.check_phi("phi", t.phi)?;
        self.bounds.check_var("var_u", t.var_u)?;
        self.bounds.check_var("var_v", t.var_v)
    }

    fn m_step(&self, s: &SuffStat) -> Result<LgssmParams> {
        let v = s.values();
        if v.len() != 5 || !s.is_finite() {
            return Err(Error::DegenerateStatistic("lgssm statistic must be 5 finite values".into()));
        }
        let (xx, xy, yy, obs_x, obs2) = (v[0], v[1], v[2], v[3], v[4]);
        if xx <= 0.0 {
            return Err(Error::DegenerateStatistic(format!("E[x²] = {xx} <= 0")));
        }
        // The profile objective in φ is unimodal, so clipping φ and then
        // maximizing the variance given the clipped φ is the box argmax.
        let phi = self.bounds.clip_phi(xy / xx);
        let var_u = yy - 2.0 * phi * xy + phi * phi * xx;
        let var_v = obs2 - 2.0 * obs_x + yy;
        if var_u <= 0.0 || var_v <= 0.0 {
            return Err(Error::DegenerateStatistic(format!("implied variances ({var_u}, {var_v}) not positive")));
        }
        Ok(LgssmParams { phi, var_u: self.bounds.clip_var(var_u), var_v: self.bounds.clip_var(var_v) })
    }

    fn transition_bounds(&self, t: &LgssmParams) -> Result<ModelBounds> {
        truncated_ar1_bounds(&self.bounds, t.phi, t.var_u)
    }

    fn flatten(&self, t: &LgssmParams) -> Vec<f64> {
        vec![t.phi, t.var_u, t.var_v]
    }

    fn unflatten(&self, flat: &[f64]) -> Result<LgssmParams> {
        match flat {
            [phi, var_u, var_v] => Ok(LgssmParams::new(*phi, *var_u, *var_v)),
            _ => Err(Error::InvalidArgument(format!("lgssm expects 3 parameters, got {}", flat.len()))),
        }
    }

    fn coordinate_names(&self) -> Vec<String> {
        vec!["phi".into(), "var_u".into(), "var_v".into()]
    }
}

impl Propagate for Lgssm {
    fn sample_stationary<R: Rng + ?Sized>(&self, t: &LgssmParams, rng: &mut R) -> f64 {
        t.stationary_var().sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, t: &LgssmParams, x: f64, rng: &mut R) -> f64 {
        t.phi * x + t.var_u.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_emission<R: Rng + ?Sized>(&self, t: &LgssmParams, x: f64, rng: &mut R) -> f64 {
        x + t.var_v.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Bounds of an AR(1) Gaussian kernel restricted to `[-w, w]²`, `w` a multiple
/// of the stationary standard deviation. Gaussian kernels on the whole line
/// have no positive lower bound, so this is an approximation.
pub(super) fn truncated_ar1_bounds(b: &ParamBox, phi: f64, var: f64) -> Result<ModelBounds> {
    let k = b.truncation_sd.ok_or_else(|| {
        Error::Unsupported("continuous-state transition bounds need a truncation box".into())
    })?;
    let half_width = k * (var / (1.0 - phi * phi)).sqrt();
    let upper = gaussian_logpdf(0.0, 0.0, var).exp();
    let lower = gaussian_logpdf(half_width * (1.0 + phi.abs()), 0.0, var).exp();
    ModelBounds::new(lower, upper)
}
