//! Kalman filter and Rauch–Tung–Striebel smoother for the scalar
//! linear-Gaussian model, and the exact block statistic built on them.

use crate::error::{Error, Result};
use crate::model::{LgssmParams, SuffStat, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    pub mean: f64,
    pub var: f64,
}

impl GaussianLaw {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !(var > 0.0) || !var.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid Gaussian law N({mean}, {var})")));
        }
        Ok(Self { mean, var })
    }

    /// `N(0, σ_u²/(1-φ²))`.
    pub fn stationary(theta: &LgssmParams) -> Self {
        Self { mean: 0.0, var: theta.stationary_var() }
    }
}

fn check_params(theta: &LgssmParams) -> Result<()> {
    if !(theta.phi.abs() < 1.0) || !(theta.var_u > 0.0) || !(theta.var_v > 0.0) {
        return Err(Error::Domain(format!("invalid linear-Gaussian parameters {theta:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct KalmanOutput {
    /// `filtered[k]` is the law of `X_k | y_{1..k}`; `filtered[0]` is the initial law.
    pub filtered: Vec<GaussianLaw>,
    /// `predicted[k-1]` is the law of `X_k | y_{1..k-1}`.
    pub predicted: Vec<GaussianLaw>,
    /// One-step predictive log-densities `log p(y_t | y_{1..t-1})`.
    pub log_increments: Vec<f64>,
    pub loglik: f64,
}

pub fn kalman_filter(theta: &LgssmParams, chi: &GaussianLaw, y: &[f64]) -> Result<KalmanOutput> {
    check_params(theta)?;
    let mut filtered = Vec::with_capacity(y.len() + 1);
    let mut predicted = Vec::with_capacity(y.len());
    filtered.push(*chi);
    let mut log_increments = Vec::with_capacity(y.len());
    let (mut m, mut p) = (chi.mean, chi.var);
    for &obs in y {
        let mp = theta.phi * m;
        let pp = theta.phi * theta.phi * p + theta.var_u;
        predicted.push(GaussianLaw { mean: mp, var: pp });
        let innov_var = pp + theta.var_v;
        let innov = obs - mp;
        log_increments.push(-0.5 * (LN_2PI + innov_var.ln() + innov * innov / innov_var));
        let gain = pp / innov_var;
        m = mp + gain * innov;
        // (1 - K) P⁻ written as P⁻ σ_v² / (P⁻ + σ_v²) stays positive
        p = pp * theta.var_v / innov_var;
        filtered.push(GaussianLaw { mean: m, var: p });
    }
    let loglik = log_increments.iter().sum();
    Ok(KalmanOutput { filtered, predicted, log_increments, loglik })
}

/// Smoothed moments over a block: `means[k]`, `vars[k]` for `X_k`, `k = 0..=τ`,
/// and `lag_cov[k-1] = Cov(X_{k-1}, X_k | y_{1..τ})`.
#[derive(Debug, Clone)]
pub struct RtsSmoothed {
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
    pub lag_cov: Vec<f64>,
}

pub fn rts_smoother(theta: &LgssmParams, filt: &KalmanOutput) -> RtsSmoothed {
    let n = filt.predicted.len();
    let mut means = vec![0.0; n + 1];
    let mut vars = vec![0.0; n + 1];
    let mut lag_cov = vec![0.0; n];
    means[n] = filt.filtered[n].mean;
    vars[n] = filt.filtered[n].var;
    for k in (0..n).rev() {
        let f = filt.filtered[k];
        let pr = filt.predicted[k];
        let gain = f.var * theta.phi / pr.var;
        means[k] = f.mean + gain * (means[k + 1] - pr.mean);
        vars[k] = f.var + gain * gain * (vars[k + 1] - pr.var);
        lag_cov[k] = gain * vars[k + 1];
    }
    RtsSmoothed { means, vars, lag_cov }
}

#[derive(Debug, Clone)]
pub struct LgssmBlockStatistic {
    pub stat: SuffStat,
    pub terminal: GaussianLaw,
    pub loglik: f64,
    pub smoothed: RtsSmoothed,
}

/// Block averages of `(E[X_{t-1}²], E[X_{t-1}X_t], E[X_t²], y_t E[X_t], y_t²)`
/// under the joint smoothing law of the block with `X_0 ~ χ`.
pub fn block_statistic_lgssm(theta: &LgssmParams, chi: &GaussianLaw, y: &[f64]) -> Result<LgssmBlockStatistic> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("block must contain at least one observation".into()));
    }
    let filt = kalman_filter(theta, chi, y)?;
    let sm = rts_smoother(theta, &filt);
    let mut s = [0.0; 5];
    for t in 1..=y.len() {
        let (m0, m1) = (sm.means[t - 1], sm.means[t]);
        s[0] += sm.vars[t - 1] + m0 * m0;
        s[1] += sm.lag_cov[t - 1] + m0 * m1;
        s[2] += sm.vars[t] + m1 * m1;
        s[3] += y[t - 1] * m1;
        s[4] += y[t - 1] * y[t - 1];
    }
    let tau = y.len() as f64;
    Ok(LgssmBlockStatistic {
        stat: SuffStat::new(s.iter().map(|v| v / tau).collect(), y.len()),
        terminal: *filt.filtered.last().expect("filter has an initial entry"),
        loglik: filt.loglik,
        smoothed: sm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uninformative_observations_keep_prior() {
        let theta = LgssmParams::new(0.0, 0.7, 1e12);
        let out = kalman_filter(&theta, &GaussianLaw::new(0.0, 0.7).unwrap(), &[1.0, -2.0, 3.0]).unwrap();
        for f in &out.filtered[1..] {
            assert!(f.mean.abs() < 1e-10);
            assert!((f.var - 0.7).abs() < 1e-10);
        }
    }

    #[test]
    fn one_step_conjugate_update() {
        let theta = LgssmParams::new(0.8, 0.5, 1.5);
        let chi = GaussianLaw::new(0.3, 2.0).unwrap();
        let out = kalman_filter(&theta, &chi, &[1.2]).unwrap();
        let p0 = 0.64 * 2.0 + 0.5;
        let m0 = 0.8 * 0.3;
        let post_var = 1.0 / (1.0 / p0 + 1.0 / 1.5);
        let post_mean = post_var * (m0 / p0 + 1.2 / 1.5);
        assert!((out.filtered[1].var - post_var).abs() < 1e-14);
        assert!((out.filtered[1].mean - post_mean).abs() < 1e-14);
        let expect_ll = -0.5 * (LN_2PI + (p0 + 1.5f64).ln() + (1.2 - m0).powi(2) / (p0 + 1.5));
        assert!((out.loglik - expect_ll).abs() < 1e-14);
    }

    #[test]
    fn zero_data_decoupled_cross_moment() {
        let theta = LgssmParams::new(0.0, 0.6, 1.0);
        let b = block_statistic_lgssm(&theta, &GaussianLaw::stationary(&theta), &[0.0; 6]).unwrap();
        assert!(b.stat.values()[1].abs() < 1e-15);
    }

    #[test]
    fn variance_ordering_and_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let theta = LgssmParams::new(rng.random_range(-0.95..0.95), rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
            let y: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
            let chi = GaussianLaw::stationary(&theta);
            let filt = kalman_filter(&theta, &chi, &y).unwrap();
            let sm = rts_smoother(&theta, &filt);
            for k in 1..=30 {
                assert!(sm.vars[k] <= filt.filtered[k].var * (1.0 + 1e-12));
                assert!(filt.filtered[k].var <= filt.predicted[k - 1].var * (1.0 + 1e-12));
                let corr = sm.lag_cov[k - 1] / (sm.vars[k - 1] * sm.vars[k]).sqrt();
                assert!(corr.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let chi = GaussianLaw::new(0.0, 1.0).unwrap();
        assert!(kalman_filter(&LgssmParams::new(1.2, 1.0, 1.0), &chi, &[0.0]).is_err());
        assert!(block_statistic_lgssm(&LgssmParams::new(0.5, 1.0, 1.0), &chi, &[]).is_err());
        assert!(GaussianLaw::new(0.0, 0.0).is_err());
    }
}
