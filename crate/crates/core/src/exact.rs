//! Exact forward–backward smoothing for the finite-state HMM.
//!
//! Windows are passed as observation slices: a window `y_{r+1..t}` with
//! `X_r ~ χ` is the slice `&y[r + 1..=t]`. Per-step emission likelihoods are
//! rescaled by their maximum before use, so every output is invariant to
//! multiplying one step's likelihoods by a constant and extreme observations
//! cannot underflow all states at once.

use crate::error::{Error, Result};
use crate::model::{stationary_distribution, FiniteHmmParams, ModelBounds, SuffStat};

const LAW_TOL: f64 = 1e-12;

/// Probability vector over the `d` hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalLaw(Vec<f64>);

impl CategoricalLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("law entries must be finite and nonnegative".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > LAW_TOL {
            return Err(Error::InvalidArgument(format!("law sums to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Normalize nonnegative weights into a law.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let z: f64 = w.iter().sum();
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::InvalidArgument("weights have no mass".into()));
        }
        Self::new(w.iter().map(|v| v / z).collect())
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn point(d: usize, state: usize) -> Self {
        let mut p = vec![0.0; d];
        p[state] = 1.0;
        Self(p)
    }

    pub fn stationary(theta: &FiniteHmmParams) -> Self {
        Self(stationary_distribution(theta))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn states(&self) -> usize {
        self.0.len()
    }
}

/// `ρ = 1 - min m / max m` for a transition matrix.
pub fn contraction_bounds(theta: &FiniteHmmParams) -> Result<ModelBounds> {
    let lo = theta.transition.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = theta.transition.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ModelBounds::new(lo, hi)
}

fn check_dims(theta: &FiniteHmmParams, chi: &CategoricalLaw) -> Result<usize> {
    let d = theta.states();
    if chi.states() != d || theta.transition.len() != d * d {
        return Err(Error::InvalidArgument(format!(
            "law over {} states used with a {d}-state model",
            chi.states()
        )));
    }
    Ok(d)
}

/// Emission likelihoods of one observation, divided by their maximum.
/// Returns the log of the divisor.
fn scaled_emissions(theta: &FiniteHmmParams, y: f64, out: &mut [f64], step: usize) -> Result<f64> {
    theta.log_emissions(y, out);
    rescale_log_emissions(out, step)
}

fn rescale_log_emissions(out: &mut [f64], step: usize) -> Result<f64> {
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Underflow { step });
    }
    out.iter_mut().for_each(|v| *v = (*v - top).exp());
    Ok(top)
}

/// Filtering laws and one-step predictive log-densities.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `filters[k]` is the law of `X_{r+k}` given `y_{r+1..r+k}`; `filters[0] = χ`.
    pub filters: Vec<Vec<f64>>,
    /// `log p(y_{r+k} | y_{r+1..r+k-1})` for `k = 1..n`.
    pub log_increments: Vec<f64>,
    /// Scaled normalizers `c_k`, kept for the backward pass.
    scaled_norms: Vec<f64>,
    emissions: Vec<Vec<f64>>,
}

impl Forward {
    pub fn loglik(&self) -> f64 {
        self.log_increments.iter().sum()
    }
}

pub fn forward(theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64]) -> Result<Forward> {
    forward_with(theta, chi, y.len(), |k, out| theta.log_emissions(y[k], out))
}

/// Forward pass with arbitrary per-step emission log-likelihoods.
fn forward_with<E>(theta: &FiniteHmmParams, chi: &CategoricalLaw, n: usize, log_emit: E) -> Result<Forward>
where
    E: Fn(usize, &mut [f64]),
{
    let d = check_dims(theta, chi)?;
    let mut filters = Vec::with_capacity(n + 1);
    let mut log_increments = Vec::with_capacity(n);
    let mut scaled_norms = Vec::with_capacity(n);
    let mut emissions = Vec::with_capacity(n);
    filters.push(chi.probs().to_vec());
    for k in 0..n {
        let mut e = vec![0.0; d];
        log_emit(k, &mut e);
        let shift = rescale_log_emissions(&mut e, k + 1)?;
        let prev = &filters[k];
        let mut next = vec![0.0; d];
        for i in 0..d {
            let a = prev[i];
            if a == 0.0 {
                continue;
            }
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += a * theta.m(i, j);
            }
        }
        for (nj, ej) in next.iter_mut().zip(&e) {
            *nj *= ej;
        }
        let c: f64 = next.iter().sum();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Underflow { step: k + 1 });
        }
        next.iter_mut().for_each(|v| *v /= c);
        log_increments.push(c.ln() + shift);
        scaled_norms.push(c);
        filters.push(next);
        emissions.push(e);
    }
    Ok(Forward { filters, log_increments, scaled_norms, emissions })
}

/// Smoothed marginals and pair marginals over a window.
#[derive(Debug, Clone)]
pub struct Smoothed {
    /// `marginals[k]` is the law of `X_{r+k}` given the window, `k = 0..=n`.
    pub marginals: Vec<Vec<f64>>,
    /// `pairs[k-1]` is the joint law of `(X_{r+k-1}, X_{r+k})`, row-major, `k = 1..=n`.
    pub pairs: Vec<Vec<f64>>,
    pub loglik: f64,
}

pub fn forward_backward(theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64]) -> Result<Smoothed> {
    forward_backward_with(theta, chi, y.len(), |k, out| theta.log_emissions(y[k], out))
}

fn forward_backward_with<E>(theta: &FiniteHmmParams, chi: &CategoricalLaw, n: usize, log_emit: E) -> Result<Smoothed>
where
    E: Fn(usize, &mut [f64]),
{
    if n == 0 {
        return Err(Error::InvalidArgument("empty observation window".into()));
    }
    let fwd = forward_with(theta, chi, n, log_emit)?;
    let d = theta.states();
    let mut beta = vec![1.0; d];
    let mut marginals = vec![Vec::new(); n + 1];
    let mut pairs = vec![Vec::new(); n];
    marginals[n] = fwd.filters[n].clone();
    for k in (1..=n).rev() {
        let e = &fwd.emissions[k - 1];
        let c = fwd.scaled_norms[k - 1];
        let alpha = &fwd.filters[k - 1];
        let weighted: Vec<f64> = (0..d).map(|j| e[j] * beta[j] / c).collect();
        let mut pair = vec![0.0; d * d];
        let mut prev_beta = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                let w = theta.m(i, j) * weighted[j];
                pair[i * d + j] = alpha[i] * w;
                acc += w;
            }
            prev_beta[i] = acc;
        }
        pairs[k - 1] = pair;
        beta = prev_beta;
        marginals[k - 1] = alpha.iter().zip(&beta).map(|(a, b)| a * b).collect();
    }
    Ok(Smoothed { marginals, pairs, loglik: fwd.loglik() })
}

fn check_window(r: usize, s: usize, t: usize, len: usize) -> Result<()> {
    if !(r < s && s <= t) {
        return Err(Error::InvalidArgument(format!("need r < s <= t, got r={r} s={s} t={t}")));
    }
    if t >= len {
        return Err(Error::InvalidArgument(format!("window end {t} beyond {len} observations")));
    }
    Ok(())
}

/// `E[h(X_{s-1}, X_s, y_s) | y_{r+1..t}, X_r ~ χ]`, with `y` indexed by absolute time.
pub fn smoothed_functional<H>(
    theta: &FiniteHmmParams,
    chi: &CategoricalLaw,
    r: usize,
    s: usize,
    t: usize,
    h: H,
    y: &[f64],
) -> Result<Vec<f64>>
where
    H: Fn(usize, usize, f64) -> Vec<f64>,
{
    check_window(r, s, t, y.len())?;
    let sm = forward_backward(theta, chi, &y[r + 1..=t])?;
    let pair = &sm.pairs[s - r - 1];
    let d = theta.states();
    let mut out: Vec<f64> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let w = pair[i * d + j];
            let v = h(i, j, y[s]);
            if out.is_empty() {
                out = vec![0.0; v.len()];
            }
            for (o, hv) in out.iter_mut().zip(v) {
                *o += w * hv;
            }
        }
    }
    Ok(out)
}

/// Running filter plus per-state additive accumulators
/// `T_k(x) = E[Σ_{u<=k} h(X_{u-1}, X_u, y_u) | y_{1..k}, X_k = x]`.
///
/// Each step applies `T'(x') = Σ_x B(x', x) [discount·T(x) + gain·h(x, x', y)]`
/// with `B` the backward kernel of the current filter. `discount = gain = 1`
/// gives exact smoothing of additive functionals in a single forward pass;
/// `(1 - γ, γ)` gives the stochastic-approximation recursion of online EM.
#[derive(Debug, Clone)]
pub struct AdditiveForward {
    d: usize,
    dim: usize,
    filter: Vec<f64>,
    acc: Vec<f64>,
    loglik: f64,
    steps: usize,
    emis: Vec<f64>,
    pred: Vec<f64>,
    back: Vec<f64>,
    next_acc: Vec<f64>,
}

impl AdditiveForward {
    pub fn new(chi: &CategoricalLaw, dim: usize) -> Self {
        let d = chi.states();
        Self {
            d,
            dim,
            filter: chi.probs().to_vec(),
            acc: vec![0.0; d * dim],
            loglik: 0.0,
            steps: 0,
            emis: vec![0.0; d],
            pred: vec![0.0; d],
            back: vec![0.0; d],
            next_acc: vec![0.0; d * dim],
        }
    }

    /// Advance by one observation. `accumulate(x, x', y, w, out)` must add
    /// `w · h(x, x', y)` into `out`.
    pub fn step<F>(&mut self, theta: &FiniteHmmParams, y: f64, discount: f64, gain: f64, mut accumulate: F) -> Result<()>
    where
        F: FnMut(usize, usize, f64, f64, &mut [f64]),
    {
        let (d, dim) = (self.d, self.dim);
        if theta.states() != d {
            return Err(Error::InvalidArgument("model and law disagree on the state count".into()));
        }
        self.steps += 1;
        let shift = scaled_emissions(theta, y, &mut self.emis, self.steps)?;
        for j in 0..d {
            self.pred[j] = (0..d).map(|i| self.filter[i] * theta.m(i, j)).sum();
        }
        self.next_acc.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d {
            let pj = self.pred[j];
            if !(pj > 0.0) {
                return Err(Error::Underflow { step: self.steps });
            }
            for i in 0..d {
                self.back[i] = self.filter[i] * theta.m(i, j) / pj;
            }
            let out = &mut self.next_acc[j * dim..(j + 1) * dim];
            for i in 0..d {
                let b = self.back[i];
                if b == 0.0 {
                    continue;
                }
                let bd = b * discount;
                for (o, a) in out.iter_mut().zip(&self.acc[i * dim..(i + 1) * dim]) {
                    *o += bd * a;
                }
                accumulate(i, j, y, b * gain, out);
            }
        }
        std::mem::swap(&mut self.acc, &mut self.next_acc);
        let mut c = 0.0;
        for j in 0..d {
            self.filter[j] = self.pred[j] * self.emis[j];
            c += self.filter[j];
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Underflow { step: self.steps });
        }
        self.filter.iter_mut().for_each(|v| *v /= c);
        self.loglik += c.ln() + shift;
        Ok(())
    }

    /// `Σ_x filter(x) T(x)`: the smoothed additive functional so far.
    pub fn functional(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (x, w) in self.filter.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.acc[x * self.dim..(x + 1) * self.dim]) {
                *o += w * a;
            }
        }
        out
    }

    pub fn filter(&self) -> &[f64] {
        &self.filter
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Add `w · S(x, x', y)` for the finite-HMM statistic layout.
#[inline]
pub(crate) fn add_finite_stat(d: usize, x: usize, x2: usize, y: f64, w: f64, out: &mut [f64]) {
    out[x * d + x2] += w;
    out[d * d + x2] += w;
    out[d * d + d + x2] += w * y;
    out[d * d + 2 * d + x2] += w * y * y;
}

/// Output of [`block_statistic`].
#[derive(Debug, Clone)]
pub struct BlockStatistic {
    pub stat: SuffStat,
    /// Filtering law at the last observation of the block.
    pub terminal: CategoricalLaw,
    pub loglik: f64,
}

/// `(1/τ) Σ_t E[S(X_{t-1}, X_t, y_t) | y_{1..τ}, X_0 ~ χ]` in one forward pass.
pub fn block_statistic(theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64]) -> Result<BlockStatistic> {
    let d = check_dims(theta, chi)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("block must contain at least one observation".into()));
    }
    let dim = d * d + 3 * d;
    let mut fwd = AdditiveForward::new(chi, dim);
    for &obs in y {
        fwd.step(theta, obs, 1.0, 1.0, |x, x2, yy, w, out| add_finite_stat(d, x, x2, yy, w, out))?;
    }
    let tau = y.len() as f64;
    let values = fwd.functional().into_iter().map(|v| v / tau).collect();
    Ok(BlockStatistic {
        stat: SuffStat::new(values, y.len()),
        terminal: CategoricalLaw(fwd.filter.clone()),
        loglik: fwd.loglik,
    })
}

/// Measured gap between two smoothing functionals and its forgetting bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingGap {
    pub measured: f64,
    pub bound: f64,
}

/// Compares `Φ^{χ̃,r}_{s,t}(h)` with `Φ^{χ,r-ℓ₁}_{s,t+ℓ₂}(h)`.
///
/// The bound is `(ρ^{s-1-r} + ρ^{t-s}) osc(h_s)`, dropping the first term when
/// the two functionals share their initial law and start (`ℓ₁ = 0`, `χ = χ̃`)
/// and the second when they share their end (`ℓ₂ = 0`).
#[allow(clippy::too_many_arguments)]
pub fn forgetting_gap<H>(
    theta: &FiniteHmmParams,
    chi: &CategoricalLaw,
    chi_tilde: &CategoricalLaw,
    r: usize,
    lag_start: usize,
    lag_end: usize,
    s: usize,
    t: usize,
    h: H,
    y: &[f64],
) -> Result<ForgettingGap>
where
    H: Fn(usize, usize, f64) -> f64,
{
    if lag_start > r {
        return Err(Error::InvalidArgument(format!("start lag {lag_start} exceeds r = {r}")));
    }
    check_window(r, s, t + lag_end, y.len())?;
    let hv = |i: usize, j: usize, yy: f64| vec![h(i, j, yy)];
    let a = smoothed_functional(theta, chi_tilde, r, s, t, hv, y)?[0];
    let b = smoothed_functional(theta, chi, r - lag_start, s, t + lag_end, hv, y)?[0];

    let rho = contraction_bounds(theta)?.rho;
    let d = theta.states();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..d {
        for j in 0..d {
            let v = h(i, j, y[s]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let osc = hi - lo;
    let start_differs = lag_start > 0 || chi != chi_tilde;
    let mut factor = 0.0;
    if start_differs {
        factor += rho.powi((s - 1 - r) as i32);
    }
    if lag_end > 0 {
        factor += rho.powi((t - s) as i32);
    }
    Ok(ForgettingGap { measured: (a - b).abs(), bound: factor * osc })
}
