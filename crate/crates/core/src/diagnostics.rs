//! Log-likelihood, its increments and their bounds, and the score, for the
//! models with exact smoothers.

use crate::engine::{BlockBackend, ExactBackend, KalmanBackend, Params};
use crate::error::{Error, Result};
use crate::exact::{add_finite_stat, contraction_bounds, forward, forward_backward, AdditiveForward, CategoricalLaw, ForgettingGap};
use crate::kalman::{block_statistic_lgssm, kalman_filter, GaussianLaw};
use crate::model::{ExponentialFamily, FiniteHmmParams, LgssmParams, ParamBox};

/// Backends whose log-likelihood and score are computable exactly.
pub trait ExactLikelihood: BlockBackend {
    /// `log p(y_t | y_{1..t-1})` for `t = 1..=T`, with `X_0 ~ χ`.
    fn log_increments(&self, theta: &Params<Self>, chi: &Self::Law, y: &[f64]) -> Result<Vec<f64>>;

    /// `∇_θ ℓ^{χ,0}_{θ,T}` at each checkpoint `T` (ascending, `1 <= T <= len`),
    /// in the order of the model's flattened coordinates.
    fn score_trace(&self, theta: &Params<Self>, chi: &Self::Law, y: &[f64], checkpoints: &[usize]) -> Result<Vec<Vec<f64>>>;
}

pub fn loglik<B: ExactLikelihood>(backend: &B, theta: &Params<B>, chi: &B::Law, y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("log-likelihood needs at least one observation".into()));
    }
    Ok(backend.log_increments(theta, chi, y)?.iter().sum())
}

/// `(T, ℓ_T / T)` at each checkpoint.
pub fn normalized_loglik_trace<B: ExactLikelihood>(
    backend: &B,
    theta: &Params<B>,
    chi: &B::Law,
    y: &[f64],
    checkpoints: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let marks = check_marks(checkpoints, y.len())?;
    let inc = backend.log_increments(theta, chi, &y[..*marks.last().expect("non-empty")])?;
    let mut out = Vec::with_capacity(marks.len());
    let mut acc = 0.0;
    let mut t = 0;
    for &m in &marks {
        while t < m {
            acc += inc[t];
            t += 1;
        }
        out.push((m, acc / m as f64));
    }
    Ok(out)
}

/// Score of the full stream. Fails on the boundary of the parameter box.
pub fn score<B: ExactLikelihood>(backend: &B, theta: &Params<B>, chi: &B::Law, y: &[f64]) -> Result<Vec<f64>> {
    Ok(backend.score_trace(theta, chi, y, &[y.len()])?.remove(0))
}

fn check_marks(checkpoints: &[usize], len: usize) -> Result<Vec<usize>> {
    if checkpoints.is_empty() || checkpoints.iter().any(|&c| c == 0 || c > len) {
        return Err(Error::InvalidArgument(format!("checkpoints must lie in 1..={len}")));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be strictly increasing".into()));
    }
    Ok(checkpoints.to_vec())
}

fn interior_var(b: &ParamBox, name: &str, v: f64) -> Result<()> {
    if v <= b.var_min || v >= b.var_max {
        return Err(Error::Domain(format!("{name} = {v} on the boundary of the parameter box")));
    }
    Ok(())
}

fn check_interior_finite(b: &ParamBox, theta: &FiniteHmmParams) -> Result<()> {
    if theta.transition.iter().any(|&m| m <= b.prob_min) {
        return Err(Error::Domain("transition entry on the boundary of the parameter box".into()));
    }
    if theta.means.iter().any(|x| x.abs() >= b.mean_bound) {
        return Err(Error::Domain("emission mean on the boundary of the parameter box".into()));
    }
    interior_var(b, "v", theta.var)
}

impl ExactLikelihood for ExactBackend {
    fn log_increments(&self, theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64]) -> Result<Vec<f64>> {
        self.model.validate(theta)?;
        Ok(forward(theta, chi, y)?.log_increments)
    }

    /// Transition coordinates are partial derivatives in the unconstrained
    /// entries `m(i, j)`; derivatives along the simplex are their differences.
    fn score_trace(&self, theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64], checkpoints: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.model.validate(theta)?;
        check_interior_finite(&self.model.bounds, theta)?;
        let marks = check_marks(checkpoints, y.len())?;
        let d = theta.states();
        let dim = d * d + 3 * d;
        let mut fwd = AdditiveForward::new(chi, dim);
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for (i, &obs) in y[..*marks.last().expect("non-empty")].iter().enumerate() {
            fwd.step(theta, obs, 1.0, 1.0, |x, x2, yy, w, o| add_finite_stat(d, x, x2, yy, w, o))?;
            if i + 1 == marks[next] {
                out.push(finite_score_from_sums(theta, &fwd.functional(), i + 1));
                next += 1;
            }
        }
        Ok(out)
    }
}

/// Gradient of `Σ_t log m(x_{t-1}, x_t) + log g(x_t, y_t)` given summed
/// statistics `Σ_t S` over `count` steps.
fn finite_score_from_sums(theta: &FiniteHmmParams, sums: &[f64], count: usize) -> Vec<f64> {
    let d = theta.states();
    let v = theta.var;
    let mut g = Vec::with_capacity(d * d + d + 1);
    for i in 0..d {
        for j in 0..d {
            g.push(sums[i * d + j] / theta.m(i, j));
        }
    }
    let (occ, m1, m2) = (&sums[d * d..d * d + d], &sums[d * d + d..d * d + 2 * d], &sums[d * d + 2 * d..]);
    let mut rss = 0.0;
    for i in 0..d {
        let x = theta.means[i];
        g.push((m1[i] - x * occ[i]) / v);
        rss += m2[i] - 2.0 * x * m1[i] + x * x * occ[i];
    }
    g.push(-(count as f64) / (2.0 * v) + rss / (2.0 * v * v));
    g
}

impl ExactLikelihood for KalmanBackend {
    fn log_increments(&self, theta: &LgssmParams, chi: &GaussianLaw, y: &[f64]) -> Result<Vec<f64>> {
        self.model.validate(theta)?;
        Ok(kalman_filter(theta, chi, y)?.log_increments)
    }

    fn score_trace(&self, theta: &LgssmParams, chi: &GaussianLaw, y: &[f64], checkpoints: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.model.validate(theta)?;
        let b = &self.model.bounds;
        if theta.phi.abs() >= b.phi_max {
            return Err(Error::Domain(format!("phi = {} on the boundary of the parameter box", theta.phi)));
        }
        interior_var(b, "var_u", theta.var_u)?;
        interior_var(b, "var_v", theta.var_v)?;
        let marks = check_marks(checkpoints, y.len())?;
        marks
            .iter()
            .map(|&t| {
                let s = block_statistic_lgssm(theta, chi, &y[..t])?.stat;
                let n = t as f64;
                let s: Vec<f64> = s.values().iter().map(|v| v * n).collect();
                let (phi, vu, vv) = (theta.phi, theta.var_u, theta.var_v);
                Ok(vec![
                    (s[1] - phi * s[0]) / vu,
                    -n / (2.0 * vu) + (s[2] - 2.0 * phi * s[1] + phi * phi * s[0]) / (2.0 * vu * vu),
                    -n / (2.0 * vv) + (s[4] - 2.0 * s[3] + s[2]) / (2.0 * vv * vv),
                ])
            })
            .collect()
    }
}

/// One log-likelihood increment and its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementRecord {
    pub s: usize,
    pub delta: f64,
    pub bound: f64,
}

/// `(b₋(y), b₊(y))`: extremes of `Σ_x g_θ(x, y)` over the given parameters.
pub fn emission_mass_bounds(thetas: &[&FiniteHmmParams], y: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for theta in thetas {
        let mut e = vec![0.0; theta.states()];
        theta.log_emissions(y, &mut e);
        let mass: f64 = e.iter().map(|v| v.exp()).sum();
        lo = lo.min(mass);
        hi = hi.max(mass);
    }
    (lo, hi)
}

/// `δ^{χ,r}_{θ,s} = ℓ^{χ,r}_{θ,s+1} - ℓ^{χ,r}_{θ,s}` with `y` indexed by
/// absolute time (`y[0]` unused), and the bound
/// `|log σ₊ b₊(y_{s+1})| + |log σ₋ b₋(y_{s+1})|` with `b±` evaluated at `θ`.
pub fn loglik_increment(theta: &FiniteHmmParams, chi: &CategoricalLaw, r: usize, s: usize, y: &[f64]) -> Result<IncrementRecord> {
    loglik_increment_certified(theta, chi, r, s, y, &[])
}

/// As [`loglik_increment`], with `b±` extremized over `θ` and the extra
/// parameter points (for instance the corners of a parameter box).
pub fn loglik_increment_certified(
    theta: &FiniteHmmParams,
    chi: &CategoricalLaw,
    r: usize,
    s: usize,
    y: &[f64],
    extra: &[FiniteHmmParams],
) -> Result<IncrementRecord> {
    let delta = increment(theta, chi, r, s, y)?;
    let bounds = contraction_bounds(theta)?;
    let mut all: Vec<&FiniteHmmParams> = vec![theta];
    all.extend(extra.iter());
    let (bm, bp) = emission_mass_bounds(&all, y[s + 1]);
    let bound = (bounds.upper * bp).ln().abs() + (bounds.lower * bm).ln().abs();
    Ok(IncrementRecord { s, delta, bound })
}

fn increment(theta: &FiniteHmmParams, chi: &CategoricalLaw, r: usize, s: usize, y: &[f64]) -> Result<f64> {
    if r > s || s + 1 >= y.len() {
        return Err(Error::InvalidArgument(format!("need r <= s and s + 1 < {}, got r={r} s={s}", y.len())));
    }
    let f = forward(theta, chi, &y[r + 1..=s + 1])?;
    Ok(*f.log_increments.last().expect("window is non-empty"))
}

/// `|δ^{χ,s-r}_{θ,s} - δ^{χ',s-r-ℓ}_{θ,s}|` against `2ρʳ/(1-ρ)`.
pub fn increment_forgetting(
    theta: &FiniteHmmParams,
    chi: &CategoricalLaw,
    chi_prime: &CategoricalLaw,
    r: usize,
    extra: usize,
    s: usize,
    y: &[f64],
) -> Result<ForgettingGap> {
    if r + extra > s {
        return Err(Error::InvalidArgument(format!("window start s - r - ℓ is negative: s={s} r={r} ℓ={extra}")));
    }
    let a = increment(theta, chi, s - r, s, y)?;
    let b = increment(theta, chi_prime, s - r - extra, s, y)?;
    let rho = contraction_bounds(theta)?.rho;
    Ok(ForgettingGap { measured: (a - b).abs(), bound: 2.0 * rho.powi(r as i32) / (1.0 - rho) })
}

/// `ϕ_θ(y) = max_{x,x'} |∇_θ log m_θ(x, x') g_θ(x', y)|`, evaluated at `θ`.
pub fn phi_envelope(theta: &FiniteHmmParams, y: f64) -> f64 {
    let d = theta.states();
    let v = theta.var;
    let mut best: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let r = y - theta.means[j];
            let n2 = (1.0 / theta.m(i, j)).powi(2) + (r / v).powi(2) + (-0.5 / v + 0.5 * r * r / (v * v)).powi(2);
            best = best.max(n2.sqrt());
        }
    }
    best
}

/// `E[∇_θ log m_θ(X_{u-1}, X_u) g_θ(X_u, y_u) | y_{1..T}]` for `u = 1..=T`.
pub fn gradient_contributions(theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    let sm = forward_backward(theta, chi, y)?;
    let d = theta.states();
    Ok(sm
        .pairs
        .iter()
        .zip(y)
        .map(|(pair, &obs)| {
            let mut sums = vec![0.0; d * d + 3 * d];
            for i in 0..d {
                for j in 0..d {
                    add_finite_stat(d, i, j, obs, pair[i * d + j], &mut sums);
                }
            }
            finite_score_from_sums(theta, &sums, 1)
        })
        .collect())
}

/// Truncated `ξ = Σ_u ϕ(y_u) ρ^{|u - origin|/4}` over the available terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSum {
    pub value: f64,
    /// Mass of the omitted terms, assuming `ϕ` outside the data does not
    /// exceed its maximum inside.
    pub tail_bound: f64,
}

pub fn xi_truncated(phis: &[f64], origin: usize, rho: f64) -> Result<XiSum> {
    if origin >= phis.len() {
        return Err(Error::InvalidArgument(format!("origin {origin} outside {} terms", phis.len())));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    let q = rho.powf(0.25);
    let value = phis.iter().enumerate().map(|(u, p)| p * q.powi(u.abs_diff(origin) as i32)).sum();
    let top = phis.iter().copied().fold(0.0, f64::max);
    let left = q.powi(origin as i32 + 1);
    let right = q.powi((phis.len() - origin) as i32);
    Ok(XiSum { value, tail_bound: top * (left + right) / (1.0 - q) })
}
