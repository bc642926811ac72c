use rand::Rng;
use rand_distr::StandardNormal;

use super::{gaussian_logpdf, ExponentialFamily, ModelBounds, ParamBox, Propagate, SuffStat, LN_2PI};
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Transition matrix `m` (row-major, `d × d`), emission means `x_1..x_d` and
/// common emission variance `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHmmParams {
    pub transition: Vec<f64>,
    pub means: Vec<f64>,
    pub var: f64,
}

impl FiniteHmmParams {
    pub fn new(transition: Vec<f64>, means: Vec<f64>, var: f64) -> Self {
        Self { transition, means, var }
    }

    pub fn uniform(means: Vec<f64>, var: f64) -> Self {
        let d = means.len();
        Self { transition: vec![1.0 / d as f64; d * d], means, var }
    }

    pub fn states(&self) -> usize {
        self.means.len()
    }

    #[inline]
    pub fn m(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.means.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.means.len();
        &self.transition[i * d..(i + 1) * d]
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.transition.clone();
        v.extend_from_slice(&self.means);
        v.push(self.var);
        v
    }

    /// Emission log-densities `log g(i, y)` for every state.
    pub fn log_emissions(&self, y: f64, out: &mut [f64]) {
        for (o, &mu) in out.iter_mut().zip(&self.means) {
            *o = gaussian_logpdf(y, mu, self.var);
        }
    }
}

/// Invariant law of a row-stochastic matrix with positive entries, by power
/// iteration.
pub fn stationary_distribution(p: &FiniteHmmParams) -> Vec<f64> {
    let d = p.states();
    let mut pi = vec![1.0 / d as f64; d];
    let mut next = vec![0.0; d];
    for _ in 0..100_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            let row = p.row(i);
            for j in 0..d {
                next[j] += pi[i] * row[j];
            }
        }
        let z: f64 = next.iter().sum();
        let mut diff = 0.0;
        for j in 0..d {
            let v = next[j] / z;
            diff += (v - pi[j]).abs();
            pi[j] = v;
        }
        if diff < 1e-16 {
            break;
        }
    }
    pi
}

/// Finite-state HMM with Gaussian emissions `N(x_i, v)`.
///
/// Statistic layout for `d` states, length `d² + 3d`:
/// pair indicators `1{x=i, x'=j}` (row-major), occupation `1{x'=i}`,
/// first moments `y 1{x'=i}`, second moments `y² 1{x'=i}`.
#[derive(Debug, Clone)]
pub struct FiniteHmm {
    states: usize,
    pub bounds: ParamBox,
    fixed_transition: Option<Vec<f64>>,
}

impl FiniteHmm {
    pub fn new(states: usize, bounds: ParamBox) -> Self {
        assert!(states >= 1, "a finite HMM needs at least one state");
        Self { states, bounds, fixed_transition: None }
    }

    /// Treats the transition matrix as known: the M-step returns `transition`
    /// and only re-estimates the emission parameters.
    pub fn with_fixed_transition(mut self, transition: Vec<f64>) -> Result<Self> {
        if transition.len() != self.states * self.states {
            return Err(Error::InvalidArgument(format!("fixed transition has {} entries, expected {}", transition.len(), self.states * self.states)));
        }
        self.fixed_transition = Some(transition);
        Ok(self)
    }

    pub fn fixed_transition(&self) -> Option<&[f64]> {
        self.fixed_transition.as_deref()
    }

    pub fn with_states(states: usize) -> Self {
        Self::new(states, ParamBox::default())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn pair_offset(&self) -> usize {
        0
    }

    pub fn occupation_offset(&self) -> usize {
        self.states * self.states
    }

    pub fn moment_offset(&self) -> usize {
        self.states * self.states + self.states
    }

    pub fn second_moment_offset(&self) -> usize {
        self.states * self.states + 2 * self.states
    }

    /// Clip a nonnegative row onto `{p : p_j >= floor, Σ p_j = 1}` by pinning
    /// entries at the floor and rescaling the rest until nothing is below it.
    fn project_row(&self, row: &mut [f64]) {
        let floor = self.bounds.prob_min;
        let d = row.len();
        let mut pinned = vec![false; d];
        loop {
            let free_mass: f64 = row.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(v, _)| *v).sum();
            let n_pinned = pinned.iter().filter(|p| **p).count();
            let target = 1.0 - floor * n_pinned as f64;
            let mut changed = false;
            for j in 0..d {
                if pinned[j] {
                    row[j] = floor;
                } else {
                    row[j] *= target / free_mass;
                }
            }
            for j in 0..d {
                if !pinned[j] && row[j] < floor {
                    pinned[j] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

impl ExponentialFamily for FiniteHmm {
    type State = usize;
    type Params = FiniteHmmParams;

    fn stat_dim(&self) -> usize {
        self.states * self.states + 3 * self.states
    }

    fn add_suff_stat(&self, x: usize, x2: usize, y: f64, w: f64, out: &mut [f64]) {
        let d = self.states;
        out[x * d + x2] += w;
        out[d * d + x2] += w;
        out[d * d + d + x2] += w * y;
        out[d * d + 2 * d + x2] += w * y * y;
    }

    fn log_transition(&self, t: &FiniteHmmParams, x: usize, x2: usize) -> f64 {
        t.m(x, x2).ln()
    }

    fn log_emission(&self, t: &FiniteHmmParams, x2: usize, y: f64) -> f64 {
        gaussian_logpdf(y, t.means[x2], t.var)
    }

    fn log_partition(&self, _t: &FiniteHmmParams) -> f64 {
        0.0
    }

    fn natural_params(&self, t: &FiniteHmmParams) -> Vec<f64> {
        let d = self.states;
        let mut psi = Vec::with_capacity(self.stat_dim());
        psi.extend(t.transition.iter().map(|p| p.ln()));
        psi.extend(t.means.iter().map(|mu| -0.5 * (LN_2PI + t.var.ln()) - mu * mu / (2.0 * t.var)));
        psi.extend(t.means.iter().map(|mu| mu / t.var));
        psi.extend(std::iter::repeat_n(-0.5 / t.var, d));
        psi
    }

    fn validate(&self, t: &FiniteHmmParams) -> Result<()> {
        let d = self.states;
        if t.means.len() != d || t.transition.len() != d * d {
            return Err(Error::Domain(format!(
                "expected {d} states, got {} means and {} transition entries",
                t.means.len(),
                t.transition.len()
            )));
        }
        for i in 0..d {
            let row = t.row(i);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!("row {i} of m sums to {sum}")));
            }
            if let Some(p) = row.iter().find(|p| !(**p >= self.bounds.prob_min && **p <= 1.0)) {
                return Err(Error::Domain(format!("m entry {p} in row {i} outside [{}, 1]", self.bounds.prob_min)));
            }
        }
        if let Some(mu) = t.means.iter().find(|mu| !(mu.abs() <= self.bounds.mean_bound)) {
            return Err(Error::Domain(format!("emission mean {mu} outside box")));
        }
        self.bounds.check_var("v", t.var)
    }

    fn m_step(&self, s: &SuffStat) -> Result<FiniteHmmParams> {
        let d = self.states;
        let v = s.values();
        if v.len() != self.stat_dim() || !s.is_finite() {
            return Err(Error::DegenerateStatistic(format!("expected {} finite values", self.stat_dim())));
        }
        let (occ, mom1, mom2) = (
            &v[self.occupation_offset()..self.moment_offset()],
            &v[self.moment_offset()..self.second_moment_offset()],
            &v[self.second_moment_offset()..],
        );
        let mut transition = v[..d * d].to_vec();
        for i in 0..d {
            let row = &mut transition[i * d..(i + 1) * d];
            if row.iter().any(|p| *p < 0.0) {
                return Err(Error::DegenerateStatistic(format!("negative pair mass in row {i}")));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::DegenerateStatistic(format!("transition row {i} has zero mass")));
            }
            row.iter_mut().for_each(|p| *p /= sum);
            self.project_row(row);
        }
        if let Some(fixed) = &self.fixed_transition {
            transition.clone_from(fixed);
        }
        let mut means = Vec::with_capacity(d);
        let mut var = 0.0;
        for i in 0..d {
            if occ[i] <= 0.0 {
                return Err(Error::DegenerateStatistic(format!("state {i} never occupied")));
            }
            let mu = mom1[i] / occ[i];
            var += mom2[i] - occ[i] * mu * mu;
            means.push(mu.clamp(-self.bounds.mean_bound, self.bounds.mean_bound));
        }
        if var <= 0.0 {
            return Err(Error::DegenerateStatistic(format!("implied emission variance {var} <= 0")));
        }
        Ok(FiniteHmmParams { transition, means, var: self.bounds.clip_var(var) })
    }

    fn transition_bounds(&self, t: &FiniteHmmParams) -> Result<ModelBounds> {
        let lo = t.transition.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.transition.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ModelBounds::new(lo, hi)
    }

    fn flatten(&self, t: &FiniteHmmParams) -> Vec<f64> {
        t.flat()
    }

    fn unflatten(&self, flat: &[f64]) -> Result<FiniteHmmParams> {
        let d = self.states;
        if flat.len() != d * d + d + 1 {
            return Err(Error::InvalidArgument(format!(
                "finite HMM with {d} states expects {} parameters, got {}",
                d * d + d + 1,
                flat.len()
            )));
        }
        Ok(FiniteHmmParams::new(flat[..d * d].to_vec(), flat[d * d..d * d + d].to_vec(), flat[d * d + d]))
    }

    fn coordinate_names(&self) -> Vec<String> {
        let d = self.states;
        let mut names = Vec::with_capacity(d * d + d + 1);
        for i in 1..=d {
            for j in 1..=d {
                names.push(format!("m_{i}_{j}"));
            }
        }
        names.extend((1..=d).map(|i| format!("x_{i}")));
        names.push("v".into());
        names
    }
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl Propagate for FiniteHmm {
    fn sample_stationary<R: Rng + ?Sized>(&self, t: &FiniteHmmParams, rng: &mut R) -> usize {
        sample_categorical(&stationary_distribution(t), rng)
    }

    fn sample_stationary_n<R: Rng + ?Sized>(&self, t: &FiniteHmmParams, n: usize, rng: &mut R) -> Vec<usize> {
        let pi = stationary_distribution(t);
        (0..n).map(|_| sample_categorical(&pi, rng)).collect()
    }

    fn sample_transition<R: Rng + ?Sized>(&self, t: &FiniteHmmParams, x: usize, rng: &mut R) -> usize {
        sample_categorical(t.row(x), rng)
    }

    fn sample_emission<R: Rng + ?Sized>(&self, t: &FiniteHmmParams, x: usize, rng: &mut R) -> f64 {
        t.means[x] + t.var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(d: usize, rng: &mut ChaCha8Rng) -> FiniteHmmParams {
        let mut transition = Vec::with_capacity(d * d);
        for _ in 0..d {
            let row: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = row.iter().sum();
            transition.extend(row.iter().map(|v| v / z));
        }
        let means = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        FiniteHmmParams::new(transition, means, rng.random_range(0.2..2.0))
    }

    #[test]
    fn statistic_example() {
        let m = FiniteHmm::with_states(2);
        let s = m.suff_stat(0, 1, 0.3);
        assert_eq!(&s[..4], &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&s[4..6], &[0.0, 1.0]);
        assert_eq!(&s[6..8], &[0.0, 0.3]);
        assert!((s[9] - 0.09).abs() < 1e-15);
        assert_eq!(s[8], 0.0);
    }

    #[test]
    fn emission_at_mode() {
        let m = FiniteHmm::with_states(2);
        let t = FiniteHmmParams::new(vec![0.5; 4], vec![-1.0, 2.0], 1.0);
        let got = m.log_emission(&t, 1, 2.0);
        assert!((got + 0.5 * LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=4 {
            let m = FiniteHmm::with_states(d);
            for _ in 0..100 {
                let t = random_params(d, &mut rng);
                let (x, x2) = (rng.random_range(0..d), rng.random_range(0..d));
                let y = rng.random_range(-5.0..5.0);
                let a = m.complete_data_logdensity(&t, x, x2, y).unwrap();
                let b = m.decomposed_logdensity(&t, x, x2, y).unwrap();
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn fixed_transition_survives_the_m_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_params(3, &mut rng);
        let known = vec![0.5, 0.25, 0.25, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4];
        let m = FiniteHmm::with_states(3).with_fixed_transition(known.clone()).unwrap();
        let mut s = vec![0.0; m.stat_dim()];
        for i in 0..3 {
            for j in 0..3 {
                s[i * 3 + j] = t.m(i, j) / 3.0;
            }
            s[9 + i] = 1.0 / 3.0;
            s[12 + i] = t.means[i] / 3.0;
            s[15 + i] = (t.means[i] * t.means[i] + t.var) / 3.0;
        }
        let est = m.m_step(&SuffStat::new(s, 1)).unwrap();
        assert_eq!(est.transition, known);
        for (a, b) in est.means.iter().zip(&t.means) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(FiniteHmm::with_states(3).with_fixed_transition(vec![1.0; 4]).is_err());
    }

    #[test]
    fn m_step_recovers_transition_from_stationary_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = FiniteHmm::with_states(3);
        let t = random_params(3, &mut rng);
        let pi = stationary_distribution(&t);
        let mut s = vec![0.0; m.stat_dim()];
        for i in 0..3 {
            for j in 0..3 {
                s[i * 3 + j] = pi[i] * t.m(i, j);
            }
        }
        for j in 0..3 {
            s[9 + j] = pi[j];
            s[12 + j] = pi[j] * t.means[j];
            s[15 + j] = pi[j] * (t.means[j] * t.means[j] + t.var);
        }
        let est = m.m_step(&SuffStat::new(s, 1)).unwrap();
        for (a, b) in est.transition.iter().zip(&t.transition) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in est.means.iter().zip(&t.means) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((est.var - t.var).abs() < 1e-12);
    }

    #[test]
    fn m_step_projection_keeps_rows_stochastic() {
        let m = FiniteHmm::with_states(3);
        let mut s = vec![0.0; m.stat_dim()];
        s[0] = 0.5;
        s[4] = 0.2;
        s[5] = 1e-12;
        s[8] = 0.3;
        s[9..12].copy_from_slice(&[0.5, 0.2, 0.3]);
        s[12..15].copy_from_slice(&[0.0, 0.2, 0.6]);
        s[15..18].copy_from_slice(&[0.5, 0.5, 1.5]);
        let t = m.m_step(&SuffStat::new(s.clone(), 1));
        // rows 0 and 2 have a single mass point; row 1 too: all valid after projection
        let t = t.unwrap();
        m.validate(&t).unwrap();
        assert!(t.transition.iter().all(|p| *p >= 1e-6));
        s[12] = 5.0;
        s[15] = 0.0;
        assert!(matches!(m.m_step(&SuffStat::new(s, 1)), Err(Error::DegenerateStatistic(_))));
    }

    #[test]
    fn unvisited_state_is_degenerate() {
        let m = FiniteHmm::with_states(2);
        let mut s = m.suff_stat(0, 0, 1.0);
        s[1] = 0.0;
        assert!(matches!(m.m_step(&SuffStat::new(s, 1)), Err(Error::DegenerateStatistic(_))));
    }

    #[test]
    fn transition_bounds_examples() {
        let m = FiniteHmm::with_states(2);
        let t = FiniteHmmParams::new(vec![0.9, 0.1, 0.1, 0.9], vec![0.0, 1.0], 1.0);
        let b = m.transition_bounds(&t).unwrap();
        assert!((b.rho - 8.0 / 9.0).abs() < 1e-15);
        let m4 = FiniteHmm::with_states(4);
        let u = FiniteHmmParams::uniform(vec![0.0, 1.0, 2.0, 3.0], 1.0);
        let b = m4.transition_bounds(&u).unwrap();
        assert_eq!((b.lower, b.upper, b.rho), (0.25, 0.25, 0.0));
    }

    #[test]
    fn stationary_law_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_params(5, &mut rng);
        let pi = stationary_distribution(&t);
        for j in 0..5 {
            let next: f64 = (0..5).map(|i| pi[i] * t.m(i, j)).sum();
            assert!((next - pi[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn validate_checks_rows() {
        let m = FiniteHmm::with_states(2);
        assert!(m.validate(&FiniteHmmParams::new(vec![0.5, 0.6, 0.5, 0.5], vec![0.0, 1.0], 1.0)).is_err());
        assert!(m.validate(&FiniteHmmParams::new(vec![1.0, 0.0, 0.5, 0.5], vec![0.0, 1.0], 1.0)).is_err());
        assert!(m.validate(&FiniteHmmParams::new(vec![0.5, 0.5, 0.5, 0.5], vec![0.0], 1.0)).is_err());
    }
}
