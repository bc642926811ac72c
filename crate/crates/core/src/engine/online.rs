use std::time::{Duration, Instant};

use super::backend::{ExactBackend, ParticleBackend};
use super::boem::{checked_m_step, entry};
use super::record::RunRecord;
use crate::error::{Error, Result};
use crate::exact::{add_finite_stat, AdditiveForward, CategoricalLaw};
use crate::model::{ExponentialFamily, FiniteHmmParams, Propagate, SuffStat};
use crate::particle::{pf_step_in_place, ParticleCloud};
use crate::rng::StreamRng;

/// Per-observation E-step of online EM: a stochastic-approximation update
/// `ŝ_t = (1 - γ_t) ŝ_{t-1} + γ_t E[S(X_{t-1}, X_t, y_t) | ...]` carried by
/// per-state or per-particle accumulators.
pub trait OnlineBackend: Send + Sync {
    type Model: ExponentialFamily;
    type State;

    fn model(&self) -> &Self::Model;

    fn init(&self, theta: &<Self::Model as ExponentialFamily>::Params, rng: &mut StreamRng) -> Result<Self::State>;

    fn step(
        &self,
        state: &mut Self::State,
        theta: &<Self::Model as ExponentialFamily>::Params,
        y: f64,
        gamma: f64,
        rng: &mut StreamRng,
    ) -> Result<()>;

    /// Current `ŝ_t`.
    fn statistic(&self, state: &Self::State) -> Vec<f64>;
}

impl OnlineBackend for ExactBackend {
    type Model = crate::model::FiniteHmm;
    type State = AdditiveForward;

    fn model(&self) -> &Self::Model {
        &self.model
    }

    fn init(&self, theta: &FiniteHmmParams, _rng: &mut StreamRng) -> Result<AdditiveForward> {
        Ok(AdditiveForward::new(&CategoricalLaw::stationary(theta), self.model.stat_dim()))
    }

    fn step(&self, state: &mut AdditiveForward, theta: &FiniteHmmParams, y: f64, gamma: f64, _rng: &mut StreamRng) -> Result<()> {
        let d = self.model.states();
        state.step(theta, y, 1.0 - gamma, gamma, |x, x2, yy, w, out| add_finite_stat(d, x, x2, yy, w, out))
    }

    fn statistic(&self, state: &AdditiveForward) -> Vec<f64> {
        state.functional()
    }
}

impl<M: Propagate> OnlineBackend for ParticleBackend<M> {
    type Model = M;
    type State = ParticleCloud<M::State>;

    fn model(&self) -> &M {
        &self.model
    }

    fn init(&self, theta: &M::Params, rng: &mut StreamRng) -> Result<Self::State> {
        let n = self.particles.for_block(1);
        if n < 2 {
            return Err(Error::InvalidArgument(format!("particle count must be at least 2, got {n}")));
        }
        ParticleCloud::from_stationary(&self.model, theta, n, rng)
    }

    fn step(&self, state: &mut Self::State, theta: &M::Params, y: f64, gamma: f64, rng: &mut StreamRng) -> Result<()> {
        pf_step_in_place(&self.model, theta, state, y, 1.0 - gamma, gamma, rng)
    }

    fn statistic(&self, state: &Self::State) -> Vec<f64> {
        state.weighted_accumulator()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOptions {
    /// `γ_t = t^{-κ}`.
    pub step_exponent: f64,
    /// Observations processed before the first M-step. During the burn-in θ
    /// stays at `θ₀` and the statistic is the running mean (`γ_t = 1/t`).
    pub burn_in: usize,
    /// Polyak-Ruppert averaging of θ starts at this observation count.
    pub averaging_start: usize,
    /// Observation counts at which the trajectory is recorded; the final
    /// observation is always recorded.
    pub record_at: Vec<usize>,
}

impl OnlineOptions {
    pub fn new(step_exponent: f64) -> Self {
        Self { step_exponent, burn_in: 20, averaging_start: 1, record_at: Vec::new() }
    }

    pub fn gamma(&self, t: usize) -> f64 {
        if t <= self.burn_in {
            1.0 / t as f64
        } else {
            (t as f64).powf(-self.step_exponent)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_exponent > 0.5 && self.step_exponent <= 1.0) {
            return Err(Error::InvalidArgument(format!("step exponent {} outside (0.5, 1]", self.step_exponent)));
        }
        if self.averaging_start == 0 {
            return Err(Error::InvalidArgument("averaging start must be at least 1".into()));
        }
        Ok(())
    }
}

/// Online EM with θ updated after every observation past the burn-in.
pub fn run_online_em<B: OnlineBackend>(
    backend: &B,
    theta0: &<B::Model as ExponentialFamily>::Params,
    y: &[f64],
    opts: &OnlineOptions,
    rng: &mut StreamRng,
) -> Result<RunRecord> {
    opts.validate()?;
    let model = backend.model();
    model.validate(theta0)?;
    let clock = Instant::now();
    let mut theta = theta0.clone();
    let mut record = RunRecord::new(model.coordinate_names());
    let mut est = model.flatten(&theta);
    record.push(entry(0, est.clone(), est.clone(), 0, Duration::ZERO))?;

    let mut marks: Vec<usize> = opts.record_at.iter().copied().filter(|&c| c > 0 && c <= y.len()).collect();
    marks.push(y.len());
    marks.sort_unstable();
    marks.dedup();
    let mut next_mark = 0;

    let mut avg = est.clone();
    let mut avg_n = 0usize;
    let mut updates = 0usize;
    let mut state = backend.init(&theta, rng)?;
    for (i, &obs) in y.iter().enumerate() {
        let t = i + 1;
        backend.step(&mut state, &theta, obs, opts.gamma(t), rng)?;
        if t > opts.burn_in {
            let stat = SuffStat::new(backend.statistic(&state), t);
            match checked_m_step(model, &stat) {
                Ok(next) => {
                    theta = next;
                    est = model.flatten(&theta);
                    updates += 1;
                }
                Err(Error::DegenerateStatistic(_)) => record.skipped.push(t),
                Err(e) => return Err(e),
            }
        }
        if t >= opts.averaging_start {
            avg_n += 1;
            let k = avg_n as f64;
            for (a, e) in avg.iter_mut().zip(&est) {
                *a += (e - *a) / k;
            }
        } else {
            avg.clone_from(&est);
        }
        if next_mark < marks.len() && marks[next_mark] == t {
            record.push(entry(t, est.clone(), avg.clone(), updates, clock.elapsed()))?;
            next_mark += 1;
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::forward_backward;
    use crate::model::FiniteHmm;
    use crate::rng::{stream, Purpose};
    use crate::simulate::simulate;

    fn setup() -> (ExactBackend, FiniteHmmParams) {
        let be = ExactBackend { model: FiniteHmm::with_states(2) };
        let theta = FiniteHmmParams::new(vec![0.8, 0.2, 0.3, 0.7], vec![-1.0, 1.5], 0.7);
        (be, theta)
    }

    #[test]
    fn unit_step_is_the_latest_one_step_smoothed_statistic() {
        let (be, theta) = setup();
        let y = [0.3, -1.2, 2.0, 0.1];
        let mut rng = stream(1, 0, Purpose::Smoother);
        let mut st = be.init(&theta, &mut rng).unwrap();
        let chi = CategoricalLaw::stationary(&theta);
        for t in 1..=y.len() {
            be.step(&mut st, &theta, y[t - 1], 1.0, &mut rng).unwrap();
            let s = be.statistic(&st);
            // E[S(X_{t-1}, X_t, y_t) | y_{1..t}] from a full smoother of the prefix
            let sm = forward_backward(&theta, &chi, &y[..t]).unwrap();
            let pair = &sm.pairs[t - 1];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s[i * 2 + j] - pair[i * 2 + j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn burn_in_uses_running_means() {
        let opts = OnlineOptions { burn_in: 10, ..OnlineOptions::new(0.6) };
        assert_eq!(opts.gamma(1), 1.0);
        assert_eq!(opts.gamma(10), 0.1);
        assert_eq!(opts.gamma(11), 11f64.powf(-0.6));
    }

    #[test]
    fn records_at_marks_and_end() {
        let (be, theta) = setup();
        let y = simulate(&be.model, &theta, 500, &mut stream(2, 0, Purpose::Data)).observations;
        let opts = OnlineOptions { record_at: vec![100, 250, 9999], averaging_start: 200, ..OnlineOptions::new(0.6) };
        let rec = run_online_em(&be, &theta, &y, &opts, &mut stream(2, 0, Purpose::Smoother)).unwrap();
        let obs: Vec<usize> = rec.entries().iter().map(|e| e.observations).collect();
        assert_eq!(obs, vec![0, 100, 250, 500]);
        assert_eq!(rec.entries()[1].estimate, rec.entries()[1].averaged);
        assert_eq!(rec.last().unwrap().block, 480);
    }

    #[test]
    fn step_exponent_range() {
        let (be, theta) = setup();
        let mut rng = stream(3, 0, Purpose::Smoother);
        assert!(run_online_em(&be, &theta, &[0.0; 5], &OnlineOptions::new(0.5), &mut rng).is_err());
        assert!(run_online_em(&be, &theta, &[0.0; 5], &OnlineOptions::new(1.0), &mut rng).is_ok());
    }
}
