//! Forward simulation of observation streams.

use rand::Rng;

use crate::model::Propagate;

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated<S> {
    /// `X_0..X_T`, with `X_0` drawn from the stationary law.
    pub states: Vec<S>,
    /// `Y_1..Y_T`.
    pub observations: Vec<f64>,
}

pub fn simulate<M, R>(model: &M, theta: &M::Params, len: usize, rng: &mut R) -> Simulated<M::State>
where
    M: Propagate,
    R: Rng + ?Sized,
{
    let mut states = Vec::with_capacity(len + 1);
    let mut observations = Vec::with_capacity(len);
    let mut x = model.sample_stationary(theta, rng);
    states.push(x);
    for _ in 0..len {
        x = model.sample_transition(theta, x, rng);
        observations.push(model.sample_emission(theta, x, rng));
        states.push(x);
    }
    Simulated { states, observations }
}
