use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{add_finite_stat, AdditiveForward, CategoricalLaw};
use crate::model::{FiniteHmm, FiniteHmmParams};
use crate::rng::{stream, Purpose};
use crate::simulate::simulate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub tau: usize,
    /// `sqrt(mean_seeds |S̄_τ - S̄_{10τ}|²)`.
    pub error: f64,
    /// Delta-method standard error of `error`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateProbe {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log error` against `log τ`.
    pub slope: f64,
}

/// L₂ distance between the block statistic over the first `τ` observations
/// and the one over the first `10τ` observations of the same stream, for each
/// `τ` in the grid, averaged over `seeds` simulated streams.
pub fn rate_probe(theta: &FiniteHmmParams, chi: &CategoricalLaw, taus: &[usize], seeds: usize, base_seed: u64) -> Result<RateProbe> {
    if taus.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: taus.len() });
    }
    if seeds == 0 || taus.contains(&0) {
        return Err(Error::InvalidArgument("rate probe needs at least one seed and positive block lengths".into()));
    }
    let mut grid = taus.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: grid.len() });
    }
    let model = FiniteHmm::with_states(theta.states());
    let horizon = 10 * grid[grid.len() - 1];
    let d = theta.states();
    let dim = d * d + 3 * d;

    let per_seed: Vec<Vec<f64>> = (0..seeds as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let y = simulate(&model, theta, horizon, &mut stream(base_seed, rep, Purpose::Data)).observations;
            let mut fwd = AdditiveForward::new(chi, dim);
            let mut short = vec![Vec::new(); grid.len()];
            let mut sq = vec![0.0; grid.len()];
            for (i, &obs) in y.iter().enumerate() {
                let t = i + 1;
                fwd.step(theta, obs, 1.0, 1.0, |x, x2, yy, w, out| add_finite_stat(d, x, x2, yy, w, out))?;
                for (k, &tau) in grid.iter().enumerate() {
                    if t == tau {
                        short[k] = fwd.functional().into_iter().map(|v| v / t as f64).collect();
                    }
                    if t == 10 * tau {
                        let long = fwd.functional();
                        sq[k] = short[k].iter().zip(&long).map(|(a, b)| (a - b / t as f64).powi(2)).sum();
                    }
                }
            }
            Ok(sq)
        })
        .collect::<Result<_>>()?;

    let n = seeds as f64;
    let rows: Vec<RateRow> = grid
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let mean = per_seed.iter().map(|s| s[k]).sum::<f64>() / n;
            let var = if seeds > 1 { per_seed.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let error = mean.sqrt();
            let std_error = if error > 0.0 { (var / n).sqrt() / (2.0 * error) } else { 0.0 };
            RateRow { tau, error, std_error }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| (r.tau as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    Ok(RateProbe { slope: ls_slope(&xs, &ys), rows })
}

pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
