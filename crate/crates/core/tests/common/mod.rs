#![allow(dead_code)]

use boem_core::exact::CategoricalLaw;
use boem_core::kalman::GaussianLaw;
use boem_core::model::{FiniteHmmParams, LgssmParams};
use rand::Rng;

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// The six-state model of the finite-HMM experiment: means `1..=6`, variance 0.5.
pub fn six_state_truth() -> FiniteHmmParams {
    #[rustfmt::skip]
    let m = vec![
        0.5, 0.05, 0.1, 0.15, 0.15, 0.05,
        0.2, 0.35, 0.1, 0.15, 0.05, 0.15,
        0.1, 0.1, 0.6, 0.05, 0.05, 0.1,
        0.02, 0.03, 0.1, 0.7, 0.1, 0.05,
        0.1, 0.05, 0.13, 0.02, 0.6, 0.1,
        0.1, 0.1, 0.13, 0.12, 0.1, 0.45,
    ];
    FiniteHmmParams::new(m, (1..=6).map(f64::from).collect(), 0.5)
}

pub fn random_finite<R: Rng>(d: usize, rng: &mut R) -> FiniteHmmParams {
    let mut m = Vec::with_capacity(d * d);
    for _ in 0..d {
        let row: Vec<f64> = (0..d).map(|_| 0.05 + rng.random::<f64>()).collect();
        let z: f64 = row.iter().sum();
        m.extend(row.iter().map(|v| v / z));
    }
    let means = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    FiniteHmmParams::new(m, means, rng.random_range(0.3..2.0))
}

pub fn random_law<R: Rng>(d: usize, rng: &mut R) -> CategoricalLaw {
    let w: Vec<f64> = (0..d).map(|_| 0.01 + rng.random::<f64>()).collect();
    CategoricalLaw::from_weights(&w).unwrap()
}

/// Smoothing quantities by summing over every hidden path `x_0..x_n`.
pub struct BruteForce {
    pub marginals: Vec<Vec<f64>>,
    pub pairs: Vec<Vec<f64>>,
    pub loglik: f64,
    /// `(1/n) Σ_k E[S(X_{k-1}, X_k, y_k) | y]` in the pair / occupation /
    /// first-moment / second-moment layout.
    pub stat: Vec<f64>,
}

pub fn brute_force(theta: &FiniteHmmParams, chi: &CategoricalLaw, y: &[f64]) -> BruteForce {
    let d = theta.states();
    let n = y.len();
    let mut marginals = vec![vec![0.0; d]; n + 1];
    let mut pairs = vec![vec![0.0; d * d]; n];
    let mut stat = vec![0.0; d * d + 3 * d];
    let mut total = 0.0;
    let mut path = vec![0usize; n + 1];
    let count = d.pow(n as u32 + 1);
    for code in 0..count {
        let mut c = code;
        for p in path.iter_mut() {
            *p = c % d;
            c /= d;
        }
        let mut w = chi.probs()[path[0]];
        for k in 1..=n {
            w *= theta.m(path[k - 1], path[k]) * normal_pdf(y[k - 1], theta.means[path[k]], theta.var);
        }
        total += w;
        for (k, &x) in path.iter().enumerate() {
            marginals[k][x] += w;
        }
        for k in 1..=n {
            let (i, j) = (path[k - 1], path[k]);
            let yk = y[k - 1];
            pairs[k - 1][i * d + j] += w;
            stat[i * d + j] += w;
            stat[d * d + j] += w;
            stat[d * d + d + j] += w * yk;
            stat[d * d + 2 * d + j] += w * yk * yk;
        }
    }
    marginals.iter_mut().flatten().for_each(|v| *v /= total);
    pairs.iter_mut().flatten().for_each(|v| *v /= total);
    stat.iter_mut().for_each(|v| *v /= total * n as f64);
    BruteForce { marginals, pairs, loglik: total.ln(), stat }
}

/// Block statistic of the linear-Gaussian model by discretizing the state on
/// a uniform grid and running forward-backward on the resulting chain.
pub fn grid_lgssm_stat(theta: &LgssmParams, chi: &GaussianLaw, y: &[f64], points: usize) -> Vec<f64> {
    let sd = theta.stationary_var().sqrt().max(chi.var.sqrt()).max(1.0);
    let ymax = y.iter().fold(chi.mean.abs(), |a, v| a.max(v.abs()));
    let half = 8.0 * sd + ymax;
    let h = 2.0 * half / (points - 1) as f64;
    let z: Vec<f64> = (0..points).map(|i| -half + h * i as f64).collect();
    let kern: Vec<Vec<f64>> = z.iter().map(|&a| z.iter().map(|&b| normal_pdf(b, theta.phi * a, theta.var_u) * h).collect()).collect();
    let n = y.len();
    let mut alpha = vec![z.iter().map(|&a| normal_pdf(a, chi.mean, chi.var) * h).collect::<Vec<f64>>()];
    let mut emis = Vec::with_capacity(n);
    for &obs in y {
        let e: Vec<f64> = z.iter().map(|&b| normal_pdf(obs, b, theta.var_v)).collect();
        let prev = alpha.last().unwrap();
        let mut next: Vec<f64> = (0..points).map(|b| (0..points).map(|a| prev[a] * kern[a][b]).sum::<f64>() * e[b]).collect();
        let c: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= c);
        alpha.push(next);
        emis.push(e);
    }
    let mut beta = vec![1.0; points];
    let mut s = [0.0; 5];
    for k in (1..=n).rev() {
        let e = &emis[k - 1];
        let a = &alpha[k - 1];
        let mut pair_total = 0.0;
        let mut acc = [0.0; 3];
        let mut ex1 = 0.0;
        let mut new_beta = vec![0.0; points];
        for i in 0..points {
            for j in 0..points {
                let w = a[i] * kern[i][j] * e[j] * beta[j];
                pair_total += w;
                acc[0] += w * z[i] * z[i];
                acc[1] += w * z[i] * z[j];
                acc[2] += w * z[j] * z[j];
                ex1 += w * z[j];
                new_beta[i] += kern[i][j] * e[j] * beta[j];
            }
        }
        s[0] += acc[0] / pair_total;
        s[1] += acc[1] / pair_total;
        s[2] += acc[2] / pair_total;
        s[3] += y[k - 1] * ex1 / pair_total;
        s[4] += y[k - 1] * y[k - 1];
        let norm = new_beta.iter().cloned().fold(0.0, f64::max);
        beta = new_beta.iter().map(|v| v / norm).collect();
    }
    s.iter().map(|v| v / n as f64).collect()
}

/// Maximizes `f` over the box `lo..hi` by cyclic golden-section searches.
pub fn coordinate_ascent<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], lo: &[f64], hi: &[f64], sweeps: usize) -> Vec<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x = start.to_vec();
    for _ in 0..sweeps {
        for k in 0..x.len() {
            let (mut a, mut b) = (lo[k], hi[k]);
            let eval = |v: f64, x: &mut Vec<f64>| {
                x[k] = v;
                f(x)
            };
            let mut c = b - g * (b - a);
            let mut dpt = a + g * (b - a);
            let mut fc = eval(c, &mut x);
            let mut fd = eval(dpt, &mut x);
            for _ in 0..80 {
                if fc > fd {
                    b = dpt;
                    dpt = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = eval(c, &mut x);
                } else {
                    a = c;
                    c = dpt;
                    fc = fd;
                    dpt = a + g * (b - a);
                    fd = eval(dpt, &mut x);
                }
            }
            x[k] = 0.5 * (a + b);
        }
    }
    x
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
