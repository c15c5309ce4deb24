use std::f64::consts::PI;

use rand::Rng;

use super::kmeans::kmeans_restarts;
use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-4;
pub const MAX_EM_ITERATIONS: usize = 200;
pub const EM_TOLERANCE: f64 = 1e-6;
const KMEANS_RESTARTS: usize = 5;
const KMEANS_ITERATIONS: usize = 100;

/// Two-dimensional Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    pub variances: Vec<[f64; 2]>,
}

/// A fitted mixture plus its EM trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub gmm: Gmm,
    /// Mean log-likelihood of the data before each M-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Gmm {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// `ln(w_k) + ln N(point | mean_k, var_k)` for every component.
    fn log_joint(&self, p: [f64; 2], out: &mut [f64]) {
        for k in 0..self.components() {
            let [mx, my] = self.means[k];
            let [vx, vy] = self.variances[k];
            let quad = (p[0] - mx).powi(2) / vx + (p[1] - my).powi(2) / vy;
            out[k] = self.weights[k].ln() - (2.0 * PI).ln() - 0.5 * (vx * vy).ln() - 0.5 * quad;
        }
    }

    /// Posterior component probabilities at `point`.
    pub fn responsibilities(&self, point: [f64; 2]) -> Vec<f64> {
        let mut lj = vec![0.0; self.components()];
        self.log_joint(point, &mut lj);
        let z = log_sum_exp(&lj);
        lj.iter().map(|l| (l - z).exp()).collect()
    }

    pub fn log_density(&self, point: [f64; 2]) -> f64 {
        let mut lj = vec![0.0; self.components()];
        self.log_joint(point, &mut lj);
        log_sum_exp(&lj)
    }

    /// Mean log-likelihood per sample.
    pub fn mean_log_likelihood(&self, data: &[[f64; 2]]) -> f64 {
        data.iter().map(|&p| self.log_density(p)).sum::<f64>() / data.len() as f64
    }
}

/// EM fit of a `k`-component diagonal mixture, initialized from k-means++
/// seeded Lloyd runs. Stops when the relative change of the log-likelihood
/// drops below `EM_TOLERANCE` or after `MAX_EM_ITERATIONS`.
pub fn fit_gmm<R: Rng>(data: &[[f64; 2]], k: usize, rng: &mut R) -> Result<GmmFit> {
    if k == 0 || data.len() < k {
        return Err(Error::InsufficientSamples(format!(
            "{} samples for a {k}-component mixture",
            data.len()
        )));
    }
    let n = data.len();
    let points: Vec<Vec<f64>> = data.iter().map(|p| p.to_vec()).collect();
    let init = kmeans_restarts(&points, k, KMEANS_ITERATIONS, KMEANS_RESTARTS, rng);
    if init.degenerate {
        log::warn!("mixture data has fewer than {k} distinct points; duplicate components");
    }

    // Initial parameters from the hard k-means partition.
    let mut gmm = Gmm {
        weights: vec![0.0; k],
        means: init.centroids.iter().map(|c| [c[0], c[1]]).collect(),
        variances: vec![[0.0; 2]; k],
    };
    let mut counts = vec![0usize; k];
    for (p, &a) in data.iter().zip(&init.assignments) {
        counts[a] += 1;
        let m = gmm.means[a];
        gmm.variances[a][0] += (p[0] - m[0]).powi(2);
        gmm.variances[a][1] += (p[1] - m[1]).powi(2);
    }
    for c in 0..k {
        let cnt = counts[c].max(1) as f64;
        gmm.weights[c] = (counts[c] as f64).max(1.0) / n as f64;
        for d in 0..2 {
            gmm.variances[c][d] = (gmm.variances[c][d] / cnt).max(VARIANCE_FLOOR);
        }
    }
    let wsum: f64 = gmm.weights.iter().sum();
    gmm.weights.iter_mut().for_each(|w| *w /= wsum);

    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * k];
    let mut lj = vec![0.0; k];
    let mut converged = false;
    for _ in 0..MAX_EM_ITERATIONS {
        // E-step.
        let mut ll = 0.0;
        for (i, &p) in data.iter().enumerate() {
            gmm.log_joint(p, &mut lj);
            let z = log_sum_exp(&lj);
            ll += z;
            for c in 0..k {
                resp[i * k + c] = (lj[c] - z).exp();
            }
        }
        let ll = ll / n as f64;
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            debug_assert!(
                ll >= prev - 1e-9 * prev.abs().max(1.0),
                "EM log-likelihood decreased: {prev} -> {ll}"
            );
            trace.push(ll);
            if ((ll - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < EM_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        // M-step.
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk < 1e-12 {
                gmm.weights[c] = nk / n as f64;
                continue;
            }
            // Offsets from the first sample keep degenerate data exact.
            let origin = data[0];
            let mut m = [0.0; 2];
            for (i, p) in data.iter().enumerate() {
                let r = resp[i * k + c];
                m[0] += r * (p[0] - origin[0]);
                m[1] += r * (p[1] - origin[1]);
            }
            m = [origin[0] + m[0] / nk, origin[1] + m[1] / nk];
            let mut v = [0.0; 2];
            for (i, p) in data.iter().enumerate() {
                let r = resp[i * k + c];
                v[0] += r * (p[0] - m[0]).powi(2);
                v[1] += r * (p[1] - m[1]).powi(2);
            }
            gmm.means[c] = m;
            gmm.variances[c] = [(v[0] / nk).max(VARIANCE_FLOOR), (v[1] / nk).max(VARIANCE_FLOOR)];
            gmm.weights[c] = nk / n as f64;
        }
    }
    Ok(GmmFit {
        gmm,
        log_likelihood: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, Normal};

    /// Minimum-cost perfect matching by exhaustive DP over subsets.
    fn min_matching_cost(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
        let n = cost.len();
        let full = 1usize << n;
        let mut dp = vec![(f64::INFINITY, Vec::new()); full];
        dp[0] = (0.0, Vec::new());
        for mask in 0..full {
            let i = mask.count_ones() as usize;
            if i >= n || dp[mask].0.is_infinite() {
                continue;
            }
            for j in 0..n {
                if mask & (1 << j) == 0 {
                    let c = dp[mask].0 + cost[i][j];
                    if c < dp[mask | (1 << j)].0 {
                        let mut perm = dp[mask].1.clone();
                        perm.push(j);
                        dp[mask | (1 << j)] = (c, perm);
                    }
                }
            }
        }
        dp[full - 1].clone()
    }

    fn nine_blobs(seed_value: u64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let truth: Vec<[f64; 2]> = (0..9)
            .map(|i| [0.2 + 0.3 * (i % 3) as f64, 0.2 + 0.3 * (i / 3) as f64])
            .collect();
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut rng = seed::rng(seed_value);
        let data = (0..1800)
            .map(|i| {
                let m = truth[i % 9];
                [m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)]
            })
            .collect();
        (truth, data)
    }

    #[test]
    fn recovers_nine_blobs() {
        let (truth, data) = nine_blobs(3);
        let fit = fit_gmm(&data, 9, &mut seed::rng(11)).unwrap();
        let cost: Vec<Vec<f64>> = truth
            .iter()
            .map(|t| {
                fit.gmm
                    .means
                    .iter()
                    .map(|m| ((t[0] - m[0]).powi(2) + (t[1] - m[1]).powi(2)).sqrt())
                    .collect()
            })
            .collect();
        let (_, perm) = min_matching_cost(&cost);
        for (i, &j) in perm.iter().enumerate() {
            assert!(cost[i][j] < 0.02, "component {i}: {}", cost[i][j]);
        }
        assert!((fit.gmm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let (_, data) = nine_blobs(5);
        let fit = fit_gmm(&data, 9, &mut seed::rng(1)).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let (_, data) = nine_blobs(5);
        let a = fit_gmm(&data, 9, &mut seed::rng(11)).unwrap();
        let b = fit_gmm(&data, 9, &mut seed::rng(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_data_floors_variances() {
        let data = vec![[0.3, 0.7]; 40];
        let fit = fit_gmm(&data, 9, &mut seed::rng(0)).unwrap();
        for (m, v) in fit.gmm.means.iter().zip(&fit.gmm.variances) {
            assert_eq!(*m, [0.3, 0.7]);
            assert_eq!(*v, [VARIANCE_FLOOR, VARIANCE_FLOOR]);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            fit_gmm(&[[0.0, 0.0]; 3], 9, &mut seed::rng(0)),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn responsibilities_examples() {
        let one = Gmm {
            weights: vec![1.0],
            means: vec![[0.5, 0.5]],
            variances: vec![[0.01, 0.01]],
        };
        assert_eq!(one.responsibilities([0.9, 0.1]), vec![1.0]);

        let twins = Gmm {
            weights: vec![0.5, 0.5],
            means: vec![[0.2, 0.2]; 2],
            variances: vec![[0.01, 0.02]; 2],
        };
        for p in [[0.0, 0.0], [0.7, 0.3], [5.0, -2.0]] {
            let r = twins.responsibilities(p);
            assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-12);
        }

        let apart = Gmm {
            weights: vec![0.5, 0.5],
            means: vec![[0.1, 0.1], [0.9, 0.9]],
            variances: vec![[0.01, 0.01]; 2],
        };
        // Direct evaluation of the posterior at component A's mean.
        let dens = |m: [f64; 2]| {
            let q = ((0.1 - m[0]).powi(2) + (0.1 - m[1]).powi(2)) / 0.01;
            0.5 * (-0.5 * q).exp()
        };
        let expected = dens([0.1, 0.1]) / (dens([0.1, 0.1]) + dens([0.9, 0.9]));
        let r = apart.responsibilities([0.1, 0.1]);
        assert!(r[0] > 0.99);
        assert!((r[0] - expected).abs() < 1e-12);
    }
}
