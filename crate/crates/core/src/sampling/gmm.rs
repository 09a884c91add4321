use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub components: usize,
    /// Floor applied to every variance entry.
    pub reg: f64,
    pub max_iters: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self { components: 3, reg: 1e-3, max_iters: 100, tol: 1e-6 }
    }
}

/// Mixture of axis-aligned Gaussians on the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::Sampling("GMM needs matching, non-empty weights, means and variances".into()));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().chain(&variances).any(|v| v.len() != dim) {
            return Err(Error::Sampling("GMM component dimensions disagree".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Sampling("GMM weights must lie in (0, 1] and sum to 1".into()));
        }
        if variances.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Sampling("GMM variances must be positive and finite".into()));
        }
        Ok(Self { weights, means, variances })
    }

    pub fn dimension(&self) -> usize {
        self.means[0].len()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    fn component_log_pdf(&self, c: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&xi, &mu), &var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            let d = xi - mu;
            acc += (2.0 * PI * var).ln() + d * d / var;
        }
        self.weights[c].ln() - 0.5 * acc
    }

    /// Per-sample log responsibilities (unnormalized) and the total log-likelihood.
    fn e_step(&self, samples: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (x, row) in samples.iter().zip(resp.iter_mut()) {
            row.clear();
            row.extend((0..self.components()).map(|c| self.component_log_pdf(c, x)));
            let lse = log_sum_exp(row);
            for r in row.iter_mut() {
                *r = (*r - lse).exp();
            }
            total += lse;
        }
        total
    }

    pub fn log_likelihood(&self, samples: &[Vec<f64>]) -> f64 {
        samples
            .iter()
            .map(|x| {
                let terms: Vec<f64> = (0..self.components()).map(|c| self.component_log_pdf(c, x)).collect();
                log_sum_exp(&terms)
            })
            .sum()
    }

    /// Picks a component by weight, draws from it, and clamps to `[0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components() - 1;
        for (c, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = c;
                break;
            }
        }
        self.means[chosen]
            .iter()
            .zip(&self.variances[chosen])
            .map(|(&mu, &var)| {
                let z: f64 = rng.sample(StandardNormal);
                (mu + var.sqrt() * z).clamp(0.0, 1.0)
            })
            .collect()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Log-likelihood of the initial parameters, then after each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

/// Diagonal-covariance EM.
///
/// Means start at evenly spaced quantiles of the distinct samples in
/// lexicographic coordinate order; variances start at the pooled per-axis
/// variance. The variance floor is applied as a clamp, which is the exact
/// constrained maximizer, so the log-likelihood never decreases.
pub fn gmm_fit(samples: &[Vec<f64>], options: &GmmOptions) -> Result<GmmFit> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Sampling("cannot fit a GMM to zero samples".into()));
    }
    let dim = samples[0].len();
    if dim == 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Sampling("samples must share a non-zero dimension".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Sampling("samples must be finite".into()));
    }
    if options.components == 0 {
        return Err(Error::Sampling("need at least one component".into()));
    }
    if !(options.reg > 0.0 && options.reg.is_finite()) {
        return Err(Error::Sampling("covariance floor must be positive".into()));
    }

    let mut distinct: Vec<&Vec<f64>> = samples.iter().collect();
    distinct.sort_by(|a, b| lex_cmp(a, b));
    distinct.dedup_by(|a, b| lex_cmp(a, b).is_eq());
    let k = options.components.min(distinct.len());

    let means: Vec<Vec<f64>> = (0..k).map(|j| distinct[(2 * j + 1) * distinct.len() / (2 * k)].clone()).collect();
    let nf = n as f64;
    let pooled: Vec<f64> = (0..dim)
        .map(|d| {
            let mean = samples.iter().map(|s| s[d]).sum::<f64>() / nf;
            let var = samples.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / nf;
            var.max(options.reg)
        })
        .collect();
    let mut model = GmmModel { weights: vec![1.0 / k as f64; k], means, variances: vec![pooled; k] };

    let mut resp: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut trace = vec![model.e_step(samples, &mut resp)];
    let mut iterations = 0;
    while iterations < options.max_iters {
        model = m_step(samples, &resp, dim, options.reg);
        iterations += 1;
        let ll = model.e_step(samples, &mut resp);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if ll - prev < options.tol {
            break;
        }
    }
    Ok(GmmFit { model, log_likelihood: trace, iterations })
}

fn m_step(samples: &[Vec<f64>], resp: &[Vec<f64>], dim: usize, reg: f64) -> GmmModel {
    let k = resp[0].len();
    let n = samples.len() as f64;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.iter().map(|r| r[c]).sum();
        // a component nobody belongs to has MLE weight 0; drop it
        if nk.is_nan() || nk <= 0.0 {
            continue;
        }
        let mut mean = vec![0.0; dim];
        for (x, r) in samples.iter().zip(resp) {
            for (m, &xi) in mean.iter_mut().zip(x) {
                *m += r[c] * xi;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut var = vec![0.0; dim];
        for (x, r) in samples.iter().zip(resp) {
            for ((v, &xi), &m) in var.iter_mut().zip(x).zip(&mean) {
                *v += r[c] * (xi - m) * (xi - m);
            }
        }
        var.iter_mut().for_each(|v| *v = (*v / nk).max(reg));
        weights.push(nk / n);
        means.push(mean);
        variances.push(var);
    }
    GmmModel { weights, means, variances }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::seeded_rng;

    fn two_clusters(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed);
        let mut out = Vec::new();
        for center in [0.2, 0.8] {
            for _ in 0..100 {
                out.push((0..2).map(|_| center + 0.02 * rng.sample::<f64, _>(StandardNormal)).collect());
            }
        }
        out
    }

    #[test]
    fn identical_samples_collapse_to_floor() {
        let samples = vec![vec![0.3, 0.7]; 12];
        let fit = gmm_fit(&samples, &GmmOptions { components: 1, reg: 1e-4, ..Default::default() }).unwrap();
        assert_eq!(fit.model.components(), 1);
        for (m, want) in fit.model.means()[0].iter().zip([0.3, 0.7]) {
            assert!((m - want).abs() < 1e-15, "{m}");
        }
        assert_eq!(fit.model.variances()[0], vec![1e-4, 1e-4]);
        let fit3 = gmm_fit(&samples, &GmmOptions { components: 3, reg: 1e-4, ..Default::default() }).unwrap();
        assert_eq!(fit3.model.components(), 1);
    }

    #[test]
    fn recovers_two_clusters() {
        let samples = two_clusters(3);
        let fit = gmm_fit(&samples, &GmmOptions { components: 2, reg: 1e-6, max_iters: 200, tol: 1e-9 }).unwrap();
        let m = &fit.model;
        assert_eq!(m.components(), 2);
        let mut centers: Vec<(f64, f64)> = m.means().iter().zip(m.weights()).map(|(mu, &w)| (mu[0], w)).collect();
        centers.sort_by(|a, b| a.0.total_cmp(&b.0));
        for ((mu, w), want) in centers.iter().zip([0.2, 0.8]) {
            assert!((mu - want).abs() < 0.05, "mean {mu}");
            assert!((w - 0.5).abs() < 0.1, "weight {w}");
        }
        for mu in m.means() {
            assert!((mu[0] - mu[1]).abs() < 0.05);
        }
    }

    #[test]
    fn log_likelihood_never_decreases() {
        for seed in 0..20u64 {
            let mut rng = seeded_rng(seed);
            let n = 20 + (seed as usize * 7) % 60;
            let samples: Vec<Vec<f64>> =
                (0..n).map(|_| (0..3).map(|_| rng.random::<f64>().powi(2)).collect()).collect();
            let fit = gmm_fit(&samples, &GmmOptions { components: 4, reg: 1e-4, max_iters: 50, tol: 0.0 }).unwrap();
            for w in fit.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
            }
            assert!(fit.model.variances().iter().flatten().all(|&v| v >= 1e-4));
            assert!((fit.model.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_errors() {
        assert!(gmm_fit(&[], &GmmOptions::default()).is_err());
        assert!(gmm_fit(&[vec![0.1]], &GmmOptions { components: 0, ..Default::default() }).is_err());
        assert!(gmm_fit(&[vec![0.1]], &GmmOptions { reg: 0.0, ..Default::default() }).is_err());
        assert!(gmm_fit(&[vec![0.1], vec![0.1, 0.2]], &GmmOptions::default()).is_err());
    }

    #[test]
    fn vanishing_variance_concentrates() {
        let m = GmmModel::new(vec![1.0], vec![vec![0.5, 0.5]], vec![vec![1e-6, 1e-6]]).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..1000 {
            assert!(m.sample(&mut rng).iter().all(|x| (x - 0.5).abs() < 0.01));
        }
    }

    #[test]
    fn wide_draws_are_clamped() {
        let m = GmmModel::new(vec![1.0], vec![vec![1.2, -0.3]], vec![vec![4.0, 4.0]]).unwrap();
        let mut rng = seeded_rng(2);
        for _ in 0..1000 {
            assert!(m.sample(&mut rng).iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn component_proportions_follow_weights() {
        let m = GmmModel::new(vec![0.3, 0.7], vec![vec![0.2], vec![0.8]], vec![vec![4e-4], vec![4e-4]]).unwrap();
        let mut rng = seeded_rng(11);
        let low = (0..10_000).filter(|_| m.sample(&mut rng)[0] < 0.5).count();
        let frac = low as f64 / 10_000.0;
        assert!((frac - 0.3).abs() < 0.05, "{frac}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = GmmModel::new(vec![0.5, 0.5], vec![vec![0.2], vec![0.8]], vec![vec![0.01], vec![0.01]]).unwrap();
        let (mut a, mut b) = (seeded_rng(5), seeded_rng(5));
        for _ in 0..50 {
            assert_eq!(m.sample(&mut a), m.sample(&mut b));
        }
    }

    #[test]
    fn model_validation() {
        assert!(GmmModel::new(vec![0.5], vec![vec![0.1]], vec![vec![0.1]]).is_err());
        assert!(GmmModel::new(vec![1.0], vec![vec![0.1]], vec![vec![0.0]]).is_err());
        assert!(GmmModel::new(vec![1.0], vec![vec![0.1, 0.2]], vec![vec![0.1]]).is_err());
    }
}
