//! Multinomial probit target model: analytic covariance/correlation of the
//! route utilities from topological overlap, and Monte-Carlo choice
//! probabilities from link-level Normal perturbations.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{CorrMatrix, CovMatrix};
use crate::netgraph::{overlap_impedance, ChoiceSet, Network};
use crate::rng::draw_rng;

/// Probit proportionality constant from the coefficient of variation at the
/// minimum-cost route: xi = cv^2 * C_min.
pub fn xi_from_cv(cv: f64, c_od_min: f64) -> Result<f64> {
    if !(cv.is_finite() && cv > 0.0) {
        return Err(Error::Invalid("cv must be positive".into()));
    }
    if !(c_od_min.is_finite() && c_od_min > 0.0) {
        return Err(Error::Invalid("C_od_min must be positive".into()));
    }
    Ok(cv * cv * c_od_min)
}

#[derive(Debug, Clone, Copy)]
pub struct MnpSpec {
    pub xi: f64,
    pub n_draws: u64,
    pub seed: u64,
}

impl MnpSpec {
    pub fn new(xi: f64, n_draws: u64, seed: u64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::Invalid("xi must be positive".into()));
        }
        if n_draws < 1 {
            return Err(Error::Invalid("n_draws must be >= 1".into()));
        }
        Ok(MnpSpec { xi, n_draws, seed })
    }
}

/// Route-utility covariance and correlation implied by topological overlap:
/// sigma_kk' = xi * overlap impedance, rho_kk' = overlap / sqrt(C_k C_k').
/// The correlation matrix does not depend on xi.
pub fn ds_moments(net: &Network, cs: &ChoiceSet, xi: f64) -> Result<(CovMatrix, CorrMatrix)> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::Invalid("xi must be positive".into()));
    }
    let n = cs.len();
    let routes = cs.routes();
    let mut overlaps = CovMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            overlaps.set(i, j, overlap_impedance(net, &routes[i], &routes[j])?);
        }
    }
    let cov = CovMatrix::from_fn(n, |i, j| xi * overlaps.get(i, j));
    let corr = CorrMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            overlaps.get(i, j) / (routes[i].impedance() * routes[j].impedance()).sqrt()
        }
    });
    Ok((cov, corr))
}

#[derive(Debug, Clone)]
pub struct MnpResult {
    /// Choice frequency per route (sums to exactly 1).
    pub probabilities: Vec<f64>,
    /// Binomial standard error per route, sqrt(p(1-p)/n).
    pub std_errors: Vec<f64>,
    /// Empirical covariance of the simulated route impedances.
    pub empirical_cov: CovMatrix,
    pub n_draws: u64,
}

/// Simulates the probit: per draw, each link impedance is sampled from
/// Normal(c_l, variance xi * c_l) with no truncation; the route of minimum
/// summed impedance is chosen (ties break to the lowest canonical index).
pub fn simulate_mnp_probabilities(
    net: &Network,
    cs: &ChoiceSet,
    spec: MnpSpec,
) -> Result<MnpResult> {
    MnpSpec::new(spec.xi, spec.n_draws, spec.seed)?;
    let n = cs.len();
    let n_links = net.links().len();
    // Per-route link indices into net.links().
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(n);
    for r in cs.routes() {
        let mut idx = Vec::with_capacity(r.links().len());
        for &id in r.links() {
            let pos = net
                .links()
                .iter()
                .position(|l| l.id == id)
                .ok_or(Error::UnknownLink(id))?;
            idx.push(pos);
        }
        members.push(idx);
    }
    let dists: Vec<Normal<f64>> = net
        .links()
        .iter()
        .map(|l| Normal::new(l.impedance, (spec.xi * l.impedance).sqrt()).expect("finite params"))
        .collect();
    let mut counts = vec![0u64; n];
    let mut sum = vec![0.0f64; n];
    let mut sum_xy = vec![0.0f64; n * n];
    let mut eps = vec![0.0f64; n_links];
    let mut imp = vec![0.0f64; n];
    for draw in 0..spec.n_draws {
        let mut rng = draw_rng(spec.seed, draw);
        for (e, d) in eps.iter_mut().zip(&dists) {
            *e = d.sample(&mut rng);
        }
        let mut best = 0usize;
        let mut best_c = f64::INFINITY;
        for (k, m) in members.iter().enumerate() {
            let c: f64 = m.iter().map(|&li| eps[li]).sum();
            imp[k] = c;
            if c < best_c {
                best_c = c;
                best = k;
            }
        }
        counts[best] += 1;
        for k in 0..n {
            sum[k] += imp[k];
            for kp in k..n {
                sum_xy[k * n + kp] += imp[k] * imp[kp];
            }
        }
    }
    let nd = spec.n_draws as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / nd).collect();
    let std_errors: Vec<f64> = probabilities
        .iter()
        .map(|&p| (p * (1.0 - p) / nd).sqrt())
        .collect();
    let empirical_cov = CovMatrix::from_fn(n, |i, j| {
        sum_xy[i * n + j] / nd - (sum[i] / nd) * (sum[j] / nd)
    });
    Ok(MnpResult {
        probabilities,
        std_errors,
        empirical_cov,
        n_draws: spec.n_draws,
    })
}
