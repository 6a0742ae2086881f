//! Covariance and correlation of GEV models via a one-dimensional integral
//! over the cdf of a utility-difference, plus reduction of full matrices to
//! the utility-difference (reduced) space.
//!
//! For a degree-1 generating function G and alternatives k, k', the choice
//! probability of k' in the restricted binary problem with y_k = exp(-x),
//! y_k' = 1 equals the cdf F(x) of D = eps_k - eps_k' (standardized scale).
//! The second moment of D is integrated by parts,
//! E[D^2] = 2 int_0^X x (1 - F) dx - 2 int_{-X}^0 x F dx,
//! which needs only G and its first partial derivative, and the covariance
//! follows from Cov = (Var_k + Var_k' - Var(D)) / 2.

use crate::error::{Error, Result};
use crate::gev::NestSum;
use crate::matrix::{CorrMatrix, CovMatrix, SymMatrix};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const PI2_6: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Grid for the covariance integral, in standardized units (x measured in
/// multiples of theta0). A finer step is used on the core interval around
/// the origin, where small nesting parameters make the cdf steep; the core
/// step additionally shrinks with the smallest delta of the model.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub half_width: f64,
    pub core_half_width: f64,
    pub outer_step: f64,
    /// Base core step; defaults to the outer step when absent. The resolved
    /// core step is the minimum of this and min_delta / 5.
    pub core_step: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            half_width: 40.0,
            core_half_width: 4.0,
            outer_step: 0.02,
            core_step: None,
        }
    }
}

impl QuadratureSpec {
    /// Same truncation with all steps divided by `factor` (node-count
    /// refinement for convergence checks).
    pub fn refined(&self, factor: f64) -> Self {
        QuadratureSpec {
            half_width: self.half_width,
            core_half_width: self.core_half_width,
            outer_step: self.outer_step / factor,
            core_step: Some(self.core_step.unwrap_or(self.outer_step) / factor),
        }
    }

    /// Grid with approximately `nodes` base points over the full interval.
    pub fn with_nodes(nodes: usize) -> Result<Self> {
        if nodes < 5 {
            return Err(Error::Invalid("need at least 5 quadrature nodes".into()));
        }
        let spec = QuadratureSpec::default();
        Ok(QuadratureSpec {
            outer_step: 2.0 * spec.half_width / (nodes - 1) as f64,
            ..spec
        })
    }

    fn resolved_core_step(&self, min_delta: f64) -> f64 {
        let base = self.core_step.unwrap_or(self.outer_step);
        base.min(min_delta / 5.0).max(1e-9)
    }
}

/// Mean of the Gumbel marginal of alternative k:
/// E[eps_k] = theta0 * (gamma + ln a_k) with a_k the generating function at
/// the k-th unit vector.
pub fn marginal_mean(ns: &NestSum, k: usize) -> Result<f64> {
    let a = ns.marginal_a(k);
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::MalformedModel(format!(
            "marginal generating value a_{} = {} is not positive",
            k, a
        )));
    }
    Ok(ns.theta0 * (EULER_GAMMA + a.ln()))
}

/// Per-pair view of the nests touching k or k'. Only those nests contribute
/// when every other coordinate of y is zero.
struct PairCdf {
    nests: Vec<PairNest>,
    den: Vec<f64>,
    num: Vec<f64>,
}

struct PairNest {
    lnw: f64,
    delta: f64,
    lg_k: Option<f64>,
    lg_kp: Option<f64>,
}

impl PairCdf {
    fn new(ns: &NestSum, k: usize, kp: usize) -> Self {
        let mut nests = Vec::new();
        for nest in &ns.nests {
            let gk = nest.members.iter().find(|&&(m, _)| m == k).map(|&(_, g)| g);
            let gkp = nest
                .members
                .iter()
                .find(|&&(m, _)| m == kp)
                .map(|&(_, g)| g);
            if gk.is_none() && gkp.is_none() {
                continue;
            }
            nests.push(PairNest {
                lnw: nest.weight.ln(),
                delta: nest.delta,
                lg_k: gk.map(f64::ln),
                lg_kp: gkp.map(f64::ln),
            });
        }
        let cap = nests.len();
        PairCdf {
            nests,
            den: Vec::with_capacity(cap),
            num: Vec::with_capacity(cap),
        }
    }

    /// F(x) = P(eps_k - eps_k' <= x) for the standardized pair problem.
    fn eval(&mut self, x: f64) -> f64 {
        self.den.clear();
        self.num.clear();
        for nest in &self.nests {
            let a = nest.lg_k.map(|g| (g - x) / nest.delta);
            let b = nest.lg_kp.map(|g| g / nest.delta);
            let big_l = match (a, b) {
                (Some(a), Some(b)) => {
                    let m = a.max(b);
                    m + ((a - m).exp() + (b - m).exp()).ln()
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!(),
            };
            self.den.push(nest.lnw + nest.delta * big_l);
            if let Some(b) = b {
                self.num.push(nest.lnw + (nest.delta - 1.0) * big_l + b);
            }
        }
        let lse = |vals: &[f64]| {
            let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
        };
        (lse(&self.num) - lse(&self.den)).exp()
    }
}

/// Composite Simpson rule on a uniform grid of (at least) `step_hint`
/// resolution with an even interval count.
fn simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, step_hint: f64) -> f64 {
    let mut n = ((b - a) / step_hint).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Covariance of the random terms of alternatives k and k' under the GEV
/// model, via the utility-difference cdf integral. The result carries the
/// theta0^2 scale of the model.
pub fn gev_covariance(ns: &NestSum, k: usize, kp: usize, quad: &QuadratureSpec) -> Result<f64> {
    if k == kp {
        return Err(Error::Invalid("covariance requires k != k'".into()));
    }
    if k >= ns.n_routes || kp >= ns.n_routes {
        return Err(Error::DimensionMismatch(format!(
            "pair ({}, {}) out of range for {} routes",
            k, kp, ns.n_routes
        )));
    }
    let m_k = marginal_mean(ns, k)? / ns.theta0;
    let m_kp = marginal_mean(ns, kp)? / ns.theta0;
    let h_core = quad.resolved_core_step(ns.min_delta());
    let h_outer = quad.outer_step;
    let xc = quad.core_half_width.min(quad.half_width);
    let x_max = quad.half_width;
    let mut cdf = PairCdf::new(ns, k, kp);
    // Truncation sanity: the integrand must have decayed at the endpoints.
    let tail_hi = 1.0 - cdf.eval(x_max);
    let tail_lo = cdf.eval(-x_max);
    if tail_hi.abs() > 1e-9 || tail_lo.abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "quadrature truncation too narrow (tails {:.3e}, {:.3e})",
            tail_lo, tail_hi
        )));
    }
    let mut i_pos = simpson(|x| x * (1.0 - cdf.eval(x)), 0.0, xc, h_core);
    i_pos += simpson(|x| x * (1.0 - cdf.eval(x)), xc, x_max, h_outer);
    let mut i_neg = simpson(|x| x * cdf.eval(x), -xc, 0.0, h_core);
    i_neg += simpson(|x| x * cdf.eval(x), -x_max, -xc, h_outer);
    let e_d2 = 2.0 * i_pos - 2.0 * i_neg;
    let cov_std = PI2_6 - 0.5 * e_d2 + 0.5 * (m_k - m_kp) * (m_k - m_kp);
    Ok(ns.theta0 * ns.theta0 * cov_std)
}

/// Full correlation matrix of the model: every GEV marginal has variance
/// pi^2 theta0^2 / 6, so rho = Cov / (pi^2 theta0^2 / 6) with unit diagonal.
pub fn gev_fcm(ns: &NestSum, quad: &QuadratureSpec) -> Result<CorrMatrix> {
    let n = ns.n_routes;
    let scale = PI2_6 * ns.theta0 * ns.theta0;
    let mut m = CorrMatrix::identity(n);
    for k in 0..n {
        for kp in (k + 1)..n {
            m.set(k, kp, gev_covariance(ns, k, kp, quad)? / scale);
        }
    }
    Ok(m)
}

/// Covariance of utility differences against reference alternative r,
/// normalized to correlations. Input is a covariance matrix (a correlation
/// matrix is acceptable for homoscedastic models); output has dimension
/// n - 1 with rows ordered as the non-reference alternatives.
pub fn reduce_to_rcm(cov: &CovMatrix, r: usize) -> Result<CorrMatrix> {
    let n = cov.n();
    if n < 2 {
        return Err(Error::Invalid("need at least two alternatives".into()));
    }
    if r >= n {
        return Err(Error::Invalid(format!("reference {} out of range", r)));
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != r).collect();
    let scale = (0..n).map(|i| cov.get(i, i)).fold(0.0, f64::max);
    let dvar: Vec<f64> = others
        .iter()
        .map(|&i| cov.get(i, i) - 2.0 * cov.get(i, r) + cov.get(r, r))
        .collect();
    for (pos, &v) in dvar.iter().enumerate() {
        if !(v.is_finite() && v > 1e-12 * scale) {
            return Err(Error::ZeroDifferenceVariance(others[pos]));
        }
    }
    let m = SymMatrix::from_fn(others.len(), |a, b| {
        let (i, j) = (others[a], others[b]);
        let c = cov.get(i, j) - cov.get(i, r) - cov.get(j, r) + cov.get(r, r);
        c / (dvar[a] * dvar[b]).sqrt()
    });
    Ok(m)
}

/// Reference-alternative search for the reduced space: for each candidate
/// reference, the identity-covariance (MNL) reduction is scored against the
/// reduced target by mean squared entry difference; candidates are ranked
/// ascending (stable in the original index order) and the middle-ranked
/// reference is returned. References whose reduction is degenerate are
/// ranked last.
pub fn find_rcm_reference(target_cov: &CovMatrix) -> Result<usize> {
    let n = target_cov.n();
    if n < 2 {
        return Err(Error::Invalid("need at least two alternatives".into()));
    }
    let ident = SymMatrix::identity(n);
    let mut scored: Vec<(usize, f64)> = (0..n)
        .map(|r| {
            let mse = match (reduce_to_rcm(target_cov, r), reduce_to_rcm(&ident, r)) {
                (Ok(t), Ok(m)) => t.mean_sq_diff(&m),
                _ => f64::INFINITY,
            };
            (r, mse)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    let pick = scored[n / 2].0;
    if scored[n / 2].1.is_infinite() {
        return Err(Error::Invalid(
            "no valid reference alternative found".into(),
        ));
    }
    Ok(pick)
}
