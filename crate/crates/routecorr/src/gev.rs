//! Closed-form GEV models: multinomial logit, link-nested logit (a
//! cross-nested specialization with one nest per link), and paired
//! combinatorial logit. All variants reduce to a common "nest sum"
//! generating function, evaluated in log space.

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::netgraph::{overlap_impedance, ChoiceSet, LinkId, Network};

/// Positivity floor applied to every nesting parameter, including when the
/// user-facing lower bound is zero. Null nesting parameters would make
/// within-nest choices deterministic.
pub const EPS_DELTA: f64 = 1e-3;

/// Overall Gumbel scale from the coefficient of variation at the
/// minimum-cost route: theta0 = sqrt(6) * cv * C_min / pi, so that the
/// Gumbel variance pi^2 theta0^2 / 6 equals (cv * C_min)^2.
pub fn theta0_from_cv(cv: f64, c_od_min: f64) -> Result<f64> {
    if !(cv.is_finite() && cv > 0.0) {
        return Err(Error::Invalid("cv must be positive".into()));
    }
    if !(c_od_min.is_finite() && c_od_min > 0.0) {
        return Err(Error::Invalid("C_od_min must be positive".into()));
    }
    Ok(6.0f64.sqrt() * cv * c_od_min / std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    /// Every nest uses the lower bound itself.
    Constant,
    /// One minus the arithmetic mean of the inclusion coefficients over the
    /// routes sharing the link.
    Arithmetic,
    /// One minus the geometric mean of the inclusion coefficients over the
    /// routes sharing the link.
    Geometric,
}

#[derive(Debug, Clone, Copy)]
pub struct DeltaRule {
    pub kind: DeltaKind,
    pub delta_min: f64,
}

impl DeltaRule {
    pub fn new(kind: DeltaKind, delta_min: f64) -> Result<Self> {
        if !(delta_min.is_finite() && (0.0..=1.0).contains(&delta_min)) {
            return Err(Error::Invalid("delta_min must lie in [0, 1]".into()));
        }
        Ok(DeltaRule { kind, delta_min })
    }

    /// Applies the lower bound and the positivity floor to a raw rule value.
    pub fn clamp(&self, raw: f64) -> f64 {
        raw.max(self.delta_min).max(EPS_DELTA).min(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct CnlNest {
    /// Link id the nest is labeled with.
    pub id: LinkId,
    pub delta: f64,
    /// (route index, inclusion coefficient alpha) for member routes.
    pub alphas: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub enum GevModel {
    Mnl {
        theta0: f64,
    },
    Cnl {
        theta0: f64,
        n_routes: usize,
        nests: Vec<CnlNest>,
    },
    Pcl {
        theta0: f64,
        /// Pairwise similarities, zero diagonal.
        sigma: SymMatrix,
    },
}

impl GevModel {
    pub fn theta0(&self) -> f64 {
        match self {
            GevModel::Mnl { theta0 } => *theta0,
            GevModel::Cnl { theta0, .. } => *theta0,
            GevModel::Pcl { theta0, .. } => *theta0,
        }
    }

    /// The model as a generic nest sum over `n_routes` alternatives.
    pub fn to_nest_sum(&self, n_routes: usize) -> Result<NestSum> {
        match self {
            GevModel::Mnl { theta0 } => Ok(NestSum {
                theta0: *theta0,
                n_routes,
                nests: vec![NsNest {
                    weight: 1.0,
                    delta: 1.0,
                    members: (0..n_routes).map(|k| (k, 1.0)).collect(),
                }],
            }),
            GevModel::Cnl {
                theta0,
                n_routes: nr,
                nests,
            } => {
                if *nr != n_routes {
                    return Err(Error::DimensionMismatch(format!(
                        "model has {} routes, requested {}",
                        nr, n_routes
                    )));
                }
                Ok(NestSum {
                    theta0: *theta0,
                    n_routes,
                    nests: nests
                        .iter()
                        .map(|nest| NsNest {
                            weight: 1.0,
                            delta: nest.delta,
                            members: nest
                                .alphas
                                .iter()
                                .filter(|&&(_, a)| a > 0.0)
                                .copied()
                                .collect(),
                        })
                        .collect(),
                })
            }
            GevModel::Pcl { theta0, sigma } => {
                if sigma.n() != n_routes {
                    return Err(Error::DimensionMismatch(format!(
                        "model has {} routes, requested {}",
                        sigma.n(),
                        n_routes
                    )));
                }
                let mut nests = Vec::new();
                for k in 0..n_routes {
                    for kp in (k + 1)..n_routes {
                        let s = sigma.get(k, kp);
                        nests.push(NsNest {
                            weight: 1.0 - s,
                            delta: 1.0 - s,
                            members: vec![(k, 1.0), (kp, 1.0)],
                        });
                    }
                }
                Ok(NestSum {
                    theta0: *theta0,
                    n_routes,
                    nests,
                })
            }
        }
    }

    pub fn probabilities(&self, impedances: &[f64]) -> Result<Vec<f64>> {
        self.to_nest_sum(impedances.len())?.probabilities(impedances)
    }
}

/// One nest of the generic generating function
/// G(y) = sum_j w_j * (sum_{k in j} (g_jk y_k)^(1/delta_j))^(delta_j),
/// homogeneous of degree 1 in y_k = exp(-C_k / theta0).
#[derive(Debug, Clone)]
pub struct NsNest {
    pub weight: f64,
    pub delta: f64,
    /// (route index, inclusion coefficient) with positive coefficients only.
    pub members: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct NestSum {
    pub theta0: f64,
    pub n_routes: usize,
    pub nests: Vec<NsNest>,
}

fn logsumexp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl NestSum {
    pub fn min_delta(&self) -> f64 {
        self.nests
            .iter()
            .map(|n| n.delta)
            .fold(1.0, f64::min)
    }

    /// Generating-function value at the k-th unit vector,
    /// a_k = sum_{j containing k} w_j g_jk.
    pub fn marginal_a(&self, k: usize) -> f64 {
        self.nests
            .iter()
            .flat_map(|n| {
                n.members
                    .iter()
                    .filter(move |&&(m, _)| m == k)
                    .map(move |&(_, g)| n.weight * g)
            })
            .sum()
    }

    /// Choice probabilities p_k = y_k dG/dy_k / G evaluated in log space
    /// with the impedances shifted by their minimum (probabilities are
    /// invariant to a common shift by degree-1 homogeneity).
    pub fn probabilities(&self, impedances: &[f64]) -> Result<Vec<f64>> {
        let n = impedances.len();
        if n != self.n_routes {
            return Err(Error::DimensionMismatch(format!(
                "{} impedances for {} routes",
                n, self.n_routes
            )));
        }
        let c_min = impedances.iter().copied().fold(f64::INFINITY, f64::min);
        let ly: Vec<f64> = impedances
            .iter()
            .map(|c| -(c - c_min) / self.theta0)
            .collect();
        let mut den_terms = Vec::with_capacity(self.nests.len());
        let mut num_terms: Vec<Vec<f64>> = vec![Vec::new(); n];
        for nest in &self.nests {
            if nest.members.is_empty() {
                continue;
            }
            let lnw = nest.weight.ln();
            let t: Vec<(usize, f64)> = nest
                .members
                .iter()
                .map(|&(k, g)| (k, (g.ln() + ly[k]) / nest.delta))
                .collect();
            let big_l = logsumexp(&t.iter().map(|&(_, v)| v).collect::<Vec<_>>());
            den_terms.push(lnw + nest.delta * big_l);
            for &(k, v) in &t {
                num_terms[k].push(lnw + (nest.delta - 1.0) * big_l + v);
            }
        }
        let lden = logsumexp(&den_terms);
        if !lden.is_finite() {
            return Err(Error::MalformedModel(
                "generating function vanishes".into(),
            ));
        }
        let mut p: Vec<f64> = Vec::with_capacity(n);
        for k in 0..n {
            if num_terms[k].is_empty() {
                return Err(Error::MalformedModel(format!(
                    "route {} has no positive nest contribution",
                    k
                )));
            }
            p.push((logsumexp(&num_terms[k]) - lden).exp());
        }
        let s: f64 = p.iter().sum();
        for v in &mut p {
            *v /= s;
        }
        Ok(p)
    }
}

/// Multinomial logit: p_k proportional to exp(-C_k / theta0).
pub fn mnl_probabilities(impedances: &[f64], theta0: f64) -> Vec<f64> {
    assert!(theta0 > 0.0, "theta0 must be positive");
    let c_min = impedances.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = impedances
        .iter()
        .map(|c| (-(c - c_min) / theta0).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Link-nested logit: one nest per link used by at least one route, with
/// inclusion coefficients alpha_kl = c_l / C_k for member routes (rows sum
/// to one by the impedance identity) and nesting parameters from the rule.
pub fn build_lnl(
    net: &Network,
    cs: &ChoiceSet,
    rule: DeltaRule,
    theta0: f64,
) -> Result<GevModel> {
    if cs.is_empty() {
        return Err(Error::Invalid("empty choice set".into()));
    }
    if !(theta0.is_finite() && theta0 > 0.0) {
        return Err(Error::Invalid("theta0 must be positive".into()));
    }
    let routes = cs.routes();
    let mut nests = Vec::new();
    for link in net.links() {
        let alphas: Vec<(usize, f64)> = routes
            .iter()
            .enumerate()
            .filter(|(_, r)| r.contains_link(link.id))
            .map(|(k, r)| (k, link.impedance / r.impedance()))
            .collect();
        if alphas.is_empty() {
            continue;
        }
        let raw = match rule.kind {
            DeltaKind::Constant => rule.delta_min,
            DeltaKind::Arithmetic => {
                let mean = alphas.iter().map(|&(_, a)| a).sum::<f64>() / alphas.len() as f64;
                1.0 - mean
            }
            DeltaKind::Geometric => {
                let lg = alphas.iter().map(|&(_, a)| a.ln()).sum::<f64>() / alphas.len() as f64;
                1.0 - lg.exp()
            }
        };
        nests.push(CnlNest {
            id: link.id,
            delta: rule.clamp(raw),
            alphas,
        });
    }
    Ok(GevModel::Cnl {
        theta0,
        n_routes: cs.len(),
        nests,
    })
}

/// Cross-nested probabilities with theta_l = delta_l * theta0 and the
/// convention 0^(1/delta) = 0 for zero-inclusion terms.
pub fn cnl_probabilities(model: &GevModel, impedances: &[f64]) -> Result<Vec<f64>> {
    match model {
        GevModel::Cnl { .. } => model.probabilities(impedances),
        _ => Err(Error::MalformedModel("expected a CNL model".into())),
    }
}

/// Paired combinatorial logit with similarities from topological overlap:
/// sigma_kk' = C_kk' / (C_k + C_k' - C_kk').
pub fn build_pcl(net: &Network, cs: &ChoiceSet, theta0: f64) -> Result<GevModel> {
    if cs.len() < 2 {
        return Err(Error::Invalid("PCL needs at least two routes".into()));
    }
    if !(theta0.is_finite() && theta0 > 0.0) {
        return Err(Error::Invalid("theta0 must be positive".into()));
    }
    let routes = cs.routes();
    let n = cs.len();
    let mut sigma = SymMatrix::zeros(n);
    for k in 0..n {
        for kp in (k + 1)..n {
            let ov = overlap_impedance(net, &routes[k], &routes[kp])?;
            let s = ov / (routes[k].impedance() + routes[kp].impedance() - ov);
            if s >= 1.0 - 1e-12 {
                return Err(Error::DegenerateSimilarity(k, kp));
            }
            sigma.set(k, kp, s);
        }
    }
    Ok(GevModel::Pcl { theta0, sigma })
}

/// Paired combinatorial probabilities on scaled impedances C_k / theta0.
pub fn pcl_probabilities(model: &GevModel, impedances: &[f64]) -> Result<Vec<f64>> {
    match model {
        GevModel::Pcl { .. } => model.probabilities(impedances),
        _ => Err(Error::MalformedModel("expected a PCL model".into())),
    }
}
