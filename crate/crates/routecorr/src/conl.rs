//! Combination of nested logit: mixing-structure construction over shared
//! links, component weights, correlation-targeting nesting parameters,
//! mixture probabilities, and the closed-form correlation matrix with its
//! targeting residuals.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::gev::{NestSum, NsNest, EPS_DELTA};
use crate::matrix::CorrMatrix;
use crate::netgraph::{ChoiceSet, LinkId, Network};

/// One nest of a mixing component: either all member routes of one shared
/// link, or a lone route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Nest {
    Shared { link: LinkId, routes: Vec<usize> },
    Singleton { route: usize },
}

/// One NL kernel of the mixture: a partition of the choice set into
/// link-labeled nests plus singletons, covering every route exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixingComponent {
    pub nests: Vec<Nest>,
}

impl MixingComponent {
    pub fn shared_links(&self) -> impl Iterator<Item = (LinkId, &[usize])> {
        self.nests.iter().filter_map(|n| match n {
            Nest::Shared { link, routes } => Some((*link, routes.as_slice())),
            Nest::Singleton { .. } => None,
        })
    }

    pub fn has_shared_nest(&self) -> bool {
        self.shared_links().next().is_some()
    }

    pub fn contains_link(&self, link: LinkId) -> bool {
        self.shared_links().any(|(l, _)| l == link)
    }
}

/// Links contained in two or more routes, with their member route indices,
/// ordered by descending impedance (ties by ascending link id).
pub fn shared_links(net: &Network, cs: &ChoiceSet) -> Vec<(LinkId, Vec<usize>)> {
    let mut out: Vec<(LinkId, Vec<usize>)> = net
        .links()
        .iter()
        .filter_map(|l| {
            let members: Vec<usize> = cs
                .routes()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.contains_link(l.id))
                .map(|(k, _)| k)
                .collect();
            (members.len() >= 2).then_some((l.id, members))
        })
        .collect();
    out.sort_by(|a, b| {
        let ca = net.link_by_id(a.0).expect("known").impedance;
        let cb = net.link_by_id(b.0).expect("known").impedance;
        cb.total_cmp(&ca).then_with(|| a.0.cmp(&b.0))
    });
    out
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    let sa: BTreeSet<usize> = a.iter().copied().collect();
    b.iter().any(|x| sa.contains(x))
}

/// Builds the mixing components deterministically: shared links are scanned
/// by descending impedance and greedily colored on the conflict graph (two
/// links conflict when their member-route sets intersect); each color class
/// becomes a component. Every class is then densified by re-scanning all
/// shared links and adding any nest that fits without conflict, so a nest
/// may appear in more than one component. Uncovered routes complete each
/// component as singletons.
pub fn build_mixing_structure(net: &Network, cs: &ChoiceSet) -> Vec<MixingComponent> {
    let shared = shared_links(net, cs);
    if shared.is_empty() {
        return vec![MixingComponent {
            nests: (0..cs.len()).map(|k| Nest::Singleton { route: k }).collect(),
        }];
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, (_, routes)) in shared.iter().enumerate() {
        let slot = classes.iter_mut().find(|class| {
            class.iter().all(|&j| !intersects(routes, &shared[j].1))
        });
        match slot {
            Some(class) => class.push(i),
            None => classes.push(vec![i]),
        }
    }
    let mut components = Vec::new();
    for class in &classes {
        let mut picked: Vec<usize> = class.clone();
        let mut covered: BTreeSet<usize> = class
            .iter()
            .flat_map(|&j| shared[j].1.iter().copied())
            .collect();
        for (i, (_, routes)) in shared.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            if routes.iter().all(|r| !covered.contains(r)) {
                picked.push(i);
                covered.extend(routes.iter().copied());
            }
        }
        picked.sort();
        let mut nests: Vec<Nest> = picked
            .iter()
            .map(|&j| Nest::Shared {
                link: shared[j].0,
                routes: shared[j].1.clone(),
            })
            .collect();
        for k in 0..cs.len() {
            if !covered.contains(&k) {
                nests.push(Nest::Singleton { route: k });
            }
        }
        components.push(MixingComponent { nests });
    }
    components
}

/// Checks that every component partitions the full choice set (each route in
/// exactly one nest), that link-labeled nests match the link's membership,
/// and that every shared link of the choice set appears in at least one
/// component.
pub fn validate_structure(
    net: &Network,
    cs: &ChoiceSet,
    components: &[MixingComponent],
) -> Result<()> {
    if components.is_empty() {
        return Err(Error::MalformedModel("no mixing components".into()));
    }
    let shared = shared_links(net, cs);
    for (ci, comp) in components.iter().enumerate() {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for nest in &comp.nests {
            let routes: Vec<usize> = match nest {
                Nest::Shared { link, routes } => {
                    if routes.len() < 2 {
                        return Err(Error::MalformedModel(format!(
                            "component {}: nest for link {} has fewer than two routes",
                            ci, link
                        )));
                    }
                    let expected = shared
                        .iter()
                        .find(|(l, _)| l == link)
                        .map(|(_, m)| m.clone())
                        .ok_or_else(|| {
                            Error::MalformedModel(format!(
                                "component {}: link {} is not a shared link",
                                ci, link
                            ))
                        })?;
                    if *routes != expected {
                        return Err(Error::MalformedModel(format!(
                            "component {}: nest for link {} does not hold all member routes",
                            ci, link
                        )));
                    }
                    routes.clone()
                }
                Nest::Singleton { route } => vec![*route],
            };
            for r in routes {
                if !seen.insert(r) {
                    return Err(Error::MalformedModel(format!(
                        "component {}: route {} appears in two nests",
                        ci, r
                    )));
                }
            }
        }
        if seen.len() != cs.len() {
            return Err(Error::MalformedModel(format!(
                "component {} does not cover all routes",
                ci
            )));
        }
    }
    for (link, _) in &shared {
        if !components.iter().any(|c| c.contains_link(*link)) {
            return Err(Error::MalformedModel(format!(
                "shared link {} is not covered by any component",
                link
            )));
        }
    }
    Ok(())
}

/// Weight formulation for the mixing components: the statistic of the
/// component's shared-link impedances entering f(c^i); codes 24-27.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightVariant {
    /// Mean of c_l over the component's shared-link nests.
    MeanImpedance,
    /// Mean of c_l / n_l over the shared-link nests, with n_l the number of
    /// components the link appears in.
    MeanShared,
    /// Minimum of c_l / n_l.
    MinShared,
    /// Maximum of c_l / n_l.
    MaxShared,
}

impl WeightVariant {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            24 => Ok(WeightVariant::MeanImpedance),
            25 => Ok(WeightVariant::MeanShared),
            26 => Ok(WeightVariant::MinShared),
            27 => Ok(WeightVariant::MaxShared),
            other => Err(Error::Invalid(format!(
                "unknown weight variant {} (expected 24..=27)",
                other
            ))),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            WeightVariant::MeanImpedance => 24,
            WeightVariant::MeanShared => 25,
            WeightVariant::MinShared => 26,
            WeightVariant::MaxShared => 27,
        }
    }
}

/// Normalized component weights w^i proportional to e_i * f(c^i)^gamma,
/// where e_i marks components holding at least one link-labeled nest.
pub fn component_weights_gamma(
    components: &[MixingComponent],
    net: &Network,
    variant: WeightVariant,
    gamma: f64,
) -> Result<Vec<f64>> {
    if !gamma.is_finite() {
        return Err(Error::Invalid("gamma must be finite".into()));
    }
    let mut occurrences: BTreeMap<LinkId, usize> = BTreeMap::new();
    for comp in components {
        for (link, _) in comp.shared_links() {
            *occurrences.entry(link).or_insert(0) += 1;
        }
    }
    let mut raw = Vec::with_capacity(components.len());
    for comp in components {
        if !comp.has_shared_nest() {
            raw.push(0.0);
            continue;
        }
        let stats: Vec<f64> = comp
            .shared_links()
            .map(|(link, _)| {
                let c = net.link_by_id(link).expect("validated").impedance;
                match variant {
                    WeightVariant::MeanImpedance => c,
                    _ => c / occurrences[&link] as f64,
                }
            })
            .collect();
        let f = match variant {
            WeightVariant::MeanImpedance | WeightVariant::MeanShared => {
                stats.iter().sum::<f64>() / stats.len() as f64
            }
            WeightVariant::MinShared => stats.iter().copied().fold(f64::INFINITY, f64::min),
            WeightVariant::MaxShared => stats.iter().copied().fold(0.0, f64::max),
        };
        raw.push(f.powf(gamma));
    }
    let total: f64 = raw.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::MalformedModel(
            "no component with a link-labeled nest".into(),
        ));
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Component weights with the default exponent gamma = 1.
pub fn component_weights(
    components: &[MixingComponent],
    net: &Network,
    variant: WeightVariant,
) -> Result<Vec<f64>> {
    component_weights_gamma(components, net, variant, 1.0)
}

fn delta_for_link(c_l: f64, c_min: f64, wsum: f64, delta_min: f64) -> (f64, bool) {
    let t = 1.0 - c_l / (c_min * wsum);
    let raw = if t > 0.0 { t.sqrt() } else { f64::NEG_INFINITY };
    let delta = raw.max(delta_min).max(EPS_DELTA).min(1.0);
    (delta, delta != raw)
}

/// Correlation-targeting nesting parameters per shared link:
/// delta_l = sqrt(1 - c_l / (C_min * sum of weights of the components
/// containing l)) when the radicand is positive, else the lower bound;
/// always floored at the lower bound and the positivity floor.
pub fn nesting_deltas(
    components: &[MixingComponent],
    weights: &[f64],
    net: &Network,
    cs: &ChoiceSet,
    delta_min: f64,
) -> Result<BTreeMap<LinkId, f64>> {
    if !(delta_min.is_finite() && (0.0..=1.0).contains(&delta_min)) {
        return Err(Error::Invalid("delta_min must lie in [0, 1]".into()));
    }
    if weights.len() != components.len() {
        return Err(Error::DimensionMismatch(
            "one weight per component required".into(),
        ));
    }
    let c_min = cs.min_impedance();
    let mut deltas = BTreeMap::new();
    for (link, _) in shared_links(net, cs) {
        let wsum: f64 = components
            .iter()
            .zip(weights)
            .filter(|(c, _)| c.contains_link(link))
            .map(|(_, &w)| w)
            .sum();
        if wsum <= 0.0 {
            return Err(Error::MalformedModel(format!(
                "shared link {} carries no component weight",
                link
            )));
        }
        let c_l = net.link_by_id(link)?.impedance;
        deltas.insert(link, delta_for_link(c_l, c_min, wsum, delta_min).0);
    }
    Ok(deltas)
}

/// Assembled CoNL model.
#[derive(Debug, Clone)]
pub struct ConlStructure {
    pub components: Vec<MixingComponent>,
    pub weights: Vec<f64>,
    pub deltas: BTreeMap<LinkId, f64>,
    pub theta0: f64,
    pub delta_min: f64,
    pub c_min: f64,
}

/// Builds structure, weights, and deltas for a choice set in one step.
pub fn build_conl(
    net: &Network,
    cs: &ChoiceSet,
    variant: WeightVariant,
    delta_min: f64,
    theta0: f64,
) -> Result<ConlStructure> {
    if !(theta0.is_finite() && theta0 > 0.0) {
        return Err(Error::Invalid("theta0 must be positive".into()));
    }
    let components = build_mixing_structure(net, cs);
    validate_structure(net, cs, &components)?;
    let weights = component_weights(&components, net, variant)?;
    let deltas = nesting_deltas(&components, &weights, net, cs, delta_min)?;
    Ok(ConlStructure {
        components,
        weights,
        deltas,
        theta0,
        delta_min,
        c_min: cs.min_impedance(),
    })
}

impl ConlStructure {
    /// Sum of the weights of the components containing the shared link.
    pub fn link_weight_sum(&self, link: LinkId) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .filter(|(c, _)| c.contains_link(link))
            .map(|(_, &w)| w)
            .sum()
    }

    /// One mixing component as a two-level NL generating function
    /// (singleton nests carry delta 1).
    pub fn component_nest_sum(&self, i: usize, n_routes: usize) -> NestSum {
        let nests = self.components[i]
            .nests
            .iter()
            .map(|nest| match nest {
                Nest::Shared { link, routes } => NsNest {
                    weight: 1.0,
                    delta: self.deltas[link],
                    members: routes.iter().map(|&k| (k, 1.0)).collect(),
                },
                Nest::Singleton { route } => NsNest {
                    weight: 1.0,
                    delta: 1.0,
                    members: vec![(*route, 1.0)],
                },
            })
            .collect();
        NestSum {
            theta0: self.theta0,
            n_routes,
            nests,
        }
    }
}

/// Mixture probabilities: the weighted combination of the component NL
/// probability vectors.
pub fn conl_probabilities(s: &ConlStructure, impedances: &[f64]) -> Result<Vec<f64>> {
    let n = impedances.len();
    let mut p = vec![0.0; n];
    for (i, &w) in s.weights.iter().enumerate() {
        let pi = s.component_nest_sum(i, n).probabilities(impedances)?;
        for (acc, v) in p.iter_mut().zip(pi) {
            *acc += w * v;
        }
    }
    Ok(p)
}

/// Per-shared-link correlation-targeting residual:
/// r_l = (1 - delta_l^2) * sum of containing-component weights - c_l / C_min.
/// `clamped` marks links whose delta was not the unconstrained root.
#[derive(Debug, Clone, Copy)]
pub struct TargetingResidual {
    pub link: LinkId,
    pub residual: f64,
    pub clamped: bool,
}

/// Closed-form CoNL correlation matrix,
/// rho_kk' = sum over common shared links of (1 - delta_l^2) * sum of the
/// weights of the components containing l, with unit diagonal; plus the
/// targeting residuals per shared link.
pub fn conl_fcm(
    s: &ConlStructure,
    net: &Network,
    cs: &ChoiceSet,
) -> Result<(CorrMatrix, Vec<TargetingResidual>)> {
    let shared = shared_links(net, cs);
    let n = cs.len();
    let mut m = CorrMatrix::identity(n);
    for (link, members) in &shared {
        let delta = s.deltas[link];
        let wsum = s.link_weight_sum(*link);
        let add = (1.0 - delta * delta) * wsum;
        for (a, &k) in members.iter().enumerate() {
            for &kp in &members[a + 1..] {
                m.set(k, kp, m.get(k, kp) + add);
            }
        }
    }
    let mut residuals = Vec::with_capacity(shared.len());
    for (link, _) in &shared {
        let c_l = net.link_by_id(*link)?.impedance;
        let wsum = s.link_weight_sum(*link);
        let (delta, clamped) = delta_for_link(c_l, s.c_min, wsum, s.delta_min);
        residuals.push(TargetingResidual {
            link: *link,
            residual: (1.0 - delta * delta) * wsum - c_l / s.c_min,
            clamped,
        });
    }
    Ok((m, residuals))
}
