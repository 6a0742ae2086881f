//! Choice-set construction: efficient-route enumeration and Monte-Carlo
//! sampling of shortest routes under perturbed impedances.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::netgraph::{ChoiceSet, LinkId, Network, NodeId, OdPair, Route};
use crate::rng::draw_rng;

/// Sampled impedances are clamped below at this fraction of the nominal
/// link impedance so shortest paths stay well defined.
pub const IMPEDANCE_FLOOR_RATIO: f64 = 1e-9;

struct HeapEntry {
    cost: f64,
    node: NodeId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Reversed so the BinaryHeap pops the cheapest entry first; ties break
    // on the smaller node id for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn dijkstra(
    net: &Network,
    origin: NodeId,
    impedance: impl Fn(usize) -> f64,
) -> (HashMap<NodeId, f64>, HashMap<NodeId, usize>) {
    let mut cost: HashMap<NodeId, f64> = HashMap::new();
    let mut pred: HashMap<NodeId, usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    cost.insert(origin, 0.0);
    heap.push(HeapEntry { cost: 0.0, node: origin });
    while let Some(HeapEntry { cost: c, node }) = heap.pop() {
        if c > *cost.get(&node).unwrap_or(&f64::INFINITY) {
            continue;
        }
        for &li in net.out_links(node) {
            let l = &net.links()[li];
            let nc = c + impedance(li);
            if nc < *cost.get(&l.head).unwrap_or(&f64::INFINITY) {
                cost.insert(l.head, nc);
                pred.insert(l.head, li);
                heap.push(HeapEntry { cost: nc, node: l.head });
            }
        }
    }
    (cost, pred)
}

/// Exact single-source shortest-path costs under the link impedances.
/// Unreachable nodes are mapped to +inf.
pub fn min_costs_from(net: &Network, origin: NodeId) -> Result<HashMap<NodeId, f64>> {
    if !net.contains_node(origin) {
        return Err(Error::UnknownNode(origin));
    }
    let (cost, _) = dijkstra(net, origin, |li| net.links()[li].impedance);
    let mut full = cost;
    for &n in net.nodes() {
        full.entry(n).or_insert(f64::INFINITY);
    }
    Ok(full)
}

/// Subgraph of efficient links: links (i, j) whose min-cost labels from the
/// origin strictly increase, C_oi < C_oj. Strictly increasing labels make
/// the subgraph acyclic.
#[derive(Debug, Clone)]
pub struct EfficientSubgraph {
    origin: NodeId,
    labels: HashMap<NodeId, f64>,
    efficient: Vec<usize>,
}

impl EfficientSubgraph {
    pub fn build(net: &Network, origin: NodeId) -> Result<Self> {
        let labels = min_costs_from(net, origin)?;
        let efficient = net
            .links()
            .iter()
            .enumerate()
            .filter(|(_, l)| labels[&l.tail] < labels[&l.head])
            .map(|(i, _)| i)
            .collect();
        Ok(EfficientSubgraph {
            origin,
            labels,
            efficient,
        })
    }

    pub fn origin(&self) -> NodeId {
        self.origin
    }

    pub fn labels(&self) -> &HashMap<NodeId, f64> {
        &self.labels
    }

    /// Indices into `net.links()` of the efficient links.
    pub fn efficient_links(&self) -> &[usize] {
        &self.efficient
    }
}

/// All simple routes from origin to destination composed of efficient links
/// only, in canonical order.
pub fn enumerate_efficient_routes(net: &Network, od: OdPair) -> Result<ChoiceSet> {
    let sub = EfficientSubgraph::build(net, od.origin)?;
    let mut adj: HashMap<NodeId, Vec<usize>> = HashMap::new();
    for &li in sub.efficient_links() {
        adj.entry(net.links()[li].tail).or_default().push(li);
    }
    let mut found: Vec<Vec<LinkId>> = Vec::new();
    let mut stack: Vec<LinkId> = Vec::new();
    // The efficient subgraph is a DAG, so plain DFS enumerates each route once.
    fn dfs(
        net: &Network,
        adj: &HashMap<NodeId, Vec<usize>>,
        at: NodeId,
        dest: NodeId,
        stack: &mut Vec<LinkId>,
        found: &mut Vec<Vec<LinkId>>,
    ) {
        if at == dest {
            found.push(stack.clone());
            return;
        }
        if let Some(out) = adj.get(&at) {
            for &li in out {
                let l = &net.links()[li];
                stack.push(l.id);
                dfs(net, adj, l.head, dest, stack, found);
                stack.pop();
            }
        }
    }
    dfs(net, &adj, od.origin, od.destination, &mut stack, &mut found);
    if found.is_empty() {
        return Err(Error::Unreachable {
            origin: od.origin,
            destination: od.destination,
        });
    }
    let routes = found
        .into_iter()
        .map(|links| Route::new(net, links))
        .collect::<Result<Vec<_>>>()?;
    ChoiceSet::new(net, od, routes)
}

/// Union of the shortest routes found over `n_draws` perturbations of the
/// link impedances, c_l' ~ Normal(c_l, (cv * c_l)^2), clamped below at
/// [`IMPEDANCE_FLOOR_RATIO`] * c_l. Deterministic for a fixed seed; draw i
/// depends only on (seed, i).
pub fn sample_choice_set(
    net: &Network,
    od: OdPair,
    n_draws: u64,
    cv: f64,
    seed: u64,
) -> Result<ChoiceSet> {
    if n_draws < 1 {
        return Err(Error::Invalid("n_draws must be >= 1".into()));
    }
    if !(cv.is_finite() && cv >= 0.0) {
        return Err(Error::Invalid("cv must be finite and nonnegative".into()));
    }
    let mut routes: BTreeSet<Vec<LinkId>> = BTreeSet::new();
    let shortest = |imps: &dyn Fn(usize) -> f64| -> Result<Vec<LinkId>> {
        let (cost, pred) = dijkstra(net, od.origin, imps);
        if !cost.contains_key(&od.destination) {
            return Err(Error::Unreachable {
                origin: od.origin,
                destination: od.destination,
            });
        }
        let mut seq = Vec::new();
        let mut at = od.destination;
        while at != od.origin {
            let li = pred[&at];
            seq.push(net.links()[li].id);
            at = net.links()[li].tail;
        }
        seq.reverse();
        Ok(seq)
    };
    if cv == 0.0 {
        routes.insert(shortest(&|li| net.links()[li].impedance)?);
    } else {
        for draw in 0..n_draws {
            let mut rng = draw_rng(seed, draw);
            let perturbed: Vec<f64> = net
                .links()
                .iter()
                .map(|l| {
                    let dist = Normal::new(l.impedance, cv * l.impedance).expect("finite params");
                    let v: f64 = dist.sample(&mut rng);
                    v.max(IMPEDANCE_FLOOR_RATIO * l.impedance)
                })
                .collect();
            routes.insert(shortest(&|li| perturbed[li])?);
        }
    }
    let routes = routes
        .into_iter()
        .map(|links| Route::new(net, links))
        .collect::<Result<Vec<_>>>()?;
    ChoiceSet::new(net, od, routes)
}
