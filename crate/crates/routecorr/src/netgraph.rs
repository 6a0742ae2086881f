//! Network and route data model, impedance arithmetic, the line-oriented
//! network text format, and built-in test networks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type LinkId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    pub impedance: f64,
}

/// Directed graph with additive link impedances. Immutable after
/// construction; all operations on it are pure.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: BTreeSet<NodeId>,
    links: Vec<Link>,
    by_id: HashMap<LinkId, usize>,
    out: BTreeMap<NodeId, Vec<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links
    }
}

impl Network {
    /// Builds a network from a link list plus any isolated extra nodes.
    /// Impedances must be finite and nonnegative; zero is tolerated so that
    /// degenerate fixtures (e.g. a costless bridge) remain expressible, while
    /// the text loader enforces strict positivity.
    pub fn new(mut links: Vec<Link>, extra_nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        links.sort_by_key(|l| l.id);
        let mut nodes: BTreeSet<NodeId> = extra_nodes.into_iter().collect();
        let mut by_id = HashMap::new();
        for (idx, l) in links.iter().enumerate() {
            if !(l.impedance.is_finite() && l.impedance >= 0.0) {
                return Err(Error::BadParameter(
                    format!("link {}", l.id),
                    "impedance must be finite and nonnegative".into(),
                ));
            }
            if l.tail == l.head {
                return Err(Error::SelfLoop(l.id));
            }
            if by_id.insert(l.id, idx).is_some() {
                return Err(Error::DuplicateLink(l.id));
            }
            nodes.insert(l.tail);
            nodes.insert(l.head);
        }
        let mut out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (idx, l) in links.iter().enumerate() {
            out.entry(l.tail).or_default().push(idx);
        }
        Ok(Network {
            nodes,
            links,
            by_id,
            out,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Links in ascending id order.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains_node(&self, n: NodeId) -> bool {
        self.nodes.contains(&n)
    }

    pub fn link_by_id(&self, id: LinkId) -> Result<&Link> {
        self.by_id
            .get(&id)
            .map(|&i| &self.links[i])
            .ok_or(Error::UnknownLink(id))
    }

    /// Indices into `links()` of the links leaving `node`.
    pub fn out_links(&self, node: NodeId) -> &[usize] {
        self.out.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
}

impl OdPair {
    pub fn new(net: &Network, origin: NodeId, destination: NodeId) -> Result<Self> {
        if origin == destination {
            return Err(Error::InvalidOd {
                origin,
                destination,
                msg: "origin equals destination".into(),
            });
        }
        for n in [origin, destination] {
            if !net.contains_node(n) {
                return Err(Error::UnknownNode(n));
            }
        }
        Ok(OdPair {
            origin,
            destination,
        })
    }
}

/// Acyclic route as an ordered link sequence with cached impedance.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    links: Vec<LinkId>,
    impedance: f64,
}

impl Route {
    pub fn new(net: &Network, links: Vec<LinkId>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidRoute("empty link sequence".into()));
        }
        let mut visited = BTreeSet::new();
        let first = net.link_by_id(links[0])?;
        visited.insert(first.tail);
        let mut at = first.tail;
        for &id in &links {
            let l = net.link_by_id(id)?;
            if l.tail != at {
                return Err(Error::InvalidRoute(format!(
                    "link {} does not continue from node {}",
                    id, at
                )));
            }
            if !visited.insert(l.head) {
                return Err(Error::InvalidRoute(format!(
                    "node {} repeats (cycle)",
                    l.head
                )));
            }
            at = l.head;
        }
        let impedance = route_impedance(net, &links)?;
        Ok(Route { links, impedance })
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn impedance(&self) -> f64 {
        self.impedance
    }

    pub fn contains_link(&self, id: LinkId) -> bool {
        self.links.contains(&id)
    }

    pub fn origin(&self, net: &Network) -> NodeId {
        net.link_by_id(self.links[0]).expect("validated").tail
    }

    pub fn destination(&self, net: &Network) -> NodeId {
        net.link_by_id(*self.links.last().expect("nonempty"))
            .expect("validated")
            .head
    }
}

/// Sum of link impedances along an ordered link-id sequence.
pub fn route_impedance(net: &Network, links: &[LinkId]) -> Result<f64> {
    let mut c = 0.0;
    for &id in links {
        c += net.link_by_id(id)?.impedance;
    }
    Ok(c)
}

/// Sum of the impedances of links present in both routes. Equals the route
/// impedance when the routes coincide and zero when they are disjoint.
pub fn overlap_impedance(net: &Network, a: &Route, b: &Route) -> Result<f64> {
    let set: BTreeSet<LinkId> = a.links().iter().copied().collect();
    let mut c = 0.0;
    for &id in b.links() {
        if set.contains(&id) {
            c += net.link_by_id(id)?.impedance;
        }
    }
    Ok(c)
}

/// Routes of one od pair in canonical order (lexicographic by link-id
/// sequence), pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSet {
    od: OdPair,
    routes: Vec<Route>,
}

impl ChoiceSet {
    pub fn new(net: &Network, od: OdPair, mut routes: Vec<Route>) -> Result<Self> {
        if routes.is_empty() {
            return Err(Error::InvalidRoute("empty choice set".into()));
        }
        for r in &routes {
            if r.origin(net) != od.origin || r.destination(net) != od.destination {
                return Err(Error::InvalidRoute(format!(
                    "route {:?} does not connect {}-{}",
                    r.links(),
                    od.origin,
                    od.destination
                )));
            }
        }
        routes.sort_by(|a, b| a.links().cmp(b.links()));
        routes.dedup_by(|a, b| a.links() == b.links());
        Ok(ChoiceSet { od, routes })
    }

    pub fn od(&self) -> OdPair {
        self.od
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn impedances(&self) -> Vec<f64> {
        self.routes.iter().map(Route::impedance).collect()
    }

    pub fn min_impedance(&self) -> f64 {
        self.impedances().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// CSV rows: route_index, semicolon-joined link sequence, impedance.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("route_index,link_sequence,impedance\n");
        for (i, r) in self.routes.iter().enumerate() {
            let seq: Vec<String> = r.links().iter().map(|l| l.to_string()).collect();
            let _ = writeln!(s, "{},{},{}", i, seq.join(";"), r.impedance());
        }
        s
    }
}

/// Parses the line-oriented network format:
/// `node <id>`, `link <id> <tail> <head> <impedance>`, `od <o> <d>`,
/// with `#` comments. Returns the network and the od pair if declared.
pub fn load_network(reader: impl BufRead) -> Result<(Network, Option<OdPair>)> {
    let mut links = Vec::new();
    let mut extra_nodes = Vec::new();
    let mut od_decl: Option<(NodeId, NodeId, usize)> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let tok: Vec<&str> = text.split_whitespace().collect();
        let parse_id = |s: &str, what: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid {} '{}'", what, s),
            })
        };
        match tok[0] {
            "node" if tok.len() == 2 => {
                extra_nodes.push(parse_id(tok[1], "node id")?);
            }
            "link" if tok.len() == 5 => {
                let id = parse_id(tok[1], "link id")?;
                let tail = parse_id(tok[2], "tail node")?;
                let head = parse_id(tok[3], "head node")?;
                let impedance: f64 = tok[4].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid impedance '{}'", tok[4]),
                })?;
                if !(impedance.is_finite() && impedance > 0.0) {
                    return Err(Error::NonPositiveImpedance { line: lineno });
                }
                links.push(Link {
                    id,
                    tail,
                    head,
                    impedance,
                });
            }
            "od" if tok.len() == 3 => {
                od_decl = Some((
                    parse_id(tok[1], "origin")?,
                    parse_id(tok[2], "destination")?,
                    lineno,
                ));
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unrecognized record '{}'", text),
                });
            }
        }
    }
    let net = Network::new(links, extra_nodes)?;
    let od = match od_decl {
        Some((o, d, lineno)) => Some(OdPair::new(&net, o, d).map_err(|e| match e {
            Error::UnknownNode(n) => Error::Parse {
                line: lineno,
                msg: format!("od references undeclared node {}", n),
            },
            other => other,
        })?),
        None => None,
    };
    Ok((net, od))
}

/// Writes a network (and optionally its od pair) in the text format accepted
/// by [`load_network`]. Loading the output reproduces the network exactly.
pub fn serialize_network(net: &Network, od: Option<OdPair>) -> String {
    let mut s = String::new();
    for n in net.nodes() {
        let _ = writeln!(s, "node {}", n);
    }
    for l in net.links() {
        let _ = writeln!(s, "link {} {} {} {}", l.id, l.tail, l.head, l.impedance);
    }
    if let Some(od) = od {
        let _ = writeln!(s, "od {} {}", od.origin, od.destination);
    }
    s
}

fn require_positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::BadParameter(name.into(), "must be positive".into()))
    }
}

/// Four links, three routes: route 1 is a standalone link of impedance `c`;
/// routes 2 and 3 share a link of impedance `c - h` and then split into
/// distinct final links of impedance `h` each. Requires `c > h > 0`.
pub fn fourlink(c: f64, h: f64) -> Result<(Network, OdPair)> {
    require_positive("c", c)?;
    require_positive("h", h)?;
    if c <= h {
        return Err(Error::BadParameter("h".into(), "must satisfy h < c".into()));
    }
    let links = vec![
        Link { id: 1, tail: 1, head: 3, impedance: c },
        Link { id: 2, tail: 1, head: 2, impedance: c - h },
        Link { id: 3, tail: 2, head: 3, impedance: h },
        Link { id: 4, tail: 2, head: 3, impedance: h },
    ];
    let net = Network::new(links, [])?;
    let od = OdPair::new(&net, 1, 3)?;
    Ok((net, od))
}

/// Braess network: links 1 (1->2) and 2 (3->4) of impedance `a`, links
/// 3 (1->3) and 4 (2->4) of impedance `b`, bridge 5 (2->3) of impedance `h`
/// (`h = 0` allowed). Routes A = 1-2-4, B = 1-3-4, C = 1-2-3-4; the two
/// nonzero topological correlations are equal by construction.
pub fn braess(a: f64, b: f64, h: f64) -> Result<(Network, OdPair)> {
    require_positive("a", a)?;
    require_positive("b", b)?;
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::BadParameter(
            "h".into(),
            "must be finite and nonnegative".into(),
        ));
    }
    let links = vec![
        Link { id: 1, tail: 1, head: 2, impedance: a },
        Link { id: 2, tail: 3, head: 4, impedance: a },
        Link { id: 3, tail: 1, head: 3, impedance: b },
        Link { id: 4, tail: 2, head: 4, impedance: b },
        Link { id: 5, tail: 2, head: 3, impedance: h },
    ];
    let net = Network::new(links, [])?;
    let od = OdPair::new(&net, 1, 4)?;
    Ok((net, od))
}

/// The three routes of the Braess fixture (A = 1-2-4, B = 1-3-4,
/// C = 1-2-3-4) as an explicit choice set, independent of the efficiency
/// filter (the bridge is not an efficient link when `h = 0`).
pub fn braess_choice_set(net: &Network, od: OdPair) -> Result<ChoiceSet> {
    let routes = vec![
        Route::new(net, vec![1, 4])?,
        Route::new(net, vec![3, 2])?,
        Route::new(net, vec![1, 5, 2])?,
    ];
    ChoiceSet::new(net, od, routes)
}

/// Regular 2x2 mesh: a 3x3 node grid numbered row-major 1..9, with
/// rightward and downward links of impedance `c`; od 1-9.
pub fn mesh2x2(c: f64) -> Result<(Network, OdPair)> {
    require_positive("c", c)?;
    let node = |r: u32, col: u32| 3 * r + col + 1;
    let mut links = Vec::new();
    let mut id = 0;
    for r in 0..3 {
        for col in 0..3 {
            if col < 2 {
                id += 1;
                links.push(Link { id, tail: node(r, col), head: node(r, col + 1), impedance: c });
            }
            if r < 2 {
                id += 1;
                links.push(Link { id, tail: node(r, col), head: node(r + 1, col), impedance: c });
            }
        }
    }
    let net = Network::new(links, [])?;
    let od = OdPair::new(&net, 1, 9)?;
    Ok((net, od))
}

/// Mesh with access bypasses: three alternative connectors from node 1 into
/// a 3x3 grid (two two-link paths of cost 2 and one direct bypass of cost
/// 2.2), yielding 18 efficient routes for od 1-12.
pub fn mesh_bypass() -> Result<(Network, OdPair)> {
    let grid = [[9u32, 4, 5], [6, 7, 8], [10, 11, 12]];
    let mut links = vec![
        Link { id: 1, tail: 1, head: 2, impedance: 1.0 },
        Link { id: 2, tail: 2, head: 9, impedance: 1.0 },
        Link { id: 3, tail: 1, head: 3, impedance: 1.0 },
        Link { id: 4, tail: 3, head: 9, impedance: 1.0 },
        Link { id: 5, tail: 1, head: 9, impedance: 2.2 },
    ];
    let mut id = 5;
    for r in 0..3 {
        for c in 0..3 {
            if c < 2 {
                id += 1;
                links.push(Link { id, tail: grid[r][c], head: grid[r][c + 1], impedance: 1.0 });
            }
            if r < 2 {
                id += 1;
                links.push(Link { id, tail: grid[r][c], head: grid[r + 1][c], impedance: 1.0 });
            }
        }
    }
    let net = Network::new(links, [])?;
    let od = OdPair::new(&net, 1, 12)?;
    Ok((net, od))
}

const SIOUX_FALLS: &str = include_str!("../data/siouxfalls.net");

/// Sioux-Falls test network (24 nodes, 76 links) with the standard public
/// free-flow travel times as impedances; study od pair 1-15.
pub fn sioux_falls() -> Result<(Network, OdPair)> {
    let (net, od) = load_network(SIOUX_FALLS.as_bytes())?;
    Ok((net, od.expect("fixture declares its od pair")))
}

/// Built-in fixture dispatch by name with `params` overriding the defaults
/// (fourlink: c=10, h=1; braess: a=4, b=5, h=0; mesh2x2: c=1).
pub fn builtin_network(name: &str, params: &BTreeMap<String, f64>) -> Result<(Network, OdPair)> {
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    let allowed: &[&str] = match name {
        "fourlink" => &["c", "h"],
        "braess" => &["a", "b", "h"],
        "mesh2x2" => &["c"],
        _ => &[],
    };
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::BadParameter(
                key.clone(),
                format!("not a parameter of '{}'", name),
            ));
        }
    }
    match name {
        "fourlink" => fourlink(get("c", 10.0), get("h", 1.0)),
        "braess" => braess(get("a", 4.0), get("b", 5.0), get("h", 0.0)),
        "mesh2x2" => mesh2x2(get("c", 1.0)),
        "mesh_bypass" => mesh_bypass(),
        "sioux_falls" => sioux_falls(),
        other => Err(Error::UnknownBuiltin(other.into())),
    }
}

/// Resolves a network reference: a builtin name, or a path to a network
/// file. An explicit od pair overrides the builtin/file one.
pub fn resolve_network(
    name_or_path: &str,
    params: &BTreeMap<String, f64>,
    od_override: Option<(NodeId, NodeId)>,
) -> Result<(Network, OdPair)> {
    let builtin = ["fourlink", "braess", "mesh2x2", "mesh_bypass", "sioux_falls"];
    let (net, od) = if builtin.contains(&name_or_path) {
        let (net, od) = builtin_network(name_or_path, params)?;
        (net, Some(od))
    } else if Path::new(name_or_path).exists() {
        let file = std::fs::File::open(name_or_path)?;
        load_network(std::io::BufReader::new(file))?
    } else {
        return Err(Error::UnknownBuiltin(name_or_path.into()));
    };
    let od = match od_override {
        Some((o, d)) => OdPair::new(&net, o, d)?,
        None => od.ok_or_else(|| Error::Invalid("no od pair declared; pass --od".into()))?,
    };
    Ok((net, od))
}
