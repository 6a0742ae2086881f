use std::collections::HashMap;

use routecorr::netgraph::{
    load_network, mesh2x2, mesh_bypass, serialize_network, sioux_falls, Link, Network, NodeId,
    OdPair,
};
use routecorr::routegen::{
    enumerate_efficient_routes, min_costs_from, sample_choice_set, EfficientSubgraph,
};
use routecorr::Error;

/// Independent label-correcting (Bellman-Ford style) shortest-path oracle.
fn label_correcting(net: &Network, origin: NodeId) -> HashMap<NodeId, f64> {
    let mut cost: HashMap<NodeId, f64> =
        net.nodes().iter().map(|&n| (n, f64::INFINITY)).collect();
    cost.insert(origin, 0.0);
    for _ in 0..net.n_nodes() {
        let mut changed = false;
        for l in net.links() {
            let via = cost[&l.tail] + l.impedance;
            if via < cost[&l.head] {
                cost.insert(l.head, via);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    cost
}

#[test]
fn min_costs_single_link() {
    let net = Network::new(
        vec![Link { id: 1, tail: 1, head: 2, impedance: 3.0 }],
        [],
    )
    .unwrap();
    let c = min_costs_from(&net, 1).unwrap();
    assert_eq!(c[&1], 0.0);
    assert_eq!(c[&2], 3.0);
}

#[test]
fn min_costs_mesh_corner() {
    let (net, _) = mesh2x2(1.0).unwrap();
    let c = min_costs_from(&net, 1).unwrap();
    assert_eq!(c[&9], 4.0);
    assert_eq!(c[&5], 2.0);
}

#[test]
fn min_costs_marks_unreachable_with_infinity() {
    let net = Network::new(
        vec![Link { id: 1, tail: 1, head: 2, impedance: 1.0 }],
        [7],
    )
    .unwrap();
    let c = min_costs_from(&net, 1).unwrap();
    assert!(c[&7].is_infinite());
    assert!(matches!(min_costs_from(&net, 99), Err(Error::UnknownNode(99))));
}

#[test]
fn sioux_falls_costs_match_independent_oracle() {
    let (net, _) = sioux_falls().unwrap();
    let dijkstra = min_costs_from(&net, 1).unwrap();
    let oracle = label_correcting(&net, 1);
    for (&n, &c) in &oracle {
        assert!((dijkstra[&n] - c).abs() < 1e-12, "node {}", n);
    }
    assert_eq!(dijkstra[&15], 23.0);
}

#[test]
fn efficient_subgraph_labels_increase() {
    let (net, od) = mesh_bypass().unwrap();
    let sub = EfficientSubgraph::build(&net, od.origin).unwrap();
    for &li in sub.efficient_links() {
        let l = &net.links()[li];
        assert!(sub.labels()[&l.tail] < sub.labels()[&l.head]);
    }
}

#[test]
fn mesh_has_six_efficient_routes() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    assert_eq!(cs.len(), 6);
    let expected: Vec<Vec<u32>> = vec![
        vec![1, 3, 5, 10],
        vec![1, 4, 8, 10],
        vec![1, 4, 9, 12],
        vec![2, 6, 8, 10],
        vec![2, 6, 9, 12],
        vec![2, 7, 11, 12],
    ];
    let got: Vec<Vec<u32>> = cs.routes().iter().map(|r| r.links().to_vec()).collect();
    assert_eq!(got, expected);
}

#[test]
fn mesh_bypass_has_eighteen_efficient_routes() {
    let (net, od) = mesh_bypass().unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    assert_eq!(cs.len(), 18);
}

#[test]
fn sioux_falls_efficient_route_count() {
    // The literature reports 16 efficient routes for od 1-15; with the shipped
    // standard free-flow impedances the strict-inequality rule yields 17.
    // The discrepancy is documented in the README and reported by the
    // acceptance suite.
    let (net, od) = sioux_falls().unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    assert_eq!(cs.len(), 17);
}

#[test]
fn route_impedances_bounded_below_by_min_cost() {
    let (net, od) = mesh_bypass().unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let c_min = min_costs_from(&net, od.origin).unwrap()[&od.destination];
    assert!(cs.routes().iter().all(|r| r.impedance() >= c_min - 1e-12));
    assert!(cs
        .routes()
        .iter()
        .any(|r| (r.impedance() - c_min).abs() < 1e-12));
}

#[test]
fn enumeration_independent_of_link_order() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let baseline = enumerate_efficient_routes(&net, od).unwrap();
    // Rebuild the same network from a reversed link list via the text format.
    let mut text = String::new();
    for l in net.links().iter().rev() {
        text.push_str(&format!("link {} {} {} {}\n", l.id, l.tail, l.head, l.impedance));
    }
    let (net2, _) = load_network(text.as_bytes()).unwrap();
    let od2 = OdPair::new(&net2, od.origin, od.destination).unwrap();
    let cs2 = enumerate_efficient_routes(&net2, od2).unwrap();
    let a: Vec<Vec<u32>> = baseline.routes().iter().map(|r| r.links().to_vec()).collect();
    let b: Vec<Vec<u32>> = cs2.routes().iter().map(|r| r.links().to_vec()).collect();
    assert_eq!(a, b);
}

#[test]
fn unreachable_destination_is_error() {
    let net = Network::new(
        vec![Link { id: 1, tail: 1, head: 2, impedance: 1.0 }],
        [7],
    )
    .unwrap();
    let od = OdPair::new(&net, 1, 7).unwrap();
    assert!(matches!(
        enumerate_efficient_routes(&net, od),
        Err(Error::Unreachable { .. })
    ));
}

#[test]
fn sampling_with_zero_cv_returns_shortest_route() {
    let (net, od) = sioux_falls().unwrap();
    let cs = sample_choice_set(&net, od, 100, 0.0, 42).unwrap();
    assert_eq!(cs.len(), 1);
    assert_eq!(cs.routes()[0].impedance(), 23.0);
}

#[test]
fn sampling_covers_all_efficient_routes() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let efficient = enumerate_efficient_routes(&net, od).unwrap();
    let sampled = sample_choice_set(&net, od, 10_000, 0.2, 42).unwrap();
    for r in efficient.routes() {
        assert!(
            sampled.routes().iter().any(|s| s.links() == r.links()),
            "missing route {:?}",
            r.links()
        );
    }
}

#[test]
fn sampling_is_deterministic_for_fixed_seed() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let a = sample_choice_set(&net, od, 500, 0.3, 7).unwrap();
    let b = sample_choice_set(&net, od, 500, 0.3, 7).unwrap();
    assert_eq!(a, b);
    let c = sample_choice_set(&net, od, 500, 0.3, 8).unwrap();
    // Different seed may change the set; determinism of the same seed is
    // the contract under test.
    assert_eq!(serialize_network(&net, Some(od)), serialize_network(&net, Some(od)));
    let _ = c;
}

#[test]
fn sampled_routes_are_valid() {
    let (net, od) = mesh_bypass().unwrap();
    let cs = sample_choice_set(&net, od, 2_000, 0.4, 11).unwrap();
    for r in cs.routes() {
        assert_eq!(r.origin(&net), od.origin);
        assert_eq!(r.destination(&net), od.destination);
    }
}
