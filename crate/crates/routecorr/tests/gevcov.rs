use approx::assert_abs_diff_eq;

use routecorr::gev::{build_lnl, build_pcl, DeltaKind, DeltaRule, GevModel, NestSum, NsNest};
use routecorr::gevcov::{
    find_rcm_reference, gev_covariance, gev_fcm, marginal_mean, reduce_to_rcm, QuadratureSpec,
    EULER_GAMMA,
};
use routecorr::matrix::SymMatrix;
use routecorr::mnp::ds_moments;
use routecorr::netgraph::{braess, braess_choice_set, mesh2x2};
use routecorr::routegen::enumerate_efficient_routes;

const PI2_6: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

fn mnl_nest_sum(n: usize, theta0: f64) -> NestSum {
    GevModel::Mnl { theta0 }.to_nest_sum(n).unwrap()
}

/// Binary nested logit with both alternatives in one nest of parameter
/// delta, as a nest sum.
fn nl_pair(delta: f64, theta0: f64) -> NestSum {
    NestSum {
        theta0,
        n_routes: 2,
        nests: vec![NsNest {
            weight: 1.0,
            delta,
            members: vec![(0, 1.0), (1, 1.0)],
        }],
    }
}

#[test]
fn marginal_means() {
    let ns = mnl_nest_sum(3, 1.0);
    assert_abs_diff_eq!(marginal_mean(&ns, 0).unwrap(), EULER_GAMMA, epsilon = 1e-14);

    // Normalized CNL: every marginal generating value is 1.
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let theta0 = 0.37;
    let model = build_lnl(&net, &cs, DeltaRule::new(DeltaKind::Arithmetic, 0.2).unwrap(), theta0)
        .unwrap();
    let ns = model.to_nest_sum(cs.len()).unwrap();
    for k in 0..cs.len() {
        assert_abs_diff_eq!(
            marginal_mean(&ns, k).unwrap(),
            EULER_GAMMA * theta0,
            epsilon = 1e-12
        );
    }

    // a_k = 2 through a doubled inclusion coefficient.
    let ns = NestSum {
        theta0: 1.0,
        n_routes: 1,
        nests: vec![NsNest { weight: 1.0, delta: 1.0, members: vec![(0, 2.0)] }],
    };
    assert_abs_diff_eq!(
        marginal_mean(&ns, 0).unwrap(),
        EULER_GAMMA + 2f64.ln(),
        epsilon = 1e-14
    );
}

#[test]
fn mnl_covariance_vanishes() {
    let quad = QuadratureSpec::default();
    for theta0 in [1.0, 0.3] {
        let ns = mnl_nest_sum(4, theta0);
        let cov = gev_covariance(&ns, 0, 2, &quad).unwrap();
        assert!(cov.abs() < 1e-6 * theta0 * theta0, "cov = {}", cov);
    }
}

#[test]
fn nl_covariance_matches_closed_form() {
    let quad = QuadratureSpec::default();
    for delta in [0.2, 0.5, 0.8] {
        for theta0 in [1.0, 0.45] {
            let ns = nl_pair(delta, theta0);
            let cov = gev_covariance(&ns, 0, 1, &quad).unwrap();
            let exact = PI2_6 * theta0 * theta0 * (1.0 - delta * delta);
            assert!(
                (cov - exact).abs() / exact < 1e-5,
                "delta {} theta0 {}: {} vs {}",
                delta,
                theta0,
                cov,
                exact
            );
        }
    }
}

#[test]
fn nl_covariance_near_delta_floor() {
    let quad = QuadratureSpec::default();
    let delta = 1e-3;
    let ns = nl_pair(delta, 1.0);
    let cov = gev_covariance(&ns, 0, 1, &quad).unwrap();
    let exact = PI2_6 * (1.0 - delta * delta);
    assert!((cov - exact).abs() / exact < 1e-4, "{} vs {}", cov, exact);
}

#[test]
fn binary_pcl_matches_nl_closed_form() {
    let quad = QuadratureSpec::default();
    let sigma = 1.0 / 3.0;
    let mut sm = SymMatrix::zeros(2);
    sm.set(0, 1, sigma);
    let ns = GevModel::Pcl { theta0: 1.0, sigma: sm }.to_nest_sum(2).unwrap();
    let cov = gev_covariance(&ns, 0, 1, &quad).unwrap();
    let delta = 1.0 - sigma;
    let exact = PI2_6 * (1.0 - delta * delta);
    assert!((cov - exact).abs() / exact < 1e-5, "{} vs {}", cov, exact);
}

#[test]
fn covariance_is_symmetric_in_the_pair() {
    let quad = QuadratureSpec::default();
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let ns = build_pcl(&net, &cs, 1.0)
        .unwrap()
        .to_nest_sum(cs.len())
        .unwrap();
    let a = gev_covariance(&ns, 0, 1, &quad).unwrap();
    let b = gev_covariance(&ns, 1, 0, &quad).unwrap();
    assert_abs_diff_eq!(a, b, epsilon = 1e-6);
}

#[test]
fn quadrature_converges_under_node_doubling() {
    let base = QuadratureSpec::default();
    let fine = base.refined(2.0);
    for delta in [0.35, 0.8] {
        let ns = nl_pair(delta, 1.0);
        let a = gev_covariance(&ns, 0, 1, &base).unwrap();
        let b = gev_covariance(&ns, 0, 1, &fine).unwrap();
        assert!((a - b).abs() < 1e-7, "delta {}: {} vs {}", delta, a, b);
    }
}

#[test]
fn covariance_against_finite_difference_cdf_integral() {
    // Direct evaluation of the second moment as int x^2 F'(x) dx with a
    // central-difference derivative, cross-checking the by-parts form.
    let delta = 0.5;
    let theta0 = 1.0;
    let ns = nl_pair(delta, theta0);
    // Reconstruct F from the restricted binary choice probability using the
    // public probability interface: p(choose 1 | C_0 = -x theta0, C_1 = 0).
    let cdf = |x: f64| {
        ns.probabilities(&[x * theta0, 0.0]).unwrap()[1]
    };
    let h = 1e-5;
    let mut e_d2 = 0.0;
    let step = 0.005;
    let x_max = 30.0;
    let n = (2.0 * x_max / step) as usize;
    for i in 0..=n {
        let x = -x_max + i as f64 * step;
        let fp = (cdf(x + h) - cdf(x - h)) / (2.0 * h);
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        e_d2 += w * x * x * fp * step;
    }
    let cov_fd = theta0 * theta0 * (PI2_6 - 0.5 * e_d2);
    let cov = gev_covariance(&ns, 0, 1, &QuadratureSpec::default()).unwrap();
    assert!((cov - cov_fd).abs() < 1e-3, "{} vs {}", cov, cov_fd);
}

#[test]
fn fcm_of_mnl_is_identity() {
    let ns = mnl_nest_sum(3, 0.7);
    let fcm = gev_fcm(&ns, &QuadratureSpec::default()).unwrap();
    assert!(fcm.max_abs_diff(&SymMatrix::identity(3)) < 1e-6);
}

#[test]
fn fcm_of_nl_pair() {
    let ns = nl_pair(0.6, 1.0);
    let fcm = gev_fcm(&ns, &QuadratureSpec::default()).unwrap();
    assert_abs_diff_eq!(fcm.get(0, 1), 1.0 - 0.36, epsilon = 1e-5);
    assert_eq!(fcm.get(0, 0), 1.0);
}

#[test]
fn fcm_entries_bounded() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let ns = build_lnl(&net, &cs, DeltaRule::new(DeltaKind::Constant, 0.3).unwrap(), 1.0)
        .unwrap()
        .to_nest_sum(cs.len())
        .unwrap();
    let fcm = gev_fcm(&ns, &QuadratureSpec::default()).unwrap();
    for i in 0..fcm.n() {
        assert_eq!(fcm.get(i, i), 1.0);
        for j in 0..fcm.n() {
            assert!(fcm.get(i, j).abs() <= 1.0 + 1e-6);
        }
    }
}

#[test]
fn braess_lnl_correlation_soft_anchor() {
    // LNL with all deltas at 0.2 on the default Braess fixture: the
    // reported correlation between an outer route and the bridge route is
    // about 0.41.
    let (net, od) = braess(4.0, 5.0, 0.0).unwrap();
    let cs = braess_choice_set(&net, od).unwrap();
    let model = build_lnl(&net, &cs, DeltaRule::new(DeltaKind::Constant, 0.2).unwrap(), 1.0)
        .unwrap();
    let ns = model.to_nest_sum(cs.len()).unwrap();
    let fcm = gev_fcm(&ns, &QuadratureSpec::default()).unwrap();
    // Canonical order: A = [1,4], C = [1,5,2], B = [3,2].
    assert_abs_diff_eq!(fcm.get(0, 1), 0.41, epsilon = 0.01);
    assert_abs_diff_eq!(fcm.get(0, 1), fcm.get(1, 2), epsilon = 1e-6);
}

#[test]
fn rcm_of_identity_has_half_off_diagonal() {
    let rcm = reduce_to_rcm(&SymMatrix::identity(4), 1).unwrap();
    assert_eq!(rcm.n(), 3);
    for i in 0..3 {
        assert_abs_diff_eq!(rcm.get(i, i), 1.0, epsilon = 1e-14);
        for j in 0..3 {
            if i != j {
                assert_abs_diff_eq!(rcm.get(i, j), 0.5, epsilon = 1e-14);
            }
        }
    }
}

#[test]
fn rcm_rejects_zero_difference_variance() {
    let mut cov = SymMatrix::identity(3);
    cov.set(0, 1, 1.0);
    assert!(matches!(
        reduce_to_rcm(&cov, 0),
        Err(routecorr::Error::ZeroDifferenceVariance(1))
    ));
}

#[test]
fn rcm_invariant_to_uniform_variance_rescaling() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let (cov1, _) = ds_moments(&net, &cs, 1.0).unwrap();
    let (cov2, _) = ds_moments(&net, &cs, 3.5).unwrap();
    let a = reduce_to_rcm(&cov1, 2).unwrap();
    let b = reduce_to_rcm(&cov2, 2).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
}

#[test]
fn mesh_reference_search_is_deterministic() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let (cov, _) = ds_moments(&net, &cs, 1.0).unwrap();
    let r1 = find_rcm_reference(&cov).unwrap();
    let r2 = find_rcm_reference(&cov).unwrap();
    assert_eq!(r1, r2);
    assert!(r1 < cs.len());
}

#[test]
fn single_nest_cnl_matches_nl_closed_form() {
    let quad = QuadratureSpec::default();
    let delta = 0.55;
    let ns = NestSum {
        theta0: 1.0,
        n_routes: 3,
        nests: vec![
            NsNest { weight: 1.0, delta, members: vec![(0, 1.0), (1, 1.0)] },
            NsNest { weight: 1.0, delta: 1.0, members: vec![(2, 1.0)] },
        ],
    };
    let cov = gev_covariance(&ns, 0, 1, &quad).unwrap();
    let exact = PI2_6 * (1.0 - delta * delta);
    assert!((cov - exact).abs() / exact < 1e-5);
}
