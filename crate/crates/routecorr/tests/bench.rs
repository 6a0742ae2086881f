use approx::assert_abs_diff_eq;

use routecorr::bench::{
    emit_outputs, mse_correlations, mse_probabilities, run_grid, ExperimentConfig, ModelSpec,
};
use routecorr::gevcov::{find_rcm_reference, reduce_to_rcm};
use routecorr::matrix::SymMatrix;
use routecorr::mnp::ds_moments;
use routecorr::netgraph::mesh2x2;
use routecorr::routegen::enumerate_efficient_routes;

#[test]
fn probability_mse_basics() {
    assert_eq!(mse_probabilities(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    // Two entries off by 0.1 each: mean squared difference 0.01, scaled 100.
    assert_abs_diff_eq!(
        mse_probabilities(&[0.6, 0.4], &[0.5, 0.5]).unwrap(),
        100.0,
        epsilon = 1e-9
    );
    assert!(mse_probabilities(&[1.0], &[0.5, 0.5]).is_err());
}

#[test]
fn correlation_mse_basics() {
    let id = SymMatrix::identity(3);
    assert_eq!(mse_correlations(&id, &id).unwrap(), 0.0);
    assert!(mse_correlations(&id, &SymMatrix::identity(4)).is_err());
}

#[test]
fn mnl_correlation_mse_on_mesh() {
    let (net, od) = mesh2x2(1.0).unwrap();
    let cs = enumerate_efficient_routes(&net, od).unwrap();
    let (cov, target) = ds_moments(&net, &cs, 1.0).unwrap();
    let id = SymMatrix::identity(cs.len());
    assert_abs_diff_eq!(mse_correlations(&id, &target).unwrap(), 97.2222, epsilon = 0.01);
    let r = find_rcm_reference(&cov).unwrap();
    let id_rcm = reduce_to_rcm(&id, r).unwrap();
    let ds_rcm = reduce_to_rcm(&cov, r).unwrap();
    assert_abs_diff_eq!(mse_correlations(&id_rcm, &ds_rcm).unwrap(), 45.4416, epsilon = 0.01);
}

fn small_cfg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults("mesh2x2");
    cfg.models = vec![ModelSpec::Mnl, ModelSpec::LnlConst, ModelSpec::Conl];
    cfg.dmin_grid = vec![0.0, 0.5, 1.0];
    cfg.cvs = vec![0.1];
    cfg.draws = 10_000;
    cfg
}

#[test]
fn grid_produces_one_row_per_cell() {
    let report = run_grid(&small_cfg()).unwrap();
    assert_eq!(report.rows.len(), 3 * 3);
    assert_eq!(report.mnp_se.len(), 1);
    assert!(report.mnp_se[0].1 > 0.0 && report.mnp_se[0].1 < 0.01);
    assert!(report.rcm_reference < 6);
    for r in &report.rows {
        assert!(r.prob_mse_x1e4.is_finite() && r.prob_mse_x1e4 >= 0.0);
        assert!(r.fcm_mse_x1e3.is_finite() && r.fcm_mse_x1e3 >= 0.0);
        assert!(r.rcm_mse_x1e3.is_finite() && r.rcm_mse_x1e3 >= 0.0);
    }
}

#[test]
fn unit_dmin_rows_collapse_to_mnl() {
    let report = run_grid(&small_cfg()).unwrap();
    let mnl = report
        .rows
        .iter()
        .find(|r| r.model == ModelSpec::Mnl && r.dmin == 1.0)
        .unwrap();
    for model in [ModelSpec::LnlConst, ModelSpec::Conl] {
        let row = report
            .rows
            .iter()
            .find(|r| r.model == model && r.dmin == 1.0)
            .unwrap();
        assert_abs_diff_eq!(row.prob_mse_x1e4, mnl.prob_mse_x1e4, epsilon = 1e-9);
        assert_abs_diff_eq!(row.fcm_mse_x1e3, mnl.fcm_mse_x1e3, epsilon = 1e-9);
        assert_abs_diff_eq!(row.rcm_mse_x1e3, mnl.rcm_mse_x1e3, epsilon = 1e-9);
    }
}

#[test]
fn mnl_rows_independent_of_dmin() {
    let report = run_grid(&small_cfg()).unwrap();
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.model == ModelSpec::Mnl)
        .collect();
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert_eq!(r.prob_mse_x1e4, rows[0].prob_mse_x1e4);
        assert_eq!(r.fcm_mse_x1e3, rows[0].fcm_mse_x1e3);
    }
}

#[test]
fn outputs_are_reproducible() {
    let cfg = small_cfg();
    let report = run_grid(&cfg).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let files_a = emit_outputs(&report, dir_a.path()).unwrap();
    let report2 = run_grid(&cfg).unwrap();
    let files_b = emit_outputs(&report2, dir_b.path()).unwrap();
    assert_eq!(files_a.len(), files_b.len());
    assert_eq!(files_a.len(), 1 + 3); // table + three curves for one cv
    for (a, b) in files_a.iter().zip(&files_b) {
        assert_eq!(a.file_name(), b.file_name());
        let ca = std::fs::read(a).unwrap();
        let cb = std::fs::read(b).unwrap();
        assert_eq!(ca, cb, "file {:?} differs between runs", a.file_name());
    }
    let table = std::fs::read_to_string(&files_a[0]).unwrap();
    assert!(table.starts_with("model,variant,dmin,cv,"));
    assert_eq!(table.lines().count(), 1 + report.rows.len());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_cfg();
    cfg.dmin_grid = vec![1.5];
    assert!(run_grid(&cfg).is_err());
    let mut cfg = small_cfg();
    cfg.cvs = vec![-0.1];
    assert!(run_grid(&cfg).is_err());
    let mut cfg = small_cfg();
    cfg.rcm_ref = Some(99);
    assert!(run_grid(&cfg).is_err());
    let mut cfg = small_cfg();
    cfg.models.clear();
    assert!(run_grid(&cfg).is_err());
}

#[test]
fn model_names_round_trip() {
    for m in ModelSpec::ALL {
        assert_eq!(m.to_string().parse::<ModelSpec>().unwrap(), m);
    }
    assert!("probit".parse::<ModelSpec>().is_err());
}
