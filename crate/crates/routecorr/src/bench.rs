//! MSE benchmark against the probit target: experiment grids over the
//! nesting lower bound and the cost coefficient of variation, and CSV
//! emission of the result tables and per-metric curves.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::conl::{build_conl, conl_fcm, conl_probabilities, WeightVariant};
use crate::error::{Error, Result};
use crate::gev::{build_lnl, build_pcl, theta0_from_cv, DeltaKind, DeltaRule};
use crate::gevcov::{find_rcm_reference, gev_fcm, reduce_to_rcm, QuadratureSpec};
use crate::matrix::{CorrMatrix, SymMatrix};
use crate::mnp::{ds_moments, simulate_mnp_probabilities, xi_from_cv, MnpSpec};
use crate::netgraph::{resolve_network, NodeId};
use crate::routegen::enumerate_efficient_routes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelSpec {
    Mnl,
    LnlConst,
    LnlArith,
    LnlGeom,
    Pcl,
    Conl,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 6] = [
        ModelSpec::Mnl,
        ModelSpec::LnlConst,
        ModelSpec::LnlArith,
        ModelSpec::LnlGeom,
        ModelSpec::Pcl,
        ModelSpec::Conl,
    ];
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelSpec::Mnl => "mnl",
            ModelSpec::LnlConst => "lnl-const",
            ModelSpec::LnlArith => "lnl-arith",
            ModelSpec::LnlGeom => "lnl-geom",
            ModelSpec::Pcl => "pcl",
            ModelSpec::Conl => "conl",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnl" => Ok(ModelSpec::Mnl),
            "lnl-const" => Ok(ModelSpec::LnlConst),
            "lnl-arith" => Ok(ModelSpec::LnlArith),
            "lnl-geom" => Ok(ModelSpec::LnlGeom),
            "pcl" => Ok(ModelSpec::Pcl),
            "conl" => Ok(ModelSpec::Conl),
            other => Err(Error::Invalid(format!("unknown model '{}'", other))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Builtin name or network file path.
    pub network: String,
    pub params: BTreeMap<String, f64>,
    pub od: Option<(NodeId, NodeId)>,
    pub models: Vec<ModelSpec>,
    pub dmin_grid: Vec<f64>,
    pub cvs: Vec<f64>,
    pub draws: u64,
    pub seed: u64,
    pub weights_variant: WeightVariant,
    pub rcm_ref: Option<usize>,
}

impl ExperimentConfig {
    pub fn defaults(network: &str) -> Self {
        ExperimentConfig {
            network: network.into(),
            params: BTreeMap::new(),
            od: None,
            models: ModelSpec::ALL.to_vec(),
            dmin_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            cvs: vec![0.1, 0.2],
            draws: 1_000_000,
            seed: 42,
            weights_variant: WeightVariant::MeanShared,
            rcm_ref: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.dmin_grid.is_empty() || self.cvs.is_empty() {
            return Err(Error::Invalid("grids must be nonempty".into()));
        }
        for &d in &self.dmin_grid {
            if !(d.is_finite() && (0.0..=1.0).contains(&d)) {
                return Err(Error::Invalid("dmin values must lie in [0, 1]".into()));
            }
        }
        for &cv in &self.cvs {
            if !(cv.is_finite() && cv > 0.0) {
                return Err(Error::Invalid("cv values must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MseRow {
    pub model: ModelSpec,
    pub variant: String,
    pub dmin: f64,
    pub cv: f64,
    pub prob_mse_x1e4: f64,
    pub fcm_mse_x1e3: f64,
    pub rcm_mse_x1e3: f64,
}

#[derive(Debug, Clone)]
pub struct MseReport {
    pub rows: Vec<MseRow>,
    /// Largest probit probability standard error per cv.
    pub mnp_se: Vec<(f64, f64)>,
    pub rcm_reference: usize,
}

/// Probability MSE, scaled by 1e4: mean over the n_k routes of the squared
/// probability difference.
pub fn mse_probabilities(p_model: &[f64], p_target: &[f64]) -> Result<f64> {
    if p_model.len() != p_target.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} probabilities",
            p_model.len(),
            p_target.len()
        )));
    }
    let s: f64 = p_model
        .iter()
        .zip(p_target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / p_model.len() as f64 * 1e4)
}

/// Correlation MSE, scaled by 1e3: mean of squared entry differences over
/// all n * n matrix entries (the unit diagonal contributes zero).
pub fn mse_correlations(r_model: &CorrMatrix, r_target: &CorrMatrix) -> Result<f64> {
    if r_model.n() != r_target.n() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{} matrices",
            r_model.n(),
            r_model.n(),
            r_target.n(),
            r_target.n()
        )));
    }
    Ok(r_model.mean_sq_diff(r_target) * 1e3)
}

/// Runs the full grid: one probit simulation per cv (shared across all
/// models), analytic covariance targets, and one row per
/// (model, dmin, cv) in canonical order.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<MseReport> {
    cfg.validate()?;
    let (net, od) = resolve_network(&cfg.network, &cfg.params, cfg.od)?;
    let cs = enumerate_efficient_routes(&net, od)?;
    let imps = cs.impedances();
    let c_min = cs.min_impedance();
    let n = cs.len();

    // Correlation targets are analytic and xi-independent.
    let (ds_cov_unit, ds_fcm) = ds_moments(&net, &cs, 1.0)?;
    let rcm_ref = match cfg.rcm_ref {
        Some(r) if r < n => r,
        Some(r) => return Err(Error::Invalid(format!("rcm reference {} out of range", r))),
        None => find_rcm_reference(&ds_cov_unit)?,
    };
    let ds_rcm = reduce_to_rcm(&ds_cov_unit, rcm_ref)?;

    let mut models: Vec<ModelSpec> = cfg.models.clone();
    models.sort();
    models.dedup();
    let mut dmins = cfg.dmin_grid.clone();
    dmins.sort_by(f64::total_cmp);
    dmins.dedup();
    let mut cvs = cfg.cvs.clone();
    cvs.sort_by(f64::total_cmp);
    cvs.dedup();

    let mut mnp_by_cv = Vec::new();
    for &cv in &cvs {
        let xi = xi_from_cv(cv, c_min)?;
        let spec = MnpSpec::new(xi, cfg.draws, cfg.seed)?;
        mnp_by_cv.push(simulate_mnp_probabilities(&net, &cs, spec)?);
    }
    let mnp_se = cvs
        .iter()
        .zip(&mnp_by_cv)
        .map(|(&cv, r)| (cv, r.std_errors.iter().copied().fold(0.0, f64::max)))
        .collect();

    let quad = QuadratureSpec::default();
    // Correlations are scale-invariant, so FCMs are computed once per
    // (model, dmin) with a canonical theta0 and reused across cv.
    let fcm_for = |model: ModelSpec, dmin: f64| -> Result<CorrMatrix> {
        match model {
            ModelSpec::Mnl => Ok(SymMatrix::identity(n)),
            ModelSpec::LnlConst | ModelSpec::LnlArith | ModelSpec::LnlGeom => {
                let rule = DeltaRule::new(lnl_kind(model), dmin)?;
                let ns = build_lnl(&net, &cs, rule, 1.0)?.to_nest_sum(n)?;
                gev_fcm(&ns, &quad)
            }
            ModelSpec::Pcl => {
                let ns = build_pcl(&net, &cs, 1.0)?.to_nest_sum(n)?;
                gev_fcm(&ns, &quad)
            }
            ModelSpec::Conl => {
                let s = build_conl(&net, &cs, cfg.weights_variant, dmin, 1.0)?;
                Ok(conl_fcm(&s, &net, &cs)?.0)
            }
        }
    };
    let probs_for = |model: ModelSpec, dmin: f64, theta0: f64| -> Result<Vec<f64>> {
        match model {
            ModelSpec::Mnl => Ok(crate::gev::mnl_probabilities(&imps, theta0)),
            ModelSpec::LnlConst | ModelSpec::LnlArith | ModelSpec::LnlGeom => {
                let rule = DeltaRule::new(lnl_kind(model), dmin)?;
                build_lnl(&net, &cs, rule, theta0)?.probabilities(&imps)
            }
            ModelSpec::Pcl => build_pcl(&net, &cs, theta0)?.probabilities(&imps),
            ModelSpec::Conl => {
                let s = build_conl(&net, &cs, cfg.weights_variant, dmin, theta0)?;
                conl_probabilities(&s, &imps)
            }
        }
    };

    let mut rows = Vec::new();
    for &model in &models {
        let depends_on_dmin = !matches!(model, ModelSpec::Mnl | ModelSpec::Pcl);
        let mut fcm_cache: Option<CorrMatrix> = None;
        for &dmin in &dmins {
            let fcm = match (&fcm_cache, depends_on_dmin) {
                (Some(f), false) => f.clone(),
                _ => {
                    let f = fcm_for(model, dmin)?;
                    fcm_cache = Some(f.clone());
                    f
                }
            };
            let rcm = reduce_to_rcm(&fcm, rcm_ref)?;
            let fcm_mse = mse_correlations(&fcm, &ds_fcm)?;
            let rcm_mse = mse_correlations(&rcm, &ds_rcm)?;
            for (&cv, mnp) in cvs.iter().zip(&mnp_by_cv) {
                let theta0 = theta0_from_cv(cv, c_min)?;
                let p = probs_for(model, dmin, theta0)?;
                rows.push(MseRow {
                    model,
                    variant: variant_label(model, cfg.weights_variant),
                    dmin,
                    cv,
                    prob_mse_x1e4: mse_probabilities(&p, &mnp.probabilities)?,
                    fcm_mse_x1e3: fcm_mse,
                    rcm_mse_x1e3: rcm_mse,
                });
            }
        }
    }
    Ok(MseReport {
        rows,
        mnp_se,
        rcm_reference: rcm_ref,
    })
}

fn lnl_kind(model: ModelSpec) -> DeltaKind {
    match model {
        ModelSpec::LnlConst => DeltaKind::Constant,
        ModelSpec::LnlArith => DeltaKind::Arithmetic,
        ModelSpec::LnlGeom => DeltaKind::Geometric,
        _ => unreachable!("not an LNL model"),
    }
}

fn variant_label(model: ModelSpec, weights: WeightVariant) -> String {
    match model {
        ModelSpec::LnlConst => "const".into(),
        ModelSpec::LnlArith => "arith".into(),
        ModelSpec::LnlGeom => "geom".into(),
        ModelSpec::Conl => format!("w{}", weights.code()),
        _ => String::new(),
    }
}

/// Writes `table.csv` plus one curve file per (metric, cv) with dmin rows
/// ascending and one column per model. Returns the written paths. Repeated
/// runs with the same seed produce byte-identical files.
pub fn emit_outputs(report: &MseReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut table = String::from("model,variant,dmin,cv,prob_mse_x1e4,fcm_mse_x1e3,rcm_mse_x1e3\n");
    for r in &report.rows {
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.model, r.variant, r.dmin, r.cv, r.prob_mse_x1e4, r.fcm_mse_x1e3, r.rcm_mse_x1e3
        ));
    }
    let table_path = out_dir.join("table.csv");
    std::fs::write(&table_path, table)?;
    written.push(table_path);

    let mut labels: Vec<String> = Vec::new();
    for r in &report.rows {
        let label = model_label(r);
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    let mut cvs: Vec<f64> = report.rows.iter().map(|r| r.cv).collect();
    cvs.sort_by(f64::total_cmp);
    cvs.dedup();
    let mut dmins: Vec<f64> = report.rows.iter().map(|r| r.dmin).collect();
    dmins.sort_by(f64::total_cmp);
    dmins.dedup();

    for &cv in &cvs {
        for (metric, pick) in [
            ("prob_mse_x1e4", 0usize),
            ("fcm_mse_x1e3", 1),
            ("rcm_mse_x1e3", 2),
        ] {
            let mut s = String::from("dmin");
            for l in &labels {
                s.push(',');
                s.push_str(l);
            }
            s.push('\n');
            for &dmin in &dmins {
                s.push_str(&format!("{}", dmin));
                for l in &labels {
                    let row = report
                        .rows
                        .iter()
                        .find(|r| model_label(r) == *l && r.dmin == dmin && r.cv == cv);
                    match row {
                        Some(r) => {
                            let v = match pick {
                                0 => r.prob_mse_x1e4,
                                1 => r.fcm_mse_x1e3,
                                _ => r.rcm_mse_x1e3,
                            };
                            s.push_str(&format!(",{}", v));
                        }
                        None => s.push(','),
                    }
                }
                s.push('\n');
            }
            let path = out_dir.join(format!("curve_{}_cv{}.csv", metric, cv));
            std::fs::write(&path, s)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn model_label(r: &MseRow) -> String {
    match r.model {
        ModelSpec::Conl if !r.variant.is_empty() => format!("{}-{}", r.model, r.variant),
        _ => r.model.to_string(),
    }
}
