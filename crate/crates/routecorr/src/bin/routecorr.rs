//! Command-line front end: route enumeration/sampling, model probabilities,
//! model correlation matrices, CoNL structure dumps, and the MSE benchmark
//! grid. All outputs are CSV; exit code 2 signals a validation error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use routecorr::bench::{emit_outputs, run_grid, ExperimentConfig, ModelSpec};
use routecorr::conl::{build_conl, conl_fcm, conl_probabilities, Nest, WeightVariant};
use routecorr::gev::{build_lnl, build_pcl, mnl_probabilities, theta0_from_cv, DeltaKind, DeltaRule};
use routecorr::gevcov::{find_rcm_reference, gev_fcm, reduce_to_rcm, QuadratureSpec};
use routecorr::matrix::SymMatrix;
use routecorr::mnp::{ds_moments, simulate_mnp_probabilities, xi_from_cv, MnpSpec};
use routecorr::netgraph::{resolve_network, ChoiceSet, Network, NodeId, OdPair};
use routecorr::routegen::{enumerate_efficient_routes, sample_choice_set};
use routecorr::{Error, Result};

#[derive(Parser)]
#[command(name = "routecorr", version, about = "Route-choice models and their correlation structure on small transport networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate or sample the choice set of an od pair.
    Routes(RoutesArgs),
    /// Choice probabilities of one model.
    Probs(ProbsArgs),
    /// Correlation matrix of one model, in full or reduced space.
    Corr(CorrArgs),
    /// CoNL mixing structure: components, weights, deltas, residuals.
    ConlStructure(ConlStructureArgs),
    /// MSE benchmark grid against the simulated probit target.
    Bench(BenchArgs),
}

#[derive(Args)]
struct NetArgs {
    /// Builtin name (fourlink, braess, mesh2x2, mesh_bypass, sioux_falls)
    /// or a network file path.
    #[arg(long)]
    network: String,
    /// Builtin parameters, e.g. "a=4,b=5,h=0".
    #[arg(long)]
    params: Option<String>,
    /// Od pair override, e.g. "1-9".
    #[arg(long)]
    od: Option<String>,
}

impl NetArgs {
    fn resolve(&self) -> Result<(Network, OdPair)> {
        let params = parse_params(self.params.as_deref())?;
        let od = self.od.as_deref().map(parse_od).transpose()?;
        resolve_network(&self.network, &params, od)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteMode {
    Efficient,
    Sample,
}

#[derive(Args)]
struct RoutesArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value = "efficient")]
    mode: RouteMode,
    #[arg(long, default_value_t = 10_000)]
    draws: u64,
    #[arg(long, default_value_t = 0.1)]
    cv: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbsArgs {
    #[command(flatten)]
    net: NetArgs,
    /// mnl, lnl-const, lnl-arith, lnl-geom, pcl, conl, or mnp.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0.1)]
    cv: f64,
    #[arg(long, default_value_t = 0.0)]
    dmin: f64,
    /// CoNL weight formulation (24..=27).
    #[arg(long, default_value_t = 25)]
    weights: u8,
    #[arg(long, default_value_t = 1_000_000)]
    draws: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Fcm,
    Rcm,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    net: NetArgs,
    /// mnl, lnl-const, lnl-arith, lnl-geom, pcl, conl, or mnp (analytic
    /// overlap target).
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value = "fcm")]
    space: Space,
    /// Reference alternative for the reduced space (found by search when
    /// omitted).
    #[arg(long)]
    rcm_ref: Option<usize>,
    /// Approximate base node count of the covariance quadrature.
    #[arg(long)]
    quad_nodes: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    cv: f64,
    #[arg(long, default_value_t = 0.0)]
    dmin: f64,
    #[arg(long, default_value_t = 25)]
    weights: u8,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConlStructureArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = 0.1)]
    cv: f64,
    #[arg(long, default_value_t = 0.0)]
    dmin: f64,
    #[arg(long, default_value_t = 25)]
    weights: u8,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Builtin name or network file path.
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    od: Option<String>,
    /// Comma-separated model list.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    weights: Option<u8>,
    /// Grid as "start:end:step" or a comma-separated list.
    #[arg(long)]
    dmin: Option<String>,
    /// Comma-separated cv list.
    #[arg(long)]
    cv: Option<String>,
    #[arg(long)]
    draws: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rcm_ref: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file mirroring the flags; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_params(s: Option<&str>) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    let Some(s) = s else { return Ok(m) };
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("expected key=value, got '{}'", part)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("invalid parameter value '{}'", v)))?;
        m.insert(k.trim().to_string(), v);
    }
    Ok(m)
}

fn parse_od(s: &str) -> Result<(NodeId, NodeId)> {
    let (o, d) = s
        .split_once('-')
        .ok_or_else(|| Error::Invalid(format!("expected od as 'o-d', got '{}'", s)))?;
    let parse = |t: &str| -> Result<NodeId> {
        t.trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("invalid node id '{}'", t)))
    };
    Ok((parse(o)?, parse(d)?))
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parse = |t: &str| -> Result<f64> {
        t.trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("invalid number '{}'", t)))
    };
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if !(step > 0.0 && end >= start) {
            return Err(Error::Invalid(format!("invalid grid '{}'", s)));
        }
        let n = ((end - start) / step).round() as usize;
        return Ok((0..=n).map(|i| (start + i as f64 * step).min(end)).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse)
        .collect()
}

fn parse_models(s: &str) -> Result<Vec<ModelSpec>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| ModelSpec::from_str(t.trim()))
        .collect()
}

fn write_out(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{}", content),
    }
    Ok(())
}

fn model_probabilities(
    net: &Network,
    cs: &ChoiceSet,
    model: &str,
    cv: f64,
    dmin: f64,
    weights: u8,
) -> Result<Vec<f64>> {
    let imps = cs.impedances();
    let theta0 = theta0_from_cv(cv, cs.min_impedance())?;
    match model {
        "mnl" => Ok(mnl_probabilities(&imps, theta0)),
        "lnl-const" | "lnl-arith" | "lnl-geom" => {
            let kind = match model {
                "lnl-const" => DeltaKind::Constant,
                "lnl-arith" => DeltaKind::Arithmetic,
                _ => DeltaKind::Geometric,
            };
            build_lnl(net, cs, DeltaRule::new(kind, dmin)?, theta0)?.probabilities(&imps)
        }
        "pcl" => build_pcl(net, cs, theta0)?.probabilities(&imps),
        "conl" => {
            let s = build_conl(net, cs, WeightVariant::from_code(weights)?, dmin, theta0)?;
            conl_probabilities(&s, &imps)
        }
        other => Err(Error::Invalid(format!("unknown model '{}'", other))),
    }
}

fn run_routes(args: &RoutesArgs) -> Result<()> {
    let (net, od) = args.net.resolve()?;
    let cs = match args.mode {
        RouteMode::Efficient => enumerate_efficient_routes(&net, od)?,
        RouteMode::Sample => sample_choice_set(&net, od, args.draws, args.cv, args.seed)?,
    };
    write_out(args.out.as_ref(), &cs.to_csv())
}

fn run_probs(args: &ProbsArgs) -> Result<()> {
    let (net, od) = args.net.resolve()?;
    let cs = enumerate_efficient_routes(&net, od)?;
    let mut s = String::new();
    if args.model == "mnp" {
        let xi = xi_from_cv(args.cv, cs.min_impedance())?;
        let res = simulate_mnp_probabilities(&net, &cs, MnpSpec::new(xi, args.draws, args.seed)?)?;
        s.push_str("route_index,probability,std_error\n");
        for (i, (p, se)) in res.probabilities.iter().zip(&res.std_errors).enumerate() {
            let _ = writeln!(s, "{},{},{}", i, p, se);
        }
    } else {
        let p = model_probabilities(&net, &cs, &args.model, args.cv, args.dmin, args.weights)?;
        s.push_str("route_index,probability\n");
        for (i, p) in p.iter().enumerate() {
            let _ = writeln!(s, "{},{}", i, p);
        }
    }
    write_out(args.out.as_ref(), &s)
}

fn run_corr(args: &CorrArgs) -> Result<()> {
    let (net, od) = args.net.resolve()?;
    let cs = enumerate_efficient_routes(&net, od)?;
    let n = cs.len();
    let quad = match args.quad_nodes {
        Some(nodes) => QuadratureSpec::with_nodes(nodes)?,
        None => QuadratureSpec::default(),
    };
    // The full matrix in covariance form (unit-variance scale for the
    // homoscedastic GEV models) so the reduction applies uniformly.
    let cov = match args.model.as_str() {
        "mnp" => ds_moments(&net, &cs, 1.0)?.0,
        "mnl" => SymMatrix::identity(n),
        "lnl-const" | "lnl-arith" | "lnl-geom" => {
            let kind = match args.model.as_str() {
                "lnl-const" => DeltaKind::Constant,
                "lnl-arith" => DeltaKind::Arithmetic,
                _ => DeltaKind::Geometric,
            };
            let model = build_lnl(&net, &cs, DeltaRule::new(kind, args.dmin)?, 1.0)?;
            gev_fcm(&model.to_nest_sum(n)?, &quad)?
        }
        "pcl" => gev_fcm(&build_pcl(&net, &cs, 1.0)?.to_nest_sum(n)?, &quad)?,
        "conl" => {
            let s = build_conl(&net, &cs, WeightVariant::from_code(args.weights)?, args.dmin, 1.0)?;
            conl_fcm(&s, &net, &cs)?.0
        }
        other => return Err(Error::Invalid(format!("unknown model '{}'", other))),
    };
    let matrix = match args.space {
        Space::Fcm => {
            if args.model == "mnp" {
                ds_moments(&net, &cs, 1.0)?.1
            } else {
                cov
            }
        }
        Space::Rcm => {
            let r = match args.rcm_ref {
                Some(r) => r,
                None => find_rcm_reference(&ds_moments(&net, &cs, 1.0)?.0)?,
            };
            reduce_to_rcm(&cov, r)?
        }
    };
    let mut s = String::from("row_index,col_index,value\n");
    for i in 0..matrix.n() {
        for j in 0..matrix.n() {
            let _ = writeln!(s, "{},{},{}", i, j, matrix.get(i, j));
        }
    }
    write_out(args.out.as_ref(), &s)
}

fn run_conl_structure(args: &ConlStructureArgs) -> Result<()> {
    let (net, od) = args.net.resolve()?;
    let cs = enumerate_efficient_routes(&net, od)?;
    let theta0 = theta0_from_cv(args.cv, cs.min_impedance())?;
    let s = build_conl(&net, &cs, WeightVariant::from_code(args.weights)?, args.dmin, theta0)?;
    let (_, residuals) = conl_fcm(&s, &net, &cs)?;
    let mut out = String::from("record,component,link,routes,value\n");
    for (i, w) in s.weights.iter().enumerate() {
        let _ = writeln!(out, "weight,{},,,{}", i, w);
    }
    for (i, comp) in s.components.iter().enumerate() {
        for nest in &comp.nests {
            match nest {
                Nest::Shared { link, routes } => {
                    let r: Vec<String> = routes.iter().map(|k| k.to_string()).collect();
                    let _ = writeln!(out, "nest,{},{},{},", i, link, r.join(";"));
                }
                Nest::Singleton { route } => {
                    let _ = writeln!(out, "nest,{},,{},", i, route);
                }
            }
        }
    }
    for (link, delta) in &s.deltas {
        let _ = writeln!(out, "delta,,{},,{}", link, delta);
    }
    for r in &residuals {
        let _ = writeln!(out, "residual,,{},,{}", r.link, r.residual);
    }
    write_out(args.out.as_ref(), &out)
}

fn load_config(path: &PathBuf) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut m = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            msg: format!("expected key=value, got '{}'", line),
        })?;
        m.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(m)
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let file_cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };
    let from_file = |key: &str| file_cfg.get(key).cloned();
    let network = args
        .network
        .clone()
        .or_else(|| from_file("network"))
        .ok_or_else(|| Error::Invalid("--network (or config 'network') is required".into()))?;
    let mut cfg = ExperimentConfig::defaults(&network);
    let params = args.params.clone().or_else(|| from_file("params"));
    cfg.params = parse_params(params.as_deref())?;
    if let Some(od) = args.od.clone().or_else(|| from_file("od")) {
        cfg.od = Some(parse_od(&od)?);
    }
    if let Some(models) = args.models.clone().or_else(|| from_file("models")) {
        cfg.models = parse_models(&models)?;
    }
    if let Some(dmin) = args.dmin.clone().or_else(|| from_file("dmin")) {
        cfg.dmin_grid = parse_grid(&dmin)?;
    }
    if let Some(cv) = args.cv.clone().or_else(|| from_file("cv")) {
        cfg.cvs = parse_grid(&cv)?;
    }
    let parse_cfg_num = |key: &str| -> Result<Option<u64>> {
        match from_file(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Invalid(format!("invalid {} '{}'", key, v))),
            None => Ok(None),
        }
    };
    if let Some(d) = args.draws.or(parse_cfg_num("draws")?) {
        cfg.draws = d;
    }
    if let Some(s) = args.seed.or(parse_cfg_num("seed")?) {
        cfg.seed = s;
    }
    if let Some(w) = args.weights.or(parse_cfg_num("weights")?.map(|v| v as u8)) {
        cfg.weights_variant = WeightVariant::from_code(w)?;
    }
    if let Some(r) = args.rcm_ref.or(parse_cfg_num("rcm-ref")?.map(|v| v as usize)) {
        cfg.rcm_ref = Some(r);
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| from_file("out").map(PathBuf::from))
        .ok_or_else(|| Error::Invalid("--out (or config 'out') is required".into()))?;
    let report = run_grid(&cfg)?;
    let written = emit_outputs(&report, &out_dir)?;
    println!("rcm_reference,{}", report.rcm_reference);
    for (cv, se) in &report.mnp_se {
        println!("mnp_max_std_error,cv={},{}", cv, se);
    }
    for path in written {
        println!("wrote,{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Routes(a) => run_routes(a),
        Cmd::Probs(a) => run_probs(a),
        Cmd::Corr(a) => run_corr(a),
        Cmd::ConlStructure(a) => run_conl_structure(a),
        Cmd::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
