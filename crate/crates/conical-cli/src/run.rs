//! Subcommand runners. Each returns the report text; rows always follow
//! sample index order.

use conical_lab::constructions::{
    cantor_circle_dataset, cantor_graph_sequence, gdelta_to_sequence, GDeltaRep, GdeltaParams, OpenSetRep,
};
use conical_lab::contfrac::{
    classical_convergence, construct_prescribed_limit_set, construct_prescribed_with_schedule, diagnostics_csv, isometry_sequence,
    BallContinuedFraction, ClassicalConvergence,
};
use conical_lab::countable::{
    build_example_set, build_j_alpha, check_thm3, rank_iterate, thm3_construct, ExampleSet, GdParams,
};
use conical_lab::divergence::{
    aebischer_crosscheck, from_conical_data, general_convergence_test, radial_dataset, AebischerParams,
    GeneralConvergence, PointStatus,
};
use conical_lab::fmt::g17;
use conical_lab::geometry::{IdealPoint, Model, ModelPoint};
use conical_lab::limits::{conical_estimate, limit_set_estimate, ConicalConfig, ConicalStatus, PointSequence};
use conical_lab::mobius::ExtComplex;
use conical_lab::sampling::{circle_grid, fibonacci_sphere};
use conical_lab::suites::{geometry_suite, isometry_suite};
use serde_json::{json, Value};

use crate::config::{load_cf, ConfigInvalid, ExperimentConfig, GridSpec, ModelName, SubcommandKind};

/// Exponent of the radial approach `1 - (n+1)^{-p}` in the built-in datasets.
const RADIAL_EXPONENT: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigInvalid),
    Module(conical_lab::Error),
}

impl From<conical_lab::Error> for RunError {
    fn from(e: conical_lab::Error) -> Self {
        RunError::Module(e)
    }
}

impl From<ConfigInvalid> for RunError {
    fn from(e: ConfigInvalid) -> Self {
        RunError::Config(e)
    }
}

pub struct Report {
    pub text: String,
    /// False when a check inside the report failed (lemma-check only).
    pub passed: bool,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    match cfg.subcommand {
        SubcommandKind::LemmaCheck => lemma_check(cfg),
        SubcommandKind::DivergenceMap => divergence_map(cfg).map(ok),
        SubcommandKind::CfAnalyze => cf_analyze(cfg).map(ok),
        SubcommandKind::Rank => rank(cfg).map(ok),
        SubcommandKind::Construct => construct(cfg).map(ok),
    }
}

fn ok(text: String) -> Report {
    Report { text, passed: true }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn config_value(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub fn grid_points(g: &GridSpec) -> Vec<IdealPoint> {
    match *g {
        GridSpec::Circle { count } => circle_grid(count),
        GridSpec::Sphere { count } => fibonacci_sphere(count),
        GridSpec::Line { lo, hi, count } => (0..count)
            .map(|i| IdealPoint::plane(vec![lo + (hi - lo) * i as f64 / (count - 1) as f64]))
            .collect(),
    }
}

/// Boundary coordinates in the requested model; `∞` becomes a row of `inf`.
fn ideal_coords(p: &IdealPoint, model: ModelName) -> Vec<f64> {
    match (model, p.to_model(model.into())) {
        (ModelName::Ball, IdealPoint::Sphere(u)) => u,
        (_, IdealPoint::Plane(v)) => v,
        (_, other) => vec![f64::INFINITY; other.dim() - 1],
    }
}

fn coord_names(model: ModelName, dim: usize, prefix: &str) -> Vec<String> {
    match model {
        ModelName::Ball => (0..dim).map(|i| format!("{prefix}x{i}")).collect(),
        ModelName::HalfSpace => (0..dim - 1).map(|i| format!("{prefix}v{i}")).collect(),
    }
}

fn fmt_row(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| g17(x)).collect()
}

fn conical_config(cfg: &ExperimentConfig, n: usize) -> ConicalConfig {
    let t = &cfg.tolerances;
    ConicalConfig::new(t.alphas.clone(), n).with_min_witnesses(t.k).with_radius(t.radius)
}

fn lemma_check(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let trials = cfg.trials.expect("resolved");
    let geo = geometry_suite(cfg.dim, trials, cfg.seed)?;
    let iso = isometry_suite(cfg.dim, trials, cfg.seed.wrapping_add(1))?;
    let passed = geo.passed() && iso.passed();
    let v = json!({
        "config": config_value(cfg),
        "passed": passed,
        "max_residual": geo.max_residual().max(iso.max_residual()),
        "max_geometry_residual": geo.max_residual(),
        "suites": [geo, iso],
    });
    Ok(Report { text: pretty(&v), passed })
}

fn deg(d: f64) -> IdealPoint {
    IdealPoint::angle(d.to_radians())
}

/// Boundary directions of the built-in conical datasets.
fn dataset_directions(name: &str, dim: usize, depth: Option<usize>) -> Result<Vec<IdealPoint>, RunError> {
    Ok(match (name, dim) {
        ("singleton", 2) => vec![deg(40.0)],
        ("singleton", _) => vec![IdealPoint::sphere(vec![0.0, 0.6, 0.8])?],
        ("twelve", _) => (0..12).map(|k| deg(15.0 + 30.0 * k as f64)).collect(),
        ("cantor", _) => build_example_set(ExampleSet::CantorAccessible, depth.expect("resolved"))?
            .points()
            .iter()
            .map(|x| IdealPoint::plane(x.clone()).to_model(Model::Ball))
            .collect(),
        _ => return Err(ConfigInvalid(format!("unknown dataset {name:?}")).into()),
    })
}

/// Radial conical data of length `n` for a built-in dataset.
fn dataset_points(cfg: &ExperimentConfig, n: usize) -> Result<PointSequence, RunError> {
    let name = cfg.inputs.dataset.as_deref().expect("resolved");
    if name == "cantor" {
        return Ok(cantor_circle_dataset(cfg.inputs.depth.expect("resolved"), n, RADIAL_EXPONENT)?);
    }
    Ok(radial_dataset(&dataset_directions(name, cfg.dim, cfg.inputs.depth)?, n, RADIAL_EXPONENT)?)
}

fn divergence_map(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let n = cfg.n.expect("resolved");
    let model = cfg.model.expect("resolved");
    let seq = if cfg.inputs.dataset.is_some() {
        from_conical_data(&dataset_points(cfg, n)?)
    } else {
        isometry_sequence(&load_cf(&cfg.inputs)?, n)?
    };
    let samples = grid_points(cfg.grid.as_ref().expect("resolved"));
    let t = &cfg.tolerances;
    let params = AebischerParams { conical: conical_config(cfg, n), tol_lo: t.tol_lo, tol_hi: t.tol_hi, convergence_tol: t.tol_hi };
    let report = aebischer_crosscheck(&seq, &samples, &params)?;

    let mut out = format!("# config: {}\n", cfg.to_json_line());
    out.push_str(&format!("# limit: {}\n", fmt_row(&ideal_coords(&report.limit, model)).join(",")));
    out.push_str(&format!(
        "# decided: {}, agreements: {}, agreement: {}\n",
        report.decided,
        report.agreements,
        g17(report.agreement())
    ));
    let mut head = vec!["index".to_string()];
    head.extend(coord_names(model, cfg.dim, ""));
    head.push("status".into());
    head.extend(coord_names(model, cfg.dim, "limit_"));
    head.extend(["tail_diameter", "conical", "agrees"].map(String::from));
    out.push_str(&head.join(","));
    out.push('\n');
    let width = coord_names(model, cfg.dim, "").len();
    for (i, row) in report.rows.iter().enumerate() {
        let c = &row.classification;
        let mut cols = vec![i.to_string()];
        cols.extend(fmt_row(&ideal_coords(&c.point, model)));
        cols.push(c.status.name().into());
        match &c.status {
            PointStatus::Convergent(y) => cols.extend(fmt_row(&ideal_coords(y, model))),
            _ => cols.extend(std::iter::repeat_n(String::new(), width)),
        }
        cols.push(g17(c.tail_diameter));
        cols.push(row.conical.as_str().into());
        cols.push(row.agrees.map(|a| a.to_string()).unwrap_or_default());
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn ext_coords(z: &ExtComplex) -> String {
    match z {
        ExtComplex::Finite(w) => format!("{},{}", g17(w.re), g17(w.im)),
        ExtComplex::Infinity => "inf,0".into(),
    }
}

fn cf_analyze(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let n = cfg.n.expect("resolved");
    let cf = load_cf(&cfg.inputs)?;
    let classical = classical_convergence(&cf, n, cfg.tolerances.tol_lo)?;
    let general = general_convergence_test(&isometry_sequence(&cf, n)?, n, cfg.tolerances.tol_hi);

    let mut out = format!("# config: {}\n", cfg.to_json_line());
    out.push_str(&format!("# classical: {}\n", classical_name(&classical)));
    if let ClassicalConvergence::Converges(v) = &classical {
        out.push_str(&format!("# value: {}\n", ext_coords(v)));
    }
    match &general {
        GeneralConvergence::Converges(x) => {
            out.push_str("# general: Converges\n");
            out.push_str(&format!("# general_limit: {}\n", fmt_row(&x.unit()).join(",")));
        }
        GeneralConvergence::No => out.push_str("# general: No\n"),
        GeneralConvergence::Undecided => out.push_str("# general: Undecided\n"),
    }
    out.push_str(&diagnostics_csv(&cf, n)?);
    Ok(out)
}

fn classical_name<V>(c: &ClassicalConvergence<V>) -> &'static str {
    match c {
        ClassicalConvergence::Converges(_) => "Converges",
        ClassicalConvergence::Diverges => "Diverges",
        ClassicalConvergence::Undecided => "Undecided",
    }
}

fn gd_params(cfg: &ExperimentConfig) -> GdParams {
    let mut p = GdParams { scale_min: cfg.inputs.scale_min, ..GdParams::default() };
    if let Some(o) = cfg.inputs.octaves {
        p.octaves = o;
    }
    p
}

fn oracle(cfg: &ExperimentConfig) -> Result<ExampleSet, RunError> {
    ExampleSet::parse(cfg.inputs.oracle.as_deref().expect("resolved")).map_err(|e| ConfigInvalid(e.to_string()).into())
}

fn rank(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let e = build_example_set(oracle(cfg)?, cfg.inputs.depth.expect("resolved"))?;
    let report = rank_iterate(&e, &gd_params(cfg), cfg.inputs.max_rank.expect("resolved"))?;
    let v = json!({
        "config": config_value(cfg),
        "outcome": report.outcome,
        "level_sizes": report.level_sizes,
        "matched_survival": report.matched_survival(),
        "report": report,
    });
    Ok(pretty(&v))
}

/// Conical estimate of `seq` on the grid, all terms used.
fn estimate(cfg: &ExperimentConfig, seq: &PointSequence, samples: &[IdealPoint]) -> Result<Value, RunError> {
    let model = cfg.model.expect("resolved");
    let verdicts = conical_estimate(seq, samples, &conical_config(cfg, seq.len()))?;
    let accepted = verdicts.iter().filter(|v| v.status == ConicalStatus::Accepted).count();
    let rows: Vec<Value> = verdicts
        .iter()
        .map(|v| {
            json!({
                "point": ideal_coords(&v.point, model),
                "status": v.status.as_str(),
                "alpha_min": v.alpha_min,
                "witness_count": v.witness_count,
            })
        })
        .collect();
    Ok(json!({ "accepted": accepted, "samples": samples.len(), "rows": rows }))
}

fn point_list(seq: &PointSequence, model: ModelName) -> Result<Vec<Vec<f64>>, RunError> {
    let mut out = Vec::with_capacity(seq.len());
    let mut err = None;
    seq.for_each_in(1..seq.len() + 1, &mut |_, p: &ModelPoint| {
        if err.is_none() {
            match p.to_model(model.into()) {
                Ok(q) => out.push(q.coords().to_vec()),
                Err(e) => err = Some(e),
            }
        }
    });
    match err {
        Some(e) => Err(e.into()),
        None => Ok(out),
    }
}

fn cf_summary(cfg: &ExperimentConfig, cf: &BallContinuedFraction, samples: &[IdealPoint]) -> Result<Value, RunError> {
    let model = cfg.model.expect("resolved");
    let t = &cfg.tolerances;
    let classical = cf.classical_convergence(cf.len(), t.tol_lo);
    let limit = match &classical {
        ClassicalConvergence::Converges(x) => Some(ideal_coords(x, model)),
        _ => None,
    };
    let flags = limit_set_estimate(&cf.inverse_orbit(), samples, t.tol_hi, t.k, cf.len())?;
    let flagged: Vec<usize> = flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect();
    Ok(json!({
        "classical": classical_name(&classical),
        "classical_limit": limit,
        "padding_count": cf.padding_count(),
        "min_rho": cf.min_rho(),
        "thetas": cf.thetas(),
        "limit_set_flagged": flagged,
    }))
}

fn construct(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let builder = cfg.inputs.builder.as_deref().expect("resolved");
    let samples = grid_points(cfg.grid.as_ref().expect("resolved"));
    let (seq, extra) = match builder {
        "cfconv" => {
            let dirs = dataset_directions(cfg.inputs.dataset.as_deref().expect("resolved"), cfg.dim, cfg.inputs.depth)?;
            // cosh ρ(z_n, γ) = (n+2)³ keeps every term well inside f64 range
            let cf = construct_prescribed_with_schedule(&dirs, cfg.n.expect("resolved"), |k| (k as f64 + 2.0).powi(3))?;
            let extra = cf_summary(cfg, &cf, &samples)?;
            (cf.inverse_orbit(), extra)
        }
        "prescribed-limit-set" => {
            let dirs = dataset_directions(cfg.inputs.dataset.as_deref().expect("resolved"), cfg.dim, cfg.inputs.depth)?;
            let cf = construct_prescribed_limit_set(&dirs, cfg.n.expect("resolved"))?;
            let extra = cf_summary(cfg, &cf, &samples)?;
            (cf.inverse_orbit(), extra)
        }
        "cantor-circle" => {
            let seq = cantor_circle_dataset(cfg.inputs.depth.expect("resolved"), cfg.n.expect("resolved"), RADIAL_EXPONENT)?;
            (seq, Value::Null)
        }
        "thm3" => {
            let e = build_example_set(oracle(cfg)?, cfg.inputs.depth.expect("resolved"))?;
            let report = rank_iterate(&e, &gd_params(cfg), cfg.inputs.max_rank.expect("resolved"))?;
            let c = thm3_construct(&e, &report, cfg.n.expect("resolved"))?;
            let violations = check_thm3(&e, &report, &c);
            let extra = json!({
                "rank_outcome": report.outcome,
                "targets": c.targets,
                "ranks": c.ranks,
                "target_alphas": c.alphas,
                "violations": violations,
            });
            (c.sequence()?, extra)
        }
        "jalpha" => {
            let seq = build_j_alpha(cfg.inputs.alpha.expect("resolved"), cfg.inputs.qmax.expect("resolved"))?;
            (seq, Value::Null)
        }
        "gdelta-rationals" => {
            let removed = rationals_up_to(cfg.inputs.qmax.expect("resolved"));
            let levels = (1..=cfg.inputs.depth.expect("resolved"))
                .map(|n| {
                    let e = 1.0 / n as f64;
                    OpenSetRep::intervals(&[(-e, 1.0 + e)])?.without(removed.iter().map(|&q| vec![q]).collect())
                })
                .collect::<conical_lab::Result<Vec<_>>>()?;
            let seq = gdelta_to_sequence(&GDeltaRep::new(levels)?, &GdeltaParams::new(vec![(-1.0, 2.0)]))?;
            (seq, json!({ "removed": removed }))
        }
        "cantor-graph" => {
            let depth = u32::try_from(cfg.inputs.depth.expect("resolved"))
                .map_err(|_| ConfigInvalid("depth out of range".into()))?;
            (cantor_graph_sequence(depth, cfg.inputs.per_side.expect("resolved"))?, Value::Null)
        }
        other => return Err(ConfigInvalid(format!("unknown builder {other:?}")).into()),
    };
    let model = cfg.model.expect("resolved");
    let v = json!({
        "config": config_value(cfg),
        "builder": builder,
        "len": seq.len(),
        "model": model,
        "points": point_list(&seq, model)?,
        "estimate": estimate(cfg, &seq, &samples)?,
        "details": extra,
    });
    Ok(pretty(&v))
}

/// Reduced fractions `a/q` in `(0, 1)` with `q ≤ qmax`, ascending.
fn rationals_up_to(qmax: u64) -> Vec<f64> {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut out: Vec<(u64, u64)> = (2..=qmax).flat_map(|q| (1..q).filter(move |&a| gcd(a, q) == 1).map(move |a| (a, q))).collect();
    out.sort_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)));
    out.into_iter().map(|(a, q)| a as f64 / q as f64).collect()
}
