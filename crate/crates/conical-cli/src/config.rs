//! Experiment configuration: a JSON file and command-line flags are merged
//! into a raw config (flags win), then resolved against per-subcommand
//! defaults and validated.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use conical_lab::limits::EscapeRadius;
use serde::{Deserialize, Serialize};

/// Schema or invariant violation in the configuration. Exit status 2.
#[derive(Debug)]
pub struct ConfigInvalid(pub String);

impl fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConfigInvalid: {}", self.0)
    }
}

impl std::error::Error for ConfigInvalid {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigInvalid> {
    Err(ConfigInvalid(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandKind {
    LemmaCheck,
    DivergenceMap,
    CfAnalyze,
    Rank,
    Construct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Ball,
    HalfSpace,
}

impl FromStr for ModelName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ball" => Ok(ModelName::Ball),
            "half-space" | "halfspace" => Ok(ModelName::HalfSpace),
            _ => Err(format!("unknown model {s:?} (expected ball or half-space)")),
        }
    }
}

impl From<ModelName> for conical_lab::geometry::Model {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Ball => conical_lab::geometry::Model::Ball,
            ModelName::HalfSpace => conical_lab::geometry::Model::HalfSpace,
        }
    }
}

/// Boundary sample grid: equally spaced on `S¹`, a Fibonacci lattice on
/// `S²`, or equally spaced on `[lo, hi]` in the half-space boundary line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    Circle { count: usize },
    Sphere { count: usize },
    Line { lo: f64, hi: f64, count: usize },
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Circle { .. } | GridSpec::Line { .. } => 2,
            GridSpec::Sphere { .. } => 3,
        }
    }

    fn validate(&self) -> Result<(), ConfigInvalid> {
        let count = match self {
            GridSpec::Circle { count } | GridSpec::Sphere { count } => *count,
            GridSpec::Line { lo, hi, count } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return invalid(format!("line grid needs finite lo < hi, got [{lo}, {hi}]"));
                }
                if *count < 2 {
                    return invalid("line grid needs at least 2 samples");
                }
                *count
            }
        };
        if count == 0 {
            return invalid("grid must have at least one sample");
        }
        Ok(())
    }
}

impl FromStr for GridSpec {
    type Err = String;
    /// `circle:<count>`, `sphere:<count>` or `line:<lo>:<hi>:<count>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("grid {s:?}: {e}"));
        let count = |t: &str| t.parse::<usize>().map_err(|e| format!("grid {s:?}: {e}"));
        match parts.as_slice() {
            ["circle", c] => Ok(GridSpec::Circle { count: count(c)? }),
            ["sphere", c] => Ok(GridSpec::Sphere { count: count(c)? }),
            ["line", lo, hi, c] => Ok(GridSpec::Line { lo: num(lo)?, hi: num(hi)?, count: count(c)? }),
            _ => Err(format!("grid {s:?}: expected circle:<n>, sphere:<n> or line:<lo>:<hi>:<n>")),
        }
    }
}

/// `scaled:<c>` (`R = c·α`) or `fixed:<R>`.
pub fn parse_radius(s: &str) -> Result<EscapeRadius, String> {
    let (kind, v) = s.split_once(':').ok_or_else(|| format!("radius {s:?}: expected scaled:<c> or fixed:<R>"))?;
    let v: f64 = v.parse().map_err(|e| format!("radius {s:?}: {e}"))?;
    match kind {
        "scaled" => Ok(EscapeRadius::Scaled(v)),
        "fixed" => Ok(EscapeRadius::Fixed(v)),
        _ => Err(format!("radius {s:?}: expected scaled:<c> or fixed:<R>")),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTolerances {
    pub tol_lo: Option<f64>,
    pub tol_hi: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "R")]
    pub radius: Option<EscapeRadius>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builder: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub octaves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qmax: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_side: Option<u32>,
}

/// Every field optional: the shape of a config file, and of the flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub subcommand: Option<SubcommandKind>,
    pub dim: Option<usize>,
    pub model: Option<ModelName>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: RawTolerances,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    #[serde(default)]
    pub inputs: Inputs,
    pub output: Option<PathBuf>,
}

fn pick<T>(over: Option<T>, base: Option<T>) -> Option<T> {
    over.or(base)
}

impl RawConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigInvalid> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigInvalid(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigInvalid(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those of `self`.
    pub fn merged(self, over: RawConfig) -> RawConfig {
        let (b, o) = (self, over);
        RawConfig {
            subcommand: pick(o.subcommand, b.subcommand),
            dim: pick(o.dim, b.dim),
            model: pick(o.model, b.model),
            n: pick(o.n, b.n),
            grid: pick(o.grid, b.grid),
            tolerances: RawTolerances {
                tol_lo: pick(o.tolerances.tol_lo, b.tolerances.tol_lo),
                tol_hi: pick(o.tolerances.tol_hi, b.tolerances.tol_hi),
                alphas: pick(o.tolerances.alphas, b.tolerances.alphas),
                k: pick(o.tolerances.k, b.tolerances.k),
                radius: pick(o.tolerances.radius, b.tolerances.radius),
            },
            seed: pick(o.seed, b.seed),
            trials: pick(o.trials, b.trials),
            inputs: Inputs {
                preset: pick(o.inputs.preset, b.inputs.preset),
                coefficients: pick(o.inputs.coefficients, b.inputs.coefficients),
                dataset: pick(o.inputs.dataset, b.inputs.dataset),
                oracle: pick(o.inputs.oracle, b.inputs.oracle),
                builder: pick(o.inputs.builder, b.inputs.builder),
                depth: pick(o.inputs.depth, b.inputs.depth),
                max_rank: pick(o.inputs.max_rank, b.inputs.max_rank),
                scale_min: pick(o.inputs.scale_min, b.inputs.scale_min),
                octaves: pick(o.inputs.octaves, b.inputs.octaves),
                alpha: pick(o.inputs.alpha, b.inputs.alpha),
                qmax: pick(o.inputs.qmax, b.inputs.qmax),
                per_side: pick(o.inputs.per_side, b.inputs.per_side),
            },
            output: pick(o.output, b.output),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_lo: f64,
    pub tol_hi: f64,
    pub alphas: Vec<f64>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub radius: EscapeRadius,
}

/// Fully resolved configuration, embedded in every report. Fields a
/// subcommand does not read are `null`. The output path is not part of the
/// experiment and is left out of the embedded copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub subcommand: SubcommandKind,
    pub dim: usize,
    pub model: Option<ModelName>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub grid: Option<GridSpec>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub trials: Option<usize>,
    pub inputs: Inputs,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Construction builders and their native boundary.
pub const BALL_BUILDERS: [&str; 3] = ["cfconv", "prescribed-limit-set", "cantor-circle"];
pub const LINE_BUILDERS: [&str; 4] = ["thm3", "jalpha", "gdelta-rationals", "cantor-graph"];
pub const DATASETS: [&str; 3] = ["singleton", "twelve", "cantor"];

const DEFAULT_ALPHAS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

fn require_none<T>(v: &Option<T>, what: &str, sub: &str) -> Result<(), ConfigInvalid> {
    if v.is_some() {
        return invalid(format!("{what} is not used by {sub}"));
    }
    Ok(())
}

/// Fills per-subcommand defaults and checks every invariant.
pub fn resolve(raw: RawConfig) -> Result<ExperimentConfig, ConfigInvalid> {
    let Some(sub) = raw.subcommand else {
        return invalid("no subcommand given (on the command line or as \"subcommand\" in the config file)");
    };
    let RawConfig { dim, model, n, grid, tolerances: t, seed, trials, mut inputs, output, .. } = raw;
    let seed = seed.unwrap_or(0);
    if sub != SubcommandKind::DivergenceMap && sub != SubcommandKind::Construct {
        require_none(&t.alphas, "alphas", subcommand_name(sub))?;
        require_none(&t.radius, "R", subcommand_name(sub))?;
    }
    let mut tol = Tolerances {
        tol_lo: t.tol_lo.unwrap_or(conical_lab::divergence::DEFAULT_TOL_LO),
        tol_hi: t.tol_hi.unwrap_or(conical_lab::divergence::DEFAULT_TOL_HI),
        alphas: DEFAULT_ALPHAS.to_vec(),
        k: t.k.unwrap_or(5),
        radius: EscapeRadius::Scaled(3f64.sqrt()),
    };

    let cfg = match sub {
        SubcommandKind::LemmaCheck => {
            require_none(&n, "N", "lemma-check")?;
            require_none(&grid, "grid", "lemma-check")?;
            require_none(&model, "model", "lemma-check")?;
            ExperimentConfig {
                subcommand: sub,
                dim: dim.unwrap_or(3),
                model: None,
                n: None,
                grid: None,
                tolerances: tol,
                seed,
                trials: Some(trials.unwrap_or(10_000)),
                inputs,
                output,
            }
        }
        SubcommandKind::DivergenceMap => {
            require_none(&trials, "trials", "divergence-map")?;
            let from_cf = inputs.preset.is_some() || inputs.coefficients.is_some();
            if from_cf && inputs.dataset.is_some() {
                return invalid("divergence-map takes either a dataset or continued-fraction coefficients, not both");
            }
            if !from_cf && inputs.dataset.is_none() {
                inputs.dataset = Some("twelve".into());
            }
            // continued-fraction sequences act on H³
            let dim = dim.unwrap_or(if from_cf { 3 } else { 2 });
            if inputs.dataset.as_deref() == Some("cantor") {
                inputs.depth = Some(inputs.depth.unwrap_or(5));
            }
            let grid = grid.unwrap_or(if dim == 3 { GridSpec::Sphere { count: 400 } } else { GridSpec::Circle { count: 360 } });
            tol.alphas = t.alphas.unwrap_or(tol.alphas);
            tol.radius = t.radius.unwrap_or(tol.radius);
            ExperimentConfig {
                subcommand: sub,
                dim,
                model: Some(model.unwrap_or(ModelName::Ball)),
                n: Some(n.unwrap_or(2000)),
                grid: Some(grid),
                tolerances: tol,
                seed,
                trials: None,
                inputs,
                output,
            }
        }
        SubcommandKind::CfAnalyze => {
            require_none(&grid, "grid", "cf-analyze")?;
            require_none(&trials, "trials", "cf-analyze")?;
            if inputs.preset.is_none() && inputs.coefficients.is_none() {
                return invalid("cf-analyze needs --preset or --coefficients");
            }
            ExperimentConfig {
                subcommand: sub,
                dim: dim.unwrap_or(3),
                model: None,
                n: Some(n.unwrap_or(100)),
                grid: None,
                tolerances: tol,
                seed,
                trials: None,
                inputs,
                output,
            }
        }
        SubcommandKind::Rank => {
            require_none(&grid, "grid", "rank")?;
            require_none(&n, "N", "rank")?;
            require_none(&trials, "trials", "rank")?;
            if inputs.oracle.is_none() {
                return invalid("rank needs --oracle");
            }
            inputs.depth = Some(inputs.depth.unwrap_or(6));
            inputs.max_rank = Some(inputs.max_rank.unwrap_or(6));
            inputs.octaves = Some(inputs.octaves.unwrap_or(2));
            ExperimentConfig {
                subcommand: sub,
                dim: dim.unwrap_or(2),
                model: None,
                n: None,
                grid: None,
                tolerances: tol,
                seed,
                trials: None,
                inputs,
                output,
            }
        }
        SubcommandKind::Construct => {
            require_none(&trials, "trials", "construct")?;
            let builder = inputs.builder.clone().unwrap_or_else(|| "cfconv".into());
            let line = LINE_BUILDERS.contains(&builder.as_str());
            if !line && !BALL_BUILDERS.contains(&builder.as_str()) {
                return invalid(format!(
                    "unknown builder {builder:?} (expected one of {})",
                    BALL_BUILDERS.iter().chain(&LINE_BUILDERS).cloned().collect::<Vec<_>>().join(", ")
                ));
            }
            let mut n_out = n;
            let mut alphas = tol.alphas.clone();
            let mut radius = tol.radius;
            match builder.as_str() {
                "cfconv" | "prescribed-limit-set" => {
                    if inputs.dataset.as_deref() == Some("cantor") {
                        inputs.depth = Some(inputs.depth.unwrap_or(5));
                    } else if inputs.dataset.is_none() {
                        inputs.dataset = Some("twelve".into());
                    }
                    n_out = Some(n.unwrap_or(if builder == "cfconv" { 1000 } else { 5000 }));
                }
                "cantor-circle" => {
                    inputs.depth = Some(inputs.depth.unwrap_or(5));
                    n_out = Some(n.unwrap_or(2000));
                }
                "thm3" => {
                    inputs.oracle = Some(inputs.oracle.clone().unwrap_or_else(|| "cantor".into()));
                    inputs.depth = Some(inputs.depth.unwrap_or(5));
                    inputs.max_rank = Some(inputs.max_rank.unwrap_or(4));
                    // N counts emitted pairs
                    n_out = Some(n.unwrap_or(512));
                    alphas = (1..=36).map(|i| i as f64 * 0.25).collect();
                    radius = EscapeRadius::Scaled(1.35);
                }
                "jalpha" => {
                    require_none(&n, "N", "the jalpha builder")?;
                    let a = inputs.alpha.unwrap_or(3.0);
                    inputs.alpha = Some(a);
                    inputs.qmax = Some(inputs.qmax.unwrap_or(200));
                    alphas = vec![a];
                    tol.k = t.k.unwrap_or(2);
                    radius = EscapeRadius::Fixed(10.0);
                }
                "gdelta-rationals" => {
                    require_none(&n, "N", "the gdelta-rationals builder")?;
                    inputs.depth = Some(inputs.depth.unwrap_or(6));
                    inputs.qmax = Some(inputs.qmax.unwrap_or(7));
                    alphas = vec![1.0, 2.0, 3.0, 4.0];
                }
                "cantor-graph" => {
                    require_none(&n, "N", "the cantor-graph builder")?;
                    inputs.depth = Some(inputs.depth.unwrap_or(5));
                    inputs.per_side = Some(inputs.per_side.unwrap_or(40));
                    alphas = vec![2.5];
                    radius = EscapeRadius::Fixed(10.0);
                }
                _ => unreachable!(),
            }
            inputs.builder = Some(builder);
            tol.alphas = t.alphas.unwrap_or(alphas);
            tol.radius = t.radius.unwrap_or(radius);
            let native = if line { ModelName::HalfSpace } else { ModelName::Ball };
            let grid = grid.unwrap_or(if line {
                GridSpec::Line { lo: 0.0, hi: 1.0, count: 201 }
            } else {
                GridSpec::Circle { count: 360 }
            });
            ExperimentConfig {
                subcommand: sub,
                dim: dim.unwrap_or(2),
                model: Some(model.unwrap_or(native)),
                n: n_out,
                grid: Some(grid),
                tolerances: tol,
                seed,
                trials: None,
                inputs,
                output,
            }
        }
    };
    validate(&cfg)?;
    Ok(cfg)
}

pub fn subcommand_name(s: SubcommandKind) -> &'static str {
    match s {
        SubcommandKind::LemmaCheck => "lemma-check",
        SubcommandKind::DivergenceMap => "divergence-map",
        SubcommandKind::CfAnalyze => "cf-analyze",
        SubcommandKind::Rank => "rank",
        SubcommandKind::Construct => "construct",
    }
}

fn positive(x: f64, what: &str) -> Result<(), ConfigInvalid> {
    if !(x > 0.0 && x.is_finite()) {
        return invalid(format!("{what} must be positive and finite, got {x}"));
    }
    Ok(())
}

pub fn validate(c: &ExperimentConfig) -> Result<(), ConfigInvalid> {
    let t = &c.tolerances;
    positive(t.tol_lo, "tol_lo")?;
    positive(t.tol_hi, "tol_hi")?;
    if !(t.tol_lo < t.tol_hi) {
        return invalid(format!("tol_lo {} must be below tol_hi {}", t.tol_lo, t.tol_hi));
    }
    if t.alphas.is_empty() {
        return invalid("alphas must not be empty");
    }
    for a in &t.alphas {
        positive(*a, "every alpha")?;
    }
    if t.alphas.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("alphas must be strictly ascending");
    }
    if t.k == 0 {
        return invalid("K must be at least 1");
    }
    match t.radius {
        EscapeRadius::Scaled(r) => positive(r, "R scale")?,
        EscapeRadius::Fixed(r) => positive(r, "R")?,
    }
    if let Some(n) = c.n {
        if n < 10 {
            return invalid(format!("N must be at least 10, got {n}"));
        }
    }
    if let Some(0) = c.trials {
        return invalid("trials must be at least 1");
    }
    let i = &c.inputs;
    for (v, what) in [(i.scale_min, "scale_min"), (i.alpha, "alpha")] {
        if let Some(x) = v {
            positive(x, what)?;
        }
    }
    if let Some(g) = &c.grid {
        g.validate()?;
        if g.dim() != c.dim {
            return invalid(format!("grid lives in dimension {} but dim is {}", g.dim(), c.dim));
        }
    }
    match c.subcommand {
        SubcommandKind::LemmaCheck => {
            if c.dim < 2 {
                return invalid("lemma-check needs dim ≥ 2");
            }
        }
        SubcommandKind::DivergenceMap => {
            if let Some(d) = &i.dataset {
                check_dataset(d, c.dim)?;
            } else if c.dim != 3 {
                return invalid("continued-fraction sequences act on H³; use dim 3");
            }
            check_cf_source(i, c.n)?;
        }
        SubcommandKind::CfAnalyze => {
            if c.dim != 3 {
                return invalid("cf-analyze works in H³; dim must be 3");
            }
            check_cf_source(i, c.n)?;
        }
        SubcommandKind::Rank => {
            if c.dim != 2 {
                return invalid("the named oracles live on the boundary line of H²; dim must be 2");
            }
            let name = i.oracle.as_deref().unwrap_or_default();
            conical_lab::countable::ExampleSet::parse(name).map_err(|e| ConfigInvalid(e.to_string()))?;
            if i.max_rank.unwrap_or(0) < 2 {
                return invalid("max_rank must be at least 2");
            }
            if i.octaves == Some(0) {
                return invalid("octaves must be at least 1");
            }
        }
        SubcommandKind::Construct => {
            let b = i.builder.as_deref().unwrap_or_default();
            if LINE_BUILDERS.contains(&b) && c.dim != 2 {
                return invalid(format!("builder {b} works on the half-plane; dim must be 2"));
            }
            match b {
                "cfconv" | "prescribed-limit-set" => check_dataset(i.dataset.as_deref().unwrap_or_default(), c.dim)?,
                "cantor-circle" if c.dim != 2 => return invalid("cantor-circle lives on S¹; dim must be 2"),
                "thm3" => {
                    conical_lab::countable::ExampleSet::parse(i.oracle.as_deref().unwrap_or_default())
                        .map_err(|e| ConfigInvalid(e.to_string()))?;
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn check_dataset(name: &str, dim: usize) -> Result<(), ConfigInvalid> {
    match (name, dim) {
        ("singleton", 2 | 3) | ("twelve", 2) | ("cantor", 2) => Ok(()),
        (n, d) if DATASETS.contains(&n) => invalid(format!("dataset {n} is not available in dimension {d}")),
        (n, _) => invalid(format!("unknown dataset {n:?} (expected one of {})", DATASETS.join(", "))),
    }
}

fn check_cf_source(i: &Inputs, n: Option<usize>) -> Result<(), ConfigInvalid> {
    if i.preset.is_some() && i.coefficients.is_some() {
        return invalid("give either a preset or a coefficient file, not both");
    }
    if i.preset.is_none() && i.coefficients.is_none() {
        return Ok(());
    }
    let cf = load_cf(i)?;
    if let (Some(len), Some(n)) = (cf.len(), n) {
        if len < n {
            return invalid(format!("coefficient list has {len} terms but N is {n}"));
        }
    }
    Ok(())
}

/// The continued fraction named by the inputs: a preset or a JSON file of
/// `[a, b]` pairs.
pub fn load_cf(i: &Inputs) -> Result<conical_lab::contfrac::ContinuedFraction, ConfigInvalid> {
    use conical_lab::contfrac::ContinuedFraction;
    match (&i.preset, &i.coefficients) {
        (Some(p), _) => ContinuedFraction::preset(p).map_err(|e| ConfigInvalid(e.to_string())),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigInvalid(format!("reading {}: {e}", path.display())))?;
            ContinuedFraction::from_json(&text).map_err(|e| ConfigInvalid(format!("{}: {e}", path.display())))
        }
        (None, None) => invalid("no continued-fraction source given"),
    }
}
