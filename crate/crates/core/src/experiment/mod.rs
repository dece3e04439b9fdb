//! Batch experiments driven by JSON spec files.
//!
//! A spec names a catalog entry, an optional domain, label and prediction
//! ensembles (inline or from files) and what to write. Outputs are
//! byte-reproducible: summation order is fixed and every random draw is
//! seeded from the spec.

mod output;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

pub use output::{gap_plot_svg, CsvRow, CSV_HEADER};

use crate::centroids::{
    brute_force_centroid_with, constrained_central_label, constrained_central_prediction, default_search_box,
    f_mean_prediction, g_mean_label, BruteForceOptions, CentroidResult, Side,
};
use crate::decomposition::{
    decompose_constrained_bregman, decompose_gbregman, decompose_generic, decompose_power_mean, DecompositionReport,
};
use crate::divergences::{CatalogEntry, DivergenceSpec};
use crate::domain::Domain;
use crate::ensemble::WeightedEnsemble;
use crate::error::Error;
use crate::uniqueness::{classify_loss, Classification, ClassifyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Decompose,
    Centroid,
    Classify,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Decompose => "decompose",
            Command::Centroid => "centroid",
            Command::Classify => "classify",
            Command::Sweep => "sweep",
        })
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "decompose" => Ok(Command::Decompose),
            "centroid" => Ok(Command::Centroid),
            "classify" => Ok(Command::Classify),
            "sweep" => Ok(Command::Sweep),
            other => Err(format!("unknown command '{other}'")),
        }
    }
}

/// How decompositions are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form for g-Bregman divergences (Lagrange under equality
    /// constraints), brute force otherwise.
    #[default]
    Auto,
    Generic,
    PowerMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// An ensemble given inline or as a path relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnsembleSource {
    File { file: PathBuf },
    Inline(WeightedEnsemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Catalog parameter to vary: `alpha` or `epsilon`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// File stem; defaults to the command name.
    #[serde(default)]
    pub name: Option<String>,
    /// Formats to write; defaults depend on the command.
    #[serde(default)]
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Must match the command given on the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    pub divergence: DivergenceSpec,
    /// Overrides the catalog entry's default domain.
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub labels: Option<EnsembleSource>,
    #[serde(default)]
    pub preds: Option<EnsembleSource>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub classify: Option<ClassifyConfig>,
    /// Overrides the classifier seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, ThisError)]
pub enum ExperimentError {
    #[error("{0}")]
    Validation(String),
    #[error("{operation} failed: {source}")]
    Numerical { operation: String, source: Error },
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ExperimentError {
    /// 1 for invalid specs and i/o problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Numerical { .. } => 2,
            _ => 1,
        }
    }
}

type Outcome<T> = std::result::Result<T, ExperimentError>;

fn numerical<T>(operation: &str, r: crate::Result<T>) -> Outcome<T> {
    r.map_err(|source| ExperimentError::Numerical {
        operation: operation.into(),
        source,
    })
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Validation(msg.into())
}

/// Parses a spec, reporting the failing field path and line/column.
pub fn parse_spec(text: &str, origin: &str) -> Outcome<ExperimentSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        invalid(format!(
            "{origin}: line {} column {}: field `{path}`: {inner}",
            inner.line(),
            inner.column()
        ))
    })
}

pub fn load_spec(path: &Path) -> Outcome<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text, &path.display().to_string())
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub command: Command,
    pub spec: ExperimentSpec,
    pub entry: CatalogEntry,
    pub domain: Domain,
    pub labels: Option<WeightedEnsemble>,
    pub preds: Option<WeightedEnsemble>,
}

fn build_entry(div: &DivergenceSpec, domain: &Option<Domain>) -> crate::Result<CatalogEntry> {
    let mut div = div.clone();
    if domain.is_some() {
        div.domain = domain.clone();
    }
    div.build()
}

fn resolve_ensemble(src: &Option<EnsembleSource>, base: &Path, what: &str) -> Outcome<Option<WeightedEnsemble>> {
    match src {
        None => Ok(None),
        Some(EnsembleSource::Inline(e)) => Ok(Some(e.clone())),
        Some(EnsembleSource::File { file }) => {
            let path = base.join(file);
            let text = fs::read_to_string(&path)
                .map_err(|e| invalid(format!("{what}: cannot read {}: {e}", path.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map(Some).map_err(|e| {
                invalid(format!(
                    "{what}: {}: field `{}`: {}",
                    path.display(),
                    e.path(),
                    e.inner()
                ))
            })
        }
    }
}

/// Validates a spec against the requested command. `base` resolves ensemble file paths.
pub fn prepare(command: Command, spec: ExperimentSpec, base: &Path) -> Outcome<Prepared> {
    if let Some(c) = spec.command {
        if c != command {
            return Err(invalid(format!(
                "field `command`: spec is for '{c}' but '{command}' was requested"
            )));
        }
    }
    let entry = build_entry(&spec.divergence, &spec.domain).map_err(|e| invalid(format!("field `divergence`: {e}")))?;
    let domain = entry.as_loss().domain().clone();
    let labels = resolve_ensemble(&spec.labels, base, "labels")?;
    let preds = resolve_ensemble(&spec.preds, base, "preds")?;
    for (name, e) in [("labels", &labels), ("preds", &preds)] {
        if let Some(e) = e {
            if e.dim() != domain.dim() {
                return Err(invalid(format!(
                    "field `{name}`: points have dimension {} but the domain has {}",
                    e.dim(),
                    domain.dim()
                )));
            }
            e.check_within(&domain)
                .map_err(|err| invalid(format!("field `{name}`: {err}")))?;
        }
    }
    match command {
        Command::Decompose | Command::Sweep if labels.is_none() || preds.is_none() => {
            return Err(invalid(format!("{command} needs both `labels` and `preds`")));
        }
        Command::Centroid if labels.is_none() && preds.is_none() => {
            return Err(invalid("centroid needs `labels` or `preds`"));
        }
        _ => {}
    }
    match (&spec.sweep, command) {
        (None, Command::Sweep) => return Err(invalid("sweep needs a `sweep` field")),
        (Some(s), Command::Sweep) => {
            if s.values.is_empty() {
                return Err(invalid("field `sweep.values`: empty"));
            }
            for (i, v) in s.values.iter().enumerate() {
                let d = swept_divergence(&spec.divergence, &s.param, *v)
                    .map_err(|e| invalid(format!("field `sweep.values[{i}]`: {e}")))?;
                build_entry(&d, &spec.domain).map_err(|e| invalid(format!("field `sweep.values[{i}]`: {e}")))?;
            }
        }
        _ => {}
    }
    Ok(Prepared {
        command,
        spec,
        entry,
        domain,
        labels,
        preds,
    })
}

fn swept_divergence(div: &DivergenceSpec, param: &str, value: f64) -> crate::Result<DivergenceSpec> {
    let mut d = div.clone();
    match param {
        "alpha" => d.params.alpha = Some(value),
        "epsilon" => d.params.epsilon = Some(value),
        other => return Err(Error::InvalidInput(format!("cannot sweep parameter '{other}'"))),
    }
    Ok(d)
}

/// One decomposition as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOutput {
    pub divergence: String,
    pub d: usize,
    pub n_labels: usize,
    pub n_preds: usize,
    pub report: DecompositionReport,
}

impl DecomposeOutput {
    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            divergence: self.divergence.clone(),
            d: self.d,
            n_labels: self.n_labels,
            n_preds: self.n_preds,
            expected: self.report.expected_loss,
            noise: self.report.intrinsic_noise,
            bias: self.report.bias,
            variance: self.report.variance,
            gap: self.report.gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidOutput {
    pub divergence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_label: Option<CentroidResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_prediction: Option<CentroidResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub result: DecomposeOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub param: String,
    pub points: Vec<SweepPoint>,
}

/// The in-memory result of a run, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Decompose(DecomposeOutput),
    Centroid(CentroidOutput),
    Classify(Classification),
    Sweep(SweepOutput),
}

fn decompose_entry(
    entry: &CatalogEntry,
    domain: &Domain,
    method: Method,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
) -> Outcome<DecompositionReport> {
    match (method, entry) {
        (Method::Generic, e) => numerical(
            "decompose_generic",
            decompose_generic(e.as_loss(), labels, preds, domain),
        ),
        (Method::PowerMean, CatalogEntry::Divergence(d)) => {
            numerical("decompose_power_mean", decompose_power_mean(d, labels, preds, domain))
        }
        (Method::PowerMean, CatalogEntry::Loss(l)) => Err(invalid(format!(
            "field `method`: power_mean needs an alpha divergence, got {}",
            l.name()
        ))),
        (Method::Auto, CatalogEntry::Divergence(d)) if domain.has_equality() => numerical(
            "decompose_constrained_bregman",
            decompose_constrained_bregman(d, labels, preds, domain),
        ),
        (Method::Auto, CatalogEntry::Divergence(d)) => {
            numerical("decompose_gbregman", decompose_gbregman(d, labels, preds))
        }
        (Method::Auto, CatalogEntry::Loss(l)) => numerical(
            "decompose_generic",
            decompose_generic(l.as_ref(), labels, preds, domain),
        ),
    }
}

fn centroid_for(entry: &CatalogEntry, domain: &Domain, ens: &WeightedEnsemble, side: Side) -> Outcome<CentroidResult> {
    let brute = || {
        let opts = BruteForceOptions::default().with_search_box(default_search_box(domain, &[ens]));
        numerical(
            "brute_force_centroid",
            brute_force_centroid_with(entry.as_loss(), ens, side, domain, &opts),
        )
    };
    let CatalogEntry::Divergence(d) = entry else {
        return brute();
    };
    let (_, f) = d.dual_pair();
    match side {
        Side::SecondArg if !domain.has_equality() => numerical("g_mean_label", g_mean_label(d, ens)),
        Side::FirstArg if !domain.has_equality() => numerical("f_mean_prediction", f_mean_prediction(d, ens)),
        Side::SecondArg if f.is_identity() => {
            numerical("constrained_central_label", constrained_central_label(d, ens, domain))
        }
        Side::FirstArg if d.mapping().is_identity() => numerical(
            "constrained_central_prediction",
            constrained_central_prediction(d, ens, domain),
        ),
        _ => brute(),
    }
}

fn label_for(entry: &CatalogEntry) -> String {
    entry.as_loss().name()
}

/// Runs a prepared experiment.
pub fn execute(p: &Prepared) -> Outcome<RunResult> {
    match p.command {
        Command::Decompose => {
            let (labels, preds) = (
                p.labels.as_ref().expect("validated"),
                p.preds.as_ref().expect("validated"),
            );
            let report = decompose_entry(&p.entry, &p.domain, p.spec.method, labels, preds)?;
            Ok(RunResult::Decompose(DecomposeOutput {
                divergence: label_for(&p.entry),
                d: p.domain.dim(),
                n_labels: labels.len(),
                n_preds: preds.len(),
                report,
            }))
        }
        Command::Centroid => {
            let central_label = p
                .labels
                .as_ref()
                .map(|l| centroid_for(&p.entry, &p.domain, l, Side::SecondArg))
                .transpose()?;
            let central_prediction = p
                .preds
                .as_ref()
                .map(|y| centroid_for(&p.entry, &p.domain, y, Side::FirstArg))
                .transpose()?;
            Ok(RunResult::Centroid(CentroidOutput {
                divergence: label_for(&p.entry),
                central_label,
                central_prediction,
            }))
        }
        Command::Classify => {
            let mut cfg = p.spec.classify.clone().unwrap_or_default();
            if let Some(seed) = p.spec.seed {
                cfg.seed = seed;
            }
            Ok(RunResult::Classify(classify_loss(p.entry.as_loss(), &cfg)))
        }
        Command::Sweep => {
            let sweep = p.spec.sweep.as_ref().expect("validated");
            let (labels, preds) = (
                p.labels.as_ref().expect("validated"),
                p.preds.as_ref().expect("validated"),
            );
            let points = sweep
                .values
                .par_iter()
                .map(|v| -> Outcome<SweepPoint> {
                    let div =
                        swept_divergence(&p.spec.divergence, &sweep.param, *v).map_err(|e| invalid(e.to_string()))?;
                    let entry = build_entry(&div, &p.spec.domain).map_err(|e| invalid(e.to_string()))?;
                    let report = decompose_entry(&entry, &p.domain, p.spec.method, labels, preds)?;
                    Ok(SweepPoint {
                        value: *v,
                        result: DecomposeOutput {
                            divergence: format!("{}[{}={}]", label_for(&entry), sweep.param, v),
                            d: p.domain.dim(),
                            n_labels: labels.len(),
                            n_preds: preds.len(),
                            report,
                        },
                    })
                })
                .collect::<Outcome<Vec<_>>>()?;
            Ok(RunResult::Sweep(SweepOutput {
                param: sweep.param.clone(),
                points,
            }))
        }
    }
}

fn default_formats(command: Command) -> Vec<Format> {
    match command {
        Command::Decompose => vec![Format::Csv, Format::Json],
        Command::Centroid | Command::Classify => vec![Format::Json],
        Command::Sweep => vec![Format::Csv, Format::Json, Format::Svg],
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
    s.push('\n');
    s
}

/// Renders the requested formats as `(extension, contents)` pairs.
pub fn render(command: Command, result: &RunResult, formats: &[Format]) -> Outcome<Vec<(&'static str, String)>> {
    let formats = if formats.is_empty() {
        default_formats(command)
    } else {
        formats.to_vec()
    };
    let mut out = Vec::new();
    for f in formats {
        let item = match (f, result) {
            (Format::Json, RunResult::Decompose(d)) => ("json", to_json(d)),
            (Format::Json, RunResult::Centroid(c)) => ("json", to_json(c)),
            (Format::Json, RunResult::Classify(c)) => ("json", to_json(c)),
            (Format::Json, RunResult::Sweep(s)) => ("json", to_json(s)),
            (Format::Csv, RunResult::Decompose(d)) => ("csv", output::csv(&[d.csv_row()])),
            (Format::Csv, RunResult::Sweep(s)) => (
                "csv",
                output::csv(&s.points.iter().map(|p| p.result.csv_row()).collect::<Vec<_>>()),
            ),
            (Format::Svg, RunResult::Sweep(s)) => {
                let xs: Vec<f64> = s.points.iter().map(|p| p.value).collect();
                let gaps: Vec<f64> = s.points.iter().map(|p| p.result.report.gap).collect();
                ("svg", gap_plot_svg(&s.param, &xs, &gaps))
            }
            (f, _) => {
                return Err(invalid(format!(
                    "field `output.formats`: {f:?} is not available for {command}"
                )));
            }
        };
        out.push(item);
    }
    Ok(out)
}

/// Loads, validates, runs and writes one spec; returns the files written.
pub fn run(command: Command, spec_path: &Path, out_dir: &Path) -> Outcome<Vec<PathBuf>> {
    let spec = load_spec(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let prepared = prepare(command, spec, base)?;
    let rendered = render(command, &execute(&prepared)?, &prepared.spec.output.formats)?;
    let stem = prepared.spec.output.name.clone().unwrap_or_else(|| command.to_string());
    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut written = Vec::new();
    for (ext, contents) in rendered {
        let path = out_dir.join(format!("{stem}.{ext}"));
        fs::write(&path, contents).map_err(|e| ExperimentError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Thread count from `BVD_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Outcome<Option<usize>> {
    match std::env::var("BVD_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid(format!("BVD_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}
