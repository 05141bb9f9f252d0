//! Command-line front end: `fit`, `predict`, `simulate`, `evaluate`,
//! `heatmap` and `weights`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use subic::data::{load_features_csv, standardize_columns, write_csv};
use subic::heatmap::{render_svg, HeatmapStyle};
use subic::metrics::{score_biclusters, BiclusterScores};
use subic::simulate::{fig2_preset, generate, SimData, SimDesign};
use subic::{
    build_weights, center_columns, extract, fit, load_csv, predict, BiclusterModel, DataMatrix, FitConfig, Partition,
    Scenario, SubicError, TargetVector,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<SubicError> for CliError {
    fn from(e: SubicError) -> Self {
        match e {
            SubicError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            SubicError::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "subic", version, about = "Supervised convex biclustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write model.json, assignments and the solver trace.
    Fit(FitArgs),
    /// Predict the target for new instances with a fitted model.
    Predict(PredictArgs),
    /// Generate a checkerboard dataset with a truth sidecar.
    Simulate(SimulateArgs),
    /// Score a model's partitions against a truth file.
    Evaluate(EvaluateArgs),
    /// Render a reordered heatmap of the data as SVG.
    Heatmap(HeatmapArgs),
    /// Dump the fusion weights for a dataset.
    Weights(WeightsArgs),
}

/// Solver and weight settings. Unset flags fall back to the config file,
/// then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// key = value file with FitConfig fields (and optionally `scenario`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long)]
    pub mu1: Option<f64>,
    #[arg(long)]
    pub mu2: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub group_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// subic | supervised-l1 | unsupervised-elastic | cobra
    #[arg(long)]
    pub scenario: Option<String>,
    /// Keep mu fixed instead of balancing residuals early on.
    #[arg(long)]
    pub no_adaptive_mu: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Scale every column to unit variance after centering.
    #[arg(long)]
    pub zscore: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Truth sidecar from `simulate`; scores are printed and written to evaluation.json.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 80)]
    pub n: usize,
    #[arg(long, default_value_t = 80)]
    pub p: usize,
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    #[arg(long)]
    pub sigma_y: Option<f64>,
    #[arg(long)]
    pub block_mean_scale: Option<f64>,
    #[arg(long)]
    pub y_mean_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_shuffle: bool,
    /// Named layout instead of a checkerboard design (`fig2`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Name of the target column.
    #[arg(long, default_value = "y")]
    pub target: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub zscore: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Ground truth written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub row_labels: Partition,
    pub col_labels: Partition,
    pub design: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cell: subic::metrics::Agreement,
    pub rows: subic::metrics::Agreement,
    pub cols: subic::metrics::Agreement,
    pub n_biclusters: usize,
    pub true_biclusters: usize,
}

impl EvaluationReport {
    fn new(scores: BiclusterScores, model: &BiclusterModel, truth: &Truth) -> Self {
        EvaluationReport {
            cell: scores.cell,
            rows: scores.rows,
            cols: scores.cols,
            n_biclusters: model.n_biclusters(),
            true_biclusters: truth.row_labels.k() * truth.col_labels.k(),
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// summaries to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "subic: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(&a, out, err),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Heatmap(a) => cmd_heatmap(&a, out),
        Command::Weights(a) => cmd_weights(&a, out, err),
    }
}

/// Defaults, overridden by the config file, overridden by flags.
pub fn resolve_config(flags: &SolverFlags) -> CliResult<FitConfig> {
    let mut cfg = FitConfig::default();
    let mut scenario = None;
    if let Some(path) = &flags.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(v) = table.remove("scenario") {
            let name = v
                .as_str()
                .ok_or_else(|| CliError::Usage("config: scenario must be a string".into()))?;
            scenario = Some(name.parse::<Scenario>()?);
        }
        cfg = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    }
    if let Some(s) = &flags.scenario {
        scenario = Some(s.parse::<Scenario>()?);
    }
    if let Some(s) = scenario {
        cfg.apply_scenario(s);
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = flags.$field { cfg.$field = v; })*
        };
    }
    take!(lambda1, lambda2, phi, knn, mu1, mu2, delta1, delta2, tol, max_iter, seed);
    if flags.group_tol.is_some() {
        cfg.group_tol = flags.group_tol;
    }
    if flags.no_adaptive_mu {
        cfg.adaptive_mu = false;
    }
    cfg.validate()?;
    if let Some(g) = cfg.group_tol {
        if !(g > 0.0 && g.is_finite()) {
            return Err(CliError::Usage(format!("group_tol must be finite and > 0, got {g}")));
        }
    }
    Ok(cfg)
}

fn prepare(data: &Path, target: &str, zscore: bool, err: &mut dyn Write) -> CliResult<(DataMatrix, TargetVector)> {
    let (raw, y) = load_csv(data, target)?;
    let constant = raw.constant_columns();
    if !constant.is_empty() {
        let names: Vec<&str> = constant.iter().map(|&j| raw.column_names[j].as_str()).collect();
        let _ = writeln!(err, "warning: constant columns kept: {}", names.join(", "));
    }
    let mut x = center_columns(&raw);
    if zscore {
        x = standardize_columns(&x);
    }
    Ok((x, y))
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = create_file(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> CliResult<BiclusterModel> {
    Ok(BiclusterModel::from_json(&read_text(path)?)?)
}

fn load_truth(path: &Path) -> CliResult<Truth> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Columns that end up in a column cluster with at least one other column.
pub fn selected_columns(model: &BiclusterModel) -> usize {
    model.col_labels.sizes().iter().filter(|&&s| s > 1).sum()
}

pub fn evaluate_model(model: &BiclusterModel, truth: &Truth) -> CliResult<EvaluationReport> {
    let scores = score_biclusters(&model.row_labels, &model.col_labels, &truth.row_labels, &truth.col_labels)?;
    Ok(EvaluationReport::new(scores, model, truth))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve_config(&a.solver)?;
    let (x, y) = prepare(&a.data, &a.target, a.zscore, err)?;
    let truth = a.truth.as_deref().map(load_truth).transpose()?;
    let result = fit(&x, &y, &cfg)?;
    let model = extract(&result, &x, &y, &cfg)?;

    let dir = &a.out_dir;
    write_text(&dir.join("model.json"), &(model.to_json()? + "\n"))?;
    model.write_row_assignments(create_file(&dir.join("rows.csv"))?)?;
    model.write_col_assignments(create_file(&dir.join("columns.csv"))?)?;
    result.write_trace(create_file(&dir.join("trace.csv"))?)?;

    if !model.converged {
        let _ = writeln!(
            err,
            "warning: solver stopped after {} iterations without reaching tol {} (primal {:.3e}, dual {:.3e})",
            model.iterations, cfg.tol, result.state.primal_residual, result.state.dual_residual
        );
    }
    let _ = writeln!(
        out,
        "rows {} cols {} | row clusters {} | column clusters {} | selected columns {} | biclusters {} | iterations {} | converged {}",
        x.n(),
        x.p(),
        model.row_labels.k(),
        model.col_labels.k(),
        selected_columns(&model),
        model.n_biclusters(),
        model.iterations,
        model.converged
    );
    if let Some(truth) = truth {
        let report = evaluate_model(&model, &truth)?;
        write_text(&dir.join("evaluation.json"), &to_json(&report))?;
        let _ = writeln!(
            out,
            "vs truth: cell RI {:.4} ARI {:.4} | rows RI {:.4} ARI {:.4} | cols RI {:.4} ARI {:.4}",
            report.cell.ri, report.cell.ari, report.rows.ri, report.rows.ari, report.cols.ri, report.cols.ari
        );
    }
    Ok(())
}

/// Reads the model's feature columns (by name) from a CSV, in model order.
fn model_features(path: &Path, model: &BiclusterModel) -> CliResult<(Vec<String>, Array2<f64>)> {
    let (names, ids, x) = load_features_csv(path, &[])?;
    let idx: Vec<usize> = model
        .column_names
        .iter()
        .map(|c| {
            names
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| CliError::Data(format!("{}: missing feature column `{c}`", path.display())))
        })
        .collect::<CliResult<_>>()?;
    let sel = Array2::from_shape_fn((x.nrows(), idx.len()), |(i, j)| x[[i, idx[j]]]);
    Ok((ids, sel))
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let (ids, x) = model_features(&a.data, &model)?;
    let k = model.row_labels.k();
    let mut text = String::from("row_id,y_hat");
    for r in 1..=k {
        text.push_str(&format!(",q_{r}"));
    }
    text.push('\n');
    for (id, row) in ids.iter().zip(x.rows()) {
        let p = predict(&row.to_vec(), &model)?;
        text.push_str(&csv_field(id));
        text.push_str(&format!(",{:?}", p.y_hat));
        for q in &p.q {
            text.push_str(&format!(",{q:?}"));
        }
        text.push('\n');
    }
    match &a.out {
        Some(path) => write_text(path, &text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let (sim, design): (SimData, serde_json::Value) = match a.preset.as_deref() {
        Some("fig2") => (
            fig2_preset(a.sigma, a.seed)?,
            serde_json::json!({ "preset": "fig2", "sigma": a.sigma, "seed": a.seed }),
        ),
        Some(other) => return Err(CliError::Usage(format!("unknown preset `{other}` (known: fig2)"))),
        None => {
            let base = SimDesign::default();
            let d = SimDesign {
                n: a.n,
                p: a.p,
                row_clusters: a.rows,
                col_clusters: a.cols,
                sigma: a.sigma,
                sigma_y: a.sigma_y.unwrap_or(base.sigma_y),
                block_mean_scale: a.block_mean_scale.unwrap_or(base.block_mean_scale),
                y_mean_scale: a.y_mean_scale.unwrap_or(base.y_mean_scale),
                shuffle: !a.no_shuffle,
                seed: a.seed,
            };
            let sim = generate(&d)?;
            (sim, serde_json::to_value(&d).expect("design serializes"))
        }
    };
    let y = TargetVector::new(sim.y.values.clone(), a.target.clone())?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Data(format!("{}: {e}", a.out_dir.display())))?;
    let data_path = a.out_dir.join("data.csv");
    let truth_rows = vec![("_truth_row".to_string(), sim.truth_rows.labels().to_vec())];
    write_csv(&data_path, &sim.x, &y, &truth_rows)?;
    let truth = Truth {
        row_labels: sim.truth_rows.clone(),
        col_labels: sim.truth_cols.clone(),
        design,
    };
    write_text(&a.out_dir.join("truth.json"), &to_json(&truth))?;
    let _ = writeln!(
        out,
        "wrote {} ({} x {}, {} row clusters, {} column clusters)",
        data_path.display(),
        sim.x.n(),
        sim.x.p(),
        sim.truth_rows.k(),
        sim.truth_cols.k()
    );
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let truth = load_truth(&a.truth)?;
    let text = to_json(&evaluate_model(&model, &truth)?);
    match &a.out {
        Some(path) => write_text(path, &text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

pub fn cmd_heatmap(a: &HeatmapArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let (_, raw) = model_features(&a.data, &model)?;
    if raw.nrows() != model.row_labels.m() {
        return Err(CliError::Data(format!(
            "{} has {} rows, model was fitted on {}",
            a.data.display(),
            raw.nrows(),
            model.row_labels.m()
        )));
    }
    let x = Array2::from_shape_fn(raw.dim(), |(i, j)| {
        (raw[[i, j]] - model.column_means[j]) / model.column_scales[j]
    });
    let svg = render_svg(&x, &model.row_labels, &model.col_labels, &HeatmapStyle::default())?;
    write_text(&a.out, &svg)?;
    let _ = writeln!(out, "wrote {}", a.out.display());
    Ok(())
}

pub fn cmd_weights(a: &WeightsArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve_config(&a.solver)?;
    let (x, y) = prepare(&a.data, &a.target, a.zscore, err)?;
    let w = build_weights(&x, &y, &cfg)?;
    w.write_csv(create_file(&a.out)?)?;
    let _ = writeln!(
        out,
        "{} column pairs, {} row pairs",
        w.col_pairs.len(),
        w.row_pairs.len()
    );
    Ok(())
}
