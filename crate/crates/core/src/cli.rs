//! Command-line front end: `select`, `fit`, `gradcheck`, `simulate`, `bench`.
//!
//! Every flag may also be given in a plain-text `key = value` file passed
//! with `--config`; keys are long flag names without the dashes. Flags on
//! the command line override the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Axis};

use crate::bfgs::BfgsOptions;
use crate::cv::{rmsecv_with_gradient, weighted_rmsecv, CvPlan};
use crate::data_io::artif::{random_dataset, random_weights};
use crate::data_io::report::report_to_string;
use crate::data_io::{generate_artif, load_dataset_csv, write_dataset_csv, ArtifConfig, CsvOptions};
use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};
use crate::fd;
use crate::jacobian::diagnostics::{residual_jacobian, ResidualJacobianMethod};
use crate::jacobian::{residual, wpls_with_jacobian, WeightVector};
use crate::objective::{
    embedded_abic_objective, mrpq, mrpq_value_and_gradient, objective_value, ObjectiveConfig,
    ObjectiveKind,
};
use crate::selection::{srcek_select, Criterion, SelectionConfig, WinnerKind};
use crate::wpls::{wpls_implicit, wpls_vanilla};

/// `println!` that ignores a closed standard output.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "srcek", version, about = "PLS channel selection by predictor-weight optimization")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Plain-text `key = value` file of default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize predictor weights and select a channel subset.
    Select(SelectArgs),
    /// Fit a PLS model and print its regression vector.
    Fit(FitArgs),
    /// Compare every analytic derivative against finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a correlated-groups synthetic dataset as CSV files.
    Simulate(SimulateArgs),
    /// Time the residual-Jacobian methods over a range of channel counts.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with one object per row.
    #[arg(long, value_name = "PATH", conflicts_with = "artif")]
    pub data: Option<PathBuf>,
    /// Header name or 1-based column of the response (default: last column).
    #[arg(long, value_name = "COLUMN")]
    pub response: Option<String>,
    /// Header name or 1-based column of response weights.
    #[arg(long, value_name = "COLUMN")]
    pub weight_column: Option<String>,
    /// Field delimiter of the CSV file.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The CSV file has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Use the training part of a synthetic correlated-groups dataset.
    #[arg(long)]
    pub artif: bool,
    #[command(flatten)]
    pub artif_params: ArtifArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ArtifArgs {
    /// Synthetic design: total number of objects.
    #[arg(long, default_value_t = 400)]
    pub artif_objects: usize,
    /// Synthetic design: number of channels.
    #[arg(long, default_value_t = 300)]
    pub artif_channels: usize,
    /// Synthetic design: channels per correlated group.
    #[arg(long, default_value_t = 10)]
    pub artif_group_size: usize,
    /// Synthetic design: number of relevant groups.
    #[arg(long, default_value_t = 5)]
    pub artif_groups: usize,
    /// Synthetic design: correlation within a group.
    #[arg(long, default_value_t = 0.9)]
    pub artif_correlation: f64,
    /// Synthetic design: comma-separated response coefficients.
    #[arg(long, value_delimiter = ',', default_value = "5,4,3,2,1")]
    pub artif_coefficients: Vec<f64>,
    /// Synthetic design: response noise standard deviation.
    #[arg(long, default_value_t = ArtifConfig::default().noise_sd)]
    pub artif_noise: f64,
    /// Synthetic design: fraction of objects in the training part.
    #[arg(long, default_value_t = 0.25)]
    pub artif_train_fraction: f64,
}

impl ArtifArgs {
    fn config(&self, seed: u64) -> ArtifConfig {
        ArtifConfig {
            n_objects: self.artif_objects,
            n_channels: self.artif_channels,
            group_size: self.artif_group_size,
            n_relevant_groups: self.artif_groups,
            within_group_correlation: self.artif_correlation,
            coefficients: self.artif_coefficients.clone(),
            noise_sd: self.artif_noise,
            train_fraction: self.artif_train_fraction,
            seed,
        }
    }
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Dataset> {
        if self.artif {
            return Ok(generate_artif(&self.artif_params.config(seed))?.train);
        }
        let path = self.data.as_ref().ok_or_else(|| {
            SrcekError::InvalidArgument("either --data or --artif is required".into())
        })?;
        if !self.delimiter.is_ascii() {
            return Err(SrcekError::InvalidArgument("delimiter must be ASCII".into()));
        }
        load_dataset_csv(
            path,
            &CsvOptions {
                delimiter: self.delimiter as u8,
                header: !self.no_header,
                response_column: self.response.clone(),
                weight_column: self.weight_column.clone(),
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Rmsecv,
    Abic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Rmsecv,
    Abic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanKind {
    /// Monte-Carlo delete-d partitions.
    Mc,
    /// Interleaved groups.
    Interleaved,
    /// Partitions read from --cv-plan.
    File,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// How objects are split into calibration and test groups.
    #[arg(long, value_enum, default_value_t = PlanKind::Mc)]
    pub cv: PlanKind,
    /// Test objects per Monte-Carlo fold (default m - round(m^0.75)).
    #[arg(long)]
    pub cv_d: Option<usize>,
    /// Number of Monte-Carlo folds (default 2m).
    #[arg(long)]
    pub cv_folds: Option<usize>,
    /// Seed of the Monte-Carlo plan (default: --seed).
    #[arg(long)]
    pub cv_seed: Option<u64>,
    /// Number of interleaved groups.
    #[arg(long, default_value_t = 5)]
    pub cv_groups: usize,
    /// Plan file for `--cv file`.
    #[arg(long, value_name = "PATH")]
    pub cv_plan: Option<PathBuf>,
}

impl PlanArgs {
    fn build(&self, m: usize, seed: u64) -> Result<CvPlan> {
        match self.cv {
            PlanKind::Mc => CvPlan::monte_carlo(m, self.cv_d, self.cv_folds, self.cv_seed.unwrap_or(seed)),
            PlanKind::Interleaved => CvPlan::interleaved(m, self.cv_groups),
            PlanKind::File => {
                let path = self.cv_plan.as_ref().ok_or_else(|| {
                    SrcekError::InvalidArgument("--cv file requires --cv-plan".into())
                })?;
                CvPlan::read_file(path)
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    /// Iteration limit of the optimizer.
    #[arg(long, default_value_t = BfgsOptions::default().max_iterations)]
    pub max_iter: usize,
    /// Limit on objective evaluations of either kind.
    #[arg(long, default_value_t = BfgsOptions::default().max_evaluations)]
    pub max_evals: usize,
    /// Gradient norm that stops the optimizer.
    #[arg(long, default_value_t = BfgsOptions::default().grad_norm_tol)]
    pub grad_tol: f64,
    /// Relative objective change that stops the optimizer (0 disables).
    #[arg(long, default_value_t = BfgsOptions::default().rel_obj_change_tol)]
    pub rel_tol: f64,
    /// Sufficient-decrease constant of the line search.
    #[arg(long, default_value_t = BfgsOptions::default().armijo_c1)]
    pub armijo_c1: f64,
    /// Step shrink factor of the line search.
    #[arg(long, default_value_t = BfgsOptions::default().backtrack_factor)]
    pub backtrack: f64,
    /// First step length tried by the line search.
    #[arg(long, default_value_t = BfgsOptions::default().initial_step)]
    pub initial_step: f64,
    /// Initial inverse Hessian is this multiple of the identity.
    #[arg(long, default_value_t = BfgsOptions::default().initial_hessian_scale)]
    pub hessian_scale: f64,
}

impl OptimizerArgs {
    fn options(&self) -> BfgsOptions {
        BfgsOptions {
            initial_hessian_scale: self.hessian_scale,
            max_iterations: self.max_iter,
            max_evaluations: self.max_evals,
            grad_norm_tol: self.grad_tol,
            rel_obj_change_tol: self.rel_tol,
            armijo_c1: self.armijo_c1,
            backtrack_factor: self.backtrack,
            initial_step: self.initial_step,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of PLS factors.
    #[arg(long = "l", value_name = "FACTORS")]
    pub factors: usize,
    /// Objective minimized over the predictor weights.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Abic)]
    pub objective: ObjectiveArg,
    /// Lower exponent of the model-size surrogate.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Upper exponent of the model-size surrogate.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Largest subset size scored (default min(n, 50)).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Criterion choosing among the scored subsets.
    #[arg(long, value_enum, default_value_t = CriterionArg::Abic)]
    pub criterion: CriterionArg,
    /// Re-optimize the weights on the winning subset.
    #[arg(long)]
    pub post_optimize: bool,
    /// Report file (JSON).
    #[arg(long, short, default_value = "srcek_report.json")]
    pub output: PathBuf,
    /// Seed of the Monte-Carlo plan and synthetic data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Vanilla,
    Implicit,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of PLS factors.
    #[arg(long = "l", value_name = "FACTORS")]
    pub factors: usize,
    /// Explicit or implicit deflation.
    #[arg(long, value_enum, default_value_t = FitMethod::Vanilla)]
    pub method: FitMethod,
    /// Autoscale the channels before fitting.
    #[arg(long)]
    pub autoscale: bool,
    /// Seed of the synthetic data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Seed of the random instance.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Objects in the random instance.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Channels in the random instance.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Number of PLS factors.
    #[arg(long = "l", default_value_t = 2)]
    pub factors: usize,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub artif: ArtifArgs,
    /// Directory receiving train.csv, external.csv and truth.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Seed of the synthetic data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Calibration objects.
    #[arg(long, default_value_t = 40)]
    pub m: usize,
    /// Test objects.
    #[arg(long, default_value_t = 10)]
    pub mtest: usize,
    /// Number of PLS factors.
    #[arg(long = "l", default_value_t = 5)]
    pub factors: usize,
    /// Comma-separated channel counts.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000")]
    pub n: Vec<usize>,
    /// Timed repetitions per cell (the median is reported).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Skip the slow analytic method.
    #[arg(long)]
    pub skip_slow: bool,
    /// Write the table here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Seed of the random instances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Reads a `key = value` file into flag arguments. `#` starts a comment;
/// `true`/`false` values switch boolean flags.
pub fn config_file_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| SrcekError::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SrcekError::Parse {
            path: path.display().to_string(),
            row: i + 1,
            column: 1,
            message: "expected `key = value`".into(),
        })?;
        let key = k.trim().trim_start_matches("--");
        let value = v.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Splices config-file arguments in right after the subcommand name so that
/// later command-line flags win.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    if let Some(bin) = it.next() {
        rest.push(bin);
    }
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            path = it.next().map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let extra = config_file_args(&path)?;
    let pos = rest
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |(i, _)| i + 1);
    rest.splice(pos..pos, extra);
    Ok(rest)
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                out!("{}", e.to_string().trim_end());
                return 0;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("error: invalid arguments"));
            return 2;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Select(a) => cmd_select(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Builds the selection configuration a `select` invocation describes.
pub fn selection_config(a: &SelectArgs, data: &Dataset) -> Result<SelectionConfig> {
    Ok(SelectionConfig {
        objective: ObjectiveConfig {
            kind: match a.objective {
                ObjectiveArg::Rmsecv => ObjectiveKind::Rmsecv,
                ObjectiveArg::Abic => ObjectiveKind::EmbeddedAbic,
            },
            p: a.p,
            q: a.q,
            factors: a.factors,
            plan: a.plan.build(data.n_objects(), a.seed)?,
        },
        optimizer: a.optimizer.options(),
        k_max: a.k_max,
        criterion: match a.criterion {
            CriterionArg::Rmsecv => Criterion::MinRmsecv,
            CriterionArg::Abic => Criterion::MinAbic,
        },
        post_optimize: a.post_optimize,
        seed: a.seed,
    })
}

fn channel_name(data: &Dataset, j: usize) -> String {
    data.channel_labels
        .as_ref()
        .map_or_else(|| (j + 1).to_string(), |l| l[j].clone())
}

fn cmd_select(a: &SelectArgs) -> Result<i32> {
    let data = a.data.load(a.seed)?;
    let cfg = selection_config(a, &data)?;
    let report = srcek_select(&data, &cfg)?;
    let text = report_to_string(&report)?;
    std::fs::write(&a.output, text).map_err(|e| SrcekError::io(&a.output, e))?;
    let w = &report.winner;
    match w.kind {
        WinnerKind::Trivial => out!(
            "winner: trivial model, rmsecv {:.6}, abic {:.6}",
            w.rmsecv, w.abic
        ),
        WinnerKind::Pls => {
            let names: Vec<String> = w.channels.iter().map(|&j| channel_name(&data, j)).collect();
            out!(
                "winner: {} channels [{}], {} factors, rmsecv {:.6}, abic {:.6}",
                w.channels.len(),
                names.join(","),
                w.factors,
                w.rmsecv,
                w.abic
            );
        }
    }
    out!("report: {}", a.output.display());
    Ok(0)
}

fn cmd_fit(a: &FitArgs) -> Result<i32> {
    let data = a.data.load(a.seed)?;
    let lambda = if a.autoscale {
        crate::data_io::autoscale_weights(&data).0
    } else {
        Array1::ones(data.n_channels())
    };
    let weighted = data.weighted(&lambda)?;
    let (model, _) = match a.method {
        FitMethod::Vanilla => wpls_vanilla(&weighted, a.factors)?,
        FitMethod::Implicit => wpls_implicit(&weighted, a.factors)?,
    };
    out!("factors_used {}", model.factors_used);
    out!("beta0 {:e}", model.beta0);
    for j in 0..data.n_channels() {
        // coefficient on the original (unweighted) channel
        out!("beta {} {:e}", channel_name(&data, j), model.beta[j] * lambda[j]);
    }
    Ok(0)
}

/// One finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub name: String,
    pub max_rel_error: f64,
}

/// Runs every analytic derivative against central differences on a seeded
/// random instance with random response weights and an interleaved
/// five-group plan.
pub fn gradcheck(seed: u64, m: usize, n: usize, l: usize) -> Result<Vec<GradcheckRow>> {
    let data = random_dataset(m, n, seed, true);
    let lam0 = random_weights(n, seed.wrapping_add(1));
    let lambda = WeightVector(lam0.clone());
    let mut rows = Vec::new();
    let mut push = |name: &str, a: &Array1<f64>, b: &Array1<f64>| {
        rows.push(GradcheckRow {
            name: name.into(),
            max_rel_error: fd::rel_error(a, b),
        })
    };

    let jb = wpls_with_jacobian(&data, l, &lambda)?;
    let alpha_of = |x: &Array1<f64>| Ok(wpls_with_jacobian(&data, l, &WeightVector(x.clone()))?.alpha);
    let num = fd::jacobian(alpha_of, &lam0)?;
    push(
        "dalpha",
        &jb.dalpha.iter().copied().collect(),
        &num.iter().copied().collect(),
    );
    let b0 = |x: &Array1<f64>| Ok(wpls_with_jacobian(&data, l, &WeightVector(x.clone()))?.beta0);
    push("grad_beta0", &jb.grad_beta0, &fd::gradient(b0, &lam0)?);

    let cal: Vec<usize> = (0..m).filter(|i| i % 4 != 0).collect();
    let test: Vec<usize> = (0..m).filter(|i| i % 4 == 0).collect();
    let (c, t) = (data.select_objects(&cal), data.select_objects(&test));
    let num = fd::jacobian(|x| residual(&c, &t, l, &WeightVector(x.clone())), &lam0)?;
    let num: Array1<f64> = num.iter().copied().collect();
    for method in [ResidualJacobianMethod::FastAnalytic, ResidualJacobianMethod::SlowAnalytic] {
        let rb = residual_jacobian(method, &c, &t, l, &lambda)?;
        push(
            &format!("dresidual_{}", method.name()),
            &rb.dresidual.iter().copied().collect(),
            &num,
        );
    }

    let plan = CvPlan::interleaved(m, 5)?;
    let cv = rmsecv_with_gradient(&data, &plan, l, &lambda)?;
    let f = |x: &Array1<f64>| Ok(weighted_rmsecv(&data, &plan, l, &WeightVector(x.clone()))?.rmsecv);
    push("grad_rmsecv", cv.gradient.as_ref().expect("gradient"), &fd::gradient(f, &lam0)?);

    for (p, q) in [(1.0, 2.0), (0.8, 2.4), (1.0, 2.5)] {
        let (_, g) = mrpq_value_and_gradient(&lam0, p, q)?;
        let num = fd::gradient(|x| mrpq(x, p, q), &lam0)?;
        push(&format!("grad_mrpq_{p}_{q}"), &g, &num);
    }

    let cfg = ObjectiveConfig {
        kind: ObjectiveKind::EmbeddedAbic,
        p: 1.0,
        q: 2.0,
        factors: l,
        plan,
    };
    let cv = embedded_abic_objective(&data, &cfg, &lambda)?;
    let num = fd::gradient(|x| objective_value(&data, &cfg, &WeightVector(x.clone())), &lam0)?;
    push("grad_embedded_abic", &cv.gradient, &num);
    Ok(rows)
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<i32> {
    let rows = gradcheck(a.seed, a.m, a.n, a.factors)?;
    let mut ok = true;
    for r in &rows {
        let pass = r.max_rel_error <= a.tol;
        ok &= pass;
        out!(
            "{:<34} {:.3e} {}",
            r.name,
            r.max_rel_error,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let cfg = a.artif.config(a.seed);
    let d = generate_artif(&cfg)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| SrcekError::io(&a.out_dir, e))?;
    let train = a.out_dir.join("train.csv");
    let external = a.out_dir.join("external.csv");
    let truth = a.out_dir.join("truth.json");
    write_dataset_csv(&d.train, &train)?;
    write_dataset_csv(&d.external, &external)?;
    let text = serde_json::json!({
        "config": cfg,
        "relevant_channels": d.truth.relevant_channels.iter().map(|j| j + 1).collect::<Vec<_>>(),
        "coefficients": d.truth.coefficients,
        "group_channels": d.truth.group_channels.iter().map(|j| j + 1).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&text).expect("serializable") + "\n";
    std::fs::write(&truth, text).map_err(|e| SrcekError::io(&truth, e))?;
    out!("wrote {}, {}, {}", train.display(), external.display(), truth.display());
    Ok(0)
}

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub method: ResidualJacobianMethod,
    pub median_seconds: f64,
}

/// Median wall time of each residual-Jacobian method for each channel count
/// on seeded random calibration/test groups.
pub fn bench_residual_jacobians(
    m: usize,
    m_test: usize,
    l: usize,
    ns: &[usize],
    reps: usize,
    methods: &[ResidualJacobianMethod],
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let instances: Vec<_> = ns
        .iter()
        .map(|&n| {
            let all = random_dataset(m + m_test, n, seed ^ n as u64, false);
            let cal = all.select_objects(&(0..m).collect::<Vec<_>>());
            let test = all.select_objects(&(m..m + m_test).collect::<Vec<_>>());
            let lambda = WeightVector(random_weights(n, seed.wrapping_add(n as u64)));
            (cal, test, lambda)
        })
        .collect();
    // repetitions interleave across channel counts
    let mut times = vec![vec![Vec::with_capacity(reps.max(1)); methods.len()]; ns.len()];
    for _ in 0..reps.max(1) {
        for (i, (cal, test, lambda)) in instances.iter().enumerate() {
            for (j, &method) in methods.iter().enumerate() {
                // short calls repeat until one timing unit lasts 50 ms
                let t0 = Instant::now();
                let mut calls = 0u32;
                while calls == 0 || t0.elapsed() < Duration::from_millis(50) {
                    let rb = residual_jacobian(method, cal, test, l, lambda)?;
                    std::hint::black_box(rb.dresidual.sum_axis(Axis(0)));
                    calls += 1;
                }
                times[i][j].push(t0.elapsed().as_secs_f64() / f64::from(calls));
            }
        }
    }
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        for (j, &method) in methods.iter().enumerate() {
            let t = &mut times[i][j];
            t.sort_by(f64::total_cmp);
            rows.push(BenchRow {
                n,
                method,
                median_seconds: t[t.len() / 2],
            });
        }
    }
    Ok(rows)
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let mut methods = vec![ResidualJacobianMethod::FastAnalytic];
    if !a.skip_slow {
        methods.push(ResidualJacobianMethod::SlowAnalytic);
    }
    methods.push(ResidualJacobianMethod::Numeric);
    let rows = bench_residual_jacobians(a.m, a.mtest, a.factors, &a.n, a.reps, &methods, a.seed)?;
    let mut out = String::from("n,method,median_seconds\n");
    for r in &rows {
        out.push_str(&format!("{},{},{:.6e}\n", r.n, r.method.name(), r.median_seconds));
    }
    match &a.output {
        Some(p) => std::fs::write(p, out).map_err(|e| SrcekError::io(p, e))?,
        None => out!("{}", out.trim_end()),
    }
    Ok(0)
}
