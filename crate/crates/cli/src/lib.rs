//! `censored-svm` command-line front end.
//!
//! Exit codes: 0 success, 1 user error (bad flags or data), 2 internal error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use censored_svm::censoring::ipcw_weights;
use censored_svm::data::load_csv;
use censored_svm::model_selection::fit_cv;
use censored_svm::simulation::{
    calibrate_censoring_constant, run_benchmark, BenchmarkConfig, Method, SimulationSetting, CALIBRATION_DRAWS,
    DEFAULT_EVAL_DRAWS,
};
use censored_svm::solver::fit;
use censored_svm::{
    CensoredSvmModel, CensoringMethod, CvGrid, CvSetup, Error, FitConfig, Form, KernelSpec, LossSpec, ResponseTransform,
};

#[derive(Parser, Debug)]
#[command(name = "censored-svm", version, about = "Support vector machines for right-censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model at a fixed (kernel, lambda) and write it as JSON.
    Fit(FitArgs),
    /// Predict with a saved model; writes the input columns plus "prediction".
    Predict(PredictArgs),
    /// Cross-validate over a (1/lambda, sigma) grid with the Gaussian kernel.
    Cv(CvArgs),
    /// Run the simulation benchmark.
    Simulate(SimulateArgs),
    /// Calibrate the uniform censoring constant of a simulation setting.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the observed-time column.
    #[arg(long, default_value = "time")]
    time: String,
    /// Name of the event-indicator column (1 = failure observed, 0 = censored).
    #[arg(long, default_value = "status")]
    status: String,
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    /// hinge | squared | absolute | quantile:<alpha>
    #[arg(long, default_value = "absolute")]
    loss: String,
    /// identity | cutoff:<rho>
    #[arg(long, default_value = "identity")]
    transform: String,
    /// none | km | cox | gkm:<bandwidth>
    #[arg(long, default_value = "km")]
    censoring: String,
    /// Lower bound applied to the estimated censoring survival.
    #[arg(long, default_value_t = censored_svm::censoring::DEFAULT_FLOOR)]
    floor: f64,
    /// penalized | constrained
    #[arg(long, default_value = "penalized")]
    form: String,
    /// Seed for the solver's coordinate order (and fold assignment in cv).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Duality-gap tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// linear | poly:<degree>:<offset> | rbf:<sigma>
    #[arg(long, default_value = "rbf:1")]
    kernel: String,
    #[arg(long)]
    lambda: f64,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    /// Model JSON written by `fit` or `cv`.
    #[arg(long)]
    model: PathBuf,
    /// CSV holding at least the model's covariate columns.
    #[arg(long)]
    data: PathBuf,
    /// Clip predictions at the model's bound.
    #[arg(long)]
    clipped: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Number of folds.
    #[arg(long = "cv", default_value_t = 5)]
    folds: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
    grid_invlambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.4")]
    grid_sigma: Vec<f64>,
    /// Score validation folds with unclipped predictions.
    #[arg(long)]
    unclipped: bool,
    /// Output report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the model refit on all data with the selected pair.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_value = "1")]
    settings: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Comma-separated: censored-svm, censored-svm-cox, ignore-censoring-svm,
    /// cox-median, censored-svm-rfe.
    #[arg(long, value_delimiter = ',', default_value = "censored-svm,ignore-censoring-svm,cox-median")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fresh draws used to evaluate each risk.
    #[arg(long, default_value_t = DEFAULT_EVAL_DRAWS)]
    n_eval: usize,
    #[arg(long = "cv", default_value_t = 5)]
    folds: usize,
    /// penalized | constrained
    #[arg(long, default_value = "constrained")]
    form: String,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = CALIBRATION_DRAWS)]
    calibration_draws: usize,
    /// Per-replication CSV.
    #[arg(long)]
    out: PathBuf,
    /// Summary CSV (quartiles per setting, n and method).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    setting: u8,
    /// Target censoring fraction; defaults to the setting's own.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, default_value_t = CALIBRATION_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    User(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Convergence { .. } | Error::Numeric(_) => CliError::Internal(e.to_string()),
            _ => CliError::User(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let res = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match res {
        Ok(()) => 0,
        Err(CliError::User(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            2
        }
    }
}

fn echo<T: Serialize>(verb: &str, resolved: &T) -> CliResult<()> {
    eprintln!("{verb}: {}", serde_json::to_string(resolved)?);
    Ok(())
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::User(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Resolved {
    transform: ResponseTransform,
    loss: LossSpec,
    censoring: CensoringMethod,
    floor: f64,
    config: FitConfig,
}

fn resolve(m: &ModelArgs) -> CliResult<Resolved> {
    let user = |e: Error| CliError::User(e.to_string());
    if !(m.floor > 0.0 && m.floor <= 1.0) {
        return Err(CliError::User(format!("--floor must lie in (0, 1], got {}", m.floor)));
    }
    Ok(Resolved {
        transform: m.transform.parse().map_err(user)?,
        loss: m.loss.parse().map_err(user)?,
        censoring: m.censoring.parse().map_err(user)?,
        floor: m.floor,
        config: FitConfig { form: m.form.parse::<Form>().map_err(user)?, max_iters: m.max_iters, tol: m.tol, seed: m.seed },
    })
}

fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let r = resolve(&a.model)?;
    let kernel: KernelSpec = a.kernel.parse()?;
    #[derive(Serialize)]
    struct Echo<'a> {
        args: &'a FitArgs,
        resolved: &'a Resolved,
        kernel: KernelSpec,
    }
    echo("fit", &Echo { args: a, resolved: &r, kernel })?;
    let data = load_csv(&a.data.data, &a.data.time, &a.data.status)?;
    let cens = r.censoring.fit(&data, r.floor)?;
    let w = ipcw_weights(&cens, &data)?;
    let model = fit(&data, &w, r.transform, r.loss, kernel, a.lambda, &r.config)?;
    report_fit(&model);
    let json = model.to_json()?;
    write_atomic(&a.out, |w| Ok(w.write_all(json.as_bytes())?))
}

fn report_fit(model: &CensoredSvmModel) {
    let d = &model.diagnostics;
    eprintln!(
        "objective {:.9} risk {:.9} certificate {:.3e} iterations {} converged {}",
        d.objective, d.risk, d.certificate, d.iterations, d.converged
    );
    if !d.converged {
        eprintln!("warning: solver stopped at the iteration limit");
    }
}

fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    echo("predict", a)?;
    let model = CensoredSvmModel::from_json(&std::fs::read_to_string(&a.model)?)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(&a.data)?;
    let headers = rdr.headers()?.clone();
    let idx = model
        .feature_names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| CliError::User(format!("missing covariate column '{name}'")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let z = idx
            .iter()
            .map(|&j| {
                let raw = rec.get(j).unwrap_or("").trim();
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::User(format!("row {}: bad value '{raw}' in column '{}'", r + 1, &headers[j])))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        let p = model.predict(&z, a.clipped)?;
        rows.push((rec, p));
    }
    write_atomic(&a.out, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut h: Vec<&str> = headers.iter().collect();
        h.push("prediction");
        out.write_record(&h)?;
        for (rec, p) in &rows {
            let mut fields: Vec<String> = rec.iter().map(str::to_string).collect();
            fields.push(p.to_string());
            out.write_record(&fields)?;
        }
        out.flush()?;
        Ok(())
    })
}

fn cmd_cv(a: &CvArgs) -> CliResult<()> {
    let r = resolve(&a.model)?;
    let grid = CvGrid::new(a.grid_invlambda.clone(), a.grid_sigma.clone(), a.folds, a.model.seed)?;
    let mut setup = CvSetup::new(r.transform, r.loss, r.censoring, r.config);
    setup.floor = r.floor;
    setup.clipped = !a.unclipped;
    #[derive(Serialize)]
    struct Echo<'a> {
        args: &'a CvArgs,
        grid: &'a CvGrid,
        setup: &'a CvSetup,
    }
    echo("cv", &Echo { args: a, grid: &grid, setup: &setup })?;
    let data = load_csv(&a.data.data, &a.data.time, &a.data.status)?;
    let (model, report) = fit_cv(&data, &grid, &setup)?;
    print!("{}", report.table());
    let (il, s) = report.selected_pair();
    println!("selected inv_lambda {il} sigma {s} risk {:.9}", report.selected_risk());
    let json = serde_json::to_string_pretty(&report)?;
    write_atomic(&a.out, |w| Ok(w.write_all(json.as_bytes())?))?;
    if let Some(path) = &a.model_out {
        report_fit(&model);
        let json = model.to_json()?;
        write_atomic(path, |w| Ok(w.write_all(json.as_bytes())?))?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let cfg = BenchmarkConfig {
        settings: a.settings.clone(),
        ns: a.ns.clone(),
        reps: a.reps,
        methods,
        seed: a.seed,
        n_eval: a.n_eval,
        folds: a.folds,
        fit: FitConfig { form: a.form.parse()?, max_iters: a.max_iters, tol: a.tol, seed: 0 },
        calibration_draws: a.calibration_draws,
        ..Default::default()
    };
    if cfg.reps == 0 || cfg.ns.iter().any(|&n| n == 0) {
        return Err(CliError::User("--reps and every n must be positive".into()));
    }
    for &s in &cfg.settings {
        SimulationSetting::new(s)?;
    }
    echo("simulate", &cfg)?;
    let report = run_benchmark(&cfg)?;
    for s in &report.settings {
        eprintln!("setting {} c0 {:?} bayes risk {:.6} (se {:.6})", s.setting, s.c0, s.bayes_risk.mean, s.bayes_risk.se);
    }
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} cells failed");
    }
    write_atomic(&a.out, |w| Ok(report.write_csv(w)?))?;
    if let Some(path) = &a.summary {
        write_atomic(path, |w| Ok(report.write_summary_csv(w)?))?;
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs) -> CliResult<()> {
    let setting = SimulationSetting::new(a.setting)?;
    let target = a
        .target
        .or_else(|| setting.target_censoring())
        .ok_or_else(|| CliError::User(format!("setting {} has a fixed censoring law", a.setting)))?;
    echo("calibrate", a)?;
    let c0 = calibrate_censoring_constant(&setting, target, a.draws, a.seed)?;
    println!("{c0}");
    if let Some(path) = &a.out {
        #[derive(Serialize)]
        struct Out {
            setting: u8,
            target: f64,
            c0: f64,
        }
        let json = serde_json::to_string_pretty(&Out { setting: a.setting, target, c0 })?;
        write_atomic(path, |w| Ok(w.write_all(json.as_bytes())?))?;
    }
    Ok(())
}
