use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use sparsekern::datasets::{
    gen_mixed_gauss, gen_remark1, gen_sin_squared, load_csv, save_csv, MixedGauss, DEFAULT_NOISE_SD,
};
use sparsekern::dual_field::Integrator;
use sparsekern::experiments::{self, ExperimentId, Scale};
use sparsekern::losses::{DEFAULT_HINGE_EPSILON, DEFAULT_REGRESSION_EPSILON};
use sparsekern::model::mse;
use sparsekern::multiclass::{accuracy, ovo_predict, ovo_train, HingeTrainer, OvoEnsemble};
use sparsekern::pipeline::{fit_extract, FitOptions};
use sparsekern::solver::{max_constraint_violation, write_trace_csv, IntegratorKind};
use sparsekern::{DiscreteModel, Error, KernelSpec, Loss, LossKind, ProblemVariant};

#[derive(Parser)]
#[command(name = "sparsekern", version, about = "Sparse multi-kernel regression and classification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the sparse program on a CSV and write the extracted model.
    Fit(FitArgs),
    /// Score a saved model on a CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "mse")]
        metric: Metric,
    },
    /// Print predictions of a saved model for the rows of a CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a synthetic experiment and write its CSV tables.
    Experiment {
        id: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        outdir: PathBuf,
    },
    /// Write a synthetic data set as CSV.
    Generate {
        #[arg(value_enum)]
        kind: DataKind,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of Gaussians in the mixed signal.
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 0.453)]
        w0: f64,
        #[arg(long, default_value_t = DEFAULT_NOISE_SD)]
        noise_sd: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Mse,
    Accuracy,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Remark1,
    MixedGauss,
    SinSquared,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Quad,
    Abs,
    Hinge,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Quadrature,
    Mc,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON with `solver`, `peaks`, `refit_ridge`, `w_lo` and `w_hi` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `full`, `fixed-width=W` or `fixed-centers=FILE`.
    #[arg(long, default_value = "full")]
    variant: String,
    #[arg(long, value_enum, default_value = "quad")]
    loss: LossArg,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta_lambda: Option<f64>,
    #[arg(long)]
    eta_mu: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Deserialize)]
#[serde(default)]
struct RunConfig {
    #[serde(flatten)]
    options: FitOptions,
    w_lo: f64,
    w_hi: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            options: FitOptions::default(),
            w_lo: 0.1,
            w_hi: 1.0,
        }
    }
}

/// A saved model: a single regressor or a one-vs-one classifier.
#[derive(Deserialize)]
#[serde(untagged)]
enum SavedModel {
    Ovo(OvoEnsemble),
    Single(DiscreteModel),
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_centers(path: &Path) -> Result<Vec<Vec<f64>>, Error> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse {
                line: i + 2,
                msg: "center coordinate is not a number".into(),
            })?;
        out.push(row);
    }
    Ok(out)
}

fn parse_variant(s: &str) -> Result<ProblemVariant, Error> {
    if s == "full" {
        return Ok(ProblemVariant::Full);
    }
    if let Some(w) = s.strip_prefix("fixed-width=") {
        let w0 = w.parse().map_err(|_| usage(format!("bad fixed width {w:?}")))?;
        return Ok(ProblemVariant::FixedWidth { w0 });
    }
    if let Some(f) = s.strip_prefix("fixed-centers=") {
        return Ok(ProblemVariant::FixedCenters {
            centers: read_centers(Path::new(f))?,
        });
    }
    Err(usage(format!("unknown variant {s:?}")))
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_fit(a: FitArgs) -> Result<(), Error> {
    let mut cfg: RunConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    let s = &mut cfg.options.solver;
    if let Some(v) = a.gamma {
        s.gamma = v;
    }
    if let Some(v) = a.eta_lambda {
        s.eta_lambda = v;
    }
    if let Some(v) = a.eta_mu {
        s.eta_mu = v;
    }
    if let Some(v) = a.iters {
        s.iters = v;
    }
    if let Some(v) = a.batch {
        s.batch = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    match a.integrator {
        Some(IntegratorArg::Quadrature) => s.integrator = IntegratorKind::Quadrature,
        Some(IntegratorArg::Mc) => s.integrator = IntegratorKind::MonteCarlo,
        None => {}
    }
    s.validate()?;

    let data = load_csv(&a.data)?;
    let kernel = KernelSpec::gaussian(cfg.w_lo, cfg.w_hi, data.domain().clone())?;
    let variant = parse_variant(&a.variant)?;
    let opts = cfg.options;
    println!("threshold: {}", (2.0 * opts.solver.gamma).sqrt());

    if let LossArg::Hinge = a.loss {
        let mut trainer = HingeTrainer::new(kernel, variant, opts);
        trainer.epsilon = a.epsilon.unwrap_or(DEFAULT_HINGE_EPSILON);
        let ens = ovo_train(&data, |s| trainer.train(s))?;
        write_json(&a.out, &ens)?;
        let terms: usize = ens.pairwise().iter().map(|p| p.model.len()).sum();
        println!("classes: {}", ens.classes().len());
        println!("terms: {terms}");
        return Ok(());
    }

    let kind = match a.loss {
        LossArg::Quad => LossKind::QuadraticEps,
        _ => LossKind::AbsoluteEps,
    };
    let loss = Loss::for_labels(kind, a.epsilon.unwrap_or(DEFAULT_REGRESSION_EPSILON), data.y())?;
    let fitted = fit_extract(&data, &kernel, &loss, &variant, &opts)?;
    write_json(&a.out, &fitted.model)?;
    write_json(&sidecar(&a.out, "field.json"), &fitted.fit.field)?;
    write_trace_csv(&fitted.fit.state, sidecar(&a.out, "trace.csv"))?;
    let viol = max_constraint_violation(
        &fitted.fit.field,
        &loss,
        &Integrator::Quadrature(opts.solver.quadrature),
    )?;
    println!("terms: {}", fitted.model.len());
    println!("max violation: {viol:e}");
    Ok(())
}

fn cmd_eval(model: &Path, data: &Path, metric: Metric) -> Result<(), Error> {
    let m: SavedModel = read_json(model)?;
    let data = load_csv(data)?;
    let v = match (metric, m) {
        (Metric::Mse, SavedModel::Single(m)) => mse(&m.predict_rows(data.x(), data.dim()), data.y()),
        (Metric::Accuracy, SavedModel::Ovo(e)) => accuracy(&e, &data),
        (Metric::Mse, SavedModel::Ovo(_)) => return Err(usage("mse needs a regression model")),
        (Metric::Accuracy, SavedModel::Single(_)) => return Err(usage("accuracy needs a one-vs-one classifier")),
    };
    println!("{v}");
    Ok(())
}

fn cmd_predict(model: &Path, data: &Path) -> Result<(), Error> {
    let m: SavedModel = read_json(model)?;
    let data = load_csv(data)?;
    println!("yhat");
    for x in data.rows() {
        let v = match &m {
            SavedModel::Single(m) => m.predict(x),
            SavedModel::Ovo(e) => ovo_predict(e, x),
        };
        println!("{v}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Eval { model, data, metric } => cmd_eval(&model, &data, metric),
        Cmd::Predict { model, data } => cmd_predict(&model, &data),
        Cmd::Experiment {
            id,
            scale,
            seed,
            outdir,
        } => {
            let id: ExperimentId = id.parse()?;
            let scale: Scale = scale.parse()?;
            for p in experiments::run(id, scale, seed)?.write(&outdir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Cmd::Generate {
            kind,
            n,
            seed,
            m,
            w0,
            noise_sd,
            out,
        } => {
            let set = match kind {
                DataKind::Remark1 => gen_remark1(n, seed)?,
                DataKind::SinSquared => gen_sin_squared(n, noise_sd, seed)?,
                DataKind::MixedGauss => gen_mixed_gauss(&MixedGauss::new(m, w0, n, noise_sd), seed)?.0,
            };
            save_csv(&set, &out)
        }
    }
}

fn init_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("SPARSEKERN_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| usage(format!("SPARSEKERN_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
