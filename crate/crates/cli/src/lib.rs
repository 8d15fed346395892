//! `qnnstab`: bound calculators, training runs, paired stability runs,
//! gap sweeps and data preparation from the command line.
//!
//! Every option can also be set in a flat `key = value` file passed with
//! `--config`; flags win over the file. The run banner on stderr carries the
//! SHA-256 of all resolved settings, which together with the version pins
//! an output byte for byte.

mod settings;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand};
use thiserror::Error;

use qnn_stability::bounds::{self, BoundQuery};
use qnn_stability::circuit::build_hea;
use qnn_stability::data::{load_idx, prepare_binary, write_dataset, RawImageSet};
use qnn_stability::exper::{
    paired_stability, sweep, verify_suite_with, DataSource, GapConfig, PairedConfig, SweepKind,
    VerifyOptions,
};
use qnn_stability::loss::LossSpec;
use qnn_stability::qcore::Observable;
use qnn_stability::report::{emit_results, Cell, Format, Table};
use qnn_stability::train::{
    empirical_risk, init_params, sgd_train, zero_one_error, Dataset, SamplingScheme, SgdConfig,
    StepSchedule,
};

pub use settings::Settings;

/// Environment variable naming the default directory of IDX files.
pub const DATA_DIR_ENV: &str = "QNNSTAB_DATA_DIR";

const DEFAULT_SEED: u64 = 20241;

/// Standard MNIST training files first, then the bundled 0/1 subset.
const IDX_NAMES: &[(&str, &str)] = &[
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("train-images.idx3-ubyte", "train-labels.idx1-ubyte"),
    ("mnist-01-subset-images.idx", "mnist-01-subset-labels.idx"),
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] qnn_stability::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "qnnstab",
    version,
    about = "Stability and generalization toolkit for SGD-trained quantum neural networks"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Flat `key = value` settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format of result tables (csv or json).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Write the result table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuzz every certified inequality and report the worst slack.
    Verify(VerifyArgs),
    /// Evaluate one bound calculator.
    Bounds(BoundsArgs),
    /// Train one QNN and summarize the run.
    Train(TrainArgs),
    /// Paired runs on neighbouring datasets against the stability bound.
    Stability(StabilityArgs),
    /// Generalization-gap sweep over one knob.
    Sweep(SweepArgs),
    /// Dataset utilities.
    #[command(subcommand)]
    Data(DataCommand),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Fuzz cases per property [default: 1000].
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiply κ by this factor in the smoothness checks (negative control).
    #[arg(long)]
    kappa_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// kappa, general, const, const-series, decay, gen, noisy, noisy-gen,
    /// onavg, init-link or grad-cap.
    #[arg(long)]
    bound: Option<String>,
    /// Loss Lipschitz constant [default: 4].
    #[arg(long)]
    alpha: Option<f64>,
    /// Loss smoothness constant [default: 2].
    #[arg(long)]
    nu: Option<f64>,
    /// Loss bound M [default: 4].
    #[arg(long)]
    bigm: Option<f64>,
    /// Trainable gates K.
    #[arg(long)]
    k: Option<usize>,
    /// All gates K_g [default: K].
    #[arg(long)]
    kg: Option<usize>,
    /// Observable spectral norm [default: 1].
    #[arg(long)]
    onorm: Option<f64>,
    /// Training-set size.
    #[arg(long)]
    m: Option<usize>,
    /// SGD steps.
    #[arg(long)]
    t: Option<usize>,
    /// Constant step size.
    #[arg(long)]
    eta: Option<f64>,
    /// Decaying step size c/(t+1).
    #[arg(long)]
    c: Option<f64>,
    /// Depolarizing level [default: 0].
    #[arg(long)]
    p: Option<f64>,
    /// Confidence level [default: 0.05].
    #[arg(long)]
    delta: Option<f64>,
    /// Gradient noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// File with one gradient norm per line (T lines).
    #[arg(long)]
    trace_file: Option<PathBuf>,
    #[arg(long)]
    risk0: Option<f64>,
    #[arg(long)]
    risk_min: Option<f64>,
}

/// Where examples come from.
#[derive(Debug, Args)]
struct DataArgs {
    /// Directory holding IDX files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Class mapped to label +1 [default: 0].
    #[arg(long)]
    class_a: Option<u8>,
    /// Class mapped to label −1 [default: 1].
    #[arg(long)]
    class_b: Option<u8>,
    /// Use two synthetic clusters of this spread instead of images.
    #[arg(long)]
    synthetic: Option<f64>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Constant step size.
    #[arg(long)]
    eta: Option<f64>,
    /// Decaying step size c/(t+1); overrides eta.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Depolarizing level after each gate.
    #[arg(long)]
    noise: Option<f64>,
    /// uniform (with replacement) or permutation.
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    m_train: Option<usize>,
    #[arg(long)]
    m_test: Option<usize>,
    /// Write the per-step trace (risk and gradient norm) as CSV here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Training-set size.
    #[arg(long)]
    m: Option<usize>,
    /// Paired seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Index of the replaced example.
    #[arg(long)]
    replace_index: Option<usize>,
    /// Size of the held-out set the loss difference is maximized over.
    #[arg(long)]
    eval_points: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// f1 (layers), f2 (eta), f3 (p) or f4 (r).
    kind: String,
    /// Comma-separated knob values [default: the desk grid of the sweep].
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    m_train: Option<usize>,
    #[arg(long)]
    m_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Subcommand)]
enum DataCommand {
    /// Pool IDX images into angle-encoded train/test CSV files.
    Prepare(PrepareArgs),
}

#[derive(Debug, Args)]
struct PrepareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Features per example (= qubits) [default: 4].
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m_train: Option<usize>,
    #[arg(long)]
    m_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_train: Option<PathBuf>,
    #[arg(long)]
    out_test: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code: 0 on success, 1 when a verification or bound check fails,
/// 2 on usage or input errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let mut text = e.render().to_string();
            if e.kind() == clap::error::ErrorKind::InvalidSubcommand {
                text.push('\n');
                text.push_str(&Cli::command().render_help().to_string());
            }
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(passed) => i32::from(!passed),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

struct Ctx<'a> {
    settings: Settings,
    format: Format,
    out_path: Option<PathBuf>,
    command: &'static str,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn banner(&mut self, seed: Option<u64>) -> Result<(), CliError> {
        let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            self.err,
            "# qnnstab {} qnn-stability {} command={} seed={} config-sha256={}",
            env!("CARGO_PKG_VERSION"),
            qnn_stability::VERSION,
            self.command,
            seed,
            self.settings.hash()
        )?;
        for k in self.settings.unused_file_keys() {
            writeln!(
                self.err,
                "# warning: config key {k} is not used by {}",
                self.command
            )?;
        }
        Ok(())
    }

    fn emit(&mut self, table: &Table) -> Result<(), CliError> {
        match &self.out_path {
            Some(path) => emit_results(table, self.format, path)?,
            None => self.out.write_all(table.render(self.format).as_bytes())?,
        }
        Ok(())
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool, CliError> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let format: Format = settings
        .get("format", cli.format, "csv".to_string())?
        .parse()
        .map_err(|e: qnn_stability::Error| CliError::Usage(e.to_string()))?;
    let out_path = settings
        .get_opt("out", cli.out.map(|p| p.display().to_string()))?
        .map(PathBuf::from);
    let command = match &cli.command {
        Command::Verify(_) => "verify",
        Command::Bounds(_) => "bounds",
        Command::Train(_) => "train",
        Command::Stability(_) => "stability",
        Command::Sweep(_) => "sweep",
        Command::Data(DataCommand::Prepare(_)) => "data-prepare",
    };
    let mut ctx = Ctx {
        settings,
        format,
        out_path,
        command,
        out,
        err,
    };
    match cli.command {
        Command::Verify(a) => cmd_verify(&mut ctx, a),
        Command::Bounds(a) => cmd_bounds(&mut ctx, a),
        Command::Train(a) => cmd_train(&mut ctx, a),
        Command::Stability(a) => cmd_stability(&mut ctx, a),
        Command::Sweep(a) => cmd_sweep(&mut ctx, a),
        Command::Data(DataCommand::Prepare(a)) => cmd_prepare(&mut ctx, a),
    }
}

fn cmd_verify(ctx: &mut Ctx, a: VerifyArgs) -> Result<bool, CliError> {
    let s = &mut ctx.settings;
    let opts = VerifyOptions {
        seed: s.get("seed", a.seed, DEFAULT_SEED)?,
        cases: s.get("cases", a.cases, 1000)?,
        kappa_scale: s.get("kappa_scale", a.kappa_scale, 1.0)?,
    };
    if opts.cases == 0 || opts.kappa_scale.is_nan() || opts.kappa_scale <= 0.0 {
        return Err(CliError::Usage(
            "cases and kappa-scale must be positive".into(),
        ));
    }
    ctx.banner(Some(opts.seed))?;
    let report = verify_suite_with(&opts);
    ctx.emit(&report.table())?;
    let failed = report.properties.iter().filter(|p| !p.passed()).count();
    writeln!(
        ctx.err,
        "# {} properties, {} failed",
        report.properties.len(),
        failed
    )?;
    Ok(report.passed())
}

fn required<T>(v: Option<T>, flag: &str, bound: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --bound {bound}")))
}

fn cmd_bounds(ctx: &mut Ctx, a: BoundsArgs) -> Result<bool, CliError> {
    let s = &mut ctx.settings;
    let bound = s
        .get_opt("bound", a.bound)?
        .ok_or_else(|| CliError::Usage("--bound is required".into()))?;
    let needs_steps = !matches!(bound.as_str(), "kappa" | "grad-cap");
    let alpha = s.get("alpha", a.alpha, 4.0)?;
    let nu = s.get("nu", a.nu, 2.0)?;
    let big_m = s.get("bigm", a.bigm, 4.0)?;
    let k = required(s.get_opt("k", a.k)?, "k", &bound)?;
    let kg = s.get("kg", a.kg, k)?;
    let o_norm = s.get("onorm", a.onorm, 1.0)?;
    let (m, t, schedule) = if needs_steps {
        let m = required(s.get_opt("m", a.m)?, "m", &bound)?;
        let t = required(s.get_opt("t", a.t)?, "t", &bound)?;
        let eta = s.get_opt("eta", a.eta)?;
        let c = s.get_opt("c", a.c)?;
        let schedule = match (eta, c) {
            (Some(eta), None) => StepSchedule::Constant { eta },
            (None, Some(c)) => StepSchedule::InverseDecay { c },
            _ => return Err(CliError::Usage("give exactly one of --eta and --c".into())),
        };
        (m, t, schedule)
    } else {
        (1, 1, StepSchedule::Constant { eta: 1.0 })
    };
    let mut q = BoundQuery::new(alpha, nu, big_m, k, o_norm, m, t, schedule);
    q.kg = kg;
    q.p = s.get("p", a.p, 0.0)?;
    q.delta = s.get("delta", a.delta, 0.05)?;
    q.sigma = s.get_opt("sigma", a.sigma)?;
    if let Some(path) = s.get_opt("trace_file", a.trace_file.map(|p| p.display().to_string()))? {
        q.grad_norm_trace = Some(read_trace(Path::new(&path))?);
    }
    let risks = match bound.as_str() {
        "init-link" => Some((
            required(s.get_opt("risk0", a.risk0)?, "risk0", &bound)?,
            required(s.get_opt("risk_min", a.risk_min)?, "risk-min", &bound)?,
        )),
        _ => None,
    };
    ctx.banner(None)?;

    // (name, value) pairs: the input echo followed by the results
    let mut rows: Vec<(&str, String)> = vec![
        ("bound", bound.clone()),
        ("alpha", alpha.to_string()),
        ("nu", nu.to_string()),
        ("bigm", big_m.to_string()),
        ("k", k.to_string()),
        ("kg", kg.to_string()),
        ("onorm", o_norm.to_string()),
    ];
    if needs_steps {
        rows.push(("m", m.to_string()));
        rows.push(("t", t.to_string()));
        match schedule {
            StepSchedule::Constant { eta } => rows.push(("eta", eta.to_string())),
            StepSchedule::InverseDecay { c } => rows.push(("c", c.to_string())),
        }
        rows.push(("p", q.p.to_string()));
        rows.push(("delta", q.delta.to_string()));
        if let Some(sigma) = q.sigma {
            rows.push(("sigma", sigma.to_string()));
        }
    }
    let push_value = |rows: &mut Vec<(&str, String)>, v: bounds::BoundValue| {
        rows.push(("value", v.value.to_string()));
        rows.push(("ln_value", v.ln_value.to_string()));
        rows.push(("overflow", v.overflow.to_string()));
    };
    match bound.as_str() {
        "kappa" => rows.push(("value", bounds::kappa(&q).to_string())),
        "grad-cap" => rows.push(("value", bounds::gradient_cap(&q).to_string())),
        "general" => push_value(&mut rows, bounds::stability_general(&q)?),
        "const" => push_value(&mut rows, bounds::stability_const(&q)?),
        "const-series" => push_value(&mut rows, bounds::stability_const_series(&q)?),
        "decay" => push_value(&mut rows, bounds::stability_decay(&q)?),
        "noisy" => push_value(&mut rows, bounds::noisy_stability(&q)?),
        "onavg" => push_value(&mut rows, bounds::onavg_bound(&q)?),
        "gen" | "noisy-gen" => {
            let g = if bound == "gen" {
                bounds::gen_bound(&q)?
            } else {
                bounds::noisy_gen_bound(&q)?
            };
            rows.push(("epsilon", g.epsilon.value.to_string()));
            rows.push(("value", g.total.to_string()));
            rows.push(("overflow", g.epsilon.overflow.to_string()));
        }
        "init-link" => {
            let (r0, rmin) = risks.expect("read above");
            rows.push(("risk0", r0.to_string()));
            rows.push(("risk_min", rmin.to_string()));
            rows.push(("value", bounds::init_link(&q, r0, rmin)?.to_string()));
        }
        other => return Err(CliError::Usage(format!("unknown bound {other:?}"))),
    }
    let mut table = Table::new(["name", "value"]);
    for (name, v) in rows {
        table
            .push(vec![name.into(), Cell::Text(v)])
            .expect("two columns");
    }
    ctx.emit(&table)?;
    Ok(true)
}

fn read_trace(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read trace {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| CliError::Usage(format!("trace {}: {l:?}: {e}", path.display())))
        })
        .collect()
}

/// Flag, then environment, then the directory bundled with the sources.
fn data_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn load_images(s: &mut Settings, a: &DataArgs) -> Result<RawImageSet, CliError> {
    let images = s.get_opt("images", a.images.as_ref().map(|p| p.display().to_string()))?;
    let labels = s.get_opt("labels", a.labels.as_ref().map(|p| p.display().to_string()))?;
    let (images, labels) = match (images, labels) {
        (Some(i), Some(l)) => (PathBuf::from(i), PathBuf::from(l)),
        (None, None) => {
            let dir = data_dir(
                s.get_opt(
                    "data_dir",
                    a.data_dir.as_ref().map(|p| p.display().to_string()),
                )?
                .map(PathBuf::from),
            );
            IDX_NAMES
                .iter()
                .map(|(i, l)| (dir.join(i), dir.join(l)))
                .find(|(i, l)| i.is_file() && l.is_file())
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "no IDX files in {}; pass --images and --labels, --data-dir or set {DATA_DIR_ENV}",
                        dir.display()
                    ))
                })?
        }
        _ => return Err(CliError::Usage("--images and --labels go together".into())),
    };
    s.record("images", images.display());
    s.record("labels", labels.display());
    Ok(load_idx(&images, &labels)?)
}

fn data_source(s: &mut Settings, a: &DataArgs) -> Result<DataSource, CliError> {
    if let Some(spread) = s.get_opt("synthetic", a.synthetic)? {
        return Ok(DataSource::Clusters { spread });
    }
    let class_a = s.get("class_a", a.class_a, 0)?;
    let class_b = s.get("class_b", a.class_b, 1)?;
    Ok(DataSource::Images {
        raw: Arc::new(load_images(s, a)?),
        class_a,
        class_b,
    })
}

struct Model {
    qubits: usize,
    layers: usize,
    schedule: StepSchedule,
    steps: usize,
    noise: f64,
    sampling: SamplingScheme,
    seed: u64,
}

fn model(
    s: &mut Settings,
    a: &ModelArgs,
    defaults: (usize, f64, usize),
) -> Result<Model, CliError> {
    let (layers, eta, steps) = defaults;
    let schedule = match s.get_opt("c", a.c)? {
        Some(c) => StepSchedule::InverseDecay { c },
        None => StepSchedule::Constant {
            eta: s.get("eta", a.eta, eta)?,
        },
    };
    let sampling = match s
        .get("sampling", a.sampling.clone(), "uniform".to_string())?
        .as_str()
    {
        "uniform" => SamplingScheme::UniformWithReplacement,
        "permutation" => SamplingScheme::RandomPermutation,
        other => {
            return Err(CliError::Usage(format!(
                "unknown sampling scheme {other:?}"
            )))
        }
    };
    Ok(Model {
        qubits: s.get("qubits", a.qubits, 4)?,
        layers: s.get("layers", a.layers, layers)?,
        schedule,
        steps: s.get("steps", a.steps, steps)?,
        noise: s.get("noise", a.noise, 0.0)?,
        sampling,
        seed: s.get("seed", a.seed, DEFAULT_SEED)?,
    })
}

fn cmd_train(ctx: &mut Ctx, a: TrainArgs) -> Result<bool, CliError> {
    let s = &mut ctx.settings;
    let md = model(s, &a.model, (2, 0.01, 200))?;
    let m_train = s.get("m_train", a.m_train, 64)?;
    let m_test = s.get("m_test", a.m_test, 256)?;
    let source = data_source(s, &a.data)?;
    let trace_out = s.get_opt("trace_out", a.trace_out.map(|p| p.display().to_string()))?;
    ctx.banner(Some(md.seed))?;

    let (train, test) = source.draw(md.qubits, m_train, m_test, md.seed)?;
    let circuit = build_hea(md.qubits, md.layers)?;
    let obs = Observable::z(md.qubits, 0);
    let loss = LossSpec::squared_error(1.0)?;
    let mut cfg = SgdConfig::new(md.schedule, md.steps, loss, md.seed);
    cfg.sampling = md.sampling;
    cfg.noise = md.noise;
    cfg.record_risk = true;
    cfg.record_grad_norms = trace_out.is_some();
    let theta0 = init_params(circuit.n_params(), md.seed);
    let rec = sgd_train(&circuit, &theta0, &train, &obs, &cfg)?;
    let theta = rec.final_theta();
    let eval = |d: &Dataset| -> Result<(f64, f64), CliError> {
        Ok((
            empirical_risk(&circuit, theta, d, &obs, md.noise, &loss)?,
            zero_one_error(&circuit, theta, d, &obs, md.noise)?,
        ))
    };
    let (train_loss, train_err) = eval(&train)?;
    let (test_loss, test_err) = eval(&test)?;

    let mut t = Table::new(["metric", "value"]);
    let metrics: Vec<(&str, Cell)> = vec![
        ("trainable_gates", circuit.n_params().into()),
        ("gates", circuit.n_gates().into()),
        ("steps", md.steps.into()),
        ("train_loss_initial", rec.risk_trace[0].into()),
        ("train_loss", train_loss.into()),
        ("test_loss", test_loss.into()),
        ("gap_loss", (test_loss - train_loss).into()),
        ("train_err01", train_err.into()),
        ("test_err01", test_err.into()),
        ("gap_err01", (test_err - train_err).into()),
        ("theta_displacement", theta.distance(&theta0).into()),
    ];
    for (name, v) in metrics {
        t.push(vec![name.into(), v]).expect("two columns");
    }
    ctx.emit(&t)?;

    if let Some(path) = trace_out {
        let mut tr = Table::new(["step", "index", "eta", "train_risk", "grad_norm"]);
        for i in 0..md.steps {
            tr.push(vec![
                i.into(),
                rec.indices[i].into(),
                rec.step_sizes[i].into(),
                rec.risk_trace[i].into(),
                rec.grad_norm_trace[i].into(),
            ])
            .expect("five columns");
        }
        emit_results(&tr, Format::Csv, &path)?;
    }
    Ok(true)
}

fn cmd_stability(ctx: &mut Ctx, a: StabilityArgs) -> Result<bool, CliError> {
    let s = &mut ctx.settings;
    let md = model(s, &a.model, (2, 1e-4, 100))?;
    let m = s.get("m", a.m, 32)?;
    let n_seeds = s.get("seeds", a.seeds, 20)?;
    let replace_index = s.get("replace_index", a.replace_index, 0)?;
    let eval_points = s.get("eval_points", a.eval_points, 256)?;
    let source = data_source(s, &a.data)?;
    ctx.banner(Some(md.seed))?;

    if replace_index >= m {
        return Err(CliError::Usage(format!(
            "replace-index {replace_index} is not below m = {m}"
        )));
    }
    // the held-out draw supplies the evaluation grid plus one replacement
    let (train, pool) = source.draw(md.qubits, m, eval_points + 1, md.seed)?;
    let replacement = pool.examples()[eval_points].clone();
    let eval = Dataset::new(pool.examples()[..eval_points].to_vec())?;
    let cfg = PairedConfig {
        circuit: build_hea(md.qubits, md.layers)?,
        obs: Observable::z(md.qubits, 0),
        loss: LossSpec::squared_error(1.0)?,
        schedule: md.schedule,
        sampling: md.sampling,
        steps: md.steps,
        noise: md.noise,
    };
    let seeds: Vec<u64> = (0..n_seeds as u64)
        .map(|i| qnn_stability::rng::derive_seed(md.seed, i))
        .collect();
    let r = paired_stability(&train, replace_index, &replacement, &cfg, &seeds, &eval)?;

    let mut t = Table::new(["step", "delta_mean", "delta_se", "recursion_ok"]);
    for (i, (d, se)) in r.delta_trace.iter().zip(&r.delta_se).enumerate() {
        let ok = if i == 0 {
            "-"
        } else if r.per_step_recursion_ok[i - 1] {
            "yes"
        } else {
            "no"
        };
        t.push(vec![i.into(), (*d).into(), (*se).into(), ok.into()])
            .expect("four columns");
    }
    ctx.emit(&t)?;
    writeln!(
        ctx.err,
        "# sup loss difference {} vs bound {} ({}); recursion {} (worst z {})",
        r.loss_gap_sup,
        r.stability_bound.value,
        if r.bound_holds() { "holds" } else { "VIOLATED" },
        if r.recursion_holds() {
            "holds at every step"
        } else {
            "VIOLATED"
        },
        r.worst_recursion_z
    )?;
    Ok(r.bound_holds() && r.recursion_holds())
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("grid value {v:?}: {e}")))
        })
        .collect()
}

fn cmd_sweep(ctx: &mut Ctx, a: SweepArgs) -> Result<bool, CliError> {
    let kind: SweepKind = a
        .kind
        .parse()
        .map_err(|e: qnn_stability::Error| CliError::Usage(e.to_string()))?;
    let s = &mut ctx.settings;
    s.record("kind", kind);
    let grid = match s.get_opt("grid", a.grid)? {
        Some(g) => parse_grid(&g)?,
        None => kind.default_grid(),
    };
    let replicates = s.get("replicates", a.replicates, 10)?;
    let seed = s.get("seed", a.seed, DEFAULT_SEED)?;
    let source = data_source(s, &a.data)?;
    let mut base = kind.base_config(GapConfig::desk(source, seed));
    base.steps = s.get("steps", a.steps, base.steps)?;
    base.m_train = s.get("m_train", a.m_train, base.m_train)?;
    base.m_test = s.get("m_test", a.m_test, base.m_test)?;
    ctx.banner(Some(seed))?;

    let result = sweep(kind, &grid, &base, replicates)?;
    ctx.emit(&result.table())?;
    ctx.err.write_all(result.summary().to_text().as_bytes())?;
    Ok(true)
}

fn cmd_prepare(ctx: &mut Ctx, a: PrepareArgs) -> Result<bool, CliError> {
    let s = &mut ctx.settings;
    let d = s.get("d", a.d, 4)?;
    let m_train = s.get("m_train", a.m_train, 64)?;
    let m_test = s.get("m_test", a.m_test, 256)?;
    let seed = s.get("seed", a.seed, DEFAULT_SEED)?;
    let class_a = s.get("class_a", a.data.class_a, 0)?;
    let class_b = s.get("class_b", a.data.class_b, 1)?;
    let out_train = s.get(
        "out_train",
        a.out_train.map(|p| p.display().to_string()),
        "train.csv".into(),
    )?;
    let out_test = s.get(
        "out_test",
        a.out_test.map(|p| p.display().to_string()),
        "test.csv".into(),
    )?;
    let raw = load_images(s, &a.data)?;
    ctx.banner(Some(seed))?;

    let (train, test) = prepare_binary(&raw, class_a, class_b, d, m_train, m_test, seed)?;
    write_dataset(&train, &out_train)?;
    write_dataset(&test, &out_test)?;
    writeln!(
        ctx.err,
        "# wrote {} training examples to {out_train} and {} test examples to {out_test}",
        train.len(),
        test.len()
    )?;
    Ok(true)
}
