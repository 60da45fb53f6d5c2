//! `ezgp`: fit, predict, localized prediction, benchmarks and gradient checks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ezgp::harness::{format_summary, read_results, run_benchmark, summarize, write_results, BenchOptions, Example, NseForm};
use ezgp::inference::gradcheck::{check_gradient, random_instance, REL_TOL};
use ezgp::inference::Bounds;
use ezgp::kernels::{compare_orderings, example_inputs, EzgpParams};
use ezgp::predict::write_predictions;
use ezgp::{
    fit, lezgp, load_dataset, load_inputs, load_model, predict_batch, save_model, scan_schema, Error, FitConfig,
    ModelKind, ProblemSchema,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_FIT: u8 = 3;
const EXIT_EMPTY_SUBSET: u8 = 4;
const EXIT_GRADCHECK: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "ezgp", version, about = "Gaussian process emulators for mixed quantitative and qualitative inputs")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "EZGP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a training CSV and write it as JSON.
    Fit {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "ezgp", value_parser = parse_kind, env = "EZGP_KIND")]
        kind: ModelKind,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schema: SchemaArg,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Predict at target inputs with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localized prediction: one fit per target level combination on its key subset.
    Lezgp {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        /// Minimum number of shared levels; chosen per group when omitted.
        #[arg(long = "n-s")]
        n_s: Option<usize>,
        #[arg(long, default_value = "eezgp", value_parser = parse_kind, env = "EZGP_KIND")]
        kind: ModelKind,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaArg,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Run a simulation benchmark and print a summary table.
    Bench {
        #[arg(long, value_parser = parse_example)]
        example: Example,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Comma-separated model kinds; the example's default set when omitted.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        models: Option<Vec<ModelKind>>,
        /// Results CSV; standard output when omitted (the summary then goes to standard error).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "n-s", default_value_t = 7)]
        n_s: usize,
        /// Use the observed mean in the NSE denominator.
        #[arg(long)]
        nse_observed: bool,
        /// Add per-cell wall time to the results.
        #[arg(long)]
        record_time: bool,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Summarize a results CSV.
    Summarize {
        #[arg(long)]
        results: PathBuf,
    },
    /// Compare analytical and finite-difference gradients on a random instance.
    Gradcheck {
        #[arg(long, default_value = "ezgp", value_parser = parse_kind)]
        kind: ModelKind,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Levels per factor; a single value applies to all.
        #[arg(long, value_delimiter = ',', default_value = "2")]
        m: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 0, env = "EZGP_SEED")]
        seed: u64,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Show the correlation ordering of the multiplicative-indicator kernel.
    DemoPhistar {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        d: f64,
        /// Value of every correlation parameter.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Additional random parameter draws to tally.
        #[arg(long, default_value_t = 0)]
        draws: usize,
        #[arg(long, default_value_t = 0, env = "EZGP_SEED")]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct SchemaArg {
    /// `p,q,m1,...,mq`; inferred from the training file when omitted.
    #[arg(long, env = "EZGP_SCHEMA")]
    schema: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, default_value_t = 8, env = "EZGP_STARTS")]
    starts: usize,
    #[arg(long, default_value_t = 200, env = "EZGP_MAX_ITER")]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8, env = "EZGP_TOL")]
    tol: f64,
    #[arg(long, default_value_t = 0, env = "EZGP_SEED")]
    seed: u64,
    /// Fit on the standardized response.
    #[arg(long, env = "EZGP_STANDARDIZE")]
    standardize_response: bool,
    #[arg(long, default_value_t = 1e-3)]
    theta_min: f64,
    #[arg(long, default_value_t = 1e3)]
    theta_max: f64,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            starts: self.starts,
            max_iter: self.max_iter,
            tol: self.tol,
            bounds: Bounds {
                theta: (self.theta_min, self.theta_max),
                ..Bounds::default()
            },
            seed: self.seed,
            standardize_response: self.standardize_response,
        }
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_example(s: &str) -> Result<Example, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotPositiveDefinite { .. } | Error::FitFailed(_) | Error::Internal(_) => EXIT_FIT,
            Error::EmptyKeySubset { .. } => EXIT_EMPTY_SUBSET,
            _ => EXIT_VALIDATION,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        msg: msg.into(),
    }
}

fn parse_schema(s: &str) -> Result<ProblemSchema, Failure> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("--schema '{s}': expected p,q,m1,...,mq")))?;
    if v.len() < 2 {
        return Err(invalid(format!("--schema '{s}': expected p,q,m1,...,mq")));
    }
    Ok(ProblemSchema::new(v[0], v[1], v[2..].to_vec())?)
}

fn resolve_schema(arg: &SchemaArg, train: &Path) -> Result<ProblemSchema, Failure> {
    let scanned = scan_schema(train);
    match &arg.schema {
        Some(s) => {
            let declared = parse_schema(s)?;
            match scanned {
                Ok(found) if found != declared => log::warn!(
                    "--schema {s} differs from the schema scanned from {} (p={}, q={}, m={:?}); using --schema",
                    train.display(),
                    found.p(),
                    found.q(),
                    found.levels()
                ),
                _ => {}
            }
            Ok(declared)
        }
        None => {
            let s = scanned?;
            log::info!("schema from {}: p={}, q={}, m={:?}", train.display(), s.p(), s.q(), s.levels());
            Ok(s)
        }
    }
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("{}: not a readable file", path.display())))
    }
}

fn require_writable(path: &Path) -> Result<(), Failure> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if parent.is_dir() {
        Ok(())
    } else {
        Err(invalid(format!("{}: directory does not exist", parent.display())))
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Fit {
            train,
            kind,
            out,
            schema,
            fit: fa,
        } => {
            require_file(&train)?;
            require_writable(&out)?;
            let schema = resolve_schema(&schema, &train)?;
            let cfg = fa.config();
            cfg.validate()?;
            let d = load_dataset(&train, &schema)?;
            let start = Instant::now();
            let m = fit(&d, kind, &cfg)?;
            let secs = start.elapsed().as_secs_f64();
            save_model(&m, &out)?;
            println!("model       {kind}");
            println!("runs        {}", d.len());
            println!("objective   {:.10}", m.objective());
            println!("nugget      {:e}", m.nugget());
            println!(
                "parameters  {} free + mean = {}",
                kind.free_param_count(&schema),
                kind.param_count(&schema)
            );
            println!("seconds     {secs:.3}");
            println!("written     {}", out.display());
        }
        Command::Predict { model, targets, out } => {
            require_file(&model)?;
            require_file(&targets)?;
            if let Some(o) = &out {
                require_writable(o)?;
            }
            let m = load_model(&model)?;
            let schema = m.training().schema().clone();
            let ws = load_inputs(&targets, &schema)?;
            let preds = predict_batch(&m, &ws)?;
            let mut w = output(out.as_deref())?;
            write_predictions(&schema, &ws, &preds, &mut w)?;
            w.flush()?;
        }
        Command::Lezgp {
            train,
            targets,
            n_s,
            kind,
            out,
            schema,
            fit: fa,
        } => {
            require_file(&train)?;
            require_file(&targets)?;
            if let Some(o) = &out {
                require_writable(o)?;
            }
            let schema = resolve_schema(&schema, &train)?;
            let cfg = fa.config();
            cfg.validate()?;
            if !kind.is_indicator() {
                return Err(invalid(format!("lezgp supports ezgp and eezgp, not {kind}")));
            }
            if let Some(v) = n_s {
                if v == 0 || v > schema.q() {
                    return Err(invalid(format!("--n-s {v} outside 1..={}", schema.q())));
                }
            }
            let d = load_dataset(&train, &schema)?;
            let ws = load_inputs(&targets, &schema)?;
            let plan = lezgp::plan(&d, &ws, n_s, kind)?;
            let preds = lezgp::execute_plan(&d, &ws, &plan, kind, &cfg)?;
            let mut w = output(out.as_deref())?;
            write_predictions(&schema, &ws, &preds, &mut w)?;
            w.flush()?;
        }
        Command::Bench {
            example,
            reps,
            models,
            out,
            n_s,
            nse_observed,
            record_time,
            fit: fa,
        } => {
            if let Some(o) = &out {
                require_writable(o)?;
            }
            let cfg = fa.config();
            cfg.validate()?;
            let models = models.unwrap_or_else(|| example.default_models());
            let opts = BenchOptions {
                nse_form: if nse_observed {
                    NseForm::ObservedMean
                } else {
                    NseForm::PredictionMean
                },
                n_s,
                record_time,
            };
            let results = run_benchmark(example, reps, &models, &cfg, &opts)?;
            let table = format_summary(&summarize(&results));
            match &out {
                Some(p) => {
                    let mut w = output(Some(p))?;
                    write_results(&results, &mut w)?;
                    w.flush()?;
                    print!("{table}");
                }
                None => {
                    let mut w = output(None)?;
                    write_results(&results, &mut w)?;
                    w.flush()?;
                    eprint!("{table}");
                }
            }
        }
        Command::Summarize { results } => {
            require_file(&results)?;
            let r = read_results(File::open(&results)?)?;
            print!("{}", format_summary(&summarize(&r)));
        }
        Command::Gradcheck {
            kind,
            p,
            q,
            m,
            n,
            seed,
            corrupt_gradient,
        } => {
            let levels = match m.len() {
                1 => vec![m[0]; q],
                l if l == q => m,
                l => return Err(invalid(format!("--m has {l} entries for q = {q}"))),
            };
            let schema = ProblemSchema::new(p, q, levels)?;
            if n == 0 {
                return Err(invalid("--n must be positive"));
            }
            let (d, params) = random_instance(kind, &schema, n, seed)?;
            let mut report = check_gradient(&d, &params)?;
            if corrupt_gradient {
                if let Some(e) = report.entries.first_mut() {
                    e.analytic = e.analytic * 1.01 + 1e-3;
                }
            }
            println!("{kind}: p={p}, q={q}, m={:?}, n={n}, seed={seed}", schema.levels());
            println!("{:<16}{:>14}{:>14}", "family", "max_rel_err", "max_abs_gap");
            for (fam, v, g) in report.by_family() {
                println!("{:<16}{v:>14.3e}{g:>14.3e}", fam.name());
            }
            let worst = report.worst().cloned();
            if report.passed() {
                println!("PASS (tolerance {REL_TOL:e})");
            } else {
                let w = worst.expect("a failing report has entries");
                println!(
                    "FAIL: coordinate {} ({}) analytic {:e} vs finite difference {:e}, discrepancy {:.3e}",
                    w.index,
                    w.family.name(),
                    w.analytic,
                    w.numeric,
                    w.discrepancy()
                );
                return Err(Failure {
                    code: EXIT_GRADCHECK,
                    msg: format!("gradient check exceeded {REL_TOL:e}"),
                });
            }
        }
        Command::DemoPhistar {
            a,
            b,
            c,
            d,
            theta,
            draws,
            seed,
        } => {
            let schema = ProblemSchema::new(2, 2, vec![2, 2])?;
            if theta.is_nan() || theta <= 0.0 {
                return Err(invalid(format!("--theta {theta} must be positive")));
            }
            let w = example_inputs(a, b, c, d);
            let params = EzgpParams::uniform(&schema, 3.0, theta);
            let o = compare_orderings(&w, &params)?;
            println!("w1 = ({a}, {b}; 1, 2)  w2 = ({c}, {d}; 1, 2)  w3 = ({c}, {d}; 2, 1)");
            println!("{:<12}{:>14}{:>14}", "kernel", "cor(w1,w2)", "cor(w1,w3)");
            println!("{:<12}{:>14.7}{:>14.7}", "phi_star", o.phi_star_12, o.phi_star_13);
            println!("{:<12}{:>14.7}{:>14.7}", "ezgp", o.ezgp_12, o.ezgp_13);
            println!("reversed: {}", o.reversed());
            if draws > 0 {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let mut reversed = 0;
                for _ in 0..draws {
                    let mut p = EzgpParams::uniform(&schema, 3.0, 1.0);
                    for s in &mut p.sigma2 {
                        *s = rng.random_range(0.01..10.0);
                    }
                    for t in p.theta0.iter_mut().chain(p.theta.iter_mut().flatten().flatten()) {
                        *t = rng.random_range(0.01..10.0);
                    }
                    let x: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
                    if compare_orderings(&example_inputs(x[0], x[1], x[2], x[3]), &p)?.reversed() {
                        reversed += 1;
                    }
                }
                println!("random draws: {reversed}/{draws} reversed");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(invalid("--threads must be positive")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(invalid(format!("thread pool: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
