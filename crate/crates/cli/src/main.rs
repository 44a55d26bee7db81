//! `sbs`: trees, order analysis, convergence runs and method validation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stoch_bseries::bseries::{parse_method, MethodError, MethodSpec};
use stoch_bseries::grade::HalfInt;
use stoch_bseries::harness::{
    builtin_method, emit_csv, method_from_document, parse_steps, problem_preset, run_convergence, ConvergenceConfig,
    Experiment, HarnessError, DEFAULT_RUN_N_SUB, RUNTIME_TRUNCATION,
};
use stoch_bseries::orderanalysis::{determine_order, render_table, AnalysisError};
use stoch_bseries::stochalg::Interp;
use stoch_bseries::trees::enumerate_trees;

#[derive(Parser, Debug)]
#[command(name = "sbs", version, about = "Stochastic B-series order conditions for exponential integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List colored rooted trees with order, symmetry coefficient and elementary differential.
    Trees {
        #[arg(long, default_value = "1.5")]
        max_order: HalfInt,
        #[arg(long, default_value_t = 1)]
        noises: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Derive and check the mean-square order conditions of a method.
    Analyze {
        /// `builtin:setdrk` or a path to a method file.
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "ito")]
        interp: Interp,
        #[arg(long, default_value = "1.5")]
        max_order: HalfInt,
        /// Also print the φ/Φ weight table.
        #[arg(long)]
        table: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a mean-square convergence experiment and emit CSV.
    Converge {
        /// Experiment file; flags given alongside it override its fields.
        #[arg(long)]
        experiment: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        /// Problem preset, e.g. `gbm(-1,1/2)`.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        interp: Option<Interp>,
        /// Comma-separated step sizes, e.g. `2^-4,2^-5,2^-6`.
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Fine cells per finest step.
        #[arg(long)]
        n_sub: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a method file and report schema diagnostics.
    Validate {
        /// Path to a method file.
        #[arg(long)]
        method: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

enum Failure {
    User(String),
    Internal(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Num(_) => Failure::Internal(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::User(e.to_string())
    }
}

impl From<MethodError> for Failure {
    fn from(e: MethodError) -> Self {
        Failure::User(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))
}

fn load_method(source: &str, interp: Interp, truncation: u32) -> Result<MethodSpec, Failure> {
    if source.starts_with("builtin:") {
        Ok(builtin_method(source, interp, truncation)?)
    } else {
        Ok(method_from_document(&read(Path::new(source))?, interp)?)
    }
}

fn trees(max_order: HalfInt, noises: u32, format: Format) -> Result<String, Failure> {
    let list = enumerate_trees(max_order, noises);
    let mut out = String::new();
    match format {
        Format::Text => {
            let rows: Vec<[String; 4]> = list
                .iter()
                .map(|t| [t.to_string(), t.rho().to_string(), t.alpha().to_string(), t.elementary_differential_text()])
                .collect();
            let mut widths = [4, 3, 5, 0];
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            out.push_str(&format!("{:<w0$}  {:<w1$}  {:<w2$}  {}\n", "tree", "rho", "alpha", "differential", w0 = widths[0], w1 = widths[1], w2 = widths[2]));
            for r in rows {
                out.push_str(&format!("{:<w0$}  {:<w1$}  {:<w2$}  {}\n", r[0], r[1], r[2], r[3], w0 = widths[0], w1 = widths[1], w2 = widths[2]));
            }
        }
        Format::Csv | Format::Json => {
            if format == Format::Json {
                return Err(Failure::User("trees supports --format text or csv".into()));
            }
            out.push_str("tree,rho,alpha,differential\n");
            for t in &list {
                out.push_str(&format!("\"{t}\",{},{},\"{}\"\n", t.rho(), t.alpha(), t.elementary_differential_text()));
            }
        }
    }
    Ok(out)
}

fn analyze(method: &str, interp: Interp, max_order: HalfInt, table: bool, format: Format) -> Result<String, Failure> {
    // trees up to ρ = max_order + 1/2 carry at most that many A-powers
    let truncation = ((max_order.halves() + 1) / 2).max(1) as u32;
    let spec = load_method(method, interp, truncation)?;
    let report = determine_order(&spec, interp, max_order)?;
    let weights = if table { Some(render_table(&spec, interp, max_order)?) } else { None };
    let mut out = match format {
        Format::Text => report.to_string(),
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    if let Some(w) = weights {
        out.push('\n');
        out.push_str(&match format {
            Format::Csv => w.to_csv(),
            _ => w.to_text(),
        });
    }
    Ok(out)
}

struct ConvergeArgs {
    experiment: Option<PathBuf>,
    method: Option<String>,
    problem: Option<String>,
    interp: Option<Interp>,
    steps: Option<String>,
    paths: Option<usize>,
    seed: Option<u64>,
    n_sub: Option<usize>,
}

fn converge(args: ConvergeArgs) -> Result<String, Failure> {
    let file = match &args.experiment {
        Some(p) => Some(Experiment::from_json(&read(p)?)?),
        None => None,
    };
    let missing = |what: &str| Failure::User(format!("converge needs --{what} (or an --experiment file)"));
    let method = args.method.or(file.as_ref().map(|e| e.method.clone())).unwrap_or_else(|| "builtin:setdrk".into());
    let problem = args.problem.or(file.as_ref().map(|e| e.problem.clone())).ok_or_else(|| missing("problem"))?;
    let interp = args.interp.or(file.as_ref().map(|e| e.interpretation)).unwrap_or(Interp::Ito);
    let steps = match (&args.steps, &file) {
        (Some(s), _) => parse_steps(s).ok_or_else(|| Failure::User(format!("bad --steps '{s}'")))?,
        (None, Some(e)) => e.step_sizes()?,
        (None, None) => return Err(missing("steps")),
    };
    let paths = args.paths.or(file.as_ref().map(|e| e.paths)).ok_or_else(|| missing("paths"))?;
    let seed = args.seed.or(file.as_ref().map(|e| e.seed)).unwrap_or(0);
    let mut config = ConvergenceConfig::new(steps, paths, seed);
    config.n_sub = args.n_sub.or(file.as_ref().and_then(|e| e.n_sub)).unwrap_or(DEFAULT_RUN_N_SUB);
    let spec = load_method(&method, interp, RUNTIME_TRUNCATION)?;
    let prob = problem_preset(&problem, interp)?;
    let run = run_convergence(&spec, &prob, &config)?;
    if let Some(n) = &run.notice {
        eprintln!("note: {n}");
    }
    Ok(emit_csv(&run))
}

fn validate(path: &Path) -> Result<String, Failure> {
    let spec = parse_method(&read(path)?)?;
    Ok(format!(
        "ok: {} (nu = {}, M = {}, {}, {} stage and {} weight coefficients, truncation {})\n",
        spec.name,
        spec.nu,
        spec.noises,
        spec.interp,
        spec.stage.len(),
        spec.weights.len(),
        spec.truncation.map_or("none".to_string(), |q| q.to_string())
    ))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::User(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Internal(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Trees { max_order, noises, format } => trees(max_order, noises, format).and_then(|s| emit(&s, None)),
        Command::Analyze { method, interp, max_order, table, format } => {
            analyze(&method, interp, max_order, table, format).and_then(|s| emit(&s, None))
        }
        Command::Converge { experiment, method, problem, interp, steps, paths, seed, n_sub, out } => {
            converge(ConvergeArgs { experiment, method, problem, interp, steps, paths, seed, n_sub })
                .and_then(|s| emit(&s, out.as_deref()))
        }
        Command::Validate { method } => validate(&method).and_then(|s| emit(&s, None)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
