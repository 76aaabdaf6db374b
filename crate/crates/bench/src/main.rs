use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tensormin_bench::config::parse_bound;
use tensormin_bench::experiment::{ACCEL_FILE, SUMMARY_FILE};
use tensormin_bench::{
    lower_bound_evaluate, parse_composite, parse_instance, read_trace_csv, replay_bounds, run_experiment,
    slope_estimate, AccelRow, BenchError, BoundTag, ConfigError, ExperimentConfig, LowerBoundMode, ReplayContext,
    SchemeName, StartPoint, Summary,
};

#[derive(Parser)]
#[command(name = "tensormin", version, about = "Run tensor methods, replay their bounds, measure rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme and write trace.csv and summary.json.
    Run(RunArgs),
    /// Check recorded runs against the explicit complexity bounds.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated bound names, or `all`.
        #[arg(long, default_value = "all")]
        bounds: String,
        /// Run summary with the constants; defaults to summary.json next to
        /// the trace.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Print the reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Log-log slope of the min-so-far gradient norm over a window.
    Slope {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Rate cap of the worst-case instances.
    Lowerbound {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        mode: LowerBoundMode,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// `name[:key=value,...]`, e.g. `hard:n=32,k=16` or `power_norm:n=16,q=4`.
    #[arg(long)]
    instance: String,
    #[arg(long)]
    scheme: SchemeName,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Hölder exponent, or `unknown` for the universal variant.
    #[arg(long, default_value = "unknown")]
    nu: String,
    #[arg(long, default_value_t = 1.0)]
    h0: f64,
    #[arg(long, default_value_t = 1.0)]
    htilde0: f64,
    #[arg(long, default_value_t = 1e-2)]
    theta: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// `none`, `l1:weight=w` or `box:lo=a,hi=b`.
    #[arg(long, default_value = "none")]
    composite: String,
    /// `zero`, `random` or a comma-separated vector.
    #[arg(long, default_value = "zero")]
    x0: String,
    /// Steps of the fixed-length accelerated schemes.
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long)]
    fixed_m: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// `R=<r>` (distance) or `S=<s>` (residual) bound used to pick δ.
    #[arg(long)]
    bound: Option<String>,
    /// Write iterate coordinates into the trace.
    #[arg(long)]
    record_x: bool,
}

fn build_config(a: RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let nu = match a.nu.as_str() {
        "unknown" => None,
        s => Some(
            s.parse::<f64>()
                .map_err(|_| ConfigError::new("nu", format!("expected a real or `unknown`, got `{s}`")))?,
        ),
    };
    let instance = parse_instance(&a.instance, a.p, a.seed)?;
    let composite = parse_composite(&a.composite, instance.dim())?;
    let cfg = ExperimentConfig {
        instance,
        composite,
        scheme: a.scheme,
        epsilon: a.eps,
        p: a.p,
        nu,
        h0: a.h0,
        htilde0: a.htilde0,
        theta: a.theta,
        max_iters: a.max_iters,
        seed: a.seed,
        out: a.out,
        x0: a.x0.parse::<StartPoint>()?,
        iterations: a.iterations,
        fixed_m: a.fixed_m,
        delta: a.delta,
        bound: a.bound.as_deref().map(parse_bound).transpose()?,
        record_x: a.record_x,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_context(trace: &Path, summary: Option<PathBuf>) -> Result<(ReplayContext, Option<Vec<AccelRow>>), BenchError> {
    let dir = trace.parent().unwrap_or(Path::new("."));
    let explicit = summary.is_some();
    let path = summary.unwrap_or_else(|| dir.join(SUMMARY_FILE));
    let ctx = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str::<Summary>(&text)?.context,
        Err(e) if !explicit && e.kind() == std::io::ErrorKind::NotFound => {
            eprintln!("no {} next to the trace; bounds needing constants are skipped", SUMMARY_FILE);
            ReplayContext::default()
        }
        Err(e) => return Err(e.into()),
    };
    let accel = match fs::read_to_string(dir.join(ACCEL_FILE)) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => None,
    };
    Ok((ctx, accel))
}

fn execute(cmd: Command) -> Result<ExitCode, BenchError> {
    match cmd {
        Command::Run(args) => {
            let cfg = build_config(args)?;
            let out = run_experiment(&cfg)?;
            let s = &out.summary;
            println!(
                "{}: {:?} after {} iterations, {} oracle calls, min ‖∇f‖_* = {:.6e}",
                s.scheme,
                s.status,
                s.iterations,
                s.oracle_calls,
                s.min_grad_norm
            );
            println!("wrote {} and {}", out.trace_path.display(), out.summary_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            trace,
            bounds,
            summary,
            json,
        } => {
            let tags = BoundTag::parse_list(&bounds)?;
            let records = read_trace_csv(fs::File::open(&trace)?)?;
            let (ctx, accel) = load_context(&trace, summary)?;
            let reports = replay_bounds(&records, accel.as_deref(), &ctx, &tags);
            if json {
                println!("{}", serde_json::to_string_pretty(&reports)?);
            } else {
                for r in &reports {
                    println!("{r}");
                }
            }
            Ok(if reports.iter().any(|r| r.violated()) {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Slope { trace, from, to } => {
            let records = read_trace_csv(fs::File::open(&trace)?)?;
            println!("{:.12}", slope_estimate(&records, from, to)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Lowerbound { p, nu, t, mode } => {
            println!("{:.16e}", lower_bound_evaluate(p, nu, t, mode)?);
            Ok(ExitCode::SUCCESS)
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
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
