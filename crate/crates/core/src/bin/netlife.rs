use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netlife::config::parse_key_values;
use netlife::critical::find_critical_rates;
use netlife::output::{
    emit_critical, emit_replicas, emit_run, emit_sweep, CriticalDocument, ModelConstants, ReplicasDocument,
    RunDocument, SweepDocument,
};
use netlife::{run_replicas, run_simulation, sweep, ClassifierThresholds, Error, Result, SimConfig, SweepParam};

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const DEFAULT_RUNS: usize = 100;
const DEFAULT_OUT: &str = "netlife-out";

#[derive(Parser, Debug)]
#[command(name = "netlife", version, about = "Energy-limited mobile network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One seeded run: time series CSV and summary JSON. With --runs, also
    /// aggregates that many replicas.
    Run,
    /// Replicated runs for each value of one parameter (rho, r, v, alpha, L, N).
    Sweep {
        param: String,
        /// Comma-separated values.
        values: String,
    },
    /// Bisection for the slow, fast and absolute congestion onsets.
    CriticalRates {
        lo: f64,
        hi: f64,
        #[arg(long, default_value_t = 11)]
        replicas: usize,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// Flat key = value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    nodes: Option<String>,
    #[arg(long, global = true)]
    area: Option<String>,
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    speed: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    rate: Option<String>,
    #[arg(long, global = true)]
    capacity: Option<String>,
    #[arg(long, global = true)]
    energy: Option<String>,
    #[arg(long = "hop-cost", global = true)]
    hop_cost: Option<String>,
    /// most-probable (default) or sample.
    #[arg(long, global = true)]
    routing: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long = "max-steps", global = true)]
    max_steps: Option<String>,
    #[arg(long = "transient-cutoff", global = true)]
    transient_cutoff: Option<String>,
    #[arg(long, global = true)]
    runs: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "eps-abs", global = true)]
    eps_abs: Option<String>,
    #[arg(long = "eps-rel", global = true)]
    eps_rel: Option<String>,
    #[arg(long = "theta-none", global = true)]
    theta_none: Option<String>,
    #[arg(long = "theta-full", global = true)]
    theta_full: Option<String>,
    #[arg(long = "early-window", global = true)]
    early_window: Option<String>,
}

/// Settings resolved from the config file and flags.
struct Settings {
    sim: SimConfig,
    thresholds: ClassifierThresholds,
    runs: Option<usize>,
    jobs: usize,
    out: PathBuf,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("--{key}: cannot parse `{value}`")))
}

impl Settings {
    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        if self.sim.set(key, value)? {
            return Ok(());
        }
        let th = &mut self.thresholds;
        match key.trim().replace('_', "-").as_str() {
            "runs" => self.runs = Some(parse_num(key, value)?),
            "jobs" => self.jobs = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "eps-abs" => th.eps_abs = parse_num(key, value)?,
            "eps-rel" => th.eps_rel = parse_num(key, value)?,
            "theta-none" => th.theta_none = parse_num(key, value)?,
            "theta-full" => th.theta_full = parse_num(key, value)?,
            "early-window" => th.early_window = parse_num(key, value)?,
            other => return Err(Error::Usage(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    fn resolve(opts: &Opts) -> Result<Self> {
        let mut s = Settings {
            sim: SimConfig::default(),
            thresholds: ClassifierThresholds::default(),
            runs: None,
            jobs: 1,
            out: PathBuf::from(DEFAULT_OUT),
        };
        if let Some(path) = &opts.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            for (k, v) in parse_key_values(&text)? {
                s.apply(&k, &v)?;
            }
        }
        let flags: [(&str, &Option<String>); 20] = [
            ("nodes", &opts.nodes),
            ("area", &opts.area),
            ("radius", &opts.radius),
            ("speed", &opts.speed),
            ("alpha", &opts.alpha),
            ("rate", &opts.rate),
            ("capacity", &opts.capacity),
            ("energy", &opts.energy),
            ("hop-cost", &opts.hop_cost),
            ("routing", &opts.routing),
            ("seed", &opts.seed),
            ("max-steps", &opts.max_steps),
            ("transient-cutoff", &opts.transient_cutoff),
            ("runs", &opts.runs),
            ("jobs", &opts.jobs),
            ("eps-abs", &opts.eps_abs),
            ("eps-rel", &opts.eps_rel),
            ("theta-none", &opts.theta_none),
            ("theta-full", &opts.theta_full),
            ("early-window", &opts.early_window),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.apply(k, v)?;
            }
        }
        if let Some(out) = &opts.out {
            s.out = out.clone();
        }
        if s.jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        if s.runs == Some(0) {
            return Err(Error::Usage("--runs must be at least 1".into()));
        }
        s.sim.validate()?;
        Ok(s)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn execute(cli: &Cli) -> Result<()> {
    let s = Settings::resolve(&cli.opts)?;
    let constants = ModelConstants::default();
    let written = match &cli.command {
        Command::Run => {
            let (series, summary) = run_simulation(&s.sim, &s.thresholds)?;
            say!(
                "seed {} died={} T={} dS={} tau0={} k={} state={}",
                summary.seed,
                summary.died,
                summary.lifetime.map_or_else(|| "-".into(), |t| t.to_string()),
                fmt_opt(summary.delta_s),
                fmt_opt(summary.tau0),
                fmt_opt(summary.k),
                summary.state.map_or("-", |st| st.name()),
            );
            let doc = RunDocument {
                summary,
                thresholds: s.thresholds,
                constants: constants.clone(),
            };
            let mut paths = emit_run(&s.out, &series.records, &doc)?;
            if let Some(n) = s.runs {
                let row = run_replicas(&s.sim, n, s.sim.seed, s.jobs, &s.thresholds)?;
                say!(
                    "{n} replicas: T={} tau0={} k={}",
                    fmt_opt(row.lifetime.mean),
                    fmt_opt(row.tau0.mean),
                    fmt_opt(row.k.mean)
                );
                let doc = ReplicasDocument {
                    row,
                    thresholds: s.thresholds,
                    constants,
                };
                paths.extend(emit_replicas(&s.out, &doc)?);
            }
            paths
        }
        Command::Sweep { param, values } => {
            let parameter: SweepParam = param.parse()?;
            let values = values
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| parse_num::<f64>(parameter.name(), v))
                .collect::<Result<Vec<_>>>()?;
            let n_runs = s.runs.unwrap_or(DEFAULT_RUNS);
            let table = sweep(&s.sim, parameter, &values, n_runs, s.jobs, &s.thresholds)?;
            for row in &table.rows {
                say!(
                    "{}={} T={} dS={} tau0={} k={}",
                    parameter,
                    fmt_opt(row.value),
                    fmt_opt(row.lifetime.mean),
                    fmt_opt(row.delta_s.mean),
                    fmt_opt(row.tau0.mean),
                    fmt_opt(row.k.mean)
                );
            }
            let doc = SweepDocument {
                table,
                thresholds: s.thresholds,
                constants,
            };
            emit_sweep(&s.out, &doc)?
        }
        Command::CriticalRates {
            lo,
            hi,
            replicas,
            tolerance,
        } => {
            let rates = find_critical_rates(&s.sim, *lo, *hi, *replicas, *tolerance, s.jobs, &s.thresholds)?;
            say!(
                "rho_s={:.4} rho_f={:.4} rho_a={:.4} (tolerance {})",
                rates.rho_s,
                rates.rho_f,
                rates.rho_a,
                rates.tolerance
            );
            let doc = CriticalDocument {
                rates,
                thresholds: s.thresholds,
                constants,
            };
            emit_critical(&s.out, &doc)?
        }
    };
    for p in written {
        say!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
