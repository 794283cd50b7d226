use std::path::PathBuf;
use std::process::ExitCode;

use brownderiv::RULE_NAMES;
use brownderiv_cli::registry::{V_NAMES, X_NAMES};
use brownderiv_cli::{
    run_convergence, run_smvt, run_verify, CliError, CliResult, ExperimentConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "brownderiv",
    version,
    about = "Monte Carlo checks of the pathwise stochastic derivative"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    h0: Option<f64>,
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Any other config key, e.g. `--set x=B_itself`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rule over seeded paths and emit per-point CSV.
    Verify {
        #[arg(long)]
        rule: Option<String>,
    },
    /// Re-run a rule at several dt values and fit the error order.
    Convergence {
        #[arg(long)]
        rule: Option<String>,
        /// Comma-separated dt values.
        #[arg(long)]
        dts: Option<String>,
    },
    /// Locate a mean-value point on [a, b].
    Smvt {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    ListRules,
    ListProcesses,
}

fn load(global: &Global) -> CliResult<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &global.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = global.dt {
        cfg.dt = v;
    }
    if let Some(v) = global.h0 {
        cfg.h0 = v;
    }
    if let Some(v) = global.levels {
        cfg.levels = v;
    }
    if let Some(v) = global.paths {
        cfg.n_paths = v;
    }
    if let Some(v) = &global.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = global.tolerance {
        cfg.tolerance = Some(v);
    }
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig, text: &str) -> CliResult<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<i32> {
    let mut cfg = load(&cli.global)?;
    match cli.command {
        Command::Verify { rule } => {
            if let Some(r) = rule {
                cfg.rule = r;
            }
            let out = run_verify(&cfg)?;
            emit(&cfg, &out.csv)?;
            Ok(out.exit_code())
        }
        Command::Convergence { rule, dts } => {
            if let Some(r) = rule {
                cfg.rule = r;
            }
            if let Some(d) = dts {
                cfg.set("dts", &d)?;
            }
            let out = run_convergence(&cfg)?;
            emit(&cfg, &out.csv)?;
            Ok(0)
        }
        Command::Smvt { a, b } => {
            cfg.rule = "smvt".into();
            if let Some(a) = a {
                cfg.a = a;
            }
            if let Some(b) = b {
                cfg.b = Some(b);
            }
            let out = run_smvt(&cfg)?;
            match out.message {
                Some(msg) => {
                    eprintln!("{msg}");
                    Ok(1)
                }
                None => {
                    emit(&cfg, &out.csv)?;
                    Ok(0)
                }
            }
        }
        Command::ListRules => {
            for r in RULE_NAMES {
                println!("{r}");
            }
            Ok(0)
        }
        Command::ListProcesses => {
            println!("X: {}", X_NAMES.join(", "));
            println!("V: {}", V_NAMES.join(", "));
            println!("f: {}", brownderiv::BUILTIN_FUNCTION_NAMES.join(", "));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("brownderiv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
