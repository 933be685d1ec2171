use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mixsig::identify::Route;
use mixsig_cli::manifest::Manifest;
use mixsig_cli::{run, CliError, Command, Invocation};

#[derive(Parser)]
#[command(name = "mixsig", version, about = "Simulate, identify and estimate first-price auctions with mixed signals")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bid dataset (CSV); switches field-based subcommands to the empirical field.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Signal-level grid size.
    #[arg(long, global = true)]
    grid_alpha: Option<usize>,
    /// Points per coordinate of covariate grids.
    #[arg(long, global = true)]
    grid_z: Option<usize>,
    /// Anchor end for identification.
    #[arg(long, global = true, value_enum)]
    route: Option<RouteArg>,
    /// Simulate even when assumption checks fail.
    #[arg(long, global = true)]
    force: bool,
    /// Run diagnostics only and exit zero.
    #[arg(long, global = true)]
    diagnose_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Terminal,
    Initial,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a bid dataset from a model and strategy profile.
    Simulate,
    /// Export the auction field on a grid.
    Field,
    /// Recover the valuation primitives.
    Identify,
    /// Fit the sieve estimator.
    Estimate,
    /// Expected revenue under first- and second-price rules.
    Counterfactual,
    /// Rank, strategy-condition and assumption checks.
    Diagnose,
    /// Repeat a run recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

fn invocation(cli: Cli) -> Result<Invocation, CliError> {
    if let Cmd::Replay { manifest } = &cli.command {
        let m = Manifest::read(manifest)?;
        return Invocation::from_manifest(&m, cli.out);
    }
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Field => Command::Field,
        Cmd::Identify => Command::Identify,
        Cmd::Estimate => Command::Estimate,
        Cmd::Counterfactual => Command::Counterfactual,
        Cmd::Diagnose => Command::Diagnose,
        Cmd::Replay { .. } => unreachable!(),
    };
    let path = cli.config.ok_or_else(|| CliError::config("--config is required"))?;
    let config_text =
        std::fs::read_to_string(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if let Some(d) = &cli.data {
        if !d.is_file() {
            return Err(CliError::config(format!("{}: no such dataset", d.display())));
        }
    }
    for (flag, v) in [("--grid-alpha", cli.grid_alpha), ("--grid-z", cli.grid_z)] {
        if v.is_some_and(|v| v < 2) {
            return Err(CliError::config(format!("{flag} needs at least 2 points")));
        }
    }
    Ok(Invocation {
        command,
        config_text,
        data: cli.data,
        out: cli.out,
        seed: cli.seed,
        grid_alpha: cli.grid_alpha,
        grid_z: cli.grid_z,
        route: cli.route.map(|r| match r {
            RouteArg::Terminal => Route::Terminal,
            RouteArg::Initial => Route::Initial,
        }),
        force: cli.force,
        diagnose_only: cli.diagnose_only,
        threads: cli.threads,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = invocation(cli).and_then(|inv| run(&inv));
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(r) = &e.report {
                eprintln!("{r}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
