use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xdl_cli::run::{parse_claim_ids, EXIT_OK};
use xdl_cli::{
    parse_config, run_claims, run_compare, run_render, run_solve, run_sweep, Artifacts, CliError, ScenarioConfig,
};
use xdl_core::solver::GridScale;

#[derive(Parser)]
#[command(name = "xdl", version, about = "Solve, sweep and compare XAI regulation scenarios")]
struct Cli {
    /// Worker threads; output is identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory. Defaults to the config's `output.dir`, then
    /// $XDL_OUT_DIR, then the working directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Grid resolution preset: coarse, default or fine.
    #[arg(long, global = true)]
    grid_scale: Option<GridScale>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibria of every configured regime.
    Solve { config: PathBuf },
    /// Selected equilibria over one or two parameter axes, with a chart.
    Sweep { config: PathBuf },
    /// Unregulated against optimally set Mandatory and Optional regimes.
    Compare { config: PathBuf },
    /// Witness and counterexample searches over the parameter panel.
    Claims {
        config: PathBuf,
        /// Comma-separated ids (C1..C6, BT); all when omitted.
        #[arg(long)]
        ids: Option<String>,
    },
    /// Chart one objective of a sweep CSV.
    Render {
        rows: PathBuf,
        #[arg(long, default_value = "TotalWelfare")]
        objective: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load(path: &Path, scale: Option<GridScale>) -> Result<ScenarioConfig, CliError> {
    Ok(parse_config(&read(path)?, scale)?)
}

fn out_dir(flag: Option<PathBuf>, config: &ScenarioConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("XDL_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn emit(artifacts: Artifacts, dir: &Path) -> Result<i32, CliError> {
    for path in artifacts.write(dir)? {
        println!("{}", path.display());
    }
    Ok(artifacts.exit_code)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let scale = cli.grid_scale;
    match cli.command {
        Command::Solve { config } => {
            let c = load(&config, scale)?;
            emit(run_solve(&c)?, &out_dir(cli.out_dir, &c))
        }
        Command::Sweep { config } => {
            let c = load(&config, scale)?;
            emit(run_sweep(&c)?, &out_dir(cli.out_dir, &c))
        }
        Command::Compare { config } => {
            let c = load(&config, scale)?;
            emit(run_compare(&c)?, &out_dir(cli.out_dir, &c))
        }
        Command::Claims { config, ids } => {
            let c = load(&config, scale)?;
            let targets = parse_claim_ids(ids.as_deref())?;
            emit(run_claims(&c, &targets)?, &out_dir(cli.out_dir, &c))
        }
        Command::Render {
            rows,
            objective,
            output,
        } => {
            let svg = run_render(&read(&rows)?, &objective)?;
            fs::write(&output, svg).map_err(|source| CliError::Io {
                path: output.clone(),
                source,
            })?;
            println!("{}", output.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("xdl: {e}");
        }
    }
    let code = dispatch(cli).unwrap_or_else(|e| {
        eprintln!("xdl: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
