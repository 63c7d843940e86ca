use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multiscale_stokes::cli::{
    format_lemmas, kernel_info, points_csv, run_experiment, scheduled_delta, system_matrix,
    verify_lemmas, CheckStatus, RunConfig,
};
use multiscale_stokes::linalg::write_matrix;
use multiscale_stokes::multiscale::write_model;
use multiscale_stokes::{Error, Result};

#[derive(Parser)]
#[command(name = "multiscale-stokes", version, about = "Multiscale kernel collocation for the Stokes problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the benchmark flow level by level and report errors.
    Run(RunArgs),
    /// Check the derivative identities of the Wendland kernel at the origin.
    VerifyLemmas {
        #[arg(long, default_value_t = 4)]
        k: u32,
    },
    /// List the polynomial coefficients of a Wendland function.
    KernelInfo {
        #[arg(long, default_value_t = 2)]
        d: u32,
        #[arg(long, default_value_t = 4)]
        k: u32,
    },
    /// Write the centres of one level as CSV.
    DumpPoints {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the collocation matrix of one level in binary form.
    DumpMatrix {
        #[arg(long)]
        level: usize,
        /// Scale to use instead of the schedule.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long)]
    eigen_levels: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also save the solved model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct Params {
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

impl Params {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.levels {
            cfg.levels = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let level = e.level().map(|l| format!(" level={l}")).unwrap_or_default();
            eprintln!("error: kind={}{level} message=\"{e}\"", e.code());
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(args) => run(args),
        Command::VerifyLemmas { k } => {
            let checks = verify_lemmas(k)?;
            print!("{}", format_lemmas(k, &checks));
            let failed = checks.iter().any(|c| c.status == CheckStatus::Fail);
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::KernelInfo { d, k } => {
            print!("{}", kernel_info(d, k)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpPoints { level, output } => {
            let csv = points_csv(level)?;
            match output {
                Some(path) => fs::write(path, csv)?,
                None => io::stdout().write_all(csv.as_bytes())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpMatrix {
            level,
            delta,
            output,
            params,
        } => {
            let mut cfg = RunConfig::default();
            params.apply(&mut cfg);
            if level == 0 {
                return Err(Error::InvalidArgument("levels start at 1".into()));
            }
            let delta = match delta {
                Some(d) => d,
                None => scheduled_delta(&cfg, level)?,
            };
            let m = system_matrix(level, delta, cfg.nu)?;
            let mut w = BufWriter::new(fs::File::create(&output)?);
            write_matrix(&m, &mut w)?;
            w.flush()?;
            eprintln!("wrote {}x{} matrix (delta = {delta}) to {}", m.dim(), m.dim(), output.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    args.params.apply(&mut cfg);
    if let Some(v) = args.quad_points {
        cfg.quad_points = v;
    }
    if let Some(v) = args.eigen_levels {
        cfg.eigen_levels = v;
    }
    if let Some(v) = args.output {
        cfg.output = v;
    }
    if let Some(v) = args.summary {
        cfg.summary = v;
    }
    if let Some(v) = args.model {
        cfg.model = Some(v);
    }
    let quiet = args.quiet;
    let outcome = run_experiment(&cfg, |msg| {
        if !quiet {
            eprintln!("{msg}");
        }
    })?;
    fs::write(&cfg.output, &outcome.csv)?;
    fs::write(&cfg.summary, &outcome.summary)?;
    if let Some(path) = &cfg.model {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_model(&outcome.model, &mut w)?;
        w.flush()?;
    }
    print!("{}", outcome.summary);
    Ok(ExitCode::SUCCESS)
}
