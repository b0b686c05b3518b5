use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use divclosure::experiments::{
    cmd_converge, cmd_newton_diag, cmd_project, cmd_relax, cmd_structure, record_manifest, DistributionSpec,
    ExperimentConfig, Outcome,
};
use divclosure::Error;

#[derive(Parser, Debug)]
#[command(version, about = "Divergence-based moment closures for the homogeneous BGK equation")]
struct Cli {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// f1, f2, f3 or a Gaussian-mixture file with `weight mean variance` lines.
    #[arg(long, global = true)]
    dist: Option<String>,
    #[arg(long, global = true)]
    order: Option<u32>,
    /// Basis sizes 3..=kmax.
    #[arg(long, global = true)]
    kmax: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Closure profiles and coefficients.
    Project,
    /// Newton update and condition-number histories.
    NewtonDiag,
    /// Error decay with the number of moments.
    Converge,
    /// Homogeneous BGK relaxation traces.
    Relax,
    /// Hyperbolicity diagnostics.
    Structure,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Project => "project",
            Command::NewtonDiag => "newton-diag",
            Command::Converge => "converge",
            Command::Relax => "relax",
            Command::Structure => "structure",
        }
    }
}

fn build_config(cli: &Cli) -> divclosure::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(dist) = &cli.dist {
        cfg.distribution = DistributionSpec::parse(dist);
    }
    if let Some(order) = cli.order {
        cfg.order = order;
    }
    if let Some(kmax) = cli.kmax {
        cfg.k_list = (3..=kmax).collect();
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Outcome::InvalidConfig.code() as u8);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.output_dir) {
        eprintln!("error: cannot create {}: {e}", cfg.output_dir.display());
        return ExitCode::from(Outcome::InvalidConfig.code() as u8);
    }
    let run = match cli.command {
        Command::Project => cmd_project(&cfg),
        Command::NewtonDiag => cmd_newton_diag(&cfg),
        Command::Converge => cmd_converge(&cfg),
        Command::Relax => cmd_relax(&cfg),
        Command::Structure => cmd_structure(&cfg),
    };
    let result = match run {
        Ok(result) => result,
        Err(e) => {
            eprintln!("error: {e}");
            let outcome = Outcome::from_error(&e);
            let failed =
                divclosure::experiments::CommandResult { outcome, files: Vec::new(), messages: vec![e.to_string()] };
            let _ = record_manifest(&cfg, cli.command.name(), &failed);
            return ExitCode::from(outcome.code() as u8);
        }
    };
    for f in &result.files {
        println!("{}", f.display());
    }
    for m in &result.messages {
        eprintln!("warning: {m}");
    }
    if let Err(e) = record_manifest(&cfg, cli.command.name(), &result) {
        eprintln!("error: cannot write manifest: {e}");
    }
    ExitCode::from(result.outcome.code() as u8)
}
