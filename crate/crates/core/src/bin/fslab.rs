use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fslab::lab::plotdata::emit_plotdata_files;
use fslab::lab::{run, Command, LabConfig};
use fslab::LabError;

#[derive(Parser)]
#[command(name = "fslab", version, about = "Fractional Sobolev laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// `key=value` overrides, dotted keys address sections.
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// CSV of the sharp constant over the configured (N, s) sweep.
    SharpConstant(Common),
    Norms(Common),
    AuditRefined(Common),
    AuditChain(Common),
    ProfileExtract(Common),
    SubcriticalSweep(Common),
    CcaAtoms(Common),
    /// Every reference experiment plus the manifest.
    Pipeline(Common),
    /// Long-format `series,x,y` rows from report CSVs.
    EmitPlotdata {
        #[arg(long)]
        output: Option<PathBuf>,
        reports: Vec<PathBuf>,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("FSLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn execute(cli: Cli) -> Result<(), LabError> {
    let (command, common) = match cli.command {
        Cmd::SharpConstant(c) => (Command::SharpConstant, c),
        Cmd::Norms(c) => (Command::Norms, c),
        Cmd::AuditRefined(c) => (Command::AuditRefined, c),
        Cmd::AuditChain(c) => (Command::AuditChain, c),
        Cmd::ProfileExtract(c) => (Command::ProfileExtract, c),
        Cmd::SubcriticalSweep(c) => (Command::SubcriticalSweep, c),
        Cmd::CcaAtoms(c) => (Command::CcaAtoms, c),
        Cmd::Pipeline(c) => (Command::Pipeline, c),
        Cmd::EmitPlotdata { output, reports } => {
            let paths: Vec<&std::path::Path> = reports.iter().map(|p| p.as_path()).collect();
            let text = emit_plotdata_files(&paths)?;
            match output {
                Some(path) => std::fs::write(&path, text).map_err(|e| LabError::Io { path, source: e })?,
                None => print!("{text}"),
            }
            return Ok(());
        }
    };
    let cfg = LabConfig::load(&common.config, &common.overrides)?;
    let manifest = run(command, &cfg)?;
    for (name, files) in &manifest.outputs {
        for f in files {
            println!("{name}: {}", cfg.output_dir.join(f).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fslab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
