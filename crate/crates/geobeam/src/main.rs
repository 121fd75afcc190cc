use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geobeam::cli::{run, Verb};
use geobeam::config::ExperimentConfig;

/// Geodesic-tube covers, loop classification, and bound certificates.
#[derive(Parser)]
#[command(name = "geobeam", version, about)]
struct Cli {
    #[command(subcommand)]
    verb: VerbArgs,
}

#[derive(Subcommand)]
enum VerbArgs {
    /// Build and verify a good tube cover of the cosphere fiber
    Cover(RunArgs),
    /// Classify tubes by self-looping behavior
    Classify(RunArgs),
    /// Classify and evaluate the sup-norm bound certificate
    Certify(RunArgs),
    /// Run the conjugate-point hypothesis check
    Conjugate(RunArgs),
    /// Cover → classify → certify over a radius grid
    Sweep(RunArgs),
    /// Reproduce the flat-torus fiber diagram with the lattice oracle overlay
    Figure(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// override a config value: --set section.key=value
    #[arg(long = "set")]
    overrides: Vec<String>,
    /// worker threads (default: hardware parallelism)
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, args) = match &cli.verb {
        VerbArgs::Cover(a) => (Verb::Cover, a),
        VerbArgs::Classify(a) => (Verb::Classify, a),
        VerbArgs::Certify(a) => (Verb::Certify, a),
        VerbArgs::Conjugate(a) => (Verb::Conjugate, a),
        VerbArgs::Sweep(a) => (Verb::Sweep, a),
        VerbArgs::Figure(a) => (Verb::Figure, a),
    };
    if let Some(jobs) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("{}", error_json("config", &format!("thread pool: {e}")));
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!(
                "{}",
                error_json("config", &format!("{}: {e}", args.config.display()))
            );
            return ExitCode::from(2);
        }
    };
    let config = match ExperimentConfig::parse(&text, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json("config", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(verb, &config) {
        Ok(report) => {
            println!(
                "{} ok: artifacts in {}",
                report.verb, report.config.output.dir
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = match e.exit_code() {
                2 => "config",
                3 => "verification",
                _ => "computation",
            };
            eprintln!("{}", error_json(kind, &e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}
