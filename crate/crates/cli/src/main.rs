use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dronedialog::controller::ScriptedController;
use dronedialog::engine::{ControllerBackend, PerceptionBackend};
use dronedialog::harness::{aggregate, run_matrix, write_outputs, ExperimentReport, Matrix, Variant};
use dronedialog::protocol::{
    build_controller_preamble, BackendEndpoint, HttpServer, PreambleConfig, ProtocolClient, ReferenceService,
    RemoteController, RemotePerception, PREAMBLE_ID,
};

#[derive(Parser)]
#[command(
    name = "dronedialog",
    version,
    about = "Drone active-perception dialogue experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run baseline and proposed trials over an experiment matrix.
    Run {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the matrix seed count.
        #[arg(long)]
        seeds: Option<u32>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// `scripted` or `remote:<base url>`.
        #[arg(long, default_value = "scripted")]
        backend: BackendChoice,
    },
    /// Serve the scripted controller and synthetic perception over HTTP.
    Serve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Print the controller preamble.
    Preamble {
        #[arg(long)]
        no_early_stop: bool,
    },
}

#[derive(Clone, Debug)]
enum BackendChoice {
    Scripted,
    Remote(String),
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            _ if s == "scripted" => Ok(Self::Scripted),
            Some(("remote", url)) if !url.is_empty() => Ok(Self::Remote(url.to_string())),
            _ => Err(format!("expected `scripted` or `remote:<url>`, got {s:?}")),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Run {
            matrix,
            out,
            seeds,
            parallel,
            backend,
        } => run_experiments(matrix, out, seeds, parallel, backend),
        Cmd::Serve { matrix, addr } => serve(matrix, &addr),
        Cmd::Preamble { no_early_stop } => {
            let config = PreambleConfig {
                early_stop: !no_early_stop,
                ..Default::default()
            };
            print!("{}", build_controller_preamble(&config));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_experiments(
    matrix_path: PathBuf,
    out: PathBuf,
    seeds: Option<u32>,
    parallel: usize,
    backend: BackendChoice,
) -> Result<ExitCode> {
    let mut matrix = Matrix::load(&matrix_path)?;
    if let Some(n) = seeds {
        matrix.seeds = n;
    }
    matrix.validate()?;
    let scenes = matrix.load_scenes()?;

    let (controller, perception): (Box<dyn ControllerBackend>, Box<dyn PerceptionBackend>) = match backend {
        BackendChoice::Scripted => (
            Box::new(ScriptedController::default()),
            Box::new(scenes.oracle(matrix.noise)),
        ),
        BackendChoice::Remote(url) => {
            let client = ProtocolClient::new(BackendEndpoint::new(url)).context("configuring remote backend")?;
            (
                Box::new(RemoteController::new(client.clone(), PREAMBLE_ID)),
                Box::new(RemotePerception::new(client)),
            )
        }
    };

    let started = Instant::now();
    let outcomes = run_matrix(&matrix, &scenes, controller.as_ref(), perception.as_ref(), parallel)?;
    let trials: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
    let report = aggregate(&trials)?;
    write_outputs(&out, &outcomes, &report)?;
    print_summary(&report);
    println!(
        "{} trials in {:.2}s, reports in {}",
        outcomes.len(),
        started.elapsed().as_secs_f64(),
        out.display()
    );

    let violations: Vec<_> = outcomes
        .iter()
        .flat_map(|o| o.violations.iter().map(move |v| (o.spec.episode_id(), v)))
        .collect();
    for (id, v) in &violations {
        eprintln!("invariant violated in {id}: {v}");
    }
    for o in outcomes.iter().filter(|o| o.result.failed()) {
        eprintln!("trial {} failed: {}", o.spec.episode_id(), o.result.failure);
    }
    if !violations.is_empty() || report.failed_trials > 0 {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "{:<20} {:>9} {:>9} {:>9} {:>9}",
        "environment", "score/b", "score/p", "detect/b", "detect/p"
    );
    for e in &report.environments {
        println!(
            "{:<20} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            e.environment, e.baseline_score, e.proposed_score, e.baseline_detection, e.proposed_detection
        );
        for p in &e.placements {
            println!(
                "  {:<18} {:>9} {:>9} {:>9.3} {:>9.3}",
                Variant::from(p.placement).as_str(),
                "",
                "",
                p.baseline_detection,
                p.proposed_detection
            );
        }
    }
}

fn serve(matrix_path: PathBuf, addr: &str) -> Result<ExitCode> {
    let matrix = Matrix::load(&matrix_path)?;
    let scenes = matrix.load_scenes()?;
    if scenes.scenes.is_empty() {
        bail!("matrix {} names no scenes", matrix_path.display());
    }
    let service = ReferenceService::new(
        Arc::new(ScriptedController::default()),
        Arc::new(scenes.oracle(matrix.noise)),
    );
    let server = HttpServer::start(addr, Arc::new(service)).with_context(|| format!("binding {addr}"))?;
    println!("serving {} scenes on {}", scenes.scenes.len(), server.url());
    loop {
        std::thread::park();
    }
}
