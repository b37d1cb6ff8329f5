use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bestofn::experiment::{self, Command, Results};

/// Runs a best-of-n swarm experiment described by a JSON spec file.
#[derive(Parser, Debug)]
#[command(name = "bestofn", version)]
struct Cli {
    /// simulate, ssa, meanfield, absorb or sweep; overrides the spec's command.
    command: Option<Command>,
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; defaults to the spec's `output`, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed base; run k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bestofn: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = experiment::load_spec(&cli.spec)?;
    if let Some(c) = cli.command {
        if c == Command::Sweep && spec.sweep.is_none() {
            return Err("the sweep command needs a `sweep` section in the spec".into());
        }
        spec.command = c;
    }
    if let Some(seed) = cli.seed {
        spec.swarm.seed = seed;
    }
    if let Some(r) = cli.repetitions {
        if r == 0 {
            return Err("--repetitions must be at least 1".into());
        }
        spec.repetitions = r;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let summary = experiment::execute(&spec, &out)?;
    if !cli.quiet {
        match &summary.results {
            Results::Batch(m) => {
                println!("{} runs, {} decided", m.repetitions, m.decided);
                for (i, (p, se)) in m.exit_probability.iter().zip(&m.exit_probability_se).enumerate() {
                    println!("E_{} = {p:.4} +- {se:.4}", i + 1);
                }
                if let Some(t) = m.mean_decision_time {
                    println!("mean decision time = {t:.3}");
                }
            }
            Results::MeanField { opinion_fractions, .. } => {
                for (i, f) in opinion_fractions.iter().enumerate() {
                    println!("x_{} = {f:.6}", i + 1);
                }
            }
            Results::Absorption(r) => {
                for (i, p) in r.probabilities.iter().enumerate() {
                    println!("E_{} = {p:.6}", i + 1);
                }
                println!("mean decision time = {:.3}", r.mean_time);
            }
            Results::Sweep(records) => {
                for rec in records {
                    println!("{} = {}: E = {:?}", rec.parameter, rec.value, rec.metrics.exit_probability);
                }
            }
        }
        println!("results written to {}", out.display());
    }
    Ok(())
}
