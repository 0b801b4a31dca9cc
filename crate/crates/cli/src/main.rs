use std::process::ExitCode;

use chartrefine::commands::{
    cmd_eval, cmd_generate, cmd_parse, cmd_quality, cmd_simulate, EvalArgs, GenerateArgs, ParseArgs, QualityArgs,
    SimulateArgs,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chartrefine",
    version,
    about = "Synthetic chart corpora, chart parsing and SCRM evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic chart corpus with pixel ground truth.
    Generate(GenerateArgs),
    /// Score predictions against ground truth with SCRM.
    Eval(EvalArgs),
    /// Corpus statistics: points, label uniqueness, correlation, PMI.
    Quality(QualityArgs),
    /// Parse chart images through the refine loop.
    Parse(ParseArgs),
    /// Run the refine loop against the simulated model over a corpus.
    Simulate(SimulateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(drop),
        Command::Eval(a) => cmd_eval(a).map(drop),
        Command::Quality(a) => cmd_quality(a).map(drop),
        Command::Parse(a) => cmd_parse(a).map(drop),
        Command::Simulate(a) => cmd_simulate(a).map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
