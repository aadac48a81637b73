use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

mod args;
mod error;
mod output;
mod run;

use args::Cli;
use error::CliError;
use run::Outcome;

fn run_cli(cli: Cli) -> Result<String, CliError> {
    let raw = args::merge(&cli)?;
    let cfg = run::resolve(raw)?;
    let started = Instant::now();
    let mut outcome = match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("--threads {threads}: {e}")))?
            .install(|| run::execute(&cfg))?,
        None => run::execute(&cfg)?,
    };
    if cfg.record_time {
        if let Outcome::Experiment(rep) = &mut outcome {
            rep.metadata.wall_time_seconds = Some(started.elapsed().as_secs_f64());
        }
    }
    let line = run::summary(&cfg, &outcome);
    let artifact = run::artifact(&cfg, outcome);
    let bytes = output::render(&artifact, cfg.output_format)?;
    output::write(&bytes, cfg.output_path.as_deref())?;
    Ok(match &cfg.output_path {
        Some(p) => format!("{line} -> {}", p.display()),
        None => line,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let to_stdout = cli.flags.out.is_none();
    match run_cli(cli) {
        Ok(line) => {
            if to_stdout {
                eprintln!("{line}");
            } else {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("haarblocks: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
