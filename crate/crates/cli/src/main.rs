mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::cmd_train(a),
        Command::Summarize(a) => commands::cmd_summarize(a),
        Command::Score(a) => commands::cmd_score(a),
        Command::Explain(a) => commands::cmd_explain(a),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
