mod args;
mod commands;
mod config;
mod exit;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Format};

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let file = config::FileConfig::from_env()?;
    let cfg = config::resolve(&cli.common, &file)?;
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Thresholds(a) => commands::thresholds(&cfg, a, out),
        Command::Sweep(a) => commands::sweep(&cfg, a, out),
        Command::Calibrate(a) => commands::calibrate(&cfg, a, &file, out),
        Command::Simulate(a) => commands::simulate(&cfg, a, &file, out),
        Command::Backtest(a) => commands::backtest(&cfg, a, &file, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            let doc = exit::classify(&err);
            if cli.common.format == Some(Format::Json) {
                eprintln!("{}", serde_json::to_string(&doc).unwrap_or_else(|_| doc.message.clone()));
            } else {
                eprintln!("error: {}", doc.message);
            }
            doc.exit_code
        }
    };
    ExitCode::from(code as u8)
}
