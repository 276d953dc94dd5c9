mod args;
mod commands;
mod report;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::Output;

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("quantwa: warning: could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> ExitCode {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            eprintln!("quantwa: {e}");
            ExitCode::from(4)
        }
        _ => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads(cli.threads);
    match commands::run(cli.command) {
        Ok(Output::Text(text)) => emit(&text),
        Ok(Output::Report(r)) => match serde_json::to_string_pretty(&r) {
            Ok(json) => emit(&(json + "\n")),
            Err(e) => {
                eprintln!("quantwa: {e}");
                ExitCode::from(4)
            }
        },
        Err(e) => {
            eprintln!("quantwa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
