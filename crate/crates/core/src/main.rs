mod cli;

use std::process::ExitCode;

use clap::Parser;

use cli::args::Cli;
use cli::Run;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let mut run = Run::new(parsed.seed, argv);
    let outcome = cli::run(parsed.command, &mut run);
    let code = match outcome {
        Ok(()) if run.errors.is_empty() => 0,
        Ok(()) => {
            run.status = "error";
            1
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            run.errors.push(format!("{e:#}"));
            run.status = "error";
            1
        }
    };
    run.write(parsed.run_log.as_ref());
    ExitCode::from(code)
}
