use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use charfn_cli::{run, Cli, InputError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(if e.downcast_ref::<InputError>().is_some() { 2 } else { 1 });
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &cli.global.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text + "\n") {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => {
            // a closed pipe (`| head`) is not an error of the run
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    let s = &report.summary;
    eprintln!("{}: {} pass, {} fail, {} certificate-only", report.command, s.pass, s.fail, s.certificate_only);
    ExitCode::from(report.exit_code() as u8)
}
