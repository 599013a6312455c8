use clap::error::ErrorKind;
use clap::Parser;

use chkit_cli::{execute, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match execute(cli) {
        Ok(report) => {
            match &report.raw {
                Some(text) => print!("{text}"),
                None => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
            }
            eprintln!("{}", report.summary);
            std::process::exit(0);
        }
        Err(failure) => {
            if let Some(report) = &failure.report {
                println!("{}", serde_json::to_string_pretty(report).unwrap());
            }
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}
