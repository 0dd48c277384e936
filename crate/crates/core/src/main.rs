use std::process::ExitCode;

use clap::Parser;
use orbitfed::cli::{self, Args, CliError};

fn report(e: &CliError) -> ExitCode {
    let body = serde_json::json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
        }
    });
    eprintln!("{body}");
    ExitCode::from(match e {
        CliError::Usage(_) => 2,
        _ => 1,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    orbitfed::par::init_from_env();
    let plan = match args.into_plan() {
        Ok(p) => p,
        Err(e) => return report(&e),
    };
    match cli::run(&plan) {
        Ok(r) => {
            if let Some(s) = &r.summary {
                print!("{}", s.table());
            }
            println!("wrote {}", r.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
