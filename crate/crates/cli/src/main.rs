use std::process::ExitCode;

use circpack_cli::{execute, RunConfig};

fn main() -> ExitCode {
    let config = match RunConfig::parse_args(std::env::args_os()) {
        Ok(Ok(c)) => c,
        Ok(Err(help)) => {
            print!("{help}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&config) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
