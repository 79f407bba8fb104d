use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(percepta::cli::run(std::env::args_os()))
}
