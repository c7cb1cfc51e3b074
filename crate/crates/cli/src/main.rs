use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(jdag_cli::run(std::env::args_os()))
}
