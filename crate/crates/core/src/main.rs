use std::process::ExitCode;

fn main() -> ExitCode {
    token_insight::cli::run(std::env::args_os())
}
