use std::process::ExitCode;

fn main() -> ExitCode {
    qlyap::cli::run(std::env::args_os())
}
