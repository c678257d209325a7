use std::process::ExitCode;

fn main() -> ExitCode {
    sdmimo::cli::run(std::env::args_os())
}
