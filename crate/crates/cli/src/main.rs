use std::process::ExitCode;

fn main() -> ExitCode {
    pamsim::cli::run(std::env::args_os())
}
