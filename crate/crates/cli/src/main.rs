use std::process::ExitCode;

fn main() -> ExitCode {
    dqlimb_cli::run(std::env::args_os())
}
