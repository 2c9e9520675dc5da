use std::process::ExitCode;

fn main() -> ExitCode {
    fms_core::cli::run(std::env::args_os())
}
