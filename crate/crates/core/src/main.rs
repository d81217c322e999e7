use std::process::ExitCode;

fn main() -> ExitCode {
    rsma_lls::cli::main_with_args(std::env::args_os())
}
