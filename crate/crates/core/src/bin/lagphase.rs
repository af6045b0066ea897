use std::process::ExitCode;

fn main() -> ExitCode {
    let status = lagphase::cli::main_with_args(std::env::args_os());
    ExitCode::from(status as u8)
}
