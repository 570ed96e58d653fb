use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(scanpaint::cli::run(std::env::args_os()) as u8)
}
