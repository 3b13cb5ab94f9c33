use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = ila::cli::run_with(std::env::args(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code.clamp(0, 255) as u8)
}
