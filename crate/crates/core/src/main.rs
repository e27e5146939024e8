use std::process::ExitCode;

fn main() -> ExitCode {
    let code = mml_estim::cli::run(std::env::args_os());
    ExitCode::from(code as u8)
}
