use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(disentangle::cli::run(std::env::args().skip(1)))
}
