use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = hdqcd_cli::configure_threads() {
        eprintln!("hdqcd: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let code = hdqcd_cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
