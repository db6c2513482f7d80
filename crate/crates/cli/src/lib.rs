//! Command-line front end for `hdqcd`.
//!
//! Exit status: 0 on success, 2 for usage errors, 3 for unreadable or
//! malformed data and 4 for numerical failures. `HDQCD_THREADS` caps the
//! number of worker threads used for replications.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::io::Write;

pub use config::{parse_config, CliConfig, ParseOutcome};
pub use error::{CliError, CliResult};

/// Parse `argv`, run the subcommand and return the exit status. Errors are
/// reported on `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_config(argv) {
        Ok(cfg) => cfg,
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
        Err(ParseOutcome::Cli(e)) => return report(e, stderr),
    };
    match commands::execute(&cfg, stdout) {
        Ok(()) => 0,
        Err(e) => report(e, stderr),
    }
}

fn report(e: CliError, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "hdqcd: {e}");
    e.exit_code()
}

/// Size the global rayon pool from `HDQCD_THREADS` when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HDQCD_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("HDQCD_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}
