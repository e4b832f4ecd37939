//! Command-line front end for the `structleak` library.

pub mod commands;
pub mod config;
pub mod failure;

use failure::CliError;

/// Runs one invocation and returns the process exit code. Errors go to
/// stderr as a JSON record, and to `out/error.json` when the output
/// directory is known.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let (err, out) = match config::parse_args(argv) {
        Ok(cfg) => match commands::run(&cfg) {
            Ok(()) => return 0,
            Err(e) => (e, Some(cfg.out())),
        },
        Err(e) => (e, None),
    };
    report(&err, out)
}

fn report(err: &CliError, out: Option<std::path::PathBuf>) -> i32 {
    if let Some(text) = &err.display_only {
        print!("{text}");
        return err.code;
    }
    eprintln!("{}", err.to_json());
    commands::write_error_record(out, err);
    err.code
}
