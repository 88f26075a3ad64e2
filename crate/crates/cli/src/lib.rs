//! The `tfree` command-line tool.
//!
//! Exit codes: 0 on success, 1 for bad input or usage, 2 when an internal
//! invariant is violated.

use std::ffi::OsString;
use std::io::{self, Write};

use clap::error::ErrorKind;
use clap::Parser;
use tfree_core::Error;

pub mod args;
pub mod commands;
pub mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
        }
    };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = config::Resolved::new(&cli.global)
        .and_then(|cfg| commands::execute(cli.command, &cfg, &mut out))
        .and_then(|()| out.flush().map_err(Error::from));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input() {
                EXIT_INPUT
            } else {
                EXIT_INVARIANT
            }
        }
    }
}
