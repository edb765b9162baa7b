//! Write the generated fixture table as CSV.
//!
//! `cargo run -p synthkit --example write_fixture -- OUT.csv [ROWS] [SEED]`

use std::path::PathBuf;
use std::process::ExitCode;

use synthkit::data::write_csv;
use synthkit::fixtures::fixture_a;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first().map(PathBuf::from) else {
        eprintln!("usage: write_fixture OUT.csv [ROWS] [SEED]");
        return ExitCode::from(1);
    };
    let parse = |i: usize, default: u64| args.get(i).map_or(Ok(default), |s| s.parse::<u64>());
    let (Ok(rows), Ok(seed)) = (parse(1, 2000), parse(2, 2024)) else {
        eprintln!("ROWS and SEED must be non-negative integers");
        return ExitCode::from(1);
    };
    match write_csv(&fixture_a(rows as usize, seed), &path) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
