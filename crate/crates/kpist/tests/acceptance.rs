//! Runs the fourteen acceptance criteria on the reference configuration and
//! prints one pass/fail line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use kpist::config::RunConfig;
use kpist::validation::run_suite;

fn main() -> ExitCode {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let results = match run_suite(&cfg, 20240601, |r| println!("{r}")) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite could not start: {e}");
            return ExitCode::FAILURE;
        }
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
