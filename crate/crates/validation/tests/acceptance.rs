//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//! Numeric arguments select criteria; a name filter that does not match
//! `acceptance` skips the run.

use std::process::ExitCode;
use std::time::Instant;

use catbreed_validation::{run, Traces, ORDER};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut selected = Vec::new();
    let mut filters = Vec::new();
    for a in args.iter().filter(|a| !a.starts_with('-')) {
        match a.parse::<u32>() {
            Ok(n) => selected.push(n),
            Err(_) => filters.push(a.as_str()),
        }
    }
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f)) {
        return ExitCode::SUCCESS;
    }
    let mut traces = Traces::default();
    let mut failed = 0;
    for n in ORDER.into_iter().filter(|n| selected.is_empty() || selected.contains(n)) {
        let t = Instant::now();
        let (pass, detail) = run(n, &mut traces).unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "{} criterion {n}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of the selected criteria failed");
        ExitCode::FAILURE
    }
}
