//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion ids (e.g. `3 7`) to run a subset.

use std::process::ExitCode;

use confsel::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let ids: Vec<u8> = if args.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        args.iter().filter_map(|a| a.parse().ok()).collect()
    };
    let mut failed = 0;
    for id in &ids {
        let result = run_criterion(*id).expect("known criterion");
        println!("{}", result.line());
        failed += usize::from(!result.passed);
    }
    println!("acceptance: {} passed, {failed} failed", ids.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
