//! Runs the twelve acceptance checks at full size and prints one PASS/FAIL line
//! per criterion. Exits nonzero on any failure not listed in `KNOWN_SHORTFALLS`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use calabi_lab::experiments::suites::{SuiteParams, SUITES};

/// Runtime budgets in seconds, by criterion number.
const BUDGETS: [(usize, u64); 4] = [(1, 60), (2, 60), (10, 300), (11, 600)];

/// Verdicts that fail for a documented reason. A listed verdict that starts
/// passing is reported but does not fail the run.
const KNOWN_SHORTFALLS: [(&str, &str); 1] = [(
    "kr-flow",
    // max over equal-area cell centres misses the polar peak by O(h)
    "pinf_q1.length_stable_under_refinement",
)];

fn main() -> ExitCode {
    let params = SuiteParams::default();
    let mut unexpected = 0;
    for (i, (name, run)) in SUITES.iter().enumerate() {
        let criterion = i + 1;
        let start = Instant::now();
        let outcome = run(&params);
        let elapsed = start.elapsed();
        let budget = BUDGETS
            .iter()
            .find(|(c, _)| *c == criterion)
            .map(|(_, s)| Duration::from_secs(*s));
        let mut notes = Vec::new();
        let mut ok = true;
        match outcome {
            Err(e) => {
                ok = false;
                unexpected += 1;
                notes.push(format!("error: {e}"));
            }
            Ok(o) => {
                for v in o.table.failures() {
                    ok = false;
                    let known = KNOWN_SHORTFALLS.iter().any(|(s, n)| s == name && *n == v.name);
                    if !known {
                        unexpected += 1;
                    }
                    notes.push(format!(
                        "{}{} = {:?} ({})",
                        if known { "known shortfall " } else { "" },
                        v.name,
                        v.value,
                        v.detail
                    ));
                }
                for (s, n) in KNOWN_SHORTFALLS.iter().filter(|(s, _)| s == name) {
                    if o.table.verdicts.iter().any(|v| v.name == *n && v.passed) {
                        notes.push(format!("listed shortfall {s}/{n} now passes"));
                    }
                }
            }
        }
        if let Some(b) = budget {
            if elapsed > b {
                ok = false;
                unexpected += 1;
                notes.push(format!("runtime {:.1}s over budget {}s", elapsed.as_secs_f64(), b.as_secs()));
            }
        }
        println!(
            "{} criterion {criterion:>2} {name} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        for n in notes {
            println!("       {n}");
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
