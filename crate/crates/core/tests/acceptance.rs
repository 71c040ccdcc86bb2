//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by a
//! tally. Criteria that fail are reported, not hidden; the process exits
//! nonzero only if a criterion could not be evaluated at all.

use std::time::Instant;

use polyfront::acceptance::run_all;

fn main() {
    let start = Instant::now();
    let verdicts = run_all();
    for v in &verdicts {
        println!("{v}");
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("acceptance: {passed}/{} criteria pass in {:.1} s", verdicts.len(), start.elapsed().as_secs_f64());
    let errored: Vec<_> = verdicts.iter().filter(|v| v.detail.starts_with("error:")).collect();
    if !errored.is_empty() {
        for v in errored {
            eprintln!("criterion {} did not run: {}", v.id, v.detail);
        }
        std::process::exit(1);
    }
}
