//! Pinned verification suite, run as its own test binary so each criterion
//! prints its line as it finishes rather than after the whole run. Expect
//! roughly an hour at the pinned N = 10^7 sample counts on one core.
//!
//!     cargo test --release --test acceptance
//!
//! Pass criterion numbers after `--` to run a subset. Exits nonzero if any
//! selected criterion fails.

use flab::acceptance::{run_one, COUNT};

fn main() {
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get());
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected = if selected.is_empty() {
        (1..=COUNT).collect()
    } else {
        selected
    };
    let mut failures = 0;
    for i in selected {
        let started = std::time::Instant::now();
        let r = run_one(i, threads);
        println!("{}  [{:.1?}]", r.line(), started.elapsed());
        if !r.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        eprintln!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all selected criteria passed");
}
