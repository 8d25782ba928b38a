//! Full acceptance run. Prints one line per criterion.
//! Pass criterion ids as arguments to run a subset: `cargo test --test acceptance -- 1 12`.
//!
//! Three checks are known to fail (see README). The target exits nonzero on any
//! other failure, and also when a known failure starts passing, so the list
//! cannot go stale.

use std::process::ExitCode;

use bjj_core::acceptance::run_checks;
use bjj_core::model::oscillation_frequencies;

/// 4, 5: coexisting periodic orbits catch a few percent of random starts, so
/// not every member reaches the attractor and the mean decorrelator stays O(0.1).
/// 9: the chaotic presets sit just under the Ginibre bound at S=5.
const KNOWN_FAILURES: [u8; 3] = [4, 5, 9];

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let reports = run_checks(oscillation_frequencies, &only, |r| {
        let note = if KNOWN_FAILURES.contains(&r.id) { "  (known failure)" } else { "" };
        println!("{r}{note}");
    });
    let failed = reports.iter().filter(|r| !r.passed).count();
    let unexpected: Vec<u8> = reports.iter().filter(|r| r.passed == KNOWN_FAILURES.contains(&r.id)).map(|r| r.id).collect();
    println!("acceptance: {} passed, {failed} failed", reports.len() - failed);
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
