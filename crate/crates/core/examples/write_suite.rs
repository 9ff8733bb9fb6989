//! Regenerate `suite/` from the suite builder. Run from the crate directory.

use drcplan::harness::{build_suite, suite_index, suite_text};

fn main() {
    let s = build_suite();
    std::fs::write("suite/suite.txt", suite_text(&s)).unwrap();
    std::fs::write("suite/index.csv", suite_index(&s)).unwrap();
}
