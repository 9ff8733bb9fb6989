//! Deterministic case-study levels.

use super::Level;
use std::fmt;
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum CaseKind {
    /// Alternating alleys the box snakes through.
    Zigzag,
    /// A junction with a side branch that ends in a dead-end corridor.
    Backtrack,
    /// Box with two equal-length L-shaped routes to the target.
    TwoPaths,
    /// Straight single-row corridor.
    Corridor,
    /// One right turn: push right, then down.
    Turn,
}

impl CaseKind {
    pub const ALL: [CaseKind; 5] = [
        CaseKind::Zigzag,
        CaseKind::Backtrack,
        CaseKind::TwoPaths,
        CaseKind::Corridor,
        CaseKind::Turn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Zigzag => "zigzag",
            CaseKind::Backtrack => "backtrack",
            CaseKind::TwoPaths => "two_paths",
            CaseKind::Corridor => "corridor",
            CaseKind::Turn => "turn",
        }
    }

    pub fn from_name(s: &str) -> Option<CaseKind> {
        CaseKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
    }

    /// Inclusive size bounds.
    pub fn bounds(self) -> (usize, usize) {
        match self {
            CaseKind::Zigzag => (8, 48),
            CaseKind::Backtrack => (20, 48),
            CaseKind::TwoPaths => (5, 24),
            CaseKind::Corridor => (5, 48),
            CaseKind::Turn => (6, 48),
        }
    }

    pub fn default_size(self) -> usize {
        match self {
            CaseKind::Zigzag => 16,
            CaseKind::Backtrack => 20,
            CaseKind::TwoPaths => 7,
            CaseKind::Corridor => 8,
            CaseKind::Turn => 8,
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{kind} size {size} outside {min}..={max}")]
pub struct GenerateError {
    pub kind: CaseKind,
    pub size: usize,
    pub min: usize,
    pub max: usize,
}

struct Canvas {
    rows: Vec<Vec<char>>,
}

impl Canvas {
    fn walls(h: usize, w: usize) -> Canvas {
        Canvas {
            rows: vec![vec!['#'; w]; h],
        }
    }
    fn put(&mut self, r: usize, c: usize, ch: char) {
        self.rows[r][c] = ch;
    }
    fn open_row(&mut self, r: usize, c0: usize, c1: usize) {
        for c in c0..=c1 {
            self.rows[r][c] = ' ';
        }
    }
    fn open_col(&mut self, c: usize, r0: usize, r1: usize) {
        for r in r0..=r1 {
            self.rows[r][c] = ' ';
        }
    }
    fn level(&self) -> Level {
        let text: String = self
            .rows
            .iter()
            .map(|r| r.iter().collect::<String>() + "\n")
            .collect();
        Level::parse(&text).expect("generator produced an invalid level")
    }
}

pub fn generate_case_level(kind: CaseKind, size: usize) -> Result<Level, GenerateError> {
    let (min, max) = kind.bounds();
    if size < min || size > max {
        return Err(GenerateError {
            kind,
            size,
            min,
            max,
        });
    }
    Ok(match kind {
        CaseKind::Zigzag => zigzag(size),
        CaseKind::Backtrack => backtrack(size),
        CaseKind::TwoPaths => two_paths(size),
        CaseKind::Corridor => corridor(size),
        CaseKind::Turn => turn(size),
    })
}

/// n×n. Two-row alleys separated by one-row barriers with a gap at alternating ends.
/// The box starts at the left of the first alley and must snake down to the last one.
fn zigzag(n: usize) -> Level {
    let mut cv = Canvas::walls(n, n);
    let alleys = (n - 1) / 3;
    for k in 0..alleys {
        let top = 1 + 3 * k;
        cv.open_row(top, 1, n - 2);
        cv.open_row(top + 1, 1, n - 2);
        if k + 1 < alleys {
            let gap = if k % 2 == 0 { n - 3 } else { 2 };
            cv.put(top + 2, gap, ' ');
        }
    }
    cv.put(2, 1, '@');
    cv.put(2, 2, '$');
    let last = 3 * (alleys - 1) + 2;
    let tc = if (alleys - 1) % 2 == 0 { n - 2 } else { 1 };
    cv.put(last, tc, '.');
    cv.level()
}

/// n×n. The box runs right along a row to a junction D1 and then down a column to the
/// target. Above D1 the column rises to a corner D2, from which a one-wide corridor runs
/// left to D3. A box can never be pushed out of D3 (a wall is where the agent would
/// stand), so the corridor is a dead end. A passage lets the agent walk round to the
/// column above D1.
fn backtrack(n: usize) -> Level {
    let (x, r1, r2) = backtrack_nodes(n);
    let mut cv = Canvas::walls(n, n);
    cv.open_row(r1, 1, x);
    cv.open_col(x, r2 - 1, n - 3);
    cv.open_row(r2, x - BACKTRACK_BRANCH, x);
    // the agent's way round to the column above D1
    cv.open_col(1, r1 - 2, r1);
    cv.open_row(r1 - 2, 1, x);
    cv.put(r1, 2, '@');
    cv.put(r1, 3, '$');
    cv.put(n - 3, x, '.');
    cv.level()
}

const BACKTRACK_BRANCH: usize = 4;

/// Column of the junction, row of D1, row of D2.
fn backtrack_nodes(n: usize) -> (usize, usize, usize) {
    (n / 2 - 2, n / 2, n / 2 - 4)
}

/// D1, D2 and D3 of a backtrack level of size `n`, as (row, col).
pub fn backtrack_decision_nodes(n: usize) -> [(usize, usize); 3] {
    let (x, r1, r2) = backtrack_nodes(n);
    [(r1, x), (r2, x), (r2, x - BACKTRACK_BRANCH)]
}

/// A ring whose top-left corner holds the box and bottom-right corner the target.
/// Going right-then-down or down-then-right cost the same number of moves.
fn two_paths(n: usize) -> Level {
    let k = n - 4;
    let far = 2 + k;
    let mut cv = Canvas::walls(n, n);
    cv.open_row(2, 1, far);
    cv.open_row(far, 1, far);
    cv.open_col(2, 1, far);
    cv.open_col(far, 1, far);
    cv.put(1, 1, '@');
    cv.put(1, far - 1, ' ');
    cv.put(far - 1, 1, ' ');
    cv.put(2, 2, '$');
    cv.put(far, far, '.');
    cv.level()
}

/// 3 rows, one open row: agent, box, then floor up to a target at the far end.
fn corridor(n: usize) -> Level {
    let mut cv = Canvas::walls(3, n);
    cv.open_row(1, 1, n - 2);
    cv.put(1, 1, '@');
    cv.put(1, 2, '$');
    cv.put(1, n - 2, '.');
    cv.level()
}

/// n×n. Push right along row 2, then down a column to the target.
fn turn(n: usize) -> Level {
    let t = n - 3;
    let mut cv = Canvas::walls(n, n);
    cv.open_row(2, 1, t);
    cv.open_row(1, t - 1, t);
    cv.open_col(t, 1, n - 2);
    cv.put(2, 1, '@');
    cv.put(2, 2, '$');
    cv.put(n - 2, t, '.');
    cv.level()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sokoban::{solve_oracle, OracleResult};

    #[test]
    fn bounds() {
        assert!(generate_case_level(CaseKind::Zigzag, 7).is_err());
        assert!(generate_case_level(CaseKind::Zigzag, 49).is_err());
        assert!(generate_case_level(CaseKind::Backtrack, 19).is_err());
    }

    #[test]
    fn all_kinds_solvable_at_default_size() {
        for k in CaseKind::ALL {
            let l = generate_case_level(k, k.default_size()).unwrap();
            assert!(l.border_is_wall());
            assert!(
                matches!(solve_oracle(&l, 1_000_000), OracleResult::Solved(_)),
                "{k}"
            );
        }
    }

    #[test]
    fn zigzag_16_shape() {
        let l = generate_case_level(CaseKind::Zigzag, 16).unwrap();
        assert_eq!((l.height(), l.width()), (16, 16));
    }
}
