//! The bundled 50-level suite: case-study families plus seeded 1–2 box rooms.
//!
//! `build_suite` is deterministic; `suite/suite.txt` in the crate is its output and
//! `suite/index.csv` names the family of every level.

use crate::sokoban::{
    generate_case_level, solve_oracle, CaseKind, Level, Pos, Tile, DEFAULT_NODE_BUDGET,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUITE_SIZE: usize = 50;
pub const SUITE_SEED: u64 = 0x5eed_50;
pub const SUITE_TEXT: &str = include_str!("../../suite/suite.txt");
pub const SUITE_INDEX: &str = include_str!("../../suite/index.csv");

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteEntry {
    pub family: String,
    pub size: usize,
    pub level: Level,
}

impl SuiteEntry {
    pub fn boxes(&self) -> usize {
        self.level.boxes().len()
    }
}

/// Family and size of every level, in suite order.
pub fn suite_plan() -> Vec<(String, usize, usize)> {
    let mut plan = Vec::new();
    let mut case = |k: CaseKind, sizes: &[usize]| {
        for &n in sizes {
            plan.push((k.name().to_string(), n, 1));
        }
    };
    case(CaseKind::Corridor, &[5, 6, 7, 8, 9, 10, 12, 14]);
    case(CaseKind::Turn, &[6, 7, 8, 9, 10, 12]);
    case(CaseKind::TwoPaths, &[5, 6, 7, 8, 9, 10]);
    case(CaseKind::Zigzag, &[8, 9, 10, 11, 12]);
    case(CaseKind::Backtrack, &[20]);
    for k in 0..24 {
        plan.push(("room".to_string(), 7 + k % 3, 1 + k % 2));
    }
    plan
}

/// Regenerate the suite from the family plan.
pub fn build_suite() -> Vec<SuiteEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    suite_plan()
        .into_iter()
        .enumerate()
        .map(|(id, (family, size, boxes))| {
            let level = match CaseKind::from_name(&family) {
                Some(k) => generate_case_level(k, size).expect("suite sizes are in range"),
                None => random_room(&mut rng, size, boxes),
            };
            SuiteEntry {
                family,
                size,
                level: level.with_id(id as u64),
            }
        })
        .collect()
}

/// An open `n`×`n` room with a few wall blocks, `boxes` boxes kept off the walls and
/// their targets; resampled until the oracle solves it.
pub fn random_room(rng: &mut ChaCha8Rng, n: usize, boxes: usize) -> Level {
    loop {
        let mut g = vec![vec![Tile::Wall; n]; n];
        for row in g.iter_mut().take(n - 1).skip(1) {
            for t in row.iter_mut().take(n - 1).skip(1) {
                *t = Tile::Floor;
            }
        }
        for _ in 0..rng.gen_range(0..=2) {
            let (r, c) = (rng.gen_range(1..n - 1), rng.gen_range(1..n - 1));
            g[r][c] = Tile::Wall;
        }
        let mut inner: Vec<Pos> = (2..n - 2)
            .flat_map(|r| (2..n - 2).map(move |c| Pos::new(r, c)))
            .collect();
        inner.retain(|p| g[p.row][p.col] == Tile::Floor);
        inner.shuffle(rng);
        if inner.len() < boxes {
            continue;
        }
        for p in &inner[..boxes] {
            g[p.row][p.col] = Tile::Box;
        }
        let mut free: Vec<Pos> = (1..n - 1)
            .flat_map(|r| (1..n - 1).map(move |c| Pos::new(r, c)))
            .collect();
        free.retain(|p| g[p.row][p.col] == Tile::Floor);
        free.shuffle(rng);
        if free.len() < boxes + 1 {
            continue;
        }
        for p in &free[..boxes] {
            g[p.row][p.col] = Tile::Target;
        }
        let a = free[boxes];
        g[a.row][a.col] = Tile::Agent;
        let text: String = g
            .iter()
            .map(|row| row.iter().map(|t| t.to_char()).collect::<String>() + "\n")
            .collect();
        let level = Level::parse(&text).expect("room is well formed");
        if solve_oracle(&level, DEFAULT_NODE_BUDGET)
            .solution()
            .is_some_and(|s| s.len() >= 3)
        {
            return level;
        }
    }
}

/// `suite.txt` contents for `entries`.
pub fn suite_text(entries: &[SuiteEntry]) -> String {
    entries.iter().map(|e| format!("{}\n", e.level)).collect()
}

/// `index.csv` contents for `entries`.
pub fn suite_index(entries: &[SuiteEntry]) -> String {
    let mut s = String::from("id,family,size,boxes\n");
    for (k, e) in entries.iter().enumerate() {
        s.push_str(&format!("{k},{},{},{}\n", e.family, e.size, e.boxes()));
    }
    s
}

/// The checked-in suite.
pub fn bundled_suite() -> Vec<SuiteEntry> {
    let levels = crate::sokoban::parse_boxoban_text(SUITE_TEXT, std::path::Path::new("suite.txt"))
        .expect("bundled suite parses");
    let rows: Vec<Vec<&str>> = SUITE_INDEX
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    levels
        .into_iter()
        .zip(rows)
        .map(|(level, row)| SuiteEntry {
            family: row[1].to_string(),
            size: row[2].parse().expect("index size"),
            level,
        })
        .collect()
}

/// Default seed of the `rooms:N` level set.
pub const ROOMS_SEED: u64 = 77;

/// `n` random rooms of size 7 to 9 with one or two boxes, from `seed`.
pub fn random_rooms(n: usize, seed: u64) -> Vec<Level> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| random_room(&mut rng, 7 + k % 3, 1 + k % 2).with_id(k as u64))
        .collect()
}
