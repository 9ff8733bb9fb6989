//! Breadth-first solver over (agent, sorted boxes) states.

use super::{Action, Level, Pos};
use std::collections::HashMap;

pub const DEFAULT_NODE_BUDGET: usize = 5_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleResult {
    /// A minimum-length move sequence.
    Solved(Vec<Action>),
    /// Every reachable state was expanded without reaching a solution.
    Unsolvable,
    /// More than `node_budget` states were discovered.
    BudgetExhausted,
}

impl OracleResult {
    pub fn solution(&self) -> Option<&[Action]> {
        match self {
            OracleResult::Solved(s) => Some(s),
            _ => None,
        }
    }
}

struct Grid {
    width: usize,
    walls: Vec<bool>,
    targets: Vec<bool>,
}

impl Grid {
    fn step(&self, i: u16, a: Action) -> Option<u16> {
        let p = Pos::new(i as usize / self.width, i as usize % self.width);
        let q = p.step(a)?;
        let h = self.walls.len() / self.width;
        if q.row >= h || q.col >= self.width {
            return None;
        }
        let j = q.row * self.width + q.col;
        (!self.walls[j]).then_some(j as u16)
    }
}

/// State: `[agent, box0, box1, ...]` with boxes sorted.
type State = Box<[u16]>;

pub fn solve_oracle(level: &Level, node_budget: usize) -> OracleResult {
    let w = level.width();
    assert!(
        level.height() * w <= u16::MAX as usize,
        "level too large for oracle"
    );
    let grid = Grid {
        width: w,
        walls: level.tiles().iter().map(|t| t.is_wall()).collect(),
        targets: level.tiles().iter().map(|t| t.has_target()).collect(),
    };
    let idx = |p: Pos| (p.row * w + p.col) as u16;
    let mut start: Vec<u16> = vec![idx(level.agent())];
    let mut boxes: Vec<u16> = level.boxes().into_iter().map(idx).collect();
    boxes.sort_unstable();
    start.extend(boxes);
    let solved = |s: &[u16]| s[1..].iter().all(|&b| grid.targets[b as usize]);

    let start: State = start.into_boxed_slice();
    if solved(&start) {
        return OracleResult::Solved(Vec::new());
    }
    let mut states: Vec<State> = vec![start.clone()];
    let mut parent: Vec<(u32, Action)> = vec![(u32::MAX, Action::Up)];
    let mut seen: HashMap<State, u32> = HashMap::new();
    seen.insert(start, 0);
    let mut head = 0usize;
    while head < states.len() {
        let cur = states[head].clone();
        for a in Action::ALL {
            let Some(dest) = grid.step(cur[0], a) else {
                continue;
            };
            let mut next: Vec<u16> = cur.to_vec();
            if let Some(k) = cur[1..].iter().position(|&b| b == dest) {
                let Some(beyond) = grid.step(dest, a) else {
                    continue;
                };
                if cur[1..].contains(&beyond) {
                    continue;
                }
                next[k + 1] = beyond;
                next[1..].sort_unstable();
            }
            next[0] = dest;
            let next: State = next.into_boxed_slice();
            if seen.contains_key(&next) {
                continue;
            }
            let id = states.len() as u32;
            parent.push((head as u32, a));
            if solved(&next) {
                let mut path = Vec::new();
                let mut at = id;
                while parent[at as usize].0 != u32::MAX {
                    path.push(parent[at as usize].1);
                    at = parent[at as usize].0;
                }
                path.reverse();
                return OracleResult::Solved(path);
            }
            if states.len() >= node_budget {
                return OracleResult::BudgetExhausted;
            }
            seen.insert(next.clone(), id);
            states.push(next);
        }
        head += 1;
    }
    OracleResult::Unsolvable
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_move() {
        let l = Level::parse("#####\n#@$.#\n#####").unwrap();
        assert_eq!(
            solve_oracle(&l, 1000),
            OracleResult::Solved(vec![Action::Right])
        );
    }

    #[test]
    fn corner_box_unsolvable() {
        let l = Level::parse("#####\n#$ .#\n# @ #\n#####").unwrap();
        assert_eq!(solve_oracle(&l, 1000), OracleResult::Unsolvable);
    }

    #[test]
    fn budget_is_distinct() {
        let l = Level::parse("##########\n#@      $#\n#        #\n#.       #\n##########").unwrap();
        assert_eq!(solve_oracle(&l, 5), OracleResult::BudgetExhausted);
    }
}
