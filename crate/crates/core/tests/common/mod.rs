//! Helpers shared by the integration tests, written without the library's engine.

#![allow(dead_code)]

use std::collections::HashMap;

/// A level read straight from its text form.
#[derive(Clone, Debug)]
pub struct Grid {
    pub h: usize,
    pub w: usize,
    pub wall: Vec<bool>,
    pub target: Vec<bool>,
    pub boxes: Vec<usize>,
    pub agent: usize,
}

impl Grid {
    pub fn parse(text: &str) -> Grid {
        let rows: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with(';') && !l.is_empty())
            .collect();
        let (h, w) = (rows.len(), rows[0].chars().count());
        let mut g = Grid {
            h,
            w,
            wall: vec![false; h * w],
            target: vec![false; h * w],
            boxes: vec![],
            agent: 0,
        };
        for (r, row) in rows.iter().enumerate() {
            for (c, ch) in row.chars().enumerate() {
                let i = r * w + c;
                match ch {
                    '#' => g.wall[i] = true,
                    '.' => g.target[i] = true,
                    '$' => g.boxes.push(i),
                    '*' => {
                        g.boxes.push(i);
                        g.target[i] = true;
                    }
                    '@' => g.agent = i,
                    '+' => {
                        g.agent = i;
                        g.target[i] = true;
                    }
                    _ => {}
                }
            }
        }
        g.boxes.sort();
        g
    }

    fn step(&self, i: usize, d: usize) -> Option<usize> {
        let (r, c) = ((i / self.w) as isize, (i % self.w) as isize);
        let (dr, dc) = [(-1, 0), (1, 0), (0, -1), (0, 1)][d];
        let (nr, nc) = (r + dr, c + dc);
        if nr < 0 || nc < 0 || nr >= self.h as isize || nc >= self.w as isize {
            return None;
        }
        Some(nr as usize * self.w + nc as usize)
    }

    /// Successor of (agent, boxes) under move `d`, or None when blocked or a no-op.
    fn moved(&self, agent: usize, boxes: &[usize], d: usize) -> Option<(usize, Vec<usize>)> {
        let a = self.step(agent, d)?;
        if self.wall[a] {
            return None;
        }
        if let Some(k) = boxes.iter().position(|&b| b == a) {
            let b = self.step(a, d)?;
            if self.wall[b] || boxes.contains(&b) {
                return None;
            }
            let mut nb = boxes.to_vec();
            nb[k] = b;
            nb.sort();
            return Some((a, nb));
        }
        Some((a, boxes.to_vec()))
    }

    fn solved(&self, boxes: &[usize]) -> bool {
        boxes.iter().all(|&b| self.target[b])
    }
}

/// Shortest solution length by iterative-deepening depth-first search, up to `max_depth`.
pub fn iddfs_length(text: &str, max_depth: usize) -> Option<usize> {
    let g = Grid::parse(text);
    if g.solved(&g.boxes) {
        return Some(0);
    }
    for limit in 1..=max_depth {
        // smallest depth at which each state was reached in this iteration
        let mut seen: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        if dfs(&g, g.agent, g.boxes.clone(), 0, limit, &mut seen) {
            return Some(limit);
        }
    }
    None
}

fn dfs(
    g: &Grid,
    agent: usize,
    boxes: Vec<usize>,
    depth: usize,
    limit: usize,
    seen: &mut HashMap<(usize, Vec<usize>), usize>,
) -> bool {
    if g.solved(&boxes) {
        return depth == limit;
    }
    if depth == limit {
        return false;
    }
    let key = (agent, boxes);
    if seen.get(&key).is_some_and(|&d| d <= depth) {
        return false;
    }
    seen.insert(key.clone(), depth);
    let (agent, boxes) = key;
    (0..4).any(|d| {
        g.moved(agent, &boxes, d)
            .is_some_and(|(a, b)| dfs(g, a, b, depth + 1, limit, seen))
    })
}

/// Apply a move string like `rrdl` to the text grid; returns whether every box ends on a target.
pub fn replay_solves(text: &str, moves: &str) -> bool {
    let g = Grid::parse(text);
    let (mut a, mut b) = (g.agent, g.boxes.clone());
    for ch in moves.chars() {
        let d = "udlr".find(ch).expect("move letter");
        if let Some((na, nb)) = g.moved(a, &b, d) {
            a = na;
            b = nb;
        }
    }
    g.solved(&b)
}

/// Agent square and sorted box squares (row-major indices) after `moves`.
pub fn walk(text: &str, moves: &str) -> (usize, Vec<usize>) {
    let g = Grid::parse(text);
    let (mut a, mut b) = (g.agent, g.boxes.clone());
    for ch in moves.chars() {
        if let Some((na, nb)) = g.moved(a, &b, "udlr".find(ch).expect("move letter")) {
            a = na;
            b = nb;
        }
    }
    (a, b)
}
