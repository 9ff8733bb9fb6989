//! Sokoban rules, level text format and rendering.

mod boxoban;
mod generate;
mod labels;
mod oracle;

pub use boxoban::{load_boxoban_dir, parse_boxoban_text, BoxobanError};
pub use generate::{backtrack_decision_nodes, generate_case_level, CaseKind, GenerateError};
pub use labels::{episode_move_labels, future_move_labels, LabelError, LabelGrid, MoveEvent};
pub use oracle::{solve_oracle, OracleResult, DEFAULT_NODE_BUDGET};

use crate::tensor::Tensor3;
use std::fmt;
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tile {
    Wall,
    Floor,
    Target,
    Box,
    BoxOnTarget,
    Agent,
    AgentOnTarget,
}

impl Tile {
    pub fn from_char(ch: char) -> Option<Tile> {
        Some(match ch {
            '#' => Tile::Wall,
            ' ' => Tile::Floor,
            '.' => Tile::Target,
            '$' => Tile::Box,
            '*' => Tile::BoxOnTarget,
            '@' => Tile::Agent,
            '+' => Tile::AgentOnTarget,
            _ => return None,
        })
    }

    pub fn to_char(self) -> char {
        match self {
            Tile::Wall => '#',
            Tile::Floor => ' ',
            Tile::Target => '.',
            Tile::Box => '$',
            Tile::BoxOnTarget => '*',
            Tile::Agent => '@',
            Tile::AgentOnTarget => '+',
        }
    }

    pub fn is_wall(self) -> bool {
        self == Tile::Wall
    }
    pub fn has_box(self) -> bool {
        matches!(self, Tile::Box | Tile::BoxOnTarget)
    }
    pub fn has_agent(self) -> bool {
        matches!(self, Tile::Agent | Tile::AgentOnTarget)
    }
    pub fn has_target(self) -> bool {
        matches!(self, Tile::Target | Tile::BoxOnTarget | Tile::AgentOnTarget)
    }
    /// Floor-like: no wall, box or agent.
    pub fn is_free(self) -> bool {
        matches!(self, Tile::Floor | Tile::Target)
    }

    fn with_box(self) -> Tile {
        if self.has_target() {
            Tile::BoxOnTarget
        } else {
            Tile::Box
        }
    }
    fn with_agent(self) -> Tile {
        if self.has_target() {
            Tile::AgentOnTarget
        } else {
            Tile::Agent
        }
    }
    fn emptied(self) -> Tile {
        if self.has_target() {
            Tile::Target
        } else {
            Tile::Floor
        }
    }

    /// Render colour, 0..=255 per component.
    pub fn rgb(self) -> [u8; 3] {
        match self {
            Tile::Wall => [0, 0, 0],
            Tile::Floor => [243, 248, 238],
            Tile::Agent => [160, 212, 56],
            Tile::AgentOnTarget => [219, 212, 56],
            Tile::Box => [142, 121, 56],
            Tile::BoxOnTarget => [254, 95, 56],
            Tile::Target => [254, 126, 125],
        }
    }

    pub const ALL: [Tile; 7] = [
        Tile::Wall,
        Tile::Floor,
        Tile::Target,
        Tile::Box,
        Tile::BoxOnTarget,
        Tile::Agent,
        Tile::AgentOnTarget,
    ];

    /// Inverse of [`Tile::rgb`] for pixels in [0,1].
    pub fn from_rgb(px: &[f32]) -> Option<Tile> {
        Tile::ALL.into_iter().find(|t| {
            t.rgb()
                .iter()
                .zip(px)
                .all(|(&a, &b)| (a as f32 / 255.0 - b).abs() < 1e-6)
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Action::Up | Action::Down)
    }

    /// The two perpendicular directions.
    pub fn orthogonal(self) -> [Action; 2] {
        if self.is_vertical() {
            [Action::Left, Action::Right]
        } else {
            [Action::Up, Action::Down]
        }
    }

    pub fn letter(self) -> char {
        match self {
            Action::Up => 'u',
            Action::Down => 'd',
            Action::Left => 'l',
            Action::Right => 'r',
        }
    }

    pub fn from_letter(ch: char) -> Option<Action> {
        match ch.to_ascii_lowercase() {
            'u' => Some(Action::Up),
            'd' => Some(Action::Down),
            'l' => Some(Action::Left),
            'r' => Some(Action::Right),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn format_actions(actions: &[Action]) -> String {
    actions.iter().map(|a| a.letter()).collect()
}

pub fn parse_actions(s: &str) -> Option<Vec<Action>> {
    s.trim().chars().map(Action::from_letter).collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Pos {
        Pos { row, col }
    }

    pub fn offset(self, dr: isize, dc: isize) -> Option<Pos> {
        let r = self.row as isize + dr;
        let c = self.col as isize + dc;
        (r >= 0 && c >= 0).then(|| Pos::new(r as usize, c as usize))
    }

    pub fn step(self, a: Action) -> Option<Pos> {
        let (dr, dc) = a.delta();
        self.offset(dr, dc)
    }

    pub fn back(self, a: Action) -> Option<Pos> {
        let (dr, dc) = a.delta();
        self.offset(-dr, -dc)
    }

    pub fn manhattan(self, o: Pos) -> usize {
        self.row.abs_diff(o.row) + self.col.abs_diff(o.col)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty level")]
    Empty,
    #[error("no agent in level")]
    NoAgent,
    #[error("multiple agents (second at line {line}, column {col})")]
    MultipleAgents { line: usize, col: usize },
    #[error("level has no boxes")]
    NoBoxes,
    #[error("{boxes} boxes but {targets} targets")]
    BoxTargetMismatch { boxes: usize, targets: usize },
    #[error("line {line} has width {found}, expected {expected}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown character {ch:?} at line {line}, column {col}")]
    UnknownChar { ch: char, line: usize, col: usize },
    #[error("bad id header {0:?}")]
    BadHeader(String),
}

/// Immutable Sokoban position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    height: usize,
    width: usize,
    tiles: Vec<Tile>,
    agent: Pos,
    pub id: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: Level,
    pub reward: f32,
    pub solved: bool,
    pub moved_box: Option<(Pos, Action)>,
}

pub const STEP_REWARD: f32 = -0.1;
pub const BOX_ON_REWARD: f32 = 1.0;
pub const BOX_OFF_REWARD: f32 = -1.0;
pub const SOLVE_REWARD: f32 = 10.0;

impl Level {
    /// Parse a level; an optional first line `; <id>` sets the id.
    pub fn parse(text: &str) -> Result<Level, ParseError> {
        let mut lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        while lines.first().is_some_and(|l| l.is_empty()) {
            lines.remove(0);
        }
        let mut id = None;
        let mut first_line = 1;
        if let Some(head) = lines.first() {
            if let Some(rest) = head.strip_prefix(';') {
                let rest = rest.trim();
                id = Some(
                    rest.parse::<u64>()
                        .map_err(|_| ParseError::BadHeader(rest.to_string()))?,
                );
                lines.remove(0);
                first_line = 2;
            }
        }
        if lines.is_empty() {
            return Err(ParseError::Empty);
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut tiles = Vec::with_capacity(width * height);
        let mut agent = None;
        for (r, line) in lines.iter().enumerate() {
            let n = line.chars().count();
            if n != width {
                return Err(ParseError::Ragged {
                    line: r + first_line,
                    expected: width,
                    found: n,
                });
            }
            for (c, ch) in line.chars().enumerate() {
                let t = Tile::from_char(ch).ok_or(ParseError::UnknownChar {
                    ch,
                    line: r + first_line,
                    col: c + 1,
                })?;
                if t.has_agent() {
                    if agent.is_some() {
                        return Err(ParseError::MultipleAgents {
                            line: r + first_line,
                            col: c + 1,
                        });
                    }
                    agent = Some(Pos::new(r, c));
                }
                tiles.push(t);
            }
        }
        let agent = agent.ok_or(ParseError::NoAgent)?;
        let boxes = tiles.iter().filter(|t| t.has_box()).count();
        let targets = tiles.iter().filter(|t| t.has_target()).count();
        if boxes == 0 {
            return Err(ParseError::NoBoxes);
        }
        if boxes != targets {
            return Err(ParseError::BoxTargetMismatch { boxes, targets });
        }
        Ok(Level {
            height,
            width,
            tiles,
            agent,
            id,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn agent(&self) -> Pos {
        self.agent
    }
    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn contains(&self, p: Pos) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn tile(&self, p: Pos) -> Tile {
        self.tiles[p.row * self.width + p.col]
    }

    /// Tile at a signed coordinate; off-grid reads as wall.
    pub fn tile_at(&self, r: isize, c: isize) -> Tile {
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            Tile::Wall
        } else {
            self.tiles[r as usize * self.width + c as usize]
        }
    }

    /// Neighbour in direction `a`, if it lies on the grid.
    pub fn neighbour(&self, p: Pos, a: Action) -> Option<Pos> {
        p.step(a).filter(|&q| self.contains(q))
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.tile(p).is_wall()
    }

    pub fn boxes(&self) -> Vec<Pos> {
        self.positions(|t| t.has_box())
    }

    pub fn targets(&self) -> Vec<Pos> {
        self.positions(|t| t.has_target())
    }

    fn positions(&self, f: impl Fn(Tile) -> bool) -> Vec<Pos> {
        (0..self.tiles.len())
            .filter(|&i| f(self.tiles[i]))
            .map(|i| Pos::new(i / self.width, i % self.width))
            .collect()
    }

    pub fn is_solved(&self) -> bool {
        !self
            .tiles
            .iter()
            .any(|&t| t == Tile::Target || t == Tile::AgentOnTarget)
    }

    pub fn border_is_wall(&self) -> bool {
        (0..self.height).all(|r| {
            (0..self.width).all(|c| {
                let edge = r == 0 || c == 0 || r + 1 == self.height || c + 1 == self.width;
                !edge || self.tile(Pos::new(r, c)).is_wall()
            })
        })
    }

    /// Level invariants; parsed and stepped levels always satisfy them.
    pub fn check_invariants(&self) -> bool {
        let agents = self.tiles.iter().filter(|t| t.has_agent()).count();
        let boxes = self.tiles.iter().filter(|t| t.has_box()).count();
        let targets = self.tiles.iter().filter(|t| t.has_target()).count();
        agents == 1 && boxes >= 1 && boxes == targets && self.tile(self.agent).has_agent()
    }

    pub fn with_id(mut self, id: u64) -> Level {
        self.id = Some(id);
        self
    }

    pub fn step(&self, action: Action) -> StepOutcome {
        let mut reward = STEP_REWARD;
        let blocked = || StepOutcome {
            next: self.clone(),
            reward: STEP_REWARD,
            solved: self.is_solved(),
            moved_box: None,
        };
        let Some(dest) = self.neighbour(self.agent, action) else {
            return blocked();
        };
        let dt = self.tile(dest);
        if dt.is_wall() {
            return blocked();
        }
        let mut next = self.clone();
        let mut moved_box = None;
        if dt.has_box() {
            let Some(beyond) = self.neighbour(dest, action) else {
                return blocked();
            };
            let bt = self.tile(beyond);
            if !bt.is_free() {
                return blocked();
            }
            if dt.has_target() {
                reward += BOX_OFF_REWARD;
            }
            if bt.has_target() {
                reward += BOX_ON_REWARD;
            }
            next.set(beyond, bt.with_box());
            next.set(dest, dt.emptied());
            moved_box = Some((dest, action));
        }
        let at = next.tile(self.agent);
        next.set(self.agent, at.emptied());
        let dt2 = next.tile(dest);
        next.set(dest, dt2.with_agent());
        next.agent = dest;
        let solved = next.is_solved();
        if solved && moved_box.is_some() {
            reward += SOLVE_REWARD;
        }
        StepOutcome {
            next,
            reward,
            solved,
            moved_box,
        }
    }

    fn set(&mut self, p: Pos, t: Tile) {
        let w = self.width;
        self.tiles[p.row * w + p.col] = t;
    }

    /// Replay a sequence; returns the final level and total reward.
    pub fn replay(&self, actions: &[Action]) -> (Level, f32) {
        let mut lvl = self.clone();
        let mut total = 0.0;
        for &a in actions {
            let o = lvl.step(a);
            total += o.reward;
            lvl = o.next;
        }
        (lvl, total)
    }

    pub fn render_rgb(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.height, self.width, 3);
        for r in 0..self.height {
            for c in 0..self.width {
                let rgb = self.tile(Pos::new(r, c)).rgb();
                for k in 0..3 {
                    t.set(r, c, k, rgb[k] as f32 / 255.0);
                }
            }
        }
        t
    }

    /// Build a level from a rendered observation.
    pub fn from_rgb(obs: &Tensor3) -> Option<Level> {
        let mut text = String::new();
        for r in 0..obs.height {
            for c in 0..obs.width {
                text.push(Tile::from_rgb(obs.pixel(r, c))?.to_char());
            }
            text.push('\n');
        }
        Level::parse(&text).ok()
    }

    /// Key identifying the dynamic state (agent and boxes).
    pub fn state_key(&self) -> (Pos, Vec<Pos>) {
        (self.agent, self.boxes())
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(id) = self.id {
            writeln!(f, "; {id}")?;
        }
        for r in 0..self.height {
            let line: String = (0..self.width)
                .map(|c| self.tile(Pos::new(r, c)).to_char())
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Level {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::parse(s)
    }
}

pub fn parse_level(text: &str) -> Result<Level, ParseError> {
    Level::parse(text)
}

pub fn step(level: &Level, action: Action) -> StepOutcome {
    level.step(action)
}

pub fn render_rgb(level: &Level) -> Tensor3 {
    level.render_rgb()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_row() {
        let l = Level::parse("#####\n#@$.#\n#####").unwrap();
        assert_eq!((l.height(), l.width()), (3, 5));
        assert_eq!(l.agent(), Pos::new(1, 1));
        assert_eq!(l.boxes(), vec![Pos::new(1, 2)]);
        assert_eq!(l.targets(), vec![Pos::new(1, 3)]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Level::parse("#@@$.#"),
            Err(ParseError::MultipleAgents { .. })
        ));
        assert_eq!(Level::parse("# $.#"), Err(ParseError::NoAgent));
        assert!(matches!(
            Level::parse("#@$..#"),
            Err(ParseError::BoxTargetMismatch { .. })
        ));
        assert!(matches!(
            Level::parse("#@$.#\n##"),
            Err(ParseError::Ragged { line: 2, .. })
        ));
        assert!(matches!(
            Level::parse("#@$.x"),
            Err(ParseError::UnknownChar { ch: 'x', .. })
        ));
        assert_eq!(Level::parse("#@ #"), Err(ParseError::NoBoxes));
    }

    #[test]
    fn header_sets_id() {
        let l = Level::parse("; 42\n#####\n#@$.#\n#####").unwrap();
        assert_eq!(l.id, Some(42));
        assert_eq!(l.to_string(), "; 42\n#####\n#@$.#\n#####\n");
    }

    #[test]
    fn step_rewards() {
        let l = Level::parse("######\n#@ $.#\n######").unwrap();
        let o = l.step(Action::Right);
        assert_eq!(o.reward, -0.1);
        assert!(!o.solved);
        let o = o.next.step(Action::Right);
        assert_eq!(o.reward, -0.1 + 1.0 + 10.0);
        assert!(o.solved);
        assert_eq!(o.moved_box, Some((Pos::new(1, 3), Action::Right)));

        let stuck = Level::parse("#####\n# @$#\n#.  #\n#####").unwrap();
        let o = stuck.step(Action::Right);
        assert_eq!(o.next, stuck);
        assert_eq!(o.reward, -0.1);
    }

    #[test]
    fn pushing_off_target_costs() {
        let l = Level::parse("#######\n#@*  .#\n#   $ #\n#######").unwrap();
        let o = l.step(Action::Right);
        assert!((o.reward - (-1.1)).abs() < 1e-6);
        let l = Level::parse("#######\n#@*.  #\n#   $ #\n#######").unwrap();
        let o = l.step(Action::Right);
        assert!((o.reward - (-0.1)).abs() < 1e-6);
    }

    #[test]
    fn render_palette() {
        let l = Level::parse("#####\n#@$.#\n#####").unwrap();
        let t = l.render_rgb();
        assert_eq!(t.pixel(0, 0), &[0.0, 0.0, 0.0]);
        assert_eq!(t.pixel(1, 1), &[160.0 / 255.0, 212.0 / 255.0, 56.0 / 255.0]);
        assert_eq!(Level::from_rgb(&t).unwrap().tiles(), l.tiles());
    }
}
