//! Ground-truth future movement labels from a replayed action sequence.

use super::{Action, Level, Pos};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("action {index} ({action}) is blocked and cannot be replayed")]
    Unreplayable { index: usize, action: Action },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct MoveEvent {
    pub step: usize,
    pub square: Pos,
    pub dir: Action,
}

/// Per step, the square each mover left and the direction it went.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelGrid {
    pub height: usize,
    pub width: usize,
    pub agent: Vec<MoveEvent>,
    pub boxes: Vec<MoveEvent>,
    pub steps: usize,
}

impl LabelGrid {
    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn agent_move(&self, step: usize, square: Pos) -> Option<Action> {
        self.agent
            .iter()
            .find(|e| e.step == step && e.square == square)
            .map(|e| e.dir)
    }

    pub fn box_move(&self, step: usize, square: Pos) -> Option<Action> {
        self.boxes
            .iter()
            .find(|e| e.step == step && e.square == square)
            .map(|e| e.dir)
    }

    /// Whether a box leaves `square` in direction `dir` during steps `[from, to)`.
    pub fn box_moves_within(&self, square: Pos, dir: Action, from: usize, to: usize) -> bool {
        self.boxes
            .iter()
            .any(|e| e.square == square && e.dir == dir && e.step >= from && e.step < to)
    }

    pub fn agent_moves_within(&self, square: Pos, dir: Action, from: usize, to: usize) -> bool {
        self.agent
            .iter()
            .any(|e| e.square == square && e.dir == dir && e.step >= from && e.step < to)
    }
}

/// Replays `actions`, recording agent and box moves. Blocked moves are rejected.
pub fn future_move_labels(level: &Level, actions: &[Action]) -> Result<LabelGrid, LabelError> {
    let mut labels = LabelGrid {
        height: level.height(),
        width: level.width(),
        ..Default::default()
    };
    let mut cur = level.clone();
    for (t, &a) in actions.iter().enumerate() {
        let out = cur.step(a);
        if out.next.agent() == cur.agent() {
            return Err(LabelError::Unreplayable {
                index: t,
                action: a,
            });
        }
        labels.agent.push(MoveEvent {
            step: t,
            square: cur.agent(),
            dir: a,
        });
        if let Some((from, dir)) = out.moved_box {
            labels.boxes.push(MoveEvent {
                step: t,
                square: from,
                dir,
            });
        }
        cur = out.next;
    }
    labels.steps = actions.len();
    Ok(labels)
}

/// Like [`future_move_labels`], but blocked moves are kept as steps without movement.
pub fn episode_move_labels(level: &Level, actions: &[Action]) -> LabelGrid {
    let mut labels = LabelGrid {
        height: level.height(),
        width: level.width(),
        ..Default::default()
    };
    let mut cur = level.clone();
    for (t, &a) in actions.iter().enumerate() {
        let out = cur.step(a);
        if out.next.agent() != cur.agent() {
            labels.agent.push(MoveEvent {
                step: t,
                square: cur.agent(),
                dir: a,
            });
        }
        if let Some((from, dir)) = out.moved_box {
            labels.boxes.push(MoveEvent {
                step: t,
                square: from,
                dir,
            });
        }
        cur = out.next;
    }
    labels.steps = actions.len();
    labels
}
