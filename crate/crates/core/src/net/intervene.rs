//! Declarative activation edits `x' = alpha * x + c` and friends.

use super::{Gate, NetError};
use crate::sokoban::Pos;
use crate::tensor::Tensor3;

/// Which tensor of a ConvLSTM tick is edited.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Site {
    Gate(Gate),
    Cell,
    Hidden,
}

impl Site {
    pub fn name(self) -> &'static str {
        match self {
            Site::Gate(g) => g.name(),
            Site::Cell => "c",
            Site::Hidden => "h",
        }
    }

    pub fn from_name(s: &str) -> Option<Site> {
        match s {
            "c" | "cell" => Some(Site::Cell),
            "h" | "hidden" => Some(Site::Hidden),
            _ => Gate::from_name(s).map(Site::Gate),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Edit {
    /// `alpha * x + c`; `c` holds one constant, or one per targeted square in order.
    Affine { alpha: f32, c: Vec<f32> },
    /// `|x|`
    Abs,
    /// Copy the same entries from a full-size replacement tensor (mean ablation).
    Replace(Tensor3),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterventionSpec {
    pub layer: usize,
    pub site: Site,
    pub channels: Vec<usize>,
    /// `None` means every square.
    pub squares: Option<Vec<Pos>>,
    /// `None` means every tick.
    pub ticks: Option<Vec<usize>>,
    pub edit: Edit,
}

impl InterventionSpec {
    pub fn affine(layer: usize, site: Site, channels: Vec<usize>, alpha: f32, c: f32) -> Self {
        InterventionSpec {
            layer,
            site,
            channels,
            squares: None,
            ticks: None,
            edit: Edit::Affine { alpha, c: vec![c] },
        }
    }

    pub fn at_squares(mut self, squares: Vec<Pos>) -> Self {
        self.squares = Some(squares);
        self
    }

    pub fn at_ticks(mut self, ticks: Vec<usize>) -> Self {
        self.ticks = Some(ticks);
        self
    }

    pub fn is_identity(&self) -> bool {
        matches!(&self.edit, Edit::Affine { alpha, c } if *alpha == 1.0 && c.iter().all(|&v| v == 0.0))
    }

    pub fn applies(&self, layer: usize, tick: usize) -> bool {
        self.layer == layer && self.ticks.as_ref().is_none_or(|t| t.contains(&tick))
    }

    pub fn validate(
        &self,
        layers: usize,
        channels: usize,
        h: usize,
        w: usize,
    ) -> Result<(), NetError> {
        if self.layer >= layers {
            return Err(NetError::BadAddress {
                what: "layer",
                index: self.layer,
                limit: layers,
            });
        }
        if let Some(&ch) = self.channels.iter().find(|&&ch| ch >= channels) {
            return Err(NetError::BadAddress {
                what: "channel",
                index: ch,
                limit: channels,
            });
        }
        if let Some(sq) = &self.squares {
            if let Some(p) = sq.iter().find(|p| p.row >= h || p.col >= w) {
                return Err(NetError::BadAddress {
                    what: "square",
                    index: p.row * w + p.col,
                    limit: h * w,
                });
            }
        }
        if let Edit::Affine { c, .. } = &self.edit {
            let n = self.squares.as_ref().map_or(h * w, |s| s.len());
            if c.len() != 1 && c.len() != n {
                return Err(NetError::Shape {
                    what: "per-square constants".into(),
                    expected: n.to_string(),
                    found: c.len().to_string(),
                });
            }
        }
        if let Edit::Replace(t) = &self.edit {
            if t.height != h || t.width != w || t.channels != channels {
                return Err(NetError::Shape {
                    what: "replacement tensor".into(),
                    expected: format!("{h}x{w}x{channels}"),
                    found: format!("{}x{}x{}", t.height, t.width, t.channels),
                });
            }
        }
        Ok(())
    }

    /// Edit `t` in place. Identity affine edits leave every bit untouched.
    pub fn apply(&self, t: &mut Tensor3) -> Result<(), NetError> {
        if self.is_identity() {
            return Ok(());
        }
        let squares: Vec<Pos> = match &self.squares {
            Some(s) => s.clone(),
            None => (0..t.height)
                .flat_map(|r| (0..t.width).map(move |c| Pos::new(r, c)))
                .collect(),
        };
        for (k, p) in squares.iter().enumerate() {
            if p.row >= t.height || p.col >= t.width {
                return Err(NetError::BadAddress {
                    what: "square",
                    index: p.row * t.width + p.col,
                    limit: t.height * t.width,
                });
            }
            for &ch in &self.channels {
                if ch >= t.channels {
                    return Err(NetError::BadAddress {
                        what: "channel",
                        index: ch,
                        limit: t.channels,
                    });
                }
                let x = t.get(p.row, p.col, ch);
                let y = match &self.edit {
                    Edit::Affine { alpha, c } => {
                        let c = if c.len() == 1 { c[0] } else { c[k] };
                        alpha * x + c
                    }
                    Edit::Abs => x.abs(),
                    Edit::Replace(m) => m.get(p.row, p.col, ch),
                };
                t.set(p.row, p.col, ch, y);
            }
        }
        Ok(())
    }
}
