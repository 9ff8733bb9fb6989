//! Linear regressions of channel activations on ground-truth features.

use super::InterpError;
use crate::planner::Episode;
use crate::sokoban::{episode_move_labels, Action, Level, Pos, Tile};
use crate::tensor::Tensor3;
use nalgebra::{DMatrix, DVector};

pub const RIDGE: f64 = 1e-8;
/// Agent, floor, box off target, box on target, empty target.
pub const BASE_FEATURES: usize = 5;
/// Per direction: box leaves the square, agent leaves the square, next action broadcast.
pub const FUTURE_FEATURES: usize = 12;

/// The 25 square offsets `(dr, dc)` in `-2..=2`, row-major.
pub const OFFSETS: [(isize, isize); 25] = {
    let mut o = [(0isize, 0isize); 25];
    let mut k = 0;
    while k < 25 {
        o[k] = (k as isize / 5 - 2, k as isize % 5 - 2);
        k += 1;
    }
    o
};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FeatureSet {
    Base,
    Full,
}

impl FeatureSet {
    pub fn len(self) -> usize {
        match self {
            FeatureSet::Base => BASE_FEATURES,
            FeatureSet::Full => BASE_FEATURES + FUTURE_FEATURES,
        }
    }
    pub fn is_empty(self) -> bool {
        false
    }
}

/// Activations of one episode, one tensor per step, with the levels they were read on.
#[derive(Clone, Debug)]
pub struct Recording {
    pub levels: Vec<Level>,
    pub acts: Vec<Tensor3>,
    pub actions: Vec<Action>,
}

impl Recording {
    pub fn from_episode(ep: &Episode) -> Recording {
        let actions = ep.actions();
        let mut levels = Vec::with_capacity(actions.len());
        let mut cur = ep.level.clone();
        for &a in &actions {
            let next = cur.step(a).next;
            levels.push(std::mem::replace(&mut cur, next));
        }
        Recording {
            levels,
            acts: ep.grids.iter().map(|g| g.acts.clone()).collect(),
            actions,
        }
    }

    pub fn len(&self) -> usize {
        self.acts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }
}

/// Feature tensors of every step of `rec`, `set.len()` channels each.
pub fn episode_features(rec: &Recording, set: FeatureSet) -> Vec<Tensor3> {
    let Some(first) = rec.levels.first() else {
        return Vec::new();
    };
    let labels = episode_move_labels(first, &rec.actions);
    let (h, w) = (first.height(), first.width());
    rec.levels
        .iter()
        .enumerate()
        .map(|(t, level)| {
            let mut f = Tensor3::zeros(h, w, set.len());
            for r in 0..h {
                for c in 0..w {
                    let p = Pos::new(r, c);
                    let tile = level.tile(p);
                    let base = [
                        tile.has_agent(),
                        !tile.is_wall(),
                        tile == Tile::Box,
                        tile == Tile::BoxOnTarget,
                        tile == Tile::Target,
                    ];
                    for (k, b) in base.into_iter().enumerate() {
                        f.set(r, c, k, b as u8 as f32);
                    }
                    if set == FeatureSet::Full {
                        for a in Action::ALL {
                            let o = BASE_FEATURES + 3 * a.index();
                            let future = [
                                labels.box_moves_within(p, a, t, labels.steps),
                                labels.agent_moves_within(p, a, t, labels.steps),
                                rec.actions[t] == a,
                            ];
                            for (k, b) in future.into_iter().enumerate() {
                                f.set(r, c, o + k, b as u8 as f32);
                            }
                        }
                    }
                }
            }
            f
        })
        .collect()
}

/// Normal-equation sums of a ridge regression with intercept.
struct Normal {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    sy: f64,
    syy: f64,
    n: usize,
}

impl Normal {
    fn new(p: usize) -> Normal {
        Normal {
            xtx: DMatrix::zeros(p + 1, p + 1),
            xty: DVector::zeros(p + 1),
            sy: 0.0,
            syy: 0.0,
            n: 0,
        }
    }

    /// `x` without the constant column.
    fn add(&mut self, x: &[f64], y: f64) {
        let p = x.len();
        let xi = |i: usize| if i == p { 1.0 } else { x[i] };
        for i in 0..=p {
            let a = xi(i);
            if a == 0.0 {
                continue;
            }
            self.xty[i] += a * y;
            for j in 0..=p {
                self.xtx[(i, j)] += a * xi(j);
            }
        }
        self.sy += y;
        self.syy += y * y;
        self.n += 1;
    }

    fn var_y(&self) -> f64 {
        let n = self.n as f64;
        self.syy / n - (self.sy / n).powi(2)
    }

    /// Coefficients (intercept last) and the correlation of fitted values with `y`.
    fn fit(&self) -> Option<(DVector<f64>, f64)> {
        if self.n == 0 || self.var_y() <= 1e-12 * (self.syy / self.n as f64).max(1e-300) {
            return None;
        }
        let p1 = self.xty.len();
        let a = &self.xtx + DMatrix::identity(p1, p1) * RIDGE;
        let beta = a.cholesky()?.solve(&self.xty);
        let n = self.n as f64;
        let last = p1 - 1;
        let s_pred = beta.dot(&self.xtx.column(last).into_owned());
        let s_pred_y = beta.dot(&self.xty);
        let s_pred2 = (&self.xtx * &beta).dot(&beta);
        let cov = s_pred_y / n - (s_pred / n) * (self.sy / n);
        let vp = s_pred2 / n - (s_pred / n).powi(2);
        let corr = if vp <= 0.0 {
            0.0
        } else {
            (cov / (vp * self.var_y()).sqrt()).clamp(-1.0, 1.0)
        };
        Some((beta, corr))
    }
}

fn check_recordings(recs: &[Recording]) -> Result<(), InterpError> {
    if recs.iter().all(|r| r.is_empty()) {
        return Err(InterpError::Empty("recordings"));
    }
    for r in recs {
        if r.acts.iter().any(|t| !t.is_finite()) {
            return Err(InterpError::NonFinite("recorded activations"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRow {
    pub channel: usize,
    pub full: f64,
    pub base: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("channel,corr_full,corr_base\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.channel, r.full, r.base));
        }
        s
    }
}

/// Correlation of each channel with its best linear fit on the full and on the base
/// feature set, over every non-wall square of every step.
pub fn label_regression(
    recs: &[Recording],
    channels: &[usize],
) -> Result<CorrelationReport, InterpError> {
    check_recordings(recs)?;
    let feats: Vec<Vec<Tensor3>> = recs
        .iter()
        .map(|r| episode_features(r, FeatureSet::Full))
        .collect();
    let rows = channels
        .iter()
        .map(|&ch| {
            let mut full = Normal::new(FeatureSet::Full.len());
            let mut base = Normal::new(BASE_FEATURES);
            for (rec, fs) in recs.iter().zip(&feats) {
                for (a, f) in rec.acts.iter().zip(fs) {
                    for r in 0..f.height {
                        for c in 0..f.width {
                            if f.get(r, c, 1) == 0.0 {
                                continue;
                            }
                            let x: Vec<f64> = f.pixel(r, c).iter().map(|&v| v as f64).collect();
                            let y = a.get(r, c, ch) as f64;
                            full.add(&x, y);
                            base.add(&x[..BASE_FEATURES], y);
                        }
                    }
                }
            }
            let corr = |n: &Normal| n.fit().map_or(0.0, |(_, c)| c);
            CorrelationRow {
                channel: ch,
                full: corr(&full),
                base: corr(&base),
            }
        })
        .collect();
    Ok(CorrelationReport { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffsetRow {
    pub channel: usize,
    pub offset: (isize, isize),
    pub corr: f64,
    /// Constant activation: nothing to explain.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffsetReport {
    pub rows: Vec<OffsetRow>,
}

impl OffsetReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("channel,dr,dc,corr,degenerate\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.channel, r.offset.0, r.offset.1, r.corr, r.degenerate as u8
            ));
        }
        s
    }
}

/// For each channel, the offset `o` whose features at `s + o` best explain the activation
/// at `s`. Features outside the grid read as zero; ties go to the earlier offset.
pub fn offset_regression(
    recs: &[Recording],
    features: &[Vec<Tensor3>],
    channels: &[usize],
) -> Result<OffsetReport, InterpError> {
    check_recordings(recs)?;
    if features.len() != recs.len() || recs.iter().zip(features).any(|(r, f)| r.len() != f.len()) {
        return Err(InterpError::Spec("features do not match recordings".into()));
    }
    let p = features.iter().flatten().next().map_or(0, |f| f.channels);
    let rows = channels
        .iter()
        .map(|&ch| {
            let mut best = OffsetRow {
                channel: ch,
                offset: (0, 0),
                corr: 0.0,
                degenerate: true,
            };
            for &(dr, dc) in &OFFSETS {
                let mut n = Normal::new(p);
                let mut x = vec![0.0f64; p];
                for (rec, fs) in recs.iter().zip(features) {
                    for (a, f) in rec.acts.iter().zip(fs) {
                        for r in 0..a.height {
                            for c in 0..a.width {
                                let (rr, cc) = (r as isize + dr, c as isize + dc);
                                for (k, v) in x.iter_mut().enumerate() {
                                    *v = f.at(rr, cc, k) as f64;
                                }
                                n.add(&x, a.get(r, c, ch) as f64);
                            }
                        }
                    }
                }
                if let Some((_, corr)) = n.fit() {
                    if best.degenerate || corr > best.corr {
                        best = OffsetRow {
                            channel: ch,
                            offset: (dr, dc),
                            corr,
                            degenerate: false,
                        };
                    }
                }
            }
            best
        })
        .collect();
    Ok(OffsetReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_cover_the_square() {
        assert_eq!(OFFSETS[0], (-2, -2));
        assert_eq!(OFFSETS[12], (0, 0));
        assert_eq!(OFFSETS[24], (2, 2));
    }

    #[test]
    fn exact_linear_fit() {
        let mut n = Normal::new(2);
        for k in 0..50 {
            let (a, b) = ((k % 7) as f64, (k % 3) as f64);
            n.add(&[a, b], 2.0 * a - b + 0.5);
        }
        let (beta, corr) = n.fit().unwrap();
        assert!(
            (beta[0] - 2.0).abs() < 1e-6
                && (beta[1] + 1.0).abs() < 1e-6
                && (beta[2] - 0.5).abs() < 1e-6
        );
        assert!((corr - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target_has_no_fit() {
        let mut n = Normal::new(1);
        for k in 0..10 {
            n.add(&[k as f64], 3.0);
        }
        assert!(n.fit().is_none());
    }
}
