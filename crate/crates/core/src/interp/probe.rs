//! Square-level AUC probes and a pooled linear action probe.

use super::{InterpError, Recording};
use crate::sokoban::{episode_move_labels, Action, Pos};
use crate::stats::auc;
use crate::tensor::Tensor3;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// A box leaves the square in the channel's direction.
    BoxMove,
    /// The agent leaves the square in the channel's direction.
    AgentMove,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LabelVariant {
    /// The move happens within the next `k` steps.
    Within(usize),
    /// The move happens `k` or more steps from now.
    After(usize),
}

impl LabelVariant {
    pub fn name(self) -> String {
        match self {
            LabelVariant::Within(k) => format!("within{k}"),
            LabelVariant::After(k) => format!("after{k}"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ProbeTarget {
    pub kind: TargetKind,
    pub variant: LabelVariant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AucRow {
    /// `None` for the row pooling all four directions.
    pub direction: Option<Action>,
    pub channel: Option<usize>,
    /// `+1` when higher activation predicts the label on the training split, else `-1`.
    pub polarity: f64,
    /// Held-out AUC; `None` when the held-out labels have a single class.
    pub auc: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
    pub single_class: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AucReport {
    pub target: ProbeTarget,
    pub rows: Vec<AucRow>,
}

impl AucReport {
    pub fn pooled(&self) -> Option<&AucRow> {
        self.rows.iter().find(|r| r.direction.is_none())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "variant,direction,channel,polarity,auc,positives,negatives,single_class\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.target.variant.name(),
                r.direction.map_or("all", |a| a.name()),
                r.channel.map_or(String::new(), |c| c.to_string()),
                r.polarity,
                r.auc.map_or(String::from("nan"), |v| v.to_string()),
                r.positives,
                r.negatives,
                r.single_class as u8
            ));
        }
        s
    }
}

/// Scores and labels per direction, split into training and held-out parts.
type Samples = [[(Vec<f64>, Vec<bool>); 2]; 4];

fn collect(
    recs: &[Recording],
    channels: &[usize; 4],
    target: ProbeTarget,
    train: usize,
) -> Samples {
    let mut out: Samples = Default::default();
    for (e, rec) in recs.iter().enumerate() {
        let Some(first) = rec.levels.first() else {
            continue;
        };
        let part = (e >= train) as usize;
        let labels = episode_move_labels(first, &rec.actions);
        let end = labels.steps;
        for (t, (level, a)) in rec.levels.iter().zip(&rec.acts).enumerate() {
            let (from, to) = match target.variant {
                LabelVariant::Within(k) => (t, (t + k).min(end)),
                LabelVariant::After(k) => (t + k, end),
            };
            for r in 0..a.height {
                for c in 0..a.width {
                    let p = Pos::new(r, c);
                    if level.is_wall(p) {
                        continue;
                    }
                    for d in Action::ALL {
                        let y = from < to
                            && match target.kind {
                                TargetKind::BoxMove => labels.box_moves_within(p, d, from, to),
                                TargetKind::AgentMove => labels.agent_moves_within(p, d, from, to),
                            };
                        let slot = &mut out[d.index()][part];
                        slot.0.push(a.get(r, c, channels[d.index()]) as f64);
                        slot.1.push(y);
                    }
                }
            }
        }
    }
    out
}

fn row(
    direction: Option<Action>,
    channel: Option<usize>,
    train: (&[f64], &[bool]),
    test: (&[f64], &[bool]),
) -> AucRow {
    let polarity = match auc(train.0, train.1) {
        Some(a) if a < 0.5 => -1.0,
        _ => 1.0,
    };
    let scores: Vec<f64> = test.0.iter().map(|s| s * polarity).collect();
    let v = auc(&scores, test.1);
    let positives = test.1.iter().filter(|&&y| y).count();
    AucRow {
        direction,
        channel,
        polarity,
        auc: v,
        positives,
        negatives: test.1.len() - positives,
        single_class: v.is_none(),
    }
}

/// AUC of each directional channel for its direction's move label on held-out episodes,
/// plus a pooled row. The first `train` recordings set the polarity.
pub fn auc_probe(
    recs: &[Recording],
    channels: &[usize; 4],
    target: ProbeTarget,
    train: usize,
) -> Result<AucReport, InterpError> {
    if recs.iter().all(|r| r.is_empty()) {
        return Err(InterpError::Empty("recordings"));
    }
    if train == 0 || train >= recs.len() {
        return Err(InterpError::Spec(format!(
            "training split {train} of {} recordings leaves a side empty",
            recs.len()
        )));
    }
    let s = collect(recs, channels, target, train);
    let mut rows: Vec<AucRow> = Action::ALL
        .into_iter()
        .map(|d| {
            let [tr, te] = &s[d.index()];
            row(
                Some(d),
                Some(channels[d.index()]),
                (&tr.0, &tr.1),
                (&te.0, &te.1),
            )
        })
        .collect();
    let cat = |part: usize| -> (Vec<f64>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for d in &s {
            x.extend_from_slice(&d[part].0);
            y.extend_from_slice(&d[part].1);
        }
        (x, y)
    };
    let (tr, te) = (cat(0), cat(1));
    rows.push(row(None, None, (&tr.0, &tr.1), (&te.0, &te.1)));
    Ok(AucReport { target, rows })
}

/// Per-channel mean then max over squares.
pub fn pooled_features(h: &Tensor3) -> Vec<f64> {
    let (mean, max) = h.pool();
    mean.into_iter().chain(max).map(|v| v as f64).collect()
}

/// Multinomial logistic regression on standardized features.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeFit {
    /// `[classes][features]`
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub iterations: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl ProbeFit {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = x
            .iter()
            .zip(&self.mu)
            .zip(&self.sigma)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        self.w
            .iter()
            .zip(&self.b)
            .map(|(w, b)| w.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let l = self.logits(x);
        let mut best = 0;
        for k in 1..l.len() {
            if l[k] > l[best] {
                best = k;
            }
        }
        best
    }

    fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        x.iter()
            .zip(y)
            .filter(|(x, &y)| self.predict(x) == y)
            .count() as f64
            / x.len() as f64
    }
}

pub const PROBE_MIN_SAMPLES: usize = 1000;
pub const PROBE_MAX_ITERS: usize = 10_000;
pub const PROBE_TOL: f64 = 1e-6;
const LEARNING_RATE: f64 = 0.5;
const L2: f64 = 1e-4;

/// Softmax regression by full-batch gradient descent, stopping when the relative loss
/// change drops below `1e-6` or after 10k iterations. The last `test_fraction` of the
/// samples is held out.
pub fn train_action_probe(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    test_fraction: f64,
) -> Result<ProbeFit, InterpError> {
    if x.len() < PROBE_MIN_SAMPLES {
        return Err(InterpError::TooFew {
            what: "probe samples",
            needed: PROBE_MIN_SAMPLES,
            got: x.len(),
        });
    }
    if x.len() != y.len() {
        return Err(InterpError::Spec(
            "features and labels differ in length".into(),
        ));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(InterpError::NonFinite("probe features"));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) || y.iter().any(|&c| c >= classes) {
        return Err(InterpError::Spec(
            "ragged features or label out of range".into(),
        ));
    }
    let n_test = ((x.len() as f64) * test_fraction.clamp(0.0, 0.9)).round() as usize;
    let n = x.len() - n_test;
    let (xtr, ytr) = (&x[..n], &y[..n]);
    let nf = n as f64;
    let mu: Vec<f64> = (0..p)
        .map(|j| xtr.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();
    let sigma: Vec<f64> = (0..p)
        .map(|j| {
            let v = xtr.iter().map(|r| (r[j] - mu[j]).powi(2)).sum::<f64>() / nf;
            if v > 1e-12 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = xtr
        .iter()
        .map(|r| {
            r.iter()
                .zip(&mu)
                .zip(&sigma)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let mut fit = ProbeFit {
        w: vec![vec![0.0; p]; classes],
        b: vec![0.0; classes],
        mu,
        sigma,
        iterations: 0,
        loss: f64::INFINITY,
        train_accuracy: 0.0,
        test_accuracy: 0.0,
    };
    let mut prev = f64::INFINITY;
    for it in 0..PROBE_MAX_ITERS {
        let mut gw = vec![vec![0.0; p]; classes];
        let mut gb = vec![0.0; classes];
        let mut loss = 0.0;
        for (zi, &yi) in z.iter().zip(ytr) {
            let l: Vec<f64> = fit
                .w
                .iter()
                .zip(&fit.b)
                .map(|(w, b)| w.iter().zip(zi).map(|(a, x)| a * x).sum::<f64>() + b)
                .collect();
            let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = l.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            loss -= (e[yi] / s).ln();
            for k in 0..classes {
                let g = e[k] / s - (k == yi) as u8 as f64;
                gb[k] += g;
                for (a, x) in gw[k].iter_mut().zip(zi) {
                    *a += g * x;
                }
            }
        }
        loss = loss / nf + 0.5 * L2 * fit.w.iter().flatten().map(|v| v * v).sum::<f64>();
        fit.iterations = it + 1;
        fit.loss = loss;
        if prev.is_finite() && (prev - loss).abs() <= PROBE_TOL * prev.abs().max(1e-12) {
            break;
        }
        prev = loss;
        for k in 0..classes {
            fit.b[k] -= LEARNING_RATE * gb[k] / nf;
            for j in 0..p {
                fit.w[k][j] -= LEARNING_RATE * (gw[k][j] / nf + L2 * fit.w[k][j]);
            }
        }
    }
    fit.train_accuracy = fit.accuracy(xtr, ytr);
    fit.test_accuracy = fit.accuracy(&x[n..], &y[n..]);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_classes_are_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..1200 {
            let c = rng.gen_range(0..4usize);
            let mut f: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.3..0.3)).collect();
            f[c] += 2.0;
            x.push(f);
            y.push(c);
        }
        let fit = train_action_probe(&x, &y, 4, 0.25).unwrap();
        assert!(fit.test_accuracy > 0.98, "{}", fit.test_accuracy);
        assert!(fit.iterations < PROBE_MAX_ITERS);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = vec![vec![0.0]; 10];
        assert!(matches!(
            train_action_probe(&x, &[0; 10], 4, 0.2),
            Err(InterpError::TooFew { .. })
        ));
        let mut x = vec![vec![0.0]; 1000];
        x[3][0] = f64::NAN;
        assert_eq!(
            train_action_probe(&x, &[0; 1000], 4, 0.2),
            Err(InterpError::NonFinite("probe features"))
        );
    }
}
