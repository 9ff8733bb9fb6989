//! Causal interventions on recorded transitions and their success rates.

use super::InterpError;
use crate::net::{
    argmax, drc_forward, probe_readout, DrcState, InterventionSpec, Probe, Site, WeightSet,
};
use crate::planner::{
    readout_action_with, run_planner, tick_plan_with, ChannelMap, MechanismGains, PlanGrid,
    PlannerEdits, Readout, RunOptions, TickEdits,
};
use crate::sokoban::{Action, Level, Pos};
use crate::stats::{bootstrap_mean, Estimate, BOOTSTRAP_RESAMPLES};
use crate::tensor::Tensor3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One planner decision: the level before the action and the grid the action was read from.
#[derive(Clone, Debug)]
pub struct Transition {
    pub source: usize,
    pub step: usize,
    pub level: Level,
    pub grid: PlanGrid,
    pub action: Action,
}

/// Every decision of the planner's episodes on `levels`, in level then step order.
pub fn transition_pool(
    levels: &[Level],
    map: &ChannelMap,
    gains: &MechanismGains,
    opts: &RunOptions,
) -> Vec<Transition> {
    let eps = crate::harness::map_ordered(levels, |l| {
        run_planner(l, map, gains, opts, &PlannerEdits::default())
    });
    let mut pool = Vec::new();
    for (source, ep) in eps.into_iter().enumerate() {
        let mut cur = ep.level.clone();
        for (step, (rec, grid)) in ep.steps.iter().zip(ep.grids).enumerate() {
            let next = cur.step(rec.action).next;
            pool.push(Transition {
                source,
                step,
                level: cur,
                grid,
                action: rec.action,
            });
            cur = next;
        }
    }
    pool
}

/// `n` distinct transitions drawn with `seed`.
pub fn sample_transitions(
    pool: &[Transition],
    n: usize,
    seed: u64,
) -> Result<Vec<Transition>, InterpError> {
    if pool.len() < n {
        return Err(InterpError::TooFew {
            what: "transitions in the pool",
            needed: n,
            got: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|k| pool[k].clone())
        .collect())
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Protocol {
    /// No edits at all.
    Never,
    /// `alpha = 1, c = 0` on every GNA channel.
    Identity,
    /// GNA at the agent square: target direction set to `+v`, the others to `-v`.
    Gna(f32),
    /// PNA everywhere: target direction `+v`, the others `-v`.
    Pna(f32),
    /// Short-term box plan at the box nearest the agent held at `+v` for the target
    /// direction and `-v` for the others during one more step of ticks.
    BoxReroute(f32),
}

impl Protocol {
    pub fn name(&self) -> String {
        match self {
            Protocol::Never => "never".into(),
            Protocol::Identity => "identity".into(),
            Protocol::Gna(v) => format!("gna:{v}"),
            Protocol::Pna(v) => format!("pna:{v}"),
            Protocol::BoxReroute(v) => format!("box_reroute:{v}"),
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        let (name, v) = s
            .split_once(':')
            .map_or((s, None), |(a, b)| (a, b.parse::<f32>().ok()));
        let v = v.unwrap_or(2.0);
        Some(match name {
            "never" => Protocol::Never,
            "identity" => Protocol::Identity,
            "gna" => Protocol::Gna(v),
            "pna" => Protocol::Pna(v),
            "box_reroute" => Protocol::BoxReroute(v),
            _ => return None,
        })
    }

    fn reroutes(&self) -> bool {
        matches!(self, Protocol::BoxReroute(_))
    }
}

fn set(channels: Vec<usize>, squares: Option<Vec<Pos>>, value: f32) -> InterventionSpec {
    let spec = InterventionSpec::affine(0, Site::Hidden, channels, 0.0, value);
    match squares {
        Some(sq) => spec.at_squares(sq),
        None => spec,
    }
}

/// Box nearest the agent by Manhattan distance, ties to the first in row-major order.
fn nearest_box(level: &Level) -> Option<Pos> {
    let a = level.agent();
    level.boxes().into_iter().min_by_key(|b| b.manhattan(a))
}

/// Edits that make `protocol` push towards `target` on `t`.
pub fn protocol_edits(
    protocol: &Protocol,
    t: &Transition,
    target: Action,
    map: &ChannelMap,
) -> PlannerEdits {
    let d = target.index();
    let split = |group: [usize; 4], squares: Option<Vec<Pos>>, v: f32| -> Vec<InterventionSpec> {
        let others: Vec<usize> = (0..4).filter(|&e| e != d).map(|e| group[e]).collect();
        vec![
            set(vec![group[d]], squares.clone(), v),
            set(others, squares, -v),
        ]
    };
    let mut e = PlannerEdits::default();
    match *protocol {
        Protocol::Never => {}
        Protocol::Identity => {
            e.readout = vec![InterventionSpec::affine(
                0,
                Site::Hidden,
                map.gna.to_vec(),
                1.0,
                0.0,
            )]
        }
        Protocol::Gna(v) => e.readout = split(map.gna, Some(vec![t.level.agent()]), v),
        Protocol::Pna(v) => e.readout = split(map.pna, None, v),
        Protocol::BoxReroute(v) => {
            if let Some(b) = nearest_box(&t.level) {
                e.tick = split(map.box_short, Some(vec![b]), v);
            }
        }
    }
    e
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Outcome {
    pub baseline: Action,
    pub action: Action,
    pub readout: Readout,
}

impl Outcome {
    pub fn changed(&self) -> bool {
        self.action != self.baseline
    }
}

/// Re-read `t` with `edits`. Tick edits run `ticks` further ticks, compared against the same
/// ticks without edits.
pub fn causal_intervene(
    t: &Transition,
    edits: &PlannerEdits,
    map: &ChannelMap,
    gains: &MechanismGains,
    ticks: usize,
) -> Outcome {
    let advance = |tick: &[InterventionSpec]| -> PlanGrid {
        let mut g = t.grid.clone();
        for _ in 0..ticks {
            g = tick_plan_with(&g, &t.level, map, gains, &TickEdits { edits: tick }).0;
        }
        g
    };
    if edits.tick.is_empty() {
        let (ro, _) = readout_action_with(&t.grid, map, &t.level, gains, &edits.readout);
        return Outcome {
            baseline: t.action,
            action: ro.action,
            readout: ro,
        };
    }
    let (base, _) = readout_action_with(&advance(&[]), map, &t.level, gains, &[]);
    let (ro, _) = readout_action_with(&advance(&edits.tick), map, &t.level, gains, &edits.readout);
    Outcome {
        baseline: base.action,
        action: ro.action,
        readout: ro,
    }
}

/// Action of a DRC net on `obs` without and with `specs`. The head picks the action when
/// present and sized for the grid, otherwise `probe` reads the last layer.
pub fn intervene_net(
    state: &DrcState,
    obs: &Tensor3,
    ws: &WeightSet,
    ticks: usize,
    specs: &[InterventionSpec],
    probe: Option<&Probe>,
) -> Result<(Action, Action), InterpError> {
    let act = |specs: &[InterventionSpec]| -> Result<Action, InterpError> {
        let out = drc_forward(state, obs, ws, ticks, specs, false)?;
        let logits = match (out.logits, probe) {
            (Some(l), _) => l.to_vec(),
            (None, Some(p)) => probe_readout(&out.state.layers[ws.layers.len() - 1].h, p)?,
            (None, None) => {
                return Err(InterpError::Spec(
                    "net has no usable head and no probe was given".into(),
                ))
            }
        };
        Ok(Action::from_index(argmax(&logits)))
    };
    Ok((act(&[])?, act(specs)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub protocol: String,
    pub n: usize,
    pub successes: usize,
    pub estimate: Estimate,
}

impl ScoreReport {
    pub fn to_csv(&self) -> String {
        format!(
            "protocol,n,successes,rate,ci_lo,ci_hi\n{},{},{},{},{},{}\n",
            self.protocol,
            self.n,
            self.successes,
            self.estimate.mean,
            self.estimate.lo,
            self.estimate.hi
        )
    }
}

/// Fraction of transitions where `protocol` gets its alternate action taken, with a
/// bootstrap interval. The alternate target is drawn per transition from the three other
/// directions; for box rerouting success is any change of action.
pub fn intervention_score(
    transitions: &[Transition],
    protocol: &Protocol,
    map: &ChannelMap,
    gains: &MechanismGains,
    ticks: usize,
    seed: u64,
) -> Result<ScoreReport, InterpError> {
    if transitions.is_empty() {
        return Err(InterpError::Empty("transition dataset"));
    }
    if transitions.len() < 100 {
        return Err(InterpError::TooFew {
            what: "transitions",
            needed: 100,
            got: transitions.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<Action> = transitions
        .iter()
        .map(|t| {
            let others: Vec<Action> = Action::ALL.into_iter().filter(|&a| a != t.action).collect();
            others[rng.gen_range(0..3)]
        })
        .collect();
    let hits: Vec<f64> = transitions
        .iter()
        .zip(&targets)
        .map(|(t, &target)| {
            let o = causal_intervene(
                t,
                &protocol_edits(protocol, t, target, map),
                map,
                gains,
                ticks,
            );
            let ok = if protocol.reroutes() {
                o.changed()
            } else {
                o.action == target
            };
            ok as u8 as f64
        })
        .collect();
    let successes = hits.iter().filter(|&&h| h > 0.0).count();
    Ok(ScoreReport {
        protocol: protocol.name(),
        n: hits.len(),
        successes,
        estimate: bootstrap_mean(&hits, BOOTSTRAP_RESAMPLES, seed),
    })
}
