//! Batch evaluation of the oracle, the planner and DRC nets.

use super::{map_ordered, HarnessError};
use crate::net::{argmax, drc_forward, probe_readout, DrcState, Probe, WeightSet};
use crate::planner::{run_planner, ChannelMap, MechanismGains, PlannerEdits, RunOptions};
use crate::sokoban::{solve_oracle, Action, Level};
use crate::stats::{bootstrap_mean, Estimate, BOOTSTRAP_RESAMPLES};

/// How a DRC net turns its final hidden state into an action.
#[derive(Clone, Debug, PartialEq)]
pub enum DrcReadout {
    /// The weights' MLP head; the net must be sized for every level.
    Head,
    /// A linear probe over pooled final-layer channels; any level size.
    Probe(Probe),
}

#[derive(Clone, Debug)]
pub enum Solver {
    Oracle {
        node_budget: usize,
    },
    Synthetic {
        map: ChannelMap,
        gains: MechanismGains,
    },
    Drc {
        weights: WeightSet,
        readout: DrcReadout,
    },
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Oracle { .. } => "oracle",
            Solver::Synthetic { .. } => "synthetic",
            Solver::Drc { .. } => "drc",
        }
    }

    /// Errors when the solver cannot act on `level`.
    pub fn check(&self, level: &Level) -> Result<(), HarnessError> {
        let Solver::Drc { weights, readout } = self else {
            return Ok(());
        };
        let c = weights.config.channels;
        let mismatch = |msg: String| Err(HarnessError::Mismatch(msg));
        match readout {
            DrcReadout::Head => match &weights.head {
                None => mismatch("weights carry no head; give a probe".into()),
                Some(h) if h.inputs() != level.height() * level.width() * c => mismatch(format!(
                    "head expects {} inputs, level {}x{} gives {}",
                    h.inputs(),
                    level.height(),
                    level.width(),
                    level.height() * level.width() * c
                )),
                Some(_) => Ok(()),
            },
            DrcReadout::Probe(p) if p.w.first().map_or(0, |r| r.len()) != c => mismatch(format!(
                "probe reads {} channels, net has {c}",
                p.w.first().map_or(0, |r| r.len())
            )),
            DrcReadout::Probe(_) => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelOutcome {
    pub id: Option<u64>,
    pub solved: bool,
    pub actions: Vec<Action>,
    /// The action sequence replayed on the engine reaches a solved state.
    pub replays: bool,
}

impl LevelOutcome {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub n_levels: usize,
    pub n_solved: usize,
    pub solve_rate: f64,
    /// Mean episode length over solved levels.
    pub mean_steps: f64,
    /// 95% bootstrap interval of the solve rate.
    pub ci: Estimate,
}

impl SolveStats {
    pub fn from_outcomes(outcomes: &[LevelOutcome], seed: u64) -> SolveStats {
        let flags: Vec<f64> = outcomes.iter().map(|o| o.solved as u8 as f64).collect();
        let n_solved = outcomes.iter().filter(|o| o.solved).count();
        let lens: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.solved)
            .map(|o| o.steps() as f64)
            .collect();
        SolveStats {
            n_levels: outcomes.len(),
            n_solved,
            solve_rate: if outcomes.is_empty() {
                0.0
            } else {
                n_solved as f64 / outcomes.len() as f64
            },
            mean_steps: crate::stats::mean(&lens),
            ci: bootstrap_mean(&flags, BOOTSTRAP_RESAMPLES, seed),
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "n_levels,n_solved,solve_rate,mean_steps,ci_lo,ci_hi\n{},{},{},{},{},{}\n",
            self.n_levels, self.n_solved, self.solve_rate, self.mean_steps, self.ci.lo, self.ci.hi
        )
    }
}

pub fn outcomes_csv(outcomes: &[LevelOutcome]) -> String {
    let mut s = String::from("index,id,solved,steps,replays,actions\n");
    for (k, o) in outcomes.iter().enumerate() {
        s.push_str(&format!(
            "{k},{},{},{},{},{}\n",
            o.id.map_or(String::new(), |i| i.to_string()),
            o.solved as u8,
            o.steps(),
            o.replays as u8,
            crate::sokoban::format_actions(&o.actions)
        ));
    }
    s
}

/// Roll a DRC net out on `level`: the first observation is fed for `thinking_steps` extra
/// steps without acting, then one action per step.
pub fn run_drc(
    weights: &WeightSet,
    readout: &DrcReadout,
    level: &Level,
    thinking_steps: usize,
    max_steps: usize,
) -> Result<Vec<Action>, HarnessError> {
    let ticks = weights.config.ticks.max(1);
    let mut state = DrcState::zeros(&weights.config, level.height(), level.width());
    let mut cur = level.clone();
    let obs = cur.render_rgb();
    for _ in 0..thinking_steps {
        state = drc_forward(&state, &obs, weights, ticks, &[], false)?.state;
    }
    let mut actions = Vec::new();
    while actions.len() < max_steps && !cur.is_solved() {
        let out = drc_forward(&state, &cur.render_rgb(), weights, ticks, &[], false)?;
        let logits = match readout {
            DrcReadout::Head => out.logits.map(|l| l.to_vec()),
            DrcReadout::Probe(p) => Some(probe_readout(
                &out.state.layers[weights.layers.len() - 1].h,
                p,
            )?),
        }
        .ok_or_else(|| HarnessError::Mismatch("net produced no logits".into()))?;
        let a = Action::from_index(argmax(&logits));
        actions.push(a);
        cur = cur.step(a).next;
        state = out.state;
    }
    Ok(actions)
}

fn outcome(level: &Level, actions: Vec<Action>) -> LevelOutcome {
    let (end, _) = level.replay(&actions);
    LevelOutcome {
        id: level.id,
        solved: end.is_solved(),
        replays: end.is_solved(),
        actions,
    }
}

/// Solve every level with `solver`, in parallel, outcomes in input order.
pub fn evaluate_levels(
    solver: &Solver,
    levels: &[Level],
    opts: &RunOptions,
) -> Result<Vec<LevelOutcome>, HarnessError> {
    if levels.is_empty() {
        return Err(HarnessError::EmptyLevels);
    }
    for l in levels {
        solver.check(l)?;
    }
    map_ordered(levels, |level| -> Result<LevelOutcome, HarnessError> {
        Ok(match solver {
            Solver::Oracle { node_budget } => {
                let sol = solve_oracle(level, *node_budget)
                    .solution()
                    .map(|s| s.to_vec());
                match sol {
                    Some(s) => outcome(level, s),
                    None => LevelOutcome {
                        id: level.id,
                        solved: false,
                        actions: Vec::new(),
                        replays: false,
                    },
                }
            }
            Solver::Synthetic { map, gains } => {
                let ep = run_planner(level, map, gains, opts, &PlannerEdits::default());
                let mut o = outcome(level, ep.actions());
                o.solved = ep.solved;
                o
            }
            Solver::Drc { weights, readout } => outcome(
                level,
                run_drc(weights, readout, level, opts.thinking_steps, opts.max_steps)?,
            ),
        })
    })
    .into_iter()
    .collect()
}

/// Aggregate solve statistics of `solver` on `levels`.
pub fn evaluate(
    solver: &Solver,
    levels: &[Level],
    opts: &RunOptions,
    seed: u64,
) -> Result<(SolveStats, Vec<LevelOutcome>), HarnessError> {
    let outcomes = evaluate_levels(solver, levels, opts)?;
    Ok((SolveStats::from_outcomes(&outcomes, seed), outcomes))
}
