//! Closed-loop episodes: tick, read out, act, update.

use super::{
    apply_transition_update, init_plan, readout_action_with, tick_plan_with, ChannelMap,
    MechanismGains, PlanGrid, Readout, TickEdits, TraceEvent, TraceKind,
};
use crate::net::InterventionSpec;
use crate::sokoban::{Action, Level};

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub max_steps: usize,
    pub ticks_per_step: usize,
    /// Extra steps of ticks before the first action.
    pub thinking_steps: usize,
    /// Keep the grid after every tick.
    pub record_ticks: bool,
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_steps: 120,
            ticks_per_step: 3,
            thinking_steps: 0,
            record_ticks: false,
            record_trace: false,
        }
    }
}

/// Edits applied while running: on plan units every tick they address, and on GNA or PNA
/// channels at readout.
#[derive(Clone, Debug, Default)]
pub struct PlannerEdits {
    pub tick: Vec<InterventionSpec>,
    pub readout: Vec<InterventionSpec>,
    /// Steps whose readout is edited; `None` means all.
    pub readout_steps: Option<Vec<usize>>,
    /// Channels whose state entering every step after the first is replaced by the state a
    /// fresh planner reaches in one step on the previous observation.
    pub cache_channels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub action: Action,
    pub reward: f32,
    pub readout: Readout,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub level: Level,
    pub final_level: Level,
    pub steps: Vec<StepRecord>,
    pub solved: bool,
    /// Grid the action was read from, GNA and PNA included, one per step.
    pub grids: Vec<PlanGrid>,
    /// Grid after every tick, when requested.
    pub tick_grids: Vec<PlanGrid>,
    pub trace: Vec<TraceEvent>,
}

impl Episode {
    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action).collect()
    }
    pub fn total_reward(&self) -> f32 {
        self.steps.iter().map(|s| s.reward).sum()
    }
    pub fn len(&self) -> usize {
        self.steps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn run_ticks(
    grid: &mut PlanGrid,
    level: &Level,
    map: &ChannelMap,
    gains: &MechanismGains,
    n: usize,
    edits: &PlannerEdits,
    opts: &RunOptions,
    ep: &mut Episode,
) {
    let te = TickEdits { edits: &edits.tick };
    for _ in 0..n {
        let (g, events) = tick_plan_with(grid, level, map, gains, &te);
        *grid = g;
        if opts.record_trace {
            ep.trace.extend(events);
        }
        if opts.record_ticks {
            ep.tick_grids.push(grid.clone());
        }
    }
}

/// Run the planner as an agent on `level`.
pub fn run_planner(
    level: &Level,
    map: &ChannelMap,
    gains: &MechanismGains,
    opts: &RunOptions,
    edits: &PlannerEdits,
) -> Episode {
    let mut ep = Episode {
        level: level.clone(),
        final_level: level.clone(),
        steps: Vec::new(),
        solved: level.is_solved(),
        grids: Vec::new(),
        tick_grids: Vec::new(),
        trace: Vec::new(),
    };
    let mut grid = init_plan(level, map, gains);
    if opts.record_ticks {
        ep.tick_grids.push(grid.clone());
    }
    let mut cur = level.clone();
    let mut prev: Option<Level> = None;
    run_ticks(
        &mut grid,
        &cur,
        map,
        gains,
        opts.thinking_steps * opts.ticks_per_step,
        edits,
        opts,
        &mut ep,
    );
    for step in 0..opts.max_steps {
        if ep.solved {
            break;
        }
        if let (Some(p), false) = (&prev, edits.cache_channels.is_empty()) {
            let cached = one_step_from_scratch(p, map, gains, opts.ticks_per_step);
            for (dst, src) in [
                (&mut grid.acts, &cached.acts),
                (&mut grid.cell, &cached.cell),
            ] {
                for (v, c) in dst
                    .data
                    .chunks_mut(map.channels)
                    .zip(src.data.chunks(map.channels))
                {
                    for &ch in &edits.cache_channels {
                        v[ch] = c[ch];
                    }
                }
            }
        }
        run_ticks(
            &mut grid,
            &cur,
            map,
            gains,
            opts.ticks_per_step,
            edits,
            opts,
            &mut ep,
        );
        let readout_edits: &[InterventionSpec] = if edits
            .readout_steps
            .as_ref()
            .is_none_or(|s| s.contains(&step))
        {
            &edits.readout
        } else {
            &[]
        };
        let (ro, g) = readout_action_with(&grid, map, &cur, gains, readout_edits);
        if opts.record_trace {
            ep.trace.push(TraceEvent {
                kind: TraceKind::Readout,
                square: cur.agent(),
                channel: map.pna[ro.action.index()],
                tick: grid.tick_index,
            });
        }
        let out = cur.step(ro.action);
        grid = apply_transition_update(&g, &cur, ro.action, &out.next, map, gains)
            .expect("consistent transition");
        ep.grids.push(g);
        ep.steps.push(StepRecord {
            action: ro.action,
            reward: out.reward,
            readout: ro,
        });
        prev = Some(std::mem::replace(&mut cur, out.next));
        ep.solved = out.solved;
    }
    ep.final_level = cur;
    ep
}

/// Grid after seeding on `level` and one step of ticks, with no history.
pub fn one_step_from_scratch(
    level: &Level,
    map: &ChannelMap,
    gains: &MechanismGains,
    ticks: usize,
) -> PlanGrid {
    let mut g = init_plan(level, map, gains);
    for _ in 0..ticks {
        g = super::tick_plan(&g, level, map, gains).0;
    }
    g
}
