//! Weight steering and plan propagation distance.

use super::InterpError;
use crate::net::{drc_forward, DrcState, WeightSet};
use crate::planner::{
    decode_net_plan, init_plan, run_planner, tick_plan, ChannelMap, MechanismGains, PlannerEdits,
    RunOptions,
};
use crate::sokoban::{generate_case_level, Action, CaseKind, Level, Pos};

/// Recurrent hidden-to-hidden kernels.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Recurrent {
    /// From the layer below.
    Wh1,
    /// From the layer's own previous state.
    Wh2,
}

/// Scale the chosen recurrent kernels of every gate of every layer by `factor`.
pub fn steer_weights(
    ws: &WeightSet,
    factor: f32,
    targets: &[Recurrent],
) -> Result<WeightSet, InterpError> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(InterpError::BadFactor(factor));
    }
    let mut out = ws.clone();
    if factor == 1.0 {
        return Ok(out);
    }
    for l in &mut out.layers {
        for g in &mut l.gates {
            if targets.contains(&Recurrent::Wh1) {
                g.wh1.scale(factor);
            }
            if targets.contains(&Recurrent::Wh2) {
                g.wh2.scale(factor);
            }
        }
    }
    Ok(out)
}

/// A three-row corridor `width` wide with a target at its right end. The paired box sits
/// walled in below the corridor, so the only plan is the one grown back from the target.
pub fn corridor_probe(width: usize) -> Level {
    let w = width.max(6);
    let wall = "#".repeat(w);
    let row = format!("#@{}.#", " ".repeat(w - 4));
    let pocket = format!("#{}#", "#".repeat(w - 3) + "$");
    Level::parse(&format!("{wall}\n{row}\n{wall}\n{pocket}\n{wall}")).expect("corridor probe")
}

/// Squares left of the target whose Right plan is at or above threshold, counted without gaps.
fn reach_from_target(level: &Level, above: impl Fn(Pos) -> bool) -> usize {
    let t = level.targets()[0];
    (1..t.col)
        .rev()
        .take_while(|&c| above(Pos::new(t.row, c)))
        .count()
}

/// Largest planner reach on [`corridor_probe`] over ticks `1..=ticks`. The chain hits
/// the wall behind the agent, stops and regrows, so reach is taken at its peak.
pub fn propagation_distance(
    gains: &MechanismGains,
    map: &ChannelMap,
    width: usize,
    ticks: usize,
) -> usize {
    let level = corridor_probe(width);
    let ch = map.box_short[Action::Right.index()];
    let mut g = init_plan(&level, map, gains);
    let mut best = 0;
    for _ in 0..ticks {
        g = tick_plan(&g, &level, map, gains).0;
        best = best.max(reach_from_target(&level, |p| {
            g.get(p, ch) >= gains.threshold
        }));
    }
    best
}

/// Largest reach of a compiled net on [`corridor_probe`] over ticks `1..=ticks`.
pub fn net_propagation_distance(
    ws: &WeightSet,
    map: &ChannelMap,
    gains: &MechanismGains,
    width: usize,
    ticks: usize,
) -> Result<usize, InterpError> {
    let level = corridor_probe(width);
    let obs = level.render_rgb();
    let mut st = DrcState::zeros(&ws.config, level.height(), level.width());
    let mut best = 0;
    for _ in 0..ticks {
        st = drc_forward(&st, &obs, ws, 1, &[], false)?.state;
        let plan = decode_net_plan(&st.layers[ws.layers.len() - 1].h, map, gains);
        best = best.max(reach_from_target(&level, |p| {
            plan.at(p).is_some_and(|a| a.dir == Action::Right)
        }));
    }
    Ok(best)
}

/// Largest zigzag size in `sizes` the planner solves under `opts`.
pub fn largest_solvable_zigzag(
    gains: &MechanismGains,
    map: &ChannelMap,
    sizes: &[usize],
    opts: &RunOptions,
) -> Option<usize> {
    sizes
        .iter()
        .copied()
        .filter(|&n| {
            generate_case_level(CaseKind::Zigzag, n)
                .is_ok_and(|l| run_planner(&l, map, gains, opts, &PlannerEdits::default()).solved)
        })
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::DrcConfig;

    #[test]
    fn unit_factor_is_identity() {
        let ws = WeightSet::random(
            DrcConfig {
                layers: 2,
                ticks: 1,
                channels: 3,
                height: 5,
                width: 5,
            },
            0.2,
            3,
        );
        assert_eq!(
            steer_weights(&ws, 1.0, &[Recurrent::Wh1, Recurrent::Wh2]).unwrap(),
            ws
        );
        assert!(steer_weights(&ws, 0.0, &[Recurrent::Wh1]).is_err());
        let s = steer_weights(&ws, 2.0, &[Recurrent::Wh2]).unwrap();
        assert_eq!(s.layers[1].gates[0].wh1, ws.layers[1].gates[0].wh1);
        assert_eq!(
            s.layers[1].gates[0].wh2.w[0],
            2.0 * ws.layers[1].gates[0].wh2.w[0]
        );
        assert_eq!(s.enc1, ws.enc1);
    }

    #[test]
    fn probe_shape() {
        let l = corridor_probe(10);
        assert_eq!(l.width(), 10);
        assert_eq!(l.targets(), vec![Pos::new(1, 8)]);
    }
}
