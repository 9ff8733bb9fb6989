//! Explicit cellular planner over direction channels.
//!
//! Every plan channel (box or agent, one per direction) is updated like a ConvLSTM unit
//! with its forget gate at zero:
//!
//! ```text
//! i = tanh(steer * u_i / A)      magnitude: seeds, linear and turn extension, inhibition
//! j in {0, 1}                    legality and stops
//! o = tanh(steer * u_o)          validity; negative at dead ends, which starts backtracking
//! c = f * c_prev + i * j
//! a = (A / tanh 1) * o * tanh(c) so |a| <= A
//! ```
//!
//! All updates read the pre-tick grid.

mod compile;
mod run;

pub use compile::{
    compile_map, compile_to_weights, compile_validation, decode_net_plan, net_plan_grid,
    validation_levels, CompileCheck, CompileError, CompileScope, VALIDATION_TICKS,
};
pub use run::{one_step_from_scratch, run_planner, Episode, PlannerEdits, RunOptions, StepRecord};

use crate::net::{Edit, Gate, InterventionSpec, Site};
use crate::sokoban::{Action, Level, Pos, Tile};
use crate::tensor::Tensor3;
use std::fmt;
use thiserror::Error;

pub const ENTITY_NAMES: [&str; 4] = ["wall", "target", "box", "agent"];

/// Role to channel assignment. Index `d` of each array is `Action as usize`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelMap {
    pub box_short: [usize; 4],
    pub box_long: [usize; 4],
    pub agent_short: [usize; 4],
    pub gna: [usize; 4],
    pub pna: [usize; 4],
    pub wall: usize,
    pub target: usize,
    pub boxes: usize,
    pub agent: usize,
    /// Total channels including unassigned spares.
    pub channels: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("channel map needs at least 24 channels, got {0}")]
pub struct ChannelMapError(pub usize);

pub const MAP_SIZE: usize = 24;

/// Fixed layout: box_short 0-3, box_long 4-7, agent_short 8-11, gna 12-15, pna 16-19,
/// wall 20, target 21, box 22, agent 23, spares from 24.
pub fn default_channel_map(c: usize) -> Result<ChannelMap, ChannelMapError> {
    if c < MAP_SIZE {
        return Err(ChannelMapError(c));
    }
    let four = |base: usize| [base, base + 1, base + 2, base + 3];
    Ok(ChannelMap {
        box_short: four(0),
        box_long: four(4),
        agent_short: four(8),
        gna: four(12),
        pna: four(16),
        wall: 20,
        target: 21,
        boxes: 22,
        agent: 23,
        channels: c,
    })
}

impl ChannelMap {
    pub fn assigned(&self) -> Vec<usize> {
        let mut v: Vec<usize> = Vec::with_capacity(MAP_SIZE);
        for g in [
            self.box_short,
            self.box_long,
            self.agent_short,
            self.gna,
            self.pna,
        ] {
            v.extend(g);
        }
        v.extend([self.wall, self.target, self.boxes, self.agent]);
        v
    }

    pub fn spares(&self) -> Vec<usize> {
        let a = self.assigned();
        (0..self.channels).filter(|c| !a.contains(c)).collect()
    }

    /// Human-readable role of a channel, e.g. `box_short_right`.
    pub fn role(&self, ch: usize) -> String {
        let groups = [
            ("box_short", self.box_short),
            ("box_long", self.box_long),
            ("agent_short", self.agent_short),
            ("gna", self.gna),
            ("pna", self.pna),
        ];
        for (name, g) in groups {
            if let Some(d) = g.iter().position(|&x| x == ch) {
                return format!("{name}_{}", Action::from_index(d).name());
            }
        }
        let ents = [self.wall, self.target, self.boxes, self.agent];
        if let Some(k) = ents.iter().position(|&x| x == ch) {
            return ENTITY_NAMES[k].to_string();
        }
        format!("spare{ch}")
    }

    /// Plan channels (box short/long and agent), the ones the tick updates.
    pub fn plan_channels(&self) -> Vec<usize> {
        let mut v = self.box_short.to_vec();
        v.extend(self.box_long);
        v.extend(self.agent_short);
        v
    }
}

/// Gains of the plan mechanisms. Activations are in units where `a_max` is saturation.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismGains {
    /// Seed of target chains.
    pub seed_gain: f32,
    /// Seed of each legal push at a box square.
    pub forward_seed: f32,
    pub lpe_gain: f32,
    pub tpe_gain: f32,
    /// Weight of each orthogonal wall on the validity gate; negative.
    pub stop_gain: f32,
    pub wta_inhibit: f32,
    /// Inhibit with the signed activation of other directions instead of their positive part.
    pub wta_signed: bool,
    /// Multiplies the linear extension weight.
    pub decay: f32,
    pub threshold: f32,
    /// Weight of negative activation passed back along a chain.
    pub backtrack_gain: f32,
    /// Weight of negative activation passed forward along a chain.
    pub forward_negative: f32,
    /// Multiplies links that extend a chain forward, away from where it started.
    pub forward_gain: f32,
    /// Combine extension inputs by their strongest continuation instead of summing them.
    /// A negative continuation then overrides forward extension.
    pub max_combine: bool,
    pub a_max: f32,
    /// Validity gate pre-activation with nothing in the way.
    pub valid_bias: f32,
    /// Self-excitation per direction; breaks exact ties (Down > Right > Up > Left).
    pub wta_self: [f32; 4],
    /// Forward seed of agent channels at the agent square.
    pub agent_seed: f32,
    pub agent_lpe: f32,
    pub agent_tpe: f32,
    /// Box plan at s+d copied into the agent plan at s when a box is at s+d.
    pub copy_gain: f32,
    /// Share of box plan subtracted from the agent plan at the agent square.
    pub gna_box_weight: f32,
    /// Share of a suppressed direction kept in the long-term channel.
    pub long_gain: f32,
    pub long_decay: f32,
    /// Multiplier on box plan pre-activations (weight steering).
    pub steer: f32,
}

impl Default for MechanismGains {
    fn default() -> Self {
        MechanismGains {
            seed_gain: 1.0,
            forward_seed: 0.1,
            lpe_gain: 0.8,
            tpe_gain: 0.5,
            stop_gain: -1.5,
            wta_inhibit: 1.6,
            wta_signed: false,
            decay: 0.9,
            threshold: 0.3,
            backtrack_gain: 1.5,
            forward_negative: 0.0,
            forward_gain: 0.4,
            max_combine: true,
            a_max: 2.0,
            valid_bias: 8.0,
            wta_self: [0.02, 0.04, 0.01, 0.03],
            agent_seed: 0.1,
            agent_lpe: 0.7,
            agent_tpe: 0.65,
            copy_gain: 0.8,
            gna_box_weight: 0.0,
            long_gain: 0.0,
            long_decay: 0.9,
            steer: 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GainsError {
    #[error("lpe_gain ({lpe}) must exceed tpe_gain ({tpe})")]
    LpeNotAboveTpe { lpe: f32, tpe: f32 },
    #[error("{0} out of range")]
    Range(&'static str),
}

impl MechanismGains {
    pub fn validate(&self) -> Result<(), GainsError> {
        if self.lpe_gain <= self.tpe_gain {
            return Err(GainsError::LpeNotAboveTpe {
                lpe: self.lpe_gain,
                tpe: self.tpe_gain,
            });
        }
        let checks = [
            (self.stop_gain < 0.0, "stop_gain"),
            (self.wta_inhibit >= 0.0, "wta_inhibit"),
            (self.decay > 0.0 && self.decay <= 1.0, "decay"),
            (self.threshold > 0.0, "threshold"),
            (self.backtrack_gain >= 1.0, "backtrack_gain"),
            (self.a_max > 0.0, "a_max"),
            (self.steer > 0.0, "steer"),
            (
                self.long_decay >= 0.0 && self.long_decay <= 1.0,
                "long_decay",
            ),
            (
                (0.0..=1.0).contains(&self.forward_negative),
                "forward_negative",
            ),
        ];
        for (ok, name) in checks {
            if !ok {
                return Err(GainsError::Range(name));
            }
        }
        Ok(())
    }

    /// Effective weight of one linear extension link.
    pub fn lpe(&self) -> f32 {
        self.lpe_gain * self.decay
    }

    /// The part of the engine a single DRC layer reproduces: negative activation passed
    /// like positive activation, and no automatic long-term memory.
    pub fn compilable(&self) -> MechanismGains {
        MechanismGains {
            backtrack_gain: 1.0,
            forward_negative: 1.0,
            wta_signed: true,
            max_combine: false,
            long_gain: 0.0,
            ..self.clone()
        }
    }

    pub fn steered(&self, factor: f32) -> MechanismGains {
        MechanismGains {
            steer: self.steer * factor,
            ..self.clone()
        }
    }

    pub fn without_wta(&self) -> MechanismGains {
        MechanismGains {
            wta_inhibit: 0.0,
            ..self.clone()
        }
    }

    /// `(key, value)` pairs in a fixed order, for config files and manifests.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = vec![
            ("seed_gain", self.seed_gain),
            ("lpe_gain", self.lpe_gain),
            ("tpe_gain", self.tpe_gain),
            ("stop_gain", self.stop_gain),
            ("wta_inhibit", self.wta_inhibit),
            ("decay", self.decay),
            ("threshold", self.threshold),
            ("backtrack_gain", self.backtrack_gain),
            ("forward_negative", self.forward_negative),
            ("forward_gain", self.forward_gain),
            ("a_max", self.a_max),
            ("valid_bias", self.valid_bias),
            ("forward_seed", self.forward_seed),
            ("agent_seed", self.agent_seed),
            ("agent_lpe", self.agent_lpe),
            ("agent_tpe", self.agent_tpe),
            ("copy_gain", self.copy_gain),
            ("gna_box_weight", self.gna_box_weight),
            ("long_gain", self.long_gain),
            ("long_decay", self.long_decay),
            ("steer", self.steer),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let ws: Vec<String> = self.wta_self.iter().map(|x| x.to_string()).collect();
        v.push(("wta_self".into(), ws.join(",")));
        v.push(("wta_signed".into(), self.wta_signed.to_string()));
        v.push(("max_combine".into(), self.max_combine.to_string()));
        v
    }

    /// Set one field by name. Returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let num = || {
            value
                .trim()
                .parse::<f32>()
                .map_err(|e| format!("{key}: {e}"))
        };
        let field = match key {
            "seed_gain" => &mut self.seed_gain,
            "lpe_gain" => &mut self.lpe_gain,
            "tpe_gain" => &mut self.tpe_gain,
            "stop_gain" => &mut self.stop_gain,
            "wta_inhibit" => &mut self.wta_inhibit,
            "decay" => &mut self.decay,
            "threshold" | "theta" => &mut self.threshold,
            "backtrack_gain" => &mut self.backtrack_gain,
            "forward_negative" => &mut self.forward_negative,
            "forward_gain" => &mut self.forward_gain,
            "a_max" => &mut self.a_max,
            "valid_bias" => &mut self.valid_bias,
            "forward_seed" => &mut self.forward_seed,
            "agent_seed" => &mut self.agent_seed,
            "agent_lpe" => &mut self.agent_lpe,
            "agent_tpe" => &mut self.agent_tpe,
            "copy_gain" => &mut self.copy_gain,
            "gna_box_weight" => &mut self.gna_box_weight,
            "long_gain" => &mut self.long_gain,
            "long_decay" => &mut self.long_decay,
            "steer" => &mut self.steer,
            "wta_signed" | "max_combine" => {
                let b = value
                    .trim()
                    .parse::<bool>()
                    .map_err(|e| format!("{key}: {e}"))?;
                if key == "wta_signed" {
                    self.wta_signed = b;
                } else {
                    self.max_combine = b;
                }
                return Ok(true);
            }
            "wta_self" => {
                let parts: Result<Vec<f32>, _> =
                    value.split(',').map(|p| p.trim().parse::<f32>()).collect();
                let parts = parts.map_err(|e| format!("{key}: {e}"))?;
                if parts.len() != 4 {
                    return Err(format!("{key}: expected 4 values"));
                }
                self.wta_self.copy_from_slice(&parts);
                return Ok(true);
            }
            _ => return Ok(false),
        };
        *field = num()?;
        Ok(true)
    }
}

/// Planner state: all channels of the map over the grid, plus the cell state of the
/// plan channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanGrid {
    pub acts: Tensor3,
    pub cell: Tensor3,
    pub tick_index: usize,
}

impl PlanGrid {
    pub fn zeros(h: usize, w: usize, c: usize) -> PlanGrid {
        PlanGrid {
            acts: Tensor3::zeros(h, w, c),
            cell: Tensor3::zeros(h, w, c),
            tick_index: 0,
        }
    }
    pub fn get(&self, p: Pos, ch: usize) -> f32 {
        self.acts.get(p.row, p.col, ch)
    }
    pub fn set(&mut self, p: Pos, ch: usize, v: f32) {
        self.acts.set(p.row, p.col, ch, v);
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Horizon {
    Short,
    Long,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Arrow {
    pub dir: Action,
    pub horizon: Horizon,
    pub strength: f32,
}

/// Decoded box plan: one optional arrow per square.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub height: usize,
    pub width: usize,
    pub arrows: Vec<Option<Arrow>>,
}

impl Plan {
    pub fn at(&self, p: Pos) -> Option<Arrow> {
        self.arrows[p.row * self.width + p.col]
    }
    pub fn is_empty(&self) -> bool {
        self.arrows.iter().all(|a| a.is_none())
    }
    pub fn len(&self) -> usize {
        self.arrows.iter().filter(|a| a.is_some()).count()
    }
    /// Direction and horizon only, for exact comparisons.
    pub fn shape(&self) -> Vec<Option<(Action, Horizon)>> {
        self.arrows
            .iter()
            .map(|a| a.map(|a| (a.dir, a.horizon)))
            .collect()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            let line: String = (0..self.width)
                .map(|c| match self.at(Pos::new(r, c)) {
                    None => '.',
                    Some(a) => {
                        let ch = match a.dir {
                            Action::Up => '^',
                            Action::Down => 'v',
                            Action::Left => '<',
                            Action::Right => '>',
                        };
                        if a.horizon == Horizon::Long {
                            ch.to_ascii_uppercase()
                        } else {
                            ch
                        }
                    }
                })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Seed,
    ExtendLinear,
    ExtendTurn,
    Stop,
    Backtrack,
    WtaSuppress,
    Transfer,
    Readout,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Seed => "seed",
            TraceKind::ExtendLinear => "extend_linear",
            TraceKind::ExtendTurn => "extend_turn",
            TraceKind::Stop => "stop",
            TraceKind::Backtrack => "backtrack",
            TraceKind::WtaSuppress => "wta_suppress",
            TraceKind::Transfer => "transfer",
            TraceKind::Readout => "readout",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub kind: TraceKind,
    pub square: Pos,
    pub channel: usize,
    pub tick: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.kind.name(),
            self.square.row,
            self.square.col,
            self.channel,
            self.tick
        )
    }
}

/// Static per-level geometry in flat square indices.
struct Geo {
    h: usize,
    w: usize,
    wall: Vec<bool>,
    target: Vec<bool>,
    boxes: Vec<bool>,
    free_box: Vec<bool>,
    agent: Vec<bool>,
}

impl Geo {
    fn new(level: &Level) -> Geo {
        let t = level.tiles();
        Geo {
            h: level.height(),
            w: level.width(),
            wall: t.iter().map(|t| t.is_wall()).collect(),
            target: t
                .iter()
                .map(|&t| t == Tile::Target || t == Tile::AgentOnTarget)
                .collect(),
            boxes: t.iter().map(|t| t.has_box()).collect(),
            free_box: t.iter().map(|&t| t == Tile::Box).collect(),
            agent: t.iter().map(|t| t.has_agent()).collect(),
        }
    }

    /// Neighbour index of square `i` in direction `d`, or None off-grid.
    #[inline]
    fn nb(&self, i: usize, d: usize) -> Option<usize> {
        let (r, c) = (i / self.w, i % self.w);
        match d {
            0 => (r > 0).then(|| i - self.w),
            1 => (r + 1 < self.h).then(|| i + self.w),
            2 => (c > 0).then(|| i - 1),
            _ => (c + 1 < self.w).then(|| i + 1),
        }
    }

    /// Neighbour `k` steps away.
    fn nb_k(&self, i: usize, d: usize, k: usize) -> Option<usize> {
        (0..k).try_fold(i, |j, _| self.nb(j, d))
    }

    fn wall_at(&self, j: Option<usize>) -> bool {
        j.is_none_or(|j| self.wall[j])
    }
    fn flag_at(v: &[bool], j: Option<usize>) -> bool {
        j.is_some_and(|j| v[j])
    }

    /// Backward seed count for box channel `d` at `i`: free targets 1, 2 or 3 squares
    /// ahead along `d`; the third only past an open square. A wall right ahead is left to
    /// the validity gate.
    fn backward_seed(&self, i: usize, d: usize) -> f32 {
        let s1 = self.nb(i, d);
        let s2 = self.nb_k(i, d, 2);
        let s3 = self.nb_k(i, d, 3);
        let t = |j| Geo::flag_at(&self.target, j) as u8 as f32;
        t(s1) + t(s2) + t(s3) * !self.wall_at(s2) as u8 as f32
    }

    fn orth_walls(&self, i: usize, d: usize) -> f32 {
        let o = Action::from_index(d).orthogonal();
        o.iter()
            .filter(|a| self.wall_at(self.nb(i, a.index())))
            .count() as f32
    }
}

const DIRS: [usize; 4] = [0, 1, 2, 3];

fn orth(d: usize) -> [usize; 2] {
    if d < 2 {
        [2, 3]
    } else {
        [0, 1]
    }
}

fn write_entities(grid: &mut PlanGrid, geo: &Geo, map: &ChannelMap) {
    for i in 0..geo.h * geo.w {
        let (r, c) = (i / geo.w, i % geo.w);
        let vals = [
            (map.wall, geo.wall[i]),
            (map.target, geo.target[i]),
            (map.boxes, geo.boxes[i]),
            (map.agent, geo.agent[i]),
        ];
        for (ch, v) in vals {
            grid.acts.set(r, c, ch, v as u8 as f32);
        }
    }
}

/// Per-tick inputs that are not part of the gated update: extra edits on gates, cells
/// and activations, addressed with `Site` and channel indices of the map.
#[derive(Clone, Debug, Default)]
pub struct TickEdits<'a> {
    pub edits: &'a [InterventionSpec],
}

impl TickEdits<'_> {
    fn for_site(&self, tick: usize, site: Site) -> impl Iterator<Item = &InterventionSpec> {
        self.edits
            .iter()
            .filter(move |e| e.site == site && e.ticks.as_ref().is_none_or(|t| t.contains(&tick)))
    }
}

/// Entity channels from the level plus one seeding update from an empty plan.
pub fn init_plan(level: &Level, map: &ChannelMap, gains: &MechanismGains) -> PlanGrid {
    let grid = PlanGrid::zeros(level.height(), level.width(), map.channels);
    let (mut g, _) = tick_plan(&grid, level, map, gains);
    g.tick_index = 0;
    g
}

/// Contributions to `u_i` of one plan unit, kept apart for attribution.
#[derive(Default, Clone, Copy)]
struct Drive {
    seed: f32,
    lpe: f32,
    tpe: f32,
    wta: f32,
    neg_in: f32,
}

impl Drive {
    fn total(&self) -> f32 {
        self.seed + self.lpe + self.tpe + self.wta
    }
}

/// One synchronous update of all plan channels.
pub fn tick_plan(
    grid: &PlanGrid,
    level: &Level,
    map: &ChannelMap,
    gains: &MechanismGains,
) -> (PlanGrid, Vec<TraceEvent>) {
    tick_plan_with(grid, level, map, gains, &TickEdits::default())
}

pub fn tick_plan_with(
    grid: &PlanGrid,
    level: &Level,
    map: &ChannelMap,
    gains: &MechanismGains,
    edits: &TickEdits,
) -> (PlanGrid, Vec<TraceEvent>) {
    let geo = Geo::new(level);
    let n = geo.h * geo.w;
    let a = &grid.acts;
    let cc = a.channels;
    let tick = grid.tick_index;
    let av = |i: usize, ch: usize| a.data[i * cc + ch];
    let nbv = |i: usize, d: usize, ch: usize| geo.nb(i, d).map_or(0.0, |j| av(j, ch));
    let bt = |x: f32| if x < 0.0 { gains.backtrack_gain * x } else { x };
    let fwd_neg = |x: f32| {
        if x < 0.0 {
            gains.forward_negative * x
        } else {
            x
        }
    };
    let lpe = gains.lpe();
    let amax = gains.a_max;
    let scale = amax / 1f32.tanh();

    let mut next = grid.clone();
    next.tick_index = tick + 1;
    write_entities(&mut next, &geo, map);
    let mut events = Vec::new();

    // gates for every plan unit, laid out [square][family*4 + d]
    let fams: [[usize; 4]; 2] = [map.box_short, map.agent_short];
    let mut gi = vec![0.0f32; n * 8];
    let mut gj = vec![0.0f32; n * 8];
    let mut go = vec![0.0f32; n * 8];
    let mut gf = vec![0.0f32; n * 8];
    let mut drives = vec![Drive::default(); n * 8];
    for i in 0..n {
        for (fi, fam) in fams.iter().enumerate() {
            for d in DIRS {
                let ch = fam[d];
                let mut dr = Drive::default();
                let fwd = geo.nb(i, d);
                let back = geo.nb(i, d ^ 1);
                // negative activation spreads back towards the start of a chain
                let link = |x: f32, w: f32, backward: bool, slot: &mut f32, neg: &mut f32| {
                    let v = w * if backward { bt(x) } else { fwd_neg(x) };
                    if v < 0.0 {
                        *neg += v;
                    }
                    *slot += v;
                };
                if fi == 0 && gains.max_combine {
                    // continuation past s+d, signed; forward extension only without a
                    // negative continuation
                    let mut cont = (bt(nbv(i, d, ch)) * lpe, false);
                    for e in orth(d) {
                        let v = bt(nbv(i, d, fam[e])) * gains.tpe_gain;
                        if v > cont.0 {
                            cont = (v, true);
                        }
                    }
                    let mut ext = cont;
                    if cont.0 >= 0.0 {
                        let fg = gains.forward_gain;
                        let mut cands = vec![(fg * lpe * nbv(i, d ^ 1, ch), false)];
                        for e in orth(d) {
                            cands.push((fg * gains.tpe_gain * nbv(i, e ^ 1, fam[e]), true));
                        }
                        for c in cands {
                            if c.0 > ext.0 {
                                ext = c;
                            }
                        }
                    } else {
                        dr.neg_in = cont.0;
                    }
                    // a dead end behind, in a one-wide corridor the box cannot enter otherwise
                    let behind = nbv(i, d ^ 1, ch);
                    if behind < 0.0 && geo.orth_walls(i, d) == 2.0 && !geo.boxes[i] {
                        ext = (gains.backtrack_gain * lpe * behind, false);
                        dr.neg_in = ext.0;
                    }
                    if ext.1 {
                        dr.tpe = ext.0;
                    } else {
                        dr.lpe = ext.0;
                    }
                } else if fi == 0 {
                    link(
                        nbv(i, d ^ 1, ch),
                        gains.forward_gain * lpe,
                        false,
                        &mut dr.lpe,
                        &mut dr.neg_in,
                    );
                    link(nbv(i, d, ch), lpe, true, &mut dr.lpe, &mut dr.neg_in);
                    for e in orth(d) {
                        // arrived moving e, leaves moving d
                        link(
                            nbv(i, e ^ 1, fam[e]),
                            gains.forward_gain * gains.tpe_gain,
                            false,
                            &mut dr.tpe,
                            &mut dr.neg_in,
                        );
                        // leaves moving d, then turns to e
                        link(
                            nbv(i, d, fam[e]),
                            gains.tpe_gain,
                            true,
                            &mut dr.tpe,
                            &mut dr.neg_in,
                        );
                    }
                } else {
                    // agent plans flow back from where the agent has to be, along the
                    // strongest continuation
                    let straight = gains.agent_lpe * nbv(i, d, ch);
                    let turn = orth(d)
                        .iter()
                        .map(|&e| gains.agent_tpe * nbv(i, d, fam[e]))
                        .fold(f32::NEG_INFINITY, f32::max);
                    if straight >= turn {
                        dr.lpe = straight.max(0.0);
                    } else {
                        dr.tpe = turn.max(0.0);
                    }
                }
                let own = av(i, ch);
                for e in DIRS {
                    if e != d {
                        let x = av(i, fam[e]);
                        // with max combination a direction is inhibited by how far others lead it
                        let x = if gains.max_combine {
                            x - own.max(0.0)
                        } else {
                            x
                        };
                        dr.wta -= gains.wta_inhibit * if gains.wta_signed { x } else { x.max(0.0) };
                    }
                }
                dr.wta += gains.wta_self[d] * av(i, ch);
                let (legal, u_o) = if fi == 0 {
                    dr.seed = gains.forward_seed * geo.free_box[i] as u8 as f32
                        + gains.seed_gain * geo.backward_seed(i, d);
                    let legal = !geo.wall[i] && !geo.target[i] && !Geo::flag_at(&geo.boxes, fwd);
                    let blocked = geo.wall_at(fwd) as u8 as f32;
                    // no room for the agent behind the box: strongly negative
                    let no_room = geo.wall_at(back) as u8 as f32;
                    (
                        legal,
                        gains.valid_bias * (1.0 - blocked - 2.0 * no_room)
                            + gains.stop_gain * geo.orth_walls(i, d),
                    )
                } else {
                    dr.seed = gains.agent_seed * geo.agent[i] as u8 as f32;
                    // only pushes of boxes that are there
                    let copied = gains.copy_gain
                        * nbv(i, d, map.box_short[d])
                        * Geo::flag_at(&geo.boxes, fwd) as u8 as f32;
                    dr.seed += copied;
                    let legal = !geo.wall[i]
                        && !geo.boxes[i]
                        && !geo.wall_at(fwd)
                        && !Geo::flag_at(&geo.agent, fwd);
                    (legal, gains.valid_bias)
                };
                let k = i * 8 + fi * 4 + d;
                drives[k] = dr;
                let mut u = dr.total();
                if gains.max_combine {
                    // inhibition only silences; negative drive comes from dead ends, and an
                    // obstacle turns any drive into negative activation
                    u = if dr.neg_in < 0.0 {
                        dr.neg_in
                    } else {
                        u.max(0.0)
                    };
                    if u_o < 0.0 {
                        u = u.abs();
                    }
                }
                // steering scales box plan units only
                let steer = if fi == 0 { gains.steer } else { 1.0 };
                gi[k] = (steer * u / amax).tanh();
                gj[k] = legal as u8 as f32;
                go[k] = (steer * u_o).tanh();
            }
        }
    }

    let unit_channel = |k: usize| fams[(k % 8) / 4][k % 4];
    let apply = |site: Site, buf: &mut Vec<f32>| {
        for spec in edits.for_site(tick, site) {
            let mut t = Tensor3::zeros(geo.h, geo.w, cc);
            for k in 0..n * 8 {
                t.data[(k / 8) * cc + unit_channel(k)] = buf[k];
            }
            if spec.apply(&mut t).is_ok() {
                for k in 0..n * 8 {
                    buf[k] = t.data[(k / 8) * cc + unit_channel(k)];
                }
            }
        }
    };
    apply(Site::Gate(Gate::I), &mut gi);
    apply(Site::Gate(Gate::J), &mut gj);
    apply(Site::Gate(Gate::F), &mut gf);
    apply(Site::Gate(Gate::O), &mut go);
    let mut cell: Vec<f32> = (0..n * 8)
        .map(|k| gf[k] * grid.cell.data[(k / 8) * cc + unit_channel(k)] + gi[k] * gj[k])
        .collect();
    apply(Site::Cell, &mut cell);
    let mut out: Vec<f32> = (0..n * 8).map(|k| scale * go[k] * cell[k].tanh()).collect();
    apply(Site::Hidden, &mut out);

    for k in 0..n * 8 {
        let i = k / 8;
        let ch = unit_channel(k);
        next.cell.data[i * cc + ch] = cell[k];
        next.acts.data[i * cc + ch] = out[k];
        let before = av(i, ch);
        if (out[k] - before).abs() >= gains.threshold / 2.0 {
            let kind = attribute(&drives[k], gj[k], go[k], before, out[k]);
            events.push(TraceEvent {
                kind,
                square: Pos::new(i / geo.w, i % geo.w),
                channel: ch,
                tick: tick + 1,
            });
        }
    }

    update_long(&mut next, grid, &drives, map, gains, scale, &geo);
    let transfers = transfer_long_to_short(&next, map, gains, None);
    for i in 0..n {
        for d in DIRS {
            let ch = map.box_short[d];
            let (r, c) = (i / geo.w, i % geo.w);
            if transfers.acts.get(r, c, ch) != next.acts.get(r, c, ch)
                && (transfers.acts.get(r, c, ch) - av(i, ch)).abs() >= gains.threshold / 2.0
            {
                events.retain(|e| !(e.square == Pos::new(r, c) && e.channel == ch));
                events.push(TraceEvent {
                    kind: TraceKind::Transfer,
                    square: Pos::new(r, c),
                    channel: ch,
                    tick: tick + 1,
                });
            }
        }
    }
    (transfers, events)
}

fn attribute(dr: &Drive, j: f32, o: f32, before: f32, after: f32) -> TraceKind {
    if j == 0.0 && before.abs() > after.abs() {
        return TraceKind::Stop;
    }
    if after < before {
        if o < 0.0 && after < 0.0 || dr.neg_in < 0.0 && dr.neg_in <= dr.wta {
            return TraceKind::Backtrack;
        }
        if dr.wta < 0.0 {
            return TraceKind::WtaSuppress;
        }
        return TraceKind::Stop;
    }
    let pos = [
        (dr.seed, TraceKind::Seed),
        (dr.lpe, TraceKind::ExtendLinear),
        (dr.tpe, TraceKind::ExtendTurn),
    ];
    pos.iter()
        .fold((f32::NEG_INFINITY, TraceKind::Seed), |acc, &(v, k)| {
            if v > acc.0 {
                (v, k)
            } else {
                acc
            }
        })
        .1
}

/// Long-term box channels keep a share of directions that lost the competition at a
/// square, and otherwise decay.
fn update_long(
    next: &mut PlanGrid,
    prev: &PlanGrid,
    drives: &[Drive],
    map: &ChannelMap,
    gains: &MechanismGains,
    scale: f32,
    geo: &Geo,
) {
    let cc = next.acts.channels;
    for i in 0..geo.h * geo.w {
        let short: Vec<f32> = map
            .box_short
            .iter()
            .map(|&ch| next.acts.data[i * cc + ch])
            .collect();
        for d in DIRS {
            let ch = map.box_long[d];
            let mut v = gains.long_decay * prev.acts.data[i * cc + ch];
            if gains.long_gain > 0.0 {
                let dr = drives[i * 8 + d];
                let unsuppressed =
                    scale * ((gains.steer * (dr.total() - dr.wta) / gains.a_max).tanh()).tanh();
                let other_wins = DIRS.iter().any(|&e| e != d && short[e] >= gains.threshold);
                if other_wins && short[d] < gains.threshold && unsuppressed >= gains.threshold {
                    v = v.max(gains.long_gain * unsuppressed);
                }
            }
            next.acts.data[i * cc + ch] = v;
        }
    }
}

/// Long-term activation enters the short-term channel of its direction only while no
/// other short-term direction at that square is at or above threshold. `executed` clears
/// the short-term activation of a move that was just taken.
pub fn transfer_long_to_short(
    grid: &PlanGrid,
    map: &ChannelMap,
    gains: &MechanismGains,
    executed: Option<(Pos, Action)>,
) -> PlanGrid {
    let mut g = grid.clone();
    if let Some((p, d)) = executed {
        g.set(p, map.box_short[d.index()], 0.0);
    }
    let theta = gains.threshold;
    for r in 0..g.acts.height {
        for c in 0..g.acts.width {
            let p = Pos::new(r, c);
            for d in DIRS {
                let long = g.get(p, map.box_long[d]);
                if long < theta {
                    continue;
                }
                let blocked = DIRS
                    .iter()
                    .any(|&e| e != d && g.get(p, map.box_short[e]) >= theta);
                let short = g.get(p, map.box_short[d]);
                if blocked {
                    g.set(p, map.box_short[d], short.min(0.0));
                } else if short < long {
                    g.set(p, map.box_short[d], long);
                }
            }
        }
    }
    g
}

/// Per square: strongest short-term box direction at or above `theta`, else the strongest
/// long-term one.
pub fn decode_plan(grid: &PlanGrid, map: &ChannelMap, theta: f32) -> Plan {
    let (h, w) = (grid.acts.height, grid.acts.width);
    let mut arrows = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let best = |chs: [usize; 4]| {
                let mut b: Option<(usize, f32)> = None;
                for (d, &ch) in chs.iter().enumerate() {
                    let v = grid.acts.get(r, c, ch);
                    if v >= theta && b.is_none_or(|(_, bv)| v > bv) {
                        b = Some((d, v));
                    }
                }
                b
            };
            let arrow = match best(map.box_short) {
                Some((d, v)) => Some(Arrow {
                    dir: Action::from_index(d),
                    horizon: Horizon::Short,
                    strength: v,
                }),
                None => best(map.box_long).map(|(d, v)| Arrow {
                    dir: Action::from_index(d),
                    horizon: Horizon::Long,
                    strength: v,
                }),
            };
            arrows.push(arrow);
        }
    }
    Plan {
        height: h,
        width: w,
        arrows,
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Readout {
    pub action: Action,
    /// PNA value per direction.
    pub pna: [f32; 4],
    /// True when no direction reached threshold; `action` is then a wait move.
    pub no_plan: bool,
}

/// GNA at the agent square, PNA by max-pooling, argmax with ties to the earlier of
/// Up, Down, Left, Right. `edits` on GNA channels apply before pooling, on PNA channels after.
pub fn readout_action(
    grid: &PlanGrid,
    map: &ChannelMap,
    level: &Level,
    gains: &MechanismGains,
) -> (Readout, PlanGrid) {
    readout_action_with(grid, map, level, gains, &[])
}

pub fn readout_action_with(
    grid: &PlanGrid,
    map: &ChannelMap,
    level: &Level,
    gains: &MechanismGains,
    edits: &[InterventionSpec],
) -> (Readout, PlanGrid) {
    let mut g = grid.clone();
    let (h, w) = (g.acts.height, g.acts.width);
    let agent = level.agent();
    for r in 0..h {
        for c in 0..w {
            for d in DIRS {
                let v = if Pos::new(r, c) == agent {
                    g.acts.get(r, c, map.agent_short[d])
                        - gains.gna_box_weight * g.acts.get(r, c, map.box_short[d])
                } else {
                    0.0
                };
                g.acts.set(r, c, map.gna[d], v);
            }
        }
    }
    let touches = |e: &InterventionSpec, group: &[usize; 4]| {
        e.site == Site::Hidden && e.channels.iter().any(|c| group.contains(c))
    };
    for e in edits.iter().filter(|e| touches(e, &map.gna)) {
        let _ = e.apply(&mut g.acts);
    }
    let mut pna = [f32::NEG_INFINITY; 4];
    for r in 0..h {
        for c in 0..w {
            for d in DIRS {
                pna[d] = pna[d].max(g.acts.get(r, c, map.gna[d]));
            }
        }
    }
    for r in 0..h {
        for c in 0..w {
            for d in DIRS {
                g.acts.set(r, c, map.pna[d], pna[d]);
            }
        }
    }
    for e in edits.iter().filter(|e| touches(e, &map.pna)) {
        let _ = e.apply(&mut g.acts);
    }
    // pooled value read back from the agent square after any edit
    for d in DIRS {
        pna[d] = g.acts.get(agent.row, agent.col, map.pna[d]);
    }
    let mut best = 0;
    for d in 1..4 {
        if pna[d] > pna[best] {
            best = d;
        }
    }
    let no_plan = pna[best] < gains.threshold;
    let action = if no_plan {
        wait_action(level)
            .or_else(|| safe_action(level, &pna))
            .unwrap_or(Action::from_index(best))
    } else {
        Action::from_index(best)
    };
    (
        Readout {
            action,
            pna,
            no_plan,
        },
        g,
    )
}

/// A move into a wall, which leaves the level unchanged.
pub fn wait_action(level: &Level) -> Option<Action> {
    Action::ALL.into_iter().find(|&a| {
        level
            .neighbour(level.agent(), a)
            .is_none_or(|p| level.is_wall(p))
    })
}

/// Strongest move that pushes no box, for when there is no wait move.
fn safe_action(level: &Level, pna: &[f32; 4]) -> Option<Action> {
    let mut best: Option<Action> = None;
    for a in Action::ALL {
        let free = level
            .neighbour(level.agent(), a)
            .is_some_and(|p| !level.tile(p).has_box());
        if free && best.is_none_or(|b| pna[a.index()] > pna[b.index()]) {
            best = Some(a);
        }
    }
    best
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("level_after is not the result of {0} on level_before")]
pub struct TransitionError(pub Action);

/// Refresh entities from `after` and cancel the executed moves in the plan.
pub fn apply_transition_update(
    grid: &PlanGrid,
    before: &Level,
    action: Action,
    after: &Level,
    map: &ChannelMap,
    gains: &MechanismGains,
) -> Result<PlanGrid, TransitionError> {
    let out = before.step(action);
    if out.next.tiles() != after.tiles() {
        return Err(TransitionError(action));
    }
    let mut g = grid.clone();
    write_entities(&mut g, &Geo::new(after), map);
    if after.agent() == before.agent() {
        return Ok(g);
    }
    let d = action.index();
    let p = before.agent();
    let v = g.get(p, map.agent_short[d]);
    g.set(p, map.agent_short[d], v - v);
    g.cell.set(p.row, p.col, map.agent_short[d], 0.0);
    let executed = out.moved_box.map(|(from, dir)| {
        g.cell
            .set(from.row, from.col, map.box_short[dir.index()], 0.0);
        (from, dir)
    });
    Ok(transfer_long_to_short(&g, map, gains, executed))
}

/// Edit helper: `alpha = 0`, `c = value` on given channels at one square.
pub fn overwrite(channels: Vec<usize>, square: Pos, value: f32) -> InterventionSpec {
    InterventionSpec {
        layer: 0,
        site: Site::Hidden,
        channels,
        squares: Some(vec![square]),
        ticks: None,
        edit: Edit::Affine {
            alpha: 0.0,
            c: vec![value],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_sizes() {
        let m = default_channel_map(32).unwrap();
        assert_eq!(m.assigned().len(), 24);
        assert_eq!(m.spares().len(), 8);
        assert_eq!(default_channel_map(24).unwrap().spares().len(), 0);
        assert_eq!(default_channel_map(16), Err(ChannelMapError(16)));
        let mut a = m.assigned();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 24);
    }

    #[test]
    fn defaults_valid() {
        MechanismGains::default().validate().unwrap();
    }
}
