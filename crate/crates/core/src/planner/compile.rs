//! Hand-set DRC(1,1) weights that reproduce the box-plan part of the engine.
//!
//! Tick 0 detects entities from pixels; from tick 1 on, the box plan channels follow the
//! engine update, so the net after `k + 2` ticks matches `init_plan` followed by `k` ticks.
//! Off-grid squares read as open in the net, so levels must be enclosed by walls.

use super::{default_channel_map, ChannelMap, MechanismGains, Plan, PlanGrid};
use crate::net::{drc_forward, DrcConfig, DrcState, Gate, GateWeights, Kernel, WeightSet};
use crate::sokoban::Level;
use crate::tensor::Tensor3;
use thiserror::Error;

/// Engine ticks after seeding covered by the validation comparison.
pub const VALIDATION_TICKS: usize = 12;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CompileScope {
    /// Seeds, linear and turn extension, stops and winner-take-all.
    ExtensionStoppingWta,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("need at least {needed} channels, got {got}")]
    Channels { needed: usize, got: usize },
    #[error("{0} cannot be expressed by one ConvLSTM layer")]
    Unsupported(&'static str),
    #[error("invalid gains: {0}")]
    Gains(#[from] super::GainsError),
}

const BIG: f32 = 20.0;
/// Steepness of pixel thresholds.
const K_PIX: f32 = 1000.0;
/// Steepness of exact-zero detectors.
const K_ZERO: f32 = 100.0;
/// Steepness of the legality gate.
const K_LEGAL: f32 = 60.0;

/// Encoder output layout: pixel RGB at the square (0..3), then at two squares away in
/// each direction (3 + 3d ..).
fn enc_channel(offset: Option<usize>, rgb: usize) -> usize {
    offset.map_or(rgb, |d| 3 + 3 * d + rgb)
}

const R: usize = 0;
const G: usize = 1;
const B: usize = 2;

fn px(v: u8) -> f32 {
    v as f32 / 255.0
}

/// Hidden channels used by the compiled net beyond the map's box and entity channels.
struct Aux {
    free_box: usize,
    constant: usize,
    near2: [usize; 4],
    near3: [usize; 4],
}

fn allocate(map: &ChannelMap) -> Option<Aux> {
    let mut pool = map.spares();
    pool.extend(map.agent_short);
    pool.extend(map.gna);
    pool.extend(map.pna);
    if pool.len() < 10 {
        return None;
    }
    let t = |k: usize| [pool[k], pool[k + 1], pool[k + 2], pool[k + 3]];
    Some(Aux {
        free_box: pool[0],
        constant: pool[1],
        near2: t(2),
        near3: t(6),
    })
}

/// Build weights for a single-layer, single-tick DRC.
pub fn compile_to_weights(
    map: &ChannelMap,
    gains: &MechanismGains,
    scope: CompileScope,
    height: usize,
    width: usize,
) -> Result<WeightSet, CompileError> {
    let CompileScope::ExtensionStoppingWta = scope;
    gains.validate()?;
    if gains.backtrack_gain != 1.0
        || gains.forward_negative != 1.0
        || !gains.wta_signed
        || gains.max_combine
    {
        return Err(CompileError::Unsupported("sign-dependent extension"));
    }
    if gains.long_gain != 0.0 {
        return Err(CompileError::Unsupported("long-term population"));
    }
    let c = map.channels;
    if c < 24 {
        return Err(CompileError::Channels { needed: 24, got: c });
    }
    let aux = allocate(map).ok_or(CompileError::Channels { needed: 24, got: c })?;

    let config = DrcConfig {
        layers: 1,
        ticks: 1,
        channels: c,
        height,
        width,
    };
    let mut ws = WeightSet::zeros(config);
    ws.head = None;

    // encoder: copy pixels, and pixels two squares away per direction
    for k in 0..3 {
        ws.enc1
            .kernel
            .set_offset(enc_channel(None, k), k, 0, 0, 1.0);
        ws.enc2
            .kernel
            .set_offset(enc_channel(None, k), enc_channel(None, k), 0, 0, 1.0);
        for d in 0..4 {
            let (dr, dc) = crate::sokoban::Action::from_index(d).delta();
            let ch = enc_channel(Some(d), k);
            ws.enc1.kernel.set_offset(ch, k, dr, dc, 1.0);
            ws.enc2.kernel.set_offset(ch, ch, dr, dc, 1.0);
        }
    }

    let lw = &mut ws.layers[0];
    for g in Gate::ALL {
        let gw = lw.gate_mut(g);
        for o in 0..c {
            gw.bias[o] = match g {
                Gate::F => -100.0,
                _ => 0.0,
            };
        }
    }
    let [gi, gj, _, go] = &mut lw.gates;
    let always = |gw: &mut GateWeights, o: usize| gw.bias[o] = BIG;

    // pixel detectors: linear functional of pixels at an encoder offset, read at a gate offset
    struct Px<'a> {
        gw: &'a mut GateWeights,
    }
    impl Px<'_> {
        fn term(&mut self, o: usize, off: Option<usize>, rgb: usize, at: (isize, isize), w: f32) {
            self.gw
                .we
                .add_offset(o, enc_channel(off, rgb), at.0, at.1, w);
        }
        fn sum(&mut self, o: usize, off: Option<usize>, at: (isize, isize), w: f32) {
            for k in 0..3 {
                self.term(o, off, k, at, w);
            }
        }
    }
    let here = (0isize, 0isize);

    // wall: sum of channels below 0.4
    always(gi, map.wall);
    always(go, map.wall);
    Px { gw: gj }.sum(map.wall, None, here, -K_PIX);
    gj.bias[map.wall] = 0.4 * K_PIX;

    // target without box: red minus blue above 0.457, green not the box-on-target green
    let target_gates = |gi: &mut GateWeights,
                        gj: &mut GateWeights,
                        o: usize,
                        off: Option<usize>,
                        at: (isize, isize)| {
        let mut pj = Px { gw: gj };
        pj.term(o, off, R, at, K_PIX);
        pj.term(o, off, B, at, -K_PIX);
        gj.bias[o] = -0.457 * K_PIX;
        Px { gw: gi }.term(o, off, G, at, K_ZERO);
        gi.bias[o] = -px(95) * K_ZERO;
    };
    target_gates(gi, gj, map.target, None, here);
    always(go, map.target);

    // box: (140 - G) + (100 - B) > 0 and not a wall
    let box_j = |gj: &mut GateWeights, o: usize| {
        let mut p = Px { gw: gj };
        p.term(o, None, G, here, -K_PIX);
        p.term(o, None, B, here, -K_PIX);
        gj.bias[o] = (px(140) + px(100)) * K_PIX;
    };
    box_j(gj, map.boxes);
    Px { gw: gi }.sum(map.boxes, None, here, K_ZERO);
    always(go, map.boxes);

    // free box: box, red not the box-on-target red, not a wall
    box_j(gj, aux.free_box);
    Px { gw: gi }.term(aux.free_box, None, R, here, -K_ZERO);
    gi.bias[aux.free_box] = px(254) * K_ZERO;
    Px { gw: go }.sum(aux.free_box, None, here, K_ZERO);

    // agent: green above 169, blue not the floor blue
    Px { gw: gj }.term(map.agent, None, G, here, K_PIX);
    gj.bias[map.agent] = -px(169) * K_PIX;
    Px { gw: gi }.term(map.agent, None, B, here, -K_ZERO);
    gi.bias[map.agent] = px(238) * K_ZERO;
    always(go, map.agent);

    always(gi, aux.constant);
    always(gj, aux.constant);
    always(go, aux.constant);

    for d in 0..4 {
        let (dr, dc) = crate::sokoban::Action::from_index(d).delta();
        // free target two squares ahead
        let n2 = aux.near2[d];
        target_gates(gi, gj, n2, Some(d), here);
        always(go, n2);
        // free target three squares ahead, the square before it open
        let n3 = aux.near3[d];
        target_gates(gi, gj, n3, Some(d), (dr, dc));
        Px { gw: go }.sum(n3, Some(d), here, K_ZERO);
    }

    plan_gates(lw, map, &aux, gains);
    Ok(ws)
}

/// Box plan units read the previous hidden state only.
fn plan_gates(
    lw: &mut crate::net::LayerWeights,
    map: &ChannelMap,
    aux: &Aux,
    gains: &MechanismGains,
) {
    let kappa = 1.0 / 1f32.tanh();
    let steer = gains.steer;
    let [gi, gj, _, go] = &mut lw.gates;
    let (ki, kj, ko): (&mut Kernel, &mut Kernel, &mut Kernel) =
        (&mut gi.wh2, &mut gj.wh2, &mut go.wh2);
    for d in 0..4 {
        let o = map.box_short[d];
        let dir = crate::sokoban::Action::from_index(d);
        let (dr, dc) = dir.delta();
        let seed = steer * gains.seed_gain * kappa / gains.a_max;
        ki.add_offset(
            o,
            aux.free_box,
            0,
            0,
            steer * gains.forward_seed * kappa / gains.a_max,
        );
        ki.add_offset(o, map.target, dr, dc, seed);
        ki.add_offset(o, aux.near2[d], 0, 0, seed);
        ki.add_offset(o, aux.near3[d], 0, 0, seed);
        let link = steer * kappa;
        ki.add_offset(o, o, -dr, -dc, link * gains.forward_gain * gains.lpe());
        ki.add_offset(o, o, dr, dc, link * gains.lpe());
        for e in dir.orthogonal() {
            let (er, ec) = e.delta();
            let oe = map.box_short[e.index()];
            ki.add_offset(o, oe, -er, -ec, link * gains.forward_gain * gains.tpe_gain);
            ki.add_offset(o, oe, dr, dc, link * gains.tpe_gain);
        }
        for e in 0..4 {
            let w = if e == d {
                gains.wta_self[d]
            } else {
                -gains.wta_inhibit
            };
            ki.add_offset(o, map.box_short[e], 0, 0, link * w);
        }

        gj.bias[o] = 0.5 * K_LEGAL;
        kj.add_offset(o, map.wall, 0, 0, -K_LEGAL * kappa);
        kj.add_offset(o, map.target, 0, 0, -K_LEGAL * kappa);
        kj.add_offset(o, map.boxes, dr, dc, -K_LEGAL * kappa);

        ko.add_offset(o, aux.constant, 0, 0, steer * gains.valid_bias * kappa);
        ko.add_offset(o, map.wall, dr, dc, -steer * gains.valid_bias * kappa);
        ko.add_offset(
            o,
            map.wall,
            -dr,
            -dc,
            -2.0 * steer * gains.valid_bias * kappa,
        );
        for e in dir.orthogonal() {
            let (er, ec) = e.delta();
            ko.add_offset(o, map.wall, er, ec, steer * gains.stop_gain * kappa);
        }
    }
}

/// Engine-scaled view of a compiled net's hidden state.
pub fn net_plan_grid(h: &Tensor3, map: &ChannelMap, gains: &MechanismGains) -> PlanGrid {
    let kappa = 1.0 / 1f32.tanh();
    let mut g = PlanGrid::zeros(h.height, h.width, map.channels);
    for r in 0..h.height {
        for c in 0..h.width {
            for d in 0..4 {
                g.acts.set(
                    r,
                    c,
                    map.box_short[d],
                    kappa * gains.a_max * h.get(r, c, map.box_short[d]),
                );
                g.acts.set(
                    r,
                    c,
                    map.box_long[d],
                    kappa * gains.a_max * h.get(r, c, map.box_long[d]),
                );
            }
            for ch in [map.wall, map.target, map.boxes, map.agent] {
                g.acts.set(r, c, ch, kappa * h.get(r, c, ch));
            }
        }
    }
    g
}

pub fn decode_net_plan(h: &Tensor3, map: &ChannelMap, gains: &MechanismGains) -> Plan {
    super::decode_plan(&net_plan_grid(h, map, gains), map, gains.threshold)
}

const VALIDATION: [&str; 12] = [
    // straight
    "#######\n#@$  .#\n#######",
    "###\n#@#\n#$#\n# #\n# #\n#.#\n###",
    "########\n#      #\n# @$  .#\n#      #\n########",
    // turn
    "######\n#@$  #\n#### #\n#### #\n####.#\n######",
    "#######\n#     #\n#@$   #\n##### #\n##### #\n#####.#\n#######",
    "#######\n#.    #\n#   $ #\n#   @ #\n#     #\n#######",
    // stop
    "########\n#@$ .  #\n########",
    "#########\n#@$ $ ..#\n#########",
    "#######\n##   ##\n#@$   #\n##   ##\n###.###\n#######",
    // conflict
    "#######\n#@    #\n# $## #\n# #   #\n# #   #\n#    .#\n#######",
    "########\n#@ $  .#\n#      #\n#. $   #\n########",
    "#########\n#   .   #\n#   $   #\n#  @    #\n#.  $   #\n#########",
];

/// Small levels covering straight runs, turns, stops and competing directions.
pub fn validation_levels() -> Vec<Level> {
    VALIDATION
        .iter()
        .map(|s| Level::parse(s).expect("validation level"))
        .collect()
}

/// Result of comparing a compiled net with the engine on one validation level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompileCheck {
    pub level: usize,
    /// Ticks after seeding (0 to `VALIDATION_TICKS`) where the decoded plans differ.
    pub mismatched_ticks: Vec<usize>,
}

/// Compile weights for each validation level and compare decoded plans with the engine
/// after seeding and after every further tick.
pub fn compile_validation(
    map: &ChannelMap,
    gains: &MechanismGains,
) -> Result<Vec<CompileCheck>, CompileError> {
    validation_levels()
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let ws = compile_to_weights(
                map,
                gains,
                CompileScope::ExtensionStoppingWta,
                l.height(),
                l.width(),
            )?;
            let obs = l.render_rgb();
            let step = |st: &DrcState, k: usize| {
                drc_forward(st, &obs, &ws, k, &[], false)
                    .expect("compiled shapes")
                    .state
            };
            let mut st = step(&DrcState::zeros(&ws.config, l.height(), l.width()), 2);
            let mut g = super::init_plan(l, map, gains);
            let mut mismatched_ticks = Vec::new();
            for k in 0..=VALIDATION_TICKS {
                if decode_net_plan(&st.layers[0].h, map, gains).shape()
                    != super::decode_plan(&g, map, gains.threshold).shape()
                {
                    mismatched_ticks.push(k);
                }
                st = step(&st, 1);
                g = super::tick_plan(&g, l, map, gains).0;
            }
            Ok(CompileCheck {
                level: n,
                mismatched_ticks,
            })
        })
        .collect()
}

/// Map used when compiling for `channels` channels.
pub fn compile_map(channels: usize) -> Result<ChannelMap, CompileError> {
    default_channel_map(channels).map_err(|e| CompileError::Channels {
        needed: 24,
        got: e.0,
    })
}
