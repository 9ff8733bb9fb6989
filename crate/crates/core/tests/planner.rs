mod common;

use drcplan::harness::{random_rooms, ROOMS_SEED};
use drcplan::net::{Edit, InterventionSpec, Site};
use drcplan::planner::*;
use drcplan::sokoban::*;
use proptest::prelude::*;

fn map() -> ChannelMap {
    default_channel_map(32).unwrap()
}

fn run(level: &Level, gains: &MechanismGains, opts: &RunOptions) -> Episode {
    run_planner(level, &map(), gains, opts, &PlannerEdits::default())
}

#[test]
fn channel_map_layout() {
    assert_eq!(default_channel_map(23), Err(ChannelMapError(23)));
    let m = map();
    assert_eq!(m.assigned().len(), MAP_SIZE);
    assert_eq!(m.spares(), (24..32).collect::<Vec<_>>());
    assert_eq!(m.role(m.box_short[3]), "box_short_right");
    assert_eq!(m.role(m.wall), "wall");
    assert_eq!(m.role(30), "spare30");
}

#[test]
fn gains_validate_and_parse() {
    let mut g = MechanismGains::default();
    assert!(g.validate().is_ok());
    assert_eq!(g.set("threshold", "0.4"), Ok(true));
    assert_eq!(g.threshold, 0.4);
    assert_eq!(g.set("no_such_gain", "1"), Ok(false));
    assert!(g.set("threshold", "high").is_err());
    g.tpe_gain = g.lpe_gain;
    assert!(matches!(
        g.validate(),
        Err(GainsError::LpeNotAboveTpe { .. })
    ));
    let bad = MechanismGains {
        threshold: 0.0,
        ..Default::default()
    };
    assert_eq!(bad.validate(), Err(GainsError::Range("threshold")));
    let s = MechanismGains::default().steered(1.3);
    assert_eq!(s.steer, 1.3);
}

#[test]
fn corridor_plan_runs_box_to_target() {
    let level = Level::parse("#########\n#@$    .#\n#########").unwrap();
    let m = map();
    let gains = MechanismGains::default();
    let mut g = init_plan(&level, &m, &gains);
    for _ in 0..10 {
        g = tick_plan(&g, &level, &m, &gains).0;
    }
    let plan = decode_plan(&g, &m, gains.threshold);
    for c in 2..7 {
        assert_eq!(
            plan.at(Pos::new(1, c)).map(|a| a.dir),
            Some(Action::Right),
            "col {c}\n{plan}"
        );
    }
    assert_eq!(plan.at(Pos::new(1, 1)).map(|a| a.dir), None, "{plan}");
    let (ro, _) = readout_action(&g, &m, &level, &gains);
    assert_eq!(ro.action, Action::Right);
    assert!(!ro.no_plan);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn activations_stay_bounded(room in 0usize..40, ticks in 1usize..25) {
        let level = random_rooms(40, 3)[room].clone();
        let m = map();
        let gains = MechanismGains::default();
        let mut g = init_plan(&level, &m, &gains);
        for _ in 0..ticks {
            g = tick_plan(&g, &level, &m, &gains).0;
        }
        for ch in m.plan_channels() {
            for v in g.acts.channel_values(ch) {
                prop_assert!(v.is_finite() && v.abs() <= gains.a_max + 1e-5);
            }
        }
    }
}

#[test]
fn episodes_replay_on_an_independent_engine() {
    let opts = RunOptions::default();
    for level in random_rooms(30, ROOMS_SEED) {
        let ep = run(&level, &MechanismGains::default(), &opts);
        let moves = format_actions(&ep.actions());
        assert_eq!(
            ep.solved,
            common::replay_solves(&level.to_string(), &moves),
            "{level}{moves}"
        );
        assert_eq!(ep.level.replay(&ep.actions()).0, ep.final_level);
        assert_eq!(ep.grids.len(), ep.len());
        assert!(ep.len() <= opts.max_steps);
    }
}

#[test]
fn episodes_are_deterministic() {
    let level = generate_case_level(CaseKind::Zigzag, 12).unwrap();
    let opts = RunOptions {
        record_ticks: true,
        record_trace: true,
        ..Default::default()
    };
    let a = run(&level, &MechanismGains::default(), &opts);
    let b = run(&level, &MechanismGains::default(), &opts);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.grids, b.grids);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.tick_grids.len(), 1 + a.len() * opts.ticks_per_step);
}

#[test]
fn trace_names_the_mechanisms() {
    let kinds = |level: &Level, ticks: usize| -> Vec<TraceKind> {
        let (m, gains) = (map(), MechanismGains::default());
        let mut g = init_plan(level, &m, &gains);
        let mut all = Vec::new();
        for _ in 0..ticks {
            let (next, events) = tick_plan(&g, level, &m, &gains);
            all.extend(events.into_iter().map(|e| e.kind));
            g = next;
        }
        all
    };
    let bt = kinds(&generate_case_level(CaseKind::Backtrack, 20).unwrap(), 20);
    for k in [
        TraceKind::Seed,
        TraceKind::ExtendLinear,
        TraceKind::ExtendTurn,
        TraceKind::Backtrack,
    ] {
        assert!(bt.contains(&k), "backtrack level has no {}", k.name());
    }
    let tp = kinds(&generate_case_level(CaseKind::TwoPaths, 7).unwrap(), 10);
    assert!(tp.contains(&TraceKind::WtaSuppress));
}

#[test]
fn gna_edit_steers_the_readout() {
    let level = Level::parse("#########\n#@$    .#\n#       #\n#########").unwrap();
    let (m, gains) = (map(), MechanismGains::default());
    let mut g = init_plan(&level, &m, &gains);
    for _ in 0..6 {
        g = tick_plan(&g, &level, &m, &gains).0;
    }
    let a = level.agent();
    let edits = vec![
        InterventionSpec::affine(0, Site::Hidden, vec![m.gna[1]], 0.0, 2.0).at_squares(vec![a]),
        InterventionSpec::affine(
            0,
            Site::Hidden,
            vec![m.gna[0], m.gna[2], m.gna[3]],
            0.0,
            -2.0,
        )
        .at_squares(vec![a]),
    ];
    let (ro, _) = readout_action_with(&g, &m, &level, &gains, &edits);
    assert_eq!(ro.action, Action::Down);
    let (base, _) = readout_action(&g, &m, &level, &gains);
    assert_eq!(base.action, Action::Right);
}

#[test]
fn abs_forcing_keeps_a_dead_end_alive() {
    let level = generate_case_level(CaseKind::Backtrack, 20).unwrap();
    let [_, _, d3] = backtrack_decision_nodes(20);
    let (m, gains) = (map(), MechanismGains::default());
    let right = m.box_short[Action::Right.index()];
    let spec = InterventionSpec {
        layer: 0,
        site: Site::Hidden,
        channels: vec![right],
        squares: Some(vec![Pos::new(d3.0, d3.1)]),
        ticks: None,
        edit: Edit::Abs,
    };
    let mut g = init_plan(&level, &m, &gains);
    for _ in 0..30 {
        g = tick_plan_with(
            &g,
            &level,
            &m,
            &gains,
            &TickEdits {
                edits: std::slice::from_ref(&spec),
            },
        )
        .0;
        assert!(g.get(Pos::new(d3.0, d3.1), right) >= 0.0);
    }
}

#[test]
fn cached_plan_channels_hurt_more_than_cached_entities() {
    let levels: Vec<Level> = drcplan::harness::bundled_suite()
        .into_iter()
        .map(|e| e.level)
        .take(30)
        .collect();
    let m = map();
    let gains = MechanismGains::default();
    let opts = RunOptions::default();
    let rate = |cache: Vec<usize>| {
        let edits = PlannerEdits {
            cache_channels: cache,
            ..Default::default()
        };
        levels
            .iter()
            .filter(|l| run_planner(l, &m, &gains, &opts, &edits).solved)
            .count()
    };
    let base = rate(Vec::new());
    let plan = rate(m.plan_channels());
    let entities = rate(vec![m.wall, m.target, m.boxes, m.agent]);
    assert!(plan < base, "plan cache {plan} vs base {base}");
    assert!(
        entities > plan,
        "entity cache {entities} vs plan cache {plan}"
    );
}

#[test]
fn compile_rejects_small_maps_and_keeps_shapes() {
    assert!(matches!(
        compile_map(20),
        Err(CompileError::Channels { .. })
    ));
    let m = compile_map(32).unwrap();
    let gains = MechanismGains::default().compilable();
    let ws = compile_to_weights(&m, &gains, CompileScope::ExtensionStoppingWta, 7, 9).unwrap();
    assert_eq!(
        (ws.config.layers, ws.config.ticks, ws.config.channels),
        (1, 1, 32)
    );
    assert!(compile_to_weights(
        &m,
        &MechanismGains::default(),
        CompileScope::ExtensionStoppingWta,
        7,
        9
    )
    .is_err());
}

#[test]
fn long_plans_wait_for_the_short_square_to_clear() {
    let level = Level::parse("#####\n#@$.#\n#   #\n#####").unwrap();
    let (m, gains) = (map(), MechanismGains::default());
    let p = Pos::new(2, 2);
    let (right, down) = (Action::Right.index(), Action::Down.index());
    let mut g = PlanGrid::zeros(level.height(), level.width(), m.channels);
    assert_eq!(transfer_long_to_short(&g, &m, &gains, None), g);
    g.set(p, m.box_short[right], 1.0);
    g.set(p, m.box_long[down], 0.8);
    let held = transfer_long_to_short(&g, &m, &gains, None);
    assert!(held.get(p, m.box_short[down]) < gains.threshold);
    let moved = transfer_long_to_short(&held, &m, &gains, Some((p, Action::Right)));
    assert_eq!(moved.get(p, m.box_short[right]), 0.0);
    assert!(moved.get(p, m.box_short[down]) >= gains.threshold);
}
