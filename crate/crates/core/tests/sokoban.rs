mod common;

use drcplan::harness::{random_rooms, ROOMS_SEED};
use drcplan::sokoban::*;
use proptest::prelude::*;
use std::path::Path;

fn index(l: &Level, p: Pos) -> usize {
    p.row * l.width() + p.col
}

fn moves() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![Just('u'), Just('d'), Just('l'), Just('r')],
        0..40,
    )
    .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn engine_matches_reference(room in 0usize..30, seq in moves()) {
        let level = random_rooms(30, ROOMS_SEED)[room].clone();
        let text = level.to_string();
        let (end, _) = level.replay(&parse_actions(&seq).unwrap());
        let (agent, boxes) = common::walk(&text, &seq);
        prop_assert_eq!(index(&end, end.agent()), agent);
        let mut got: Vec<usize> = end.boxes().into_iter().map(|p| index(&end, p)).collect();
        got.sort();
        prop_assert_eq!(got, boxes);
        prop_assert!(end.check_invariants());
        prop_assert_eq!(end.is_solved(), common::replay_solves(&text, &seq));
    }

    #[test]
    fn render_round_trips(room in 0usize..30, seq in moves()) {
        let mut level = random_rooms(30, ROOMS_SEED)[room].clone();
        level.id = None;
        let (end, _) = level.replay(&parse_actions(&seq).unwrap());
        let back = Level::from_rgb(&end.render_rgb()).unwrap();
        prop_assert_eq!(back.to_string(), end.to_string());
        prop_assert_eq!(Level::parse(&end.to_string()).unwrap().to_string(), end.to_string());
    }
}

#[test]
fn oracle_is_shortest_on_random_rooms() {
    for level in random_rooms(24, 5) {
        let text = level.to_string();
        match solve_oracle(&level, DEFAULT_NODE_BUDGET) {
            OracleResult::Solved(sol) => {
                assert!(common::replay_solves(&text, &format_actions(&sol)));
                assert_eq!(
                    common::iddfs_length(&text, sol.len()),
                    Some(sol.len()),
                    "{text}"
                );
            }
            OracleResult::Unsolvable => assert_eq!(common::iddfs_length(&text, 14), None, "{text}"),
            OracleResult::BudgetExhausted => panic!("budget exhausted on\n{text}"),
        }
    }
}

#[test]
fn oracle_reports_unsolvable_and_budget() {
    let dead = Level::parse("#####\n#@ $#\n#. ##\n#####").unwrap();
    assert_eq!(
        solve_oracle(&dead, DEFAULT_NODE_BUDGET),
        OracleResult::Unsolvable
    );
    let open = Level::parse("########\n#@     #\n# $  $ #\n#      #\n#.    .#\n########").unwrap();
    assert_eq!(solve_oracle(&open, 3), OracleResult::BudgetExhausted);
}

#[test]
fn rewards_follow_box_events() {
    let l = Level::parse("######\n#@$ .#\n######").unwrap();
    let o = l.step(Action::Right);
    assert_eq!(o.reward, STEP_REWARD);
    assert_eq!(o.moved_box, Some((Pos::new(1, 2), Action::Right)));
    let o = o.next.step(Action::Right);
    assert!(o.solved);
    assert_eq!(o.reward, STEP_REWARD + BOX_ON_REWARD + SOLVE_REWARD);
    let blocked = o.next.step(Action::Right);
    assert_eq!(blocked.next.agent(), o.next.agent());
    assert_eq!(blocked.reward, STEP_REWARD);
}

#[test]
fn parse_errors_name_the_problem() {
    assert_eq!(Level::parse(""), Err(ParseError::Empty));
    assert_eq!(Level::parse("###\n#$.\n###"), Err(ParseError::NoAgent));
    assert!(matches!(Level::parse("####\n#@@$.\n####"), Err(_)));
    assert!(matches!(
        Level::parse("#####\n#@$.#\n#x  #\n#####"),
        Err(ParseError::UnknownChar {
            ch: 'x',
            line: 3,
            col: 2
        })
    ));
    assert!(matches!(Level::parse("#####\n#@$$.#\n#####"), Err(_)));
}

#[test]
fn boxoban_files_and_directories() {
    let dir = std::env::temp_dir().join(format!("drcplan-boxoban-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("b.txt"), "; 7\n#####\n#@$.#\n#####\n").unwrap();
    std::fs::write(
        dir.join("a.txt"),
        "; 3\n######\n#@$ .#\n######\n\n; 4\n#####\n#.$@#\n#####\n",
    )
    .unwrap();
    let levels = load_boxoban_dir(&dir).unwrap();
    assert_eq!(
        levels.iter().map(|l| l.id).collect::<Vec<_>>(),
        vec![Some(3), Some(4), Some(7)]
    );
    std::fs::write(dir.join("c.txt"), "; 9\n#####\n#@$.#\n#x###\n").unwrap();
    match load_boxoban_dir(&dir) {
        Err(BoxobanError::Malformed { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a malformed-level error, got {other:?}"),
    }
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(parse_boxoban_text("", Path::new("x")).unwrap().is_empty());
}

#[test]
fn case_levels_are_solvable_at_every_size() {
    for kind in CaseKind::ALL {
        let (min, max) = kind.bounds();
        assert!(generate_case_level(kind, min - 1).is_err());
        for n in [min, (min + max) / 2] {
            let l = generate_case_level(kind, n).unwrap();
            assert!(l.border_is_wall() && l.check_invariants(), "{kind} {n}");
            assert!(
                solve_oracle(&l, DEFAULT_NODE_BUDGET).solution().is_some(),
                "{kind} {n}\n{l}"
            );
        }
    }
}

#[test]
fn backtrack_branch_is_a_dead_end() {
    let l = generate_case_level(CaseKind::Backtrack, 20).unwrap();
    let [d1, d2, d3] = backtrack_decision_nodes(20);
    assert_eq!(d2.1, d1.1);
    assert_eq!(d3.0, d2.0);
    assert!(d3.1 < d2.1);
    // a box at D3 cannot be pushed anywhere
    let p = Pos::new(d3.0, d3.1);
    assert!(l.is_wall(Pos::new(p.row, p.col - 1)));
    assert!(l.is_wall(Pos::new(p.row - 1, p.col)) && l.is_wall(Pos::new(p.row + 1, p.col)));
}

#[test]
fn future_labels_track_moves() {
    let l = Level::parse("#######\n#@$  .#\n#######").unwrap();
    let acts = parse_actions("rrr").unwrap();
    let g = future_move_labels(&l, &acts).unwrap();
    assert_eq!(g.box_move(0, Pos::new(1, 2)), Some(Action::Right));
    assert_eq!(g.box_move(2, Pos::new(1, 4)), Some(Action::Right));
    assert_eq!(g.agent_move(1, Pos::new(1, 2)), Some(Action::Right));
    assert!(g.box_moves_within(Pos::new(1, 3), Action::Right, 0, 3));
    assert!(!g.box_moves_within(Pos::new(1, 3), Action::Right, 0, 1));
    assert!(future_move_labels(&l, &parse_actions("rrrr").unwrap()).is_err());
}
