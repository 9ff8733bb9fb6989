use drcplan::harness::{bundled_suite, random_rooms, ROOMS_SEED};
use drcplan::interp::*;
use drcplan::net::*;
use drcplan::planner::*;
use drcplan::sokoban::*;
use drcplan::stats::{auc, bootstrap_mean, pearson};
use drcplan::tensor::Tensor3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn map() -> ChannelMap {
    default_channel_map(32).unwrap()
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|p| *p.1)
        .map(|p| *p.0)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|p| !*p.1)
        .map(|p| *p.0)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(data in proptest::collection::vec((0u8..6, any::<bool>()), 1..60)) {
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        match (auc(&scores, &labels), pairwise_auc(&scores, &labels)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }
}

#[test]
fn auc_extremes_and_chance() {
    let s = [0.1, 0.2, 0.8, 0.9];
    assert_eq!(auc(&s, &[false, false, true, true]), Some(1.0));
    assert_eq!(auc(&s, &[true, true, false, false]), Some(0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scores: Vec<f64> = (0..4000).map(|_| rng.gen()).collect();
    let labels: Vec<bool> = (0..4000).map(|_| rng.gen()).collect();
    assert!((auc(&scores, &labels).unwrap() - 0.5).abs() < 0.03);
}

#[test]
fn bootstrap_interval_shrinks_with_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs: Vec<f64> = (0..1600).map(|_| rng.gen_bool(0.7) as u8 as f64).collect();
    let small = bootstrap_mean(&xs[..100], 1000, 3);
    let large = bootstrap_mean(&xs, 1000, 3);
    assert!(small.lo <= small.mean && small.mean <= small.hi);
    assert!(large.half_width() < small.half_width() / 2.0);
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.9986).abs() < 1e-3);
}

/// Random one-channel features and 25 channels, channel k equal to the feature at offset k.
fn planted(seed: u64, noise: f32, shift: (isize, isize)) -> (Vec<Recording>, Vec<Vec<Tensor3>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = Level::parse("#####\n#@$.#\n#####").unwrap();
    let (h, w) = (10, 10);
    let (mut recs, mut feats) = (Vec::new(), Vec::new());
    for _ in 0..3 {
        let f: Vec<Tensor3> = (0..5)
            .map(|_| Tensor3::from_vec(h, w, 1, (0..h * w).map(|_| rng.gen()).collect()))
            .collect();
        let acts = f
            .iter()
            .map(|x| {
                let mut a = Tensor3::zeros(h, w, OFFSETS.len());
                for (k, &(dr, dc)) in OFFSETS.iter().enumerate() {
                    for r in 0..h {
                        for c in 0..w {
                            let (rr, cc) = (r as isize + dr + shift.0, c as isize + dc + shift.1);
                            let v = x.at(rr, cc, 0) - 0.3 + noise * (rng.gen::<f32>() - 0.5);
                            a.set(r, c, k, v);
                        }
                    }
                }
                a
            })
            .collect();
        recs.push(Recording {
            levels: vec![level.clone(); 5],
            acts,
            actions: vec![Action::Right; 5],
        });
        feats.push(f);
    }
    (recs, feats)
}

#[test]
fn planted_offsets_are_recovered_with_noise_and_shift() {
    let all: Vec<usize> = (0..OFFSETS.len()).collect();
    let (recs, feats) = planted(1, 0.05, (0, 0));
    let rep = offset_regression(&recs, &feats, &all).unwrap();
    for (k, row) in rep.rows.iter().enumerate() {
        assert_eq!(row.offset, OFFSETS[k], "channel {k}");
        assert!(row.corr > 0.9);
    }
    // moving every planted offset one square moves the answer with it
    let (recs, feats) = planted(2, 0.0, (1, -1));
    let rep = offset_regression(&recs, &feats, &[12]).unwrap();
    assert_eq!(rep.rows[0].offset, (1, -1));
    assert!(rep.to_csv().starts_with("channel,dr,dc,corr,degenerate\n"));
}

#[test]
fn constant_channels_are_flagged_degenerate() {
    let (mut recs, feats) = planted(3, 0.0, (0, 0));
    for r in &mut recs {
        for a in &mut r.acts {
            for v in a.data.iter_mut() {
                *v = 1.5;
            }
        }
    }
    let rep = offset_regression(&recs, &feats, &[0]).unwrap();
    assert!(rep.rows[0].degenerate);
    assert_eq!(rep.rows[0].offset, (0, 0));
}

fn room_episodes(n: usize) -> Vec<Episode> {
    let (m, gains) = (map(), MechanismGains::default());
    random_rooms(n, ROOMS_SEED)
        .iter()
        .map(|l| {
            run_planner(
                l,
                &m,
                &gains,
                &RunOptions::default(),
                &PlannerEdits::default(),
            )
        })
        .collect()
}

#[test]
fn planted_labels_are_explained_only_by_the_full_set() {
    let mut recs: Vec<Recording> = room_episodes(12)
        .iter()
        .map(Recording::from_episode)
        .collect();
    for rec in &mut recs {
        let fs = episode_features(rec, FeatureSet::Full);
        for (a, f) in rec.acts.iter_mut().zip(&fs) {
            for r in 0..a.height {
                for c in 0..a.width {
                    // a future-move feature, invisible to the base set
                    a.set(
                        r,
                        c,
                        0,
                        0.8 * f.get(r, c, BASE_FEATURES + 3) - 0.2 * f.get(r, c, 0),
                    );
                }
            }
        }
    }
    let rep = label_regression(&recs, &[0]).unwrap();
    assert!(rep.rows[0].full >= 0.999, "{}", rep.to_csv());
    assert!(
        rep.rows[0].base < rep.rows[0].full - 0.2,
        "{}",
        rep.to_csv()
    );
}

#[test]
fn box_plan_channels_predict_box_moves() {
    let m = map();
    let recs: Vec<Recording> = room_episodes(40)
        .iter()
        .map(Recording::from_episode)
        .collect();
    let target = ProbeTarget {
        kind: TargetKind::BoxMove,
        variant: LabelVariant::Within(10),
    };
    let rep = auc_probe(&recs, &m.box_short, target, 20).unwrap();
    assert_eq!(rep.rows.len(), 5);
    assert!(
        rep.pooled().and_then(|r| r.auc).unwrap() > 0.9,
        "{}",
        rep.to_csv()
    );
    assert!(auc_probe(&recs[..1], &m.box_short, target, 1).is_err());
}

#[test]
fn action_probe_learns_separable_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for k in 0..1200 {
        let class = k % 4;
        let mut v: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 0.5).collect();
        v[class] += 2.0;
        x.push(v);
        y.push(class);
    }
    let fit = train_action_probe(&x, &y, 4, 0.25).unwrap();
    assert!(fit.test_accuracy > 0.95, "{fit:?}");
    assert_eq!(fit.predict(&x[1]), 1);
    assert!(train_action_probe(&x[..500], &y[..500], 4, 0.25).is_err());
    let mut bad = x.clone();
    bad[0][0] = f64::NAN;
    assert!(train_action_probe(&bad, &y, 4, 0.25).is_err());
}

#[test]
fn identity_and_never_change_nothing() {
    let (m, gains) = (map(), MechanismGains::default());
    let pool = transition_pool(
        &random_rooms(20, ROOMS_SEED),
        &m,
        &gains,
        &RunOptions::default(),
    );
    for t in pool.iter().take(200) {
        for p in [Protocol::Identity, Protocol::Never] {
            let o = causal_intervene(t, &protocol_edits(&p, t, Action::Up, &m), &m, &gains, 3);
            assert!(!o.changed());
            assert_eq!(o.action, t.action);
        }
    }
    let sample = sample_transitions(&pool, 120, 1).unwrap();
    assert_eq!(
        intervention_score(&sample, &Protocol::Identity, &m, &gains, 3, 1)
            .unwrap()
            .successes,
        0
    );
    assert!(intervention_score(&sample[..50], &Protocol::Gna(2.0), &m, &gains, 3, 1).is_err());
    assert!(sample_transitions(&pool[..5], 10, 1).is_err());
}

#[test]
fn protocol_names_round_trip() {
    for p in [
        Protocol::Never,
        Protocol::Identity,
        Protocol::Gna(2.0),
        Protocol::Pna(1.5),
        Protocol::BoxReroute(2.0),
    ] {
        assert_eq!(Protocol::parse(&p.name()), Some(p));
    }
    assert_eq!(Protocol::parse("gna"), Some(Protocol::Gna(2.0)));
    assert_eq!(Protocol::parse("teleport"), None);
}

#[test]
fn spec_strings_resolve() {
    let m = map();
    assert_eq!(
        resolve_channels("box_short.right+agent", &m).unwrap(),
        vec![m.box_short[3], m.agent]
    );
    assert_eq!(resolve_channels("0..3+7", &m).unwrap(), vec![0, 1, 2, 7]);
    assert!(resolve_channels("nothing", &m).is_err());
    let spec = parse_intervention(
        "layer=0,site=h,channels=gna.down,squares=1:2;3:4,alpha=0,c=2",
        &m,
    )
    .unwrap();
    assert_eq!(spec.channels, vec![m.gna[1]]);
    assert_eq!(spec.squares, Some(vec![Pos::new(1, 2), Pos::new(3, 4)]));
    assert_eq!(
        spec.edit,
        Edit::Affine {
            alpha: 0.0,
            c: vec![2.0]
        }
    );
    let abl = parse_ablation("mode=cache_1step,channels=plan", &m).unwrap();
    assert_eq!(abl.mode, AblationMode::Cache1Step);
    assert_eq!(abl.channels, m.plan_channels());
    assert!(parse_ablation("mode=melt", &m).is_err());
}

#[test]
fn mean_forget_gate_ablation_costs_little() {
    let (m, gains) = (map(), MechanismGains::default());
    let levels: Vec<Level> = bundled_suite().into_iter().map(|e| e.level).collect();
    let opts = RunOptions {
        record_ticks: true,
        ..Default::default()
    };
    let eps: Vec<Episode> = levels
        .iter()
        .map(|l| run_planner(l, &m, &gains, &opts, &PlannerEdits::default()))
        .collect();
    let means = channel_means(&eps, m.channels, Site::Gate(Gate::F), "suite").unwrap();
    let spec = AblationSpec::mean(Site::Gate(Gate::F), m.plan_channels(), "suite");
    let res = run_ablation(
        &levels,
        &m,
        &gains,
        &RunOptions::default(),
        &spec,
        Some(&means),
    )
    .unwrap();
    assert!(res.drop() < 0.10, "{}", res.summary_csv());
    assert!(channel_means(&eps, m.channels, Site::Gate(Gate::I), "suite").is_err());
    let missing = run_ablation(&levels, &m, &gains, &RunOptions::default(), &spec, None);
    assert!(matches!(missing, Err(InterpError::UndefinedMean(_))));
}

#[test]
fn contributions_add_up_to_the_preactivation() {
    let cfg = DrcConfig {
        layers: 2,
        ticks: 2,
        channels: 3,
        height: 6,
        width: 6,
    };
    let ws = WeightSet::random(cfg, 0.3, 8);
    let obs = Level::parse("######\n#@$ .#\n#    #\n# $ .#\n#    #\n######")
        .unwrap()
        .render_rgb();
    let out = drc_forward(&DrcState::zeros(&cfg, 6, 6), &obs, &ws, 2, &[], true).unwrap();
    for gate in Gate::ALL {
        let cs = contributions(&out.records, &ws, 1, 1, gate, 2).unwrap();
        let sum = reconstruct(&cs, ws.layers[1].gate(gate).bias[2]).unwrap();
        let pre = &out
            .records
            .iter()
            .find(|r| r.layer == 1 && r.tick == 1)
            .unwrap()
            .pre[gate as usize];
        for r in 0..6 {
            for c in 0..6 {
                assert!((sum.get(r, c, 0) - pre.get(r, c, 2)).abs() < 1e-5);
            }
        }
    }
    let ranked = direct_effect(&out.records, &ws, 1, 1, Gate::O, 0).unwrap();
    assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(contributions(&out.records, &ws, 1, 5, Gate::O, 0).is_err());
}

#[test]
fn zeroed_kernel_slices_are_zero() {
    let cfg = DrcConfig {
        layers: 1,
        ticks: 1,
        channels: 3,
        height: 5,
        width: 5,
    };
    let ws = WeightSet::random(cfg, 0.3, 9);
    let slice = KernelSlice {
        layer: 0,
        gate: Gate::J,
        group: InputGroup::Own,
        in_ch: 1,
        out_ch: 2,
    };
    let z = zero_kernels(&ws, &[slice]).unwrap();
    assert!(z.layers[0]
        .gate(Gate::J)
        .wh2
        .slice(2, 1)
        .w
        .iter()
        .all(|&v| v == 0.0));
    assert_eq!(z.layers[0].gate(Gate::I), ws.layers[0].gate(Gate::I));
    let bad = KernelSlice { in_ch: 99, ..slice };
    assert!(zero_kernels(&ws, &[bad]).is_err());
}

#[test]
fn steering_widens_reach_and_rejects_bad_factors() {
    let (m, gains) = (map(), MechanismGains::default());
    let base = propagation_distance(&gains, &m, 60, 60);
    let steered = propagation_distance(&gains.steered(1.2), &m, 60, 60);
    assert!(steered > base);
    let ws = WeightSet::random(DrcConfig::default(), 0.1, 1);
    assert!(steer_weights(&ws, -1.0, &[Recurrent::Wh2]).is_err());
    assert!(steer_weights(&ws, f32::NAN, &[Recurrent::Wh2]).is_err());
}
