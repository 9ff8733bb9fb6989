use drcplan::interp::{steer_weights, Recurrent};
use drcplan::net::*;
use drcplan::tensor::Tensor3;
use drcplan::{Level, Pos};

type Grid = Vec<Vec<Vec<f64>>>; // [row][col][channel]

fn from_tensor(t: &Tensor3) -> Grid {
    (0..t.height)
        .map(|r| {
            (0..t.width)
                .map(|c| (0..t.channels).map(|k| t.get(r, c, k) as f64).collect())
                .collect()
        })
        .collect()
}

fn conv(x: &Grid, k: &Kernel, bias: Option<&[f32]>) -> Grid {
    let (h, w) = (x.len() as isize, x[0].len() as isize);
    let mut out = vec![vec![vec![0.0; k.c_out]; w as usize]; h as usize];
    for r in 0..h {
        for c in 0..w {
            for o in 0..k.c_out {
                let mut s = bias.map_or(0.0, |b| b[o] as f64);
                for y in 0..k.kh {
                    for xx in 0..k.kw {
                        let (rr, cc) = (
                            r + y as isize - k.origin.0 as isize,
                            c + xx as isize - k.origin.1 as isize,
                        );
                        if rr < 0 || cc < 0 || rr >= h || cc >= w {
                            continue;
                        }
                        for i in 0..k.c_in {
                            s += k.get(o, i, y, xx) as f64 * x[rr as usize][cc as usize][i];
                        }
                    }
                }
                out[r as usize][c as usize][o] = s;
            }
        }
    }
    out
}

fn cat(a: &Grid, b: &Grid) -> Grid {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| x.iter().chain(y).copied().collect())
                .collect()
        })
        .collect()
}

fn add(a: &Grid, b: &Grid) -> Grid {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
                .collect()
        })
        .collect()
}

/// Textbook DRC forward pass in f64, returning every layer's (h, c).
fn reference(ws: &WeightSet, obs: &Tensor3, ticks: usize) -> Vec<(Grid, Grid)> {
    let (hh, ww, c) = (obs.height, obs.width, ws.config.channels);
    let zero = vec![vec![vec![0.0; c]; ww]; hh];
    let x = from_tensor(obs);
    let e = conv(
        &conv(&x, &ws.enc1.kernel, Some(&ws.enc1.bias)),
        &ws.enc2.kernel,
        Some(&ws.enc2.bias),
    );
    let boundary: Grid = (0..hh)
        .map(|r| {
            (0..ww)
                .map(|cc| vec![(r == 0 || cc == 0 || r + 1 == hh || cc + 1 == ww) as u8 as f64])
                .collect()
        })
        .collect();
    let xe = cat(&e, &boundary);
    let mut st: Vec<(Grid, Grid)> = vec![(zero.clone(), zero.clone()); ws.layers.len()];
    let d = ws.layers.len();
    for _ in 0..ticks {
        for k in 0..d {
            let lw = &ws.layers[k];
            let below = st[if k == 0 { d - 1 } else { k - 1 }].0.clone();
            let (h_prev, c_prev) = st[k].clone();
            let pooled: Vec<f64> = (0..c)
                .map(|ch| {
                    let vals: Vec<f64> = h_prev.iter().flatten().map(|px| px[ch]).collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    lw.pool_mean[ch] as f64 * mean + lw.pool_max[ch] as f64 * max
                })
                .collect();
            let own = cat(&h_prev, &vec![vec![pooled; ww]; hh]);
            let pre: Vec<Grid> = Gate::ALL
                .iter()
                .map(|&g| {
                    let gw = lw.gate(g);
                    add(
                        &add(
                            &conv(&xe, &gw.we, Some(&gw.bias)),
                            &conv(&below, &gw.wh1, None),
                        ),
                        &conv(&own, &gw.wh2, None),
                    )
                })
                .collect();
            let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
            let mut h = zero.clone();
            let mut cn = zero.clone();
            for r in 0..hh {
                for col in 0..ww {
                    for ch in 0..c {
                        let i = pre[0][r][col][ch].tanh();
                        let j = sig(pre[1][r][col][ch]);
                        let f = sig(pre[2][r][col][ch]);
                        let o = pre[3][r][col][ch].tanh();
                        cn[r][col][ch] = f * c_prev[r][col][ch] + i * j;
                        h[r][col][ch] = o * cn[r][col][ch].tanh();
                    }
                }
            }
            st[k] = (h, cn);
        }
    }
    st
}

fn config() -> DrcConfig {
    DrcConfig {
        layers: 2,
        ticks: 3,
        channels: 4,
        height: 6,
        width: 7,
    }
}

fn observation() -> Tensor3 {
    Level::parse("#######\n#@ $ .#\n#     #\n# $ . #\n#     #\n#######")
        .unwrap()
        .render_rgb()
}

#[test]
fn forward_matches_reference() {
    for seed in 0..5 {
        let ws = WeightSet::random(config(), 0.4, seed);
        let obs = observation();
        let out =
            drc_forward(&DrcState::zeros(&ws.config, 6, 7), &obs, &ws, 3, &[], false).unwrap();
        let want = reference(&ws, &obs, 3);
        for (layer, (h, c)) in out.state.layers.iter().zip(&want) {
            for (t, g) in [(&layer.h, h), (&layer.c, c)] {
                for r in 0..6 {
                    for col in 0..7 {
                        for ch in 0..4 {
                            let d = (t.get(r, col, ch) as f64 - g[r][col][ch]).abs();
                            assert!(d < 1e-4, "seed {seed} ({r},{col},{ch}) off by {d}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn ticks_compose() {
    let ws = WeightSet::random(config(), 0.4, 9);
    let obs = observation();
    let s0 = DrcState::zeros(&ws.config, 6, 7);
    let once = drc_forward(&s0, &obs, &ws, 3, &[], false).unwrap();
    let mut s = s0;
    for _ in 0..3 {
        s = drc_forward(&s, &obs, &ws, 1, &[], false).unwrap().state;
    }
    assert_eq!(s, once.state);
    assert!(matches!(
        drc_forward(&s, &obs, &ws, 0, &[], false),
        Err(NetError::ZeroTicks)
    ));
}

#[test]
fn records_cover_every_layer_and_tick() {
    let ws = WeightSet::random(config(), 0.4, 2);
    let out = drc_forward(
        &DrcState::zeros(&ws.config, 6, 7),
        &observation(),
        &ws,
        3,
        &[],
        true,
    )
    .unwrap();
    assert_eq!(out.records.len(), 6);
    let last = out.records.last().unwrap();
    assert_eq!((last.layer, last.tick), (1, 2));
    assert_eq!(last.h, out.state.layers[1].h);
    assert_eq!(last.x_enc.channels, 5);
    assert_eq!(last.x_own.channels, 8);
}

#[test]
fn hidden_edit_at_one_square_and_tick() {
    let ws = WeightSet::random(config(), 0.4, 3);
    let obs = observation();
    let s0 = DrcState::zeros(&ws.config, 6, 7);
    let spec = InterventionSpec::affine(1, Site::Hidden, vec![2], 0.0, 0.75)
        .at_squares(vec![Pos::new(2, 3)])
        .at_ticks(vec![0]);
    let plain = drc_forward(&s0, &obs, &ws, 1, &[], false).unwrap();
    let edited = drc_forward(&s0, &obs, &ws, 1, &[spec.clone()], false).unwrap();
    let (a, b) = (&plain.state.layers[1].h, &edited.state.layers[1].h);
    assert_eq!(b.get(2, 3, 2), 0.75);
    for r in 0..6 {
        for c in 0..7 {
            for ch in 0..4 {
                if (r, c, ch) != (2, 3, 2) {
                    assert_eq!(a.get(r, c, ch).to_bits(), b.get(r, c, ch).to_bits());
                }
            }
        }
    }
    let bad = InterventionSpec::affine(5, Site::Hidden, vec![0], 1.0, 0.0);
    assert!(drc_forward(&s0, &obs, &ws, 1, &[bad], false).is_err());
    let off_grid = spec.at_squares(vec![Pos::new(9, 9)]);
    assert!(drc_forward(&s0, &obs, &ws, 1, &[off_grid], false).is_err());
}

#[test]
fn weights_round_trip_through_bytes_and_files() {
    let ws = WeightSet::random(config(), 0.4, 4);
    let mut bytes = Vec::new();
    write_weights(&ws, &mut bytes).unwrap();
    assert_eq!(read_weights(bytes.as_slice(), &ws.config).unwrap(), ws);

    let path = std::env::temp_dir().join(format!("drcplan-net-{}.drcw", std::process::id()));
    save_weights(&ws, &path).unwrap();
    assert_eq!(load_weights(&path, &ws.config).unwrap(), ws);
    std::fs::remove_file(&path).unwrap();

    assert!(matches!(
        read_weights(&bytes[..bytes.len() / 2], &ws.config),
        Err(_)
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        read_weights(bad.as_slice(), &ws.config),
        Err(WeightIoError::BadMagic(_))
    ));
    let other = DrcConfig {
        channels: 5,
        ..ws.config
    };
    assert!(matches!(
        read_weights(bytes.as_slice(), &other),
        Err(WeightIoError::Shape { .. })
    ));
}

#[test]
fn steering_commutes_with_save_and_load() {
    let ws = WeightSet::random(config(), 0.4, 5);
    let targets = [Recurrent::Wh1, Recurrent::Wh2];
    let mut bytes = Vec::new();
    write_weights(&steer_weights(&ws, 1.2, &targets).unwrap(), &mut bytes).unwrap();
    let loaded = read_weights(bytes.as_slice(), &ws.config).unwrap();
    let mut raw = Vec::new();
    write_weights(&ws, &mut raw).unwrap();
    let later = steer_weights(
        &read_weights(raw.as_slice(), &ws.config).unwrap(),
        1.2,
        &targets,
    )
    .unwrap();
    assert_eq!(loaded, later);
}

#[test]
fn probe_readout_pools_channels() {
    let mut h = Tensor3::zeros(2, 2, 2);
    h.set(0, 0, 0, 4.0);
    h.set(1, 1, 1, -2.0);
    let probe = Probe {
        w: vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
            vec![-1.0, 0.0],
        ],
        b: vec![0.0, 0.0, 0.5, 0.0],
    };
    let logits = probe_readout(&h, &probe).unwrap();
    assert_eq!(logits.len(), 4);
    assert_eq!(argmax(&logits), 0);
    assert!(probe_readout(&Tensor3::zeros(2, 2, 3), &probe).is_err());
}
