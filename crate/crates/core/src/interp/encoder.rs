//! Folding the linear encoder into a gate's input kernel.

use super::InterpError;
use crate::net::{boundary_channel, conv2d, encode, Gate, Kernel, NetError, WeightSet};
use crate::tensor::Tensor3;

/// Observation-to-gate path of one gate: `kernel * obs + bias` plus the unchanged
/// boundary slice and gate bias equals the gate's encoder-input term away from edges.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedEncoder {
    /// `[C][3][9][9]`
    pub kernel: Kernel,
    /// Gate kernel applied to the encoder bias.
    pub bias: Vec<f32>,
    /// Gate kernel slice over the boundary channel.
    pub boundary: Kernel,
    pub gate_bias: Vec<f32>,
}

fn offsets(k: &Kernel) -> (isize, isize) {
    (-(k.origin.0 as isize), -(k.origin.1 as isize))
}

/// `outer * (inner * x) == compose(outer, inner) * x` where no padding is involved.
pub fn compose(outer: &Kernel, inner: &Kernel) -> Result<Kernel, NetError> {
    if outer.c_in != inner.c_out {
        return Err(NetError::Shape {
            what: "kernel composition".into(),
            expected: outer.c_in.to_string(),
            found: inner.c_out.to_string(),
        });
    }
    let (kh, kw) = (outer.kh + inner.kh - 1, outer.kw + inner.kw - 1);
    let mut acc = vec![0.0f64; outer.c_out * inner.c_in * kh * kw];
    let idx = |o: usize, i: usize, y: usize, x: usize| ((o * inner.c_in + i) * kh + y) * kw + x;
    for o in 0..outer.c_out {
        for m in 0..outer.c_in {
            for vy in 0..outer.kh {
                for vx in 0..outer.kw {
                    let a = outer.get(o, m, vy, vx) as f64;
                    if a == 0.0 {
                        continue;
                    }
                    for i in 0..inner.c_in {
                        for uy in 0..inner.kh {
                            for ux in 0..inner.kw {
                                acc[idx(o, i, vy + uy, vx + ux)] +=
                                    a * inner.get(m, i, uy, ux) as f64;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut k = Kernel::zeros(outer.c_out, inner.c_in, kh, kw);
    k.origin = (
        outer.origin.0 + inner.origin.0,
        outer.origin.1 + inner.origin.1,
    );
    debug_assert_eq!(
        offsets(&k),
        (
            offsets(outer).0 + offsets(inner).0,
            offsets(outer).1 + offsets(inner).1
        )
    );
    k.w = acc.into_iter().map(|v| v as f32).collect();
    Ok(k)
}

/// Sum of kernel weights over space and input channels, times per-input constants.
fn kernel_on_constant(k: &Kernel, b: &[f64]) -> Vec<f64> {
    (0..k.c_out)
        .map(|o| {
            let mut s = 0.0;
            for (i, &bi) in b.iter().enumerate() {
                for y in 0..k.kh {
                    for x in 0..k.kw {
                        s += k.get(o, i, y, x) as f64 * bi;
                    }
                }
            }
            s
        })
        .collect()
}

/// `W = W_g * W_E2 * W_E1` and `b = W_g * (b_E2 + W_E2 * b_E1)` for gate `gate` of `layer`.
pub fn combine_encoder(
    ws: &WeightSet,
    layer: usize,
    gate: Gate,
) -> Result<CombinedEncoder, InterpError> {
    let lw = ws.layers.get(layer).ok_or(NetError::BadAddress {
        what: "layer",
        index: layer,
        limit: ws.layers.len(),
    })?;
    let gw = lw.gate(gate);
    let c_enc = ws.enc2.kernel.c_out;
    if gw.we.c_in != c_enc + 1 {
        return Err(NetError::Shape {
            what: "gate encoder input".into(),
            expected: (c_enc + 1).to_string(),
            found: gw.we.c_in.to_string(),
        }
        .into());
    }
    let mut wg = Kernel::zeros(gw.we.c_out, c_enc, gw.we.kh, gw.we.kw);
    wg.origin = gw.we.origin;
    let mut boundary = Kernel::zeros(gw.we.c_out, 1, gw.we.kh, gw.we.kw);
    boundary.origin = gw.we.origin;
    for o in 0..gw.we.c_out {
        for y in 0..gw.we.kh {
            for x in 0..gw.we.kw {
                for i in 0..c_enc {
                    wg.set(o, i, y, x, gw.we.get(o, i, y, x));
                }
                boundary.set(o, 0, y, x, gw.we.get(o, c_enc, y, x));
            }
        }
    }
    let enc = compose(&ws.enc2.kernel, &ws.enc1.kernel)?;
    let kernel = compose(&wg, &enc)?;
    let b1: Vec<f64> = ws.enc1.bias.iter().map(|&v| v as f64).collect();
    let b_enc: Vec<f64> = kernel_on_constant(&ws.enc2.kernel, &b1)
        .iter()
        .zip(&ws.enc2.bias)
        .map(|(a, &b)| a + b as f64)
        .collect();
    let bias = kernel_on_constant(&wg, &b_enc)
        .into_iter()
        .map(|v| v as f32)
        .collect();
    Ok(CombinedEncoder {
        kernel,
        bias,
        boundary,
        gate_bias: gw.bias.clone(),
    })
}

impl CombinedEncoder {
    /// Encoder-input term of the gate pre-activation, bias included, from the observation.
    pub fn forward(&self, obs: &Tensor3) -> Result<Tensor3, NetError> {
        let total: Vec<f32> = self
            .bias
            .iter()
            .zip(&self.gate_bias)
            .map(|(a, b)| a + b)
            .collect();
        let mut out = conv2d(obs, &self.kernel, &total)?;
        let b = conv2d(
            &boundary_channel(obs.height, obs.width),
            &self.boundary,
            &vec![0.0; self.boundary.c_out],
        )?;
        for (o, v) in out.data.iter_mut().zip(&b.data) {
            *o += v;
        }
        Ok(out)
    }
}

/// The same term computed the long way: encode, append the boundary channel, convolve.
pub fn two_stage_encoder(
    ws: &WeightSet,
    layer: usize,
    gate: Gate,
    obs: &Tensor3,
) -> Result<Tensor3, InterpError> {
    let lw = ws.layers.get(layer).ok_or(NetError::BadAddress {
        what: "layer",
        index: layer,
        limit: ws.layers.len(),
    })?;
    let e = encode(obs, ws)?;
    let x = Tensor3::concat(&[&e, &boundary_channel(obs.height, obs.width)]);
    let gw = lw.gate(gate);
    Ok(conv2d(&x, &gw.we, &gw.bias)?)
}
