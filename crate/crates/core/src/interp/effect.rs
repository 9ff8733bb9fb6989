//! Per-input-channel contributions to a gate pre-activation.

use super::InterpError;
use crate::net::{conv2d, Gate, TickRecord, WeightSet};
use crate::tensor::Tensor3;
use std::fmt;

/// The three inputs of a gate convolution.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputGroup {
    /// Encoder output plus boundary channel.
    Encoder,
    /// Hidden state of the layer below.
    Below,
    /// Own previous hidden state plus pooled channels.
    Own,
}

impl InputGroup {
    pub fn name(self) -> &'static str {
        match self {
            InputGroup::Encoder => "enc",
            InputGroup::Below => "below",
            InputGroup::Own => "own",
        }
    }
    pub fn from_name(s: &str) -> Option<InputGroup> {
        [InputGroup::Encoder, InputGroup::Below, InputGroup::Own]
            .into_iter()
            .find(|g| g.name() == s)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputChannel {
    pub group: InputGroup,
    pub channel: usize,
}

impl fmt::Display for InputChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group.name(), self.channel)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contribution {
    pub input: InputChannel,
    /// Largest magnitude added to the output over all squares.
    pub max_abs: f32,
    /// One-channel map of what this input adds.
    pub map: Tensor3,
}

fn find<'a>(
    records: &'a [TickRecord],
    layer: usize,
    tick: usize,
) -> Result<&'a TickRecord, InterpError> {
    records
        .iter()
        .find(|r| r.layer == layer && r.tick == tick)
        .ok_or(InterpError::MissingRecording { layer, tick })
}

/// Contribution of every input channel to output channel `out` of `gate`, in input order.
pub fn contributions(
    records: &[TickRecord],
    ws: &WeightSet,
    layer: usize,
    tick: usize,
    gate: Gate,
    out: usize,
) -> Result<Vec<Contribution>, InterpError> {
    let rec = find(records, layer, tick)?;
    let gw = ws.layers[layer].gate(gate);
    let mut res = Vec::new();
    for (group, x, k) in [
        (InputGroup::Encoder, &rec.x_enc, &gw.we),
        (InputGroup::Below, &rec.h_below, &gw.wh1),
        (InputGroup::Own, &rec.x_own, &gw.wh2),
    ] {
        if out >= k.c_out {
            return Err(crate::net::NetError::BadAddress {
                what: "channel",
                index: out,
                limit: k.c_out,
            }
            .into());
        }
        for i in 0..k.c_in {
            let map = conv2d(&x.channel(i), &k.slice(out, i), &[0.0])?;
            res.push(Contribution {
                input: InputChannel { group, channel: i },
                max_abs: map.max_abs(),
                map,
            });
        }
    }
    Ok(res)
}

/// Input channels ranked by largest magnitude added to the output, ties in input order.
pub fn direct_effect(
    records: &[TickRecord],
    ws: &WeightSet,
    layer: usize,
    tick: usize,
    gate: Gate,
    out: usize,
) -> Result<Vec<(InputChannel, f32)>, InterpError> {
    let mut ranked: Vec<(InputChannel, f32)> = contributions(records, ws, layer, tick, gate, out)?
        .into_iter()
        .map(|c| (c.input, c.max_abs))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

/// Sum of contributions plus bias.
pub fn reconstruct(contribs: &[Contribution], bias: f32) -> Option<Tensor3> {
    let first = contribs.first()?;
    let mut t = Tensor3::filled(first.map.height, first.map.width, 1, 0.0);
    for c in contribs {
        for (a, b) in t.data.iter_mut().zip(&c.map.data) {
            *a += b;
        }
    }
    Some(t.map(|v| v + bias))
}
