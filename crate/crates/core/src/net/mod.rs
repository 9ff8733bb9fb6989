//! DRC(D,N) inference: encoder, stacked ConvLSTM layers ticked N times per step,
//! pool-and-inject, boundary channel, top-down skip and an MLP head.
//!
//! Convolutions are cross-correlations with zero padding and stride 1. A kernel of
//! extent k has its origin at `(k-1)/2` unless set explicitly, so a 3×3 kernel covers
//! offsets -1..=1 and a 4×4 kernel covers -1..=2. For every output value the sum starts
//! at zero and visits kernel rows, then kernel columns, then input channels, in order;
//! bias is added last.

mod intervene;
mod io;

pub use intervene::{Edit, InterventionSpec, Site};
pub use io::{
    load_weights, read_weights, save_weights, write_weights, WeightIoError,
    VERSION as WEIGHTS_VERSION,
};

use crate::tensor::Tensor3;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: String,
        expected: String,
        found: String,
    },
    #[error("intervention addresses {what} {index}, but only {limit} exist")]
    BadAddress {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("ticks must be at least 1")]
    ZeroTicks,
}

fn shape_err(what: impl Into<String>, expected: impl ToString, found: impl ToString) -> NetError {
    NetError::Shape {
        what: what.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// Convolution kernel, weights laid out `[c_out][c_in][kh][kw]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub c_out: usize,
    pub c_in: usize,
    pub kh: usize,
    pub kw: usize,
    /// Kernel cell aligned with the output square, (row, col).
    pub origin: (usize, usize),
    pub w: Vec<f32>,
}

impl Kernel {
    pub fn zeros(c_out: usize, c_in: usize, kh: usize, kw: usize) -> Kernel {
        Kernel {
            c_out,
            c_in,
            kh,
            kw,
            origin: ((kh - 1) / 2, (kw - 1) / 2),
            w: vec![0.0; c_out * c_in * kh * kw],
        }
    }

    #[inline]
    pub fn idx(&self, o: usize, i: usize, y: usize, x: usize) -> usize {
        ((o * self.c_in + i) * self.kh + y) * self.kw + x
    }

    pub fn get(&self, o: usize, i: usize, y: usize, x: usize) -> f32 {
        self.w[self.idx(o, i, y, x)]
    }

    pub fn set(&mut self, o: usize, i: usize, y: usize, x: usize, v: f32) {
        let k = self.idx(o, i, y, x);
        self.w[k] = v;
    }

    /// Set the weight that reads input offset (dr, dc) relative to the output square.
    pub fn set_offset(&mut self, o: usize, i: usize, dr: isize, dc: isize, v: f32) {
        let y = (self.origin.0 as isize + dr) as usize;
        let x = (self.origin.1 as isize + dc) as usize;
        self.set(o, i, y, x, v);
    }

    pub fn add_offset(&mut self, o: usize, i: usize, dr: isize, dc: isize, v: f32) {
        let y = (self.origin.0 as isize + dr) as usize;
        let x = (self.origin.1 as isize + dc) as usize;
        let k = self.idx(o, i, y, x);
        self.w[k] += v;
    }

    pub fn scale(&mut self, k: f32) {
        self.w.iter_mut().for_each(|w| *w *= k);
    }

    /// Slice of one (out, in) pair as a 1→1 kernel.
    pub fn slice(&self, o: usize, i: usize) -> Kernel {
        let mut k = Kernel::zeros(1, 1, self.kh, self.kw);
        k.origin = self.origin;
        for y in 0..self.kh {
            for x in 0..self.kw {
                k.set(0, 0, y, x, self.get(o, i, y, x));
            }
        }
        k
    }
}

/// Accumulate `kernel * input` into channels `oc0..oc0+c_out` of `out`.
fn conv_accumulate(input: &Tensor3, kernel: &Kernel, out: &mut Tensor3, oc0: usize) {
    let (h, w) = (input.height as isize, input.width as isize);
    let (kh, kw, ci, co) = (kernel.kh, kernel.kw, kernel.c_in, kernel.c_out);
    // [y][x][i][o] for a contiguous inner loop over output channels.
    let mut t = vec![0.0f32; kh * kw * ci * co];
    for o in 0..co {
        for i in 0..ci {
            for y in 0..kh {
                for x in 0..kw {
                    t[((y * kw + x) * ci + i) * co + o] = kernel.get(o, i, y, x);
                }
            }
        }
    }
    let (oy, ox) = (kernel.origin.0 as isize, kernel.origin.1 as isize);
    let mut acc = vec![0.0f32; co];
    for r in 0..h {
        for c in 0..w {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for y in 0..kh {
                let rr = r + y as isize - oy;
                if rr < 0 || rr >= h {
                    continue;
                }
                for x in 0..kw {
                    let cc = c + x as isize - ox;
                    if cc < 0 || cc >= w {
                        continue;
                    }
                    let px = input.pixel(rr as usize, cc as usize);
                    let base = (y * kw + x) * ci;
                    for (i, &v) in px.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let row = &t[(base + i) * co..(base + i + 1) * co];
                        for (a, &k) in acc.iter_mut().zip(row) {
                            *a += k * v;
                        }
                    }
                }
            }
            let dst = out.idx(r as usize, c as usize, oc0);
            for (d, a) in out.data[dst..dst + co].iter_mut().zip(&acc) {
                *d += a;
            }
        }
    }
}

/// Same-size convolution with zero padding.
pub fn conv2d(input: &Tensor3, kernel: &Kernel, bias: &[f32]) -> Result<Tensor3, NetError> {
    if input.channels != kernel.c_in {
        return Err(shape_err(
            "conv2d input channels",
            kernel.c_in,
            input.channels,
        ));
    }
    if bias.len() != kernel.c_out {
        return Err(shape_err("conv2d bias", kernel.c_out, bias.len()));
    }
    let mut out = Tensor3::zeros(input.height, input.width, kernel.c_out);
    conv_accumulate(input, kernel, &mut out, 0);
    add_bias(&mut out, bias);
    Ok(out)
}

fn add_bias(t: &mut Tensor3, bias: &[f32]) {
    for px in t.data.chunks_mut(t.channels) {
        for (v, b) in px.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    pub kernel: Kernel,
    pub bias: Vec<f32>,
}

impl Conv {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Conv {
        Conv {
            kernel: Kernel::zeros(c_out, c_in, k, k),
            bias: vec![0.0; c_out],
        }
    }
    pub fn apply(&self, x: &Tensor3) -> Result<Tensor3, NetError> {
        conv2d(x, &self.kernel, &self.bias)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    I,
    J,
    F,
    O,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::I, Gate::J, Gate::F, Gate::O];
    pub fn name(self) -> &'static str {
        match self {
            Gate::I => "i",
            Gate::J => "j",
            Gate::F => "f",
            Gate::O => "o",
        }
    }
    pub fn from_name(s: &str) -> Option<Gate> {
        Gate::ALL.into_iter().find(|g| g.name() == s)
    }
    fn activate(self, x: f32) -> f32 {
        match self {
            Gate::I | Gate::O => x.tanh(),
            Gate::J | Gate::F => sigmoid(x),
        }
    }
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights of one gate. Input layout:
/// `we` reads the encoder output plus the boundary channel (C_e + 1 channels),
/// `wh1` reads the hidden state of the layer below (C),
/// `wh2` reads the layer's own previous hidden state followed by the pooled channels (2C).
#[derive(Clone, Debug, PartialEq)]
pub struct GateWeights {
    pub we: Kernel,
    pub wh1: Kernel,
    pub wh2: Kernel,
    pub bias: Vec<f32>,
}

impl GateWeights {
    pub fn zeros(c: usize, c_enc: usize, k: usize) -> GateWeights {
        GateWeights {
            we: Kernel::zeros(c, c_enc + 1, k, k),
            wh1: Kernel::zeros(c, c, k, k),
            wh2: Kernel::zeros(c, 2 * c, k, k),
            bias: vec![0.0; c],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    /// Indexed by `Gate as usize`.
    pub gates: [GateWeights; 4],
    pub pool_mean: Vec<f32>,
    pub pool_max: Vec<f32>,
}

impl LayerWeights {
    pub fn zeros(c: usize, c_enc: usize) -> LayerWeights {
        let g = GateWeights::zeros(c, c_enc, 3);
        LayerWeights {
            gates: [g.clone(), g.clone(), g.clone(), g],
            pool_mean: vec![0.0; c],
            pool_max: vec![0.0; c],
        }
    }
    pub fn gate(&self, g: Gate) -> &GateWeights {
        &self.gates[g as usize]
    }
    pub fn gate_mut(&mut self, g: Gate) -> &mut GateWeights {
        &mut self.gates[g as usize]
    }
}

pub const HEAD_HIDDEN: usize = 256;

/// MLP head over the flattened last-layer hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub hidden: usize,
    /// `[hidden][H*W*C]`
    pub fc1_w: Vec<f32>,
    pub fc1_b: Vec<f32>,
    /// `[4][hidden]`
    pub policy_w: Vec<f32>,
    pub policy_b: Vec<f32>,
    /// `[1][hidden]`
    pub value_w: Vec<f32>,
    pub value_b: Vec<f32>,
}

impl Head {
    pub fn zeros(inputs: usize, hidden: usize) -> Head {
        Head {
            hidden,
            fc1_w: vec![0.0; hidden * inputs],
            fc1_b: vec![0.0; hidden],
            policy_w: vec![0.0; 4 * hidden],
            policy_b: vec![0.0; 4],
            value_w: vec![0.0; hidden],
            value_b: vec![0.0; 1],
        }
    }

    pub fn inputs(&self) -> usize {
        self.fc1_w.len() / self.hidden.max(1)
    }

    pub fn forward(&self, h: &Tensor3) -> Result<([f32; 4], f32), NetError> {
        if h.data.len() != self.inputs() {
            return Err(shape_err("head input", self.inputs(), h.data.len()));
        }
        let n = self.inputs();
        let hid: Vec<f32> = (0..self.hidden)
            .map(|k| {
                let row = &self.fc1_w[k * n..(k + 1) * n];
                let s: f32 = row.iter().zip(&h.data).map(|(w, x)| w * x).sum();
                (s + self.fc1_b[k]).max(0.0)
            })
            .collect();
        let dot = |w: &[f32]| w.iter().zip(&hid).map(|(a, b)| a * b).sum::<f32>();
        let mut logits = [0.0; 4];
        for (a, l) in logits.iter_mut().enumerate() {
            *l = dot(&self.policy_w[a * self.hidden..(a + 1) * self.hidden]) + self.policy_b[a];
        }
        let value = dot(&self.value_w) + self.value_b[0];
        Ok((logits, value))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct DrcConfig {
    /// D
    pub layers: usize,
    /// N
    pub ticks: usize,
    /// C
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for DrcConfig {
    fn default() -> Self {
        DrcConfig {
            layers: 3,
            ticks: 3,
            channels: 32,
            height: 10,
            width: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    pub config: DrcConfig,
    pub enc1: Conv,
    pub enc2: Conv,
    pub layers: Vec<LayerWeights>,
    pub head: Option<Head>,
}

impl WeightSet {
    /// All-zero weights of the right shapes; the head is sized for config H×W.
    pub fn zeros(config: DrcConfig) -> WeightSet {
        let c = config.channels;
        WeightSet {
            config,
            enc1: Conv::zeros(c, 3, 4),
            enc2: Conv::zeros(c, c, 4),
            layers: (0..config.layers)
                .map(|_| LayerWeights::zeros(c, c))
                .collect(),
            head: Some(Head::zeros(config.height * config.width * c, HEAD_HIDDEN)),
        }
    }

    /// Gaussian-ish random weights with the given scale; deterministic in `seed`.
    pub fn random(config: DrcConfig, scale: f32, seed: u64) -> WeightSet {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ws = WeightSet::zeros(config);
        for t in ws.tensors_mut() {
            for v in t.iter_mut() {
                *v = scale * (rng.gen::<f32>() - 0.5) * 2.0;
            }
        }
        ws
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut v: Vec<&mut Vec<f32>> = vec![
            &mut self.enc1.kernel.w,
            &mut self.enc1.bias,
            &mut self.enc2.kernel.w,
            &mut self.enc2.bias,
        ];
        for l in &mut self.layers {
            for g in &mut l.gates {
                v.push(&mut g.we.w);
                v.push(&mut g.wh1.w);
                v.push(&mut g.wh2.w);
                v.push(&mut g.bias);
            }
            v.push(&mut l.pool_mean);
            v.push(&mut l.pool_max);
        }
        if let Some(h) = &mut self.head {
            v.extend([
                &mut h.fc1_w,
                &mut h.fc1_b,
                &mut h.policy_w,
                &mut h.policy_b,
                &mut h.value_w,
                &mut h.value_b,
            ]);
        }
        v
    }
}

/// `e = W_E2 * (W_E1 * x + b_E1) + b_E2`, no nonlinearity.
pub fn encode(obs: &Tensor3, ws: &WeightSet) -> Result<Tensor3, NetError> {
    if obs.channels != 3 {
        return Err(shape_err("observation channels", 3, obs.channels));
    }
    ws.enc2.apply(&ws.enc1.apply(obs)?)
}

/// Ones on the outermost ring of squares, zeros inside.
pub fn boundary_channel(h: usize, w: usize) -> Tensor3 {
    let mut b = Tensor3::zeros(h, w, 1);
    for r in 0..h {
        for c in 0..w {
            if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
                b.set(r, c, 0, 1.0);
            }
        }
    }
    b
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub h: Tensor3,
    pub c: Tensor3,
}

impl LayerState {
    pub fn zeros(h: usize, w: usize, c: usize) -> LayerState {
        LayerState {
            h: Tensor3::zeros(h, w, c),
            c: Tensor3::zeros(h, w, c),
        }
    }
}

/// Everything one ConvLSTM tick consumed and produced.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub layer: usize,
    pub tick: usize,
    /// Encoder output with the boundary channel appended.
    pub x_enc: Tensor3,
    pub h_below: Tensor3,
    /// Own previous hidden state with the broadcast pooled channels appended.
    pub x_own: Tensor3,
    /// Pre-activations and activations, indexed by `Gate as usize`.
    pub pre: [Tensor3; 4],
    pub gates: [Tensor3; 4],
    pub c: Tensor3,
    pub h: Tensor3,
}

impl TickRecord {
    pub fn gate(&self, g: Gate) -> &Tensor3 {
        &self.gates[g as usize]
    }
}

/// Pooled vector `a_c * mean(h) + b_c * max(h)` broadcast to C channels.
pub fn pool_inject(h_prev: &Tensor3, lw: &LayerWeights) -> Tensor3 {
    let (mean, max) = h_prev.pool();
    let v: Vec<f32> = (0..h_prev.channels)
        .map(|k| lw.pool_mean[k] * mean[k] + lw.pool_max[k] * max[k])
        .collect();
    let mut out = Tensor3::zeros(h_prev.height, h_prev.width, h_prev.channels);
    for px in out.data.chunks_mut(h_prev.channels) {
        px.copy_from_slice(&v);
    }
    out
}

/// Gate pre-activations from the three input groups, stacked as 4C channels in gate order.
pub fn gate_preactivations(
    x_enc: &Tensor3,
    h_below: &Tensor3,
    x_own: &Tensor3,
    lw: &LayerWeights,
) -> Result<[Tensor3; 4], NetError> {
    let c = lw.pool_mean.len();
    let mut out: Vec<Tensor3> = Vec::with_capacity(4);
    for g in Gate::ALL {
        let gw = lw.gate(g);
        for (name, x, k) in [
            ("x_enc", x_enc, &gw.we),
            ("h_below", h_below, &gw.wh1),
            ("x_own", x_own, &gw.wh2),
        ] {
            if x.channels != k.c_in {
                return Err(shape_err(
                    format!("gate {} {name}", g.name()),
                    k.c_in,
                    x.channels,
                ));
            }
        }
        let mut t = Tensor3::zeros(x_enc.height, x_enc.width, c);
        conv_accumulate(x_enc, &gw.we, &mut t, 0);
        conv_accumulate(h_below, &gw.wh1, &mut t, 0);
        conv_accumulate(x_own, &gw.wh2, &mut t, 0);
        add_bias(&mut t, &gw.bias);
        out.push(t);
    }
    Ok(out.try_into().expect("four gates"))
}

/// One ConvLSTM tick. `interventions` are applied to the gates, then the cell, then the
/// hidden state, each before its downstream use.
#[allow(clippy::too_many_arguments)]
pub fn convlstm_tick_with(
    state: &LayerState,
    e_t: &Tensor3,
    h_below: &Tensor3,
    boundary: &Tensor3,
    lw: &LayerWeights,
    layer: usize,
    tick: usize,
    interventions: &[InterventionSpec],
) -> Result<(LayerState, TickRecord), NetError> {
    let x_enc = Tensor3::concat(&[e_t, boundary]);
    let pooled = pool_inject(&state.h, lw);
    let x_own = Tensor3::concat(&[&state.h, &pooled]);
    let pre = gate_preactivations(&x_enc, h_below, &x_own, lw)?;
    let mut gates: [Tensor3; 4] = [0, 1, 2, 3].map(|k| pre[k].map(|v| Gate::ALL[k].activate(v)));
    for spec in interventions.iter().filter(|s| s.applies(layer, tick)) {
        if let Site::Gate(g) = spec.site {
            spec.apply(&mut gates[g as usize])?;
        }
    }
    let [i, j, f, o] = &gates;
    let mut c = Tensor3::zeros(state.c.height, state.c.width, state.c.channels);
    for k in 0..c.data.len() {
        c.data[k] = f.data[k] * state.c.data[k] + i.data[k] * j.data[k];
    }
    for spec in interventions
        .iter()
        .filter(|s| s.applies(layer, tick) && s.site == Site::Cell)
    {
        spec.apply(&mut c)?;
    }
    let mut h = o.zip(&c, |o, c| o * c.tanh());
    for spec in interventions
        .iter()
        .filter(|s| s.applies(layer, tick) && s.site == Site::Hidden)
    {
        spec.apply(&mut h)?;
    }
    let record = TickRecord {
        layer,
        tick,
        x_enc,
        h_below: h_below.clone(),
        x_own,
        pre,
        gates,
        c: c.clone(),
        h: h.clone(),
    };
    Ok((LayerState { h, c }, record))
}

/// Plain ConvLSTM tick without interventions.
pub fn convlstm_tick(
    state: &LayerState,
    e_t: &Tensor3,
    h_below: &Tensor3,
    boundary: &Tensor3,
    lw: &LayerWeights,
) -> Result<LayerState, NetError> {
    convlstm_tick_with(state, e_t, h_below, boundary, lw, 0, 0, &[]).map(|(s, _)| s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrcState {
    pub layers: Vec<LayerState>,
}

impl DrcState {
    pub fn zeros(config: &DrcConfig, h: usize, w: usize) -> DrcState {
        DrcState {
            layers: (0..config.layers)
                .map(|_| LayerState::zeros(h, w, config.channels))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub state: DrcState,
    /// Absent when the weights carry no head or the grid size differs from the head's.
    pub logits: Option<[f32; 4]>,
    pub value: Option<f32>,
    pub records: Vec<TickRecord>,
}

/// Run `ticks` ticks of all layers on one observation.
pub fn drc_forward(
    state: &DrcState,
    obs: &Tensor3,
    ws: &WeightSet,
    ticks: usize,
    interventions: &[InterventionSpec],
    record: bool,
) -> Result<ForwardOutput, NetError> {
    if ticks == 0 {
        return Err(NetError::ZeroTicks);
    }
    let c = ws.config.channels;
    let d = ws.layers.len();
    if state.layers.len() != d {
        return Err(shape_err("state layers", d, state.layers.len()));
    }
    for spec in interventions {
        spec.validate(d, c, obs.height, obs.width)?;
    }
    let e = encode(obs, ws)?;
    let boundary = boundary_channel(obs.height, obs.width);
    let mut layers = state.layers.clone();
    let mut records = Vec::new();
    for n in 0..ticks {
        for k in 0..d {
            let below = if k == 0 {
                layers[d - 1].h.clone()
            } else {
                layers[k - 1].h.clone()
            };
            let (next, rec) = convlstm_tick_with(
                &layers[k],
                &e,
                &below,
                &boundary,
                &ws.layers[k],
                k,
                n,
                interventions,
            )?;
            layers[k] = next;
            if record {
                records.push(rec);
            }
        }
    }
    let (logits, value) = match &ws.head {
        Some(head) if head.inputs() == layers[d - 1].h.data.len() => {
            let (l, v) = head.forward(&layers[d - 1].h)?;
            (Some(l), Some(v))
        }
        _ => (None, None),
    };
    Ok(ForwardOutput {
        state: DrcState { layers },
        logits,
        value,
        records,
    })
}

/// Linear readout over final-layer channels, one weight row per action.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    /// `[actions][C]`
    pub w: Vec<Vec<f32>>,
    pub b: Vec<f32>,
}

impl Probe {
    pub fn zeros(actions: usize, c: usize) -> Probe {
        Probe {
            w: vec![vec![0.0; c]; actions],
            b: vec![0.0; actions],
        }
    }
    pub fn param_count(&self) -> usize {
        self.w.iter().map(|r| r.len() + 1).sum()
    }
}

/// `logit_a = mean over squares of (w_a . h[s] + b_a)`.
pub fn probe_readout(h: &Tensor3, probe: &Probe) -> Result<Vec<f32>, NetError> {
    let c = probe.w.first().map_or(0, |r| r.len());
    if h.channels != c {
        return Err(shape_err("probe channels", c, h.channels));
    }
    let (mean, _) = h.pool();
    Ok(probe
        .w
        .iter()
        .zip(&probe.b)
        .map(|(w, b)| w.iter().zip(&mean).map(|(a, x)| a * x).sum::<f32>() + b)
        .collect())
}

pub fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}
