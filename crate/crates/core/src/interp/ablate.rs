//! Mean, zero-kernel and one-step-cache ablations.

use super::{InputGroup, InterpError};
use crate::net::{Edit, Gate, InterventionSpec, NetError, Site, WeightSet};
use crate::planner::{run_planner, ChannelMap, Episode, MechanismGains, PlannerEdits, RunOptions};
use crate::sokoban::Level;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AblationMode {
    MeanActivation,
    ZeroKernel,
    Cache1Step,
}

impl AblationMode {
    pub fn name(self) -> &'static str {
        match self {
            AblationMode::MeanActivation => "mean",
            AblationMode::ZeroKernel => "zero_kernel",
            AblationMode::Cache1Step => "cache_1step",
        }
    }
    pub fn from_name(s: &str) -> Option<AblationMode> {
        match s {
            "mean" | "mean_activation" => Some(AblationMode::MeanActivation),
            "zero_kernel" => Some(AblationMode::ZeroKernel),
            "cache" | "cache_1step" => Some(AblationMode::Cache1Step),
            _ => None,
        }
    }
}

/// One `[out][in]` slice of a gate kernel.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct KernelSlice {
    pub layer: usize,
    pub gate: Gate,
    pub group: InputGroup,
    pub in_ch: usize,
    pub out_ch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationSpec {
    pub mode: AblationMode,
    pub site: Site,
    pub channels: Vec<usize>,
    /// `None` means every tick.
    pub ticks: Option<Vec<usize>>,
    pub slices: Vec<KernelSlice>,
    /// Name of the episode set the means come from.
    pub mean_source: Option<String>,
}

impl AblationSpec {
    pub fn mean(site: Site, channels: Vec<usize>, source: &str) -> AblationSpec {
        AblationSpec {
            mode: AblationMode::MeanActivation,
            site,
            channels,
            ticks: None,
            slices: Vec::new(),
            mean_source: Some(source.to_string()),
        }
    }
    pub fn cache(channels: Vec<usize>) -> AblationSpec {
        AblationSpec {
            mode: AblationMode::Cache1Step,
            site: Site::Hidden,
            channels,
            ticks: None,
            slices: Vec::new(),
            mean_source: None,
        }
    }
    pub fn zero(slices: Vec<KernelSlice>) -> AblationSpec {
        AblationSpec {
            mode: AblationMode::ZeroKernel,
            site: Site::Hidden,
            channels: Vec::new(),
            ticks: None,
            slices,
            mean_source: None,
        }
    }
}

/// Copy of `ws` with the named kernel slices set to zero.
pub fn zero_kernels(ws: &WeightSet, slices: &[KernelSlice]) -> Result<WeightSet, InterpError> {
    let mut out = ws.clone();
    for s in slices {
        let nl = out.layers.len();
        let lw = out.layers.get_mut(s.layer).ok_or(NetError::BadAddress {
            what: "layer",
            index: s.layer,
            limit: nl,
        })?;
        let gw = lw.gate_mut(s.gate);
        let k = match s.group {
            InputGroup::Encoder => &mut gw.we,
            InputGroup::Below => &mut gw.wh1,
            InputGroup::Own => &mut gw.wh2,
        };
        if s.out_ch >= k.c_out || s.in_ch >= k.c_in {
            return Err(NetError::BadAddress {
                what: "kernel slice",
                index: s.out_ch * k.c_in + s.in_ch,
                limit: k.c_out * k.c_in,
            }
            .into());
        }
        for y in 0..k.kh {
            for x in 0..k.kw {
                k.set(s.out_ch, s.in_ch, y, x, 0.0);
            }
        }
    }
    Ok(out)
}

/// Per-channel means of a planner site over an episode set, one value per channel of the
/// map. Means are per channel so they apply to levels of any size.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMeans {
    pub source: String,
    pub site: Site,
    pub values: Vec<f32>,
}

impl ChannelMeans {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("source,site,channel,mean\n");
        for (ch, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{},{ch},{v}\n", self.source, self.site.name()));
        }
        s
    }
}

/// Means over every square and every tick of `episodes` (recorded with `record_ticks`).
/// The planner's forget gate is identically zero; its other gates are not recorded.
pub fn channel_means(
    episodes: &[Episode],
    channels: usize,
    site: Site,
    source: &str,
) -> Result<ChannelMeans, InterpError> {
    let mut sum = vec![0.0f64; channels];
    let mut n = 0usize;
    match site {
        Site::Gate(Gate::F) => {}
        Site::Gate(g) => {
            return Err(InterpError::UndefinedMean(format!(
                "planner gate {}",
                g.name()
            )))
        }
        Site::Hidden | Site::Cell => {
            for ep in episodes {
                for g in &ep.tick_grids {
                    let t = if site == Site::Hidden {
                        &g.acts
                    } else {
                        &g.cell
                    };
                    for px in t.data.chunks(channels) {
                        for (s, &v) in sum.iter_mut().zip(px) {
                            *s += v as f64;
                        }
                        n += 1;
                    }
                }
            }
            if n == 0 {
                return Err(InterpError::UndefinedMean(format!(
                    "{source}: no recorded ticks"
                )));
            }
        }
    }
    let values = sum
        .iter()
        .map(|&s| if n == 0 { 0.0 } else { (s / n as f64) as f32 })
        .collect();
    Ok(ChannelMeans {
        source: source.to_string(),
        site,
        values,
    })
}

/// Edits that hold the targeted channels at their means.
pub fn mean_ablation_edits(
    means: &ChannelMeans,
    channels: &[usize],
    layer: usize,
    ticks: Option<Vec<usize>>,
) -> Vec<InterventionSpec> {
    channels
        .iter()
        .map(|&ch| InterventionSpec {
            layer,
            site: means.site,
            channels: vec![ch],
            squares: None,
            ticks: ticks.clone(),
            edit: Edit::Affine {
                alpha: 0.0,
                c: vec![means.values.get(ch).copied().unwrap_or(0.0)],
            },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationResult {
    pub mode: AblationMode,
    pub baseline: Vec<bool>,
    pub ablated: Vec<bool>,
}

impl AblationResult {
    fn rate(v: &[bool]) -> f64 {
        if v.is_empty() {
            0.0
        } else {
            v.iter().filter(|&&s| s).count() as f64 / v.len() as f64
        }
    }
    pub fn baseline_rate(&self) -> f64 {
        Self::rate(&self.baseline)
    }
    pub fn ablated_rate(&self) -> f64 {
        Self::rate(&self.ablated)
    }
    /// Baseline minus ablated solve rate.
    pub fn drop(&self) -> f64 {
        self.baseline_rate() - self.ablated_rate()
    }
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,baseline_solved,ablated_solved\n");
        for (k, (a, b)) in self.baseline.iter().zip(&self.ablated).enumerate() {
            s.push_str(&format!("{k},{},{}\n", *a as u8, *b as u8));
        }
        s
    }
    pub fn summary_csv(&self) -> String {
        format!(
            "mode,baseline_rate,ablated_rate,drop\n{},{},{},{}\n",
            self.mode.name(),
            self.baseline_rate(),
            self.ablated_rate(),
            self.drop()
        )
    }
}

/// Solve rates of the planner on `levels` with and without `spec`. Mean ablation needs
/// `means` for the spec's site.
pub fn run_ablation(
    levels: &[Level],
    map: &ChannelMap,
    gains: &MechanismGains,
    opts: &RunOptions,
    spec: &AblationSpec,
    means: Option<&ChannelMeans>,
) -> Result<AblationResult, InterpError> {
    if levels.is_empty() {
        return Err(InterpError::Empty("level set"));
    }
    let mut edits = PlannerEdits::default();
    match spec.mode {
        AblationMode::MeanActivation => {
            let m = means.filter(|m| m.site == spec.site).ok_or_else(|| {
                InterpError::UndefinedMean(
                    spec.mean_source
                        .clone()
                        .unwrap_or_else(|| spec.site.name().to_string()),
                )
            })?;
            edits.tick = mean_ablation_edits(m, &spec.channels, 0, spec.ticks.clone());
        }
        AblationMode::Cache1Step => edits.cache_channels = spec.channels.clone(),
        AblationMode::ZeroKernel => {
            return Err(InterpError::Spec(
                "zero_kernel ablation edits weight sets; use zero_kernels".into(),
            ));
        }
    }
    let run = |g: &MechanismGains, e: &PlannerEdits| -> Vec<bool> {
        crate::harness::map_ordered(levels, |l| run_planner(l, map, g, opts, e).solved)
    };
    Ok(AblationResult {
        mode: spec.mode,
        baseline: run(gains, &PlannerEdits::default()),
        ablated: run(gains, &edits),
    })
}
