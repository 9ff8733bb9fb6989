//! Text forms of interventions and ablations, as used on the command line.
//!
//! Fields are `key=value` pairs separated by commas. Lists inside a field use `;`,
//! channel lists use `+`. Channels are indices, `a..b` ranges, role groups such as
//! `box_short`, single roles such as `box_short.right`, entity names, or `plan`.

use super::{AblationMode, AblationSpec, InputGroup, InterpError, KernelSlice};
use crate::net::{Edit, Gate, InterventionSpec, Site};
use crate::planner::{ChannelMap, ENTITY_NAMES};
use crate::sokoban::{Action, Pos};

fn bad(msg: impl Into<String>) -> InterpError {
    InterpError::Spec(msg.into())
}

fn group(map: &ChannelMap, name: &str) -> Option<[usize; 4]> {
    Some(match name {
        "box_short" => map.box_short,
        "box_long" => map.box_long,
        "agent_short" => map.agent_short,
        "gna" => map.gna,
        "pna" => map.pna,
        _ => return None,
    })
}

fn parse_usize(s: &str, what: &str) -> Result<usize, InterpError> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("{what}: not an index: {s:?}")))
}

/// Channel indices named by `s`, in the order given.
pub fn resolve_channels(s: &str, map: &ChannelMap) -> Result<Vec<usize>, InterpError> {
    let mut out = Vec::new();
    for item in s.split('+').map(str::trim) {
        if item.is_empty() {
            return Err(bad("empty channel name"));
        }
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (
                parse_usize(a, "channel range")?,
                parse_usize(b, "channel range")?,
            );
            out.extend(a..b);
        } else if item.bytes().all(|b| b.is_ascii_digit()) {
            out.push(parse_usize(item, "channel")?);
        } else if item == "plan" {
            out.extend(map.plan_channels());
        } else if let Some(k) = ENTITY_NAMES.iter().position(|&n| n == item) {
            out.push([map.wall, map.target, map.boxes, map.agent][k]);
        } else if let Some(g) = group(map, item) {
            out.extend(g);
        } else if let Some((g, d)) = item.split_once('.') {
            let g = group(map, g).ok_or_else(|| bad(format!("unknown channel group {g:?}")))?;
            let d = Action::ALL
                .into_iter()
                .find(|a| a.name() == d)
                .ok_or_else(|| bad(format!("unknown direction {d:?}")))?;
            out.push(g[d.index()]);
        } else {
            return Err(bad(format!("unknown channel {item:?}")));
        }
    }
    if let Some(&c) = out.iter().find(|&&c| c >= map.channels) {
        return Err(bad(format!(
            "channel {c} out of range for {} channels",
            map.channels
        )));
    }
    Ok(out)
}

fn fields(s: &str) -> Result<Vec<(&str, &str)>, InterpError> {
    s.split(',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(|f| {
            f.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(format!("expected key=value, got {f:?}")))
        })
        .collect()
}

fn parse_squares(v: &str) -> Result<Vec<Pos>, InterpError> {
    v.split(';')
        .map(|sq| {
            let (r, c) = sq
                .split_once(':')
                .ok_or_else(|| bad(format!("square must be row:col, got {sq:?}")))?;
            Ok(Pos::new(
                parse_usize(r, "square row")?,
                parse_usize(c, "square col")?,
            ))
        })
        .collect()
}

fn parse_list(v: &str, what: &str) -> Result<Vec<usize>, InterpError> {
    v.split(';').map(|t| parse_usize(t, what)).collect()
}

fn parse_f32(v: &str, what: &str) -> Result<f32, InterpError> {
    v.parse::<f32>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(format!("{what}: not a number: {v:?}")))
}

fn parse_site(v: &str) -> Result<Site, InterpError> {
    Site::from_name(v).ok_or_else(|| bad(format!("unknown site {v:?}")))
}

/// `layer=0,site=h,channels=box_short.right,squares=3:4;3:5,ticks=0;1,alpha=0,c=2`, or
/// `edit=abs` in place of `alpha` and `c`.
pub fn parse_intervention(s: &str, map: &ChannelMap) -> Result<InterventionSpec, InterpError> {
    let mut spec = InterventionSpec::affine(0, Site::Hidden, Vec::new(), 1.0, 0.0);
    let (mut alpha, mut c, mut abs) = (1.0, vec![0.0], false);
    for (k, v) in fields(s)? {
        match k {
            "layer" => spec.layer = parse_usize(v, "layer")?,
            "site" => spec.site = parse_site(v)?,
            "channels" => spec.channels = resolve_channels(v, map)?,
            "squares" => spec.squares = Some(parse_squares(v)?),
            "ticks" => spec.ticks = Some(parse_list(v, "tick")?),
            "alpha" => alpha = parse_f32(v, "alpha")?,
            "c" => {
                c = v
                    .split(';')
                    .map(|x| parse_f32(x, "c"))
                    .collect::<Result<_, _>>()?
            }
            "edit" if v == "abs" => abs = true,
            "edit" if v == "affine" => {}
            _ => return Err(bad(format!("unknown intervention field {k}={v}"))),
        }
    }
    if spec.channels.is_empty() {
        return Err(bad("intervention names no channels"));
    }
    spec.edit = if abs {
        Edit::Abs
    } else {
        Edit::Affine { alpha, c }
    };
    Ok(spec)
}

/// `layer:gate:group:in:out`, e.g. `0:o:own:3:3`.
fn parse_slice(v: &str) -> Result<KernelSlice, InterpError> {
    let p: Vec<&str> = v.split(':').collect();
    if p.len() != 5 {
        return Err(bad(format!(
            "kernel slice must be layer:gate:group:in:out, got {v:?}"
        )));
    }
    Ok(KernelSlice {
        layer: parse_usize(p[0], "slice layer")?,
        gate: Gate::from_name(p[1]).ok_or_else(|| bad(format!("unknown gate {:?}", p[1])))?,
        group: InputGroup::from_name(p[2])
            .ok_or_else(|| bad(format!("unknown input group {:?}", p[2])))?,
        in_ch: parse_usize(p[3], "slice input")?,
        out_ch: parse_usize(p[4], "slice output")?,
    })
}

/// `mode=mean,site=h,channels=plan,ticks=0;1,source=suite`, `mode=cache_1step,channels=...`
/// or `mode=zero_kernel,slices=0:o:own:3:3;0:i:enc:1:3`.
pub fn parse_ablation(s: &str, map: &ChannelMap) -> Result<AblationSpec, InterpError> {
    let mut mode = None;
    let mut spec = AblationSpec::cache(Vec::new());
    for (k, v) in fields(s)? {
        match k {
            "mode" => {
                mode = Some(
                    AblationMode::from_name(v)
                        .ok_or_else(|| bad(format!("unknown ablation mode {v:?}")))?,
                )
            }
            "site" => spec.site = parse_site(v)?,
            "channels" => spec.channels = resolve_channels(v, map)?,
            "ticks" => spec.ticks = Some(parse_list(v, "tick")?),
            "source" => spec.mean_source = Some(v.to_string()),
            "slices" => spec.slices = v.split(';').map(parse_slice).collect::<Result<_, _>>()?,
            _ => return Err(bad(format!("unknown ablation field {k}={v}"))),
        }
    }
    spec.mode = mode.ok_or_else(|| bad("ablation needs mode="))?;
    match spec.mode {
        AblationMode::ZeroKernel if spec.slices.is_empty() => {
            Err(bad("zero_kernel ablation needs slices="))
        }
        AblationMode::MeanActivation | AblationMode::Cache1Step if spec.channels.is_empty() => {
            Err(bad("ablation names no channels"))
        }
        _ => Ok(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::default_channel_map;

    #[test]
    fn channel_names() {
        let m = default_channel_map(24).unwrap();
        assert_eq!(resolve_channels("box_short.right", &m).unwrap(), vec![3]);
        assert_eq!(
            resolve_channels("gna+agent+5", &m).unwrap(),
            vec![12, 13, 14, 15, 23, 5]
        );
        assert_eq!(resolve_channels("0..3", &m).unwrap(), vec![0, 1, 2]);
        assert!(resolve_channels("box_short.north", &m).is_err());
        assert!(resolve_channels("24", &m).is_err());
    }

    #[test]
    fn intervention_text() {
        let m = default_channel_map(24).unwrap();
        let s = parse_intervention(
            "site=h,channels=box_short.right,squares=2:3,alpha=0,c=1.5",
            &m,
        )
        .unwrap();
        assert_eq!(s.channels, vec![3]);
        assert_eq!(s.squares, Some(vec![Pos::new(2, 3)]));
        assert_eq!(
            s.edit,
            Edit::Affine {
                alpha: 0.0,
                c: vec![1.5]
            }
        );
        assert_eq!(
            parse_intervention("channels=3,edit=abs", &m).unwrap().edit,
            Edit::Abs
        );
        assert!(parse_intervention("site=h", &m).is_err());
        assert!(parse_intervention("channels=3,bogus=1", &m).is_err());
    }

    #[test]
    fn ablation_text() {
        let m = default_channel_map(24).unwrap();
        let a = parse_ablation("mode=cache_1step,channels=plan", &m).unwrap();
        assert_eq!(a.channels.len(), 12);
        let z = parse_ablation("mode=zero_kernel,slices=0:o:own:3:3", &m).unwrap();
        assert_eq!(z.slices[0].gate, Gate::O);
        assert!(parse_ablation("channels=3", &m).is_err());
    }
}
