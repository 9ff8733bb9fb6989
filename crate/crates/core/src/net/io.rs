//! Binary weight files.
//!
//! ```text
//! "DRCW"  u8 version=1  u32 count
//! count × { u16 name_len, name (UTF-8), u8 ndim, ndim × u32 dims, prod(dims) × f32 }
//! ```
//! All integers and floats are little-endian; values are row-major.

use super::{
    Conv, DrcConfig, Gate, GateWeights, Head, Kernel, LayerWeights, WeightSet, HEAD_HIDDEN,
};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"DRCW";
pub const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum WeightIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"DRCW\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}, expected 1")]
    Version(u8),
    #[error("file truncated in header")]
    TruncatedHeader,
    #[error("file truncated inside tensor {0:?}")]
    TruncatedTensor(String),
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("unknown tensor {name:?}; expected one of: {}", expected.join(", "))]
    Unknown { name: String, expected: Vec<String> },
    #[error("missing tensor {0:?}")]
    Missing(String),
    #[error("duplicate tensor {0:?}")]
    Duplicate(String),
}

/// Canonical (name, shape, values) triples in file order.
fn named_tensors(ws: &WeightSet) -> Vec<(String, Vec<usize>, &Vec<f32>)> {
    let kdims = |k: &Kernel| vec![k.c_out, k.c_in, k.kh, k.kw];
    let mut out = vec![
        (
            "encoder.conv1.weight".to_string(),
            kdims(&ws.enc1.kernel),
            &ws.enc1.kernel.w,
        ),
        (
            "encoder.conv1.bias".to_string(),
            vec![ws.enc1.bias.len()],
            &ws.enc1.bias,
        ),
        (
            "encoder.conv2.weight".to_string(),
            kdims(&ws.enc2.kernel),
            &ws.enc2.kernel.w,
        ),
        (
            "encoder.conv2.bias".to_string(),
            vec![ws.enc2.bias.len()],
            &ws.enc2.bias,
        ),
    ];
    for (d, l) in ws.layers.iter().enumerate() {
        for g in Gate::ALL {
            let gw = l.gate(g);
            let n = g.name();
            out.push((format!("layer{d}.{n}.We"), kdims(&gw.we), &gw.we.w));
            out.push((format!("layer{d}.{n}.Wh1"), kdims(&gw.wh1), &gw.wh1.w));
            out.push((format!("layer{d}.{n}.Wh2"), kdims(&gw.wh2), &gw.wh2.w));
            out.push((format!("layer{d}.{n}.bias"), vec![gw.bias.len()], &gw.bias));
        }
        out.push((
            format!("layer{d}.pool.mean"),
            vec![l.pool_mean.len()],
            &l.pool_mean,
        ));
        out.push((
            format!("layer{d}.pool.max"),
            vec![l.pool_max.len()],
            &l.pool_max,
        ));
    }
    if let Some(h) = &ws.head {
        out.push((
            "head.fc1.weight".into(),
            vec![h.hidden, h.inputs()],
            &h.fc1_w,
        ));
        out.push(("head.fc1.bias".into(), vec![h.hidden], &h.fc1_b));
        out.push(("head.policy.weight".into(), vec![4, h.hidden], &h.policy_w));
        out.push(("head.policy.bias".into(), vec![4], &h.policy_b));
        out.push(("head.value.weight".into(), vec![1, h.hidden], &h.value_w));
        out.push(("head.value.bias".into(), vec![1], &h.value_b));
    }
    out
}

pub fn write_weights(ws: &WeightSet, mut sink: impl Write) -> Result<(), WeightIoError> {
    let tensors = named_tensors(ws);
    sink.write_all(MAGIC)?;
    sink.write_all(&[VERSION])?;
    sink.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, dims, vals) in tensors {
        sink.write_all(&(name.len() as u16).to_le_bytes())?;
        sink.write_all(name.as_bytes())?;
        sink.write_all(&[dims.len() as u8])?;
        for d in &dims {
            sink.write_all(&(*d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(vals.len() * 4);
        for v in vals {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
    }
    Ok(())
}

pub fn save_weights(ws: &WeightSet, path: &Path) -> Result<(), WeightIoError> {
    let mut buf = Vec::new();
    write_weights(ws, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// A tensor as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

fn read_exact_or(
    src: &mut impl Read,
    buf: &mut [u8],
    err: impl Fn() -> WeightIoError,
) -> Result<(), WeightIoError> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => err(),
        _ => WeightIoError::Io(e),
    })
}

/// Parse the container without interpreting names.
pub fn read_raw(mut src: impl Read) -> Result<Vec<(String, RawTensor)>, WeightIoError> {
    let hdr = || WeightIoError::TruncatedHeader;
    let mut magic = [0u8; 4];
    read_exact_or(&mut src, &mut magic, hdr)?;
    if &magic != MAGIC {
        return Err(WeightIoError::BadMagic(magic));
    }
    let mut b1 = [0u8; 1];
    read_exact_or(&mut src, &mut b1, hdr)?;
    if b1[0] != VERSION {
        return Err(WeightIoError::Version(b1[0]));
    }
    let mut b4 = [0u8; 4];
    read_exact_or(&mut src, &mut b4, hdr)?;
    let count = u32::from_le_bytes(b4) as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let mut b2 = [0u8; 2];
        read_exact_or(&mut src, &mut b2, hdr)?;
        let mut name = vec![0u8; u16::from_le_bytes(b2) as usize];
        read_exact_or(&mut src, &mut name, hdr)?;
        let name = String::from_utf8(name).map_err(|_| WeightIoError::BadName)?;
        let trunc = || WeightIoError::TruncatedTensor(name.clone());
        read_exact_or(&mut src, &mut b1, trunc)?;
        let mut dims = Vec::with_capacity(b1[0] as usize);
        for _ in 0..b1[0] {
            read_exact_or(&mut src, &mut b4, trunc)?;
            dims.push(u32::from_le_bytes(b4) as usize);
        }
        let n: usize = dims.iter().product();
        let mut bytes = vec![0u8; n * 4];
        read_exact_or(&mut src, &mut bytes, trunc)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.push((name, RawTensor { dims, data }));
    }
    Ok(out)
}

/// Expected shape of every canonical tensor under `config` (head included).
pub fn expected_shapes(config: &DrcConfig) -> Vec<(String, Vec<usize>)> {
    let ws = WeightSet::zeros(*config);
    named_tensors(&ws)
        .into_iter()
        .map(|(n, d, _)| (n, d))
        .collect()
}

/// Read a weight file and check every tensor against `config`. Head tensors are optional
/// as a group.
pub fn read_weights(src: impl Read, config: &DrcConfig) -> Result<WeightSet, WeightIoError> {
    let raw = read_raw(src)?;
    let expected = expected_shapes(config);
    let mut by_name: BTreeMap<String, RawTensor> = BTreeMap::new();
    for (name, t) in raw {
        let Some((_, shape)) = expected.iter().find(|(n, _)| *n == name) else {
            return Err(WeightIoError::Unknown {
                name,
                expected: expected.iter().map(|(n, _)| n.clone()).collect(),
            });
        };
        if *shape != t.dims {
            return Err(WeightIoError::Shape {
                name,
                expected: shape.clone(),
                found: t.dims,
            });
        }
        if by_name.insert(name.clone(), t).is_some() {
            return Err(WeightIoError::Duplicate(name));
        }
    }
    let has_head = by_name.keys().any(|k| k.starts_with("head."));
    let mut take = |name: &str| -> Result<Vec<f32>, WeightIoError> {
        by_name
            .remove(name)
            .map(|t| t.data)
            .ok_or_else(|| WeightIoError::Missing(name.to_string()))
    };
    let c = config.channels;
    let kernel = |data: Vec<f32>, o: usize, i: usize, k: usize| Kernel {
        w: data,
        ..Kernel::zeros(o, i, k, k)
    };
    let enc1 = Conv {
        kernel: kernel(take("encoder.conv1.weight")?, c, 3, 4),
        bias: take("encoder.conv1.bias")?,
    };
    let enc2 = Conv {
        kernel: kernel(take("encoder.conv2.weight")?, c, c, 4),
        bias: take("encoder.conv2.bias")?,
    };
    let mut layers = Vec::with_capacity(config.layers);
    for d in 0..config.layers {
        let mut gates = Vec::with_capacity(4);
        for g in Gate::ALL {
            let n = g.name();
            gates.push(GateWeights {
                we: kernel(take(&format!("layer{d}.{n}.We"))?, c, c + 1, 3),
                wh1: kernel(take(&format!("layer{d}.{n}.Wh1"))?, c, c, 3),
                wh2: kernel(take(&format!("layer{d}.{n}.Wh2"))?, c, 2 * c, 3),
                bias: take(&format!("layer{d}.{n}.bias"))?,
            });
        }
        layers.push(LayerWeights {
            gates: gates.try_into().expect("four gates"),
            pool_mean: take(&format!("layer{d}.pool.mean"))?,
            pool_max: take(&format!("layer{d}.pool.max"))?,
        });
    }
    let head = if has_head {
        Some(Head {
            hidden: HEAD_HIDDEN,
            fc1_w: take("head.fc1.weight")?,
            fc1_b: take("head.fc1.bias")?,
            policy_w: take("head.policy.weight")?,
            policy_b: take("head.policy.bias")?,
            value_w: take("head.value.weight")?,
            value_b: take("head.value.bias")?,
        })
    } else {
        None
    };
    Ok(WeightSet {
        config: *config,
        enc1,
        enc2,
        layers,
        head,
    })
}

pub fn load_weights(path: &Path, config: &DrcConfig) -> Result<WeightSet, WeightIoError> {
    let bytes = std::fs::read(path)?;
    read_weights(&bytes[..], config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DrcConfig {
        DrcConfig {
            layers: 2,
            ticks: 1,
            channels: 3,
            height: 4,
            width: 4,
        }
    }

    #[test]
    fn round_trip() {
        let ws = WeightSet::random(small(), 0.5, 3);
        let mut buf = Vec::new();
        write_weights(&ws, &mut buf).unwrap();
        assert_eq!(read_weights(&buf[..], &small()).unwrap(), ws);
    }

    #[test]
    fn truncation_names_tensor() {
        let ws = WeightSet::random(small(), 0.5, 3);
        let mut buf = Vec::new();
        write_weights(&ws, &mut buf).unwrap();
        buf.truncate(60);
        match read_weights(&buf[..], &small()) {
            Err(WeightIoError::TruncatedTensor(n)) => assert_eq!(n, "encoder.conv1.weight"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            read_weights(&b"NOPE\x01\0\0\0\0"[..], &small()),
            Err(WeightIoError::BadMagic(_))
        ));
        assert!(matches!(
            read_weights(&b"DRCW\x02\0\0\0\0"[..], &small()),
            Err(WeightIoError::Version(2))
        ));
    }

    fn one_tensor(name: &str, dims: &[u32]) -> Vec<u8> {
        let mut b = b"DRCW\x01".to_vec();
        b.extend(1u32.to_le_bytes());
        b.extend((name.len() as u16).to_le_bytes());
        b.extend(name.as_bytes());
        b.push(dims.len() as u8);
        for d in dims {
            b.extend(d.to_le_bytes());
        }
        let n: u32 = dims.iter().product();
        b.extend(std::iter::repeat_n(0u8, 4 * n as usize));
        b
    }

    #[test]
    fn wrong_shape_and_unknown_name() {
        match read_weights(&one_tensor("encoder.conv1.bias", &[5])[..], &small()) {
            Err(WeightIoError::Shape {
                name,
                expected,
                found,
            }) => {
                assert_eq!(name, "encoder.conv1.bias");
                assert_eq!(expected, vec![3]);
                assert_eq!(found, vec![5]);
            }
            other => panic!("{other:?}"),
        }
        match read_weights(&one_tensor("encoder.conv3.bias", &[3])[..], &small()) {
            Err(WeightIoError::Unknown { expected, .. }) => {
                assert!(expected.contains(&"layer1.o.Wh2".to_string()))
            }
            other => panic!("{other:?}"),
        }
    }
}
