//! One-channel heatmaps as binary PPM images and `row,col,value` CSV.

use super::HarnessError;
use crate::tensor::Tensor3;
use std::io::Write;

/// Diverging colour of `v` for scale `m = max|a|`: blue below zero, white at zero, red above.
pub fn diverging(v: f32, m: f32) -> [u8; 3] {
    if m <= 0.0 || v == 0.0 || !v.is_finite() {
        return [255, 255, 255];
    }
    let s = (v / m).clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - s.abs())).round() as u8;
    if s > 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

fn check(t: &Tensor3, channel: usize) -> Result<(), HarnessError> {
    if channel >= t.channels {
        return Err(HarnessError::Channel {
            channel,
            channels: t.channels,
        });
    }
    Ok(())
}

/// P6 image of `channel`, each square drawn as a `cell`×`cell` block.
pub fn heatmap_ppm(t: &Tensor3, channel: usize, cell: usize) -> Result<Vec<u8>, HarnessError> {
    check(t, channel)?;
    let cell = cell.max(1);
    let m = t
        .channel_values(channel)
        .iter()
        .fold(0.0f32, |a, v| a.max(v.abs()));
    let (w, h) = (t.width * cell, t.height * cell);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for r in 0..h {
        for c in 0..w {
            out.extend(diverging(t.get(r / cell, c / cell, channel), m));
        }
    }
    Ok(out)
}

/// `row,col,value` lines for `channel`, values in shortest round-trip form.
pub fn heatmap_csv(t: &Tensor3, channel: usize) -> Result<String, HarnessError> {
    check(t, channel)?;
    let mut s = String::from("row,col,value\n");
    for r in 0..t.height {
        for c in 0..t.width {
            s.push_str(&format!("{r},{c},{}\n", t.get(r, c, channel)));
        }
    }
    Ok(s)
}

/// One-channel tensor from [`heatmap_csv`] output.
pub fn read_heatmap_csv(text: &str) -> Result<Tensor3, HarnessError> {
    let mut cells = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let bad = || HarnessError::Csv {
            line: k + 1,
            text: line.to_string(),
        };
        let p: Vec<&str> = line.split(',').collect();
        if p.len() != 3 {
            return Err(bad());
        }
        let r: usize = p[0].parse().map_err(|_| bad())?;
        let c: usize = p[1].parse().map_err(|_| bad())?;
        let v: f32 = p[2].parse().map_err(|_| bad())?;
        cells.push((r, c, v));
    }
    let h = cells.iter().map(|x| x.0 + 1).max().unwrap_or(0);
    let w = cells.iter().map(|x| x.1 + 1).max().unwrap_or(0);
    let mut t = Tensor3::zeros(h, w, 1);
    for (r, c, v) in cells {
        t.set(r, c, 0, v);
    }
    Ok(t)
}

/// Write the image to `ppm` and the CSV to `csv`.
pub fn dump_heatmap(
    t: &Tensor3,
    channel: usize,
    cell: usize,
    mut ppm: impl Write,
    mut csv: impl Write,
) -> Result<(), HarnessError> {
    ppm.write_all(&heatmap_ppm(t, channel, cell)?)?;
    csv.write_all(heatmap_csv(t, channel)?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_ends() {
        assert_eq!(diverging(0.0, 1.0), [255, 255, 255]);
        assert_eq!(diverging(1.0, 1.0), [255, 0, 0]);
        assert_eq!(diverging(-2.0, 2.0), [0, 0, 255]);
        assert_eq!(diverging(0.5, 1.0), [255, 128, 128]);
    }

    #[test]
    fn header_and_size() {
        let t = Tensor3::zeros(2, 3, 1);
        let img = heatmap_ppm(&t, 0, 2).unwrap();
        assert!(img.starts_with(b"P6\n6 4\n255\n"));
        assert_eq!(img.len(), b"P6\n6 4\n255\n".len() + 6 * 4 * 3);
        assert!(heatmap_ppm(&t, 1, 1).is_err());
    }
}
