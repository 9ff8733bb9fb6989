//! Dense H×W×C activation maps, stored row-major as (row, col, channel).

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tensor3({}x{}x{})",
            self.height, self.width, self.channels
        )
    }
}

impl Tensor3 {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, v: f32) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![v; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width * channels, "tensor data length");
        Tensor3 {
            height,
            width,
            channels,
            data,
        }
    }

    #[inline]
    pub fn idx(&self, r: usize, c: usize, ch: usize) -> usize {
        (r * self.width + c) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, ch: usize) -> f32 {
        self.data[self.idx(r, c, ch)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, ch: usize, v: f32) {
        let i = self.idx(r, c, ch);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, ch: usize, v: f32) {
        let i = self.idx(r, c, ch);
        self.data[i] += v;
    }

    /// Signed lookup with zero outside the grid.
    #[inline]
    pub fn at(&self, r: isize, c: isize, ch: usize) -> f32 {
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            0.0
        } else {
            self.get(r as usize, c as usize, ch)
        }
    }

    pub fn pixel(&self, r: usize, c: usize) -> &[f32] {
        let i = self.idx(r, c, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Tensor3) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Copy of one channel as an H×W×1 tensor.
    pub fn channel(&self, ch: usize) -> Tensor3 {
        let mut out = Tensor3::zeros(self.height, self.width, 1);
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(r, c, 0, self.get(r, c, ch));
            }
        }
        out
    }

    pub fn channel_values(&self, ch: usize) -> Vec<f32> {
        (0..self.height * self.width)
            .map(|i| self.data[i * self.channels + ch])
            .collect()
    }

    /// Concatenate along the channel axis.
    pub fn concat(parts: &[&Tensor3]) -> Tensor3 {
        let (h, w) = (parts[0].height, parts[0].width);
        let total: usize = parts.iter().map(|p| p.channels).sum();
        let mut out = Tensor3::zeros(h, w, total);
        for r in 0..h {
            for c in 0..w {
                let mut off = 0;
                for p in parts {
                    assert!(p.height == h && p.width == w, "concat spatial mismatch");
                    let dst = out.idx(r, c, off);
                    out.data[dst..dst + p.channels].copy_from_slice(p.pixel(r, c));
                    off += p.channels;
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor3 {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Tensor3 {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    pub fn zip(&self, other: &Tensor3, f: impl Fn(f32, f32) -> f32) -> Tensor3 {
        assert!(self.same_shape(other), "zip shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Tensor3 {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    pub fn scale(&self, k: f32) -> Tensor3 {
        self.map(|v| v * k)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-channel mean and max over all squares.
    pub fn pool(&self) -> (Vec<f32>, Vec<f32>) {
        let n = (self.height * self.width) as f32;
        let mut mean = vec![0.0f32; self.channels];
        let mut max = vec![f32::NEG_INFINITY; self.channels];
        for px in self.data.chunks(self.channels.max(1)) {
            for (ch, &v) in px.iter().enumerate() {
                mean[ch] += v;
                if v > max[ch] {
                    max[ch] = v;
                }
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        if self.height * self.width == 0 {
            max.iter_mut().for_each(|m| *m = 0.0);
        }
        (mean, max)
    }
}
