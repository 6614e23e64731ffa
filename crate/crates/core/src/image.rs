//! Float image container shared by the renderer, canvases and metrics.

use crate::error::{Error, Result};
use std::path::Path;

/// Row-major, channel-interleaved float image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}x{}", height, width, channels),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Per-pixel luminance; Rec. 601 weights for RGB, identity for 1-channel.
    pub fn luminance(&self) -> Vec<f32> {
        match self.channels {
            1 => self.data.clone(),
            3 => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect(),
            c => {
                let inv = 1.0 / c as f32;
                self.data
                    .chunks_exact(c)
                    .map(|p| p.iter().sum::<f32>() * inv)
                    .collect()
            }
        }
    }

    /// Horizontal mirror (flip about the vertical mid-line).
    pub fn mirror_h(&self) -> Image {
        let mut out = Image::new(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(self.width - 1 - x, y, c));
                }
            }
        }
        out
    }

    /// Replicates a single-channel image into 3 channels.
    pub fn replicate_to_rgb(&self) -> Image {
        assert_eq!(self.channels, 1);
        let mut out = Image::new(self.width, self.height, 3);
        for (i, &v) in self.data.iter().enumerate() {
            out.data[i * 3] = v;
            out.data[i * 3 + 1] = v;
            out.data[i * 3 + 2] = v;
        }
        out
    }

    /// 2x average-pool downsample (truncates odd edges).
    pub fn downsample_half(&self) -> Image {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let mut out = Image::new(w, h, self.channels);
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    let x2 = (2 * x + 1).min(self.width - 1);
                    let y2 = (2 * y + 1).min(self.height - 1);
                    let s = self.get(2 * x, 2 * y, c)
                        + self.get(x2, 2 * y, c)
                        + self.get(2 * x, y2, c)
                        + self.get(x2, y2, c);
                    out.set(x, y, c, s * 0.25);
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Image) -> f32 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Writes an 8-bit PNG (grayscale for 1 channel, RGB for 3).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let to8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let bytes: Vec<u8> = self.data.iter().map(|&v| to8(v)).collect();
        let res = match self.channels {
            1 => image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
                .expect("raw buffer sized")
                .save(path),
            3 => image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
                .expect("raw buffer sized")
                .save(path),
            c => {
                return Err(Error::ShapeMismatch {
                    expected: "1 or 3 channels".into(),
                    got: format!("{c} channels"),
                })
            }
        };
        res.map_err(|source| Error::Png {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads an 8-bit PNG as floats in `[0, 1]`, preserving channel count.
    pub fn load_png(path: &Path) -> Result<Image> {
        let img = image::open(path).map_err(|source| Error::Png {
            path: path.to_path_buf(),
            source,
        })?;
        let (img, channels) = match img {
            image::DynamicImage::ImageLuma8(g) => (image::DynamicImage::ImageLuma8(g), 1),
            other => (image::DynamicImage::ImageRgb8(other.to_rgb8()), 3),
        };
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raw: Vec<u8> = match &img {
            image::DynamicImage::ImageLuma8(g) => g.as_raw().clone(),
            image::DynamicImage::ImageRgb8(r) => r.as_raw().clone(),
            _ => unreachable!(),
        };
        let data = raw.iter().map(|&b| b as f32 / 255.0).collect();
        Image::from_data(w, h, channels, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Image::new(8, 8, 3);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i % 255) as f32 / 254.0;
        }
        let path = dir.path().join("t.png");
        img.save_png(&path).unwrap();
        let back = Image::load_png(&path).unwrap();
        assert!(img.max_abs_diff(&back) <= 1.0 / 255.0 + 1e-6);
    }

    #[test]
    fn mirror_is_involutive() {
        let mut img = Image::new(5, 3, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = i as f32;
        }
        assert_eq!(img.mirror_h().mirror_h(), img);
    }
}
