//! Planar float images, value normalization, bilinear resizing and PNG I/O.
//!
//! Pixel data is stored planar: all of channel 0 in row-major order, then
//! channel 1, and so on. Synthesis always works in normalized space, where
//! the default [`NormStats`] map 8-bit values `[0, 255]` onto `[-1, 1]`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Planar, row-major float raster with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(channel, row, col)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// I.i.d. standard normal samples.
    pub fn noise<R: Rng + ?Sized>(
        width: usize,
        height: usize,
        channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let data = (0..width * height * channels)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(width, height, channels, data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    /// One channel as a contiguous row-major slice.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Top-left anchored crop.
    pub fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> Result<Image> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::InvalidArgument(format!(
                "crop {width}x{height} at ({top},{left}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        Image::from_fn(width, height, self.channels, |c, y, x| {
            self.get(c, top + y, left + x)
        })
    }

    /// Periodic translation: output(y, x) = input((y - dy) mod h, (x - dx) mod w).
    pub fn roll(&self, dy: usize, dx: usize) -> Image {
        let (w, h) = (self.width, self.height);
        Image::from_fn(w, h, self.channels, |c, y, x| {
            self.get(c, (y + h - dy % h) % h, (x + w - dx % w) % w)
        })
        .expect("same shape as a valid image")
    }

    /// Replicates a single channel into three, or keeps the image as is.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Image::new(self.width, self.height, 3, data).expect("valid shape")
    }

    /// Element-wise `self + scale * other`.
    pub fn add_scaled(&mut self, other: &Image, scale: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{}x{} to {}x{}x{}",
                other.width, other.height, other.channels, self.width, self.height, self.channels
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }
}

/// Per-channel affine map between 8-bit pixel values and the working space.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormStats {
    /// `[0, 255]` onto `[-1, 1]` for every channel.
    pub fn symmetric(channels: usize) -> Self {
        Self {
            shift: vec![127.5; channels],
            scale: vec![127.5; channels],
        }
    }

    fn check(&self, img: &Image) -> Result<()> {
        if self.shift.len() != img.channels() || self.scale.len() != img.channels() {
            return Err(Error::DimensionMismatch(format!(
                "stats cover {} channels, image has {}",
                self.shift.len(),
                img.channels()
            )));
        }
        if self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(
                "normalization scale must be positive and finite".into(),
            ));
        }
        if self.shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("normalization shift"));
        }
        if !img.is_finite() {
            return Err(Error::NonFinite("image data"));
        }
        Ok(())
    }

    /// `v -> (v - shift) / scale`.
    pub fn normalize(&self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = img.clone();
        let n = img.width() * img.height();
        for (c, plane) in out.data.chunks_mut(n).enumerate() {
            let (shift, scale) = (self.shift[c], self.scale[c]);
            plane.iter_mut().for_each(|v| *v = (*v - shift) / scale);
        }
        Ok(out)
    }

    /// `v -> v * scale + shift`, no clamping. Exact inverse of
    /// [`normalize`](Self::normalize) on 8-bit pixel values.
    pub fn denormalize(&self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = img.clone();
        let n = img.width() * img.height();
        for (c, plane) in out.data.chunks_mut(n).enumerate() {
            let (shift, scale) = (self.shift[c], self.scale[c]);
            plane.iter_mut().for_each(|v| *v = *v * scale + shift);
        }
        Ok(out)
    }
}

/// Source coordinate and interpolation weight for one output sample along an
/// axis, using half-pixel centers and edge clamping.
fn bilinear_taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f64)> {
    let ratio = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (in_len - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // Written so that a == b yields a exactly.
    a + t * (b - a)
}

/// Separable bilinear resize with half-pixel-centered sampling.
pub fn resize(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be positive, got {new_w}x{new_h}"
        )));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let xt = bilinear_taps(new_w, w);
    let yt = bilinear_taps(new_h, h);

    // Horizontal pass into (new_w x h), then vertical into (new_w x new_h).
    let mut tmp = vec![0.0; new_w * h * ch];
    for c in 0..ch {
        let plane = img.plane(c);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            let dst = &mut tmp[(c * h + y) * new_w..(c * h + y + 1) * new_w];
            for (d, &(lo, hi, t)) in dst.iter_mut().zip(&xt) {
                *d = lerp(row[lo], row[hi], t);
            }
        }
    }
    let mut out = vec![0.0; new_w * new_h * ch];
    for c in 0..ch {
        for (y, &(lo, hi, t)) in yt.iter().enumerate() {
            let a = &tmp[(c * h + lo) * new_w..(c * h + lo + 1) * new_w];
            let b = &tmp[(c * h + hi) * new_w..(c * h + hi + 1) * new_w];
            let dst = &mut out[(c * new_h + y) * new_w..(c * new_h + y + 1) * new_w];
            for x in 0..new_w {
                dst[x] = lerp(a[x], b[x], t);
            }
        }
    }
    Image::new(new_w, new_h, ch, out)
}

/// Side length at pyramid level `scale` (factor `2^scale` below `len`).
pub fn scaled_len(len: usize, scale: usize) -> usize {
    ((len as f64) / f64::powi(2.0, scale as i32)).round().max(1.0) as usize
}

/// Coarse-to-fine pyramid: `levels[s]` is `img` reduced by `2^s`. Each level
/// is resized from the previous one so every halving averages pixel pairs.
pub fn pyramid(img: &Image, scales: usize) -> Result<Vec<Image>> {
    let mut levels = Vec::with_capacity(scales);
    levels.push(img.clone());
    for s in 1..scales {
        let prev = levels.last().expect("non-empty");
        let next = resize(
            prev,
            scaled_len(img.width(), s),
            scaled_len(img.height(), s),
        )?;
        levels.push(next);
    }
    Ok(levels)
}

/// Reads an 8-bit PNG as a `[0, 255]` float image. Grayscale stays
/// single-channel, everything else becomes RGB.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let dynimg = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = matches!(
        dynimg.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    if gray {
        let buf = dynimg.to_luma8();
        let (w, h) = buf.dimensions();
        let data = buf.pixels().map(|p| p.0[0] as f64).collect();
        Image::new(w as usize, h as usize, 1, data)
    } else {
        let buf = dynimg.to_rgb8();
        let (w, h) = (buf.width() as usize, buf.height() as usize);
        let raw = buf.into_raw();
        Image::from_fn(w, h, 3, |c, y, x| raw[(y * w + x) * 3 + c] as f64)
    }
}

/// Writes a `[0, 255]` float image as 8-bit PNG, rounding and clamping.
pub fn write_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width(), img.height());
    let quant = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    let result = if img.channels() == 1 {
        let raw: Vec<u8> = img.data().iter().map(|&v| quant(v)).collect();
        image::GrayImage::from_raw(w as u32, h as u32, raw)
            .expect("buffer sized from image")
            .save(path)
    } else {
        let mut raw = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    raw.push(quant(img.get(c, y, x)));
                }
            }
        }
        image::RgbImage::from_raw(w as u32, h as u32, raw)
            .expect("buffer sized from image")
            .save(path)
    };
    result.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
