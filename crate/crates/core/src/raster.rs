//! Image representation, sub-pixel sampling, file I/O and overlay rendering.
//!
//! Intensities are stored as `f64` in `[0, 1]`, row-major, channels interleaved.
//! Pixel `(x, y)` has its center at the continuous coordinate `(x, y)`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer pixel position; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn to_point(self) -> SubPixelPoint {
        SubPixelPoint::new(self.x as f64, self.y as f64)
    }
}

impl std::fmt::Display for PixelCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl std::str::FromStr for PixelCoord {
    type Err = Error;

    /// Parses `"x,y"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected `x,y` pixel coordinate, got `{s}`"));
        let (x, y) = s.split_once(',').ok_or_else(bad)?;
        let x = x.trim().parse().map_err(|_| bad())?;
        let y = y.trim().parse().map_err(|_| bad())?;
        Ok(Self { x, y })
    }
}

/// Continuous image-plane position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubPixelPoint {
    pub x: f64,
    pub y: f64,
}

impl SubPixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: SubPixelPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Nearest pixel, or `None` if it falls outside a `width`x`height` grid.
    pub fn round_to_pixel(self, width: usize, height: usize) -> Option<PixelCoord> {
        let x = self.x.round();
        let y = self.y.round();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            return None;
        }
        Some(PixelCoord::new(x as usize, y as usize))
    }
}

/// A 2D grid of intensities with one (gray) or three (RGB) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RasterImage {
    /// Black image.
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!("channels must be 1 or 3, got {channels}")));
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

    /// Single-channel image with `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
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

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x < self.width && p.y < self.height
    }

    /// Value of channel 0 at `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels]
    }

    #[inline]
    pub fn get_channel(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels] = value;
    }

    #[inline]
    pub fn set_channel(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Clamp every value into `[0, 1]`; non-finite values become 0.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
    }

    /// Rotate by 90° counter-clockwise as displayed (pixel `(x, y)` moves to `(y, w-1-x)`).
    pub fn rotate90(&self) -> Self {
        let (w, h, c) = (self.width, self.height, self.channels);
        let mut out = Self::new(h, w, c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    out.set_channel(y, w - 1 - x, ch, self.get_channel(x, y, ch));
                }
            }
        }
        out
    }
}

/// Single-channel copy; RGB uses luminance `0.299 R + 0.587 G + 0.114 B`.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
        .collect();
    RasterImage {
        width: img.width,
        height: img.height,
        channels: 1,
        data,
    }
}

/// Bilinear interpolation of channel 0. Points outside the image are clamped
/// to the border before interpolation.
pub fn sample_bilinear(img: &RasterImage, p: SubPixelPoint) -> f64 {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let x = if p.x.is_nan() { 0.0 } else { p.x.clamp(0.0, max_x) };
    let y = if p.y.is_nan() { 0.0 } else { p.y.clamp(0.0, max_y) };
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Boolean per-pixel map (segmentations, F-maps, ground-truth masks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Pixels with value `>= 0.5` in channel 0.
    pub fn from_image(img: &RasterImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| img.get(x, y) >= 0.5)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// 0/1 grayscale rendering.
    pub fn to_image(&self) -> RasterImage {
        RasterImage::from_fn(self.width, self.height, |x, y| if self.get(x, y) { 1.0 } else { 0.0 })
    }
}

/// What an overlay layer draws.
#[derive(Debug, Clone, Copy)]
pub enum LayerShape<'a> {
    /// 1-px Bresenham strokes between consecutive (rounded) points.
    Polyline(&'a [SubPixelPoint]),
    /// Every set pixel.
    Mask(&'a BinaryMap),
}

#[derive(Debug, Clone, Copy)]
pub struct OverlayLayer<'a> {
    pub shape: LayerShape<'a>,
    pub color: [f64; 3],
}

/// Draws `layers` in order over an RGB copy of `img`.
pub fn render_overlay(img: &RasterImage, layers: &[OverlayLayer<'_>]) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let mut out = RasterImage::new(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let v = if img.channels() == 3 { img.get_channel(x, y, c) } else { img.get(x, y) };
                out.set_channel(x, y, c, v);
            }
        }
    }
    for layer in layers {
        let mut paint = |x: i64, y: i64| {
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                for c in 0..3 {
                    out.set_channel(x as usize, y as usize, c, layer.color[c]);
                }
            }
        };
        match layer.shape {
            LayerShape::Mask(mask) => {
                for y in 0..h.min(mask.height()) {
                    for x in 0..w.min(mask.width()) {
                        if mask.get(x, y) {
                            paint(x as i64, y as i64);
                        }
                    }
                }
            }
            LayerShape::Polyline(points) => {
                let rounded: Vec<(i64, i64)> = points
                    .iter()
                    .map(|p| (p.x.round() as i64, p.y.round() as i64))
                    .collect();
                if let [only] = rounded.as_slice() {
                    paint(only.0, only.1);
                }
                for seg in rounded.windows(2) {
                    bresenham(seg[0], seg[1], &mut paint);
                }
            }
        }
    }
    out
}

fn bresenham((mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), plot: &mut impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x0, y0);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

// ---------------------------------------------------------------------------
// File I/O

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Loads a binary PGM (P5), PPM (P6) or PNG file, normalized to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
    decode_image(&bytes)
}

/// Decodes an in-memory PGM/PPM/PNG byte stream.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else if bytes.len() < 2 {
        Err(Error::CorruptHeader("file too short to hold a header".into()))
    } else {
        Err(Error::UnsupportedFormat(format!(
            "unrecognized magic {:02x?}",
            &bytes[..bytes.len().min(4)]
        )))
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<RasterImage> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptHeader("header ends prematurely".into())),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptHeader("expected a decimal header field".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptHeader("header field out of range".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::CorruptHeader("missing separator after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::CorruptHeader(format!(
            "invalid dimensions/maxval {width}x{height}/{maxval}"
        )));
    }
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let count = width * height * channels;
    let raster = &bytes[pos..];
    if raster.len() < count * bytes_per_sample {
        return Err(Error::CorruptHeader(format!(
            "pixel data truncated: need {} bytes, found {}",
            count * bytes_per_sample,
            raster.len()
        )));
    }
    let scale = maxval as f64;
    let data = if bytes_per_sample == 1 {
        raster[..count].iter().map(|&b| (b as f64 / scale).min(1.0)).collect()
    } else {
        raster[..count * 2]
            .chunks_exact(2)
            .map(|b| (u16::from_be_bytes([b[0], b[1]]) as f64 / scale).min(1.0))
            .collect()
    };
    RasterImage::from_vec(width, height, channels, data)
}

fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    // palette and sub-byte depths expand to 8 bits; 16-bit stays 16-bit
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::CorruptHeader(format!("png: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::CorruptHeader(format!("png: {e}")))?;
    let (color, depth) = reader.output_color_type();
    let src_channels = color.samples();
    let (width, height) = (info.width as usize, info.height as usize);
    let samples: Vec<f64> = match depth {
        png::BitDepth::Eight => buf[..info.buffer_size()].iter().map(|&b| b as f64 / 255.0).collect(),
        png::BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
            .collect(),
        other => return Err(Error::UnsupportedFormat(format!("png bit depth {other:?}"))),
    };
    // drop alpha
    let channels = if src_channels >= 3 { 3 } else { 1 };
    let data = samples
        .chunks_exact(src_channels)
        .flat_map(|px| px[..channels].to_vec())
        .collect();
    RasterImage::from_vec(width, height, channels, data)
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes an 8-bit binary PGM (channel 0) or PPM (RGB).
pub fn save_pnm(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    write!(out, "{magic}\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize8(v)).collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// Writes a 16-bit binary PGM/PPM.
pub fn save_pnm16(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    write!(out, "{magic}\n{} {}\n65535\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img.data().iter().flat_map(|&v| quantize16(v).to_be_bytes()).collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// Writes an 8-bit grayscale or RGB PNG.
pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let out = create(path.as_ref())?;
    let mut encoder = png::Encoder::new(out, img.width() as u32, img.height() as u32);
    encoder.set_color(if img.channels() == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize8(v)).collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer.finish().map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Saves by extension: `.png` as PNG, anything else as 8-bit PGM/PPM.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => save_png(img, path),
        _ => save_pnm(img, path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
        let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
        bytes.extend_from_slice(pixels);
        bytes
    }

    #[test]
    fn loads_tiny_pgm() {
        let img = decode_image(&pgm(2, 2, &[0, 255, 255, 0])).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n1 1\n# another\n255\n\x80".to_vec();
        let img = decode_image(&bytes).unwrap();
        assert!((img.get(0, 0) - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_pgm_is_corrupt_header() {
        let mut bytes = pgm(4, 4, &[0; 16]);
        bytes.truncate(12);
        assert!(matches!(decode_image(&bytes), Err(Error::CorruptHeader(_))));
        assert!(matches!(decode_image(b"P5\n4 "), Err(Error::CorruptHeader(_))));
    }

    #[test]
    fn distinct_errors_for_bad_inputs() {
        assert!(matches!(decode_image(b"GIF89a...."), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(
            load_image("/definitely/not/here.pgm"),
            Err(Error::Unreadable { .. })
        ));
    }

    #[test]
    fn sixteen_bit_pgm_is_scaled() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x80, 0x00]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.get(0, 0), 1.0);
        assert!((img.get(1, 0) - 32768.0 / 65535.0).abs() < 1e-12);
    }

    #[test]
    fn rgb_png_round_trip_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let mut img = RasterImage::new(4, 4, 3);
        img.set_channel(1, 2, 0, 1.0);
        save_png(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.channels(), 3);
        assert_eq!(back.data().len(), 48);
        assert_eq!(back, img);
    }

    #[test]
    fn sixteen_bit_png_is_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g16.png");
        let file = File::create(&path).unwrap();
        let mut enc = png::Encoder::new(file, 2, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0xff, 0xff, 0x00, 0x00]).unwrap();
        w.finish().unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0]);
    }

    #[test]
    fn eight_bit_pgm_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = RasterImage::from_fn(7, 5, |x, y| ((x * 37 + y * 11) % 256) as f64 / 255.0);
        save_pnm(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn grayscale_luminance() {
        let gray = RasterImage::from_fn(2, 1, |x, _| x as f64 * 0.5);
        assert_eq!(to_grayscale(&gray), gray);
        let rgb = RasterImage::from_vec(2, 1, 3, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let g = to_grayscale(&rgb);
        assert!((g.get(0, 0) - 0.299).abs() < 1e-12);
        assert!((g.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_basics() {
        let img = RasterImage::from_vec(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(sample_bilinear(&img, SubPixelPoint::new(1.0, 0.0)), 1.0);
        assert_eq!(sample_bilinear(&img, SubPixelPoint::new(0.5, 0.5)), 0.5);
        assert_eq!(sample_bilinear(&img, SubPixelPoint::new(-5.0, -5.0)), 0.0);
        assert_eq!(sample_bilinear(&img, SubPixelPoint::new(9.0, -5.0)), 1.0);
    }

    #[test]
    fn overlay_draws_axis_aligned_line() {
        let img = RasterImage::new(5, 5, 1);
        let line = [SubPixelPoint::new(0.0, 2.0), SubPixelPoint::new(4.0, 2.0)];
        let out = render_overlay(
            &img,
            &[OverlayLayer {
                shape: LayerShape::Polyline(&line),
                color: [1.0, 0.0, 0.0],
            }],
        );
        let mut red = 0;
        for y in 0..5 {
            for x in 0..5 {
                let px = [out.get_channel(x, y, 0), out.get_channel(x, y, 1), out.get_channel(x, y, 2)];
                if px == [1.0, 0.0, 0.0] {
                    assert_eq!(y, 2);
                    red += 1;
                }
            }
        }
        assert_eq!(red, 5);
    }

    #[test]
    fn overlay_identity_and_full_mask() {
        let img = RasterImage::from_fn(3, 3, |x, y| (x + y) as f64 / 4.0);
        let plain = render_overlay(&img, &[]);
        assert_eq!(plain.channels(), 3);
        assert_eq!(plain.get_channel(2, 1, 1), img.get(2, 1));

        let mask = BinaryMap::from_fn(3, 3, |_, _| true);
        let out = render_overlay(
            &img,
            &[OverlayLayer {
                shape: LayerShape::Mask(&mask),
                color: [0.0, 1.0, 0.5],
            }],
        );
        assert!(out.data().chunks(3).all(|p| p == [0.0, 1.0, 0.5]));
    }

    #[test]
    fn rotate90_four_times_is_identity() {
        let img = RasterImage::from_fn(4, 3, |x, y| (x * 3 + y) as f64 / 12.0);
        let r = img.rotate90();
        assert_eq!((r.width(), r.height()), (3, 4));
        assert_eq!(r.rotate90().rotate90().rotate90(), img);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bilinear_is_continuous(x in -3.0f64..12.0, y in -3.0f64..12.0,
                                      dx in -1e-6f64..1e-6, dy in -1e-6f64..1e-6) {
                let img = RasterImage::from_fn(9, 9, |i, j| ((i * 7 + j * 13) % 10) as f64 / 9.0);
                let a = sample_bilinear(&img, SubPixelPoint::new(x, y));
                let b = sample_bilinear(&img, SubPixelPoint::new(x + dx, y + dy));
                prop_assert!((a - b).abs() <= 1e-5);
            }

            #[test]
            fn grayscale_stays_in_unit_range(px in proptest::collection::vec(0.0f64..=1.0, 12)) {
                let img = RasterImage::from_vec(2, 2, 3, px).unwrap();
                let g = to_grayscale(&img);
                prop_assert!(g.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
