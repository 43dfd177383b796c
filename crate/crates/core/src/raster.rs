//! Plain row-major rasters and color helpers.

use std::path::Path;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];
pub type Rgba = [u8; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: u32,
    height: u32,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: u32, height: u32, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> T) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<T>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Raster<T> {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> &T {
        &self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn get_mut(&mut self, x: u32, y: u32) -> &mut T {
        &mut self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: T) {
        *self.get_mut(x, y) = value;
    }

    /// Texel lookup with toroidal wraparound.
    #[inline]
    pub fn get_wrapped(&self, x: i64, y: i64) -> &T {
        let xi = x.rem_euclid(i64::from(self.width)) as u32;
        let yi = y.rem_euclid(i64::from(self.height)) as u32;
        self.get(xi, yi)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl Raster<f32> {
    /// Bilinear sample at normalized coordinates, clamped to the edges.
    /// Texel `i` sits at `u = i / (width - 1)`.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f32 {
        let (x0, x1, tx) = bilinear_axis(u, self.width);
        let (y0, y1, ty) = bilinear_axis(v, self.height);
        let a = *self.get(x0, y0) as f64;
        let b = *self.get(x1, y0) as f64;
        let c = *self.get(x0, y1) as f64;
        let d = *self.get(x1, y1) as f64;
        let top = (1.0 - tx) * a + tx * b;
        let bottom = (1.0 - tx) * c + tx * d;
        ((1.0 - ty) * top + ty * bottom) as f32
    }
}

/// Integer neighbours and fractional weight along one axis for edge-inclusive
/// texel addressing.
#[inline]
pub(crate) fn bilinear_axis(u: f64, size: u32) -> (u32, u32, f64) {
    if size <= 1 {
        return (0, 0, 0.0);
    }
    let f = (u.clamp(0.0, 1.0)) * f64::from(size - 1);
    let i0 = (f.floor() as u32).min(size - 2);
    (i0, i0 + 1, f - f64::from(i0))
}

/// Nearest texel for edge-inclusive addressing.
#[inline]
pub(crate) fn nearest_index(u: f64, size: u32) -> u32 {
    let f = u.clamp(0.0, 1.0) * f64::from(size.saturating_sub(1));
    (f.round() as u32).min(size.saturating_sub(1))
}

/// Rec. 601 luma in `[0, 1]`.
pub fn luminance(c: Rgb) -> f64 {
    (0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2])) / 255.0
}

/// RGB in `[0, 1]` to (hue degrees in `[0, 360)`, saturation, value).
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max <= 0.0 { 0.0 } else { delta / max };
    (hue.rem_euclid(360.0), sat, max)
}

/// Hue degrees, saturation and value in `[0, 1]` to RGB in `[0, 1]`.
pub fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> (f64, f64, f64) {
    let h = hue.rem_euclid(360.0) / 60.0;
    let c = val * sat;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = val - c;
    (r + m, g + m, b + m)
}

pub fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn hsv_to_rgb8(hue: f64, sat: f64, val: f64) -> Rgb {
    let (r, g, b) = hsv_to_rgb(hue, sat.clamp(0.0, 1.0), val.clamp(0.0, 1.0));
    [to_u8(r), to_u8(g), to_u8(b)]
}

pub fn hue_of(c: Rgb) -> f64 {
    rgb_to_hsv(
        f64::from(c[0]) / 255.0,
        f64::from(c[1]) / 255.0,
        f64::from(c[2]) / 255.0,
    )
    .0
}

pub fn read_rgb(path: &Path) -> Result<Raster<Rgb>> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    Raster::from_vec(w, h, data)
}

pub fn read_rgba(path: &Path) -> Result<Raster<Rgba>> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .into_rgba8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    Raster::from_vec(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip() {
        for &(h, s, v) in &[(0.0, 1.0, 1.0), (95.0, 0.6, 0.4), (210.0, 0.3, 0.8), (330.0, 0.9, 0.2)] {
            let (r, g, b) = hsv_to_rgb(h, s, v);
            let (h2, s2, v2) = rgb_to_hsv(r, g, b);
            assert!((h - h2).abs() < 1e-9 && (s - s2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        }
    }

    #[test]
    fn bilinear_hits_texels_exactly() {
        let r = Raster::from_fn(5, 4, |x, y| (x * 10 + y) as f32);
        for y in 0..4 {
            for x in 0..5 {
                let u = f64::from(x) / 4.0;
                let v = f64::from(y) / 3.0;
                assert_eq!(r.sample_bilinear(u, v), *r.get(x, y));
            }
        }
    }

    #[test]
    fn wrapped_lookup() {
        let r = Raster::from_fn(3, 2, |x, y| x + 10 * y);
        assert_eq!(*r.get_wrapped(-1, 0), 2);
        assert_eq!(*r.get_wrapped(3, 3), 10);
    }
}
