//! Normal, ambient-occlusion and height maps approximated from an albedo
//! raster. All filters wrap around the raster edges, so the derivation is
//! shift-equivariant.

use crate::raster::{luminance, Raster, Rgba};

/// Scale applied to height gradients before normalization.
pub const NORMAL_STRENGTH: f32 = 8.0;
/// Floor of the AO map.
pub const AO_MIN: f32 = 0.35;
const AO_GAIN: f32 = 4.0;
const AO_RADII: [u32; 3] = [2, 4, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMaps {
    /// Tangent-space unit normals (u, v, up).
    pub normal: Raster<[f32; 3]>,
    pub ao: Raster<f32>,
    pub height: Raster<f32>,
}

/// Separable box blur of radius `r` with toroidal wraparound.
pub fn box_blur_wrapped(src: &Raster<f32>, r: u32) -> Raster<f32> {
    let (w, h) = src.dims();
    let window = (2 * r + 1) as f32;
    let r = i64::from(r);
    let horizontal = Raster::from_fn(w, h, |x, y| {
        let mut acc = 0.0f32;
        for dx in -r..=r {
            acc += *src.get_wrapped(i64::from(x) + dx, i64::from(y));
        }
        acc / window
    });
    Raster::from_fn(w, h, |x, y| {
        let mut acc = 0.0f32;
        for dy in -r..=r {
            acc += *horizontal.get_wrapped(i64::from(x), i64::from(y) + dy);
        }
        acc / window
    })
}

/// Height from alpha-masked luminance smoothed by two 5x5 box passes.
pub fn height_from_albedo(albedo: &Raster<Rgba>) -> Raster<f32> {
    let raw = albedo.map(|p| (luminance([p[0], p[1], p[2]]) * f64::from(p[3]) / 255.0) as f32);
    box_blur_wrapped(&box_blur_wrapped(&raw, 2), 2)
}

/// Normals from central differences of the height field.
pub fn normals_from_height(height: &Raster<f32>) -> Raster<[f32; 3]> {
    let (w, h) = height.dims();
    Raster::from_fn(w, h, |x, y| {
        let (xi, yi) = (i64::from(x), i64::from(y));
        let du = 0.5 * (height.get_wrapped(xi + 1, yi) - height.get_wrapped(xi - 1, yi));
        let dv = 0.5 * (height.get_wrapped(xi, yi + 1) - height.get_wrapped(xi, yi - 1));
        let n = [-du, -dv, 1.0 / NORMAL_STRENGTH];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        [n[0] / len, n[1] / len, n[2] / len]
    })
}

/// AO as one minus the mean cavity depth below the local average over
/// several radii, clamped to `[AO_MIN, 1]`.
pub fn ao_from_height(height: &Raster<f32>) -> Raster<f32> {
    let blurred: Vec<Raster<f32>> = AO_RADII
        .iter()
        .map(|&r| box_blur_wrapped(height, r))
        .collect();
    let mut ao = Raster::filled(height.width(), height.height(), 1.0f32);
    for (i, out) in ao.data_mut().iter_mut().enumerate() {
        let h = height.data()[i];
        let cavity: f32 = blurred
            .iter()
            .map(|b| (b.data()[i] - h).max(0.0))
            .sum::<f32>()
            / AO_RADII.len() as f32;
        *out = (1.0 - AO_GAIN * cavity).clamp(AO_MIN, 1.0);
    }
    ao
}

pub fn derive_maps(albedo: &Raster<Rgba>) -> SurfaceMaps {
    assert!(!albedo.is_empty(), "albedo raster must be nonempty");
    let height = height_from_albedo(albedo);
    SurfaceMaps {
        normal: normals_from_height(&height),
        ao: ao_from_height(&height),
        height,
    }
}
