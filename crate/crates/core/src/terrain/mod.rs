//! Soil patch: noise-blended soil textures on a height-displaced grid mesh.
//!
//! The patch is centered on the world origin with `+z` up. Vertex `(i, j)`
//! of a `W x H` grid sits at `x = -ex/2 + i * ex/(W-1)`,
//! `y = -ey/2 + j * ey/(H-1)`.

pub mod noise;
mod soil;

pub use noise::{perlin, NoiseField};
pub use soil::synth_soil_texture;

use crate::config::{SoilSpec, TerrainSpec};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::raster::{bilinear_axis, read_rgba, Raster, Rgb};
use crate::rng::Rng;

/// Procedural soil kinds accepted by [`synth_soil_texture`].
pub const SOIL_KINDS: [&str; 3] = ["dirt", "cracked", "stony"];

/// Share of the displacement taken by the low-frequency noise; the rest comes
/// from the blended soil height map.
const NOISE_SHARE: f64 = 0.75;
/// Contrast applied to the blend noise so soils form patches instead of an
/// even mixture.
const BLEND_CONTRAST: f64 = 2.0;

/// Albedo plus derived maps of one soil, all of equal dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilTextureSet {
    pub albedo: Raster<Rgb>,
    pub normal: Raster<[f32; 3]>,
    pub ao: Raster<f32>,
    pub height: Raster<f32>,
}

impl SoilTextureSet {
    pub fn dims(&self) -> (u32, u32) {
        self.albedo.dims()
    }
}

/// Texel index into a `src`-sized texture for an output of size `out`:
/// direct when the sizes match, otherwise tiled with period `n - 1` since
/// edge-inclusive tiles repeat their first row and column.
fn tiler(src: (u32, u32), out: (u32, u32)) -> impl Fn(u32, u32) -> usize {
    let (tw, th) = src;
    let direct = src == out;
    let (px, py) = ((tw - 1).max(1), (th - 1).max(1));
    move |x, y| {
        if direct {
            (y * tw + x) as usize
        } else {
            ((y % py) * tw + x % px) as usize
        }
    }
}

/// Lerp `a` towards `b` by the per-pixel weight. The output has the weight
/// raster's size; inputs are tiled when it is larger.
pub fn blend_textures(
    a: &SoilTextureSet,
    b: &SoilTextureSet,
    weights: &Raster<f32>,
) -> Result<SoilTextureSet> {
    let (w, h) = weights.dims();
    let (ia, ib) = (tiler(a.dims(), (w, h)), tiler(b.dims(), (w, h)));
    let mut albedo = Vec::with_capacity(weights.len());
    let mut normal = Vec::with_capacity(weights.len());
    let mut ao = Vec::with_capacity(weights.len());
    let mut height = Vec::with_capacity(weights.len());
    for y in 0..h {
        for x in 0..w {
            let t = *weights.get(x, y);
            let (k, kb) = (ia(x, y), ib(x, y));
            let lerp = |p: f32, q: f32| if t == 0.0 { p } else if t == 1.0 { q } else { p + t * (q - p) };
            let (pa, pb) = (a.albedo.data()[k], b.albedo.data()[kb]);
            albedo.push(std::array::from_fn(|c| {
                lerp(f32::from(pa[c]), f32::from(pb[c])).round().clamp(0.0, 255.0) as u8
            }));
            let (na, nb) = (a.normal.data()[k], b.normal.data()[kb]);
            let n: [f32; 3] = std::array::from_fn(|c| lerp(na[c], nb[c]));
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            normal.push(if t == 0.0 {
                na
            } else if t == 1.0 {
                nb
            } else if len > 0.0 {
                [n[0] / len, n[1] / len, n[2] / len]
            } else {
                [0.0, 0.0, 1.0]
            });
            ao.push(lerp(a.ao.data()[k], b.ao.data()[kb]));
            height.push(lerp(a.height.data()[k], b.height.data()[kb]));
        }
    }
    Ok(SoilTextureSet {
        albedo: Raster::from_vec(w, h, albedo)?,
        normal: Raster::from_vec(w, h, normal)?,
        ao: Raster::from_vec(w, h, ao)?,
        height: Raster::from_vec(w, h, height)?,
    })
}

#[derive(Debug, Clone)]
pub struct TerrainPatch {
    pub extent: [f64; 2],
    pub grid: [u32; 2],
    pub amplitude: f64,
    /// Vertex heights in meters.
    pub heights: Raster<f64>,
    /// Unit vertex normals of the displaced mesh.
    pub normals: Raster<Vec3>,
    /// Blended soil textures covering the whole patch.
    pub texture: SoilTextureSet,
    /// Blend weights of each chained blend, in config order.
    pub blend_fields: Vec<Raster<f32>>,
}

impl TerrainPatch {
    pub fn cell_size(&self) -> [f64; 2] {
        [
            self.extent[0] / f64::from(self.grid[0] - 1),
            self.extent[1] / f64::from(self.grid[1] - 1),
        ]
    }

    pub fn vertex(&self, i: u32, j: u32) -> Vec3 {
        let c = self.cell_size();
        Vec3::new(
            -self.extent[0] / 2.0 + f64::from(i) * c[0],
            -self.extent[1] / 2.0 + f64::from(j) * c[1],
            *self.heights.get(i, j),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let eps = 1e-9;
        x.abs() <= self.extent[0] / 2.0 + eps && y.abs() <= self.extent[1] / 2.0 + eps
    }

    /// Texture coordinates of a ground point, `[0, 1]` across the patch.
    pub fn uv(&self, x: f64, y: f64) -> [f64; 2] {
        [
            x / self.extent[0] + 0.5,
            y / self.extent[1] + 0.5,
        ]
    }

    /// Row-major grid triangles, two per cell.
    pub fn triangles(&self) -> Vec<[u32; 3]> {
        let [w, h] = self.grid;
        let mut tris = Vec::with_capacity(2 * ((w - 1) * (h - 1)) as usize);
        for j in 0..h - 1 {
            for i in 0..w - 1 {
                let a = j * w + i;
                tris.push([a, a + 1, a + w + 1]);
                tris.push([a, a + w + 1, a + w]);
            }
        }
        tris
    }
}

/// Soil texture sets for every configured soil, in config order.
pub fn load_soils(spec: &TerrainSpec, rng: &mut Rng) -> Result<Vec<SoilTextureSet>> {
    if spec.soils.is_empty() {
        return Err(Error::ConfigInvalid("no soil textures configured".into()));
    }
    spec.soils
        .iter()
        .enumerate()
        .map(|(i, soil)| {
            let mut stream = rng.fork_index("soil", i as u64);
            match soil {
                SoilSpec { kind: Some(kind), path: None } => {
                    synth_soil_texture(kind, spec.soil_texture_size, &mut stream)
                }
                SoilSpec { kind: None, path: Some(path) } => {
                    let rgba = read_rgba(path)?;
                    Ok(SoilTextureSet::from_albedo(rgba.map(|p| [p[0], p[1], p[2]])))
                }
                _ => Err(Error::ConfigInvalid(format!(
                    "terrain.soils[{i}] must set exactly one of `kind` or `path`"
                ))),
            }
        })
        .collect()
}

/// Procedural soils plus [`build_terrain_from`].
pub fn build_terrain(spec: &TerrainSpec, rng: &mut Rng) -> Result<TerrainPatch> {
    let soils = load_soils(spec, &mut rng.fork("soils"))?;
    build_terrain_from(spec, &soils, rng)
}

/// Blend `soils` with noise weights and displace the grid by the blended
/// height map plus low-frequency noise.
pub fn build_terrain_from(
    spec: &TerrainSpec,
    soils: &[SoilTextureSet],
    rng: &mut Rng,
) -> Result<TerrainPatch> {
    let Some(first) = soils.first() else {
        return Err(Error::ConfigInvalid("no soil textures configured".into()));
    };
    let [gw, gh] = spec.grid;
    if gw < 2 || gh < 2 {
        return Err(Error::InvalidArgument("terrain grid needs at least 2x2 vertices".into()));
    }
    let [ex, ey] = spec.extent_m;
    let res = spec.texture_resolution;

    let mut blend_rng = rng.fork("blend");
    let mut blend_fields = Vec::new();
    let mut texture = if first.dims() == (res, res) {
        first.clone()
    } else {
        blend_textures(first, first, &Raster::filled(res, res, 0.0))?
    };
    for soil in &soils[1..] {
        let field = NoiseField::from_rng(&spec.blend_noise, &mut blend_rng);
        let weights = Raster::from_fn(res, res, |px, py| {
            let x = (f64::from(px) + 0.5) / f64::from(res) * ex - ex / 2.0;
            let y = (f64::from(py) + 0.5) / f64::from(res) * ey - ey / 2.0;
            (0.5 + BLEND_CONTRAST * (field.value(x, y) - 0.5)).clamp(0.0, 1.0) as f32
        });
        texture = blend_textures(&texture, soil, &weights)?;
        blend_fields.push(weights);
    }

    let displacement = NoiseField::from_rng(&spec.displacement_noise, &mut rng.fork("displacement"));
    let mean_height =
        texture.height.data().iter().map(|h| f64::from(*h)).sum::<f64>() / texture.height.len() as f64;
    let amplitude = spec.amplitude_m;
    let (cx, cy) = (ex / f64::from(gw - 1), ey / f64::from(gh - 1));
    let heights = Raster::from_fn(gw, gh, |i, j| {
        if amplitude == 0.0 {
            return 0.0;
        }
        let x = -ex / 2.0 + f64::from(i) * cx;
        let y = -ey / 2.0 + f64::from(j) * cy;
        let p = 2.0 * displacement.value(x, y) - 1.0;
        let u = f64::from(i) / f64::from(gw - 1);
        let v = f64::from(j) / f64::from(gh - 1);
        let h = f64::from(texture.height.sample_bilinear(u, v));
        let detail = (4.0 * (h - mean_height)).clamp(-1.0, 1.0);
        amplitude * (NOISE_SHARE * p + (1.0 - NOISE_SHARE) * detail).clamp(-1.0, 1.0)
    });
    let normals = Raster::from_fn(gw, gh, |i, j| {
        let (i0, i1) = (i.saturating_sub(1), (i + 1).min(gw - 1));
        let (j0, j1) = (j.saturating_sub(1), (j + 1).min(gh - 1));
        let dhdx = (heights.get(i1, j) - heights.get(i0, j)) / (f64::from(i1 - i0) * cx);
        let dhdy = (heights.get(i, j1) - heights.get(i, j0)) / (f64::from(j1 - j0) * cy);
        Vec3::new(-dhdx, -dhdy, 1.0).normalize()
    });

    Ok(TerrainPatch {
        extent: spec.extent_m,
        grid: spec.grid,
        amplitude,
        heights,
        normals,
        texture,
        blend_fields,
    })
}

/// Bilinear height and renormalized bilinear normal at a ground point.
pub fn sample_terrain(patch: &TerrainPatch, x: f64, y: f64) -> Result<(f64, Vec3)> {
    if !patch.contains(x, y) || !x.is_finite() || !y.is_finite() {
        return Err(Error::OutOfExtent { x, y });
    }
    let [u, v] = patch.uv(x, y);
    let (i0, i1, tx) = bilinear_axis(u, patch.grid[0]);
    let (j0, j1, ty) = bilinear_axis(v, patch.grid[1]);
    let w = [
        (1.0 - tx) * (1.0 - ty),
        tx * (1.0 - ty),
        (1.0 - tx) * ty,
        tx * ty,
    ];
    let corners = [(i0, j0), (i1, j0), (i0, j1), (i1, j1)];
    let mut height = 0.0;
    let mut normal = Vec3::zeros();
    for (wk, &(i, j)) in w.iter().zip(&corners) {
        if *wk == 0.0 {
            continue;
        }
        height += wk * patch.heights.get(i, j);
        normal += *wk * patch.normals.get(i, j);
    }
    Ok((height, normal.normalize()))
}
