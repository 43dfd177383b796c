//! Procedural soil textures.
//!
//! Texel `i` of an `n`-texel axis sits at `u = i / (n - 1)` and every noise
//! term is periodic in `u` with period 1, so the first and last rows and
//! columns coincide and the texture tiles without a seam.

use crate::error::{Error, Result};
use crate::leafgen::derive_maps;
use crate::raster::{hsv_to_rgb8, Raster, Rgb};
use crate::rng::Rng;

use super::noise::NoiseField;
use super::{SoilTextureSet, SOIL_KINDS};

/// Lattice cells per texture side for the base mottling.
const MOTTLE_PERIOD: u32 = 6;
/// Cellular cells per texture side for cracks and stones.
const CELL_PERIOD: u32 = 7;

struct Cells {
    period: u32,
    points: Vec<(f64, f64)>,
}

impl Cells {
    fn new(period: u32, rng: &mut Rng) -> Self {
        let points = (0..period * period)
            .map(|_| (rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)))
            .collect();
        Self { period, points }
    }

    /// Distances to the nearest and second-nearest feature points, in cell
    /// units, with periodic wraparound.
    fn f1_f2(&self, u: f64, v: f64) -> (f64, f64) {
        let p = i64::from(self.period);
        let x = u * p as f64;
        let y = v * p as f64;
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        let (mut f1, mut f2) = (f64::INFINITY, f64::INFINITY);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (cx + dx, cy + dy);
                let idx = (ny.rem_euclid(p) * p + nx.rem_euclid(p)) as usize;
                let (ox, oy) = self.points[idx];
                let d = ((nx as f64 + ox - x).powi(2) + (ny as f64 + oy - y).powi(2)).sqrt();
                if d < f1 {
                    f2 = f1;
                    f1 = d;
                } else if d < f2 {
                    f2 = d;
                }
            }
        }
        (f1, f2)
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Tileable soil texture set of the given procedural kind.
pub fn synth_soil_texture(kind: &str, size: u32, rng: &mut Rng) -> Result<SoilTextureSet> {
    if !SOIL_KINDS.contains(&kind) {
        return Err(Error::InvalidArgument(format!(
            "unknown soil kind '{kind}' (expected one of {SOIL_KINDS:?})"
        )));
    }
    if size < 4 {
        return Err(Error::InvalidArgument(format!("soil texture size {size} is below 4")));
    }
    let mottle = NoiseField {
        octaves: 4,
        ..NoiseField::single(rng.next_u64())
    }
    .periodic(MOTTLE_PERIOD);
    let tint = NoiseField::single(rng.next_u64()).periodic(3);
    let cells = Cells::new(CELL_PERIOD, rng);
    let mut grain = rng.fork("grain");
    let hue_base = rng.uniform(24.0, 34.0);
    let n = f64::from(size - 1);
    let periodic_grain: Vec<f64> = (0..(size - 1) * (size - 1))
        .map(|_| grain.uniform(-1.0, 1.0))
        .collect();

    let albedo: Raster<Rgb> = Raster::from_fn(size, size, |x, y| {
        let (u, v) = (f64::from(x) / n, f64::from(y) / n);
        let m = mottle.signed(u * f64::from(MOTTLE_PERIOD), v * f64::from(MOTTLE_PERIOD));
        let t = tint.signed(u * 3.0, v * 3.0);
        let g = periodic_grain[((y % (size - 1)) * (size - 1) + x % (size - 1)) as usize];
        let mut hue = hue_base + 5.0 * t;
        let mut sat = 0.5 + 0.06 * t;
        let mut val = 0.42 + 0.1 * m + 0.025 * g;
        match kind {
            "cracked" => {
                sat -= 0.12;
                val += 0.12;
                let (f1, f2) = cells.f1_f2(u, v);
                let crack = 1.0 - smoothstep(0.02, 0.07, f2 - f1);
                val *= 1.0 - 0.65 * crack;
            }
            "stony" => {
                let (f1, _) = cells.f1_f2(u, v);
                let blob = f1 + 0.15 * m;
                let stone = 1.0 - smoothstep(0.22, 0.27, blob);
                hue = hue * (1.0 - stone) + (hue_base + 6.0) * stone;
                sat = sat * (1.0 - stone) + 0.2 * stone;
                val = val * (1.0 - stone) + (0.62 + 0.1 * m - 0.15 * f1) * stone;
            }
            _ => {}
        }
        hsv_to_rgb8(hue, sat, val)
    });
    Ok(SoilTextureSet::from_albedo(albedo))
}

impl SoilTextureSet {
    /// Opaque albedo plus derived normal, AO and height maps.
    pub fn from_albedo(albedo: Raster<Rgb>) -> Self {
        let rgba = albedo.map(|p| [p[0], p[1], p[2], 255]);
        let maps = derive_maps(&rgba);
        Self {
            albedo,
            normal: maps.normal,
            ao: maps.ao,
            height: maps.height,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::rgb_to_hsv;

    #[test]
    fn textures_tile() {
        for kind in SOIL_KINDS {
            let t = synth_soil_texture(kind, 64, &mut Rng::new(3)).unwrap();
            for i in 0..64 {
                assert_eq!(t.albedo.get(0, i), t.albedo.get(63, i), "{kind} column {i}");
                assert_eq!(t.albedo.get(i, 0), t.albedo.get(i, 63), "{kind} row {i}");
            }
        }
    }

    #[test]
    fn kinds_differ() {
        let dirt = synth_soil_texture("dirt", 128, &mut Rng::new(8)).unwrap();
        let stony = synth_soil_texture("stony", 128, &mut Rng::new(8)).unwrap();
        let differ = dirt
            .albedo
            .data()
            .iter()
            .zip(stony.albedo.data())
            .filter(|(a, b)| a != b)
            .count();
        assert!(differ as f64 > 0.1 * dirt.albedo.len() as f64);
    }

    #[test]
    fn mean_hue_is_brown() {
        for kind in SOIL_KINDS {
            for seed in 0..5 {
                let t = synth_soil_texture(kind, 64, &mut Rng::new(seed)).unwrap();
                let (mut r, mut g, mut b) = (0.0, 0.0, 0.0);
                for p in t.albedo.data() {
                    r += f64::from(p[0]);
                    g += f64::from(p[1]);
                    b += f64::from(p[2]);
                }
                let (hue, _, _) = rgb_to_hsv(r, g, b);
                assert!((15.0..=45.0).contains(&hue), "{kind} seed {seed}: hue {hue}");
            }
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(synth_soil_texture("sand", 32, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn maps_share_dimensions() {
        let t = synth_soil_texture("cracked", 48, &mut Rng::new(2)).unwrap();
        assert_eq!(t.normal.dims(), t.albedo.dims());
        assert_eq!(t.ao.dims(), t.albedo.dims());
        assert_eq!(t.height.dims(), t.albedo.dims());
    }
}
