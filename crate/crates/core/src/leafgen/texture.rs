//! Procedural leaf albedo with an alpha silhouette.
//!
//! Raster x runs along the leaf (stem root at column 0, tip at the last
//! column); raster y runs across the blade.

use std::f64::consts::TAU;

use crate::config::LeafShapeSpec;
use crate::raster::{hsv_to_rgb8, Raster, Rgba};
use crate::rng::Rng;
use crate::terrain::noise::NoiseField;

/// Petiole half-width relative to the blade half-width.
const PETIOLE_HALF_WIDTH: f64 = 0.08;
const VEIN_WIDTH: f64 = 0.035;

/// Half-width profile of the blade at normalized position `t` in `[0, 1]`,
/// relative to the maximum half-width.
fn blade_profile(shape: &LeafShapeSpec, t: f64, lobe_phase: f64, wobble: &[(f64, f64)]) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    let n = shape.roundness;
    let base = (1.0 - (2.0 * t - 1.0).abs().powf(n)).max(0.0).powf(1.0 / n);
    let lobes = if shape.lobes > 0 && shape.lobe_depth > 0.0 {
        let phase = TAU * f64::from(shape.lobes) * t + lobe_phase;
        1.0 - shape.lobe_depth * (0.5 + 0.5 * phase.cos())
    } else {
        1.0
    };
    let edge: f64 = wobble
        .iter()
        .map(|(freq, phase)| 0.03 * (TAU * freq * t + phase).sin())
        .sum();
    (base * lobes * (1.0 + edge)).max(0.0)
}

/// Leaf-shaped RGBA texture: superellipse blade on a thin petiole, green
/// albedo shifted by the species hue, darkened along principal and secondary
/// veins, with seeded smooth and per-texel variation.
pub fn synth_leaf_texture(shape: &LeafShapeSpec, rng: &mut Rng) -> Raster<Rgba> {
    let [w, h] = shape.texture_size;
    let sf = shape.stem_fraction;
    let lobe_phase = rng.uniform(0.0, TAU);
    let wobble: Vec<(f64, f64)> = (0..3)
        .map(|k| (3.0 + 2.0 * k as f64 + rng.uniform(0.0, 1.0), rng.uniform(0.0, TAU)))
        .collect();
    let tone = NoiseField::single(rng.next_u64());
    let hue_offset = rng.uniform(-3.0, 3.0);
    let branch_angle = shape.branch_angle_deg.to_radians();
    let branch_positions: Vec<f64> = (0..shape.branch_pairs)
        .map(|k| (k + 1) as f64 / (shape.branch_pairs + 1) as f64)
        .collect();
    let mut grain = rng.fork("grain");

    Raster::from_fn(w, h, |x, y| {
        let u = (f64::from(x) + 0.5) / f64::from(w);
        let v = (f64::from(y) + 0.5) / f64::from(h);
        let s = 2.0 * v - 1.0;
        let t = if sf < 1.0 { (u - sf) / (1.0 - sf) } else { 0.0 };
        let inside = if u < sf {
            s.abs() <= PETIOLE_HALF_WIDTH
        } else {
            s.abs() <= blade_profile(shape, t, lobe_phase, &wobble)
        };
        let noise = grain.uniform(-1.0, 1.0);
        if !inside {
            return [0, 0, 0, 0];
        }

        // Distance to the midrib and to the nearest secondary vein, in units
        // of the blade half-width.
        let mut vein = (-(s / VEIN_WIDTH).powi(2)).exp();
        if u >= sf {
            for &tb in &branch_positions {
                if t < tb {
                    continue;
                }
                let expected = 2.0 * (t - tb) * branch_angle.tan().min(8.0) / shape.aspect.max(1e-6);
                let d = (s.abs() - expected).abs();
                if expected <= 1.0 {
                    vein = vein.max(0.6 * (-(d / VEIN_WIDTH).powi(2)).exp());
                }
            }
        }
        let smooth = tone.signed(u * 6.0, v * 3.0);
        let hue = shape.hue_deg + shape.hue_shift_deg + hue_offset + 4.0 * smooth;
        let sat = shape.saturation * (1.0 + 0.08 * smooth);
        let val = shape.value * (1.0 + 0.12 * smooth + 0.05 * noise) * (1.0 - shape.vein_darkening * vein);
        let rgb = hsv_to_rgb8(hue, sat, val);
        [rgb[0], rgb[1], rgb[2], 255]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::rgb_to_hsv;

    fn opaque_mean_hue(tex: &Raster<Rgba>) -> f64 {
        let hues: Vec<f64> = tex
            .data()
            .iter()
            .filter(|p| p[3] > 127)
            .map(|p| {
                rgb_to_hsv(
                    f64::from(p[0]) / 255.0,
                    f64::from(p[1]) / 255.0,
                    f64::from(p[2]) / 255.0,
                )
                .0
            })
            .collect();
        hues.iter().sum::<f64>() / hues.len() as f64
    }

    #[test]
    fn corners_transparent_center_opaque() {
        for seed in 0..20 {
            for shape in crate::config::default_species().iter().map(|s| &s.leaf) {
                let tex = synth_leaf_texture(shape, &mut Rng::new(seed));
                let (w, h) = tex.dims();
                for (x, y) in [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)] {
                    assert_eq!(tex.get(x, y)[3], 0);
                }
                assert_eq!(tex.get(w / 2, h / 2)[3], 255);
            }
        }
    }

    #[test]
    fn seeds_produce_different_textures() {
        let shape = LeafShapeSpec::default();
        let a = synth_leaf_texture(&shape, &mut Rng::new(1));
        let b = synth_leaf_texture(&shape, &mut Rng::new(2));
        let differ = a.data().iter().zip(b.data()).filter(|(p, q)| p != q).count();
        assert!(differ as f64 > 0.05 * a.len() as f64);
    }

    #[test]
    fn hue_shift_moves_mean_hue() {
        let base = LeafShapeSpec::default();
        let shifted = LeafShapeSpec {
            hue_shift_deg: 20.0,
            ..base.clone()
        };
        for seed in [3, 4, 5] {
            let a = opaque_mean_hue(&synth_leaf_texture(&base, &mut Rng::new(seed)));
            let b = opaque_mean_hue(&synth_leaf_texture(&shifted, &mut Rng::new(seed)));
            assert!((b - a - 20.0).abs() <= 2.0, "shift {}", b - a);
        }
    }
}
