//! Classic 2-D gradient noise with fractal octaves.

use crate::config::NoiseSpec;
use crate::rng::Rng;

/// 16 unit gradients evenly spaced on the circle.
const GRADIENTS: [(f64, f64); 16] = {
    // cos/sin of k * 22.5 degrees, written out so the table is const.
    const C1: f64 = 0.923_879_532_511_286_7;
    const S1: f64 = 0.382_683_432_365_089_8;
    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [
        (1.0, 0.0),
        (C1, S1),
        (H, H),
        (S1, C1),
        (0.0, 1.0),
        (-S1, C1),
        (-H, H),
        (-C1, S1),
        (-1.0, 0.0),
        (-C1, -S1),
        (-H, -H),
        (-S1, -C1),
        (0.0, -1.0),
        (S1, -C1),
        (H, -H),
        (C1, -S1),
    ]
};

/// Peak magnitude of single-octave noise with unit gradients is sqrt(1/2);
/// this factor stretches it to `[-1, 1]`.
const RANGE_SCALE: f64 = std::f64::consts::SQRT_2;

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(t: f64, a: f64, b: f64) -> f64 {
    a + t * (b - a)
}

#[inline]
fn hash_lattice(seed: u64, octave: u32, ix: i64, iy: i64) -> usize {
    let mut h = seed ^ (u64::from(octave).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    h ^= (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 32)).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^= (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h = (h ^ (h >> 32)).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^= h >> 29;
    (h >> 60) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub seed: u64,
    pub octaves: u32,
    /// Lattice cells per unit of input coordinate for the first octave.
    pub frequency: f64,
    pub persistence: f64,
    pub lacunarity: f64,
    /// Lattice period of the first octave in cells; later octaves scale it by
    /// the (integer-rounded) lacunarity.
    pub period: Option<u32>,
}

impl NoiseField {
    pub fn new(spec: &NoiseSpec, seed: u64) -> Self {
        Self {
            seed,
            octaves: spec.octaves.max(1),
            frequency: spec.frequency,
            persistence: spec.persistence,
            lacunarity: spec.lacunarity,
            period: None,
        }
    }

    pub fn from_rng(spec: &NoiseSpec, rng: &mut Rng) -> Self {
        Self::new(spec, rng.next_u64())
    }

    /// One octave at unit frequency.
    pub fn single(seed: u64) -> Self {
        Self {
            seed,
            octaves: 1,
            frequency: 1.0,
            persistence: 0.5,
            lacunarity: 2.0,
            period: None,
        }
    }

    pub fn periodic(mut self, period: u32) -> Self {
        self.period = Some(period.max(1));
        self
    }

    /// Single octave of raw gradient noise in `[-1, 1]`, zero on the lattice.
    pub fn gradient_noise(&self, octave: u32, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (ix, iy) = (x0 as i64, y0 as i64);
        let period = self
            .period
            .map(|p| i64::from(p) * (self.lacunarity.round().max(1.0) as i64).pow(octave));
        let wrap = |i: i64| match period {
            Some(p) => i.rem_euclid(p),
            None => i,
        };
        let corner = |dx: i64, dy: i64| {
            let g = GRADIENTS[hash_lattice(self.seed, octave, wrap(ix + dx), wrap(iy + dy))];
            g.0 * (fx - dx as f64) + g.1 * (fy - dy as f64)
        };
        let u = fade(fx);
        let v = fade(fy);
        let n = lerp(
            v,
            lerp(u, corner(0, 0), corner(1, 0)),
            lerp(u, corner(0, 1), corner(1, 1)),
        );
        (n * RANGE_SCALE).clamp(-1.0, 1.0)
    }

    /// Fractal sum normalized by the total amplitude, in `[-1, 1]`.
    pub fn signed(&self, x: f64, y: f64) -> f64 {
        let mut freq = self.frequency;
        let mut amp = 1.0;
        let mut total = 0.0;
        let mut norm = 0.0;
        for k in 0..self.octaves {
            total += amp * self.gradient_noise(k, x * freq, y * freq);
            norm += amp;
            freq *= if self.period.is_some() {
                self.lacunarity.round().max(1.0)
            } else {
                self.lacunarity
            };
            amp *= self.persistence;
        }
        (total / norm).clamp(-1.0, 1.0)
    }

    /// Fractal noise mapped to `[0, 1]`.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        0.5 * (self.signed(x, y) + 1.0)
    }

    /// Upper bound on `|df/dx|`, `|df/dy|` of [`value`](Self::value).
    pub fn lipschitz_bound(&self) -> f64 {
        // Per unit-frequency octave: |d raw / dx| <= 2 * 1.875 * sqrt(2) + 1,
        // then the range stretch and the [0, 1] mapping.
        let per_octave = (2.0 * 1.875 * std::f64::consts::SQRT_2 + 1.0) * RANGE_SCALE * 0.5;
        let mut freq = self.frequency;
        let mut amp = 1.0;
        let (mut acc, mut norm) = (0.0, 0.0);
        for _ in 0..self.octaves {
            acc += amp * freq;
            norm += amp;
            freq *= self.lacunarity.max(1.0);
            amp *= self.persistence;
        }
        per_octave * acc / norm
    }
}

/// Free-function form of [`NoiseField::value`].
pub fn perlin(field: &NoiseField, x: f64, y: f64) -> f64 {
    field.value(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_points_map_to_half() {
        let field = NoiseField::single(1234);
        assert_eq!(perlin(&field, 3.0, 7.0), 0.5);
        let mut rng = Rng::new(4);
        for _ in 0..1000 {
            let x = rng.range_inclusive(0, 2000) as f64 - 1000.0;
            let y = rng.range_inclusive(0, 2000) as f64 - 1000.0;
            assert_eq!(perlin(&field, x, y), 0.5);
        }
    }

    #[test]
    fn output_in_unit_interval() {
        let field = NoiseField::new(&NoiseSpec::default(), 9);
        let mut rng = Rng::new(5);
        for _ in 0..10_000 {
            let v = field.value(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0));
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn seeds_differ_almost_everywhere() {
        let a = NoiseField::new(&NoiseSpec::default(), 1);
        let b = NoiseField::new(&NoiseSpec::default(), 2);
        let mut rng = Rng::new(6);
        let n = 10_000;
        let mut differ = 0;
        for _ in 0..n {
            let (x, y) = (rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
            assert_eq!(a.value(x, y), a.clone().value(x, y));
            if a.value(x, y) != b.value(x, y) {
                differ += 1;
            }
        }
        assert!(differ as f64 >= 0.99 * n as f64);
    }

    #[test]
    fn periodic_field_tiles() {
        let field = NoiseField::new(&NoiseSpec::with_frequency(1.0), 3).periodic(4);
        for i in 0..50 {
            let x = i as f64 * 0.173;
            let y = i as f64 * 0.311;
            assert!((field.value(x, y) - field.value(x + 4.0, y)).abs() < 1e-12);
            assert!((field.value(x, y) - field.value(x, y + 4.0)).abs() < 1e-12);
        }
    }
}
