//! Per-pixel diagonal-Gaussian segmenter.
//!
//! Features per pixel: R, G, B scaled to `[0, 1]`, excess green `2G - R - B`,
//! luminance variance over a 5x5 window and the circular mean hue (degrees)
//! over the same window. Each class is one Gaussian with diagonal covariance;
//! prediction picks the highest log-likelihood plus log prior.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SemanticClass;
use crate::dataset::{DatasetManifest, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::raster::{luminance, read_rgb, rgb_to_hsv, Raster, Rgb};
use crate::rng::Rng;
use crate::scene::LabelPalette;

pub const FEATURES: usize = 6;
pub const FEATURE_NAMES: [&str; FEATURES] = ["r", "g", "b", "exg", "lum_var5", "hue_mean5"];
pub const MODEL_FORMAT: &str = "agrisynth-centroid";
pub const MODEL_VERSION: u32 = 1;
pub const VARIANCE_FLOOR: f64 = 1e-6;
const WINDOW_RADIUS: i64 = 2;

pub type PixelFeature = [f64; FEATURES];

/// Feature vector of every pixel, row-major. Windows clamp at the borders.
pub fn pixel_features(image: &Raster<Rgb>) -> Vec<PixelFeature> {
    let (w, h) = image.dims();
    let lum: Vec<f64> = image.data().iter().map(|&c| luminance(c)).collect();
    let hue: Vec<(f64, f64)> = image
        .data()
        .iter()
        .map(|c| {
            let (hh, _, _) = rgb_to_hsv(f64::from(c[0]), f64::from(c[1]), f64::from(c[2]));
            let a = hh.to_radians();
            (a.cos(), a.sin())
        })
        .collect();
    let clamp = |v: i64, n: u32| v.clamp(0, i64::from(n) - 1) as usize;
    let mut out = Vec::with_capacity(image.len());
    for y in 0..h {
        for x in 0..w {
            let (mut s, mut s2, mut hc, mut hs) = (0.0, 0.0, 0.0, 0.0);
            for dy in -WINDOW_RADIUS..=WINDOW_RADIUS {
                let yy = clamp(i64::from(y) + dy, h);
                for dx in -WINDOW_RADIUS..=WINDOW_RADIUS {
                    let k = yy * w as usize + clamp(i64::from(x) + dx, w);
                    s += lum[k];
                    s2 += lum[k] * lum[k];
                    hc += hue[k].0;
                    hs += hue[k].1;
                }
            }
            let n = ((2 * WINDOW_RADIUS + 1) * (2 * WINDOW_RADIUS + 1)) as f64;
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            let hue_mean = if hc == 0.0 && hs == 0.0 {
                0.0
            } else {
                hs.atan2(hc).to_degrees().rem_euclid(360.0)
            };
            let c = image.get(x, y).map(|v| f64::from(v) / 255.0);
            out.push([c[0], c[1], c[2], 2.0 * c[1] - c[0] - c[2], var, hue_mean]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub name: String,
    pub color: [u8; 3],
    pub prior: f64,
    pub samples: u64,
    pub mean: PixelFeature,
    pub variance: PixelFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub features: Vec<String>,
    pub sample_rate: f64,
    pub seed: u64,
    pub classes: Vec<ClassModel>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: u64,
    sum: PixelFeature,
    sum_sq: PixelFeature,
}

impl Tally {
    fn add(&mut self, f: &PixelFeature) {
        self.n += 1;
        for k in 0..FEATURES {
            self.sum[k] += f[k];
            self.sum_sq[k] += f[k] * f[k];
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.n += o.n;
        for k in 0..FEATURES {
            self.sum[k] += o.sum[k];
            self.sum_sq[k] += o.sum_sq[k];
        }
    }
}

type Tallies = [Tally; 3];

fn tally_image(image: &Raster<Rgb>, label: &Raster<Rgb>, palette: &LabelPalette, rate: f64, rng: &mut Rng) -> Result<Tallies> {
    if image.dims() != label.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image is {:?}, label {:?}",
            image.dims(),
            label.dims()
        )));
    }
    let features = pixel_features(image);
    let mut t = Tallies::default();
    let (w, _) = label.dims();
    for (k, (f, &c)) in features.iter().zip(label.data()).enumerate() {
        let class = palette.class_of(c).ok_or(Error::UnknownColor {
            x: k as u32 % w,
            y: k as u32 / w,
            color: c,
        })?;
        if rate >= 1.0 || rng.chance(rate) {
            t[class.index()].add(f);
        }
    }
    Ok(t)
}

impl CentroidModel {
    /// Fit one Gaussian per class over pixels sampled at `sample_rate`.
    /// Image `i` samples from its own stream, so the result does not depend
    /// on evaluation order.
    pub fn train(
        pairs: &[(Raster<Rgb>, Raster<Rgb>)],
        palette: &LabelPalette,
        sample_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!("sample rate {sample_rate} must lie in (0, 1]")));
        }
        let base = Rng::new(seed);
        let per_image: Vec<Tallies> = pairs
            .par_iter()
            .enumerate()
            .map(|(i, (img, lab))| tally_image(img, lab, palette, sample_rate, &mut base.fork_index("sample", i as u64)))
            .collect::<Result<_>>()?;
        let mut total = Tallies::default();
        for t in &per_image {
            for c in 0..3 {
                total[c].merge(&t[c]);
            }
        }
        Self::from_tallies(&total, palette, sample_rate, seed)
    }

    fn from_tallies(total: &Tallies, palette: &LabelPalette, sample_rate: f64, seed: u64) -> Result<Self> {
        let n_all: u64 = total.iter().map(|t| t.n).sum();
        let present = total.iter().filter(|t| t.n > 0).count();
        if present < 2 {
            return Err(Error::InvalidArgument(format!(
                "training data holds {present} class(es); at least 2 are needed"
            )));
        }
        let classes = SemanticClass::ALL
            .iter()
            .zip(total)
            .filter(|(_, t)| t.n > 0)
            .map(|(&c, t)| {
                let n = t.n as f64;
                let mean: PixelFeature = std::array::from_fn(|k| t.sum[k] / n);
                let variance = std::array::from_fn(|k| (t.sum_sq[k] / n - mean[k] * mean[k]).max(VARIANCE_FLOOR));
                ClassModel {
                    name: c.name().to_string(),
                    color: palette.color(c),
                    prior: n / n_all as f64,
                    samples: t.n,
                    mean,
                    variance,
                }
            })
            .collect();
        Ok(Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            tool_version: crate::TOOL_VERSION.to_string(),
            features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            sample_rate,
            seed,
            classes,
        })
    }

    /// Index into `classes` of the most likely class for one feature vector.
    pub fn classify(&self, f: &PixelFeature) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, c) in self.classes.iter().enumerate() {
            let mut score = c.prior.ln();
            for k in 0..FEATURES {
                let d = f[k] - c.mean[k];
                score -= 0.5 * (c.variance[k].ln() + d * d / c.variance[k]);
            }
            if score > best.0 {
                best = (score, i);
            }
        }
        best.1
    }

    /// Label raster in the training palette.
    pub fn predict(&self, image: &Raster<Rgb>) -> Raster<Rgb> {
        let (w, h) = image.dims();
        let labels: Vec<Rgb> = pixel_features(image)
            .iter()
            .map(|f| self.classes[self.classify(f)].color)
            .collect();
        Raster::from_vec(w, h, labels).expect("feature count matches pixel count")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported model {} v{} (expected {MODEL_FORMAT} v{MODEL_VERSION})",
                path.display(),
                model.format,
                model.version
            )));
        }
        if model.features.len() != FEATURES {
            return Err(Error::InvalidArgument(format!(
                "{}: model has {} features, expected {FEATURES}",
                path.display(),
                model.features.len()
            )));
        }
        Ok(model)
    }
}

/// Palette of a dataset directory: its manifest's, or the default.
pub fn dataset_palette(dir: &Path) -> Result<LabelPalette> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.is_file() {
        Ok(LabelPalette::from(&DatasetManifest::load(&manifest)?.palette))
    } else {
        Ok(LabelPalette::default())
    }
}

/// Stems `img_#####` with both `_rgb.png` and `_label.png` present, sorted.
pub fn paired_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix("_rgb.png") {
            if dir.join(format!("{stem}_label.png")).is_file() {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Train on every image pair of a generated dataset directory.
pub fn train_dir(dir: &Path, sample_rate: f64, seed: u64) -> Result<CentroidModel> {
    let palette = dataset_palette(dir)?;
    let stems = paired_stems(dir)?;
    if stems.is_empty() {
        return Err(Error::InvalidArgument(format!("no image pairs in {}", dir.display())));
    }
    let pairs: Vec<(Raster<Rgb>, Raster<Rgb>)> = stems
        .par_iter()
        .map(|s| {
            Ok((
                read_rgb(&dir.join(format!("{s}_rgb.png")))?,
                read_rgb(&dir.join(format!("{s}_label.png")))?,
            ))
        })
        .collect::<Result<_>>()?;
    CentroidModel::train(&pairs, &palette, sample_rate, seed)
}

/// Predict every `*_rgb.png` of `input` into `*_label.png` files in `out`,
/// matching the ground-truth names of a generated dataset. Returns the
/// number of images written.
pub fn predict_dir(model: &CentroidModel, input: &Path, out: &Path) -> Result<usize> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(input).map_err(|e| Error::io(input, e))? {
        let name = entry.map_err(|e| Error::io(input, e))?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix("_rgb.png") {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    stems
        .par_iter()
        .map(|s| {
            let image = read_rgb(&input.join(format!("{s}_rgb.png")))?;
            crate::dataset::write_image(&model.predict(&image), &out.join(format!("{s}_label.png")))
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(stems.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn striped(w: u32, h: u32, colors: [Rgb; 3], palette: &LabelPalette) -> (Raster<Rgb>, Raster<Rgb>) {
        let class = |x: u32| (x * 3 / w) as usize;
        (
            Raster::from_fn(w, h, |x, _| colors[class(x)]),
            Raster::from_fn(w, h, |x, _| palette.color(SemanticClass::ALL[class(x)])),
        )
    }

    #[test]
    fn separable_colors_are_recovered() {
        let p = LabelPalette::default();
        let colors = [[120, 80, 40], [40, 170, 50], [200, 40, 160]];
        let model = CentroidModel::train(&[striped(60, 20, colors, &p)], &p, 1.0, 1).unwrap();
        for (i, c) in colors.iter().enumerate() {
            let out = model.predict(&Raster::filled(9, 9, *c));
            assert!(out.data().iter().all(|v| *v == p.color(SemanticClass::ALL[i])));
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let p = LabelPalette::default();
        let pair = (Raster::filled(8, 8, [10u8, 20, 30]), Raster::filled(8, 8, p.soil));
        assert!(CentroidModel::train(&[pair], &p, 1.0, 0).is_err());
    }

    #[test]
    fn subsampled_means_are_stable() {
        let p = LabelPalette::default();
        let mut rng = Rng::new(9);
        let image = Raster::from_fn(200, 200, |x, _| {
            let base: [f64; 3] = if x < 100 { [120.0, 100.0, 20.0] } else { [50.0, 150.0, 60.0] };
            base.map(|b| (b + rng.uniform(-20.0, 20.0)) as u8)
        });
        let label = Raster::from_fn(200, 200, |x, _| if x < 100 { p.soil } else { p.crop });
        let pairs = [(image, label)];
        let full = CentroidModel::train(&pairs, &p, 1.0, 3).unwrap();
        let sub = CentroidModel::train(&pairs, &p, 0.1, 3).unwrap();
        for (a, b) in full.classes.iter().zip(&sub.classes) {
            for k in 0..FEATURES {
                let rel = (a.mean[k] - b.mean[k]).abs() / a.mean[k].abs().max(1e-3);
                assert!(rel < 0.02, "{} feature {k}: {rel}", a.name);
            }
        }
    }

    #[test]
    fn training_and_prediction_are_deterministic() {
        let p = LabelPalette::default();
        let pair = striped(30, 10, [[90, 60, 30], [30, 140, 40], [150, 30, 30]], &p);
        let a = CentroidModel::train(&[pair.clone()], &p, 0.5, 4).unwrap();
        let b = CentroidModel::train(&[pair.clone()], &p, 0.5, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&pair.0), b.predict(&pair.0));
    }

    #[test]
    fn model_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = LabelPalette::default();
        let model =
            CentroidModel::train(&[striped(30, 10, [[90, 60, 30], [30, 140, 40], [150, 30, 30]], &p)], &p, 1.0, 0)
                .unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(CentroidModel::load(&path).unwrap(), model);
    }

    #[test]
    fn features_are_finite() {
        let image = Raster::from_fn(12, 7, |x, y| [(x * 20) as u8, (y * 30) as u8, 128]);
        assert!(pixel_features(&image).iter().flatten().all(|v| v.is_finite()));
    }
}
