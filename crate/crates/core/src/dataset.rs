//! Whole-dataset generation and the on-disk layout.
//!
//! Layout: `out/manifest.json` plus `img_#####_rgb.png` and
//! `img_#####_label.png` per image. Image `i` draws from
//! `Rng::new(seed).fork_index("image", i)`, so every image can be rebuilt on
//! its own and the worker count never changes the output bytes.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GeneratorConfig, PaletteSpec, SemanticClass};
use crate::error::{Error, Result};
use crate::raster::{Raster, Rgb};
use crate::render::{render_pair, RenderOutput};
use crate::rng::Rng;
use crate::scene::{build_scene, LabelPalette, LightSpec, Scene};
use crate::TOOL_VERSION;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn rgb_file_name(index: u64) -> String {
    format!("img_{index:05}_rgb.png")
}

pub fn label_file_name(index: u64) -> String {
    format!("img_{index:05}_label.png")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    /// `[fx, fy, cx, cy]` at the output resolution.
    pub intrinsics: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub index: u64,
    pub rgb: String,
    pub label: String,
    /// Key of the image's random stream.
    pub seed: u64,
    /// Placed plants per class.
    pub plants: BTreeMap<String, usize>,
    /// Placed plants per species.
    pub species: BTreeMap<String, usize>,
    /// Label pixels per class; background pixels count as soil.
    pub label_pixels: BTreeMap<String, u64>,
    pub light: LightSpec,
    pub camera: CameraPose,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub index: usize,
    pub name: String,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// False when the run stopped early; `images` then holds what finished.
    pub complete: bool,
    pub palette: PaletteSpec,
    /// Label color to class index map for trainers.
    pub classes: Vec<ClassEntry>,
    pub config: GeneratorConfig,
    pub images: Vec<ImageRecord>,
}

impl DatasetManifest {
    fn new(config: &GeneratorConfig) -> Self {
        let palette = LabelPalette::from(&config.palette);
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            complete: false,
            palette: config.palette.clone(),
            classes: SemanticClass::ALL
                .iter()
                .map(|&c| ClassEntry {
                    index: c.index(),
                    name: c.name().to_string(),
                    color: palette.color(c),
                })
                .collect(),
            config: config.clone(),
            images: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    /// Per-class plant totals over all records.
    pub fn plant_totals(&self) -> BTreeMap<String, usize> {
        let mut totals = BTreeMap::new();
        for r in &self.images {
            for (k, v) in &r.plants {
                *totals.entry(k.clone()).or_default() += v;
            }
        }
        totals
    }

    /// Per-species plant totals over all records.
    pub fn species_totals(&self) -> BTreeMap<String, usize> {
        let mut totals = BTreeMap::new();
        for r in &self.images {
            for (k, v) in &r.species {
                *totals.entry(k.clone()).or_default() += v;
            }
        }
        totals
    }
}

/// One rendered image with its scene and record.
pub struct GeneratedImage {
    pub scene: Scene,
    pub output: RenderOutput,
    pub record: ImageRecord,
}

/// Random stream of image `index`.
pub fn image_rng(config: &GeneratorConfig, index: u64) -> Rng {
    Rng::new(config.seed).fork_index("image", index)
}

/// Build and render image `index` without touching the file system.
pub fn generate_image(config: &GeneratorConfig, index: u64) -> Result<GeneratedImage> {
    let rng = image_rng(config, index);
    let scene = build_scene(config, &rng)?;
    let output = render_pair(&scene, config.render.rgb_supersample, config.render.near_m);

    let mut plants = BTreeMap::new();
    for (class, n) in scene.census() {
        plants.insert(SemanticClass::from(class).name().to_string(), n);
    }
    let mut species = BTreeMap::new();
    for p in &scene.plants {
        *species.entry(p.species.clone()).or_default() += 1;
    }
    let mut label_pixels: BTreeMap<String, u64> = BTreeMap::new();
    for &c in output.label.color.data() {
        if let Some(class) = scene.palette.class_of(c) {
            *label_pixels.entry(class.name().to_string()).or_default() += 1;
        }
    }
    let cam = &scene.camera;
    let center = cam.center();
    let record = ImageRecord {
        index,
        rgb: rgb_file_name(index),
        label: label_file_name(index),
        seed: rng.key(),
        plants,
        species,
        label_pixels,
        light: scene.light.clone(),
        camera: CameraPose {
            position: [center.x, center.y, center.z],
            yaw_deg: scene.yaw_deg,
            pitch_deg: config.camera.pitch_deg,
            intrinsics: [cam.fx, cam.fy, cam.cx, cam.cy],
        },
        warnings: scene.warnings.clone(),
    };
    Ok(GeneratedImage {
        scene,
        output,
        record,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// PNG bytes of an 8-bit RGB raster.
pub fn encode_png(buffer: &Raster<Rgb>) -> Result<Vec<u8>> {
    let (w, h) = buffer.dims();
    let raw: Vec<u8> = buffer.data().iter().flatten().copied().collect();
    let mut bytes = Vec::new();
    PngEncoder::new(&mut bytes)
        .write_image(&raw, w, h, ExtendedColorType::Rgb8)
        .map_err(|source| Error::Image {
            path: PathBuf::from("<memory>"),
            source,
        })?;
    Ok(bytes)
}

/// Lossless 8-bit RGB PNG, written atomically.
pub fn write_image(buffer: &Raster<Rgb>, path: &Path) -> Result<()> {
    let bytes = encode_png(buffer).map_err(|e| match e {
        Error::Image { source, .. } => Error::Image {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    /// Keep records of a previous run whose files still exist.
    pub resume: bool,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { resume: false, jobs: 1 }
    }
}

fn reusable_records(config: &GeneratorConfig, out: &Path) -> Result<BTreeMap<u64, ImageRecord>> {
    let path = out.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let previous = DatasetManifest::load(&path)?;
    let mut same = previous.config.clone();
    same.dataset_size = config.dataset_size;
    if same != *config || previous.tool_version != TOOL_VERSION {
        return Err(Error::ConfigInvalid(format!(
            "{} was produced by a different config or tool version; cannot resume",
            path.display()
        )));
    }
    Ok(previous
        .images
        .into_iter()
        .filter(|r| r.index < config.dataset_size && out.join(&r.rgb).is_file() && out.join(&r.label).is_file())
        .map(|r| (r.index, r))
        .collect())
}

/// Generate `config.dataset_size` images into `out` and write the manifest.
///
/// Config errors abort before anything is written. On a failure the images
/// finished so far are flushed to a manifest marked incomplete and the first
/// error by image index is returned.
pub fn generate_dataset(config: &GeneratorConfig, out: &Path, options: &GenerateOptions) -> Result<DatasetManifest> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let reuse = if options.resume {
        reusable_records(config, out)?
    } else {
        BTreeMap::new()
    };
    let todo: Vec<u64> = (0..config.dataset_size).filter(|i| !reuse.contains_key(i)).collect();
    if !reuse.is_empty() {
        info!("resuming: {} images kept, {} to generate", reuse.len(), todo.len());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let abort = AtomicBool::new(false);
    let done = AtomicUsize::new(0);
    let total = todo.len();
    let results: Vec<(u64, Result<ImageRecord>)> = pool.install(|| {
        todo.par_iter()
            .map(|&index| {
                if abort.load(Ordering::Relaxed) {
                    return (index, Err(Error::Structural("aborted".into())));
                }
                let result = (|| {
                    let image = generate_image(config, index)?;
                    write_image(&image.output.rgb.color, &out.join(&image.record.rgb))?;
                    write_image(&image.output.label.color, &out.join(&image.record.label))?;
                    for w in &image.record.warnings {
                        warn!("image {index}: {w}");
                    }
                    Ok(image.record)
                })();
                if result.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n % 50 == 0 || n == total {
                    info!("{n}/{total} images");
                }
                (index, result)
            })
            .collect()
    });

    let mut manifest = DatasetManifest::new(config);
    let mut records = reuse;
    let mut first_error = None;
    for (index, result) in results {
        match result {
            Ok(record) => {
                records.insert(index, record);
            }
            Err(Error::Structural(m)) if m == "aborted" => {}
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    manifest.images = records.into_values().collect();
    manifest.complete = first_error.is_none();
    let saved = manifest.save(&out.join(MANIFEST_FILE));
    match first_error {
        Some(e) => Err(e),
        None => saved.map(|()| manifest),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::read_rgb;

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = LabelPalette::default();
        let label = Raster::from_fn(480, 360, |x, y| match (x + 3 * y) % 3 {
            0 => p.soil,
            1 => p.crop,
            _ => p.weed,
        });
        let path = dir.path().join("l.png");
        write_image(&label, &path).unwrap();
        assert_eq!(read_rgb(&path).unwrap(), label);
        assert_eq!(image::image_dimensions(&path).unwrap(), (480, 360));

        let black = Raster::filled(7, 5, [0u8, 0, 0]);
        write_image(&black, &path).unwrap();
        assert!(read_rgb(&path).unwrap().data().iter().all(|c| *c == [0, 0, 0]));
    }

    #[test]
    fn image_streams_are_independent_of_order() {
        let cfg = GeneratorConfig::with_seed(11);
        assert_eq!(image_rng(&cfg, 5), image_rng(&cfg, 5));
        assert_ne!(image_rng(&cfg, 5).key(), image_rng(&cfg, 6).key());
    }
}
